"""Model-capability clients: OpenAI-dialect HTTP providers plus
deterministic offline mocks."""

from .base import (
    DEFAULT_AUTH_ENV,
    AudioSegment,
    EmbeddingProvider,
    EmbeddingVector,
    ProviderConfig,
    SpeechProvider,
    TextProvider,
    VisionProvider,
)
from .mock import (
    MOCK_EMBED_DIM,
    MockEmbeddingProvider,
    MockSpeechProvider,
    MockTextProvider,
    MockVisionProvider,
)
from .openai_http import (
    HttpEmbeddingProvider,
    HttpSpeechProvider,
    HttpTextProvider,
    HttpVisionProvider,
)

__all__ = [
    "DEFAULT_AUTH_ENV",
    "MOCK_EMBED_DIM",
    "AudioSegment",
    "EmbeddingProvider",
    "EmbeddingVector",
    "ProviderConfig",
    "SpeechProvider",
    "TextProvider",
    "VisionProvider",
    "MockEmbeddingProvider",
    "MockSpeechProvider",
    "MockTextProvider",
    "MockVisionProvider",
    "HttpEmbeddingProvider",
    "HttpSpeechProvider",
    "HttpTextProvider",
    "HttpVisionProvider",
]
