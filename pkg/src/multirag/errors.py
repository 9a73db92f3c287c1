"""Exception types shared across the engine."""


class EngineError(Exception):
    """Base class for engine failures."""


class InvalidInputError(EngineError, ValueError):
    """An input violates an operation precondition."""


class IntegrityError(EngineError):
    """Stored or referenced data is internally inconsistent."""


class ProviderError(EngineError):
    """Base class for model-provider failures."""


class TransientProviderError(ProviderError):
    """Retryable failure (HTTP 429/5xx, timeouts, dropped connections)."""


class ProviderUnavailableError(ProviderError):
    """Provider kept failing after all retries were spent."""


class ProtocolError(ProviderError):
    """Provider answered, but not in the expected wire shape."""


class ScoringError(EngineError):
    """The judge never produced a parsable score for an item."""


class StageError(EngineError):
    """Pipeline failure tagged with the stage it occurred in."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
