"""Video-to-text retrieval-augmented QA engine.

Converts pre-extracted video frames plus an audio track into a timestamped
Markdown knowledge base, serves top-k cosine retrieval over embedded chunks,
answers questions through templated prompts, and scores answers with a 0-3
judge protocol. All model calls go through pluggable providers; deterministic
mocks make the whole pipeline runnable offline.
"""

__version__ = "0.1.0"
