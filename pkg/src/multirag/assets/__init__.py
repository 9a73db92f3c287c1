"""Prompt text files shipped with the package."""

from importlib import resources


def load_asset(name: str) -> str:
    """Return the contents of a bundled prompt file, byte for byte."""
    return resources.files(__name__).joinpath(name).read_text(encoding="utf-8")
