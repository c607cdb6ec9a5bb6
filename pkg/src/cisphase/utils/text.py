"""Text helpers shared by the CSV writers and the CLI."""

import hashlib


def format_float(value: float) -> str:
    """ASCII decimal with 17 significant digits (exact round-trip for doubles)."""
    return "%.17g" % float(value)


def content_digest(text: str) -> str:
    """SHA-256 hex digest of a text payload."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
