"""Structural validation of in-memory class models."""

from __future__ import annotations

from .model import ClassFile
from .reader import parse_class
from .writer import serialize_class


def validate_class(cf: ClassFile) -> ClassFile:
    """Check every index invariant of ``cf``.

    The model is encoded and re-parsed, so every pool reference is checked
    by the same rules the parser applies to input files.  Returns the
    re-parsed model (offsets normalized); raises ``MalformedClass`` or
    ``UnencodableModel`` on violations.
    """
    return parse_class(serialize_class(cf))
