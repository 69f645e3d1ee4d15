"""Exception types shared across bineq."""

from __future__ import annotations


class BineqError(Exception):
    """Base class for all errors raised by this package."""


class MalformedClass(BineqError):
    """The input is not a well-formed class file.

    ``offset`` is the byte offset of the first violation, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)


class UnencodableModel(BineqError):
    """A class model cannot be written back in the class file format."""


class RenderFailure(BineqError):
    pass


class NormalizeFailure(BineqError):
    pass


class TlshError(BineqError):
    pass


class InputTooShort(TlshError):
    pass


class InsufficientComplexity(TlshError):
    pass


class LexError(BineqError):
    pass


class ArchiveUnreadable(BineqError):
    pass


class NoTarget(BineqError):
    """A mutation found nothing in the class it could apply to."""


class RepoError(BineqError):
    pass


class NotFound(RepoError):
    pass


class MetadataParseError(RepoError):
    pass


class ChecksumMismatch(RepoError):
    pass


class NetworkError(RepoError):
    pass


class NoMatch(RepoError):
    pass
