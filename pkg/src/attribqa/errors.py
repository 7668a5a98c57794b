"""Exception hierarchy shared by every attribqa module."""

from __future__ import annotations


class AttribQAError(Exception):
    """Base class for all toolkit errors."""


class CitationFormatError(AttribQAError, ValueError):
    pass


class EmptyInputError(CitationFormatError):
    pass


class StrictParseError(CitationFormatError):
    """Malformed citation markup encountered with ``strict=True``.

    ``kind`` is one of ``unclosed``, ``non_integer``, ``nested``, ``empty_span``,
    ``bad_index``, ``stray_bracket`` or ``orphan_citation``.
    """

    def __init__(self, kind: str, position: int, raw: str):
        self.kind = kind
        self.position = position
        excerpt = raw[max(0, position - 20) : position + 20]
        super().__init__(f"{kind} at offset {position}: {excerpt!r}")


class InvariantViolation(CitationFormatError):
    pass


class LevelMismatch(AttribQAError, ValueError):
    pass


class IndexOutOfRange(AttribQAError, IndexError):
    def __init__(self, index: int, n_passages: int):
        self.index = index
        self.n_passages = n_passages
        super().__init__(f"citation [{index}] out of range for {n_passages} passages")


class NotApplicableError(AttribQAError, ValueError):
    pass


class NoUnitsError(AttribQAError, ValueError):
    pass


class OverlappingMarks(AttribQAError, ValueError):
    pass


class MarkOutOfBounds(AttribQAError, ValueError):
    pass


class UnresolvableCitation(AttribQAError, ValueError):
    pass


class PoolTooSmall(AttribQAError, ValueError):
    pass


class SchemaViolation(AttribQAError, ValueError):
    def __init__(self, line: int, field: str, message: str = ""):
        self.line = line
        self.field = field
        super().__init__(f"line {line}: field {field!r} {message}".rstrip())


class GoldParseError(AttribQAError, ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ClientError(AttribQAError):
    """Base class for completion-endpoint failures."""

    retryable = False


class TransportError(ClientError):
    retryable = True

    def __init__(self, kind: str, detail: str = ""):
        self.kind = kind
        super().__init__(f"transport error ({kind}){': ' + detail if detail else ''}")


class HttpStatusError(ClientError):
    def __init__(self, code: int, body: str = ""):
        self.code = code
        self.body = body
        self.retryable = code == 429 or code >= 500
        super().__init__(f"HTTP {code}: {body}")


class ContextOverflow(HttpStatusError):
    """The prompt does not fit the model's context window."""


class CompletionTimeout(ClientError):
    retryable = True


class AuthMissing(ClientError):
    pass


class MockMiss(ClientError):
    """A mock client was asked for a prompt it has no response for."""
