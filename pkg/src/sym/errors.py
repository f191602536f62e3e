"""Error hierarchy shared by every layer; `code` matches the wire protocol."""

from typing import Any, Optional


class SymError(Exception):
    """Base class for all domain errors."""

    code = "INTERNAL"

    def __init__(self, message: str, detail: Optional[Any] = None):
        super().__init__(message)
        self.message = message
        self.detail = detail

    def to_dict(self) -> dict:
        body = {"code": self.code, "message": self.message}
        if self.detail is not None:
            body["detail"] = self.detail
        return body


class NotFoundError(SymError):
    code = "NOT_FOUND"


class ValidationError(SymError):
    code = "VALIDATION"


class ProtocolError(SymError):
    """Session phase grammar violated (PRE once first, POST once last)."""

    code = "PROTOCOL"


class ConflictError(SymError):
    """Operation raced with an already-final state, e.g. a closed suggestion loop."""

    code = "CONFLICT"


class BusyError(SymError):
    """Another caller holds the per-dictionary update claim."""

    code = "BUSY"


class IncompleteSessionError(SymError):
    """Session lacks the PRE or POST spot an analysis needs."""

    code = "VALIDATION"
