"""Domain errors raised by service implementations and their wire fault mapping.

Every domain error crosses the wire as a Fault whose code comes from the
closed fault-code set; the exception class name rides in the fault reason so
callers can discriminate (e.g. LMIS turning an admissions "NotFound" into
UnknownStudent).
"""

from __future__ import annotations


class ServiceError(Exception):
    """Caller-attributable domain failure; maps to Client.BadArguments."""

    fault_code = "Client.BadArguments"

    @property
    def reason(self) -> str:
        return type(self).__name__


class NotFound(ServiceError):
    pass


class DuplicateId(ServiceError):
    pass


class InvalidRecord(ServiceError):
    def __init__(self, field: str, message: str = ""):
        super().__init__(f"{field}: {message}" if message else field)
        self.field = field


class UnknownStudent(ServiceError):
    pass


class UnknownProgramme(ServiceError):
    pass


class AmisUnavailable(ServiceError):
    """The admissions service could not be reached; fail closed."""

    fault_code = "Server.Unavailable"


class UnknownBook(ServiceError):
    pass


class UnknownMember(ServiceError):
    pass


class BookAlreadyOut(ServiceError):
    pass


class NoOpenLoan(ServiceError):
    pass


class RoomOccupied(ServiceError):
    pass


class AlreadyAllotted(ServiceError):
    pass


class NoActiveAllotment(ServiceError):
    pass


class NotEligible(ServiceError):
    pass


class DuesOutstanding(ServiceError):
    """Certificate refused: verification did not come back all-clear."""

    def __init__(self, status):
        super().__init__(status.summary())
        self.status = status


REASON_CLASSES = {
    cls.__name__: cls
    for cls in [
        NotFound,
        DuplicateId,
        InvalidRecord,
        UnknownStudent,
        UnknownProgramme,
        AmisUnavailable,
        UnknownBook,
        UnknownMember,
        BookAlreadyOut,
        NoOpenLoan,
        RoomOccupied,
        AlreadyAllotted,
        NoActiveAllotment,
        NotEligible,
        DuesOutstanding,
    ]
}
