"""Library service: books, members, loans, and the defaulter report.

Persistence is an append-only operation log (one JSON object per line),
replayed at startup. The defaulter flag is definitional: any open loan.
"""

from __future__ import annotations

import json
import threading
from datetime import date
from pathlib import Path
from typing import Callable

from i3.broker import MethodSig
from i3.client import TransportError, WireFault
from i3.container import BoundMethod, ServiceImplementation
from i3.faults import (
    AmisUnavailable,
    BookAlreadyOut,
    NoOpenLoan,
    UnknownBook,
    UnknownMember,
    UnknownStudent,
)
from i3.records import (
    SERVICE_AMIS,
    BookRecord,
    LibraryStudentRecord,
    LoanRecord,
    to_value,
)

OPS_LOG = "ops.log"


class LmisStore:
    """Replayable operation log; every mutation is one appended line."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.path = self.root / OPS_LOG
        self._lock = threading.Lock()
        self.books: dict[str, BookRecord] = {}
        self.members: set[str] = set()
        self.loans: list[LoanRecord] = []
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        self._apply(json.loads(line))

    def _apply(self, op: dict) -> None:
        kind = op["op"]
        if kind == "book_added":
            rec = BookRecord(**{k: op[k] for k in ("id", "isbn", "title", "author", "publisher", "year")})
            self.books[rec.id] = rec
        elif kind == "member_enrolled":
            self.members.add(op["student_id"])
        elif kind == "issued":
            self.loans.append(
                LoanRecord(
                    book_id=op["book_id"],
                    student_id=op["student_id"],
                    issued_at=date.fromisoformat(op["on"]),
                )
            )
        elif kind == "returned":
            loan = self._open_loan(op["book_id"])
            if loan is not None:
                loan.returned_at = date.fromisoformat(op["on"])
        else:
            raise ValueError(f"unknown op {kind!r} in {self.path}")

    def append(self, op: dict) -> None:
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(op, sort_keys=True) + "\n")
            self._apply(op)

    def _open_loan(self, book_id: str) -> LoanRecord | None:
        for loan in self.loans:
            if loan.book_id == book_id and loan.returned_at is None:
                return loan
        return None

    def open_loans_of(self, student_id: str) -> list[LoanRecord]:
        return [
            loan
            for loan in self.loans
            if loan.student_id == student_id and loan.returned_at is None
        ]


class LibraryService:
    impl_id = "LibraryDataBaseManager"

    def __init__(self, store_dir: Path, amis=None, today: Callable[[], date] = date.today):
        self.store = LmisStore(store_dir)
        self._amis = amis  # gateway used to confirm student identity
        self._today = today

    def _confirm_student(self, student_id: str) -> None:
        if self._amis is None:
            raise AmisUnavailable("no admissions gateway configured")
        try:
            self._amis.call(SERVICE_AMIS, "getStudent", [student_id])
        except WireFault as e:
            if e.fault.reason == "NotFound":
                raise UnknownStudent(student_id) from e
            raise AmisUnavailable(f"admissions fault: {e.fault.code}") from e
        except TransportError as e:
            raise AmisUnavailable(str(e)) from e

    def enroll_member(self, student_id: str) -> None:
        self._confirm_student(student_id)
        self.store.append({"op": "member_enrolled", "student_id": student_id})

    def issue_book(self, book_id: str, student_id: str) -> LoanRecord:
        if student_id not in self.store.members:
            raise UnknownMember(student_id)
        if book_id not in self.store.books:
            raise UnknownBook(book_id)
        if self.store._open_loan(book_id) is not None:
            raise BookAlreadyOut(book_id)
        on = self._today().isoformat()
        self.store.append({"op": "issued", "book_id": book_id, "student_id": student_id, "on": on})
        loan = self.store._open_loan(book_id)
        assert loan is not None
        return loan

    def return_book(self, book_id: str) -> LoanRecord:
        loan = self.store._open_loan(book_id)
        if loan is None:
            raise NoOpenLoan(book_id)
        self.store.append({"op": "returned", "book_id": book_id, "on": self._today().isoformat()})
        return loan

    def library_status(self, student_id: str) -> LibraryStudentRecord:
        open_loans = self.store.open_loans_of(student_id)
        return LibraryStudentRecord(
            student_id=student_id, open_loans=open_loans, defaulter=bool(open_loans)
        )

    def implementation(self) -> ServiceImplementation:
        return ServiceImplementation(
            id=self.impl_id,
            methods={
                "enrollMember": BoundMethod(
                    MethodSig("enrollMember", ("string",), "nil"),
                    lambda args: self.enroll_member(args[0]),
                ),
                "issueBook": BoundMethod(
                    MethodSig("issueBook", ("string", "string"), "record"),
                    lambda args: to_value(self.issue_book(args[0], args[1])),
                ),
                "returnBook": BoundMethod(
                    MethodSig("returnBook", ("string",), "record"),
                    lambda args: to_value(self.return_book(args[0])),
                ),
                "libraryStatus": BoundMethod(
                    MethodSig("libraryStatus", ("string",), "record"),
                    lambda args: to_value(self.library_status(args[0])),
                ),
            },
            record_types=(LibraryStudentRecord.QNAME,),
        )
