"""Record types that cross the wire, and their conversion to envelope values.

Every record class is registered under its namespaced wire name in
``urn:BeanService``. Conversion is driven by the dataclass field types:
scalars pass through, nested records and homogeneous lists recurse,
``X | None`` admits nil.
"""

from __future__ import annotations

import dataclasses
import re
import typing
from dataclasses import dataclass, field
from datetime import date
from types import UnionType

from i3.envelope import BeanMapping, BeanMappingTable, Record, Value
from i3.faults import InvalidRecord

BEAN_NS = "urn:BeanService"

_WIRE_CLASSES: dict[str, type] = {}


def wire_record(local: str):
    def deco(cls):
        cls.QNAME = f"myNS:{local}"
        _WIRE_CLASSES[cls.QNAME] = cls
        return cls

    return deco


@wire_record("StudentRecord")
@dataclass
class StudentRecord:
    id: str
    first_name: str
    last_name: str
    address: str
    contact_number: str
    faculty: str
    department: str
    degree_program: str
    graduation_batch_year: int


@wire_record("DepartmentRecord")
@dataclass
class DepartmentRecord:
    code: str
    title: str
    faculty: str


@wire_record("ProgrammeRecord")
@dataclass
class ProgrammeRecord:
    code: str
    title: str
    department_code: str
    duration_years: int


@wire_record("ListItem")
@dataclass
class ListItem:
    """Generic (label, value) pair returned by the list-serving methods."""

    label: str
    value: str


@wire_record("BookRecord")
@dataclass
class BookRecord:
    id: str
    isbn: str
    title: str
    author: str
    publisher: str
    year: int


@wire_record("LoanRecord")
@dataclass
class LoanRecord:
    book_id: str
    student_id: str
    issued_at: date
    returned_at: date | None = None


@wire_record("LibraryStudentRecord")
@dataclass
class LibraryStudentRecord:
    student_id: str
    open_loans: list[LoanRecord] = field(default_factory=list)
    defaulter: bool = False


@wire_record("AllotmentRecord")
@dataclass
class AllotmentRecord:
    room_id: str
    student_id: str
    allotted_at: date
    vacated_at: date | None = None


@wire_record("HostelStudentRecord")
@dataclass
class HostelStudentRecord:
    student_id: str
    active_allotment: AllotmentRecord | None = None
    dues: bool = False


EXAM_OUTCOMES = ("Passed", "Failed", "Incomplete")


@wire_record("ExamRecord")
@dataclass
class ExamRecord:
    student_id: str
    programme_code: str
    outcome: str
    recorded_at: date


PROVIDERS = ("Admissions", "Library", "Hostel")
VERDICTS = ("Clear", "Dues", "Unknown")


@wire_record("ProviderStatus")
@dataclass
class ProviderStatus:
    provider: str
    verdict: str
    detail: str = ""
    latency_ms: int = 0

    def __post_init__(self):
        if self.provider not in PROVIDERS:
            raise InvalidRecord("provider", self.provider)
        if self.verdict not in VERDICTS:
            raise InvalidRecord("verdict", self.verdict)
        if self.verdict == "Unknown" and not self.detail:
            raise InvalidRecord("detail", "Unknown verdict requires a reason")


@wire_record("NoDuesStatus")
@dataclass
class NoDuesStatus:
    student_id: str
    statuses: list[ProviderStatus]
    overall: str
    checked_at: str

    @classmethod
    def aggregate(
        cls, student_id: str, statuses: list[ProviderStatus], checked_at: str
    ) -> "NoDuesStatus":
        overall = "Clear" if all(s.verdict == "Clear" for s in statuses) else "Blocked"
        return cls(student_id=student_id, statuses=statuses, overall=overall, checked_at=checked_at)

    def summary(self) -> str:
        parts = []
        for s in self.statuses:
            text = s.verdict if not s.detail else f"{s.verdict} ({s.detail})"
            parts.append(f"{s.provider}={text}")
        return f"{self.overall}: " + "; ".join(parts)


@wire_record("Certificate")
@dataclass
class Certificate:
    serial: str
    student_id: str
    programme_code: str
    issued_at: str
    verification_snapshot: NoDuesStatus


STUDENT_ID_RE = re.compile(r"^S-\d{4}-\d{4}$")
GRADUATION_YEAR_FLOOR = 1947
CERT_SERIAL_RE = re.compile(r"^C-(\d{4})-(\d{6})$")


def validate_student(s: StudentRecord, current_year: int | None = None) -> None:
    current_year = current_year or date.today().year
    if not STUDENT_ID_RE.match(s.id):
        raise InvalidRecord("id", f"{s.id!r} does not match S-YYYY-NNNN")
    if not s.first_name or not s.last_name:
        raise InvalidRecord("name", "first and last name must be nonempty")
    if not GRADUATION_YEAR_FLOOR <= s.graduation_batch_year <= current_year + 8:
        raise InvalidRecord(
            "graduation_batch_year",
            f"{s.graduation_batch_year} outside [{GRADUATION_YEAR_FLOOR}, {current_year + 8}]",
        )


# ---------------------------------------------------------------------------
# wire conversion


def to_value(obj) -> Value:
    """Convert a record instance (or plain scalar/list) to an envelope value."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        fields = {}
        for f in dataclasses.fields(obj):
            fields[f.name] = to_value(getattr(obj, f.name))
        return Record(qname=obj.QNAME, fields=fields)
    if isinstance(obj, list):
        return [to_value(x) for x in obj]
    return obj


_HINTS_CACHE: dict[type, dict[str, object]] = {}


def _hints(cls: type) -> dict[str, object]:
    if cls not in _HINTS_CACHE:
        _HINTS_CACHE[cls] = typing.get_type_hints(cls)
    return _HINTS_CACHE[cls]


def _coerce(v: Value, hint, where: str):
    origin = typing.get_origin(hint)
    if isinstance(hint, UnionType) or origin is typing.Union:
        args = typing.get_args(hint)
        if type(None) in args:
            if v is None:
                return None
            hint = next(a for a in args if a is not type(None))
            return _coerce(v, hint, where)
        raise InvalidRecord(where, f"unsupported union {hint}")
    if origin is list:
        if not isinstance(v, list):
            raise InvalidRecord(where, f"expected list, got {type(v).__name__}")
        (item_hint,) = typing.get_args(hint)
        return [_coerce(x, item_hint, where) for x in v]
    if dataclasses.is_dataclass(hint):
        if not isinstance(v, Record):
            raise InvalidRecord(where, f"expected record, got {type(v).__name__}")
        return from_value(v, hint)
    if hint is bool:
        if not isinstance(v, bool):
            raise InvalidRecord(where, f"expected bool, got {type(v).__name__}")
        return v
    if hint is int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise InvalidRecord(where, f"expected int, got {type(v).__name__}")
        return v
    if hint is str:
        if not isinstance(v, str):
            raise InvalidRecord(where, f"expected string, got {type(v).__name__}")
        return v
    if hint is date:
        if not isinstance(v, date):
            raise InvalidRecord(where, f"expected date, got {type(v).__name__}")
        return v
    raise InvalidRecord(where, f"unsupported field type {hint}")


def from_value(v: Value, cls: type | None = None):
    """Rebuild a record instance from a wire value; strict about fields."""
    if not isinstance(v, Record):
        raise InvalidRecord("<value>", f"expected a record, got {type(v).__name__}")
    if cls is None:
        cls = _WIRE_CLASSES.get(v.qname)
        if cls is None:
            raise InvalidRecord("<qname>", f"no record class for {v.qname!r}")
    hints = _hints(cls)
    kwargs = {}
    declared = {f.name for f in dataclasses.fields(cls)}
    extra = set(v.fields) - declared
    if extra:
        raise InvalidRecord(sorted(extra)[0], "unexpected field")
    for f in dataclasses.fields(cls):
        if f.name not in v.fields:
            raise InvalidRecord(f.name, "missing field")
        kwargs[f.name] = _coerce(v.fields[f.name], hints[f.name], f.name)
    return cls(**kwargs)


def standard_beans(native_prefix: str = "py") -> BeanMappingTable:
    """The full bean table for this system's record types."""
    table = BeanMappingTable()
    for qname, cls in sorted(_WIRE_CLASSES.items()):
        table.add(BeanMapping(qname, BEAN_NS, f"{native_prefix}:{cls.__name__}"))
    return table


SERVICE_AMIS = "AdmissionDataBaseManagerService"
SERVICE_LMIS = "LibraryDataBaseManagerService"
SERVICE_HMIS = "HostelDataBaseManagerService"
SERVICE_EMIS = "ExaminationDataBaseManagerService"
SERVICE_CAMPUS = "CampusDataBaseManagerService"
