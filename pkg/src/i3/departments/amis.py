"""Admissions service: the identity authority every other service consults.

Persistence is CSV, one file per record type (students, departments,
programmes), loaded at startup and appended on write.
"""

from __future__ import annotations

import csv
import threading
from datetime import date
from pathlib import Path
from typing import Callable

from i3.broker import MethodSig
from i3.container import BoundMethod, ServiceImplementation
from i3.faults import DuplicateId, InvalidRecord, NotFound
from i3.records import (
    DepartmentRecord,
    ListItem,
    ProgrammeRecord,
    StudentRecord,
    from_value,
    to_value,
    validate_student,
)

STUDENT_COLUMNS = [
    "id",
    "first_name",
    "last_name",
    "address",
    "contact_number",
    "faculty",
    "department",
    "degree_program",
    "graduation_batch_year",
]


class AmisStore:
    """CSV tables under one directory; single-writer, read-your-writes."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self.students: dict[str, StudentRecord] = {}
        self.departments: dict[str, DepartmentRecord] = {}
        self.programmes: dict[str, ProgrammeRecord] = {}
        self._load()

    def _path(self, table: str) -> Path:
        return self.root / f"{table}.csv"

    def _load(self) -> None:
        for row in self._read("students"):
            row["graduation_batch_year"] = int(row["graduation_batch_year"])
            rec = StudentRecord(**row)
            self.students[rec.id] = rec
        for row in self._read("departments"):
            rec = DepartmentRecord(**row)
            self.departments[rec.code] = rec
        for row in self._read("programmes"):
            row["duration_years"] = int(row["duration_years"])
            rec = ProgrammeRecord(**row)
            self.programmes[rec.code] = rec

    def _read(self, table: str) -> list[dict]:
        path = self._path(table)
        if not path.exists():
            return []
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.DictReader(fh))

    def _append(self, table: str, columns: list[str], row: dict) -> None:
        path = self._path(table)
        fresh = not path.exists()
        with open(path, "a", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns)
            if fresh:
                writer.writeheader()
            writer.writerow(row)

    def add_student(self, rec: StudentRecord) -> None:
        with self._lock:
            self._append("students", STUDENT_COLUMNS, rec.__dict__)
            self.students[rec.id] = rec

    def add_department(self, rec: DepartmentRecord) -> None:
        with self._lock:
            self._append("departments", ["code", "title", "faculty"], rec.__dict__)
            self.departments[rec.code] = rec

    def add_programme(self, rec: ProgrammeRecord) -> None:
        with self._lock:
            self._append(
                "programmes", ["code", "title", "department_code", "duration_years"], rec.__dict__
            )
            self.programmes[rec.code] = rec


class AdmissionService:
    impl_id = "AdmissionDataBaseManager"

    def __init__(self, store_dir: Path, today: Callable[[], date] = date.today):
        self.store = AmisStore(store_dir)
        self._today = today

    def register_student(self, rec: StudentRecord) -> str:
        validate_student(rec, current_year=self._today().year)
        if rec.id in self.store.students:
            raise DuplicateId(rec.id)
        self.store.add_student(rec)
        return rec.id

    def get_student(self, student_id: str) -> StudentRecord:
        rec = self.store.students.get(student_id)
        if rec is None:
            raise NotFound(student_id)
        return rec

    def search_students(self, query: str) -> list[StudentRecord]:
        q = query.lower()
        hits = [
            s
            for s in self.store.students.values()
            if q in s.first_name.lower() or q in s.last_name.lower() or q in s.department.lower()
        ]
        return sorted(hits, key=lambda s: s.id)

    def list_departments(self) -> list[ListItem]:
        items = [ListItem(label=d.title, value=d.code) for d in self.store.departments.values()]
        return sorted(items, key=lambda i: i.label)

    def list_programmes(self, department_code: str) -> list[ListItem]:
        # Empty code lists every programme (mirrors the empty-search convention).
        progs = [
            p
            for p in self.store.programmes.values()
            if not department_code or p.department_code == department_code
        ]
        items = [ListItem(label=p.title, value=p.code) for p in progs]
        return sorted(items, key=lambda i: i.label)

    def implementation(self) -> ServiceImplementation:
        return ServiceImplementation(
            id=self.impl_id,
            methods={
                "registerStudent": BoundMethod(
                    MethodSig("registerStudent", ("record",), "string"),
                    lambda args: self.register_student(self._student_arg(args[0])),
                ),
                "getStudent": BoundMethod(
                    MethodSig("getStudent", ("string",), "record"),
                    lambda args: to_value(self.get_student(args[0])),
                ),
                "searchStudents": BoundMethod(
                    MethodSig("searchStudents", ("string",), "list"),
                    lambda args: [to_value(s) for s in self.search_students(args[0])],
                ),
                "listDepartments": BoundMethod(
                    MethodSig("listDepartments", (), "list"),
                    lambda args: [to_value(i) for i in self.list_departments()],
                ),
                "listProgrammes": BoundMethod(
                    MethodSig("listProgrammes", ("string",), "list"),
                    lambda args: [to_value(i) for i in self.list_programmes(args[0])],
                ),
            },
            record_types=(
                StudentRecord.QNAME,
                DepartmentRecord.QNAME,
                ProgrammeRecord.QNAME,
                ListItem.QNAME,
            ),
        )

    @staticmethod
    def _student_arg(v) -> StudentRecord:
        rec = from_value(v, StudentRecord)
        if not isinstance(rec, StudentRecord):
            raise InvalidRecord("record", "expected a student record")
        return rec
