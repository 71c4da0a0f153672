"""Campus roster service: registers students locally after confirming with AMIS.

Persistence is a line-delimited roster file: ``student_id|campus_code|date``.
"""

from __future__ import annotations

import threading
from datetime import date
from pathlib import Path
from typing import Callable

from i3.broker import MethodSig
from i3.client import TransportError, WireFault
from i3.container import BoundMethod, ServiceImplementation
from i3.faults import AmisUnavailable, UnknownStudent
from i3.records import SERVICE_AMIS

ROSTER_NAME = "roster.txt"


class CampusStore:
    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.path = self.root / ROSTER_NAME
        self._lock = threading.Lock()
        self.rows: list[tuple[str, str, str]] = []
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    student_id, campus, on = line.split("|")
                    self.rows.append((student_id, campus, on))

    def append(self, student_id: str, campus: str, on: str) -> None:
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(f"{student_id}|{campus}|{on}\n")
            self.rows.append((student_id, campus, on))


class CampusService:
    impl_id = "CampusDataBaseManager"

    def __init__(
        self,
        store_dir: Path,
        amis=None,
        campus_code: str = "MAIN",
        today: Callable[[], date] = date.today,
    ):
        self.store = CampusStore(store_dir)
        self._amis = amis
        self.campus_code = campus_code
        self._today = today

    def register_campus_student(self, student_id: str, campus_code: str) -> None:
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
        self.store.append(student_id, campus_code, self._today().isoformat())

    def implementation(self) -> ServiceImplementation:
        return ServiceImplementation(
            id=self.impl_id,
            methods={
                "registerCampusStudent": BoundMethod(
                    MethodSig("registerCampusStudent", ("string", "string"), "nil"),
                    lambda args: self.register_campus_student(args[0], args[1]),
                ),
            },
            record_types=(),
        )
