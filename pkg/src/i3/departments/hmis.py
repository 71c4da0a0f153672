"""Hostel service: room allotments and the dues report.

Persistence is a single JSON document rewritten atomically on change.
The dues flag is definitional: an active allotment exists.
"""

from __future__ import annotations

import json
import os
import threading
from datetime import date
from pathlib import Path
from typing import Callable

from i3.broker import MethodSig
from i3.container import BoundMethod, ServiceImplementation
from i3.faults import AlreadyAllotted, NoActiveAllotment, RoomOccupied
from i3.records import AllotmentRecord, HostelStudentRecord, to_value

DOC_NAME = "hostel.json"


class HmisStore:
    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.path = self.root / DOC_NAME
        self._lock = threading.Lock()
        self.rooms: list[str] = []
        self.allotments: list[AllotmentRecord] = []
        if self.path.exists():
            doc = json.loads(self.path.read_text(encoding="utf-8"))
            self.rooms = list(doc.get("rooms", []))
            for row in doc.get("allotments", []):
                self.allotments.append(
                    AllotmentRecord(
                        room_id=row["room_id"],
                        student_id=row["student_id"],
                        allotted_at=date.fromisoformat(row["allotted_at"]),
                        vacated_at=(
                            date.fromisoformat(row["vacated_at"]) if row["vacated_at"] else None
                        ),
                    )
                )

    def save(self) -> None:
        with self._lock:
            doc = {
                "rooms": self.rooms,
                "allotments": [
                    {
                        "room_id": a.room_id,
                        "student_id": a.student_id,
                        "allotted_at": a.allotted_at.isoformat(),
                        "vacated_at": a.vacated_at.isoformat() if a.vacated_at else None,
                    }
                    for a in self.allotments
                ],
            }
            tmp = self.path.with_suffix(".tmp")
            tmp.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
            os.replace(tmp, self.path)

    def active_for_student(self, student_id: str) -> AllotmentRecord | None:
        for a in self.allotments:
            if a.student_id == student_id and a.vacated_at is None:
                return a
        return None

    def active_for_room(self, room_id: str) -> AllotmentRecord | None:
        for a in self.allotments:
            if a.room_id == room_id and a.vacated_at is None:
                return a
        return None


class HostelService:
    impl_id = "HostelDataBaseManager"

    def __init__(self, store_dir: Path, today: Callable[[], date] = date.today):
        self.store = HmisStore(store_dir)
        self._today = today

    def allot_room(self, room_id: str, student_id: str) -> AllotmentRecord:
        if self.store.active_for_room(room_id) is not None:
            raise RoomOccupied(room_id)
        if self.store.active_for_student(student_id) is not None:
            raise AlreadyAllotted(student_id)
        rec = AllotmentRecord(room_id=room_id, student_id=student_id, allotted_at=self._today())
        self.store.allotments.append(rec)
        self.store.save()
        return rec

    def vacate_room(self, student_id: str) -> AllotmentRecord:
        rec = self.store.active_for_student(student_id)
        if rec is None:
            raise NoActiveAllotment(student_id)
        rec.vacated_at = self._today()
        self.store.save()
        return rec

    def hostel_status(self, student_id: str) -> HostelStudentRecord:
        active = self.store.active_for_student(student_id)
        return HostelStudentRecord(
            student_id=student_id, active_allotment=active, dues=active is not None
        )

    def implementation(self) -> ServiceImplementation:
        return ServiceImplementation(
            id=self.impl_id,
            methods={
                "allotRoom": BoundMethod(
                    MethodSig("allotRoom", ("string", "string"), "record"),
                    lambda args: to_value(self.allot_room(args[0], args[1])),
                ),
                "vacateRoom": BoundMethod(
                    MethodSig("vacateRoom", ("string",), "record"),
                    lambda args: to_value(self.vacate_room(args[0])),
                ),
                "hostelStatus": BoundMethod(
                    MethodSig("hostelStatus", ("string",), "record"),
                    lambda args: to_value(self.hostel_status(args[0])),
                ),
            },
            record_types=(HostelStudentRecord.QNAME,),
        )
