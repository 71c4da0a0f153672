"""Loads the human-editable fixture files into each service's native store."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from i3.departments.amis import AmisStore
from i3.departments.campus import CampusStore
from i3.departments.hmis import HmisStore
from i3.departments.lmis import LmisStore
from i3.records import BookRecord, DepartmentRecord, ProgrammeRecord, StudentRecord

ALL_TARGETS = ("amis", "lmis", "hmis", "campus", "emis")


def seed_stores(
    fixture_dir: Path, store_root: Path, targets: tuple[str, ...] = ALL_TARGETS
) -> list[str]:
    fixture_dir = Path(fixture_dir)
    store_root = Path(store_root)
    seeded = []
    if "amis" in targets:
        _seed_amis(fixture_dir / "amis", store_root / "amis")
        seeded.append("amis")
    if "lmis" in targets:
        _seed_lmis(fixture_dir / "lmis", store_root / "lmis")
        seeded.append("lmis")
    if "hmis" in targets:
        _seed_hmis(fixture_dir / "hmis", store_root / "hmis")
        seeded.append("hmis")
    if "campus" in targets:
        _seed_campus(fixture_dir / "campus", store_root)
        seeded.append("campus")
    if "emis" in targets:
        (store_root / "emis").mkdir(parents=True, exist_ok=True)
        seeded.append("emis")
    return seeded


def _read_csv(path: Path) -> list[dict]:
    if not path.exists():
        return []
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _seed_amis(src: Path, dst: Path) -> None:
    store = AmisStore(dst)
    for row in _read_csv(src / "departments.csv"):
        if row["code"] not in store.departments:
            store.add_department(DepartmentRecord(**row))
    for row in _read_csv(src / "programmes.csv"):
        if row["code"] not in store.programmes:
            row["duration_years"] = int(row["duration_years"])
            store.add_programme(ProgrammeRecord(**row))
    for row in _read_csv(src / "students.csv"):
        if row["id"] not in store.students:
            row["graduation_batch_year"] = int(row["graduation_batch_year"])
            store.add_student(StudentRecord(**row))


def _seed_lmis(src: Path, dst: Path) -> None:
    store = LmisStore(dst)
    for row in _read_csv(src / "books.csv"):
        if row["id"] not in store.books:
            row["year"] = int(row["year"])
            BookRecord(**row)  # field check before writing the op
            store.append({"op": "book_added", **row})
    members_file = src / "members.txt"
    if members_file.exists():
        for line in members_file.read_text(encoding="utf-8").splitlines():
            sid = line.strip()
            if sid and sid not in store.members:
                store.append({"op": "member_enrolled", "student_id": sid})


def _seed_hmis(src: Path, dst: Path) -> None:
    store = HmisStore(dst)
    rooms_file = src / "rooms.json"
    if rooms_file.exists():
        doc = json.loads(rooms_file.read_text(encoding="utf-8"))
        for room in doc.get("rooms", []):
            if room not in store.rooms:
                store.rooms.append(room)
    store.save()


def _seed_campus(src: Path, store_root: Path) -> None:
    campuses_file = src / "campuses.txt"
    codes = ["MAIN"]
    if campuses_file.exists():
        codes = [c.strip() for c in campuses_file.read_text(encoding="utf-8").splitlines() if c.strip()]
    for code in codes:
        CampusStore(store_root / f"campus-{code.lower()}").path.touch(exist_ok=True)
