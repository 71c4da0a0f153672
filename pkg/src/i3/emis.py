"""Examination service: exam records, No-Dues verification, certificates.

Verification fans out to the three providers concurrently, each probe under
its own deadline; any non-Clear answer (including timeouts and connection
errors, reported as Unknown) blocks issuance. The store is an append-only
ledger of ``key: value`` blocks separated by blank lines.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Callable

from i3.broker import MethodSig
from i3.client import TransportError, WireFault
from i3.container import BoundMethod, ServiceImplementation
from i3.faults import (
    AmisUnavailable,
    DuesOutstanding,
    InvalidRecord,
    NotEligible,
    NotFound,
    UnknownProgramme,
    UnknownStudent,
)
from i3.records import (
    EXAM_OUTCOMES,
    SERVICE_AMIS,
    SERVICE_HMIS,
    SERVICE_LMIS,
    Certificate,
    ExamRecord,
    HostelStudentRecord,
    LibraryStudentRecord,
    NoDuesStatus,
    ProviderStatus,
    from_value,
    to_value,
)

LEDGER_NAME = "ledger.txt"
PROVIDER_ORDER = ("Admissions", "Library", "Hostel")


def _clean(value: str) -> str:
    return value.replace("\r", " ").replace("\n", " ")


def _ms_since(t0: float) -> int:
    return int((time.monotonic() - t0) * 1000)


def probe_admissions(gateway, student_id: str, timeout_ms: int) -> ProviderStatus:
    t0 = time.monotonic()
    try:
        gateway.call(SERVICE_AMIS, "getStudent", [student_id], timeout_ms=timeout_ms)
        return ProviderStatus("Admissions", "Clear", latency_ms=_ms_since(t0))
    except WireFault as e:
        detail = f"fault {e.fault.code}: {e.fault.reason}"
        return ProviderStatus("Admissions", "Unknown", detail, latency_ms=_ms_since(t0))
    except TransportError as e:
        return ProviderStatus("Admissions", "Unknown", e.kind, latency_ms=_ms_since(t0))


def probe_library(gateway, student_id: str, timeout_ms: int) -> ProviderStatus:
    t0 = time.monotonic()
    try:
        value = gateway.call(SERVICE_LMIS, "libraryStatus", [student_id], timeout_ms=timeout_ms)
        rec: LibraryStudentRecord = from_value(value, LibraryStudentRecord)
    except WireFault as e:
        detail = f"fault {e.fault.code}: {e.fault.reason}"
        return ProviderStatus("Library", "Unknown", detail, latency_ms=_ms_since(t0))
    except TransportError as e:
        return ProviderStatus("Library", "Unknown", e.kind, latency_ms=_ms_since(t0))
    if rec.defaulter:
        books = ", ".join(loan.book_id for loan in rec.open_loans)
        detail = f"{len(rec.open_loans)} open loan(s): {books}"
        return ProviderStatus("Library", "Dues", detail, latency_ms=_ms_since(t0))
    return ProviderStatus("Library", "Clear", latency_ms=_ms_since(t0))


def probe_hostel(gateway, student_id: str, timeout_ms: int) -> ProviderStatus:
    t0 = time.monotonic()
    try:
        value = gateway.call(SERVICE_HMIS, "hostelStatus", [student_id], timeout_ms=timeout_ms)
        rec: HostelStudentRecord = from_value(value, HostelStudentRecord)
    except WireFault as e:
        detail = f"fault {e.fault.code}: {e.fault.reason}"
        return ProviderStatus("Hostel", "Unknown", detail, latency_ms=_ms_since(t0))
    except TransportError as e:
        return ProviderStatus("Hostel", "Unknown", e.kind, latency_ms=_ms_since(t0))
    if rec.dues:
        detail = f"room {rec.active_allotment.room_id} still allotted"
        return ProviderStatus("Hostel", "Dues", detail, latency_ms=_ms_since(t0))
    return ProviderStatus("Hostel", "Clear", latency_ms=_ms_since(t0))


class EmisLedger:
    """Append-only block ledger; state is rebuilt by replay at startup."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.path = self.root / LEDGER_NAME
        self._lock = threading.Lock()
        self.exams: dict[tuple[str, str], ExamRecord] = {}
        self.certificates: dict[tuple[str, str], Certificate] = {}
        self.verifications: list[NoDuesStatus] = []
        self.serial_counter = 0
        if self.path.exists():
            for block in self._read_blocks():
                self._apply(block)

    def _read_blocks(self) -> list[dict[str, str]]:
        blocks: list[dict[str, str]] = []
        current: dict[str, str] = {}
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                if current:
                    blocks.append(current)
                    current = {}
                continue
            key, _, value = line.partition(": ")
            current[key] = value
        if current:
            blocks.append(current)
        return blocks

    def _apply(self, b: dict[str, str]) -> None:
        kind = b.get("kind")
        if kind == "exam-result":
            rec = ExamRecord(
                student_id=b["student"],
                programme_code=b["programme"],
                outcome=b["outcome"],
                recorded_at=date.fromisoformat(b["recorded-at"]),
            )
            self.exams[(rec.student_id, rec.programme_code)] = rec
        elif kind == "verification":
            self.verifications.append(self._status_from(b, prefix=""))
        elif kind == "certificate":
            cert = Certificate(
                serial=b["serial"],
                student_id=b["student"],
                programme_code=b["programme"],
                issued_at=b["issued-at"],
                verification_snapshot=self._status_from(b, prefix="snapshot-"),
            )
            self.certificates[(cert.student_id, cert.programme_code)] = cert
            self.serial_counter = max(self.serial_counter, int(cert.serial.rsplit("-", 1)[1]))
        else:
            raise ValueError(f"unknown ledger block kind {kind!r} in {self.path}")

    @staticmethod
    def _status_from(b: dict[str, str], prefix: str) -> NoDuesStatus:
        statuses = [
            ProviderStatus(
                provider=name,
                verdict=b[f"{prefix}{name.lower()}-verdict"],
                detail=b.get(f"{prefix}{name.lower()}-detail", ""),
                latency_ms=int(b.get(f"{prefix}{name.lower()}-latency-ms", "0")),
            )
            for name in PROVIDER_ORDER
        ]
        return NoDuesStatus(
            student_id=b[f"{prefix}student"] if prefix else b["student"],
            statuses=statuses,
            overall=b[f"{prefix}overall"],
            checked_at=b[f"{prefix}checked-at"],
        )

    @staticmethod
    def _status_lines(s: NoDuesStatus, prefix: str) -> list[str]:
        lines = []
        if prefix:
            lines.append(f"{prefix}student: {s.student_id}")
        lines.append(f"{prefix}checked-at: {s.checked_at}")
        lines.append(f"{prefix}overall: {s.overall}")
        for p in s.statuses:
            key = f"{prefix}{p.provider.lower()}"
            lines.append(f"{key}-verdict: {p.verdict}")
            lines.append(f"{key}-detail: {_clean(p.detail)}")
            lines.append(f"{key}-latency-ms: {p.latency_ms}")
        return lines

    def _write(self, lines: list[str]) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n\n")

    def append_exam(self, rec: ExamRecord) -> None:
        with self._lock:
            self._write(
                [
                    "kind: exam-result",
                    f"student: {rec.student_id}",
                    f"programme: {rec.programme_code}",
                    f"outcome: {rec.outcome}",
                    f"recorded-at: {rec.recorded_at.isoformat()}",
                ]
            )
            self.exams[(rec.student_id, rec.programme_code)] = rec

    def append_verification(self, s: NoDuesStatus) -> None:
        with self._lock:
            self._write(["kind: verification", f"student: {s.student_id}"] + self._status_lines(s, ""))
            self.verifications.append(s)

    def append_certificate(self, cert: Certificate) -> None:
        with self._lock:
            self._write(
                [
                    "kind: certificate",
                    f"serial: {cert.serial}",
                    f"student: {cert.student_id}",
                    f"programme: {cert.programme_code}",
                    f"issued-at: {cert.issued_at}",
                ]
                + self._status_lines(cert.verification_snapshot, "snapshot-")
            )
            self.certificates[(cert.student_id, cert.programme_code)] = cert
            self.serial_counter = max(self.serial_counter, int(cert.serial.rsplit("-", 1)[1]))


class ExaminationService:
    impl_id = "ExaminationDataBaseManager"

    def __init__(
        self,
        store_dir: Path,
        gateway=None,
        timeout_ms: int = 2_000,
        now: Callable[[], datetime] = lambda: datetime.now(timezone.utc),
    ):
        self.ledger = EmisLedger(store_dir)
        self._gw = gateway
        self.timeout_ms = timeout_ms
        self._now = now
        self._issue_lock = threading.Lock()

    # -- exam records -------------------------------------------------------

    def record_result(self, student_id: str, programme_code: str, outcome: str) -> ExamRecord:
        if outcome not in EXAM_OUTCOMES:
            raise InvalidRecord("outcome", f"{outcome!r} not one of {EXAM_OUTCOMES}")
        self._confirm_student(student_id)
        self._confirm_programme(programme_code)
        rec = ExamRecord(
            student_id=student_id,
            programme_code=programme_code,
            outcome=outcome,
            recorded_at=self._now().date(),
        )
        self.ledger.append_exam(rec)
        return rec

    def get_results(self, student_id: str) -> list[ExamRecord]:
        hits = [r for (sid, _), r in self.ledger.exams.items() if sid == student_id]
        return sorted(hits, key=lambda r: r.programme_code)

    def _confirm_student(self, student_id: str) -> None:
        if self._gw is None:
            raise AmisUnavailable("no admissions gateway configured")
        try:
            self._gw.call(SERVICE_AMIS, "getStudent", [student_id], timeout_ms=self.timeout_ms)
        except WireFault as e:
            if e.fault.reason == "NotFound":
                raise UnknownStudent(student_id) from e
            raise AmisUnavailable(f"admissions fault: {e.fault.code}") from e
        except TransportError as e:
            raise AmisUnavailable(str(e)) from e

    def _confirm_programme(self, programme_code: str) -> None:
        try:
            items = self._gw.call(
                SERVICE_AMIS, "listProgrammes", [""], timeout_ms=self.timeout_ms
            )
        except (WireFault, TransportError) as e:
            raise AmisUnavailable(f"programme catalogue unavailable: {e}") from e
        codes = {item.fields.get("value") for item in items}
        if programme_code not in codes:
            raise UnknownProgramme(programme_code)

    # -- verification -------------------------------------------------------

    def verify_no_dues(self, student_id: str) -> NoDuesStatus:
        probes = {
            "Admissions": self._probe_admissions,
            "Library": self._probe_library,
            "Hostel": self._probe_hostel,
        }
        pool = ThreadPoolExecutor(max_workers=len(probes))
        futures = {name: pool.submit(fn, student_id) for name, fn in probes.items()}
        deadline = time.monotonic() + self.timeout_ms / 1000.0 + 1.0
        statuses = []
        for name in PROVIDER_ORDER:
            remaining = max(0.0, deadline - time.monotonic())
            try:
                statuses.append(futures[name].result(timeout=remaining))
            except FutureTimeout:
                statuses.append(
                    ProviderStatus(name, "Unknown", "timeout", latency_ms=self.timeout_ms)
                )
            except Exception as e:  # probe bug; still fail closed
                statuses.append(ProviderStatus(name, "Unknown", f"probe failed: {e}"))
        pool.shutdown(wait=False)
        status = NoDuesStatus.aggregate(student_id, statuses, checked_at=self._now().isoformat())
        self.ledger.append_verification(status)
        return status

    def _probe_admissions(self, student_id: str) -> ProviderStatus:
        return probe_admissions(self._gw, student_id, self.timeout_ms)

    def _probe_library(self, student_id: str) -> ProviderStatus:
        return probe_library(self._gw, student_id, self.timeout_ms)

    def _probe_hostel(self, student_id: str) -> ProviderStatus:
        return probe_hostel(self._gw, student_id, self.timeout_ms)

    # -- certificates -------------------------------------------------------

    def issue_certificate(self, student_id: str, programme_code: str) -> Certificate:
        with self._issue_lock:
            existing = self.ledger.certificates.get((student_id, programme_code))
            if existing is not None:
                return existing
            exam = self.ledger.exams.get((student_id, programme_code))
            if exam is None or exam.outcome != "Passed":
                raise NotEligible(f"{student_id} has no Passed result for {programme_code}")
            status = self.verify_no_dues(student_id)
            if status.overall != "Clear":
                raise DuesOutstanding(status)
            now = self._now()
            serial = f"C-{now.year}-{self.ledger.serial_counter + 1:06d}"
            cert = Certificate(
                serial=serial,
                student_id=student_id,
                programme_code=programme_code,
                issued_at=now.isoformat(),
                verification_snapshot=status,
            )
            self.ledger.append_certificate(cert)
            return cert

    def get_certificate(self, serial: str) -> Certificate:
        for cert in self.ledger.certificates.values():
            if cert.serial == serial:
                return cert
        raise NotFound(serial)

    # -- wire ----------------------------------------------------------------

    def implementation(self) -> ServiceImplementation:
        return ServiceImplementation(
            id=self.impl_id,
            methods={
                "recordResult": BoundMethod(
                    MethodSig("recordResult", ("string", "string", "string"), "record"),
                    lambda args: to_value(self.record_result(args[0], args[1], args[2])),
                ),
                "verifyNoDues": BoundMethod(
                    MethodSig("verifyNoDues", ("string",), "record"),
                    lambda args: to_value(self.verify_no_dues(args[0])),
                ),
                "issueCertificate": BoundMethod(
                    MethodSig("issueCertificate", ("string", "string"), "record"),
                    lambda args: to_value(self.issue_certificate(args[0], args[1])),
                ),
                "getCertificate": BoundMethod(
                    MethodSig("getCertificate", ("string",), "record"),
                    lambda args: to_value(self.get_certificate(args[0])),
                ),
                "getResults": BoundMethod(
                    MethodSig("getResults", ("string",), "list"),
                    lambda args: [to_value(r) for r in self.get_results(args[0])],
                ),
            },
            record_types=(
                ExamRecord.QNAME,
                ProviderStatus.QNAME,
                NoDuesStatus.QNAME,
                Certificate.QNAME,
            ),
        )
