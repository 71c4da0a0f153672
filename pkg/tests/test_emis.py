import itertools
import re
import time
from datetime import datetime, timezone

import pytest
from conftest import build_world
from oracles import expected_overall

from i3.emis import EmisLedger, ExaminationService
from i3.faults import (
    DuesOutstanding,
    InvalidRecord,
    NotEligible,
    NotFound,
    UnknownProgramme,
    UnknownStudent,
)

SERIAL_RE = re.compile(r"^C-\d{4}-\d{6}$")


@pytest.fixture
def world(tmp_path):
    return build_world(tmp_path / "stores")


def emis_for(world, tmp_path, **kw):
    return ExaminationService(tmp_path / "emis-direct", gateway=world.gateway, **kw)


# -- exam records ---------------------------------------------------------------


def test_record_result_upsert(world, tmp_path):
    emis = emis_for(world, tmp_path)
    rec = emis.record_result("S-2021-0001", "BSCS", "Failed")
    assert rec.outcome == "Failed"
    rec = emis.record_result("S-2021-0001", "BSCS", "Passed")
    assert rec.outcome == "Passed"
    assert len(emis.get_results("S-2021-0001")) == 1

    with pytest.raises(UnknownStudent):
        emis.record_result("S-1900-0001", "BSCS", "Passed")
    with pytest.raises(UnknownProgramme):
        emis.record_result("S-2021-0001", "UNDERWATER-BASKETS", "Passed")
    with pytest.raises(InvalidRecord):
        emis.record_result("S-2021-0001", "BSCS", "Aced")


# -- verification -----------------------------------------------------------------


def test_verify_defaulter_blocked(world, tmp_path):
    world.gateway.call(
        "LibraryDataBaseManagerService", "issueBook", ["B-0001", "S-2021-0001"]
    )

    emis = emis_for(world, tmp_path)
    status = emis.verify_no_dues("S-2021-0001")
    by_provider = {s.provider: s for s in status.statuses}
    assert by_provider["Library"].verdict == "Dues"
    assert "B-0001" in by_provider["Library"].detail
    assert by_provider["Hostel"].verdict == "Clear"
    assert by_provider["Admissions"].verdict == "Clear"
    assert status.overall == "Blocked"
    assert status.overall == expected_overall(world.store_root, "S-2021-0001")


def test_verify_no_history_is_clear(world, tmp_path):
    emis = emis_for(world, tmp_path)
    status = emis.verify_no_dues("S-2020-0012")
    assert status.overall == "Clear"
    assert all(s.verdict == "Clear" for s in status.statuses)
    assert status.overall == expected_overall(world.store_root, "S-2020-0012")


def test_verify_student_absent_from_amis_blocks(world, tmp_path):
    emis = emis_for(world, tmp_path)
    status = emis.verify_no_dues("S-1900-0001")
    by_provider = {s.provider: s for s in status.statuses}
    assert by_provider["Admissions"].verdict == "Unknown"
    assert "NotFound" in by_provider["Admissions"].detail
    assert status.overall == "Blocked"


def test_verify_stopped_provider_is_unknown(world, tmp_path):
    world.gateway.stopped.add("HostelDataBaseManagerService")
    emis = emis_for(world, tmp_path)
    status = emis.verify_no_dues("S-2021-0001")
    by_provider = {s.provider: s for s in status.statuses}
    assert by_provider["Hostel"].verdict == "Unknown"
    assert by_provider["Hostel"].detail == "connection error"
    assert status.overall == "Blocked"


def test_fail_closed_for_every_stopped_subset(world, tmp_path):
    providers = {
        "Admissions": "AdmissionDataBaseManagerService",
        "Library": "LibraryDataBaseManagerService",
        "Hostel": "HostelDataBaseManagerService",
    }
    emis = emis_for(world, tmp_path)
    for r in (1, 2, 3):
        for subset in itertools.combinations(providers, r):
            world.gateway.stopped = {providers[p] for p in subset}
            status = emis.verify_no_dues("S-2020-0012")
            unknowns = {s.provider for s in status.statuses if s.verdict == "Unknown"}
            assert unknowns == set(subset)
            assert status.overall == "Blocked"
    world.gateway.stopped = set()


def test_verification_persisted_to_ledger(world, tmp_path):
    emis = emis_for(world, tmp_path)
    emis.verify_no_dues("S-2021-0001")
    reloaded = EmisLedger(tmp_path / "emis-direct")
    assert len(reloaded.verifications) == 1
    assert reloaded.verifications[0].student_id == "S-2021-0001"
    assert reloaded.verifications[0].checked_at


def test_fanout_runs_concurrently(world, tmp_path):
    for svc in (
        "AdmissionDataBaseManagerService",
        "LibraryDataBaseManagerService",
        "HostelDataBaseManagerService",
    ):
        world.gateway.delays_ms[svc] = 300
    emis = emis_for(world, tmp_path)
    t0 = time.monotonic()
    emis.verify_no_dues("S-2020-0012")
    elapsed_ms = (time.monotonic() - t0) * 1000
    assert elapsed_ms < 600, f"fan-out took {elapsed_ms:.0f} ms; serial would be >= 900"


def test_timeout_yields_unknown(world, tmp_path):
    world.gateway.delays_ms["HostelDataBaseManagerService"] = 10_000
    emis = emis_for(world, tmp_path, timeout_ms=400)
    t0 = time.monotonic()
    status = emis.verify_no_dues("S-2020-0012")
    assert time.monotonic() - t0 < 2.5
    by_provider = {s.provider: s for s in status.statuses}
    assert by_provider["Hostel"].verdict == "Unknown"
    assert by_provider["Hostel"].detail == "timeout"
    assert status.overall == "Blocked"


# -- certificates ----------------------------------------------------------------


def test_issue_certificate_happy_path_and_idempotence(world, tmp_path):
    emis = emis_for(world, tmp_path)
    emis.record_result("S-2020-0012", "MSC-MATH", "Passed")
    cert = emis.issue_certificate("S-2020-0012", "MSC-MATH")
    assert SERIAL_RE.match(cert.serial)
    assert cert.verification_snapshot.overall == "Clear"

    again = emis.issue_certificate("S-2020-0012", "MSC-MATH")
    assert again == cert

    # Idempotent across restart too: the ledger is the source of truth.
    rebuilt = ExaminationService(tmp_path / "emis-direct", gateway=world.gateway)
    assert rebuilt.issue_certificate("S-2020-0012", "MSC-MATH") == cert
    assert rebuilt.get_certificate(cert.serial) == cert


def test_issue_refused_without_passed_result(world, tmp_path):
    emis = emis_for(world, tmp_path)
    with pytest.raises(NotEligible):
        emis.issue_certificate("S-2021-0001", "BSCS")
    emis.record_result("S-2021-0001", "BSCS", "Failed")
    with pytest.raises(NotEligible):
        emis.issue_certificate("S-2021-0001", "BSCS")


def test_issue_refused_with_dues(world, tmp_path):
    world.gateway.call(
        "LibraryDataBaseManagerService", "issueBook", ["B-0003", "S-2021-0002"]
    )
    emis = emis_for(world, tmp_path)
    emis.record_result("S-2021-0002", "BSCS", "Passed")
    with pytest.raises(DuesOutstanding) as e:
        emis.issue_certificate("S-2021-0002", "BSCS")
    lib = next(s for s in e.value.status.statuses if s.provider == "Library")
    assert lib.verdict == "Dues"
    # Refusal leaves no certificate behind.
    assert emis.ledger.certificates == {}


def test_issue_refused_during_outage(world, tmp_path):
    emis = emis_for(world, tmp_path)
    emis.record_result("S-2020-0012", "MSC-MATH", "Passed")
    world.gateway.stopped.add("LibraryDataBaseManagerService")
    with pytest.raises(DuesOutstanding):
        emis.issue_certificate("S-2020-0012", "MSC-MATH")
    world.gateway.stopped = set()


def test_serials_strictly_increase(world, tmp_path):
    emis = emis_for(world, tmp_path)
    emis.record_result("S-2020-0012", "MSC-MATH", "Passed")
    emis.record_result("S-2022-0007", "MSC-MATH", "Passed")
    c1 = emis.issue_certificate("S-2020-0012", "MSC-MATH")
    c2 = emis.issue_certificate("S-2022-0007", "MSC-MATH")
    assert c2.serial > c1.serial
    assert int(c2.serial.rsplit("-", 1)[1]) == int(c1.serial.rsplit("-", 1)[1]) + 1


def test_get_certificate_unknown(world, tmp_path):
    with pytest.raises(NotFound):
        emis_for(world, tmp_path).get_certificate("C-2026-999999")


def test_no_persisted_certificate_has_non_clear_snapshot(world, tmp_path):
    emis = emis_for(world, tmp_path)
    emis.record_result("S-2020-0012", "MSC-MATH", "Passed")
    emis.issue_certificate("S-2020-0012", "MSC-MATH")
    ledger = EmisLedger(tmp_path / "emis-direct")
    assert ledger.certificates
    for cert in ledger.certificates.values():
        assert cert.verification_snapshot.overall == "Clear"


def test_clock_injection_controls_serial_year(world, tmp_path):
    fixed = datetime(2031, 1, 2, tzinfo=timezone.utc)
    emis = emis_for(world, tmp_path, now=lambda: fixed)
    emis.record_result("S-2020-0012", "MSC-MATH", "Passed")
    cert = emis.issue_certificate("S-2020-0012", "MSC-MATH")
    assert cert.serial.startswith("C-2031-")
    assert cert.issued_at == fixed.isoformat()
