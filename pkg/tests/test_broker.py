import pytest

from i3.broker import (
    Broker,
    InvalidDescription,
    MethodSig,
    NotFound,
    ServiceDescription,
    encode_description,
    match_glob,
    parse_description,
)
from i3.envelope import BeanMapping


def desc(name="AdmissionDataBaseManagerService", endpoint="http://127.0.0.1:9001/services/x"):
    return ServiceDescription(
        name=name,
        endpoint=endpoint,
        methods=[
            MethodSig("getStudent", ("string",), "record"),
            MethodSig("listDepartments", (), "list"),
        ],
        record_types=[BeanMapping("myNS:StudentRecord", "urn:BeanService", "py:StudentRecord")],
    )


def test_publish_then_find_exact():
    b = Broker()
    b.publish(desc())
    hits = b.find("AdmissionDataBaseManagerService")
    assert len(hits) == 1
    assert hits[0].endpoint == "http://127.0.0.1:9001/services/x"
    assert hits[0].published_at is not None


def test_republish_last_writer_wins():
    b = Broker()
    first = b.publish(desc(endpoint="http://127.0.0.1:9001/services/x"))
    second = b.publish(desc(endpoint="http://127.0.0.1:9002/services/x"))
    hits = b.find("AdmissionDataBaseManagerService")
    assert [h.endpoint for h in hits] == ["http://127.0.0.1:9002/services/x"]
    assert second.published_at >= first.published_at


def test_publish_invalid_descriptions():
    b = Broker()
    bad = desc()
    bad.methods = []
    with pytest.raises(InvalidDescription):
        b.publish(bad)
    with pytest.raises(InvalidDescription):
        b.publish(desc(endpoint="not-a-url"))
    with pytest.raises(InvalidDescription):
        b.publish(desc(name=""))


def test_find_globs():
    b = Broker()
    for name in (
        "AdmissionDataBaseManagerService",
        "LibraryDataBaseManagerService",
        "HostelDataBaseManagerService",
    ):
        b.publish(desc(name=name))
    assert b.find("*") == sorted(b.find("*"), key=lambda d: d.name)
    assert len(b.find("*DataBaseManagerService")) == 3
    assert [d.name for d in b.find("Admission*")] == ["AdmissionDataBaseManagerService"]
    assert b.find("Nope") == []
    with pytest.raises(ValueError):
        b.find("")


def test_find_empty_registry():
    assert Broker().find("*") == []


def test_bind_and_retract():
    b = Broker()
    b.publish(desc())
    endpoint, d = b.bind("AdmissionDataBaseManagerService")
    assert endpoint == d.endpoint
    with pytest.raises(NotFound):
        b.bind("Nope")
    assert b.retract("AdmissionDataBaseManagerService") is True
    assert b.retract("AdmissionDataBaseManagerService") is False
    with pytest.raises(NotFound):
        b.bind("AdmissionDataBaseManagerService")


def test_describe_stable_and_parseable():
    b = Broker()
    b.publish(desc())
    doc1 = b.describe("AdmissionDataBaseManagerService")
    doc2 = b.describe("AdmissionDataBaseManagerService")
    assert doc1 == doc2
    assert b"getStudent" in doc1
    parsed = parse_description(doc1)
    assert parsed.name == "AdmissionDataBaseManagerService"
    assert {m.name for m in parsed.methods} == {"getStudent", "listDepartments"}
    assert parsed.record_types[0].qname == "myNS:StudentRecord"
    with pytest.raises(NotFound):
        Broker().describe("Anything")


def test_description_document_round_trip():
    d = desc()
    d.published_at = None
    out = encode_description(d)
    parsed = parse_description(out)
    assert parsed.name == d.name
    assert parsed.methods == sorted(d.methods, key=lambda m: m.name)
    assert parsed.record_types == d.record_types


def test_snapshot_persistence(tmp_path):
    path = tmp_path / "registry.snapshot"
    b = Broker(snapshot_path=path)
    b.publish(desc())
    b.publish(desc(name="LibraryDataBaseManagerService"))
    b.retract("LibraryDataBaseManagerService")
    assert path.exists()

    reloaded = Broker(snapshot_path=path)
    names = [d.name for d in reloaded.find("*")]
    assert names == ["AdmissionDataBaseManagerService"]
    assert reloaded.bind("AdmissionDataBaseManagerService")[0] == desc().endpoint


def test_match_glob():
    assert match_glob("*", "anything")
    assert match_glob("*Service", "FooService")
    assert not match_glob("*Service", "ServiceFoo")
    assert match_glob("Foo*", "FooService")
    assert match_glob("Exact", "Exact")
    assert not match_glob("Exact", "Exactly")
