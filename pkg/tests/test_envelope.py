import random
from datetime import date
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from i3.envelope import (
    BeanMapping,
    BeanMappingTable,
    Call,
    Envelope,
    EnvelopeError,
    Fault,
    MalformedXml,
    Record,
    Response,
    UnknownBodyShape,
    UnknownScalarType,
    UnmappedRecordType,
    decode_envelope,
    decode_value,
    encode_envelope,
    encode_value,
)

WIRE_DIR = Path(__file__).parent / "wire"

BEAN_NS = "urn:BeanService"


def table(*locals_):
    return BeanMappingTable(
        [BeanMapping(f"myNS:{name}", BEAN_NS, f"java:{name}") for name in locals_]
    )


FILE1_TABLE = table(
    "StudentRecord",
    "DepartmentRecord",
    "ProgrammeRecord",
    "ListItem",
    "LibraryStudentRecord",
    "HostelStudentRecord",
)
EMPTY = BeanMappingTable()


def test_golden_call_getStudent():
    env = Envelope(body=Call("AdmissionDataBaseManagerService", "getStudent", ["S-2024-0001"]))
    expected = (WIRE_DIR / "call_getStudent.xml").read_bytes()
    assert encode_envelope(env, EMPTY) == expected
    assert decode_envelope(expected, EMPTY) == env


def test_fault_encode_contains_strings():
    env = Envelope(body=Fault(code="Server.NoSuchService", reason="x", detail=""))
    doc = encode_envelope(env, EMPTY)
    assert b"<i3:Fault>" in doc
    assert b"<i3:code>Server.NoSuchService</i3:code>" in doc
    assert b"<i3:reason>x</i3:reason>" in doc
    assert decode_envelope(doc, EMPTY) == env


def test_call_zero_args_self_closes_method_element():
    env = Envelope(body=Call("S", "ping", []))
    doc = encode_envelope(env, EMPTY)
    assert b'<m:ping xmlns:m="urn:i3/service/S"/>' in doc
    assert decode_envelope(doc, EMPTY) == env


def test_fault_code_outside_closed_set_rejected():
    with pytest.raises(ValueError):
        encode_envelope(Envelope(body=Fault(code="Server.Nope", reason="", detail="")), EMPTY)
    doc = (
        b'<?xml version="1.0" encoding="UTF-8"?>\n'
        b'<i3:Envelope xmlns:i3="urn:i3/envelope"><i3:Header/><i3:Body><i3:Fault>'
        b"<i3:code>Server.Nope</i3:code><i3:reason/><i3:detail/>"
        b"</i3:Fault></i3:Body></i3:Envelope>"
    )
    with pytest.raises(UnknownBodyShape):
        decode_envelope(doc, EMPTY)


def test_scalar_values():
    assert encode_value(0, EMPTY) == b'<i3:value type="int">0</i3:value>'
    assert encode_value(None, EMPTY) == b'<i3:value type="nil"/>'
    assert decode_value(b'<i3:value type="bool">true</i3:value>', EMPTY) is True
    assert decode_value(b'<i3:value type="date">2024-05-01</i3:value>', EMPTY) == date(2024, 5, 1)


def test_list_of_two_ints():
    v = decode_value(
        b'<i3:value type="list"><i3:item type="int">1</i3:item>'
        b'<i3:item type="int">2</i3:item></i3:value>',
        EMPTY,
    )
    assert v == [1, 2]


def test_unknown_scalar_type():
    with pytest.raises(UnknownScalarType):
        decode_value(b'<i3:value type="complex64">1</i3:value>', EMPTY)
    # UnknownScalarType is a body-shape error, keeping envelope decode total.
    assert issubclass(UnknownScalarType, UnknownBodyShape)


def test_truncated_document_is_malformed():
    doc = encode_envelope(Envelope(body=Response("hello")), EMPTY)
    with pytest.raises(MalformedXml):
        decode_envelope(doc[: len(doc) // 2], EMPTY)
    with pytest.raises(MalformedXml):
        decode_envelope(b"", EMPTY)


def test_non_utf8_encoding_rejected():
    doc = b'<?xml version="1.0" encoding="ISO-8859-1"?>\n<i3:Envelope xmlns:i3="urn:i3/envelope"><i3:Header/><i3:Body><i3:Response><i3:value type="nil"/></i3:Response></i3:Body></i3:Envelope>'
    with pytest.raises(MalformedXml):
        decode_envelope(doc, EMPTY)


def test_xml_declaration_optional_on_input():
    doc = encode_envelope(Envelope(body=Response(None)), EMPTY)
    decl, _, rest = doc.partition(b"\n")
    assert decl.startswith(b"<?xml")
    assert decode_envelope(rest, EMPTY) == Envelope(body=Response(None))


def test_record_round_trip_with_file1_mapping():
    rec = Record("myNS:LibraryStudentRecord", {"student_id": "S-2024-0001", "defaulter": False})
    doc = encode_envelope(Envelope(body=Response(rec)), FILE1_TABLE)
    assert b'qname="myNS:LibraryStudentRecord"' in doc
    assert b'xmlns:myNS="urn:BeanService"' in doc
    out = decode_envelope(doc, FILE1_TABLE)
    assert out.body.result == rec


def test_unmapped_record_type_both_directions():
    rec = Record("myNS:GhostRecord", {})
    with pytest.raises(UnmappedRecordType):
        encode_value(rec, FILE1_TABLE)
    doc = (
        b'<i3:value type="record" qname="myNS:GhostRecord" xmlns:myNS="urn:BeanService"/>'
    )
    with pytest.raises(UnmappedRecordType):
        decode_value(doc, FILE1_TABLE)


def test_student_record_has_nine_field_children():
    rec = Record(
        "myNS:StudentRecord",
        {
            "id": "S-2024-0001",
            "first_name": "Aisha",
            "last_name": "Memon",
            "address": "Jamshoro",
            "contact_number": "0300-0000000",
            "faculty": "Natural Sciences",
            "department": "IMCS",
            "degree_program": "BSCS",
            "graduation_batch_year": 2024,
        },
    )
    frag = encode_value(rec, FILE1_TABLE).decode()
    assert frag.count("</") + frag.count("/>") >= 9
    out = decode_value(frag, FILE1_TABLE)
    assert out == rec
    assert len(out.fields) == 9


def test_record_fields_encoded_alphabetically():
    rec = Record("myNS:ListItem", {"value": "X", "label": "Y"})
    frag = encode_value(rec, FILE1_TABLE)
    assert frag.index(b"<label") < frag.index(b"<value")


def test_duplicate_mapping_registration_rejected():
    t = table("StudentRecord")
    with pytest.raises(ValueError):
        t.add(BeanMapping("myNS:StudentRecord", BEAN_NS, "java:Other"))
    with pytest.raises(ValueError):
        # Same (namespace, local) under a different prefix is still a duplicate.
        t.add(BeanMapping("other:StudentRecord", BEAN_NS, "java:Other"))


def test_heterogeneous_list_rejected():
    with pytest.raises(ValueError):
        encode_value([1, "x"], EMPTY)
    doc = (
        b'<i3:value type="list"><i3:item type="int">1</i3:item>'
        b'<i3:item type="string">x</i3:item></i3:value>'
    )
    with pytest.raises(UnknownBodyShape):
        decode_value(doc, EMPTY)


def test_unknown_header_entries_preserved_in_order():
    env = Envelope(body=Response(None), header=[("trace-id", "abc"), ("x-unknown", "keep me")])
    assert decode_envelope(encode_envelope(env, EMPTY), EMPTY) == env


# ---------------------------------------------------------------------------
# generated round-trip and fuzz properties

XML_CHARS = st.characters(
    min_codepoint=0x9,
    max_codepoint=0xD7FF,
    blacklist_characters="\x0b\x0c",
).filter(lambda c: ord(c) in (0x9, 0xA, 0xD) or ord(c) >= 0x20)
xml_text = st.text(alphabet=XML_CHARS, max_size=30)
names = st.from_regex(r"[A-Za-z_][A-Za-z0-9._-]{0,12}", fullmatch=True)

scalars = st.one_of(
    xml_text,
    st.integers(min_value=-(2**63), max_value=2**63 - 1),
    st.booleans(),
    st.dates(),
    st.none(),
)


def homogeneous_lists(children):
    return st.one_of(
        st.lists(xml_text, max_size=4),
        st.lists(st.integers(min_value=-(2**63), max_value=2**63 - 1), max_size=4),
        st.lists(st.dates(), max_size=4),
        st.lists(children, max_size=3).map(lambda xs: [[x] for x in xs]),
    )


def records(children):
    return st.builds(
        Record,
        st.sampled_from([m.qname for m in FILE1_TABLE]),
        st.dictionaries(names, children, max_size=4),
    )


values = st.recursive(scalars, lambda c: st.one_of(homogeneous_lists(c), records(c)), max_leaves=12)

bodies = st.one_of(
    st.builds(Call, names, names, st.lists(values, max_size=3)),
    st.builds(Response, values),
    st.builds(
        Fault,
        st.sampled_from(sorted({"Server.Internal", "Client.BadArguments", "Server.Unavailable"})),
        xml_text,
        xml_text,
    ),
)
envelopes = st.builds(Envelope, bodies, st.lists(st.tuples(names, xml_text), max_size=3))


@settings(max_examples=300, deadline=None)
@given(envelopes)
def test_round_trip_property(env):
    doc = encode_envelope(env, FILE1_TABLE)
    assert encode_envelope(env, FILE1_TABLE) == doc  # deterministic bytes
    assert decode_envelope(doc, FILE1_TABLE) == env


@settings(max_examples=200, deadline=None)
@given(st.binary(max_size=400))
def test_decode_totality_on_random_bytes(data):
    try:
        decode_envelope(data, FILE1_TABLE)
    except (MalformedXml, UnknownBodyShape, UnmappedRecordType):
        pass


def test_decode_totality_on_mutated_documents():
    rng = random.Random(20_260_809)
    base = bytearray(
        encode_envelope(
            Envelope(
                body=Response(Record("myNS:ListItem", {"label": "a", "value": "b"})),
                header=[("k", "v")],
            ),
            FILE1_TABLE,
        )
    )
    for _ in range(500):
        mutated = bytearray(base)
        for _ in range(rng.randint(1, 4)):
            mutated[rng.randrange(len(mutated))] = rng.randrange(256)
        try:
            decode_envelope(bytes(mutated), FILE1_TABLE)
        except (MalformedXml, UnknownBodyShape, UnmappedRecordType):
            pass
