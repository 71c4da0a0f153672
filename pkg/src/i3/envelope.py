"""Bit-exact codec for the XML message envelope exchanged by all parties.

The wire format is a fixed minimal RPC-style profile: one envelope namespace
(``urn:i3/envelope``, prefix ``i3``), a method-named body child for calls, and
typed value elements. Output bytes are deterministic: no indentation, fixed
attribute order, alphabetical record fields, UTF-8 only.
"""

from __future__ import annotations

import re
import xml.dom.expatbuilder
import xml.dom.minidom
from dataclasses import dataclass, field
from datetime import date
from xml.dom.minidom import Element
from xml.parsers import expat

ENVELOPE_NS = "urn:i3/envelope"
SERVICE_NS_PREFIX = "urn:i3/service/"

FAULT_CODES = frozenset(
    {
        "Server.NoSuchService",
        "Client.NoSuchMethod",
        "Client.MethodNotAllowed",
        "Client.BadArguments",
        "Server.Internal",
        "Server.Unavailable",
    }
)

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

_NCNAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9._-]*$")
_QNAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9._-]*:[A-Za-z_][A-Za-z0-9._-]*$")
_INT_RE = re.compile(r"^-?[0-9]+$")
_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_ENCODING_DECL_RE = re.compile(rb'^<\?xml[^>]*?encoding=["\']([A-Za-z0-9._-]+)["\']')


class EnvelopeError(Exception):
    """Base class for wire codec failures."""


class MalformedXml(EnvelopeError):
    """Input bytes are not a well-formed UTF-8 XML document."""

    def __init__(self, message: str, position: tuple[int, int] | None = None):
        super().__init__(message)
        self.position = position


class UnknownBodyShape(EnvelopeError):
    """Well-formed XML that does not match the envelope grammar."""


class UnknownScalarType(UnknownBodyShape):
    """A value element carries a type tag outside the closed scalar set."""

    def __init__(self, tag: str):
        super().__init__(f"unknown scalar type {tag!r}")
        self.tag = tag


class UnmappedRecordType(EnvelopeError):
    """A record qname could not be resolved against the bean mapping table."""

    def __init__(self, qname: str):
        super().__init__(f"no bean mapping for record type {qname!r}")
        self.qname = qname


@dataclass(frozen=True)
class BeanMapping:
    """Associates a namespaced wire type name with a native implementation tag."""

    qname: str
    namespace: str
    native_type: str

    def __post_init__(self) -> None:
        if not _QNAME_RE.match(self.qname):
            raise ValueError(f"bean mapping qname {self.qname!r} is not prefix:local")
        if not self.namespace:
            raise ValueError("bean mapping namespace must be nonempty")

    @property
    def prefix(self) -> str:
        return self.qname.split(":", 1)[0]

    @property
    def local(self) -> str:
        return self.qname.split(":", 1)[1]


class BeanMappingTable:
    """Mapping-table with injective (namespace, local) and qname registration."""

    def __init__(self, mappings: list[BeanMapping] | None = None):
        self._by_qname: dict[str, BeanMapping] = {}
        self._by_ns_local: dict[tuple[str, str], BeanMapping] = {}
        for m in mappings or []:
            self.add(m)

    def add(self, mapping: BeanMapping) -> None:
        key = (mapping.namespace, mapping.local)
        if mapping.qname in self._by_qname or key in self._by_ns_local:
            raise ValueError(f"duplicate bean mapping for {mapping.qname!r}")
        self._by_qname[mapping.qname] = mapping
        self._by_ns_local[key] = mapping

    def by_qname(self, qname: str) -> BeanMapping | None:
        return self._by_qname.get(qname)

    def by_ns_local(self, namespace: str, local: str) -> BeanMapping | None:
        return self._by_ns_local.get((namespace, local))

    def __iter__(self):
        return iter(self._by_qname.values())

    def __len__(self) -> int:
        return len(self._by_qname)


@dataclass
class Record:
    """A bean-mapped record value: namespaced type name plus named fields."""

    qname: str
    fields: dict[str, "Value"]


# The scalar set is closed: string, int, bool, date, nil.
Value = str | int | bool | date | None | list["Value"] | Record


@dataclass
class Call:
    service: str
    method: str
    args: list[Value] = field(default_factory=list)


@dataclass
class Response:
    result: Value = None


@dataclass
class Fault:
    code: str
    reason: str
    detail: str = ""


@dataclass
class Envelope:
    """One wire message: ordered header entries plus exactly one body variant."""

    body: Call | Response | Fault
    header: list[tuple[str, str]] = field(default_factory=list)


def value_kind(v: Value) -> str:
    """Variant kind of a value; bool checked before int (bool is an int subtype)."""
    if v is None:
        return "nil"
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, int):
        return "int"
    if isinstance(v, str):
        return "string"
    if isinstance(v, date):
        return "date"
    if isinstance(v, list):
        return "list"
    if isinstance(v, Record):
        return "record"
    raise ValueError(f"not a wire value: {v!r}")


# ---------------------------------------------------------------------------
# encoding


def _check_xml_chars(s: str, what: str) -> None:
    for ch in s:
        o = ord(ch)
        if o in (0x9, 0xA, 0xD) or 0x20 <= o <= 0xD7FF or 0xE000 <= o <= 0xFFFD or o > 0xFFFF:
            continue
        raise ValueError(f"{what} contains character U+{o:04X} not representable in XML")


def _esc_text(s: str) -> str:
    s = s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    # Literal CR would be normalized away by any conforming parser.
    return s.replace("\r", "&#13;")


def _esc_attr(s: str) -> str:
    s = s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")
    return s.replace("\t", "&#9;").replace("\n", "&#10;").replace("\r", "&#13;")


def _element(name: str, attrs: list[tuple[str, str]], content: str | None) -> str:
    parts = [f"<{name}"]
    for k, v in attrs:
        parts.append(f' {k}="{_esc_attr(v)}"')
    if content:
        parts.append(f">{content}</{name}>")
    else:
        parts.append("/>")
    return "".join(parts)


def _encode_scalar_text(v: Value) -> str:
    kind = value_kind(v)
    if kind == "string":
        _check_xml_chars(v, "string value")  # type: ignore[arg-type]
        return _esc_text(v)  # type: ignore[arg-type]
    if kind == "int":
        if not INT64_MIN <= v <= INT64_MAX:  # type: ignore[operator]
            raise ValueError(f"int value {v} outside 64-bit signed range")
        return str(v)
    if kind == "bool":
        return "true" if v else "false"
    if kind == "date":
        return v.isoformat()  # type: ignore[union-attr]
    raise ValueError(f"not a scalar: {v!r}")


def _write_value(el_name: str, v: Value, mappings: BeanMappingTable) -> str:
    kind = value_kind(v)
    if kind == "nil":
        return _element(el_name, [("type", "nil")], None)
    if kind in ("string", "int", "bool", "date"):
        return _element(el_name, [("type", kind)], _encode_scalar_text(v))
    if kind == "list":
        items = v  # type: ignore[assignment]
        kinds = {value_kind(item) for item in items}
        if len(kinds) > 1:
            raise ValueError(f"heterogeneous list kinds {sorted(kinds)}")
        body = "".join(_write_value("i3:item", item, mappings) for item in items)
        return _element(el_name, [("type", "list")], body or None)
    # record
    rec: Record = v  # type: ignore[assignment]
    mapping = mappings.by_qname(rec.qname)
    if mapping is None:
        raise UnmappedRecordType(rec.qname)
    for name in rec.fields:
        if not _NCNAME_RE.match(name):
            raise ValueError(f"record field name {name!r} is not a valid element name")
    body = "".join(
        _write_value(name, rec.fields[name], mappings) for name in sorted(rec.fields)
    )
    attrs = [
        ("type", "record"),
        ("qname", rec.qname),
        (f"xmlns:{mapping.prefix}", mapping.namespace),
    ]
    return _element(el_name, attrs, body or None)


def encode_value(v: Value, mappings: BeanMappingTable) -> bytes:
    """Encode one value as a standalone ``<i3:value .../>`` element subtree."""
    return _write_value("i3:value", v, mappings).encode("utf-8")


def _write_body(body: Call | Response | Fault, mappings: BeanMappingTable) -> str:
    if isinstance(body, Call):
        if not _NCNAME_RE.match(body.method):
            raise ValueError(f"method name {body.method!r} is not a valid element name")
        if not body.service:
            raise ValueError("service name must be nonempty")
        _check_xml_chars(body.service, "service name")
        args = "".join(_write_value("i3:arg", a, mappings) for a in body.args)
        return _element(
            f"m:{body.method}",
            [("xmlns:m", SERVICE_NS_PREFIX + body.service)],
            args or None,
        )
    if isinstance(body, Response):
        return _element("i3:Response", [], _write_value("i3:value", body.result, mappings))
    if isinstance(body, Fault):
        if body.code not in FAULT_CODES:
            raise ValueError(f"fault code {body.code!r} outside the closed set")
        for s, what in ((body.reason, "fault reason"), (body.detail, "fault detail")):
            _check_xml_chars(s, what)
        inner = (
            _element("i3:code", [], _esc_text(body.code))
            + _element("i3:reason", [], _esc_text(body.reason) or None)
            + _element("i3:detail", [], _esc_text(body.detail) or None)
        )
        return _element("i3:Fault", [], inner)
    raise ValueError(f"not a body variant: {body!r}")


def encode_envelope(env: Envelope, mappings: BeanMappingTable) -> bytes:
    """Encode an envelope to deterministic UTF-8 document bytes."""
    entries = []
    for name, text in env.header:
        if not name:
            raise ValueError("header entry name must be nonempty")
        _check_xml_chars(name, "header entry name")
        if not isinstance(text, str):
            raise ValueError("header entry value must be text")
        _check_xml_chars(text, "header entry value")
        entries.append(_element("i3:entry", [("name", name)], _esc_text(text) or None))
    header = _element("i3:Header", [], "".join(entries) or None)
    body = _element("i3:Body", [], _write_body(env.body, mappings))
    doc = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        + _element("i3:Envelope", [("xmlns:i3", ENVELOPE_NS)], header + body)
    )
    return doc.encode("utf-8")


# ---------------------------------------------------------------------------
# decoding


def _parse_document(data: bytes | str) -> xml.dom.minidom.Document:
    if isinstance(data, str):
        data = data.encode("utf-8")
    m = _ENCODING_DECL_RE.match(data.lstrip()[:200])
    if m and m.group(1).decode("ascii", "replace").lower() not in ("utf-8", "utf8"):
        raise MalformedXml(f"unsupported encoding {m.group(1)!r}; only UTF-8 is accepted")
    try:
        # Prefixes are literal in this profile, so parse without namespace
        # resolution; declarations stay visible as plain attributes.
        return xml.dom.expatbuilder.parseString(data, namespaces=False)
    except expat.ExpatError as e:
        raise MalformedXml(str(e), position=(e.lineno, e.offset)) from e
    except (ValueError, UnicodeDecodeError) as e:
        raise MalformedXml(str(e)) from e


def _child_elements(el: Element) -> list[Element]:
    out = []
    for node in el.childNodes:
        if node.nodeType == node.ELEMENT_NODE:
            out.append(node)
        elif node.nodeType in (node.TEXT_NODE, node.CDATA_SECTION_NODE):
            if node.data.strip():
                raise UnknownBodyShape(f"stray text {node.data.strip()[:40]!r} in <{el.tagName}>")
        elif node.nodeType == node.COMMENT_NODE:
            continue
        else:
            raise UnknownBodyShape(f"unexpected node in <{el.tagName}>")
    return out


def _text_content(el: Element) -> str:
    parts = []
    for node in el.childNodes:
        if node.nodeType in (node.TEXT_NODE, node.CDATA_SECTION_NODE):
            parts.append(node.data)
        elif node.nodeType == node.COMMENT_NODE:
            continue
        else:
            raise UnknownBodyShape(f"element content expected text only in <{el.tagName}>")
    return "".join(parts)


def _attr(el: Element, name: str) -> str | None:
    if el.hasAttribute(name):
        return el.getAttribute(name)
    return None


def _decode_value(el: Element, mappings: BeanMappingTable) -> Value:
    kind = _attr(el, "type")
    if kind is None:
        raise UnknownScalarType("")
    if kind == "nil":
        if _child_elements(el) or _text_content(el):
            raise UnknownBodyShape("nil value must be empty")
        return None
    if kind == "string":
        return _text_content(el)
    if kind == "int":
        text = _text_content(el)
        if not _INT_RE.match(text):
            raise UnknownBodyShape(f"invalid int literal {text!r}")
        n = int(text)
        if not INT64_MIN <= n <= INT64_MAX:
            raise UnknownBodyShape(f"int {text} outside 64-bit signed range")
        return n
    if kind == "bool":
        text = _text_content(el)
        if text == "true":
            return True
        if text == "false":
            return False
        raise UnknownBodyShape(f"invalid bool literal {text!r}")
    if kind == "date":
        text = _text_content(el)
        if not _DATE_RE.match(text):
            raise UnknownBodyShape(f"invalid date literal {text!r}")
        try:
            return date.fromisoformat(text)
        except ValueError as e:
            raise UnknownBodyShape(f"invalid date literal {text!r}") from e
    if kind == "list":
        items: list[Value] = []
        for child in _child_elements(el):
            if child.tagName != "i3:item":
                raise UnknownBodyShape(f"list child <{child.tagName}> is not i3:item")
            items.append(_decode_value(child, mappings))
        kinds = {value_kind(item) for item in items}
        if len(kinds) > 1:
            raise UnknownBodyShape(f"heterogeneous list kinds {sorted(kinds)}")
        return items
    if kind == "record":
        qname = _attr(el, "qname")
        if qname is None or not _QNAME_RE.match(qname):
            raise UnknownBodyShape(f"record qname {qname!r} is not prefix:local")
        prefix, local = qname.split(":", 1)
        namespace = _attr(el, f"xmlns:{prefix}")
        if namespace is None:
            raise UnknownBodyShape(f"record prefix {prefix!r} is not declared on the element")
        if mappings.by_ns_local(namespace, local) is None:
            raise UnmappedRecordType(qname)
        fields: dict[str, Value] = {}
        for child in _child_elements(el):
            name = child.tagName
            if not _NCNAME_RE.match(name):
                raise UnknownBodyShape(f"record field <{name}> is not a plain element name")
            if name in fields:
                raise UnknownBodyShape(f"duplicate record field <{name}>")
            fields[name] = _decode_value(child, mappings)
        return Record(qname=qname, fields=fields)
    raise UnknownScalarType(kind)


def decode_value(data: bytes | str | Element, mappings: BeanMappingTable) -> Value:
    """Decode one value element subtree (bytes, str, or a parsed element)."""
    if isinstance(data, (bytes, str)):
        doc = _parse_document(data)
        return _decode_value(doc.documentElement, mappings)
    return _decode_value(data, mappings)


def _decode_body(el: Element, mappings: BeanMappingTable) -> Call | Response | Fault:
    tag = el.tagName
    if tag == "i3:Response":
        children = _child_elements(el)
        if len(children) != 1 or children[0].tagName != "i3:value":
            raise UnknownBodyShape("Response must contain exactly one i3:value")
        return Response(result=_decode_value(children[0], mappings))
    if tag == "i3:Fault":
        children = _child_elements(el)
        tags = [c.tagName for c in children]
        if tags != ["i3:code", "i3:reason", "i3:detail"]:
            raise UnknownBodyShape(f"Fault children {tags} must be code, reason, detail")
        code = _text_content(children[0])
        if code not in FAULT_CODES:
            raise UnknownBodyShape(f"fault code {code!r} outside the closed set")
        return Fault(code=code, reason=_text_content(children[1]), detail=_text_content(children[2]))
    if tag.startswith("m:"):
        ns = _attr(el, "xmlns:m")
        if ns is None or not ns.startswith(SERVICE_NS_PREFIX):
            raise UnknownBodyShape(f"call namespace {ns!r} is not a service namespace")
        service = ns[len(SERVICE_NS_PREFIX):]
        if not service:
            raise UnknownBodyShape("call namespace names no service")
        method = tag[2:]
        if not _NCNAME_RE.match(method):
            raise UnknownBodyShape(f"method name {method!r} is not a valid element name")
        args: list[Value] = []
        for child in _child_elements(el):
            if child.tagName != "i3:arg":
                raise UnknownBodyShape(f"call child <{child.tagName}> is not i3:arg")
            args.append(_decode_value(child, mappings))
        return Call(service=service, method=method, args=args)
    raise UnknownBodyShape(f"body child <{tag}> is not a call, response, or fault")


def decode_envelope(data: bytes | str, mappings: BeanMappingTable) -> Envelope:
    """Decode document bytes to an Envelope; inverse of encode on its image."""
    doc = _parse_document(data)
    root = doc.documentElement
    if root.tagName != "i3:Envelope" or _attr(root, "xmlns:i3") != ENVELOPE_NS:
        raise UnknownBodyShape(f"root <{root.tagName}> is not an i3:Envelope")
    children = _child_elements(root)
    if [c.tagName for c in children] != ["i3:Header", "i3:Body"]:
        raise UnknownBodyShape("envelope must contain i3:Header then i3:Body")
    header_el, body_el = children

    header: list[tuple[str, str]] = []
    for entry in _child_elements(header_el):
        if entry.tagName != "i3:entry":
            raise UnknownBodyShape(f"header child <{entry.tagName}> is not i3:entry")
        name = _attr(entry, "name")
        if name is None or not name:
            raise UnknownBodyShape("header entry without a name")
        header.append((name, _text_content(entry)))

    body_children = _child_elements(body_el)
    if len(body_children) != 1:
        raise UnknownBodyShape("body must contain exactly one child")
    return Envelope(body=_decode_body(body_children[0], mappings), header=header)
