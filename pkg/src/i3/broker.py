"""Service registry: the intermediate role between requesters and providers.

Holds one description per service name (publish replaces, find matches,
bind resolves, describe serves a deterministic XML document). A snapshot
file, when configured, is rewritten on every change and loaded on start.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable
from urllib.parse import urlparse
from xml.dom.minidom import Element
from xml.sax.saxutils import quoteattr

from i3.envelope import (
    BeanMapping,
    UnknownBodyShape,
    _attr,
    _child_elements,
    _parse_document,
)

DESCRIPTION_NS = "urn:i3/description"

VALUE_KINDS = frozenset({"string", "int", "bool", "date", "nil", "list", "record"})


class InvalidDescription(Exception):
    pass


class NotFound(Exception):
    def __init__(self, name: str):
        super().__init__(f"no service named {name!r} is registered")
        self.name = name


@dataclass(frozen=True)
class MethodSig:
    """Wire signature of one method: argument kinds in order, result kind."""

    name: str
    arg_kinds: tuple[str, ...]
    result_kind: str

    @property
    def arity(self) -> int:
        return len(self.arg_kinds)


@dataclass
class ServiceDescription:
    name: str
    endpoint: str
    methods: list[MethodSig]
    record_types: list[BeanMapping] = field(default_factory=list)
    published_at: datetime | None = None

    def validate(self) -> None:
        if not self.name:
            raise InvalidDescription("service name is empty")
        url = urlparse(self.endpoint)
        if url.scheme not in ("http", "https") or not url.netloc:
            raise InvalidDescription(f"endpoint {self.endpoint!r} is not an absolute http(s) URL")
        if not self.methods:
            raise InvalidDescription(f"service {self.name!r} publishes no methods")
        for m in self.methods:
            for kind in (*m.arg_kinds, m.result_kind):
                if kind not in VALUE_KINDS:
                    raise InvalidDescription(f"method {m.name!r} uses unknown kind {kind!r}")


def encode_description(desc: ServiceDescription) -> bytes:
    """Deterministic XML for one service: methods and record types, sorted."""
    ts = (desc.published_at or datetime.fromtimestamp(0, timezone.utc)).isoformat()
    lines = [
        f"<i3:description xmlns:i3={quoteattr(DESCRIPTION_NS)} "
        f"name={quoteattr(desc.name)} endpoint={quoteattr(desc.endpoint)} "
        f"published-at={quoteattr(ts)}>"
    ]
    for m in sorted(desc.methods, key=lambda m: m.name):
        params = "".join(f'<i3:param kind="{k}"/>' for k in m.arg_kinds)
        lines.append(
            f"  <i3:method name={quoteattr(m.name)} returns={quoteattr(m.result_kind)}>"
            f"{params}</i3:method>"
        )
    for r in sorted(desc.record_types, key=lambda r: r.qname):
        lines.append(
            f"  <i3:record qname={quoteattr(r.qname)} namespace={quoteattr(r.namespace)} "
            f"native-type={quoteattr(r.native_type)}/>"
        )
    lines.append("</i3:description>")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _parse_description_element(el: Element) -> ServiceDescription:
    if el.tagName != "i3:description" or _attr(el, "xmlns:i3") not in (None, DESCRIPTION_NS):
        raise UnknownBodyShape(f"<{el.tagName}> is not a service description")
    name = _attr(el, "name")
    endpoint = _attr(el, "endpoint")
    ts = _attr(el, "published-at")
    if name is None or endpoint is None:
        raise UnknownBodyShape("description lacks name or endpoint")
    methods: list[MethodSig] = []
    records: list[BeanMapping] = []
    for child in _child_elements(el):
        if child.tagName == "i3:method":
            kinds = []
            for p in _child_elements(child):
                if p.tagName != "i3:param":
                    raise UnknownBodyShape(f"unexpected <{p.tagName}> in method")
                kinds.append(p.getAttribute("kind"))
            methods.append(
                MethodSig(
                    name=child.getAttribute("name"),
                    arg_kinds=tuple(kinds),
                    result_kind=child.getAttribute("returns"),
                )
            )
        elif child.tagName == "i3:record":
            records.append(
                BeanMapping(
                    qname=child.getAttribute("qname"),
                    namespace=child.getAttribute("namespace"),
                    native_type=child.getAttribute("native-type"),
                )
            )
        else:
            raise UnknownBodyShape(f"unexpected <{child.tagName}> in description")
    published = datetime.fromisoformat(ts) if ts else None
    return ServiceDescription(
        name=name, endpoint=endpoint, methods=methods, record_types=records, published_at=published
    )


def parse_description(data: bytes | str) -> ServiceDescription:
    return _parse_description_element(_parse_document(data).documentElement)


def encode_registry_document(descs: list[ServiceDescription]) -> bytes:
    """Concatenated description documents under one root; the snapshot format."""
    body = b"".join(encode_description(d) for d in descs)
    return b'<i3:registry xmlns:i3="urn:i3/description">\n' + body + b"</i3:registry>\n"


def parse_registry_document(data: bytes | str) -> list[ServiceDescription]:
    root = _parse_document(data).documentElement
    if root.tagName != "i3:registry":
        raise UnknownBodyShape(f"<{root.tagName}> is not a registry document")
    return [_parse_description_element(el) for el in _child_elements(root)]


def match_glob(pattern: str, name: str) -> bool:
    """Literal match, or one ``*`` at either end of the pattern."""
    if pattern == "*":
        return True
    if pattern.startswith("*"):
        return name.endswith(pattern[1:])
    if pattern.endswith("*"):
        return name.startswith(pattern[:-1])
    return pattern == name


class Broker:
    """In-process registry core; the HTTP surface wraps this."""

    def __init__(
        self,
        snapshot_path: str | Path | None = None,
        clock: Callable[[], datetime] | None = None,
    ):
        self._lock = threading.Lock()
        self._entries: dict[str, ServiceDescription] = {}
        self._snapshot_path = Path(snapshot_path) if snapshot_path else None
        self._clock = clock or (lambda: datetime.now(timezone.utc))
        if self._snapshot_path and self._snapshot_path.exists():
            for desc in parse_registry_document(self._snapshot_path.read_bytes()):
                self._entries[desc.name] = desc

    def publish(self, desc: ServiceDescription) -> ServiceDescription:
        desc.validate()
        stamped = replace(desc, published_at=self._clock())
        with self._lock:
            self._entries[stamped.name] = stamped
            self._save_locked()
        return stamped

    def retract(self, name: str) -> bool:
        with self._lock:
            present = self._entries.pop(name, None) is not None
            if present:
                self._save_locked()
        return present

    def find(self, pattern: str) -> list[ServiceDescription]:
        if not pattern:
            raise ValueError("registry query pattern must be nonempty")
        with self._lock:
            hits = [d for n, d in self._entries.items() if match_glob(pattern, n)]
        return sorted(hits, key=lambda d: d.name)

    def bind(self, name: str) -> tuple[str, ServiceDescription]:
        with self._lock:
            desc = self._entries.get(name)
        if desc is None:
            raise NotFound(name)
        return desc.endpoint, desc

    def describe(self, name: str) -> bytes:
        with self._lock:
            desc = self._entries.get(name)
        if desc is None:
            raise NotFound(name)
        return encode_description(desc)

    def _save_locked(self) -> None:
        if self._snapshot_path is None:
            return
        doc = encode_registry_document(sorted(self._entries.values(), key=lambda d: d.name))
        tmp = self._snapshot_path.with_suffix(".tmp")
        tmp.write_bytes(doc)
        os.replace(tmp, self._snapshot_path)


__all__ = [
    "Broker",
    "InvalidDescription",
    "MethodSig",
    "NotFound",
    "ServiceDescription",
    "encode_description",
    "encode_registry_document",
    "match_glob",
    "parse_description",
    "parse_registry_document",
]
