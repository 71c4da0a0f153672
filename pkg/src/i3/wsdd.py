"""Parser, serializer, and validator for XML deployment descriptors.

A descriptor declares handlers and services (provider, request flow,
parameters, bean mappings) under a ``<deployment>`` root; an
``<undeployment>`` root lists service names to remove. Provider-tagged
strings like ``java:RPC`` are stored verbatim; the colon prefix is opaque.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.dom.minidom import Element
from xml.sax.saxutils import quoteattr

from i3.envelope import BeanMapping, MalformedXml, _child_elements, _parse_document

WSDD_NS = "http://xml.apache.org/axis/wsdd/"
PROVIDER_NS_PREFIX = "http://xml.apache.org/axis/wsdd/providers/"


class UnknownRoot(Exception):
    """An element outside the closed descriptor grammar (root or child)."""

    def __init__(self, tag: str):
        super().__init__(f"unknown descriptor element <{tag}>")
        self.tag = tag


class MissingParameter(Exception):
    def __init__(self, service: str, parameter: str):
        super().__init__(f"service {service!r} lacks required parameter {parameter!r}")
        self.service = service
        self.parameter = parameter


class DuplicateService(Exception):
    def __init__(self, name: str):
        super().__init__(f"duplicate service name {name!r}")
        self.name = name


class UnresolvedHandler(Exception):
    def __init__(self, service: str, handler: str):
        super().__init__(f"service {service!r} request flow names unknown handler {handler!r}")
        self.service = service
        self.handler = handler


class InvalidDescriptor(Exception):
    """A descriptor violates its invariants and cannot be serialized."""


@dataclass(frozen=True)
class Wildcard:
    """allowedMethods value admitting every implementation method."""


WILDCARD = Wildcard()


@dataclass
class HandlerDef:
    name: str
    native_type: str


@dataclass
class ServiceDef:
    name: str
    provider: str
    class_name: str
    request_flow: list[str] = field(default_factory=list)
    allowed_methods: Wildcard | frozenset[str] = WILDCARD
    bean_mappings: list[BeanMapping] = field(default_factory=list)
    # Parameters beyond className/allowedMethods, preserved but uninterpreted.
    extra_parameters: dict[str, str] = field(default_factory=dict)


@dataclass
class DeploymentDescriptor:
    handlers: list[HandlerDef] = field(default_factory=list)
    services: list[ServiceDef] = field(default_factory=list)


@dataclass
class UndeploymentDescriptor:
    service_names: list[str] = field(default_factory=list)


@dataclass
class Diagnostic:
    service: str | None
    reason: str


def _require_attr(el: Element, name: str) -> str:
    if not el.hasAttribute(name):
        raise MalformedXml(f"<{el.tagName}> lacks required attribute {name!r}")
    return el.getAttribute(name)


def _parse_bean_mapping(el: Element) -> BeanMapping:
    qname = _require_attr(el, "qname")
    native = _require_attr(el, "languageSpecificType")
    if ":" not in qname:
        raise MalformedXml(f"beanMapping qname {qname!r} is not prefix:local")
    prefix = qname.split(":", 1)[0]
    namespace = _require_attr(el, f"xmlns:{prefix}")
    try:
        return BeanMapping(qname=qname, namespace=namespace, native_type=native)
    except ValueError as e:
        raise MalformedXml(str(e)) from e


def _parse_service(el: Element) -> ServiceDef:
    name = _require_attr(el, "name")
    provider = _require_attr(el, "provider")
    request_flow: list[str] = []
    parameters: dict[str, str] = {}
    mappings: list[BeanMapping] = []
    seen_flow = False
    for child in _child_elements(el):
        tag = child.tagName
        if tag == "requestFlow":
            if seen_flow:
                raise MalformedXml(f"service {name!r} has more than one requestFlow")
            seen_flow = True
            for h in _child_elements(child):
                if h.tagName != "handler":
                    raise UnknownRoot(h.tagName)
                request_flow.append(_require_attr(h, "type"))
        elif tag == "parameter":
            pname = _require_attr(child, "name")
            if pname in parameters:
                raise MalformedXml(f"service {name!r} repeats parameter {pname!r}")
            parameters[pname] = _require_attr(child, "value")
        elif tag == "beanMapping":
            mappings.append(_parse_bean_mapping(child))
        else:
            raise UnknownRoot(tag)

    if "className" not in parameters:
        raise MissingParameter(name, "className")
    class_name = parameters.pop("className")
    allowed_raw = parameters.pop("allowedMethods", "*")
    allowed: Wildcard | frozenset[str]
    if allowed_raw == "*":
        allowed = WILDCARD
    else:
        methods = frozenset(allowed_raw.split(" ")) - {""}
        if not methods:
            raise MalformedXml(f"service {name!r} has empty allowedMethods")
        allowed = methods

    seen = set()
    for m in mappings:
        key = (m.namespace, m.local)
        if key in seen:
            raise MalformedXml(f"service {name!r} repeats bean mapping {m.qname!r}")
        seen.add(key)

    return ServiceDef(
        name=name,
        provider=provider,
        class_name=class_name,
        request_flow=request_flow,
        allowed_methods=allowed,
        bean_mappings=mappings,
        extra_parameters=parameters,
    )


def parse_wsdd(doc: bytes | str) -> DeploymentDescriptor | UndeploymentDescriptor:
    """Parse descriptor bytes; unknown elements are rejected, never skipped."""
    root = _parse_document(doc).documentElement
    tag = root.tagName
    if root.hasAttribute("xmlns") and root.getAttribute("xmlns") != WSDD_NS:
        raise UnknownRoot(tag)

    if tag == "undeployment":
        names: list[str] = []
        for child in _child_elements(root):
            if child.tagName != "service":
                raise UnknownRoot(child.tagName)
            names.append(_require_attr(child, "name"))
        if not names:
            raise MalformedXml("undeployment names no services")
        if len(set(names)) != len(names):
            raise MalformedXml("undeployment repeats a service name")
        return UndeploymentDescriptor(service_names=names)

    if tag != "deployment":
        raise UnknownRoot(tag)

    handlers: list[HandlerDef] = []
    services: list[ServiceDef] = []
    for child in _child_elements(root):
        if child.tagName == "handler":
            handlers.append(
                HandlerDef(name=_require_attr(child, "name"), native_type=_require_attr(child, "type"))
            )
        elif child.tagName == "service":
            services.append(_parse_service(child))
        else:
            raise UnknownRoot(child.tagName)

    if len({h.name for h in handlers}) != len(handlers):
        raise MalformedXml("duplicate handler name")
    seen_services = set()
    for s in services:
        if s.name in seen_services:
            raise DuplicateService(s.name)
        seen_services.add(s.name)
    handler_names = {h.name for h in handlers}
    for s in services:
        for ref in s.request_flow:
            if ref not in handler_names:
                raise UnresolvedHandler(s.name, ref)
    return DeploymentDescriptor(handlers=handlers, services=services)


def _descriptor_invariant_violations(d: DeploymentDescriptor) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    if len({h.name for h in d.handlers}) != len(d.handlers):
        out.append(Diagnostic(None, "duplicate handler name"))
    seen: set[str] = set()
    handler_names = {h.name for h in d.handlers}
    for s in d.services:
        if not s.name:
            out.append(Diagnostic(s.name, "service name is empty"))
        if s.name in seen:
            out.append(Diagnostic(s.name, "duplicate service name"))
        seen.add(s.name)
        if not s.class_name:
            out.append(Diagnostic(s.name, "className is empty"))
        for ref in s.request_flow:
            if ref not in handler_names:
                out.append(Diagnostic(s.name, f"request flow names unknown handler {ref!r}"))
        if isinstance(s.allowed_methods, frozenset) and not s.allowed_methods:
            out.append(Diagnostic(s.name, "allowedMethods set is empty"))
        keys = [(m.namespace, m.local) for m in s.bean_mappings]
        if len(set(keys)) != len(keys):
            out.append(Diagnostic(s.name, "duplicate bean mapping"))
    return out


def _provider_prefixes(d: DeploymentDescriptor) -> list[str]:
    tags = [h.native_type for h in d.handlers]
    tags += [s.provider for s in d.services]
    tags += [m.native_type for s in d.services for m in s.bean_mappings]
    return sorted({t.split(":", 1)[0] for t in tags if ":" in t})


def serialize_wsdd(d: DeploymentDescriptor | UndeploymentDescriptor) -> bytes:
    """Deterministic canonical bytes; ``parse_wsdd`` of the output equals ``d``."""
    if isinstance(d, UndeploymentDescriptor):
        if not d.service_names:
            raise InvalidDescriptor("undeployment names no services")
        if len(set(d.service_names)) != len(d.service_names):
            raise InvalidDescriptor("undeployment repeats a service name")
        lines = [f'<undeployment xmlns="{WSDD_NS}">']
        lines += [f"  <service name={quoteattr(n)}/>" for n in d.service_names]
        lines.append("</undeployment>")
        return ("\n".join(lines) + "\n").encode("utf-8")

    violations = _descriptor_invariant_violations(d)
    if violations:
        first = violations[0]
        raise InvalidDescriptor(f"{first.service or '<descriptor>'}: {first.reason}")

    attrs = [f'xmlns="{WSDD_NS}"']
    attrs += [
        f'xmlns:{p}={quoteattr(PROVIDER_NS_PREFIX + p)}' for p in _provider_prefixes(d)
    ]
    lines = ["<deployment " + " ".join(attrs) + ">"]
    for h in d.handlers:
        lines.append(f"  <handler name={quoteattr(h.name)} type={quoteattr(h.native_type)}/>")
    for s in d.services:
        lines.append(f"  <service name={quoteattr(s.name)} provider={quoteattr(s.provider)}>")
        if s.request_flow:
            lines.append("    <requestFlow>")
            lines += [f"      <handler type={quoteattr(r)}/>" for r in s.request_flow]
            lines.append("    </requestFlow>")
        lines.append(f"    <parameter name=\"className\" value={quoteattr(s.class_name)}/>")
        if isinstance(s.allowed_methods, Wildcard):
            allowed = "*"
        else:
            allowed = " ".join(sorted(s.allowed_methods))
        lines.append(f'    <parameter name="allowedMethods" value={quoteattr(allowed)}/>')
        for pname in sorted(s.extra_parameters):
            lines.append(
                f"    <parameter name={quoteattr(pname)} value={quoteattr(s.extra_parameters[pname])}/>"
            )
        for m in s.bean_mappings:
            lines.append(
                f"    <beanMapping qname={quoteattr(m.qname)} "
                f"xmlns:{m.prefix}={quoteattr(m.namespace)} "
                f"languageSpecificType={quoteattr(m.native_type)}/>"
            )
        lines.append("  </service>")
    lines.append("</deployment>")
    return ("\n".join(lines) + "\n").encode("utf-8")


def validate_descriptor(
    d: DeploymentDescriptor, impl_registry: set[str]
) -> list[Diagnostic]:
    """Diagnostics for invariant violations and unregistered implementations."""
    out = _descriptor_invariant_violations(d)
    for s in d.services:
        if s.class_name and s.class_name not in impl_registry:
            out.append(Diagnostic(s.name, f"no registered implementation {s.class_name!r}"))
    return out


__all__ = [
    "WSDD_NS",
    "Wildcard",
    "WILDCARD",
    "HandlerDef",
    "ServiceDef",
    "DeploymentDescriptor",
    "UndeploymentDescriptor",
    "Diagnostic",
    "UnknownRoot",
    "MissingParameter",
    "DuplicateService",
    "UnresolvedHandler",
    "InvalidDescriptor",
    "parse_wsdd",
    "serialize_wsdd",
    "validate_descriptor",
]
