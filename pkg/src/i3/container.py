"""Service container: hot-deploys descriptors, runs handler chains, dispatches.

Deployed services are reachable as ``/services/{name}``; each call runs the
service's request flow (handlers in descriptor order, first fault wins) and
then the RPC dispatch, which checks the method against the descriptor's
allowedMethods and the implementation's signature before invoking it.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Protocol

from i3.broker import MethodSig, ServiceDescription
from i3.envelope import (
    BeanMappingTable,
    Call,
    Envelope,
    EnvelopeError,
    Fault,
    Response,
    Value,
    value_kind,
)
from i3.faults import ServiceError
from i3.wsdd import (
    DeploymentDescriptor,
    Diagnostic,
    ServiceDef,
    UndeploymentDescriptor,
    Wildcard,
    validate_descriptor,
)

AUDIT_RING_SIZE = 10_000


@dataclass(frozen=True)
class AuditRecord:
    at: datetime
    kind: str  # "handler:<name>" or "dispatch"
    service: str
    method: str
    outcome: str  # "pass", "ok", or a fault code


class AuditLog:
    """In-memory ring mirrored to an append-only file; appends are linearizable."""

    def __init__(self, path: str | Path | None = None, ring_size: int = AUDIT_RING_SIZE):
        self._lock = threading.Lock()
        self._ring: list[AuditRecord] = []
        self._ring_size = ring_size
        self._total = 0
        self._path = Path(path) if path else None
        self._fh = open(self._path, "a", encoding="utf-8") if self._path else None

    def append(self, record: AuditRecord) -> None:
        with self._lock:
            self._ring.append(record)
            if len(self._ring) > self._ring_size:
                del self._ring[0]
            self._total += 1
            if self._fh:
                self._fh.write(
                    f"{record.at.isoformat()}\t{record.kind}\t{record.service}"
                    f"\t{record.method}\t{record.outcome}\n"
                )
                self._fh.flush()

    def records(self) -> list[AuditRecord]:
        with self._lock:
            return list(self._ring)

    def __len__(self) -> int:
        with self._lock:
            return self._total


@dataclass
class HandlerContext:
    audit: AuditLog
    service: str
    method: str


HandlerBehavior = Callable[[Envelope, HandlerContext], Envelope]


def _print_handler(env: Envelope, ctx: HandlerContext) -> Envelope:
    ctx.audit.append(
        AuditRecord(
            at=datetime.now(timezone.utc),
            kind="handler:print",
            service=ctx.service,
            method=ctx.method,
            outcome="pass",
        )
    )
    return env


# Handler behaviors are selected by the local part of the WSDD handler type.
HANDLER_BEHAVIORS: dict[str, HandlerBehavior] = {"LogHandler": _print_handler}


@dataclass
class BoundMethod:
    sig: MethodSig
    func: Callable[[list[Value]], Value]


@dataclass
class ServiceImplementation:
    """A deployable implementation: wire methods plus the qnames it requires mapped."""

    id: str
    methods: dict[str, BoundMethod]
    record_types: tuple[str, ...] = ()


ImplFactory = Callable[[ServiceDef], ServiceImplementation]


class BrokerHandle(Protocol):
    def publish(self, desc: ServiceDescription) -> object: ...

    def retract(self, name: str) -> object: ...


@dataclass
class DeployedService:
    definition: ServiceDef
    impl: ServiceImplementation
    endpoint: str
    mappings: BeanMappingTable
    handlers: list[tuple[str, HandlerBehavior]]
    state: str = "Active"
    description: ServiceDescription | None = None


class ValidationFailed(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        lines = "; ".join(f"{d.service or '<descriptor>'}: {d.reason}" for d in diagnostics)
        super().__init__(f"descriptor validation failed: {lines}")
        self.diagnostics = diagnostics


class DeployError(Exception):
    def __init__(self, failures: list[tuple[str, str]], deployed: list[DeployedService]):
        super().__init__("; ".join(f"{n}: {r}" for n, r in failures))
        self.failures = failures
        self.deployed = deployed


class EndpointConflict(DeployError):
    """One or more service names were already active."""


def fault_for_error(e: ServiceError) -> Fault:
    return Fault(code=e.fault_code, reason=e.reason, detail=str(e))


class ServiceContainer:
    def __init__(
        self,
        factories: dict[str, ImplFactory],
        broker: BrokerHandle | None = None,
        base_url: str = "http://127.0.0.1:0",
        audit: AuditLog | None = None,
    ):
        self._factories = dict(factories)
        self._broker = broker
        self._base_url = base_url.rstrip("/")
        self.audit = audit or AuditLog()
        self.set_base_url(base_url)
        self._admin_lock = threading.Lock()
        self._active: dict[str, DeployedService] = {}
        self._merged = BeanMappingTable()

    def set_base_url(self, base_url: str) -> None:
        """Must be called before deploy; endpoints are minted at deploy time."""
        self._base_url = base_url.rstrip("/")

    # -- deployment -------------------------------------------------------

    def deploy(self, d: DeploymentDescriptor) -> list[DeployedService]:
        diags = validate_descriptor(d, set(self._factories))
        handler_types = {h.name: h.native_type.split(":")[-1] for h in d.handlers}
        for hname, local in handler_types.items():
            if local not in HANDLER_BEHAVIORS:
                diags.append(Diagnostic(None, f"handler {hname!r} has no behavior {local!r}"))
        for s in d.services:
            if s.provider.split(":")[-1] != "RPC":
                diags.append(Diagnostic(s.name, f"unknown provider {s.provider!r}"))
        if diags:
            raise ValidationFailed(diags)

        deployed: list[DeployedService] = []
        failures: list[tuple[str, str]] = []
        conflict = False
        with self._admin_lock:
            for sdef in d.services:
                if sdef.name in self._active:
                    failures.append((sdef.name, "endpoint already active"))
                    conflict = True
                    continue
                try:
                    svc = self._deploy_one(sdef, handler_types)
                except Exception as e:  # per-service atomicity: others stay up
                    failures.append((sdef.name, str(e)))
                    continue
                deployed.append(svc)
        if failures:
            if conflict:
                raise EndpointConflict(failures, deployed)
            raise DeployError(failures, deployed)
        return deployed

    def _deploy_one(self, sdef: ServiceDef, handler_types: dict[str, str]) -> DeployedService:
        impl = self._factories[sdef.class_name](sdef)
        mapped = {m.qname for m in sdef.bean_mappings}
        missing = [q for q in impl.record_types if q not in mapped]
        if missing:
            raise RuntimeError(f"record types {missing} lack bean mappings")
        table = BeanMappingTable(list(sdef.bean_mappings))
        handlers = [
            (name, HANDLER_BEHAVIORS[handler_types[name]]) for name in sdef.request_flow
        ]
        endpoint = f"{self._base_url}/services/{sdef.name}"
        svc = DeployedService(
            definition=sdef, impl=impl, endpoint=endpoint, mappings=table, handlers=handlers
        )
        svc.description = self._describe(svc)
        if self._broker is not None:
            try:
                self._broker.publish(svc.description)
            except Exception as e:
                raise RuntimeError(f"broker publish failed: {e}") from e
        self._active[sdef.name] = svc
        self._rebuild_merged()
        return svc

    def undeploy(self, u: UndeploymentDescriptor) -> tuple[int, list[str]]:
        removed = 0
        diagnostics: list[str] = []
        with self._admin_lock:
            for name in u.service_names:
                svc = self._active.pop(name, None)
                if svc is None:
                    diagnostics.append(f"{name}: not deployed")
                    continue
                svc.state = "Undeployed"
                removed += 1
                if self._broker is not None:
                    try:
                        self._broker.retract(name)
                    except Exception as e:
                        diagnostics.append(f"{name}: broker retract failed: {e}")
            self._rebuild_merged()
        return removed, diagnostics

    def _rebuild_merged(self) -> None:
        merged = BeanMappingTable()
        for svc in self._active.values():
            for m in svc.definition.bean_mappings:
                if merged.by_qname(m.qname) == m:
                    continue
                merged.add(m)
        self._merged = merged

    def list_deployed(self) -> list[tuple[str, str, str]]:
        with self._admin_lock:
            return sorted(
                (name, svc.state, svc.endpoint) for name, svc in self._active.items()
            )

    def _describe(self, svc: DeployedService) -> ServiceDescription:
        methods = [b.sig for b in svc.impl.methods.values()]
        return ServiceDescription(
            name=svc.definition.name,
            endpoint=svc.endpoint,
            methods=sorted(methods, key=lambda m: m.name),
            record_types=list(svc.definition.bean_mappings),
        )

    def describe_service(self, name: str) -> ServiceDescription | None:
        svc = self._active.get(name)
        return svc.description if svc else None

    @property
    def merged_mappings(self) -> BeanMappingTable:
        return self._merged

    # -- request path -----------------------------------------------------

    def apply_request_flow(self, svc: DeployedService, env: Envelope) -> Envelope:
        method = env.body.method if isinstance(env.body, Call) else ""
        ctx = HandlerContext(audit=self.audit, service=svc.definition.name, method=method)
        for name, behavior in svc.handlers:
            try:
                env = behavior(env, ctx)
            except Exception as e:
                return Envelope(
                    body=Fault("Server.Internal", f"handler {name} failed", str(e))
                )
            if isinstance(env.body, Fault):
                return env
        return env

    def dispatch(self, env: Envelope) -> Envelope:
        if not isinstance(env.body, Call):
            return self._faulted("", "", Fault("Client.BadArguments", "body is not a call", ""))
        call = env.body
        svc = self._active.get(call.service)
        if svc is None or svc.state != "Active":
            return self._faulted(
                call.service,
                call.method,
                Fault("Server.NoSuchService", f"no service named {call.service!r}", ""),
            )

        flowed = self.apply_request_flow(svc, env)
        if isinstance(flowed.body, Fault):
            return self._faulted(call.service, call.method, flowed.body)
        if not isinstance(flowed.body, Call):
            fault = Fault("Server.Internal", "handler produced a non-call body", "")
            return self._faulted(call.service, call.method, fault)
        call = flowed.body

        bound = svc.impl.methods.get(call.method)
        if bound is None:
            fault = Fault("Client.NoSuchMethod", f"no method {call.method!r}", "")
            return self._faulted(call.service, call.method, fault)
        allowed = svc.definition.allowed_methods
        if not isinstance(allowed, Wildcard) and call.method not in allowed:
            fault = Fault("Client.MethodNotAllowed", f"{call.method!r} is not allowed", "")
            return self._faulted(call.service, call.method, fault)
        mismatch = self._args_mismatch(bound.sig, call.args)
        if mismatch:
            return self._faulted(
                call.service, call.method, Fault("Client.BadArguments", mismatch, "")
            )

        try:
            result = bound.func(call.args)
        except ServiceError as e:
            return self._faulted(call.service, call.method, fault_for_error(e))
        except Exception as e:
            return self._faulted(
                call.service, call.method, Fault("Server.Internal", type(e).__name__, str(e))
            )
        self._audit_dispatch(call.service, call.method, "ok")
        return Envelope(body=Response(result=result))

    @staticmethod
    def _args_mismatch(sig: MethodSig, args: list[Value]) -> str | None:
        if len(args) != sig.arity:
            return f"expected {sig.arity} argument(s), got {len(args)}"
        for i, (kind, arg) in enumerate(zip(sig.arg_kinds, args)):
            got = value_kind(arg)
            if got != kind:
                return f"argument {i} must be {kind}, got {got}"
        return None

    def _faulted(self, service: str, method: str, fault: Fault) -> Envelope:
        self._audit_dispatch(service, method, fault.code)
        return Envelope(body=Fault(fault.code, fault.reason, fault.detail))

    def _audit_dispatch(self, service: str, method: str, outcome: str) -> None:
        self.audit.append(
            AuditRecord(
                at=datetime.now(timezone.utc),
                kind="dispatch",
                service=service,
                method=method,
                outcome=outcome,
            )
        )

    # -- wire boundary ----------------------------------------------------

    def handle_wire(self, data: bytes) -> tuple[int, bytes]:
        """Decode request bytes, dispatch, encode the reply; (http status, body)."""
        from i3.envelope import decode_envelope, encode_envelope

        try:
            env = decode_envelope(data, self._merged)
        except EnvelopeError as e:
            fault = Envelope(
                body=Fault("Client.BadArguments", type(e).__name__, str(e))
            )
            return 500, encode_envelope(fault, self._merged)

        reply = self.dispatch(env)
        service = env.body.service if isinstance(env.body, Call) else ""
        svc = self._active.get(service)
        table = svc.mappings if svc else self._merged
        try:
            out = encode_envelope(reply, table)
        except EnvelopeError as e:
            reply = Envelope(body=Fault("Server.Internal", type(e).__name__, str(e)))
            out = encode_envelope(reply, table)
        status = 200 if isinstance(reply.body, Response) else 500
        return status, out
