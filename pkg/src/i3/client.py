"""HTTP clients: envelope transport, broker operations, and the call gateway.

The gateway binds service names through the broker (cached for a short TTL),
posts call envelopes, and decodes replies. Faults come back as WireFault;
connection problems and timeouts as TransportError with a distinct kind.
"""

from __future__ import annotations

import threading
import time
import urllib.error
import urllib.request
from urllib.parse import quote

from i3.broker import (
    ServiceDescription,
    parse_description,
    parse_registry_document,
)
from i3.envelope import (
    BeanMappingTable,
    Call,
    Envelope,
    EnvelopeError,
    Fault,
    Response,
    Value,
    decode_envelope,
    encode_envelope,
)

DEFAULT_TIMEOUT_MS = 2_000
BIND_CACHE_TTL_S = 60.0


class TransportError(Exception):
    """The remote endpoint could not be reached or did not answer in time."""

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind  # "timeout" | "connection error"


class WireFault(Exception):
    """The remote service answered with a fault envelope."""

    def __init__(self, fault: Fault):
        super().__init__(f"{fault.code}: {fault.reason} {fault.detail}".strip())
        self.fault = fault


def _classify(e: Exception) -> TransportError:
    seen: set[int] = set()
    cur: BaseException | None = e
    while cur is not None and id(cur) not in seen:
        seen.add(id(cur))
        if isinstance(cur, TimeoutError):
            return TransportError("timeout", str(e) or "timed out")
        reason = getattr(cur, "reason", None)
        cur = reason if isinstance(reason, BaseException) else cur.__cause__
    return TransportError("connection error", str(e))


def http_request(
    url: str,
    data: bytes | None = None,
    timeout_ms: int = DEFAULT_TIMEOUT_MS,
    content_type: str = "text/xml; charset=utf-8",
) -> tuple[int, bytes]:
    """One HTTP exchange; 4xx/5xx bodies are returned, not raised."""
    req = urllib.request.Request(url, data=data, method="POST" if data is not None else "GET")
    if data is not None:
        req.add_header("Content-Type", content_type)
    try:
        with urllib.request.urlopen(req, timeout=timeout_ms / 1000.0) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as e:
        return e.code, e.read()
    except (urllib.error.URLError, TimeoutError, ConnectionError, OSError) as e:
        raise _classify(e) from e


def post_envelope(
    url: str,
    env: Envelope,
    mappings: BeanMappingTable,
    timeout_ms: int = DEFAULT_TIMEOUT_MS,
) -> Envelope:
    """Post a call envelope and decode the reply; faults raise WireFault."""
    _, body = http_request(url, data=encode_envelope(env, mappings), timeout_ms=timeout_ms)
    try:
        reply = decode_envelope(body, mappings)
    except EnvelopeError as e:
        raise TransportError("connection error", f"unintelligible reply: {e}") from e
    if isinstance(reply.body, Fault):
        raise WireFault(reply.body)
    return reply


class BrokerClient:
    """Client for the registry's publish/retract/find/bind/describe surface."""

    def __init__(self, broker_url: str, timeout_ms: int = DEFAULT_TIMEOUT_MS):
        self.broker_url = broker_url.rstrip("/")
        self.timeout_ms = timeout_ms
        self._empty = BeanMappingTable()

    def _registry_call(self, path: str, method: str, args: list[Value]) -> Value:
        env = Envelope(body=Call(service="Registry", method=method, args=args))
        reply = post_envelope(
            f"{self.broker_url}{path}", env, self._empty, timeout_ms=self.timeout_ms
        )
        assert isinstance(reply.body, Response)
        return reply.body.result

    def publish(self, desc: ServiceDescription) -> None:
        from i3.broker import encode_description

        self._registry_call(
            "/registry/publish", "publish", [encode_description(desc).decode("utf-8")]
        )

    def retract(self, name: str) -> None:
        self._registry_call("/registry/retract", "retract", [name])

    def find(self, pattern: str) -> list[ServiceDescription]:
        status, body = http_request(
            f"{self.broker_url}/registry/find?name={quote(pattern)}",
            timeout_ms=self.timeout_ms,
        )
        if status != 200:
            raise TransportError("connection error", f"find failed with status {status}")
        return parse_registry_document(body)

    def bind(self, name: str) -> ServiceDescription:
        status, body = http_request(
            f"{self.broker_url}/registry/bind/{quote(name)}", timeout_ms=self.timeout_ms
        )
        if status == 404:
            raise WireFault(Fault("Server.NoSuchService", f"not registered: {name}", ""))
        if status != 200:
            raise TransportError("connection error", f"bind failed with status {status}")
        return parse_description(body)

    def describe(self, name: str) -> bytes:
        status, body = http_request(
            f"{self.broker_url}/registry/describe/{quote(name)}", timeout_ms=self.timeout_ms
        )
        if status == 404:
            raise WireFault(Fault("Server.NoSuchService", f"not registered: {name}", ""))
        return body


class HttpGateway:
    """Bind-then-call gateway used by services and the CLI to reach providers."""

    def __init__(
        self,
        broker_url: str,
        mappings: BeanMappingTable,
        timeout_ms: int = DEFAULT_TIMEOUT_MS,
        bind_ttl_s: float = BIND_CACHE_TTL_S,
    ):
        self.broker = BrokerClient(broker_url, timeout_ms=timeout_ms)
        self.mappings = mappings
        self.timeout_ms = timeout_ms
        self._ttl = bind_ttl_s
        self._cache: dict[str, tuple[float, str]] = {}
        self._lock = threading.Lock()

    def bind(self, service: str) -> str:
        now = time.monotonic()
        with self._lock:
            hit = self._cache.get(service)
            if hit and now - hit[0] < self._ttl:
                return hit[1]
        endpoint = self.broker.bind(service).endpoint
        with self._lock:
            self._cache[service] = (now, endpoint)
        return endpoint

    def invalidate(self, service: str) -> None:
        with self._lock:
            self._cache.pop(service, None)

    def call(
        self,
        service: str,
        method: str,
        args: list[Value],
        timeout_ms: int | None = None,
    ) -> Value:
        endpoint = self.bind(service)
        env = Envelope(body=Call(service=service, method=method, args=args))
        try:
            reply = post_envelope(
                endpoint, env, self.mappings, timeout_ms=timeout_ms or self.timeout_ms
            )
        except TransportError:
            self.invalidate(service)
            raise
        assert isinstance(reply.body, Response)
        return reply.body.result
