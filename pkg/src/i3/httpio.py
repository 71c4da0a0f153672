"""HTTP surfaces for the container and the broker, on the stdlib server.

Container: POST /services/{name} (envelope in/out, 200 response, 500 fault),
GET /services/{name}?describe, POST /admin/deploy and /admin/undeploy (WSDD),
GET /admin/services, plus optional /bridge/* and /console/* in serve mode.
Broker: POST /registry/publish|retract (envelope calls), GET find/bind/describe.
"""

from __future__ import annotations

import mimetypes
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, unquote, urlparse

from i3.broker import (
    Broker,
    InvalidDescription,
    NotFound,
    encode_description,
    encode_registry_document,
    parse_description,
)
from i3.container import DeployError, ServiceContainer, ValidationFailed
from i3.envelope import (
    BeanMappingTable,
    Call,
    Envelope,
    EnvelopeError,
    Fault,
    Response,
    decode_envelope,
    encode_envelope,
)
from i3.wsdd import DeploymentDescriptor, UndeploymentDescriptor, parse_wsdd

_EMPTY = BeanMappingTable()

XML = "text/xml; charset=utf-8"
TEXT = "text/plain; charset=utf-8"


class _QuietHandler(BaseHTTPRequestHandler):
    server_version = "i3"
    protocol_version = "HTTP/1.1"

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        pass

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _send(self, status: int, body: bytes, content_type: str = TEXT) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class ContainerServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(
        self,
        container: ServiceContainer,
        host: str = "127.0.0.1",
        port: int = 0,
        delay_ms: int = 0,
        bridge=None,
        console_dir: Path | None = None,
    ):
        self.container = container
        self.delay_ms = delay_ms
        self.bridge = bridge
        self.console_dir = console_dir
        super().__init__((host, port), _ContainerHandler)

    @property
    def base_url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"


class _ContainerHandler(_QuietHandler):
    server: ContainerServer

    def do_POST(self):  # noqa: N802 - stdlib casing
        url = urlparse(self.path)
        parts = [unquote(p) for p in url.path.split("/") if p]
        container = self.server.container
        try:
            if len(parts) == 2 and parts[0] == "services":
                if self.server.delay_ms:
                    time.sleep(self.server.delay_ms / 1000.0)
                status, out = container.handle_wire(self._body())
                self._send(status, out, XML)
            elif parts == ["admin", "deploy"]:
                self._admin_deploy()
            elif parts == ["admin", "undeploy"]:
                self._admin_undeploy()
            elif parts and parts[0] == "bridge" and self.server.bridge is not None:
                status, ctype, out = self.server.bridge.handle(
                    "POST", url.path, parse_qs(url.query), self._body()
                )
                self._send(status, out, ctype)
            else:
                self._send(404, b"not found")
        except Exception as e:  # surface, never hang the connection
            self._send(500, f"internal error: {e}".encode())

    def do_GET(self):  # noqa: N802
        url = urlparse(self.path)
        parts = [unquote(p) for p in url.path.split("/") if p]
        query = parse_qs(url.query, keep_blank_values=True)
        container = self.server.container
        try:
            if len(parts) == 2 and parts[0] == "services" and "describe" in query:
                desc = container.describe_service(parts[1])
                if desc is None:
                    self._send(404, b"no such service")
                else:
                    self._send(200, encode_description(desc), XML)
            elif parts == ["admin", "services"]:
                lines = [f"{n}\t{s}\t{e}" for n, s, e in container.list_deployed()]
                self._send(200, ("\n".join(lines) + "\n").encode())
            elif parts == ["health"]:
                self._send(200, b"ok")
            elif parts and parts[0] == "bridge" and self.server.bridge is not None:
                status, ctype, out = self.server.bridge.handle(
                    "GET", url.path, parse_qs(url.query), b""
                )
                self._send(status, out, ctype)
            elif parts and parts[0] == "console" and self.server.console_dir is not None:
                self._static(parts[1:])
            else:
                self._send(404, b"not found")
        except Exception as e:
            self._send(500, f"internal error: {e}".encode())

    def _admin_deploy(self):
        try:
            d = parse_wsdd(self._body())
        except Exception as e:
            self._send(400, f"bad descriptor: {e}".encode())
            return
        if not isinstance(d, DeploymentDescriptor):
            self._send(400, b"expected a <deployment> descriptor")
            return
        try:
            deployed = self.server.container.deploy(d)
        except ValidationFailed as e:
            self._send(400, str(e).encode())
            return
        except DeployError as e:
            ok = "\n".join(s.definition.name for s in e.deployed)
            self._send(409, f"deploy failed: {e}\ndeployed:\n{ok}".encode())
            return
        names = "\n".join(s.definition.name for s in deployed)
        self._send(200, f"deployed:\n{names}\n".encode())

    def _admin_undeploy(self):
        try:
            u = parse_wsdd(self._body())
        except Exception as e:
            self._send(400, f"bad descriptor: {e}".encode())
            return
        if not isinstance(u, UndeploymentDescriptor):
            self._send(400, b"expected an <undeployment> descriptor")
            return
        removed, diags = self.server.container.undeploy(u)
        text = f"removed: {removed}\n" + "".join(f"{d}\n" for d in diags)
        self._send(200, text.encode())

    def _static(self, parts: list[str]):
        root = self.server.console_dir.resolve()
        rel = "/".join(parts) or "index.html"
        path = (root / rel).resolve()
        if not str(path).startswith(str(root)) or not path.is_file():
            self._send(404, b"not found")
            return
        ctype = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
        self._send(200, path.read_bytes(), ctype)


class BrokerServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, broker: Broker, host: str = "127.0.0.1", port: int = 0):
        self.broker = broker
        super().__init__((host, port), _BrokerHandler)

    @property
    def base_url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"


class _BrokerHandler(_QuietHandler):
    server: BrokerServer

    def _envelope_reply(self, env: Envelope) -> None:
        body = encode_envelope(env, _EMPTY)
        self._send(500 if isinstance(env.body, Fault) else 200, body, XML)

    def do_POST(self):  # noqa: N802
        url = urlparse(self.path)
        parts = [unquote(p) for p in url.path.split("/") if p]
        if len(parts) != 2 or parts[0] != "registry" or parts[1] not in ("publish", "retract"):
            self._send(404, b"not found")
            return
        try:
            env = decode_envelope(self._body(), _EMPTY)
        except EnvelopeError as e:
            fault = Fault("Client.BadArguments", type(e).__name__, str(e))
            self._envelope_reply(Envelope(body=fault))
            return
        if not isinstance(env.body, Call) or env.body.method != parts[1]:
            fault = Fault("Client.NoSuchMethod", f"expected a {parts[1]} call", "")
            self._envelope_reply(Envelope(body=fault))
            return
        try:
            if parts[1] == "publish":
                desc = parse_description(env.body.args[0])
                self.server.broker.publish(desc)
            else:
                self.server.broker.retract(env.body.args[0])
        except (InvalidDescription, EnvelopeError, IndexError, TypeError, ValueError) as e:
            fault = Fault("Client.BadArguments", type(e).__name__, str(e))
            self._envelope_reply(Envelope(body=fault))
            return
        self._envelope_reply(Envelope(body=Response(None)))

    def do_GET(self):  # noqa: N802
        url = urlparse(self.path)
        parts = [unquote(p) for p in url.path.split("/") if p]
        broker = self.server.broker
        if parts == ["health"]:
            self._send(200, b"ok")
            return
        if parts == ["registry", "find"]:
            patterns = parse_qs(url.query).get("name")
            if not patterns or not patterns[0]:
                self._send(400, b"missing name pattern")
                return
            self._send(200, encode_registry_document(broker.find(patterns[0])), XML)
            return
        if len(parts) == 3 and parts[0] == "registry" and parts[1] in ("bind", "describe"):
            try:
                body = broker.describe(parts[2])
            except NotFound:
                self._send(404, b"not registered")
                return
            self._send(200, body, XML)
            return
        self._send(404, b"not found")
