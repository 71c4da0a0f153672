import socket
import subprocess
import sys
import time
import urllib.request
from pathlib import Path
from types import SimpleNamespace

import pytest

from i3.broker import Broker
from i3.client import TransportError, WireFault
from i3.container import AuditLog, ServiceContainer
from i3.envelope import Call, Envelope, Fault, Response, decode_envelope, encode_envelope
from i3.records import standard_beans
from i3.runtime import RuntimeContext, build_factories
from i3.seed import seed_stores
from i3.wsdd import parse_wsdd

REPO = Path(__file__).parent.parent
FIXTURES = REPO / "fixtures"
SYSTEM_WSDD = FIXTURES / "wsdd" / "system.wsdd"
DEPARTMENTS_WSDD = FIXTURES / "wsdd" / "departments.wsdd"
DEMO_FIXTURE = FIXTURES / "uos-demo"


class InProcGateway:
    """Routes calls straight into a container, still through the wire codec.

    Per-service injected delays and a stopped set emulate slow or dead
    provider processes for orchestration tests.
    """

    def __init__(self, container: ServiceContainer):
        self.container = container
        self.mappings = standard_beans()
        self.delays_ms: dict[str, int] = {}
        self.stopped: set[str] = set()

    def call(self, service, method, args, timeout_ms=None):
        if service in self.stopped:
            raise TransportError("connection error", f"{service} is stopped")
        delay = self.delays_ms.get(service, 0)
        if delay:
            budget = timeout_ms or 2_000
            if delay > budget:
                time.sleep(budget / 1000.0)
                raise TransportError("timeout", f"{service} timed out")
            time.sleep(delay / 1000.0)
        env = Envelope(body=Call(service=service, method=method, args=args))
        _, out = self.container.handle_wire(encode_envelope(env, self.mappings))
        reply = decode_envelope(out, self.mappings)
        if isinstance(reply.body, Fault):
            raise WireFault(reply.body)
        assert isinstance(reply.body, Response)
        return reply.body.result


def build_world(store_root: Path, seed: bool = True, wsdd: Path = SYSTEM_WSDD) -> SimpleNamespace:
    """One container hosting every service over an in-process broker."""
    if seed:
        seed_stores(DEMO_FIXTURE, store_root)
    broker = Broker()
    ctx = RuntimeContext(store_root=store_root)
    container = ServiceContainer(
        factories=build_factories(ctx),
        broker=broker,
        base_url="http://127.0.0.1:7777",
        audit=AuditLog(),
    )
    gateway = InProcGateway(container)
    ctx.gateway = gateway
    deployed = container.deploy(parse_wsdd(wsdd.read_bytes()))
    return SimpleNamespace(
        broker=broker,
        container=container,
        gateway=gateway,
        store_root=store_root,
        deployed=deployed,
    )


@pytest.fixture
def world(tmp_path):
    return build_world(tmp_path / "stores")


def start_http_world(store_root: Path, seed: bool = True, delay_ms: int = 0) -> SimpleNamespace:
    """Broker and a full container served over real HTTP in daemon threads."""
    import threading

    from i3.bridge import Bridge
    from i3.client import BrokerClient, HttpGateway
    from i3.httpio import BrokerServer, ContainerServer

    if seed:
        seed_stores(DEMO_FIXTURE, store_root)
    broker_server = BrokerServer(Broker())
    threading.Thread(target=broker_server.serve_forever, daemon=True).start()
    broker_url = broker_server.base_url

    gateway = HttpGateway(broker_url, standard_beans())
    handle = BrokerClient(broker_url)
    ctx = RuntimeContext(store_root=store_root, gateway=gateway)
    container = ServiceContainer(factories=build_factories(ctx), broker=handle)
    server = ContainerServer(
        container, delay_ms=delay_ms, bridge=Bridge(gateway, handle)
    )
    container.set_base_url(server.base_url)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    container.deploy(parse_wsdd(SYSTEM_WSDD.read_bytes()))

    return SimpleNamespace(
        broker_url=broker_url,
        container_url=server.base_url,
        broker_server=broker_server,
        container_server=server,
        container=container,
        gateway=gateway,
        store_root=store_root,
    )


@pytest.fixture
def http_world(tmp_path):
    world = start_http_world(tmp_path / "stores")
    yield world
    world.container_server.shutdown()
    world.broker_server.shutdown()


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def wait_http(url: str, timeout_s: float = 10.0) -> None:
    deadline = time.monotonic() + timeout_s
    last = None
    while time.monotonic() < deadline:
        try:
            with urllib.request.urlopen(url, timeout=1.0):
                return
        except Exception as e:
            last = e
            time.sleep(0.05)
    raise RuntimeError(f"{url} did not come up: {last}")


class CliProcess:
    """A CLI subprocess (broker or serve) with health-checked startup."""

    def __init__(self, args: list[str], health_url: str, env: dict | None = None, cwd=None):
        import os

        full_env = dict(os.environ)
        if env:
            full_env.update(env)
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "i3.cli", *args],
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            env=full_env,
            cwd=cwd,
        )
        try:
            wait_http(health_url)
        except Exception:
            self.stop()
            out = self.output()
            raise RuntimeError(f"process failed to start: {' '.join(args)}\n{out}")

    def stop(self) -> None:
        if self.proc.poll() is None:
            self.proc.terminate()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait(timeout=5)

    def output(self) -> str:
        try:
            out, _ = self.proc.communicate(timeout=1)
            return (out or b"").decode(errors="replace")
        except Exception:
            return "<no output captured>"


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance" in rep.nodeid and rep.when == "call":
                name = rep.nodeid.split("::")[-1]
                lines.append(f"ACCEPTANCE {'PASS' if outcome == 'passed' else 'FAIL'}: {name}")
    if lines:
        terminalreporter.write_line("")
        for line in sorted(lines, key=lambda s: s.split(":")[-1]):
            terminalreporter.write_line(line)


def run_cli(args: list[str], env: dict | None = None, cwd=None, timeout=60):
    import os

    full_env = dict(os.environ)
    if env:
        full_env.update(env)
    return subprocess.run(
        [sys.executable, "-m", "i3.cli", *args],
        capture_output=True,
        text=True,
        env=full_env,
        cwd=cwd,
        timeout=timeout,
    )
