"""Operations CLI: run the broker and containers, deploy descriptors, invoke
methods ad hoc, seed fixture data, and drive a full verification.

Exit codes: 0 success, 1 domain refusal (fault, blocked verification,
outstanding dues), 2 usage, 3 transport failure. With ``--output xml`` the
raw response envelope bytes go to stdout, bit-comparable to the wire.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from urllib.parse import urlparse

from i3 import tracing
from i3.bridge import Bridge, value_to_json
from i3.broker import Broker
from i3.client import (
    BrokerClient,
    HttpGateway,
    TransportError,
    WireFault,
    http_request,
)
from i3.container import AuditLog, ServiceContainer
from i3.envelope import (
    Call,
    Envelope,
    Fault,
    Record,
    Response,
    Value,
    decode_envelope,
    encode_envelope,
)
from i3.httpio import BrokerServer, ContainerServer
from i3.records import SERVICE_EMIS, NoDuesStatus, from_value, standard_beans
from i3.runtime import RuntimeContext, build_factories
from i3.seed import ALL_TARGETS, seed_stores
from i3.wsdd import DeploymentDescriptor, parse_wsdd

CONFIG_FILE = "i3.toml"
ENV_BROKER = "I3_BROKER_URL"
ENV_DELAY = "I3_INJECT_DELAY_MS"

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2
EXIT_TRANSPORT = 3


class UsageError(Exception):
    pass


@dataclass
class BrokerCmd:
    port: int
    host: str = "127.0.0.1"
    snapshot: Path | None = None


@dataclass
class ServeCmd:
    port: int
    store_dir: Path
    broker_url: str | None = None
    wsdd: Path | None = None
    services: list[str] = field(default_factory=list)
    host: str = "127.0.0.1"
    advertise: str | None = None
    delay_ms: int = 0
    console_dir: Path | None = None
    timeout_ms: int = 2_000


@dataclass
class DeployCmd:
    wsdd: Path
    container_url: str


@dataclass
class UndeployCmd:
    wsdd: Path
    container_url: str


@dataclass
class CallCmd:
    broker_url: str
    service: str
    method: str
    args: list[Value]
    output: str = "text"
    timeout_ms: int = 2_000


@dataclass
class SeedCmd:
    fixture: Path
    store_dir: Path
    targets: tuple[str, ...] = ALL_TARGETS


@dataclass
class VerifyCmd:
    broker_url: str
    student: str
    output: str = "text"
    timeout_ms: int = 10_000


@dataclass
class IssueCmd:
    broker_url: str
    student: str
    programme: str
    output: str = "text"
    timeout_ms: int = 10_000


Command = (
    BrokerCmd | ServeCmd | DeployCmd | UndeployCmd | CallCmd | SeedCmd | VerifyCmd | IssueCmd
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def load_config(path: Path | None = None) -> dict[str, str]:
    """Optional ./i3.toml with flat key=value lines (broker_url, timeout_ms, store_dir)."""
    path = path or Path(CONFIG_FILE)
    if not path.exists():
        return {}
    config: dict[str, str] = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, _, value = line.partition("=")
        config[key.strip()] = value.strip().strip("\"'")
    return config


def parse_cli_arg(text: str) -> Value:
    """One call argument: ``kind:value`` with kinds s/i/b/d/r, or bare ``nil``."""
    if text == "nil":
        return None
    kind, sep, rest = text.partition(":")
    if not sep:
        raise UsageError(f"argument {text!r} is not kind:value (kinds: s i b d r, or nil)")
    if kind in ("s", "string"):
        return rest
    if kind in ("i", "int"):
        try:
            return int(rest)
        except ValueError:
            raise UsageError(f"not an integer: {rest!r}") from None
    if kind in ("b", "bool"):
        if rest in ("true", "false"):
            return rest == "true"
        raise UsageError(f"not a bool: {rest!r} (use true or false)")
    if kind in ("d", "date"):
        try:
            return date.fromisoformat(rest)
        except ValueError:
            raise UsageError(f"not a date: {rest!r} (use YYYY-MM-DD)") from None
    if kind in ("r", "record"):
        if rest.startswith("{"):
            raw = rest
        else:
            path = Path(rest)
            if not path.exists():
                raise UsageError(f"record file not found: {rest}")
            raw = path.read_text(encoding="utf-8")
        try:
            return _json_to_value(json.loads(raw))
        except (ValueError, KeyError) as e:
            raise UsageError(f"bad record JSON: {e}") from None
    raise UsageError(f"unknown argument kind {kind!r}")


def _json_to_value(obj) -> Value:
    if obj is None or isinstance(obj, (str, bool, int)):
        return obj
    if isinstance(obj, list):
        return [_json_to_value(x) for x in obj]
    if isinstance(obj, dict):
        if set(obj) != {"qname", "fields"}:
            raise ValueError('record objects need exactly "qname" and "fields"')
        return Record(
            qname=obj["qname"],
            fields={k: _json_to_value(v) for k, v in obj["fields"].items()},
        )
    raise ValueError(f"unsupported JSON value {obj!r}")


def _check_url(url: str, what: str) -> str:
    parsed = urlparse(url)
    if parsed.scheme not in ("http", "https") or not parsed.netloc:
        raise UsageError(f"{what} {url!r} is not an absolute http(s) URL")
    return url.rstrip("/")


def _check_path(value: str, what: str) -> Path:
    path = Path(value)
    if not path.exists():
        raise UsageError(f"{what} not found: {value}")
    return path


def _resolve_broker(flag_value: str | None, config: dict[str, str]) -> str:
    url = flag_value or os.environ.get(ENV_BROKER) or config.get("broker_url")
    if not url:
        raise UsageError(
            f"no broker URL: pass --broker, set {ENV_BROKER}, or put broker_url in {CONFIG_FILE}"
        )
    return _check_url(url, "broker URL")


def build_arg_parser() -> _Parser:
    parser = _Parser(prog="i3", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_broker = sub.add_parser("broker", help="run the service registry")
    p_broker.add_argument("--port", type=int, required=True)
    p_broker.add_argument("--host", default="127.0.0.1")
    p_broker.add_argument("--snapshot", help="registry snapshot file")

    p_serve = sub.add_parser("serve", help="run a service container")
    p_serve.add_argument("--port", type=int, required=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--store-dir", help="root directory for service stores")
    p_serve.add_argument("--broker", help="broker base URL to publish to")
    p_serve.add_argument("--wsdd", help="descriptor to deploy at startup")
    p_serve.add_argument("--services", help="comma-separated subset of descriptor services")
    p_serve.add_argument("--advertise", help="externally visible base URL")
    p_serve.add_argument("--delay-ms", type=int, default=None, help="inject per-request delay")
    p_serve.add_argument("--console-dir", help="static console assets to serve at /console")
    p_serve.add_argument("--timeout-ms", type=int, default=None)

    for name in ("deploy", "undeploy"):
        p = sub.add_parser(name, help=f"{name} services from a WSDD file")
        p.add_argument("--wsdd", required=True)
        p.add_argument("--container", required=True, help="container base URL")

    p_call = sub.add_parser("call", help="invoke one service method")
    p_call.add_argument("--service", required=True)
    p_call.add_argument("--method", required=True)
    p_call.add_argument("--arg", action="append", default=[], help="kind:value (s/i/b/d/r or nil)")
    p_call.add_argument("--broker", help="broker base URL")
    p_call.add_argument("--output", choices=("text", "xml"), default="text")
    p_call.add_argument("--timeout-ms", type=int, default=None)

    p_seed = sub.add_parser("seed", help="load fixture data into service stores")
    p_seed.add_argument("--fixture", required=True)
    p_seed.add_argument("--store-dir")
    p_seed.add_argument("--targets", help=f"comma-separated subset of {','.join(ALL_TARGETS)}")

    p_verify = sub.add_parser("verify", help="run a No-Dues verification")
    p_verify.add_argument("--student", required=True)
    p_verify.add_argument("--broker")
    p_verify.add_argument("--output", choices=("text", "xml"), default="text")
    p_verify.add_argument("--timeout-ms", type=int, default=None)

    p_issue = sub.add_parser("issue", help="issue a degree certificate")
    p_issue.add_argument("--student", required=True)
    p_issue.add_argument("--programme", required=True)
    p_issue.add_argument("--broker")
    p_issue.add_argument("--output", choices=("text", "xml"), default="text")
    p_issue.add_argument("--timeout-ms", type=int, default=None)

    return parser


def parse_args(argv: list[str], config: dict[str, str] | None = None) -> Command:
    config = load_config() if config is None else config
    ns = build_arg_parser().parse_args(argv)
    timeout_default = int(config.get("timeout_ms", "0")) or None

    if ns.command == "broker":
        return BrokerCmd(
            port=ns.port, host=ns.host, snapshot=Path(ns.snapshot) if ns.snapshot else None
        )
    if ns.command == "serve":
        store = ns.store_dir or config.get("store_dir")
        if not store:
            raise UsageError("serve needs --store-dir (or store_dir in the config file)")
        broker_url = ns.broker or os.environ.get(ENV_BROKER) or config.get("broker_url")
        if broker_url:
            broker_url = _check_url(broker_url, "broker URL")
        delay = ns.delay_ms if ns.delay_ms is not None else int(os.environ.get(ENV_DELAY, "0"))
        return ServeCmd(
            port=ns.port,
            host=ns.host,
            store_dir=Path(store),
            broker_url=broker_url,
            wsdd=_check_path(ns.wsdd, "WSDD file") if ns.wsdd else None,
            services=[s for s in (ns.services or "").split(",") if s],
            advertise=_check_url(ns.advertise, "advertise URL") if ns.advertise else None,
            delay_ms=delay,
            console_dir=_check_path(ns.console_dir, "console dir") if ns.console_dir else None,
            timeout_ms=ns.timeout_ms or timeout_default or 2_000,
        )
    if ns.command in ("deploy", "undeploy"):
        cls = DeployCmd if ns.command == "deploy" else UndeployCmd
        return cls(
            wsdd=_check_path(ns.wsdd, "WSDD file"),
            container_url=_check_url(ns.container, "container URL"),
        )
    if ns.command == "call":
        return CallCmd(
            broker_url=_resolve_broker(ns.broker, config),
            service=ns.service,
            method=ns.method,
            args=[parse_cli_arg(a) for a in ns.arg],
            output=ns.output,
            timeout_ms=ns.timeout_ms or timeout_default or 2_000,
        )
    if ns.command == "seed":
        store = ns.store_dir or config.get("store_dir")
        if not store:
            raise UsageError("seed needs --store-dir (or store_dir in the config file)")
        targets = tuple(t for t in (ns.targets or "").split(",") if t) or ALL_TARGETS
        unknown = set(targets) - set(ALL_TARGETS)
        if unknown:
            raise UsageError(f"unknown seed targets: {', '.join(sorted(unknown))}")
        return SeedCmd(
            fixture=_check_path(ns.fixture, "fixture dir"),
            store_dir=Path(store),
            targets=targets,
        )
    if ns.command == "verify":
        return VerifyCmd(
            broker_url=_resolve_broker(ns.broker, config),
            student=ns.student,
            output=ns.output,
            timeout_ms=ns.timeout_ms or timeout_default or 10_000,
        )
    if ns.command == "issue":
        return IssueCmd(
            broker_url=_resolve_broker(ns.broker, config),
            student=ns.student,
            programme=ns.programme,
            output=ns.output,
            timeout_ms=ns.timeout_ms or timeout_default or 10_000,
        )
    raise UsageError(f"unknown command {ns.command!r}")


# ---------------------------------------------------------------------------
# execution


def _wire_call(cmd_broker: str, service: str, method: str, args: list[Value], timeout_ms: int):
    """Bind through the broker, post the call, return (raw reply bytes, envelope)."""
    beans = standard_beans()
    endpoint = BrokerClient(cmd_broker, timeout_ms=timeout_ms).bind(service).endpoint
    env = Envelope(body=Call(service=service, method=method, args=args))
    _, body = http_request(
        endpoint, data=encode_envelope(env, beans), timeout_ms=timeout_ms
    )
    return body, decode_envelope(body, beans)


def _emit(raw: bytes, reply: Envelope, output: str, render) -> int:
    if output == "xml":
        sys.stdout.buffer.write(raw)
        sys.stdout.buffer.flush()
        return EXIT_OK if isinstance(reply.body, Response) else EXIT_DOMAIN
    if isinstance(reply.body, Fault):
        f = reply.body
        print(f"FAULT {f.code}: {f.reason}" + (f" ({f.detail})" if f.detail else ""))
        return EXIT_DOMAIN
    render(reply.body.result)
    return EXIT_OK


def run_broker(cmd: BrokerCmd) -> int:
    server = BrokerServer(Broker(snapshot_path=cmd.snapshot), host=cmd.host, port=cmd.port)
    print(f"broker listening on {server.base_url}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def run_serve(cmd: ServeCmd) -> int:
    tracing.install_from_env()
    cmd.store_dir.mkdir(parents=True, exist_ok=True)

    gateway = None
    broker_handle = None
    bridge = None
    if cmd.broker_url:
        gateway = HttpGateway(cmd.broker_url, standard_beans(), timeout_ms=cmd.timeout_ms)
        broker_handle = BrokerClient(cmd.broker_url, timeout_ms=cmd.timeout_ms)
        bridge = Bridge(gateway, broker_handle, timeout_ms=max(cmd.timeout_ms, 10_000))

    ctx = RuntimeContext(store_root=cmd.store_dir, gateway=gateway, timeout_ms=cmd.timeout_ms)
    container = ServiceContainer(
        factories=build_factories(ctx),
        broker=broker_handle,
        audit=AuditLog(path=cmd.store_dir / "audit.log"),
    )
    server = ContainerServer(
        container,
        host=cmd.host,
        port=cmd.port,
        delay_ms=cmd.delay_ms,
        bridge=bridge,
        console_dir=cmd.console_dir,
    )
    container.set_base_url(cmd.advertise or server.base_url)

    if cmd.wsdd:
        descriptor = parse_wsdd(cmd.wsdd.read_bytes())
        if not isinstance(descriptor, DeploymentDescriptor):
            raise UsageError("serve --wsdd needs a <deployment> descriptor")
        if cmd.services:
            known = {s.name for s in descriptor.services}
            missing = set(cmd.services) - known
            if missing:
                raise UsageError(f"services not in descriptor: {', '.join(sorted(missing))}")
            descriptor = DeploymentDescriptor(
                handlers=descriptor.handlers,
                services=[s for s in descriptor.services if s.name in cmd.services],
            )
        for svc in container.deploy(descriptor):
            print(f"deployed {svc.definition.name} at {svc.endpoint}", flush=True)

    print(f"container listening on {server.base_url}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def run_deploy(cmd: DeployCmd, undeploy: bool = False) -> int:
    op = "undeploy" if undeploy else "deploy"
    payload = cmd.wsdd.read_bytes()
    if undeploy:
        descriptor = parse_wsdd(payload)
        if isinstance(descriptor, DeploymentDescriptor):
            # Accept the original deployment file; undeploy its service names.
            from i3.wsdd import UndeploymentDescriptor, serialize_wsdd

            names = [s.name for s in descriptor.services]
            if not names:
                raise UsageError(f"{cmd.wsdd} names no services to undeploy")
            payload = serialize_wsdd(UndeploymentDescriptor(names))
    status, body = http_request(
        f"{cmd.container_url}/admin/{op}", data=payload, timeout_ms=30_000
    )
    print(body.decode("utf-8", "replace").rstrip())
    return EXIT_OK if status == 200 else EXIT_DOMAIN


def run_call(cmd: CallCmd) -> int:
    raw, reply = _wire_call(cmd.broker_url, cmd.service, cmd.method, cmd.args, cmd.timeout_ms)

    def render(result: Value) -> None:
        print(json.dumps(value_to_json(result), indent=2, sort_keys=True))

    return _emit(raw, reply, cmd.output, render)


def run_seed(cmd: SeedCmd) -> int:
    seeded = seed_stores(cmd.fixture, cmd.store_dir, cmd.targets)
    print(f"seeded {', '.join(seeded)} under {cmd.store_dir}")
    return EXIT_OK


def _print_status_table(status: NoDuesStatus) -> None:
    print(f"student    {status.student_id}")
    print(f"checked    {status.checked_at}")
    for s in status.statuses:
        detail = f"  {s.detail}" if s.detail else ""
        print(f"{s.provider:<10} {s.verdict:<8} {s.latency_ms:>5} ms{detail}")
    print(f"overall    {status.overall}")


def run_verify(cmd: VerifyCmd) -> int:
    raw, reply = _wire_call(
        cmd.broker_url, SERVICE_EMIS, "verifyNoDues", [cmd.student], cmd.timeout_ms
    )
    if cmd.output == "xml":
        sys.stdout.buffer.write(raw)
        sys.stdout.buffer.flush()
        if isinstance(reply.body, Response):
            return (
                EXIT_OK
                if from_value(reply.body.result, NoDuesStatus).overall == "Clear"
                else EXIT_DOMAIN
            )
        return EXIT_DOMAIN
    if isinstance(reply.body, Fault):
        f = reply.body
        print(f"FAULT {f.code}: {f.reason}" + (f" ({f.detail})" if f.detail else ""))
        return EXIT_DOMAIN
    status = from_value(reply.body.result, NoDuesStatus)
    _print_status_table(status)
    return EXIT_OK if status.overall == "Clear" else EXIT_DOMAIN


def run_issue(cmd: IssueCmd) -> int:
    raw, reply = _wire_call(
        cmd.broker_url,
        SERVICE_EMIS,
        "issueCertificate",
        [cmd.student, cmd.programme],
        cmd.timeout_ms,
    )

    def render(result: Value) -> None:
        cert = value_to_json(result)
        print(f"certificate {cert['serial']}")
        print(f"student     {cert['student_id']}")
        print(f"programme   {cert['programme_code']}")
        print(f"issued at   {cert['issued_at']}")

    return _emit(raw, reply, cmd.output, render)


def execute(cmd: Command) -> int:
    if isinstance(cmd, BrokerCmd):
        return run_broker(cmd)
    if isinstance(cmd, ServeCmd):
        return run_serve(cmd)
    if isinstance(cmd, DeployCmd):
        return run_deploy(cmd)
    if isinstance(cmd, UndeployCmd):
        return run_deploy(cmd, undeploy=True)
    if isinstance(cmd, CallCmd):
        return run_call(cmd)
    if isinstance(cmd, SeedCmd):
        return run_seed(cmd)
    if isinstance(cmd, VerifyCmd):
        return run_verify(cmd)
    if isinstance(cmd, IssueCmd):
        return run_issue(cmd)
    raise UsageError(f"unhandled command {cmd!r}")


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cmd = parse_args(argv)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    try:
        return execute(cmd)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except WireFault as e:
        print(f"FAULT {e.fault.code}: {e.fault.reason}", file=sys.stderr)
        return EXIT_DOMAIN
    except TransportError as e:
        print(f"transport failure: {e}", file=sys.stderr)
        return EXIT_TRANSPORT


if __name__ == "__main__":
    sys.exit(main())
