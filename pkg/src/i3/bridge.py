"""JSON bridge for the web console: fronts the XML envelopes with JSON.

The console never parses envelopes; this bridge translates between JSON
requests and the broker/service wire calls, normalizing every failure to
``{"kind": ..., "message": ...}``.
"""

from __future__ import annotations

import json
from datetime import date

from i3.client import BrokerClient, HttpGateway, TransportError, WireFault
from i3.emis import probe_admissions, probe_hostel, probe_library
from i3.envelope import Record, Value
from i3.faults import InvalidRecord
from i3.records import (
    SERVICE_AMIS,
    SERVICE_EMIS,
    SERVICE_LMIS,
    StudentRecord,
    to_value,
    validate_student,
)

JSON_CT = "application/json; charset=utf-8"

_FAULT_STATUS = {
    "Client.BadArguments": 400,
    "Client.NoSuchMethod": 400,
    "Client.MethodNotAllowed": 403,
    "Server.NoSuchService": 502,
    "Server.Unavailable": 503,
    "Server.Internal": 502,
}


def value_to_json(v: Value):
    if isinstance(v, Record):
        return {name: value_to_json(x) for name, x in v.fields.items()}
    if isinstance(v, list):
        return [value_to_json(x) for x in v]
    if isinstance(v, date):
        return v.isoformat()
    return v


class Bridge:
    def __init__(self, gateway: HttpGateway, broker: BrokerClient, timeout_ms: int = 5_000):
        self.gateway = gateway
        self.broker = broker
        self.timeout_ms = timeout_ms

    # -- plumbing -----------------------------------------------------------

    def handle(self, method: str, path: str, query: dict, body: bytes):
        parts = [p for p in path.split("/") if p]
        assert parts and parts[0] == "bridge"
        parts = parts[1:]
        try:
            return self._route(method, parts, query, body)
        except WireFault as e:
            status = _FAULT_STATUS.get(e.fault.code, 502)
            kind = e.fault.reason or e.fault.code
            return self._error(status, kind, e.fault.detail or str(e))
        except TransportError as e:
            return self._error(504 if e.kind == "timeout" else 502, "transport", str(e))
        except (KeyError, IndexError, ValueError, InvalidRecord) as e:
            return self._error(400, "bad-request", str(e))

    def _route(self, method: str, parts: list[str], query: dict, body: bytes):
        if parts == ["students"] and method == "GET":
            return self._search(query.get("q", [""])[0])
        if parts == ["students"] and method == "POST":
            return self._register(json.loads(body or b"{}"))
        if len(parts) == 2 and parts[0] == "students" and method == "GET":
            return self._student(parts[1])
        if len(parts) == 3 and parts[0] == "students" and parts[2] == "enroll" and method == "POST":
            return self._enroll(parts[1])
        if len(parts) == 3 and parts[0] == "students" and parts[2] == "exams" and method == "GET":
            return self._exams(parts[1])
        if len(parts) == 2 and parts[0] == "verify" and method == "GET":
            return self._verify(parts[1])
        if len(parts) == 4 and parts[0] == "verify" and parts[2] == "provider" and method == "GET":
            return self._provider_row(parts[1], parts[3])
        if parts == ["issue"] and method == "POST":
            return self._issue(json.loads(body or b"{}"))
        if parts == ["registry"] and method == "GET":
            return self._registry()
        return self._error(404, "not-found", "no such bridge endpoint")

    @staticmethod
    def _ok(payload, status: int = 200):
        return status, JSON_CT, json.dumps(payload).encode("utf-8")

    @staticmethod
    def _error(status: int, kind: str, message: str):
        return status, JSON_CT, json.dumps({"kind": kind, "message": message}).encode("utf-8")

    # -- endpoints ----------------------------------------------------------

    def _search(self, q: str):
        hits = self.gateway.call(SERVICE_AMIS, "searchStudents", [q], timeout_ms=self.timeout_ms)
        return self._ok([value_to_json(h) for h in hits])

    def _student(self, student_id: str):
        rec = self.gateway.call(
            SERVICE_AMIS, "getStudent", [student_id], timeout_ms=self.timeout_ms
        )
        return self._ok(value_to_json(rec))

    def _register(self, form: dict):
        form = dict(form)
        form["graduation_batch_year"] = int(form.get("graduation_batch_year", 0))
        rec = StudentRecord(**form)
        validate_student(rec)
        new_id = self.gateway.call(
            SERVICE_AMIS, "registerStudent", [to_value(rec)], timeout_ms=self.timeout_ms
        )
        return self._ok({"id": new_id}, status=201)

    def _enroll(self, student_id: str):
        self.gateway.call(SERVICE_LMIS, "enrollMember", [student_id], timeout_ms=self.timeout_ms)
        return self._ok({"ok": True})

    def _exams(self, student_id: str):
        rows = self.gateway.call(
            SERVICE_EMIS, "getResults", [student_id], timeout_ms=self.timeout_ms
        )
        return self._ok([value_to_json(r) for r in rows])

    def _verify(self, student_id: str):
        status = self.gateway.call(
            SERVICE_EMIS, "verifyNoDues", [student_id], timeout_ms=self.timeout_ms
        )
        return self._ok(value_to_json(status))

    def _provider_row(self, student_id: str, provider: str):
        probes = {
            "Admissions": probe_admissions,
            "Library": probe_library,
            "Hostel": probe_hostel,
        }
        probe = probes.get(provider)
        if probe is None:
            return self._error(404, "not-found", f"unknown provider {provider!r}")
        row = probe(self.gateway, student_id, self.timeout_ms)
        return self._ok(value_to_json(to_value(row)))

    def _issue(self, form: dict):
        cert = self.gateway.call(
            SERVICE_EMIS,
            "issueCertificate",
            [str(form["student"]), str(form["programme"])],
            timeout_ms=self.timeout_ms,
        )
        return self._ok(value_to_json(cert), status=201)

    def _registry(self):
        descs = self.broker.find("*")
        return self._ok(
            [
                {
                    "name": d.name,
                    "endpoint": d.endpoint,
                    "methods": [m.name for m in d.methods],
                    "published_at": d.published_at.isoformat() if d.published_at else None,
                }
                for d in descs
            ]
        )
