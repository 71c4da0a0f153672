"""Implementation registry: maps WSDD classNames to service factories.

A factory builds the implementation for one deployed service, giving each
implementation its own store directory under the process store root.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from i3.container import ImplFactory, ServiceImplementation
from i3.departments.amis import AdmissionService
from i3.departments.campus import CampusService
from i3.departments.hmis import HostelService
from i3.departments.lmis import LibraryService
from i3.emis import ExaminationService
from i3.wsdd import ServiceDef

IMPL_IDS = (
    "AdmissionDataBaseManager",
    "LibraryDataBaseManager",
    "HostelDataBaseManager",
    "CampusDataBaseManager",
    "ExaminationDataBaseManager",
)


@dataclass
class RuntimeContext:
    store_root: Path
    gateway: object | None = None  # used for calls to AMIS and the providers
    timeout_ms: int = 2_000


def store_dir_for(ctx: RuntimeContext, impl_id: str, sdef: ServiceDef) -> Path:
    if impl_id == "CampusDataBaseManager":
        code = sdef.extra_parameters.get("campusCode", "MAIN")
        return ctx.store_root / f"campus-{code.lower()}"
    return ctx.store_root / {
        "AdmissionDataBaseManager": "amis",
        "LibraryDataBaseManager": "lmis",
        "HostelDataBaseManager": "hmis",
        "ExaminationDataBaseManager": "emis",
    }[impl_id]


def build_factories(ctx: RuntimeContext) -> dict[str, ImplFactory]:
    def amis(sdef: ServiceDef) -> ServiceImplementation:
        return AdmissionService(store_dir_for(ctx, "AdmissionDataBaseManager", sdef)).implementation()

    def lmis(sdef: ServiceDef) -> ServiceImplementation:
        return LibraryService(
            store_dir_for(ctx, "LibraryDataBaseManager", sdef), amis=ctx.gateway
        ).implementation()

    def hmis(sdef: ServiceDef) -> ServiceImplementation:
        return HostelService(store_dir_for(ctx, "HostelDataBaseManager", sdef)).implementation()

    def campus(sdef: ServiceDef) -> ServiceImplementation:
        code = sdef.extra_parameters.get("campusCode", "MAIN")
        return CampusService(
            store_dir_for(ctx, "CampusDataBaseManager", sdef),
            amis=ctx.gateway,
            campus_code=code,
        ).implementation()

    def emis(sdef: ServiceDef) -> ServiceImplementation:
        return ExaminationService(
            store_dir_for(ctx, "ExaminationDataBaseManager", sdef),
            gateway=ctx.gateway,
            timeout_ms=ctx.timeout_ms,
        ).implementation()

    return {
        "AdmissionDataBaseManager": amis,
        "LibraryDataBaseManager": lmis,
        "HostelDataBaseManager": hmis,
        "CampusDataBaseManager": campus,
        "ExaminationDataBaseManager": emis,
    }
