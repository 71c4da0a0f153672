"""Optional file-open tracing for store-isolation checks.

When I3_TRACE_OPENS names a file, every path this process opens is appended
to it (one per line), letting integration tests prove that no service
process touches another service's store.
"""

from __future__ import annotations

import os
import sys

_installed = False


def install_open_trace(trace_path: str) -> None:
    global _installed
    if _installed:
        return
    fd = os.open(trace_path, os.O_WRONLY | os.O_CREAT | os.O_APPEND, 0o644)

    def hook(event: str, args) -> None:
        if event != "open":
            return
        try:
            path = args[0]
            if isinstance(path, bytes):
                path = os.fsdecode(path)
            if isinstance(path, str):
                os.write(fd, (path + "\n").encode("utf-8", "replace"))
        except Exception:
            pass  # tracing must never break the service

    sys.addaudithook(hook)
    _installed = True


def install_from_env() -> None:
    path = os.environ.get("I3_TRACE_OPENS")
    if path:
        install_open_trace(path)
