"""Backend selection for the per-timeslot scheduling loop.

The compiled kernel is used when its extension module imported successfully;
otherwise the pure-Python fallback takes over.  Set ``AGESCHED_BACKEND=python``
(or ``compiled``) to force a backend, e.g. for the ``bench`` subcommand.
"""

from __future__ import annotations

import os

from . import _pykernel

try:
    from . import _kernel
except ImportError:  # pragma: no cover - depends on the build environment
    _kernel = None


def _select():
    forced = os.environ.get("AGESCHED_BACKEND", "").strip().lower()
    if forced == "python":
        return _pykernel, "python"
    if forced == "compiled":
        if _kernel is None:
            raise RuntimeError("compiled backend requested but not built")
        return _kernel, "compiled"
    if forced:
        raise RuntimeError(f"unknown AGESCHED_BACKEND {forced!r}")
    if _kernel is not None:
        return _kernel, "compiled"
    return _pykernel, "python"


_BACKEND, _BACKEND_NAME = _select()


def backend_name():
    return _BACKEND_NAME


def has_compiled_backend():
    return _kernel is not None


def simulate_policy(successes, arrivals, incidence, policy_code, eta, alpha, tie_u=None):
    """Dispatch one simulation run to the selected backend."""
    return _BACKEND.simulate_policy(
        successes, arrivals, incidence, policy_code, eta, alpha, tie_u
    )


def simulate_policy_with(backend, *args, **kwargs):
    """Run on an explicitly named backend ("python" or "compiled")."""
    if backend == "python":
        return _pykernel.simulate_policy(*args, **kwargs)
    if backend == "compiled":
        if _kernel is None:
            raise RuntimeError("compiled backend not built")
        return _kernel.simulate_policy(*args, **kwargs)
    raise ValueError(f"unknown backend {backend!r}")
