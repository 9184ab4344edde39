"""Backend selection for the hot kernels.

The compiled extension ``_ckernels`` is used when it imports cleanly;
otherwise the numpy reference in ``_pykernels`` is used. Setting the
environment variable ``UACESD_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import importlib
import os
from types import ModuleType

import numpy as np


def load_backend(name: str) -> ModuleType:
    """Import a kernel backend by name (``"cython"`` or ``"python"``)."""
    if name == "cython":
        return importlib.import_module("uacesd._ckernels")
    if name == "python":
        return importlib.import_module("uacesd._pykernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def _select() -> tuple[str, ModuleType]:
    if os.environ.get("UACESD_PURE_PYTHON", "").lower() not in ("1", "true", "yes"):
        try:
            return "cython", load_backend("cython")
        except ImportError:
            pass
    return "python", load_backend("python")


BACKEND, _impl = _select()


def discrete_posterior(Q, V, symbols, log_weights):
    Q = np.ascontiguousarray(Q, dtype=np.complex128)
    V = np.ascontiguousarray(V, dtype=np.float64)
    return _impl.discrete_posterior(
        Q, V, np.ascontiguousarray(symbols, dtype=np.complex128),
        np.ascontiguousarray(log_weights, dtype=np.float64))


def bg_posterior(Q, V, eps: float, nu: float, full: bool):
    Q = np.ascontiguousarray(Q, dtype=np.complex128)
    V = np.ascontiguousarray(V, dtype=np.float64)
    return _impl.bg_posterior(Q, V, float(eps), float(nu), bool(full))


def viterbi57(llr):
    return np.asarray(_impl.viterbi57(np.ascontiguousarray(llr, dtype=np.float64)),
                      dtype=np.int8)
