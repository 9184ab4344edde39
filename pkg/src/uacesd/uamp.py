"""Unitary approximate message passing for ``r = Phi x + w``.

The observation is unitarily transformed with the left singular vectors of
the measurement matrix, after which a vector step-size AMP (``v1``) or its
averaged, cheaper variant (``v2``) is run. Matrix-valued unknowns are
handled column by column: every column has its own ``tau_x`` in ``v2`` and
its own variance column in ``v1``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

from .errors import ContractError, DivergenceError
from .linalg import as_complex_matrix, svd

VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class UnitaryTransformedModel:
    """``R = Phi x + omega`` with ``lambda_vec`` the squared singular values."""

    R: np.ndarray
    Phi: np.ndarray
    lambda_vec: np.ndarray
    beta: float

    def __post_init__(self):
        if self.Phi.shape[0] != self.R.shape[0] or self.lambda_vec.shape[0] != self.R.shape[0]:
            raise ContractError("model dimensions are inconsistent")
        if self.beta <= 0:
            raise ContractError("beta must be positive")

    @property
    def n(self) -> int:
        return self.Phi.shape[1]


@dataclass
class UampState:
    x_hat: np.ndarray
    tau_x: np.ndarray
    s: np.ndarray
    iteration: int = 0


def _as_columns(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.complex128)
    return y[:, None] if y.ndim == 1 else y


def build_unitary_model(A, y, beta: float) -> UnitaryTransformedModel:
    """Apply ``U^H`` from the SVD ``A = U Lambda V^H`` to ``y = A x + w``."""
    A = as_complex_matrix(A, "A")
    Y = _as_columns(y)
    if Y.shape[0] != A.shape[0]:
        raise ContractError("A and y must have the same number of rows")
    dec = svd(A)
    Uh = dec.U.conj().T
    lam = np.zeros(A.shape[0])
    lam[: dec.S.size] = dec.S ** 2
    return UnitaryTransformedModel(R=Uh @ Y, Phi=Uh @ A, lambda_vec=lam, beta=float(beta))


def plain_amp_model(A, y, beta: float) -> UnitaryTransformedModel:
    """Untransformed model (``Phi = A``, ``R = y``); with ``v1`` this is plain AMP."""
    A = as_complex_matrix(A, "A")
    Y = _as_columns(y)
    lam = np.sum(np.abs(A) ** 2, axis=1)
    return UnitaryTransformedModel(R=Y, Phi=A, lambda_vec=lam, beta=float(beta))


def init_state(model: UnitaryTransformedModel, variant: str = "v2",
               tau_x0: float = 1.0) -> UampState:
    cols = model.R.shape[1]
    n = model.n
    tau = np.full(cols, tau_x0) if variant == "v2" else np.full((n, cols), tau_x0)
    return UampState(x_hat=np.zeros((n, cols), dtype=np.complex128), tau_x=tau,
                     s=np.zeros_like(model.R), iteration=0)


def _check_finite(it: int, **arrays):
    for name, a in arrays.items():
        if not np.all(np.isfinite(a)):
            raise DivergenceError(it, name)


def uamp_iterate(model: UnitaryTransformedModel, state: UampState, denoiser,
                 variant: str = "v2", damping: float = 1.0) -> UampState:
    """One UAMP iteration.

    ``denoiser`` is a prior object with ``denoise`` and ``derivative``
    methods (see ``uacesd.denoisers``).
    """
    if variant not in ("v1", "v2"):
        raise ContractError(f"unknown variant {variant!r}")
    Phi, R, lam = model.Phi, model.R, model.lambda_vec
    n = model.n
    it = state.iteration + 1
    if variant == "v1":
        A2 = np.abs(Phi) ** 2
        tau_p = A2 @ state.tau_x
    else:
        tau_p = lam[:, None] * state.tau_x[None, :]
    p = Phi @ state.x_hat - tau_p * state.s
    tau_s = 1.0 / (tau_p + 1.0 / model.beta)
    s = tau_s * (R - p)
    if variant == "v1":
        tau_q = 1.0 / np.maximum(A2.T @ tau_s, VAR_FLOOR)
    else:
        prec = np.maximum(lam @ tau_s / n, VAR_FLOOR)
        tau_q = np.broadcast_to(1.0 / prec, state.x_hat.shape)
    tau_q = np.maximum(tau_q, VAR_FLOOR)
    q = state.x_hat + tau_q * (Phi.conj().T @ s)
    _check_finite(it, p=p, s=s, q=q, tau_q=tau_q)
    out = denoiser.denoise(q, tau_q)
    var = np.maximum(np.asarray(denoiser.derivative(q, tau_q), dtype=np.float64), VAR_FLOOR)
    tau_new = var if variant == "v1" else var.mean(axis=0)
    x_new = out.mean
    if damping != 1.0:
        x_new = damping * x_new + (1.0 - damping) * state.x_hat
        tau_new = damping * tau_new + (1.0 - damping) * state.tau_x
    _check_finite(it, x_hat=x_new, tau_x=tau_new)
    return UampState(x_hat=x_new, tau_x=tau_new, s=s, iteration=it)


class UampRun(NamedTuple):
    x_hat: np.ndarray
    tau_x: np.ndarray
    trace: list


def relative_change(new: np.ndarray, old: np.ndarray) -> float:
    """``||new - old||_F / ||old||_F``; zero when both vanish."""
    diff = float(np.linalg.norm(new - old))
    ref = float(np.linalg.norm(old))
    if ref == 0.0:
        return 0.0 if diff == 0.0 else float("inf")
    return diff / ref


def run_uamp(model: UnitaryTransformedModel, denoiser, variant: str = "v2",
             max_iters: int = 200, tol: float = 1e-8, damping: float = 1.0,
             state: UampState | None = None,
             callback: Callable[[UampState], None] | None = None) -> UampRun:
    """Iterate until the relative change of ``x_hat`` drops below ``tol``.

    ``tol = inf`` runs exactly one iteration. The trace holds the relative
    change after every iteration.
    """
    if max_iters < 1:
        raise ContractError("max_iters must be at least 1")
    if not tol > 0:
        raise ContractError("tol must be positive")
    state = state if state is not None else init_state(model, variant)
    trace: list[float] = []
    for _ in range(max_iters):
        new = uamp_iterate(model, state, denoiser, variant, damping)
        res = relative_change(new.x_hat, state.x_hat)
        trace.append(res)
        state = new
        if callback is not None:
            callback(state)
        if res < tol or np.isinf(tol):
            break
    return UampRun(x_hat=state.x_hat, tau_x=state.tau_x, trace=trace)


def with_beta(model: UnitaryTransformedModel, beta: float) -> UnitaryTransformedModel:
    return replace(model, beta=float(beta))
