"""UAMP-based matrix factorization for ``Y = H X + W``.

Beliefs are matrix-normal with diagonal covariances: ``X`` has a per-row
variance ``U_X`` (columns white), ``H`` has a per-column variance ``V_H``
(rows white). Each half-step whitens the Gram matrix of the other factor by
eigen-decomposition and runs one UAMP sweep on the resulting pseudo model.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import ContractError, DivergenceError
from .linalg import as_complex_matrix, sample_complex_gaussian, whitening_pair
from .uamp import VAR_FLOOR, relative_change

LAMBDA_MIN = 1e-12
LAMBDA_MAX = 1e12


@dataclass(frozen=True)
class MatrixNormalBelief:
    """``MN(mean, diag(row_cov), diag(col_cov))``."""

    mean: np.ndarray
    row_cov: np.ndarray
    col_cov: np.ndarray


@dataclass
class MfState:
    X_hat: np.ndarray          # N x L
    U_X: np.ndarray            # N, per-row variance of X
    Xi_X: np.ndarray           # N x L entry variances
    S_X: np.ndarray            # N x L Onsager memory
    H_hat: np.ndarray          # M x N
    V_H: np.ndarray            # N, per-column variance of H
    Xi_H: np.ndarray           # M x N entry variances
    S_H: np.ndarray            # N x M Onsager memory (H^H side)
    lambda_hat: float
    symbol_probs: np.ndarray | None = None

    @property
    def belief_X(self) -> MatrixNormalBelief:
        return MatrixNormalBelief(self.X_hat, self.U_X, np.ones(self.X_hat.shape[1]))

    @property
    def belief_H(self) -> MatrixNormalBelief:
        return MatrixNormalBelief(self.H_hat, np.ones(self.H_hat.shape[0]), self.V_H)

    @property
    def dims(self) -> tuple[int, int, int]:
        M, N = self.H_hat.shape
        return M, N, self.X_hat.shape[1]

    def copy(self) -> "MfState":
        return MfState(**{k: (v.copy() if isinstance(v, np.ndarray) else v)
                          for k, v in self.__dict__.items()})


def init_state(M: int, N: int, L: int, lambda_hat: float, h_init: str = "ones",
               rng: np.random.Generator | None = None) -> MfState:
    """Initial beliefs: ``U_H = I``, ``V_H = I``, unit variances, zero memories."""
    if h_init == "ones":
        H = np.ones((M, N), dtype=np.complex128)
    elif h_init == "random":
        if rng is None:
            raise ContractError("random initialization needs an rng")
        H = sample_complex_gaussian(M, N, 0.0, 1.0, rng)
    else:
        raise ContractError(f"unknown h_init {h_init!r}")
    return MfState(
        X_hat=np.zeros((N, L), dtype=np.complex128), U_X=np.ones(N), Xi_X=np.ones((N, L)),
        S_X=np.zeros((N, L), dtype=np.complex128), H_hat=H, V_H=np.ones(N),
        Xi_H=np.ones((M, N)), S_H=np.zeros((N, M), dtype=np.complex128),
        lambda_hat=float(lambda_hat))


def _check_dims(Y: np.ndarray, st: MfState):
    M, N, L = st.dims
    if Y.shape != (M, L):
        raise ContractError(f"Y has shape {Y.shape}, expected {(M, L)}")


def _finite(it: int, **arrays):
    for name, a in arrays.items():
        if not np.all(np.isfinite(a)):
            raise DivergenceError(it, name)


class Messages(NamedTuple):
    Q: np.ndarray
    V_Q: np.ndarray
    S: np.ndarray


def _uamp_half(R: np.ndarray, Phi: np.ndarray, mean: np.ndarray, Xi: np.ndarray,
               S: np.ndarray, lam: float, it: int) -> Messages:
    A2 = np.abs(Phi) ** 2
    V_P = A2 @ Xi
    P = Phi @ mean - V_P * S
    V_S = 1.0 / (V_P + 1.0 / lam)
    S_new = V_S * (R - P)
    V_Q = 1.0 / np.maximum(A2.T @ V_S, VAR_FLOOR)
    Q = mean + V_Q * (Phi.conj().T @ S_new)
    _finite(it, Q=Q, V_Q=V_Q, S=S_new)
    return Messages(Q, V_Q, S_new)


def x_messages(Y: np.ndarray, st: MfState, it: int = 0) -> Messages:
    """Whiten ``H^H H + M V_H`` and form ``(Q_X, V_QX)``."""
    M = st.H_hat.shape[0]
    Hh = st.H_hat.conj().T
    W = Hh @ st.H_hat + M * np.diag(st.V_H)
    Winv, Phi = whitening_pair(W)
    R = Winv @ (Hh @ Y)
    return _uamp_half(R, Phi, st.X_hat, st.Xi_X, st.S_X, st.lambda_hat, it)


def h_messages(Y: np.ndarray, st: MfState, it: int = 0) -> Messages:
    """Same half-step on ``H^H``; returns ``(Q_H, V_QH)`` of shape N x M."""
    L = st.X_hat.shape[1]
    W = st.X_hat @ st.X_hat.conj().T + L * np.diag(st.U_X)
    Winv, Phi = whitening_pair(W)
    R = Winv @ (st.X_hat @ Y.conj().T)
    return _uamp_half(R, Phi, st.H_hat.conj().T, st.Xi_H.T, st.S_H, st.lambda_hat, it)


def mf_x_step(Y, state: MfState, x_denoiser, it: int = 0) -> MfState:
    """X half-iteration: messages, denoiser, then per-row variance averaging."""
    Y = np.asarray(Y, dtype=np.complex128)
    _check_dims(Y, state)
    msg = x_messages(Y, state, it)
    out = x_denoiser.denoise(msg.Q, msg.V_Q)
    Xi = np.maximum(np.asarray(out.variance, dtype=np.float64), 0.0)
    new = replace(state, X_hat=out.mean, Xi_X=Xi, S_X=msg.S, U_X=Xi.mean(axis=1))
    if out.aux is not None and out.aux.ndim == 3:
        new.symbol_probs = out.aux
    return new


def mf_h_step(Y, state: MfState, h_denoiser, it: int = 0) -> MfState:
    """H half-iteration with an entry-wise prior on ``H``."""
    Y = np.asarray(Y, dtype=np.complex128)
    _check_dims(Y, state)
    msg = h_messages(Y, state, it)
    out = h_denoiser.denoise(msg.Q.conj().T, msg.V_Q.T)
    Xi = np.maximum(np.asarray(out.variance, dtype=np.float64), 0.0)
    return replace(state, H_hat=out.mean, Xi_H=Xi, S_H=msg.S, V_H=Xi.mean(axis=0))


class CTerms(NamedTuple):
    residual: float
    x_h_var: float
    x_var_h: float
    var_var: float

    @property
    def total(self) -> float:
        return self.residual + self.x_h_var + self.x_var_h + self.var_var


def noise_precision_terms(Y, state: MfState) -> CTerms:
    """The four terms of ``C`` with ``U_H = I_M`` and ``V_X = I_L``."""
    Y = np.asarray(Y, dtype=np.complex128)
    M, N, L = state.dims
    E = Y - state.H_hat @ state.X_hat
    residual = float(np.vdot(E, E).real)
    row_energy_x = np.sum(np.abs(state.X_hat) ** 2, axis=1)
    col_energy_h = np.sum(np.abs(state.H_hat) ** 2, axis=0)
    x_h_var = float(M * np.sum(row_energy_x * state.V_H))
    x_var_h = float(L * np.sum(state.U_X * col_energy_h))
    var_var = float(L * M * np.sum(state.U_X * state.V_H))
    return CTerms(residual, x_h_var, x_var_h, var_var)


def update_noise_precision(Y, state: MfState) -> float:
    """``lambda = M L / C``, clipped to ``[1e-12, 1e12]``."""
    M, N, L = state.dims
    C = noise_precision_terms(Y, state).total
    if not np.isfinite(C) or C < 0:
        raise DivergenceError(0, "noise-precision statistic C")
    if C == 0.0:
        return LAMBDA_MAX
    return float(np.clip(M * L / C, LAMBDA_MIN, LAMBDA_MAX))


@dataclass
class MfOptions:
    rank: int
    max_iters: int = 300
    tol: float = 1e-6
    h_init: str = "ones"
    lambda_init: float | None = None
    update_lambda: bool = True


class MfRun(NamedTuple):
    belief_X: MatrixNormalBelief
    belief_H: MatrixNormalBelief
    lambda_hat: float
    trace: list


def run_uamp_mf(Y, x_prior, h_prior, opts: MfOptions,
                rng: np.random.Generator | None = None) -> MfRun:
    """Alternate X-step, H-step and noise-precision update.

    Stops when the relative change of both means falls below ``opts.tol`` or
    after ``opts.max_iters`` cycles. The trace stores
    ``(change_X, change_H, lambda_hat)`` per cycle.
    """
    Y = as_complex_matrix(Y, "Y")
    M, L = Y.shape
    lam0 = opts.lambda_init
    if lam0 is None:
        var = float(np.var(Y))
        lam0 = 1.0 / var if var > 0 else LAMBDA_MAX
    st = init_state(M, opts.rank, L, lam0, opts.h_init, rng)
    trace = []
    for it in range(1, opts.max_iters + 1):
        X_old, H_old = st.X_hat, st.H_hat
        st = mf_x_step(Y, st, x_prior, it)
        st = mf_h_step(Y, st, h_prior, it)
        if opts.update_lambda:
            st.lambda_hat = update_noise_precision(Y, st)
        cx = relative_change(st.X_hat, X_old)
        ch = relative_change(st.H_hat, H_old)
        trace.append((cx, ch, st.lambda_hat))
        if max(cx, ch) < opts.tol:
            break
    return MfRun(st.belief_X, st.belief_H, st.lambda_hat, trace)
