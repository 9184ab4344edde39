"""Blind joint activity detection, channel estimation and signal detection.

The receiver factorizes ``Y = F G X + W`` with ``F`` a known partial DFT,
``G`` sparse (Bernoulli-Gaussian) and ``X`` drawn from a finite alphabet.
Each outer iteration runs

1. the X half-step of UAMP-MF followed by the discrete denoiser,
2. the H message of UAMP-MF,
3. a UAMPv2 sweep on the pseudo model ``Q_H = F G + W_H`` (the G-step)
   with the Bernoulli-Gaussian posterior and an EM sparsity update,
4. the Gaussian combination of the G-step output back into ``H``,
5. the noise-precision update,

and estimates the number of active users from the singular values of
``H_hat`` until an estimate is accepted. The genie-aided baselines
(known user count, pilot-based channel estimation, known channel) reuse the
same building blocks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .denoisers import (BernoulliGaussianPrior, DiscreteAlphabetPrior, em_update_sparsity)
from .errors import ContractError, DecompositionError, DivergenceError
from .linalg import as_complex_matrix, singular_values, svd
from .uamp import relative_change
from . import uamp_mf as mf

log = logging.getLogger(__name__)

MODES = ("blind-uacesd", "blind-cesd", "cesd", "sd")
EXACT_FIT = 1e-10


# ---------------------------------------------------------------------------
# Beamspace operator and G-step
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BeamspaceOperator:
    """SVD-derived quantities of the beamspace dictionary ``F`` (M x K)."""

    F: np.ndarray
    U_F: np.ndarray
    S_F: np.ndarray
    V_F: np.ndarray
    Phi_G: np.ndarray
    lambda_F: np.ndarray

    @classmethod
    def from_matrix(cls, F) -> "BeamspaceOperator":
        F = as_complex_matrix(F, "F")
        M, K = F.shape
        if K <= M:
            raise ContractError("beamspace dictionary needs K > M")
        dec = svd(F)
        lam = np.zeros(M)
        lam[: dec.S.size] = dec.S ** 2
        return cls(F=F, U_F=dec.U, S_F=dec.S, V_F=dec.V, Phi_G=dec.U.conj().T @ F,
                   lambda_F=lam)

    @property
    def M(self) -> int:
        return self.F.shape[0]

    @property
    def K(self) -> int:
        return self.F.shape[1]

    @property
    def abs2_U(self) -> np.ndarray:
        return np.abs(self.U_F) ** 2


@dataclass
class GStepState:
    """G-step beliefs and the pseudo-model quantities needed to rebuild H.

    ``V_G`` holds one variance per column (the column-constant matrix is
    ``1_K V_G^T``).
    """

    G_hat: np.ndarray
    V_G: np.ndarray
    S_G: np.ndarray
    tau: float
    pi: np.ndarray
    epsilon: float
    R_G: np.ndarray | None = None
    P_G: np.ndarray | None = None
    V_PG: np.ndarray | None = None

    @property
    def V_G_matrix(self) -> np.ndarray:
        return np.broadcast_to(self.V_G[None, :], self.G_hat.shape)

    def keep_columns(self, keep: np.ndarray) -> "GStepState":
        sl = (lambda a: None if a is None else a[:, keep].copy())
        return GStepState(G_hat=self.G_hat[:, keep].copy(), V_G=self.V_G[keep].copy(),
                          S_G=np.zeros((self.S_G.shape[0], keep.size), dtype=np.complex128),
                          tau=self.tau, pi=self.pi[:, keep].copy(), epsilon=self.epsilon,
                          R_G=sl(self.R_G), P_G=sl(self.P_G), V_PG=sl(self.V_PG))


def init_g_state(op: BeamspaceOperator, N: int, epsilon: float) -> GStepState:
    """``G_hat = 0``, ``V_G = 1``, ``S_G = 0``."""
    return GStepState(G_hat=np.zeros((op.K, N), dtype=np.complex128), V_G=np.ones(N),
                      S_G=np.zeros((op.M, N), dtype=np.complex128), tau=1.0,
                      pi=np.full((op.K, N), epsilon), epsilon=float(epsilon))


def g_step(Q_H, V_QH, op: BeamspaceOperator, state: GStepState,
           bg_prior: BernoulliGaussianPrior, update_epsilon: bool = True,
           variance_floor: float = 1e-12) -> GStepState:
    """UAMPv2 sweep on ``Q_H = F G + W_H`` followed by the BG posterior.

    ``Q_H`` and ``V_QH`` are M x N (the H-side message in the orientation of
    ``H``). The model noise is homogenized to the average precision ``tau``.
    """
    Q_H = np.asarray(Q_H, dtype=np.complex128)
    V_QH = np.asarray(V_QH, dtype=np.float64)
    M, K = op.M, op.K
    if Q_H.shape[0] != M or Q_H.shape != V_QH.shape or Q_H.shape[1] != state.G_hat.shape[1]:
        raise ContractError("g_step dimension mismatch")
    R_G = op.U_F.conj().T @ Q_H
    tau = float(np.mean(1.0 / V_QH))
    V_PG = op.lambda_F[:, None] * state.V_G[None, :]
    P_G = op.Phi_G @ state.G_hat - V_PG * state.S_G
    V_SG = 1.0 / (V_PG + 1.0 / tau)
    S_G = V_SG * (R_G - P_G)
    prec_q = np.sum(op.lambda_F[:, None] * V_SG, axis=0) / K
    V_QG = np.broadcast_to(1.0 / np.maximum(prec_q, variance_floor)[None, :], state.G_hat.shape)
    Q_G = state.G_hat + V_QG * (op.Phi_G.conj().T @ S_G)
    for name, a in (("R_G", R_G), ("S_G", S_G), ("Q_G", Q_G)):
        if not np.all(np.isfinite(a)):
            raise DivergenceError(0, name)
    post = bg_prior.denoise(Q_G, V_QG)
    V_G = np.maximum(post.variance.mean(axis=0), variance_floor)
    eps = em_update_sparsity(post.aux) if update_epsilon else bg_prior.epsilon
    return GStepState(G_hat=post.mean, V_G=V_G, S_G=S_G, tau=tau, pi=post.aux,
                      epsilon=eps, R_G=R_G, P_G=P_G, V_PG=V_PG)


def combine_h_posterior(op: BeamspaceOperator, state: GStepState, tau: float | None = None):
    """Gaussian posterior of ``H`` from the pseudo observation and the G-step.

    ``Xi_H = |U_F|^2 (1/(tau + 1/V_PG))`` and
    ``H_hat = U_F ((1/(tau + 1/V_PG)) * (R_G tau + P_G / V_PG))``,
    written as ``U_F ((R_G tau V_PG + P_G) / (tau V_PG + 1))`` so that a zero
    ``V_PG`` stays finite. Returns ``(H_hat, Xi_H, V_H)`` with ``V_H`` the
    column means of ``Xi_H``.
    """
    if state.R_G is None:
        raise ContractError("combine_h_posterior needs a state produced by g_step")
    tau = state.tau if tau is None else float(tau)
    V_PG = state.V_PG
    denom = tau * V_PG + 1.0
    post_var = V_PG / denom
    Xi_H = op.abs2_U @ post_var
    H_hat = op.U_F @ ((state.R_G * tau * V_PG + state.P_G) / denom)
    return H_hat, Xi_H, Xi_H.mean(axis=0)


# ---------------------------------------------------------------------------
# Rank estimation and pruning
# ---------------------------------------------------------------------------

def estimate_active_count(H_hat, current_N: int | None = None,
                          sv_floor: float = 0.0) -> tuple[bool, int]:
    """Largest-gap estimate of the number of active columns of ``H_hat``.

    With sorted singular values ``s``, ``R_n = s_n / s_{n+1}`` for
    ``n = 1..current_N-1`` and ``N_hat = argmax R_n`` (first maximum). The
    candidate is accepted iff ``R_{N_hat} > (1/(N_hat - 2)) sum_{i != N_hat} R_i``.
    Candidates with ``N_hat <= 2`` leave that average undefined and are
    rejected. ``sv_floor`` (relative to the largest singular value) bounds the
    ratios of collapsed columns; zero reproduces the bare formula.
    """
    if isinstance(H_hat, np.ndarray) and H_hat.ndim == 1:
        s = np.sort(np.asarray(H_hat, dtype=np.float64))[::-1]
    else:
        s = singular_values(H_hat)
    n = s.size if current_N is None else min(int(current_N), s.size)
    if n < 4:
        return False, n
    s = s[:n]
    if sv_floor > 0:
        s = np.maximum(s, sv_floor * s[0])
    tiny = np.finfo(float).tiny
    R = s[:-1] / np.maximum(s[1:], tiny)
    k = int(np.argmax(R))
    n_hat = k + 1
    if n_hat <= 2:
        return False, n_hat
    r_bar = (R.sum() - R[k]) / (n_hat - 2)
    return bool(R[k] > r_bar), n_hat


def prune_to_rank(st: mf.MfState, gs: GStepState | None, n_hat: int):
    """Keep the ``n_hat`` columns of ``H_hat`` with the largest norms.

    Rows of the X beliefs and columns of the G beliefs are sliced
    consistently; all Onsager memories are reset. ``n_hat >= N`` leaves the
    beliefs untouched.
    """
    N = st.H_hat.shape[1]
    if n_hat >= N:
        return st, gs, np.arange(N)
    if n_hat < 1:
        raise ContractError(f"cannot prune {N} columns to {n_hat}")
    norms = np.linalg.norm(st.H_hat, axis=0)
    keep = np.sort(np.argsort(-norms, kind="stable")[:n_hat])
    M, L = st.H_hat.shape[0], st.X_hat.shape[1]
    new = mf.MfState(
        X_hat=st.X_hat[keep].copy(), U_X=st.U_X[keep].copy(), Xi_X=st.Xi_X[keep].copy(),
        S_X=np.zeros((n_hat, L), dtype=np.complex128), H_hat=st.H_hat[:, keep].copy(),
        V_H=st.V_H[keep].copy(), Xi_H=st.Xi_H[:, keep].copy(),
        S_H=np.zeros((n_hat, M), dtype=np.complex128), lambda_hat=st.lambda_hat,
        symbol_probs=None if st.symbol_probs is None else st.symbol_probs[keep].copy())
    return new, (None if gs is None else gs.keep_columns(keep)), keep


# ---------------------------------------------------------------------------
# Receiver driver
# ---------------------------------------------------------------------------

@dataclass
class ReceiverOptions:
    """Algorithm settings.

    ``warmup`` iterations run with the initial noise precision and sparsity
    rate held fixed. ``lambda_init_scale`` sets the initial precision to
    ``scale / var(Y)``. ``phase_snap`` realigns streams whose soft symbols sit
    at a common rotation away from the constellation. When the final fit
    leaves a structured residual (largest residual singular value more than
    ``restart_rho`` times the Marchenko-Pastur edge) the receiver restarts
    from a fresh random initialization, up to ``restarts`` times, and keeps
    the best fit.
    """

    n_max: int = 30
    known_n: int | None = None
    max_iters: int = 300
    tol: float = 1e-6
    damping: float = 1.0
    epsilon_init: float = 0.1
    nu: float = 1.0
    full_variance: bool = False
    variance_floor: float = 1e-12
    lambda_init_scale: float = 10.0
    warmup: int = 10
    rank_start: int = 1
    sv_floor: float = 1e-2
    phase_snap: bool = True
    snap_min_angle: float = 0.2
    snap_min_coherence: float = 0.3
    restarts: int = 3
    restart_rho: float = 1.5
    h_init: str = "random"


@dataclass
class ReceiverOutput:
    X_hat: np.ndarray
    symbol_posteriors: np.ndarray | None
    H_hat: np.ndarray
    G_hat: np.ndarray
    N_hat: int
    lambda_hat: float
    epsilon_hat: float
    iterations: int
    diverged: bool
    Xi_H: np.ndarray | None = None
    V_H: np.ndarray | None = None
    residual_rho: float = float("nan")
    attempts: int = 1
    trace: list = field(default_factory=list)


def residual_rho(Y: np.ndarray, H_hat: np.ndarray, X_hat: np.ndarray) -> float:
    """Top residual singular value squared over its white-noise edge.

    A residual below ``EXACT_FIT`` of the observed energy counts as a
    perfect fit and scores zero.
    """
    E = Y - H_hat @ X_hat
    M, L = E.shape
    energy = float(np.vdot(E, E).real)
    if energy <= EXACT_FIT * float(np.vdot(Y, Y).real):
        return 0.0
    top = float(singular_values(E)[0]) ** 2
    return top / (energy / (M * L) * (np.sqrt(M) + np.sqrt(L)) ** 2)


def _phase_snap(Q: np.ndarray, st: mf.MfState, gs: GStepState, opts: ReceiverOptions,
                order: int = 4) -> bool:
    """Rotate streams whose soft symbols share a constellation offset.

    For an M-PSK alphabet the ``order``-th power of every symbol is the same
    point, so the angle of ``-sum(q**4)`` measures a common rotation of the
    row. Rotating the row of X by ``e^{-j phi}`` and the column of H (and G)
    by ``e^{+j phi}`` leaves ``H X`` unchanged.
    """
    z = -np.sum(Q ** order, axis=1)
    mag = np.sum(np.abs(Q) ** order, axis=1)
    phi = np.angle(z) / order
    coh = np.abs(z) / np.maximum(mag, np.finfo(float).tiny)
    rows = (np.abs(phi) > opts.snap_min_angle) & (coh > opts.snap_min_coherence)
    if not rows.any():
        return False
    rot = np.where(rows, np.exp(-1j * phi), 1.0)
    Q *= rot[:, None]
    st.X_hat = st.X_hat * rot[:, None]
    back = np.conj(rot)[None, :]
    st.H_hat = st.H_hat * back
    gs.G_hat = gs.G_hat * back
    gs.S_G = gs.S_G * back
    st.S_X = np.zeros_like(st.S_X)
    st.S_H = np.zeros_like(st.S_H)
    return True


def _blind_attempt(Y: np.ndarray, op: BeamspaceOperator, x_prior: DiscreteAlphabetPrior,
                   opts: ReceiverOptions, rng: np.random.Generator) -> ReceiverOutput:
    M, L = Y.shape
    known = opts.known_n is not None
    N = int(opts.known_n) if known else int(opts.n_max)
    var_y = float(np.var(Y))
    lam0 = opts.lambda_init_scale / var_y if var_y > 0 else mf.LAMBDA_MAX
    st = mf.init_state(M, N, L, lam0, opts.h_init, rng)
    gs = init_g_state(op, N, opts.epsilon_init)
    eps = float(opts.epsilon_init)
    accepted = known
    trace: list = []
    it = 0
    try:
        for it in range(1, opts.max_iters + 1):
            warm = it <= opts.warmup
            H_old, X_old = st.H_hat, st.X_hat
            # X-step with the discrete denoiser
            msg = mf.x_messages(Y, st, it)
            Q_X = msg.Q.copy()
            st.S_X = msg.S
            if opts.phase_snap and not warm:
                _phase_snap(Q_X, st, gs, opts)
            out = x_prior.denoise(Q_X, msg.V_Q)
            d = opts.damping
            X_new = out.mean if d == 1.0 else d * out.mean + (1 - d) * st.X_hat
            Xi_new = out.variance if d == 1.0 else d * out.variance + (1 - d) * st.Xi_X
            st.X_hat, st.Xi_X, st.U_X = X_new, Xi_new, Xi_new.mean(axis=1)
            st.symbol_probs = out.aux
            # H message, G-step and the H posterior
            hm = mf.h_messages(Y, st, it)
            st.S_H = hm.S
            prior = BernoulliGaussianPrior(eps, opts.nu, opts.full_variance)
            gs = g_step(hm.Q.conj().T, hm.V_Q.T, op, gs, prior,
                        update_epsilon=not warm, variance_floor=opts.variance_floor)
            eps = gs.epsilon
            st.H_hat, st.Xi_H, st.V_H = combine_h_posterior(op, gs)
            if not warm:
                st.lambda_hat = mf.update_noise_precision(Y, st)
            if not np.isfinite(st.lambda_hat):
                raise DivergenceError(it, "lambda_hat")
            if not accepted and it >= opts.rank_start and st.H_hat.shape[1] >= 4:
                ok, n_hat = estimate_active_count(st.H_hat, st.H_hat.shape[1], opts.sv_floor)
                if ok:
                    accepted = True
                    if n_hat < st.H_hat.shape[1]:
                        st, gs, _ = prune_to_rank(st, gs, n_hat)
                        trace.append((it, float("nan"), float("nan"), st.lambda_hat, eps))
                        continue
            cx = relative_change(st.X_hat, X_old)
            ch = relative_change(st.H_hat, H_old)
            trace.append((it, cx, ch, st.lambda_hat, eps))
            if not warm and max(cx, ch) < opts.tol:
                break
        diverged = False
    except (DivergenceError, DecompositionError) as exc:
        log.debug("receiver diverged: %s", exc)
        diverged = True
    return ReceiverOutput(
        X_hat=st.X_hat, symbol_posteriors=st.symbol_probs, H_hat=st.H_hat, G_hat=gs.G_hat,
        N_hat=st.H_hat.shape[1], lambda_hat=st.lambda_hat, epsilon_hat=eps, iterations=it,
        diverged=diverged, Xi_H=st.Xi_H, V_H=st.V_H, trace=trace)


def _finite_output(o: ReceiverOutput) -> bool:
    return bool(np.all(np.isfinite(o.X_hat)) and np.all(np.isfinite(o.H_hat)))


def run_blind_uacesd(Y, F, x_prior: DiscreteAlphabetPrior | None = None,
                     opts: ReceiverOptions | None = None,
                     rng: np.random.Generator | int | None = None) -> ReceiverOutput:
    """Blind receiver with user-count estimation (or a fixed count via ``known_n``).

    ``F`` may be a matrix or a prepared ``BeamspaceOperator``. Randomness
    (the initial ``H_hat`` of every attempt) comes only from ``rng``.
    """
    Y = as_complex_matrix(Y, "Y")
    op = F if isinstance(F, BeamspaceOperator) else BeamspaceOperator.from_matrix(F)
    if op.M != Y.shape[0]:
        raise ContractError("F and Y disagree on the number of antennas")
    x_prior = x_prior or DiscreteAlphabetPrior.qpsk()
    opts = opts or ReceiverOptions()
    n_cap = min(op.M, Y.shape[1]) - 1 if opts.known_n is None else min(op.M, Y.shape[1])
    if opts.known_n is None:
        opts = replace(opts, n_max=max(1, min(opts.n_max, n_cap)))
    elif not 1 <= opts.known_n <= n_cap:
        raise ContractError("known_n out of range")
    seed_seq = _seed_sequence(rng)
    best: ReceiverOutput | None = None
    for attempt in range(opts.restarts + 1):
        gen = np.random.default_rng(seed_seq.spawn(1)[0])
        out = _blind_attempt(Y, op, x_prior, opts, gen)
        out.attempts = attempt + 1
        out.residual_rho = residual_rho(Y, out.H_hat, out.X_hat) if _finite_output(out) else float("inf")
        if best is None or _better(out, best):
            best = out
        if not out.diverged and out.residual_rho < opts.restart_rho:
            break
    best.attempts = attempt + 1
    return best


def _better(a: ReceiverOutput, b: ReceiverOutput) -> bool:
    if a.diverged != b.diverged:
        return not a.diverged
    return a.residual_rho < b.residual_rho


def _seed_sequence(rng) -> np.random.SeedSequence:
    if isinstance(rng, np.random.SeedSequence):
        return rng
    if isinstance(rng, np.random.Generator):
        return np.random.SeedSequence(int(rng.integers(0, 2 ** 63)))
    return np.random.SeedSequence(rng)


# ---------------------------------------------------------------------------
# Genie-aided baselines
# ---------------------------------------------------------------------------

def _detect_with_channel(Y: np.ndarray, H: np.ndarray, V_H: np.ndarray,
                         x_prior: DiscreteAlphabetPrior, opts: ReceiverOptions,
                         lambda0: float) -> tuple[mf.MfState, int, bool]:
    """X half-steps with a fixed channel belief and noise-precision updates."""
    M, L = Y.shape
    N = H.shape[1]
    st = mf.init_state(M, N, L, lambda0, "ones")
    st.H_hat = H.astype(np.complex128)
    st.V_H = np.asarray(V_H, dtype=np.float64).copy()
    st.Xi_H = np.broadcast_to(st.V_H, (M, N)).copy()
    it = 0
    try:
        for it in range(1, opts.max_iters + 1):
            X_old = st.X_hat
            st = mf.mf_x_step(Y, st, x_prior, it)
            if it > opts.warmup:
                st.lambda_hat = mf.update_noise_precision(Y, st)
            if it > opts.warmup and relative_change(st.X_hat, X_old) < opts.tol:
                break
        return st, it, False
    except (DivergenceError, DecompositionError):
        return st, it, True


def estimate_channel_with_pilots(Y: np.ndarray, X: np.ndarray, op: BeamspaceOperator,
                                 opts: ReceiverOptions, lambda0: float):
    """H-side iterations with ``X`` known exactly (zero X variance)."""
    M, L = Y.shape
    N = X.shape[0]
    st = mf.init_state(M, N, L, lambda0, "ones")
    st.X_hat = X.astype(np.complex128)
    st.U_X = np.zeros(N)
    st.Xi_X = np.zeros((N, L))
    st.H_hat = np.zeros((M, N), dtype=np.complex128)
    gs = init_g_state(op, N, opts.epsilon_init)
    eps = float(opts.epsilon_init)
    it = 0
    try:
        for it in range(1, opts.max_iters + 1):
            warm = it <= opts.warmup
            H_old = st.H_hat
            hm = mf.h_messages(Y, st, it)
            st.S_H = hm.S
            prior = BernoulliGaussianPrior(eps, opts.nu, opts.full_variance)
            gs = g_step(hm.Q.conj().T, hm.V_Q.T, op, gs, prior, update_epsilon=not warm,
                        variance_floor=opts.variance_floor)
            eps = gs.epsilon
            st.H_hat, st.Xi_H, st.V_H = combine_h_posterior(op, gs)
            if not warm:
                st.lambda_hat = mf.update_noise_precision(Y, st)
            if not warm and relative_change(st.H_hat, H_old) < opts.tol:
                break
        diverged = False
    except (DivergenceError, DecompositionError):
        diverged = True
    return st, gs, eps, it, diverged


def run_baseline(Y, mode: str, genie: dict, F=None,
                 x_prior: DiscreteAlphabetPrior | None = None,
                 opts: ReceiverOptions | None = None,
                 rng: np.random.Generator | int | None = None) -> ReceiverOutput:
    """Genie-aided reference receivers.

    ``blind-cesd``: blind receiver with the true user count (``genie["N"]``).
    ``cesd``: channel estimated from the known symbols ``genie["X"]``, then
    symbol detection with that estimate. ``sd``: symbol detection with the
    true channel ``genie["H"]``.
    """
    Y = as_complex_matrix(Y, "Y")
    x_prior = x_prior or DiscreteAlphabetPrior.qpsk()
    opts = opts or ReceiverOptions()
    var_y = float(np.var(Y))
    lam0 = opts.lambda_init_scale / var_y if var_y > 0 else mf.LAMBDA_MAX
    if mode == "blind-cesd":
        if "N" not in genie:
            raise ContractError("blind-cesd needs genie['N']")
        return run_blind_uacesd(Y, F, x_prior, replace(opts, known_n=int(genie["N"])), rng)
    if mode == "cesd":
        if "X" not in genie or F is None:
            raise ContractError("cesd needs genie['X'] and F")
        op = F if isinstance(F, BeamspaceOperator) else BeamspaceOperator.from_matrix(F)
        X = np.asarray(genie["X"], dtype=np.complex128)
        st_h, gs, eps, it_h, div_h = estimate_channel_with_pilots(Y, X, op, opts, lam0)
        st, it_x, div_x = _detect_with_channel(Y, st_h.H_hat, st_h.V_H, x_prior, opts,
                                               st_h.lambda_hat)
        return ReceiverOutput(
            X_hat=st.X_hat, symbol_posteriors=st.symbol_probs, H_hat=st_h.H_hat,
            G_hat=gs.G_hat, N_hat=X.shape[0], lambda_hat=st.lambda_hat, epsilon_hat=eps,
            iterations=it_h + it_x, diverged=div_h or div_x, Xi_H=st_h.Xi_H, V_H=st_h.V_H)
    if mode == "sd":
        if "H" not in genie:
            raise ContractError("sd needs genie['H']")
        H = as_complex_matrix(genie["H"], "H")
        N = H.shape[1]
        st, it, div = _detect_with_channel(Y, H, np.zeros(N), x_prior, opts, lam0)
        G = np.zeros((0, N), dtype=np.complex128) if F is None else np.asarray(genie.get("G", np.zeros((0, N))))
        return ReceiverOutput(
            X_hat=st.X_hat, symbol_posteriors=st.symbol_probs, H_hat=H, G_hat=G, N_hat=N,
            lambda_hat=st.lambda_hat, epsilon_hat=float("nan"), iterations=it, diverged=div,
            Xi_H=np.zeros_like(H.real), V_H=np.zeros(N))
    raise ContractError(f"unknown baseline mode {mode!r}")


def run_receiver(Y, mode: str, F, genie: dict | None = None,
                 x_prior: DiscreteAlphabetPrior | None = None,
                 opts: ReceiverOptions | None = None, rng=None) -> ReceiverOutput:
    """Dispatch on ``mode`` (one of ``MODES``)."""
    if mode == "blind-uacesd":
        return run_blind_uacesd(Y, F, x_prior, opts, rng)
    return run_baseline(Y, mode, genie or {}, F, x_prior, opts, rng)
