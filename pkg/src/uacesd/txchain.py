"""Ground-truth generation: bits, coding, DQPSK, activity, beamspace channel, AWGN.

Conventions
-----------
* ``F`` is the first ``M`` rows of the ``K``-point DFT scaled by ``1/sqrt(K)``,
  so ``F F^H = I_M`` and column ``k`` is ``a(k/K)/sqrt(K)``.
* DQPSK: data symbols ``d`` are the rotations ``{1, j, -1, -j}`` with Gray
  labels ``00, 01, 11, 10``; transmitted symbols ``x_l = x_{l-1} d_l`` start
  from a reference symbol in ``{e^{j pi/4} j^a}``, so every ``x`` lies in the
  QPSK alphabet used by the receiver. A frame of ``L`` symbols carries
  ``2(L-1)`` bits.
* The rate-1/2 ``[5,7]`` code is terminated with two tail zeros, so a coded
  frame carries ``L-3`` information bits.
* The user ID occupies the first ``ceil(log2 U)`` information bits (MSB first).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .denoisers import QPSK
from .errors import ContractError
from .linalg import sample_complex_gaussian

# Gray labels of the differential rotations j^k, k = 0..3
GRAY_BITS = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=np.int8)
LLR_CLIP = 50.0


# ---------------------------------------------------------------------------
# Channel
# ---------------------------------------------------------------------------

def steering_vector(theta_norm: float, M: int) -> np.ndarray:
    """``a(theta)[m] = exp(-j 2 pi theta m)``, ``m = 0..M-1``."""
    if M < 1:
        raise ContractError("M must be at least 1")
    return np.exp(-2j * np.pi * float(theta_norm) * np.arange(M))


def beamspace_dictionary(M: int, K: int) -> np.ndarray:
    """Partial DFT ``F`` (M x K) with orthonormal rows."""
    if K <= M:
        raise ContractError("K must exceed M")
    m = np.arange(M)[:, None]
    k = np.arange(K)[None, :]
    return np.exp(-2j * np.pi * m * k / K) / np.sqrt(K)


@dataclass(frozen=True)
class SystemConfig:
    """Array, user population and frame settings shared by all trials."""

    M: int = 64
    K: int = 96
    U: int = 100
    L: int = 200
    n_active: int | None = 8
    activity_prob: float | None = None
    paths: int = 10
    coding: bool = False
    on_grid: bool = True

    def __post_init__(self):
        if self.K <= self.M:
            raise ContractError("K must exceed M")
        if not 1 <= self.paths <= self.K:
            raise ContractError("paths must lie in [1, K]")
        if self.L < 4 or self.U < 1 or self.M < 1:
            raise ContractError("M, U must be positive and L at least 4")
        if (self.n_active is None) == (self.activity_prob is None):
            raise ContractError("set exactly one of n_active and activity_prob")
        if self.n_active is not None and not 1 <= self.n_active <= min(self.M, self.L, self.U):
            raise ContractError("n_active must lie in [1, min(M, L, U)]")
        if self.activity_prob is not None and not 0.0 < self.activity_prob <= 1.0:
            raise ContractError("activity_prob must lie in (0, 1]")

    @property
    def id_bits(self) -> int:
        return id_bit_count(self.U)

    @property
    def info_bits(self) -> int:
        return info_bit_count(self.L, self.coding)


def id_bit_count(U: int) -> int:
    return max(1, math.ceil(math.log2(U))) if U > 1 else 1


def info_bit_count(L: int, coding: bool) -> int:
    return L - 3 if coding else 2 * (L - 1)


@dataclass
class ChannelRealization:
    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    active_users: np.ndarray
    paths: list = field(default_factory=list)

    @property
    def N(self) -> int:
        return self.H.shape[1]


def draw_active_users(cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """Sorted indices of the active users.

    With a per-user activity probability the count is capped at
    ``min(M, L) - 1`` and floored at one user.
    """
    if cfg.n_active is not None:
        return np.sort(rng.choice(cfg.U, cfg.n_active, replace=False))
    mask = rng.random(cfg.U) < cfg.activity_prob
    users = np.flatnonzero(mask)
    cap = min(cfg.M, cfg.L) - 1
    if users.size == 0:
        users = rng.choice(cfg.U, 1)
    elif users.size > cap:
        users = rng.choice(users, cap, replace=False)
    return np.sort(users)


def gen_channel(cfg: SystemConfig, rng: np.random.Generator,
                active_users: np.ndarray | None = None) -> ChannelRealization:
    """Sparse beamspace channel with ``cfg.paths`` paths per active user.

    On-grid: path angles sit on the ``K``-point grid, ``G`` has exactly
    ``paths`` nonzeros per column. Off-grid: angles are uniform on ``[0, 1)``
    and ``G = F^H H`` (only approximately sparse). Columns are scaled to unit
    mean entry energy in ``H``.
    """
    if cfg.paths > cfg.K:
        raise ContractError("more paths than grid points")
    if active_users is None:
        active_users = draw_active_users(cfg, rng)
    N = len(active_users)
    F = beamspace_dictionary(cfg.M, cfg.K)
    G = np.zeros((cfg.K, N), dtype=np.complex128)
    H = np.zeros((cfg.M, N), dtype=np.complex128)
    paths = []
    for n in range(N):
        gains = sample_complex_gaussian(cfg.paths, 1, rng=rng)[:, 0]
        if cfg.on_grid:
            idx = rng.choice(cfg.K, cfg.paths, replace=False)
            theta = idx / cfg.K
            G[idx, n] = gains
            h = F @ G[:, n]
        else:
            theta = rng.random(cfg.paths)
            h = sum(g * steering_vector(t, cfg.M) for g, t in zip(gains, theta)) / np.sqrt(cfg.K)
        scale = np.sqrt(np.mean(np.abs(h) ** 2))
        if not scale > 0:
            raise ContractError("degenerate channel column")
        H[:, n] = h / scale
        G[:, n] /= scale
        paths.append(list(zip(theta.tolist(), (gains / scale).tolist())))
    if not cfg.on_grid:
        G = F.conj().T @ H
    return ChannelRealization(F=F, G=G, H=H, active_users=np.asarray(active_users), paths=paths)


# ---------------------------------------------------------------------------
# Convolutional code
# ---------------------------------------------------------------------------

def conv_encode(bits) -> np.ndarray:
    """Rate-1/2 ``[5,7]`` encoder, zero start, two tail zeros, interleaved output."""
    u = np.asarray(bits, dtype=np.int8).ravel()
    if u.size == 0:
        raise ContractError("nothing to encode")
    if np.any((u != 0) & (u != 1)):
        raise ContractError("bits must be 0/1")
    u = np.concatenate([u, np.zeros(2, dtype=np.int8)])
    u1 = np.concatenate([[0], u[:-1]]).astype(np.int8)
    u2 = np.concatenate([[0, 0], u[:-2]]).astype(np.int8)
    out = np.empty((u.size, 2), dtype=np.int8)
    out[:, 0] = u ^ u2
    out[:, 1] = u ^ u1 ^ u2
    return out.ravel()


def viterbi_decode(values, soft: bool | None = None) -> np.ndarray:
    """Maximum-likelihood decoding of a terminated ``[5,7]`` stream.

    ``values`` are LLRs (positive favours bit 0) or hard 0/1 bits; hard bits
    are mapped to ``+-1`` so the correlation metric equals the Hamming
    metric. Returns the information bits without the tail.
    """
    v = np.asarray(values).ravel()
    if v.size % 2:
        raise ContractError("coded stream must have even length")
    if v.size < 6:
        raise ContractError("coded stream shorter than the tail")
    if soft is None:
        soft = not (np.issubdtype(v.dtype, np.integer) or v.dtype == bool)
    llr = v.astype(np.float64) if soft else 1.0 - 2.0 * v.astype(np.float64)
    bits = kernels.viterbi57(llr.reshape(-1, 2))
    return bits[:-2]


# ---------------------------------------------------------------------------
# Differential QPSK
# ---------------------------------------------------------------------------

def bits_to_rotations(bits) -> np.ndarray:
    """Gray-map bit pairs to rotation indices ``k`` (``d = j^k``)."""
    b = np.asarray(bits, dtype=np.int8).ravel()
    if b.size % 2:
        raise ContractError("DQPSK needs an even number of bits")
    pairs = b.reshape(-1, 2)
    # 00 -> 0, 01 -> 1, 11 -> 2, 10 -> 3
    return (2 * pairs[:, 0] + (pairs[:, 0] ^ pairs[:, 1])).astype(np.int64)


def rotations_to_bits(k) -> np.ndarray:
    return GRAY_BITS[np.asarray(k, dtype=np.int64) % 4].ravel()


def dqpsk_modulate(bits, reference_symbol: complex = QPSK[0]) -> np.ndarray:
    """``x_0 = reference``, ``x_l = x_{l-1} d_l``; length ``len(bits)/2 + 1``."""
    k = bits_to_rotations(bits)
    d = 1j ** k
    return reference_symbol * np.concatenate([[1.0 + 0j], np.cumprod(d)])


def differential_products(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    return x[..., 1:] * np.conj(x[..., :-1])


def hard_rotations(x) -> np.ndarray:
    """Nearest rotation index of ``x_l conj(x_{l-1})``."""
    d = differential_products(x)
    ang = np.angle(d * np.exp(1j * np.pi / 4)) % (2 * np.pi)
    return np.minimum((ang // (np.pi / 2)).astype(np.int64), 3)


def dqpsk_demodulate(x) -> np.ndarray:
    """Hard demodulation of one stream (or rows of a matrix) to bits."""
    x = np.asarray(x, dtype=np.complex128)
    k = hard_rotations(x)
    if x.ndim == 1:
        return rotations_to_bits(k)
    return GRAY_BITS[k].reshape(x.shape[0], -1)


def rotation_probabilities(beta) -> np.ndarray:
    """``P(d_l = j^k) = sum_a beta_{l-1}[a] beta_l[(a+k) % 4]``.

    ``beta`` is ``(..., L, 4)`` over the alphabet ``e^{j pi/4} j^a``.
    """
    beta = np.asarray(beta, dtype=np.float64)
    prev, cur = beta[..., :-1, :], beta[..., 1:, :]
    return np.stack([np.sum(prev * np.roll(cur, -k, axis=-1), axis=-1) for k in range(4)],
                    axis=-1)


def dqpsk_llrs(beta, clip: float = LLR_CLIP) -> np.ndarray:
    """Bit LLRs (positive favours 0) from symbol posteriors, interleaved per pair."""
    p = rotation_probabilities(beta)
    tiny = np.finfo(float).tiny
    b0 = np.log(np.maximum(p[..., 0] + p[..., 1], tiny)) - np.log(np.maximum(p[..., 2] + p[..., 3], tiny))
    b1 = np.log(np.maximum(p[..., 0] + p[..., 3], tiny)) - np.log(np.maximum(p[..., 1] + p[..., 2], tiny))
    llr = np.stack([b0, b1], axis=-1)
    llr = np.clip(llr, -clip, clip)
    return llr.reshape(llr.shape[:-2] + (-1,))


def dqpsk_demodulate_soft(beta) -> np.ndarray:
    """Hard bits from the soft path (sign of the LLRs)."""
    return (dqpsk_llrs(beta) < 0).astype(np.int8)


# ---------------------------------------------------------------------------
# Frames and noise
# ---------------------------------------------------------------------------

@dataclass
class Frame:
    info_bits: np.ndarray          # N x info_bits
    coded_bits: np.ndarray | None  # N x 2(L-1) when coding is on
    X: np.ndarray                  # N x L
    reference_symbols: np.ndarray  # N

    @property
    def payload_bits(self) -> np.ndarray:
        return self.info_bits


def user_id_bits(user: int, nbits: int) -> np.ndarray:
    return np.array([(user >> (nbits - 1 - i)) & 1 for i in range(nbits)], dtype=np.int8)


def bits_to_user_id(bits) -> int:
    out = 0
    for b in np.asarray(bits, dtype=np.int64):
        out = (out << 1) | int(b)
    return out


def make_frame(cfg: SystemConfig, active_users, rng: np.random.Generator) -> Frame:
    """Random payload with the user ID prefix, optional coding, DQPSK mapping."""
    N = len(active_users)
    nid = cfg.id_bits
    nbits = cfg.info_bits
    if nid >= nbits:
        raise ContractError("frame too short to carry the user ID")
    info = rng.integers(0, 2, size=(N, nbits), dtype=np.int8)
    for n, u in enumerate(active_users):
        info[n, :nid] = user_id_bits(int(u), nid)
    coded = np.stack([conv_encode(b) for b in info]) if cfg.coding else None
    stream = coded if cfg.coding else info
    ref = QPSK[rng.integers(0, 4, size=N)]
    X = np.stack([dqpsk_modulate(stream[n], ref[n]) for n in range(N)])
    return Frame(info_bits=info, coded_bits=coded, X=X, reference_symbols=ref)


@dataclass(frozen=True)
class NoiseModel:
    snr_db: float
    sigma2: float

    @property
    def lambda_true(self) -> float:
        return float("inf") if self.sigma2 == 0 else 1.0 / self.sigma2


def noise_model(HX: np.ndarray, N: int, snr_db: float) -> NoiseModel:
    """Noise variance for ``snr_db`` with signal power per antenna per user."""
    M, L = HX.shape
    if not np.all(np.isfinite(HX)):
        raise ContractError("HX must be finite")
    if N < 1:
        raise ContractError("N must be positive")
    if np.isposinf(snr_db):
        return NoiseModel(float(snr_db), 0.0)
    p = float(np.vdot(HX, HX).real) / (M * N * L)
    return NoiseModel(float(snr_db), p / 10 ** (snr_db / 10))


def unit_noise(M: int, L: int, rng: np.random.Generator) -> np.ndarray:
    return sample_complex_gaussian(M, L, 0.0, 1.0, rng)


def apply_awgn(HX: np.ndarray, noise: NoiseModel, rng: np.random.Generator | None = None,
               W0: np.ndarray | None = None) -> np.ndarray:
    """``Y = HX + sqrt(sigma2) W0`` with ``W0`` i.i.d. ``CN(0, 1)``.

    Passing a pre-drawn ``W0`` lets several SNR points share one noise
    realization.
    """
    HX = np.asarray(HX, dtype=np.complex128)
    if noise.sigma2 == 0:
        return HX.copy()
    if W0 is None:
        if rng is None:
            raise ContractError("apply_awgn needs an rng or a noise draw")
        W0 = unit_noise(*HX.shape, rng)
    if W0.shape != HX.shape:
        raise ContractError("noise draw has the wrong shape")
    return HX + np.sqrt(noise.sigma2) * W0


@dataclass
class TrialData:
    """Everything one Monte Carlo trial needs, before noise is added."""

    channel: ChannelRealization
    frame: Frame
    W0: np.ndarray
    HX: np.ndarray

    def observe(self, snr_db: float) -> tuple[np.ndarray, NoiseModel]:
        noise = noise_model(self.HX, self.channel.N, snr_db)
        return apply_awgn(self.HX, noise, W0=self.W0), noise


def trial_seed(seed: int, trial: int) -> np.random.SeedSequence:
    """Seed of one trial: a function of the master seed and trial index only."""
    return np.random.SeedSequence([int(seed), int(trial)])


def generate_trial(cfg: SystemConfig, seed: int, trial: int) -> TrialData:
    """Channel, frame and unit noise from three independent child streams."""
    ch_ss, bit_ss, noise_ss = trial_seed(seed, trial).spawn(3)
    ch_rng = np.random.default_rng(ch_ss)
    channel = gen_channel(cfg, ch_rng)
    frame = make_frame(cfg, channel.active_users, np.random.default_rng(bit_ss))
    W0 = unit_noise(cfg.M, cfg.L, np.random.default_rng(noise_ss))
    return TrialData(channel=channel, frame=frame, W0=W0, HX=channel.H @ frame.X)
