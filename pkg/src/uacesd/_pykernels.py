"""Reference numpy implementations of the hot kernels.

These define the semantics that the compiled ``_ckernels`` module must
reproduce. They are used whenever the extension is unavailable.
"""

from __future__ import annotations

import numpy as np

_LOG_PI = np.log(np.pi)


def discrete_posterior(Q: np.ndarray, V: np.ndarray, symbols: np.ndarray,
                       log_weights: np.ndarray):
    """Posterior mean, variance and symbol probabilities for a discrete prior.

    Works on 2-D ``Q``/``V``; returns ``(mean, var, beta)`` with ``beta`` of
    shape ``Q.shape + (len(symbols),)``.
    """
    d = log_weights - np.abs(symbols - Q[..., None]) ** 2 / V[..., None]
    d -= d.max(axis=-1, keepdims=True)
    beta = np.exp(d)
    beta /= beta.sum(axis=-1, keepdims=True)
    mean = beta @ symbols
    var = np.einsum("...a,...a->...", beta, np.abs(symbols - mean[..., None]) ** 2)
    return mean, var, beta


def bg_posterior(Q: np.ndarray, V: np.ndarray, eps: float, nu: float, full: bool):
    """Bernoulli-Gaussian posterior quantities ``(g_hat, v_g, pi)``.

    ``full`` selects the exact mixture variance instead of ``pi**2 * nu_gamma``.
    """
    absq2 = np.abs(Q) ** 2
    log_on = np.log(eps) - _LOG_PI - np.log(V + nu) - absq2 / (V + nu)
    log_off = np.log1p(-eps) - _LOG_PI - np.log(V) - absq2 / V
    pi = _sigmoid(log_on - log_off)
    gamma = Q * (nu / (V + nu))
    v_gamma = V * nu / (V + nu)
    g = pi * gamma
    if full:
        v = pi * v_gamma + pi * (1.0 - pi) * np.abs(gamma) ** 2
    else:
        v = pi * pi * v_gamma
    return g, v, pi


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# Trellis of the [5,7]_8 code. State s = 2*u[t-1] + u[t-2].
_NEXT = np.array([[(u << 1) | (s >> 1) for u in (0, 1)] for s in range(4)])
_OUT = np.array([[((u ^ (s & 1)), (u ^ (s >> 1) ^ (s & 1))) for u in (0, 1)]
                 for s in range(4)])


def viterbi57(llr: np.ndarray) -> np.ndarray:
    """Maximum-correlation path through the terminated 4-state trellis.

    ``llr`` has shape ``(T, 2)``; positive values favour bit 0. Returns the
    ``T`` input bits on the survivor path that starts and ends in state 0
    (tail bits included). Ties keep the lower-numbered predecessor.
    """
    llr = np.asarray(llr, dtype=np.float64)
    T = llr.shape[0]
    neg_inf = -np.inf
    metric = np.full(4, neg_inf)
    metric[0] = 0.0
    back = np.zeros((T, 4), dtype=np.int8)
    # predecessors of next-state ns: s0 < s1, both with input u = ns >> 1
    preds = np.array([[((ns & 1) << 1), ((ns & 1) << 1) | 1] for ns in range(4)])
    u_of = np.array([ns >> 1 for ns in range(4)])
    sign = 1.0 - 2.0 * _OUT  # (4 states, 2 inputs, 2 bits)
    for t in range(T):
        bm = sign[:, :, 0] * llr[t, 0] + sign[:, :, 1] * llr[t, 1]  # (4, 2)
        cand0 = metric[preds[:, 0]] + bm[preds[:, 0], u_of]
        cand1 = metric[preds[:, 1]] + bm[preds[:, 1], u_of]
        pick = cand1 > cand0
        metric = np.where(pick, cand1, cand0)
        back[t] = pick
    bits = np.zeros(T, dtype=np.int8)
    s = 0
    for t in range(T - 1, -1, -1):
        bits[t] = s >> 1
        s = preds[s, back[t, s]]
    return bits
