"""Posterior estimators used inside (U)AMP.

Each prior object exposes ``denoise(Q, Vq) -> DenoiseOutput`` (the
scalar-decoupled MMSE step applied entry-wise) and ``derivative(Q, Vq)``,
which returns ``Vq * dg/dq`` (the Wirtinger derivative of the posterior mean
scaled by the measurement variance). For the discrete and Gaussian priors
that equals the posterior variance. For the Bernoulli-Gaussian prior the
projected variance ``pi**2 * nu_gamma`` is smaller than the exact
derivative, and the derivative returns the exact mixture variance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ContractError

EPS_MIN = 1e-6
EPS_MAX = 1.0 - 1e-6

QPSK = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / np.sqrt(2.0)


@dataclass
class DenoiseOutput:
    """Entry-wise posterior means and variances.

    ``aux`` holds the activation probabilities for the Bernoulli-Gaussian
    prior, and the per-symbol probabilities (trailing axis) for a discrete
    prior.
    """

    mean: np.ndarray
    variance: np.ndarray
    aux: np.ndarray | None = None


def _check_inputs(Q, Vq) -> tuple[np.ndarray, np.ndarray]:
    Q = np.asarray(Q, dtype=np.complex128)
    Vq = np.asarray(Vq, dtype=np.float64)
    if Vq.shape != Q.shape:
        Vq = np.broadcast_to(Vq, Q.shape)
    if np.any(~(Vq > 0)):
        raise ContractError("measurement variances must be strictly positive")
    return Q, Vq


def _as2d(a: np.ndarray) -> np.ndarray:
    if a.ndim == 2:
        return a
    return a.reshape(1, -1) if a.ndim < 2 else a.reshape(-1, a.shape[-1])


@dataclass(frozen=True)
class DiscreteAlphabetPrior:
    """Finite alphabet with (by default uniform) symbol probabilities."""

    symbols: np.ndarray = field(default_factory=lambda: QPSK.copy())
    weights: np.ndarray | None = None

    def __post_init__(self):
        sym = np.asarray(self.symbols, dtype=np.complex128).ravel()
        if sym.size < 2:
            raise ContractError("alphabet needs at least two symbols")
        w = (np.full(sym.size, 1.0 / sym.size) if self.weights is None
             else np.asarray(self.weights, dtype=np.float64).ravel())
        if w.shape != sym.shape or np.any(w < 0) or not np.isclose(w.sum(), 1.0):
            raise ContractError("weights must be a probability vector matching symbols")
        object.__setattr__(self, "symbols", sym)
        object.__setattr__(self, "weights", w)

    @classmethod
    def qpsk(cls) -> "DiscreteAlphabetPrior":
        return cls(QPSK.copy())

    @property
    def energy(self) -> float:
        """Mean symbol energy under uniform weighting."""
        return float(np.mean(np.abs(self.symbols) ** 2))

    @property
    def prior_variance(self) -> float:
        mu = np.sum(self.weights * self.symbols)
        return float(np.sum(self.weights * np.abs(self.symbols - mu) ** 2))

    def denoise(self, Q, Vq) -> DenoiseOutput:
        return denoise_discrete(Q, Vq, self)

    def derivative(self, Q, Vq) -> np.ndarray:
        return self.denoise(Q, Vq).variance


@dataclass(frozen=True)
class BernoulliGaussianPrior:
    """``(1 - epsilon) delta(g) + epsilon CN(g; 0, nu)``.

    ``full_variance`` switches the Gaussian projection from the ``pi**2``
    variance to the exact mixture variance.
    """

    epsilon: float = 0.1
    nu: float = 1.0
    full_variance: bool = False

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ContractError("epsilon must lie in (0, 1)")
        if not self.nu > 0.0:
            raise ContractError("nu must be positive")

    def with_epsilon(self, epsilon: float) -> "BernoulliGaussianPrior":
        return BernoulliGaussianPrior(float(epsilon), self.nu, self.full_variance)

    def denoise(self, Q, Vq) -> DenoiseOutput:
        return denoise_bernoulli_gaussian(Q, Vq, self)

    def derivative(self, Q, Vq) -> np.ndarray:
        exact = BernoulliGaussianPrior(self.epsilon, self.nu, True)
        return denoise_bernoulli_gaussian(Q, Vq, exact).variance


@dataclass(frozen=True)
class GaussianPrior:
    """``CN(x; mean, variance)``; the linear (LMMSE) denoiser."""

    mean: complex = 0.0
    variance: float = 1.0

    def denoise(self, Q, Vq) -> DenoiseOutput:
        Q, Vq = _check_inputs(Q, Vq)
        w = self.variance / (self.variance + Vq)
        return DenoiseOutput(mean=self.mean + w * (Q - self.mean), variance=w * Vq)

    def derivative(self, Q, Vq) -> np.ndarray:
        return self.denoise(Q, Vq).variance


def denoise_discrete(Q, Vq, prior: DiscreteAlphabetPrior) -> DenoiseOutput:
    """Entry-wise posterior over a finite alphabet.

    ``xi_a = w_a exp(-|alpha_a - q|^2 / v_q)``, normalized with max-subtraction;
    returns the posterior mean, variance and the probabilities ``beta``.
    """
    Q, Vq = _check_inputs(Q, Vq)
    shape = Q.shape
    mean, var, beta = kernels.discrete_posterior(
        _as2d(Q), _as2d(np.ascontiguousarray(Vq)), prior.symbols, np.log(prior.weights))
    return DenoiseOutput(mean=mean.reshape(shape), variance=var.reshape(shape),
                         aux=beta.reshape(shape + (prior.symbols.size,)))


def denoise_bernoulli_gaussian(Q, Vq, prior: BernoulliGaussianPrior) -> DenoiseOutput:
    """Entry-wise Bernoulli-Gaussian posterior projected onto a Gaussian.

    With ``gamma = q nu/(v_q+nu)`` and ``nu_gamma = v_q nu/(v_q+nu)`` the
    activation probability is
    ``pi = eps CN(q;0,v_q+nu) / ((1-eps) CN(q;0,v_q) + eps CN(q;0,v_q+nu))``,
    evaluated in the log domain. The mean is ``pi gamma`` and the variance is
    ``pi**2 nu_gamma`` (or the exact mixture variance if requested).
    """
    Q, Vq = _check_inputs(Q, Vq)
    shape = Q.shape
    g, v, pi = kernels.bg_posterior(_as2d(Q), _as2d(np.ascontiguousarray(Vq)),
                                    prior.epsilon, prior.nu, prior.full_variance)
    return DenoiseOutput(mean=g.reshape(shape), variance=v.reshape(shape),
                         aux=pi.reshape(shape))


def em_update_sparsity(pi) -> float:
    """EM estimate of the sparsity rate: the mean activation probability."""
    pi = np.asarray(pi, dtype=np.float64)
    if pi.size == 0:
        raise ContractError("activation-probability matrix is empty")
    if np.any(pi < 0) or np.any(pi > 1):
        raise ContractError("activation probabilities must lie in [0, 1]")
    return float(np.clip(pi.mean(), EPS_MIN, EPS_MAX))


def denoiser_derivative(denoiser, Q, Vq) -> np.ndarray:
    """``Vq * g'(Q, Vq)`` for a prior object, evaluated in closed form."""
    Q, Vq = _check_inputs(Q, Vq)
    if hasattr(denoiser, "derivative"):
        return np.asarray(denoiser.derivative(Q, Vq), dtype=np.float64)
    # generic callable: central Wirtinger difference of the mean
    h = 1e-6
    f = (lambda z: denoiser(z, Vq).mean)
    d_re = (f(Q + h) - f(Q - h)) / (2 * h)
    d_im = (f(Q + 1j * h) - f(Q - 1j * h)) / (2 * h)
    return np.real(0.5 * (d_re - 1j * d_im)) * Vq
