"""Dense complex linear algebra and seeded random generation.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Decompositions
go through LAPACK via numpy, with scipy drivers as a fallback when the
default routine fails to converge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ContractError, DecompositionError

# Eigenvalues within this distance below zero are treated as exact zeros.
PSD_CLAMP = 1e-12
# Relative floor applied to eigenvalues before forming D^{-1/2}.
WHITEN_FLOOR = 1e-12


@dataclass(frozen=True)
class SvdResult:
    """Full SVD ``A = U @ diag_rect(S) @ V^H``."""

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        m, k = self.U.shape[0], self.V.shape[0]
        sigma = np.zeros((m, k))
        r = len(self.S)
        sigma[:r, :r] = np.diag(self.S)
        return self.U @ sigma @ self.V.conj().T


@dataclass(frozen=True)
class EigResult:
    """Eigen-decomposition ``W = C @ diag(D) @ C^H`` of a Hermitian PSD matrix."""

    C: np.ndarray
    D: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.C * self.D) @ self.C.conj().T


def as_complex_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D complex128 array or raise ContractError."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ContractError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains NaN or Inf")
    return arr


def svd(A) -> SvdResult:
    """Full singular value decomposition with unitary U and V."""
    A = as_complex_matrix(A, "A")
    try:
        U, S, Vh = np.linalg.svd(A, full_matrices=True)
    except np.linalg.LinAlgError:
        try:
            U, S, Vh = scipy.linalg.svd(A, full_matrices=True, lapack_driver="gesvd")
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise DecompositionError("SVD", A.shape) from exc
    return SvdResult(U=U, S=np.maximum(S, 0.0), V=Vh.conj().T)


def singular_values(A) -> np.ndarray:
    """Singular values in descending order."""
    A = as_complex_matrix(A, "A")
    try:
        return np.linalg.svd(A, compute_uv=False)
    except np.linalg.LinAlgError:
        try:
            return scipy.linalg.svd(A, compute_uv=False, lapack_driver="gesvd")
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise DecompositionError("SVD", A.shape) from exc


def _eigh(W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # The default LAPACK path occasionally reports non-convergence on
    # well-conditioned inputs; the MRRR and QR drivers are tried in turn.
    try:
        return np.linalg.eigh(W)
    except np.linalg.LinAlgError:
        pass
    for driver in ("evr", "ev"):
        try:
            return scipy.linalg.eigh(W, driver=driver)
        except (np.linalg.LinAlgError, ValueError):
            continue
    raise DecompositionError("Hermitian eigendecomposition", W.shape)


def eig_hermitian(W, tol: float = 1e-10) -> EigResult:
    """Eigen-decomposition of a Hermitian positive-semidefinite matrix.

    The input is symmetrized as ``(W + W^H)/2`` after checking that it is
    Hermitian to ``tol`` (relative to its largest entry). Eigenvalues in
    ``[-1e-12 * scale, 0)`` are clamped to zero.
    """
    W = as_complex_matrix(W, "W")
    if W.shape[0] != W.shape[1]:
        raise ContractError(f"W must be square, got shape {W.shape}")
    scale = max(1.0, float(np.max(np.abs(W))))
    if np.max(np.abs(W - W.conj().T)) > tol * scale:
        raise ContractError("W is not Hermitian within tolerance")
    D, C = _eigh(0.5 * (W + W.conj().T))
    clamp = PSD_CLAMP * max(1.0, float(np.max(np.abs(D))))
    if np.any(D < -clamp):
        raise ContractError("W is not positive semidefinite")
    return EigResult(C=C, D=np.maximum(D, 0.0))


def whitening_pair(W, floor: float = WHITEN_FLOOR) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(D^{-1/2} C^H, D^{1/2} C^H)`` for the Hermitian PSD matrix ``W``.

    Eigenvalues below ``floor * max(D)`` are raised to that floor so that the
    inverse square root stays bounded on rank-deficient inputs. The second
    factor ``Phi`` satisfies ``Phi^H Phi = W`` (up to the floor), so the first
    one maps ``W``-weighted normal equations onto a model with unit noise.
    """
    eig = eig_hermitian(W)
    top = float(np.max(eig.D)) if eig.D.size else 0.0
    if top <= 0.0:
        d = np.ones_like(eig.D)
    else:
        d = np.maximum(eig.D, floor * top)
    Ch = eig.C.conj().T
    sq = np.sqrt(d)
    return Ch / sq[:, None], Ch * sq[:, None]


def sample_complex_gaussian(rows: int, cols: int, mean: float = 0.0,
                            variance: float = 1.0,
                            rng: np.random.Generator | int | None = None) -> np.ndarray:
    """I.i.d. circularly-symmetric complex Gaussian matrix.

    Real and imaginary parts each have variance ``variance / 2``. ``rng`` may
    be a Generator or an integer seed; the result is a pure function of it.
    """
    if variance < 0:
        raise ContractError("variance must be non-negative")
    if rows < 1 or cols < 1:
        raise ContractError("rows and cols must be positive")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    z = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    return mean + np.sqrt(variance / 2.0) * z
