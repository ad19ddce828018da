"""Dense symmetric linear algebra with an explicit tolerance policy.

Every operator in the package (A, B, the dual operator T_{B,k}, path
members A_s) is a dense real symmetric ``numpy`` array.  Inputs are
symmetrized on entry, so callers may pass matrices that are symmetric only
up to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import EigenError, PreconditionError

#: relative kernel tolerance, scaled by max(1, ||M||)
KERNEL_TOL = 1e-8


def symmetrize(M) -> np.ndarray:
    """Return ``(M + M^T)/2`` as a read-only float array.

    Raises:
        PreconditionError: if ``M`` is not a non-empty square matrix.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise PreconditionError(f"expected a non-empty square matrix, got shape {M.shape}")
    S = 0.5 * (M + M.T)
    S.setflags(write=False)
    return S


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues with optional orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None
    residual_bound: float = 0.0

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))


def _residual_bound(dim: int, norm: float) -> float:
    return 1e-9 * (1.0 + norm)


def eig_sym(M, want_vectors: bool = False) -> Spectrum:
    """Full spectrum of a symmetric matrix, with multiplicities.

    LAPACK ``syevd`` (via scipy) does the work.  When vectors are requested
    the residuals ``||M v - lambda v||`` are measured and checked against
    ``1e-9 * (1 + ||M||)``; otherwise the a-priori backward-stable bound
    ``dim * eps * ||M||`` is reported.
    """
    S = symmetrize(M)
    try:
        if want_vectors:
            w, V = sla.eigh(S, check_finite=True)
        else:
            w = sla.eigh(S, eigvals_only=True, check_finite=True)
            V = None
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenError(f"eigensolver failed: {exc}") from exc

    norm = float(np.max(np.abs(w)))
    if V is None:
        bound = S.shape[0] * np.finfo(float).eps * max(norm, 1.0)
        return Spectrum(np.asarray(w), None, float(bound))

    worst = float(np.max(np.linalg.norm(S @ V - V * w, axis=0)))
    limit = _residual_bound(S.shape[0], norm)
    if worst > limit:
        raise EigenError(
            f"eigenpair residual {worst:.3e} exceeds contract {limit:.3e}",
            worst_residual=worst,
        )
    return Spectrum(np.asarray(w), V, worst)


def eigvalsh(M) -> np.ndarray:
    """Ascending eigenvalues only (thin wrapper used on hot paths)."""
    return eig_sym(M).eigenvalues


def eigvals_in(M, lo: float, hi: float) -> np.ndarray:
    """Eigenvalues of ``M`` lying in the half-open window ``(lo, hi]``.

    Uses the LAPACK ``syevr`` subset driver so large operators can be probed
    without the full eigenvector set.
    """
    S = symmetrize(M)
    if not lo < hi:
        raise PreconditionError(f"empty window ({lo}, {hi}]")
    return sla.eigh(S, eigvals_only=True, subset_by_value=(lo, hi), driver="evr")


def operator_norm(M) -> float:
    """Largest eigenvalue magnitude of a symmetric matrix."""
    return eig_sym(M).norm


def inertia_below(M, threshold: float = 0.0, tol: float = 1e-10) -> tuple[int, int]:
    """Count eigenvalues strictly below and at a threshold.

    Returns ``(n_neg, n_zero)`` where ``n_neg = #{lambda < threshold - tol}``
    and ``n_zero = #{|lambda - threshold| <= tol}``, with multiplicity.
    """
    if not tol > 0:
        raise PreconditionError("tol must be positive")
    w = eigvalsh(M) - threshold
    return int(np.sum(w < -tol)), int(np.sum(np.abs(w) <= tol))


def kernel_tolerance(w: np.ndarray, tol: float = KERNEL_TOL) -> float:
    """Absolute nullity threshold ``tol * max(1, ||M||)`` for a spectrum ``w``."""
    return tol * max(1.0, float(np.max(np.abs(w))))


def kernel_dim(M, tol: float = KERNEL_TOL) -> int:
    """Number of eigenvalues with ``|lambda| <= tol * max(1, ||M||)``."""
    if not tol > 0:
        raise PreconditionError("tol must be positive")
    w = eigvalsh(M)
    return int(np.sum(np.abs(w) <= kernel_tolerance(w, tol)))


def lambda_min(M) -> float:
    return float(eigvalsh(M)[0])


def lambda_max(M) -> float:
    return float(eigvalsh(M)[-1])


def is_definite(M, margin: float = 0.0) -> bool:
    """True iff ``lambda_min(M) > margin``."""
    if margin < 0:
        raise PreconditionError("margin must be nonnegative")
    return lambda_min(M) > margin


def gen_eig_definite(P, Q) -> np.ndarray:
    """All roots ``s`` of ``det(P - s Q) = 0`` for positive definite ``Q``.

    The pencil is reduced by congruence with the Cholesky factor
    ``Q = L L^T`` to the ordinary problem ``L^{-1} P L^{-T}``.
    """
    P = symmetrize(P)
    Q = symmetrize(Q)
    if P.shape != Q.shape:
        raise PreconditionError(f"pencil shape mismatch {P.shape} vs {Q.shape}")
    qmin = lambda_min(Q)
    if not qmin > 0:
        raise PreconditionError(f"Q is not positive definite: lambda_min(Q) = {qmin:.6g}")
    L = np.linalg.cholesky(Q)
    X = sla.solve_triangular(L, P, lower=True)
    C = sla.solve_triangular(L, X.T, lower=True)
    return eigvalsh(C)
