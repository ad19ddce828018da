"""Grid discretizations of the Hamiltonian and Dirac model operators.

The line is truncated to ``[-T, T]`` with ``n`` interior nodes
``t_j = -T + j h``, ``h = 2T/(n+1)``; the homoclinic condition
``z(t) -> 0`` becomes a Dirichlet condition at ``t = +/-T``.  Unknowns are
stored site-major: component ``c`` at node ``j`` is entry ``j*comp_dim + c``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

from . import symmetric as sym
from .errors import ModelError


@dataclass(frozen=True)
class Grid1D:
    T: float
    n: int
    comp_dim: int = 2

    def __post_init__(self):
        if not self.T > 0:
            raise ModelError("half length T must be positive")
        if self.n < 3:
            raise ModelError("need at least 3 interior nodes")
        if self.comp_dim < 1:
            raise ModelError("comp_dim must be >= 1")

    @property
    def h(self) -> float:
        return 2.0 * self.T / (self.n + 1)

    @property
    def nodes(self) -> np.ndarray:
        return -self.T + self.h * np.arange(1, self.n + 1)

    @property
    def size(self) -> int:
        return self.n * self.comp_dim

    def inner(self, u, v) -> float:
        """Discrete L^2 inner product (rectangle rule, exact zero at the walls)."""
        return float(self.h * np.dot(np.ravel(u), np.ravel(v)))


@dataclass(frozen=True)
class MatrixFunction:
    """``t -> symmetric (dim x dim)`` matrix with declared spectral bounds."""

    fn: Callable[[float], np.ndarray]
    dim: int
    bounds: tuple[float, float]

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self.fn(float(t)), dtype=float)

    def blocks(self, ts) -> np.ndarray:
        return np.stack([self(t) for t in np.ravel(ts)])

    def spot_check(self, ts, atol: float = 1e-12) -> bool:
        """Symmetry and declared bounds on the given sample points."""
        lo, hi = self.bounds
        for M in self.blocks(ts):
            if np.max(np.abs(M - M.T)) > atol:
                return False
            w = np.linalg.eigvalsh(0.5 * (M + M.T))
            if w[0] < lo - atol or w[-1] > hi + atol:
                return False
        return True


def constant(M, bounds=None) -> MatrixFunction:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    w = np.linalg.eigvalsh(M)
    return MatrixFunction(lambda t: M, M.shape[0], bounds or (float(w[0]), float(w[-1])))


def symplectic_J(N: int) -> np.ndarray:
    """Standard symplectic matrix ``[[0, -I], [I, 0]]``."""
    I, Z = np.eye(N), np.zeros((N, N))
    return np.block([[Z, -I], [I, Z]])


def difference_matrix(n: int, h: float, boundary: str = "dirichlet") -> np.ndarray:
    """Skew-symmetric central difference ``(z_{j+1} - z_{j-1}) / 2h``."""
    D = (np.eye(n, k=1) - np.eye(n, k=-1)) / (2.0 * h)
    if boundary == "periodic":
        D[0, -1] = -1.0 / (2.0 * h)
        D[-1, 0] = 1.0 / (2.0 * h)
    elif boundary != "dirichlet":
        raise ModelError(f"unknown boundary {boundary!r}")
    return D


def _blockdiag(blocks: np.ndarray) -> np.ndarray:
    n, d, _ = blocks.shape
    out = np.zeros((n * d, n * d))
    for j in range(n):
        out[j * d:(j + 1) * d, j * d:(j + 1) * d] = blocks[j]
    return out


def hamiltonian_operator(L: MatrixFunction, g: Grid1D, N: int, boundary: str = "dirichlet") -> np.ndarray:
    """Discretization of ``A = -(J d/dt + L(t))`` as ``-(D kron J) - blockdiag L(t_j)``.

    ``D`` and ``J`` are both skew, so the Kronecker product is symmetric
    and the assembled matrix is exactly symmetric.
    """
    if g.comp_dim != 2 * N or L.dim != 2 * N:
        raise ModelError(f"need comp_dim = L.dim = 2N = {2 * N}, got {g.comp_dim} and {L.dim}")
    blocks = L.blocks(g.nodes)
    asym = np.max(np.abs(blocks - np.swapaxes(blocks, 1, 2)))
    if asym > 1e-12:
        raise ModelError(f"L(t) is not symmetric on the grid (max asymmetry {asym:.3e})")
    D = difference_matrix(g.n, g.h, boundary)
    M = -np.kron(D, symplectic_J(N)) - _blockdiag(blocks)
    return np.asarray(sym.symmetrize(M))


def multiplication_operator(Bfun: MatrixFunction, g: Grid1D) -> np.ndarray:
    """``z(t) -> B(t) z(t)`` as ``blockdiag(B(t_j))``."""
    if Bfun.dim != g.comp_dim:
        raise ModelError(f"B has {Bfun.dim} components, grid has {g.comp_dim}")
    return np.asarray(sym.symmetrize(_blockdiag(Bfun.blocks(g.nodes))))


def _ramp(x: float, x0: float, x1: float, top: float) -> float:
    if x <= x0:
        return 0.0
    if x >= x1:
        return top
    return top * (x - x0) / (x1 - x0)


def example_L(r1: float, r2: float, b_max: float, N: int = 1) -> MatrixFunction:
    """Off-diagonal coupling ``[[0, l I], [l I, 0]]`` vanishing on ``|t| <= r1``.

    ``l`` rises linearly from 0 at ``|t| = r1`` to ``b_max`` at ``|t| = r2``.
    """
    if not 0 < r1 < r2:
        raise ModelError(f"need 0 < r1 < r2, got r1={r1}, r2={r2}")
    if not b_max > 0:
        raise ModelError("b_max must be positive")
    off = np.block([[np.zeros((N, N)), np.eye(N)], [np.eye(N), np.zeros((N, N))]])
    return MatrixFunction(lambda t: _ramp(abs(t), r1, r2, b_max) * off, 2 * N, (-b_max, b_max))


def tent_profile(t, r: float, r1: float) -> np.ndarray:
    """1 on ``|t| <= r``, linear down to 0 at ``|t| = r1``."""
    return np.clip((r1 - np.abs(np.asarray(t, dtype=float))) / (r1 - r), 0.0, 1.0)


def tent_closed_forms(r: float, r1: float) -> tuple[float, float]:
    """Exact ``||f'||^2`` and ``||f||^2`` of :func:`tent_profile` on the line."""
    return 2.0 / (r1 - r), 2.0 * r + 2.0 * (r1 - r) / 3.0


def rayleigh_witness(r: float, r1: float, g: Grid1D, N: int = 1, L: MatrixFunction | None = None):
    """Grid values of ``(A z0, A z0)`` and ``(z0, z0)`` for the tent test state.

    ``z0 = f(t) e_1`` is supported where ``L`` vanishes, so ``A z0`` reduces
    to ``-J z0'``; the default ``L`` is ``example_L(r1, 2 r1, 1)``.
    """
    if not 0 < r < r1:
        raise ModelError(f"need 0 < r < r1, got r={r}, r1={r1}")
    if r1 > g.T:
        raise ModelError(f"support radius r1={r1} exceeds truncation T={g.T}")
    if L is None:
        L = example_L(r1, 2.0 * r1, 1.0, N)
    A = hamiltonian_operator(L, g, N)
    z0 = np.zeros((g.n, 2 * N))
    z0[:, 0] = tent_profile(g.nodes, r, r1)
    z0 = z0.ravel()
    Az = A @ z0
    return g.inner(Az, Az), g.inner(z0, z0)


def potential_well_V(R: float, b_max: float) -> Callable[[float], float]:
    """0 on ``|x| <= R``, ``b_max`` beyond ``2R``, linear in ``|x|`` between."""
    if not R > 0:
        raise ModelError("R must be positive")

    def V(x):
        x = np.abs(np.asarray(x, dtype=float))
        return b_max * np.clip((x - R) / R, 0.0, 1.0)

    return V


def dirac1d_operator(V: Callable, g: Grid1D, boundary: str = "dirichlet") -> np.ndarray:
    """Realified 1-D Dirac operator ``-i sigma_1 d/dx + V(x) sigma_3``.

    The complex Hermitian matrix ``X + iY`` with ``X = diag(V) kron sigma_3``
    and ``Y = -D kron sigma_1`` is returned as the real symmetric
    ``[[X, -Y], [Y, X]]`` of size ``4n``; every eigenvalue of the complex
    operator appears twice.
    """
    sigma1 = np.array([[0.0, 1.0], [1.0, 0.0]])
    sigma3 = np.array([[1.0, 0.0], [0.0, -1.0]])
    x = g.nodes
    X = np.kron(np.diag(np.broadcast_to(V(x), x.shape).astype(float)), sigma3)
    Y = -np.kron(difference_matrix(g.n, g.h, boundary), sigma1)
    return np.asarray(sym.symmetrize(np.block([[X, -Y], [Y, X]])))


def radial_first_eigenvalue(R: float, n: int = 2000) -> float:
    """First Dirichlet eigenvalue of ``-Laplace`` on the 3-ball of radius R.

    With ``z = u(rho)/rho`` the radial problem is ``-u'' = lambda u`` on
    ``(0, R)`` with ``u(0) = u(R) = 0``, discretized by the 3-point stencil.
    """
    if n < 100:
        raise ModelError("radial solve needs n >= 100")
    h = R / (n + 1)
    d = np.full(n, 2.0 / h**2)
    e = np.full(n - 1, -1.0 / h**2)
    return float(sla.eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, 0))[0])


def count_in_window(M, lo: float, hi: float) -> int:
    """Number of eigenvalues of ``M`` in ``(lo, hi]``."""
    return len(sym.eigvals_in(M, lo, hi))
