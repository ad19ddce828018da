"""Dual variational solver for ``A z = grad_z R(t, z)`` on a node grid.

Writing ``B_eps = B1 - eps I``, ``A_eps = A - B_eps`` and
``R_eps(t, z) = R(t, z) - (B_eps z, z)/2``, solutions correspond to
critical points of

    Psi(u) = sum_j w R*_eps(t_j, u_j) - (A_eps^{-1} u, u)_H / 2,

with ``z = A_eps^{-1} u``.  The Legendre transform decouples node by node.
All gradients are taken in the discrete L^2 inner product
``(u, v)_H = w * sum_j u_j . v_j``; ``w`` is the quadrature weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize

from . import symmetric as sym
from .errors import ConvexityError, PreconditionError, ShiftSearchError
from .index import GappedOperator, Perturbation, check_admissible, index_pair, nullity
from .models import MatrixFunction, constant

DEFAULT_BUDGET = 10_000
DEFAULT_GRAD_TOL = 1e-6


@dataclass(frozen=True)
class Nonlinearity:
    """Vectorized ``R(t, z)`` with gradient and Hessian over a batch of nodes.

    ``value(t, Z) -> (n,)``, ``grad(t, Z) -> (n, d)``, ``hess(t, Z) -> (n, d, d)``
    for node times ``t`` of shape ``(n,)`` and states ``Z`` of shape ``(n, d)``.
    ``bounds`` are the declared Hessian bounds; ``B0, B1, B2`` the twisting data.
    """

    value: Callable
    grad: Callable
    hess: Callable
    dim: int
    bounds: tuple[float, float]
    B0: MatrixFunction | None = None
    B1: MatrixFunction | None = None
    B2: MatrixFunction | None = None
    even: bool = False

    def negated(self) -> "Nonlinearity":
        """``-R`` with negated twisting data (the minus-branch reduction).

        Negation reverses order, so ``-B2`` becomes the lower and ``-B1`` the
        upper twisting operator.
        """
        neg = lambda mf: None if mf is None else MatrixFunction(
            lambda t, f=mf: -f(t), mf.dim, (-mf.bounds[1], -mf.bounds[0]))
        return Nonlinearity(
            lambda t, Z: -self.value(t, Z),
            lambda t, Z: -self.grad(t, Z),
            lambda t, Z: -self.hess(t, Z),
            self.dim,
            (-self.bounds[1], -self.bounds[0]),
            neg(self.B0), neg(self.B2), neg(self.B1),
            self.even,
        )


def quadratic_nonlinearity(C) -> Nonlinearity:
    """``R(t, z) = (C z, z)/2`` with a constant symmetric ``C``.

    The Hessian is ``C`` everywhere, so ``B0 = B1 = B2 = C``.
    """
    C = np.asarray(sym.symmetrize(C))
    d = C.shape[0]
    w = np.linalg.eigvalsh(C)
    return Nonlinearity(
        value=lambda t, Z: 0.5 * np.einsum("ni,ij,nj->n", Z, C, Z),
        grad=lambda t, Z: Z @ C,
        hess=lambda t, Z: np.broadcast_to(C, (len(Z), d, d)).copy(),
        dim=d,
        bounds=(float(w[0]), float(w[-1])),
        B0=constant(C), B1=constant(C), B2=constant(C),
        even=True,
    )


def _logcosh(x):
    return np.logaddexp(x, -x) - np.log(2.0)


def saturating_nonlinearity(
    dim: int,
    slope_inf: float,
    bump: float,
    width: float = 1.0,
    lower: float | None = None,
    upper: float | None = None,
) -> Nonlinearity:
    """Componentwise ``rho(x) = a x^2/2 + c w^2 log cosh(x/w)``, even in z.

    ``rho'' = a + c sech^2(x/w)`` decreases from ``a + c`` at the origin to
    ``a`` at infinity, so ``B0 = (a + c) I`` and the Hessian saturates at
    ``a I``.  ``lower`` (< a) and ``upper`` (> a) set the twisting
    operators ``B1 = lower I`` and ``B2 = upper I``.
    """
    a, c, w = float(slope_inf), float(bump), float(width)
    if c <= 0 or w <= 0:
        raise PreconditionError("bump and width must be positive")
    lower = a - 0.1 * c if lower is None else lower
    upper = a + 0.05 * c if upper is None else upper
    if not lower < a < upper:
        raise PreconditionError("need lower < slope_inf < upper")
    eye = np.eye(dim)

    def value(t, Z):
        return np.sum(0.5 * a * Z**2 + c * w**2 * _logcosh(Z / w), axis=1)

    def grad(t, Z):
        return a * Z + c * w * np.tanh(Z / w)

    def hess(t, Z):
        e = np.exp(-2.0 * np.abs(Z / w))
        diag = a + c * 4.0 * e / (1.0 + e) ** 2  # sech^2 without overflow
        return diag[:, :, None] * eye[None]

    return Nonlinearity(
        value, grad, hess, dim, (a, a + c),
        B0=constant((a + c) * eye), B1=constant(lower * eye), B2=constant(upper * eye),
        even=True,
    )


def blocks_of(M: np.ndarray, d: int) -> np.ndarray:
    """Diagonal ``d x d`` blocks of a block-diagonal matrix, shape ``(n, d, d)``."""
    n = M.shape[0] // d
    if n * d != M.shape[0]:
        raise PreconditionError(f"matrix size {M.shape[0]} is not a multiple of {d}")
    return np.stack([M[j * d:(j + 1) * d, j * d:(j + 1) * d] for j in range(n)])


def _blockdiag(blocks: np.ndarray) -> np.ndarray:
    return sla.block_diag(*blocks)


def twisting_matrix(mf: MatrixFunction, nodes) -> np.ndarray:
    return _blockdiag(mf.blocks(nodes))


# ---------------------------------------------------------------------------
# epsilon shift


@dataclass(frozen=True)
class EpsCandidate:
    eps: float
    admissible: bool
    same_index: bool
    nondegenerate: bool
    positive: bool

    @property
    def ok(self) -> bool:
        return self.admissible and self.same_index and self.nondegenerate and self.positive


def default_eps_grid(delta: float) -> list[float]:
    return [delta * 2.0**-j for j in range(1, 21)]


def shift_epsilon(G: GappedOperator, B1, eps_grid: Sequence[float] | None = None):
    """First ``eps`` of the grid for which ``B1 - eps I`` keeps the index of B1.

    Conditions checked per candidate: admissibility, ``i_A(B_eps) = i_A(B1)``,
    ``nu_A(B_eps) = 0`` and ``eps^{-1} I - (A - B_eps)^{-1} > 0``.  The
    default grid ``delta * 2^-j`` (``j = 1..20``, ``delta`` the admissibility
    margin of B1) is scanned from the largest value down.

    Returns:
        ``(B_eps, eps)`` with ``B_eps`` a :class:`Perturbation`.
    """
    P1 = B1 if isinstance(B1, Perturbation) else check_admissible(G, B1)
    if nullity(G, P1) != 0:
        raise PreconditionError("shift_epsilon needs nu_A(B1) = 0")
    i1 = index_pair(G, P1).i
    grid = default_eps_grid(P1.delta) if eps_grid is None else list(eps_grid)
    eye = np.eye(G.dim)
    diagnostics = []
    for eps in grid:
        Bm = P1.B - eps * eye
        try:
            Pe = check_admissible(G, Bm)
        except PreconditionError:
            diagnostics.append(EpsCandidate(eps, False, False, False, False))
            continue
        same = index_pair(G, Pe).i == i1
        nondeg = nullity(G, Pe) == 0
        positive = False
        if nondeg:
            positive = sym.is_definite(eye / eps - np.linalg.inv(G.A - Bm))
        cand = EpsCandidate(eps, True, same, nondeg, positive)
        diagnostics.append(cand)
        if cand.ok:
            return Pe, float(eps)
    raise ShiftSearchError("no epsilon on the grid qualifies", diagnostics)


# ---------------------------------------------------------------------------
# pointwise Legendre transform


def legendre_grad_batch(nl: Nonlinearity, B_blocks, t, U, tol: float = 1e-12, max_iter: int = 100, z0=None):
    """Solve ``grad R(t_j, z_j) - B_j z_j = u_j`` for every node at once.

    Damped Newton on the strictly convex ``R_eps(t, z) - <u, z>``, with
    Armijo backtracking per node.  Convergence: ``|grad R_eps - u| <=
    tol * max(1, |u|)`` per node.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    B = np.broadcast_to(np.asarray(B_blocks, dtype=float), (len(U), nl.dim, nl.dim))
    Z = np.zeros_like(U) if z0 is None else np.array(z0, dtype=float, copy=True)

    def parts(Zc):
        val = nl.value(t, Zc) - 0.5 * np.einsum("ni,nij,nj->n", Zc, B, Zc) - np.einsum("ni,ni->n", U, Zc)
        g = nl.grad(t, Zc) - np.einsum("nij,nj->ni", B, Zc) - U
        return val, g

    scale = np.maximum(1.0, np.linalg.norm(U, axis=1))
    phi, g = parts(Z)
    for _ in range(max_iter):
        gn = np.linalg.norm(g, axis=1)
        active = gn > tol * scale
        if not np.any(active):
            return Z
        H = nl.hess(t[active], Z[active]) - B[active]
        try:
            step = -np.linalg.solve(H, g[active][..., None])[..., 0]
        except np.linalg.LinAlgError:
            lam = np.min(np.linalg.eigvalsh(H))
            raise ConvexityError("singular Hessian of R_eps in Legendre solve", lam) from None
        alpha = np.ones(int(active.sum()))
        idx = np.flatnonzero(active)
        slope = np.einsum("ni,ni->n", g[active], step)
        if np.any(slope >= 0):
            lam = float(np.min(np.linalg.eigvalsh(H)))
            raise ConvexityError(f"R_eps not convex along Newton step (lambda_min {lam:.3e})", lam)
        for _ in range(40):
            trial = Z[idx] + alpha[:, None] * step
            tval, tg = parts_sub(nl, t[idx], trial, B[idx], U[idx])
            ok = (tval <= phi[idx] + 1e-4 * alpha * slope) | (
                np.linalg.norm(tg, axis=1) < np.linalg.norm(g[idx], axis=1) * (1 - 1e-4 * alpha)
            )
            if np.all(ok):
                break
            alpha = np.where(ok, alpha, 0.5 * alpha)
        Z[idx] = Z[idx] + alpha[:, None] * step
        phi, g = parts(Z)
    gn = np.linalg.norm(g, axis=1)
    if np.any(gn > tol * scale):
        H = nl.hess(t, Z) - B
        lam = float(np.min(np.linalg.eigvalsh(H)))
        raise ConvexityError(f"Legendre Newton stagnated (residual {gn.max():.3e}, lambda_min {lam:.3e})", lam)
    return Z


def parts_sub(nl, t, Z, B, U):
    val = nl.value(t, Z) - 0.5 * np.einsum("ni,nij,nj->n", Z, B, Z) - np.einsum("ni,ni->n", U, Z)
    g = nl.grad(t, Z) - np.einsum("nij,nj->ni", B, Z) - U
    return val, g


def legendre_grad(nl: Nonlinearity, B_eps_node, t: float, u_node, tol: float = 1e-12) -> np.ndarray:
    """Single-node ``z`` with ``grad R(t, z) - B_eps z = u``, i.e. ``grad R*_eps(t, u)``."""
    z = legendre_grad_batch(nl, np.asarray(B_eps_node, dtype=float)[None], [t], np.atleast_1d(u_node)[None], tol)
    return z[0]


def conjugate_value(nl: Nonlinearity, B_blocks, t, U, Z) -> np.ndarray:
    """``R*_eps(t, u) = <u, z> - R_eps(t, z)`` at ``z = grad R*_eps(t, u)``."""
    R_eps = nl.value(t, Z) - 0.5 * np.einsum("ni,nij,nj->n", Z, B_blocks, Z)
    return np.einsum("ni,ni->n", U, Z) - R_eps


# ---------------------------------------------------------------------------
# dual functional


@dataclass
class DualProblem:
    """Discretized dual problem: operator, nonlinearity, nodes, weight, shift."""

    G: GappedOperator
    nl: Nonlinearity
    nodes: np.ndarray
    weight: float
    B_eps: np.ndarray
    B_blocks: np.ndarray = field(init=False, repr=False)
    A_eps: np.ndarray = field(init=False, repr=False)
    _lu: tuple = field(init=False, repr=False)

    def __post_init__(self):
        self.nodes = np.atleast_1d(np.asarray(self.nodes, dtype=float))
        Bm = self.B_eps.B if isinstance(self.B_eps, Perturbation) else np.asarray(self.B_eps, dtype=float)
        if Bm.shape != self.G.A.shape or len(self.nodes) * self.nl.dim != Bm.shape[0]:
            raise PreconditionError("B_eps, A, nodes and nonlinearity dimension disagree")
        self.B_eps = Bm
        self.B_blocks = blocks_of(Bm, self.nl.dim)
        self.A_eps = np.asarray(self.G.A - Bm)
        if sym.kernel_dim(self.A_eps) != 0:
            raise PreconditionError("A_eps = A - B_eps is singular")
        self._lu = sla.lu_factor(self.A_eps)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.nodes), self.nl.dim

    def solve(self, u: np.ndarray) -> np.ndarray:
        """``A_eps^{-1} u``."""
        return sla.lu_solve(self._lu, np.ravel(u))

    def inner(self, u, v) -> float:
        return float(self.weight * np.dot(np.ravel(u), np.ravel(v)))

    def norm(self, u) -> float:
        return float(np.sqrt(self.inner(u, u)))

    def legendre(self, u, tol: float = 1e-12, z0=None) -> np.ndarray:
        U = np.reshape(u, self.shape)
        return legendre_grad_batch(self.nl, self.B_blocks, self.nodes, U, tol, z0=z0)


def dual_functional(problem: DualProblem, u, tol: float = 1e-12) -> tuple[float, np.ndarray]:
    """``Psi(u)`` and its H-gradient ``grad R*_eps(u) - A_eps^{-1} u``."""
    u = np.ravel(np.asarray(u, dtype=float))
    U = u.reshape(problem.shape)
    Z = problem.legendre(U, tol)
    star = conjugate_value(problem.nl, problem.B_blocks, problem.nodes, U, Z)
    Ainv_u = problem.solve(u)
    value = problem.weight * float(np.sum(star)) - 0.5 * problem.inner(Ainv_u, u)
    return value, Z.ravel() - Ainv_u


def dual_hessian(problem: DualProblem, u) -> np.ndarray:
    """H-Hessian ``blockdiag((hess R_eps)^{-1}) - A_eps^{-1}`` at ``u``."""
    Z = problem.legendre(u)
    H = problem.nl.hess(problem.nodes, Z) - problem.B_blocks
    return _blockdiag(np.linalg.inv(H)) - np.linalg.inv(problem.A_eps)


def negative_direction(problem: DualProblem) -> tuple[float, np.ndarray]:
    """Most negative eigenpair of ``(B0 - B_eps)^{-1} - A_eps^{-1}`` (the space Z)."""
    if problem.nl.B0 is None:
        raise PreconditionError("nonlinearity carries no B0")
    B0 = twisting_matrix(problem.nl.B0, problem.nodes)
    K = np.linalg.inv(B0 - problem.B_eps) - np.linalg.inv(problem.A_eps)
    spec = sym.eig_sym(K, want_vectors=True)
    return float(spec.eigenvalues[0]), spec.eigenvectors[:, 0]


@dataclass
class DualState:
    u: np.ndarray
    psi_value: float
    grad_norm: float
    recovered_z: np.ndarray
    residual: float
    converged: bool
    n_evals: int
    history: list = field(default_factory=list)


def equation_residual(problem: DualProblem, z) -> float:
    """``||A z - grad R(., z)||_H`` over the grid."""
    Zm = np.reshape(z, problem.shape)
    r = problem.G.A @ np.ravel(z) - problem.nl.grad(problem.nodes, Zm).ravel()
    return problem.norm(r)


def coercivity_margin(problem: DualProblem) -> float:
    """``lambda_min((B2 - B_eps)^{-1} - A_eps^{-1})``; positive means Psi is coercive."""
    if problem.nl.B2 is None:
        raise PreconditionError("nonlinearity carries no B2")
    B2 = twisting_matrix(problem.nl.B2, problem.nodes)
    D = B2 - problem.B_eps
    if not sym.is_definite(D):
        raise PreconditionError("B2 - B_eps is not positive definite")
    return sym.lambda_min(np.linalg.inv(D) - np.linalg.inv(problem.A_eps))


def _default_start(problem: DualProblem) -> np.ndarray:
    lam, v = negative_direction(problem)
    if lam >= 0:
        return np.zeros(problem.A_eps.shape[0])
    v = v / problem.norm(v)
    psi0 = dual_functional(problem, np.zeros_like(v))[0]
    for amp in 10.0 ** -np.arange(0, 7):
        if dual_functional(problem, amp * v)[0] < psi0:
            return amp * v
    return 1e-6 * v


def minimize_dual(
    problem: DualProblem,
    u0=None,
    budget: int = DEFAULT_BUDGET,
    grad_tol: float = DEFAULT_GRAD_TOL,
    check_coercive: bool = True,
    polish: bool = True,
) -> DualState:
    """Minimize Psi by L-BFGS followed by a few safeguarded Newton steps.

    ``budget`` caps the number of Psi/gradient evaluations.  Convergence
    means ``||grad Psi||_H <= grad_tol * (1 + |Psi|)``.  Without ``u0`` the
    descent starts along the most negative direction of
    ``(B0 - B_eps)^{-1} - A_eps^{-1}`` so the trivial critical point is left.
    """
    if check_coercive:
        mu = coercivity_margin(problem)
        if not mu > 0:
            raise PreconditionError(f"(B2 - B_eps)^-1 - A_eps^-1 is not positive definite (lambda_min {mu:.3e})")
    u = _default_start(problem) if u0 is None else np.ravel(np.asarray(u0, dtype=float)).copy()
    w = problem.weight
    history: list[tuple[float, float]] = []
    n_evals = 0

    def fun(x):
        nonlocal n_evals
        n_evals += 1
        val, g = dual_functional(problem, x)
        history.append((val, problem.norm(g)))
        return val, w * g

    res = minimize(
        fun, u, jac=True, method="L-BFGS-B",
        options={"maxfun": max(budget, 1), "maxiter": max(budget, 1), "gtol": 1e-14, "ftol": 1e-16, "maxcor": 20},
    )
    u = res.x
    val, g = dual_functional(problem, u)
    n_evals += 1

    if polish and n_evals < budget:
        for _ in range(20):
            gnorm = problem.norm(g)
            if gnorm <= 1e-3 * grad_tol * (1.0 + abs(val)) or n_evals >= budget:
                break
            Hs = dual_hessian(problem, u)
            try:
                step = -np.linalg.solve(Hs, g)
            except np.linalg.LinAlgError:
                break
            accepted = False
            for alpha in (1.0, 0.5, 0.25, 0.125):
                trial = u + alpha * step
                tv, tg = dual_functional(problem, trial)
                n_evals += 1
                if tv <= val + 1e-12 * (1 + abs(val)) and problem.norm(tg) < gnorm:
                    u, val, g = trial, tv, tg
                    history.append((val, problem.norm(g)))
                    accepted = True
                    break
            if not accepted:
                break

    gnorm = problem.norm(g)
    z = problem.solve(u)
    return DualState(
        u=u,
        psi_value=float(val),
        grad_norm=gnorm,
        recovered_z=z,
        residual=equation_residual(problem, z),
        converged=gnorm <= grad_tol * (1.0 + abs(val)),
        n_evals=n_evals,
        history=history,
    )


# ---------------------------------------------------------------------------
# twisting conditions


@dataclass(frozen=True)
class TwistingReport:
    i0: int
    nu0: int
    i1: int
    nu1: int
    i2: int
    nu2: int
    plus_inequality: bool
    minus_inequality: bool
    structure: bool
    branch: str | None
    predicted_pairs: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def twisting_report(nl: Nonlinearity, G: GappedOperator, nodes) -> TwistingReport:
    """Index data of ``B0, B1, B2`` and which twisting inequality holds.

    ``plus_inequality``: ``i(B0) > i(B2)``; ``minus_inequality``:
    ``i(B0) + nu(B0) < i(B1)``.
    ``structure`` records the remaining requirements on ``B1, B2``:
    ``B1 <= B2``, equal indices and zero nullities.  ``predicted_pairs`` is the pair count for even R on the
    satisfied branch, 0 when none holds.
    """
    if nl.B0 is None or nl.B1 is None or nl.B2 is None:
        raise PreconditionError("twisting report needs B0, B1 and B2")
    mats = [twisting_matrix(mf, nodes) for mf in (nl.B0, nl.B1, nl.B2)]
    pairs = []
    for name, M in zip(("B0", "B1", "B2"), mats):
        try:
            pairs.append(index_pair(G, M))
        except PreconditionError as exc:
            raise type(exc)(f"{name}: {exc}") from exc
    p0, p1, p2 = pairs
    plus_ineq = p0.i > p2.i
    minus_ineq = p0.i + p0.nu < p1.i
    common = p1.i == p2.i and p1.nu == 0 and p2.nu == 0
    structure = common and sym.lambda_min(mats[2] - mats[1]) >= -sym.KERNEL_TOL
    if plus_ineq:
        branch, count = "plus", p0.i - p2.i
    elif minus_ineq:
        branch, count = "minus", p1.i - p0.i - p0.nu
    else:
        branch, count = None, 0
    return TwistingReport(
        p0.i, p0.nu, p1.i, p1.nu, p2.i, p2.nu,
        plus_ineq, minus_ineq, structure, branch, count,
    )


def build_problem(G: GappedOperator, nl: Nonlinearity, nodes, weight: float, branch: str = "plus", eps_grid=None):
    """Assemble the dual problem, reducing the minus branch to the plus branch.

    For ``branch="minus"`` the equation is rewritten as ``(-A) z = -grad R``
    and the plus machinery is applied to ``(-A, -R)``.

    Returns:
        ``(problem, eps)``.
    """
    if branch == "minus":
        G, nl = G.negated(), nl.negated()
    elif branch != "plus":
        raise PreconditionError(f"unknown branch {branch!r}")
    B1 = twisting_matrix(nl.B1, nodes)
    B_eps, eps = shift_epsilon(G, B1, eps_grid)
    return DualProblem(G, nl, nodes, weight, B_eps.B), eps
