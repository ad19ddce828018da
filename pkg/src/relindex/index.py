"""Relative index pair (i_A(B), nu_A(B)) for operators with a spectral gap.

The index is built from the dual operator

    T_{B,k} = (B - kI)^{-1} - (A - kI)^{-1},

whose Morse index m_A(B) depends on the shift k, while the relative index
i_A(B) = m_A(B) - m_A(Bbar) with Bbar = ((lambda_a + lambda_b)/2) I does
not, provided both Morse indices use the same admissible k.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import symmetric as sym
from .errors import InadmissibleError, PreconditionError, ShiftError

#: minimal relative distance between a shift and sigma(A)
SHIFT_SEPARATION = 1e-6
#: condition estimate above which A - kI or B - kI is treated as singular
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class GappedOperator:
    """Symmetric matrix ``A`` with a declared gap ``(lambda_a, lambda_b)``.

    A finite matrix has no essential spectrum, so the gap is a modelling
    attribute.  Pass ``edge_margin`` to enforce :func:`gap_hygiene` at
    construction time.
    """

    A: np.ndarray
    lambda_a: float
    lambda_b: float
    edge_margin: float | None = None
    _spectrum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "A", sym.symmetrize(self.A))
        if not self.lambda_a < self.lambda_b:
            raise PreconditionError(f"empty gap ({self.lambda_a}, {self.lambda_b})")
        object.__setattr__(self, "_spectrum", sym.eigvalsh(self.A))
        if self.edge_margin is not None and not gap_hygiene(self, self.edge_margin):
            raise PreconditionError(
                f"eigenvalue of A within {self.edge_margin} of a gap edge "
                f"({self.lambda_a}, {self.lambda_b})"
            )

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lambda_a + self.lambda_b)

    @property
    def spectrum(self) -> np.ndarray:
        return self._spectrum

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self._spectrum)))

    def negated(self) -> "GappedOperator":
        """``(-A, (-lambda_b, -lambda_a))``, the operator used by the duality identity."""
        return GappedOperator(-self.A, -self.lambda_b, -self.lambda_a)

    def bbar(self) -> np.ndarray:
        return self.midpoint * np.eye(self.dim)


def gap_hygiene(G: GappedOperator, delta_edge: float = 0.0) -> bool:
    """No eigenvalue of A in ``(a, a+d] U [b-d, b)``."""
    if delta_edge < 0:
        raise PreconditionError("delta_edge must be nonnegative")
    w = G.spectrum
    a, b = G.lambda_a, G.lambda_b
    near_a = (w > a) & (w <= a + delta_edge)
    near_b = (w >= b - delta_edge) & (w < b)
    return not bool(np.any(near_a | near_b))


@dataclass(frozen=True)
class Perturbation:
    """Admissible bounded perturbation with its admissibility margin ``delta``."""

    B: np.ndarray
    delta: float
    lambda_min: float
    lambda_max: float

    @property
    def dim(self) -> int:
        return self.B.shape[0]


@dataclass(frozen=True)
class IndexPair:
    i: int
    nu: int
    m: int
    m_bar: int
    k_used: float


def check_admissible(G: GappedOperator, B) -> Perturbation:
    """Validate ``lambda_a I < B < lambda_b I`` and return the margin."""
    if isinstance(B, Perturbation):
        B = B.B
    B = sym.symmetrize(B)
    if B.shape != G.A.shape:
        raise PreconditionError(f"B has shape {B.shape}, A has {G.A.shape}")
    w = sym.eigvalsh(B)
    lo, hi = float(w[0]), float(w[-1])
    delta = min(lo - G.lambda_a, G.lambda_b - hi)
    if not delta > 0:
        if lo - G.lambda_a <= 0:
            bound = f"lambda_min(B) = {lo:.6g} <= lambda_a = {G.lambda_a:.6g}"
        else:
            bound = f"lambda_max(B) = {hi:.6g} >= lambda_b = {G.lambda_b:.6g}"
        raise InadmissibleError(f"B is not inside the gap: {bound}")
    return Perturbation(B, float(delta), lo, hi)


def _as_perturbation(G, B) -> Perturbation:
    return B if isinstance(B, Perturbation) else check_admissible(G, B)


def _shift_ok(G: GappedOperator, k: float) -> bool:
    return float(np.min(np.abs(G.spectrum - k))) >= SHIFT_SEPARATION * (1.0 + G.norm)


def choose_shift(G: GappedOperator, *perturbations) -> float:
    """Deterministic shift with ``lambda_a <= k < lambda_min(B)``, k not in sigma(A).

    With several perturbations the shift is valid for all of them at once,
    which is what comparing Morse indices requires.  Candidate
    ``k0 = (lambda_a + lo)/2`` with ``lo`` the smallest lower spectral bound;
    if ``k0`` is too close to sigma(A) the sequence ``k0 + eta, k0 - eta,
    k0 + 2 eta, ...`` with ``eta = (lo - lambda_a)/64`` is tried.
    """
    if not perturbations:
        raise PreconditionError("choose_shift needs at least one perturbation")
    lo = min(_as_perturbation(G, B).lambda_min for B in perturbations)
    a = G.lambda_a
    k0 = max(0.5 * (a + lo), a)
    if _shift_ok(G, k0):
        return float(k0)
    eta = (lo - a) / 64.0
    for j in range(1, 64):
        for k in (k0 + j * eta, k0 - j * eta):
            if a <= k < lo and _shift_ok(G, k):
                return float(k)
    # finitely many eigenvalues: a finer lattice always contains a valid point
    for k in np.linspace(a, lo, 4097, endpoint=False):
        if _shift_ok(G, k):
            return float(k)
    raise ShiftError(f"no shift in [{a}, {lo}) avoids sigma(A)")


def shift_candidates(G: GappedOperator, *perturbations, count: int = 3) -> list[float]:
    """``count`` distinct admissible shifts spread over ``[lambda_a, lo)``.

    Targets sit at fractions ``j/(count+1)`` of the interval and are nudged
    off sigma(A) as in :func:`choose_shift`.
    """
    if not perturbations:
        raise PreconditionError("shift_candidates needs at least one perturbation")
    lo = min(_as_perturbation(G, B).lambda_min for B in perturbations)
    a = G.lambda_a
    eta = (lo - a) / (64.0 * (count + 1))
    out: list[float] = []
    for j in range(1, count + 1):
        k0 = a + j * (lo - a) / (count + 1)
        for m in range(64):
            hit = next((k for k in (k0 + m * eta, k0 - m * eta) if a <= k < lo and _shift_ok(G, k)), None)
            if hit is not None and hit not in out:
                out.append(float(hit))
                break
        else:
            raise ShiftError(f"no valid shift near k = {k0}")
    return out


def _check_shift(G: GappedOperator, P: Perturbation, k: float):
    if not (G.lambda_a <= k < P.lambda_min):
        raise PreconditionError(
            f"shift k = {k} violates lambda_a <= k < lambda_min(B) = {P.lambda_min}"
        )


def _safe_inverse(M: np.ndarray, label: str) -> np.ndarray:
    w, V = np.linalg.eigh(M)
    smallest = float(np.min(np.abs(w)))
    cond = float(np.max(np.abs(w))) / smallest if smallest > 0 else np.inf
    if cond > MAX_CONDITION:
        raise ShiftError(f"{label} is near-singular (condition estimate {cond:.3e})")
    return (V / w) @ V.T


def dual_operator(G: GappedOperator, B, k: float) -> np.ndarray:
    """``T_{B,k} = (B - kI)^{-1} - (A - kI)^{-1}``, symmetrized."""
    P = _as_perturbation(G, B)
    _check_shift(G, P, k)
    eye = np.eye(G.dim)
    T = _safe_inverse(P.B - k * eye, "B - kI") - _safe_inverse(G.A - k * eye, "A - kI")
    return sym.symmetrize(T)


def morse_index(G: GappedOperator, B, k: float) -> int:
    """``m_A(B)``: number of negative eigenvalues of ``T_{B,k}``."""
    w = sym.eigvalsh(dual_operator(G, B, k))
    return int(np.sum(w < -sym.kernel_tolerance(w)))


def nullity(G: GappedOperator, B) -> int:
    """``nu_A(B) = dim ker(A - B)``."""
    Bm = B.B if isinstance(B, Perturbation) else sym.symmetrize(B)
    return sym.kernel_dim(G.A - Bm)


def index_pair(G: GappedOperator, B, k: float | None = None) -> IndexPair:
    """Relative index pair of B with respect to A.

    ``m`` and ``m_bar`` share one shift ``k`` admissible for both B and
    Bbar; the difference ``i = m - m_bar`` is then independent of ``k``.
    """
    P = _as_perturbation(G, B)
    Pbar = check_admissible(G, G.bbar())
    if k is None:
        k = choose_shift(G, P, Pbar)
    m = morse_index(G, P, k)
    m_bar = morse_index(G, Pbar, k)
    return IndexPair(i=m - m_bar, nu=nullity(G, P), m=m, m_bar=m_bar, k_used=float(k))


def _pencil_count(G: GappedOperator, B1: np.ndarray, B2: np.ndarray) -> int:
    """Generalized eigenvalues of ``(A - B1, B2 - B1)`` in ``[0, 1)``."""
    D = B2 - B1
    dmax = sym.lambda_max(D)
    s = sym.gen_eig_definite(G.A - B1, D)
    # endpoint ties are decided with the same kernel tolerance as nu_A
    z0 = sym.kernel_tolerance(sym.eigvalsh(G.A - B1)) / dmax
    z1 = sym.kernel_tolerance(sym.eigvalsh(G.A - B2)) / dmax
    return int(np.sum((s >= -z0) & (s < 1.0 - z1)))


def crossing_sum(G: GappedOperator, B1, B2) -> int:
    """``sum_{s in [0,1)} nu_A((1-s) B1 + s B2)`` for ``B1 < B2``.

    Computed exactly as the number of eigenvalues of the definite pencil
    ``(A - B1, B2 - B1)`` in ``[0, 1)``, counted with multiplicity.
    """
    P1 = _as_perturbation(G, B1)
    P2 = _as_perturbation(G, B2)
    if not sym.is_definite(P2.B - P1.B):
        raise PreconditionError(
            f"B2 - B1 is not positive definite (lambda_min = {sym.lambda_min(P2.B - P1.B):.6g})"
        )
    return _pencil_count(G, P1.B, P2.B)


def _crossing_shift(G: GappedOperator, P: Perturbation) -> float:
    a = G.lambda_a
    top = min(G.midpoint, P.lambda_min)
    width = top - a
    k = a + 0.1 * width
    if _shift_ok(G, k):
        return float(k)
    eta = width / 64.0
    for j in range(1, 64):
        for cand in (k + j * eta, k - j * eta):
            if a < cand < top and _shift_ok(G, cand):
                return float(cand)
    raise ShiftError(f"no crossing base point in ({a}, {top}) avoids sigma(A)")


def index_via_crossings(G: GappedOperator, B, k: float | None = None) -> int:
    """Index from crossings along ``kI -> B`` minus ``dim E[k, mid)``.

    The base point ``k`` defaults to one tenth of the way from lambda_a to
    ``min(mid, lambda_min(B))``, nudged off sigma(A) like
    :func:`choose_shift`.
    """
    P = _as_perturbation(G, B)
    if k is None:
        k = _crossing_shift(G, P)
    if not (G.lambda_a < k < G.midpoint and k < P.lambda_min):
        raise PreconditionError(f"base point k = {k} outside (lambda_a, min(mid, lambda_min(B)))")
    eye = np.eye(G.dim)
    crossings = _pencil_count(G, k * eye, P.B)
    tol = sym.kernel_tolerance(G.spectrum)
    w = G.spectrum
    below_mid = int(np.sum((w >= k - tol) & (w < G.midpoint - tol)))
    return crossings - below_mid


def duality_identity_check(G: GappedOperator, B) -> tuple[int, int]:
    """Both sides of ``i_A(B) + i_{-A}(-B) + nu_A(B) = nu_A(Bbar)``."""
    P = _as_perturbation(G, B)
    Gneg = G.negated()
    ip = index_pair(G, P)
    ineg = index_pair(Gneg, -P.B)
    lhs = ip.i + ineg.i + ip.nu
    rhs = nullity(G, G.bbar())
    return lhs, rhs
