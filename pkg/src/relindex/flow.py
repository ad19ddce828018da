"""Spectral flow along one-parameter families of symmetric matrices.

Sign convention: an eigenvalue moving from negative to positive counts
+1, so ``sf = n_neg(A_0) - n_neg(A_1)`` for nonsingular endpoints and a
monotonically decreasing family has negative flow.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import symmetric as sym
from .errors import PreconditionError, ResolutionError
from .index import GappedOperator, Perturbation, check_admissible, index_pair

DEFAULT_TOL = sym.KERNEL_TOL
DEFAULT_MAX_DEPTH = 40
#: uniform seed grid for tracking; catches cancelling crossing pairs a bare
#: endpoint comparison would settle without looking
SEED_POINTS = 33
#: crossings are localized to intervals of at most this width in s
LOCALIZE_WIDTH = 1e-6


@dataclass(frozen=True)
class OperatorPath:
    """Affine (``start + s * direction``) or piecewise-linear sampled path on [0, 1].

    A sampled path is given by ordered nodes ``s_j`` (first 0, last 1) and
    matrices ``M_j``; between nodes it is linearly interpolated.
    """

    kind: Literal["affine", "sampled"]
    start: np.ndarray | None = None
    direction: np.ndarray | None = None
    nodes: tuple = ()
    matrices: tuple = ()

    @classmethod
    def affine(cls, P0, P1=None, *, direction=None) -> "OperatorPath":
        P0 = sym.symmetrize(P0)
        if direction is None:
            if P1 is None:
                raise PreconditionError("affine path needs P1 or direction")
            direction = sym.symmetrize(P1) - P0
        D = sym.symmetrize(direction)
        if D.shape != P0.shape:
            raise PreconditionError("start and direction differ in shape")
        return cls("affine", start=P0, direction=D)

    @classmethod
    def sampled(cls, nodes, matrices) -> "OperatorPath":
        s = np.asarray(nodes, dtype=float)
        if len(s) < 2 or len(s) != len(matrices):
            raise PreconditionError("sampled path needs >= 2 nodes, one matrix per node")
        if s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
            raise PreconditionError("nodes must increase strictly from 0 to 1")
        mats = tuple(sym.symmetrize(M) for M in matrices)
        if len({M.shape for M in mats}) != 1:
            raise PreconditionError("all path matrices must share one shape")
        return cls("sampled", nodes=tuple(s.tolist()), matrices=mats)

    @classmethod
    def canonical(cls, G: GappedOperator, B) -> "OperatorPath":
        """``A_s = A - (1-s) Bbar - s B``."""
        Bm = B.B if isinstance(B, Perturbation) else sym.symmetrize(B)
        Bbar = G.bbar()
        return cls.affine(G.A - Bbar, direction=Bbar - Bm)

    @property
    def dim(self) -> int:
        return (self.start if self.kind == "affine" else self.matrices[0]).shape[0]

    def at(self, s: float) -> np.ndarray:
        if self.kind == "affine":
            return self.start + s * self.direction
        nodes = self.nodes
        j = int(np.clip(np.searchsorted(nodes, s, side="right") - 1, 0, len(nodes) - 2))
        w = (s - nodes[j]) / (nodes[j + 1] - nodes[j])
        return (1.0 - w) * self.matrices[j] + w * self.matrices[j + 1]

    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        return self.at(0.0), self.at(1.0)

    def breakpoints(self) -> list[float]:
        return [0.0, 1.0] if self.kind == "affine" else list(self.nodes)

    def reversed(self) -> "OperatorPath":
        if self.kind == "affine":
            return OperatorPath.affine(self.start + self.direction, direction=-self.direction)
        nodes = [1.0 - s for s in reversed(self.nodes)]
        return OperatorPath.sampled(nodes, list(reversed(self.matrices)))

    def resampled(self, nodes) -> "OperatorPath":
        """Same family, sampled at the given increasing nodes of [0, 1]."""
        return OperatorPath.sampled(nodes, [self.at(s) for s in nodes])

    def then(self, other: "OperatorPath") -> "OperatorPath":
        """Concatenation, each piece traversed on half of [0, 1]."""
        if not np.allclose(self.at(1.0), other.at(0.0), atol=1e-12):
            raise PreconditionError("paths do not join")
        left = [0.5 * s for s in self.breakpoints()]
        right = [0.5 + 0.5 * s for s in other.breakpoints()]
        mats = [self.at(s) for s in self.breakpoints()] + [other.at(s) for s in other.breakpoints()[1:]]
        return OperatorPath.sampled(left + right[1:], mats)


@dataclass(frozen=True)
class Crossing:
    s: float
    kernel_dim: int
    sign: int


@dataclass(frozen=True)
class FlowResult:
    sf: int
    crossings: tuple = field(default_factory=tuple)
    method: str = "pencil"

    def signed_total(self) -> int:
        return sum(c.sign * c.kernel_dim for c in self.crossings)


def _group_crossings(s_values: np.ndarray, sign: int) -> tuple:
    out = []
    for s in np.sort(s_values):
        if out and abs(s - out[-1][0]) <= 1e-9 * max(1.0, abs(s)):
            out[-1][1] += 1
        else:
            out.append([float(s), 1])
    return tuple(Crossing(s, m, sign) for s, m in out)


def spectral_flow_affine(path: OperatorPath, tol: float = DEFAULT_TOL, max_depth: int = DEFAULT_MAX_DEPTH) -> FlowResult:
    """Exact spectral flow of an affine path with a definite direction.

    For ``D`` negative definite, crossings are the eigenvalues in ``[0, 1)``
    of the definite pencil ``(P0, -D)``, each with sign -1.  For ``D``
    positive definite the pencil is ``(-P0, D)`` on ``(0, 1]`` with sign +1;
    the half-open side is the one that keeps ``sf = n_neg(A_0) - n_neg(A_1)``
    at singular endpoints.  Indefinite directions fall back to tracking.
    """
    if path.kind != "affine":
        raise PreconditionError("spectral_flow_affine needs an affine path")
    P0, D = path.start, path.direction
    w = sym.eigvalsh(D)
    if w[-1] < 0:
        s = sym.gen_eig_definite(P0, -D)
        z0 = sym.kernel_tolerance(sym.eigvalsh(P0), tol) / -w[0]
        z1 = sym.kernel_tolerance(sym.eigvalsh(P0 + D), tol) / -w[0]
        hits = s[(s >= -z0) & (s < 1.0 - z1)]
        crossings = _group_crossings(np.clip(hits, 0.0, 1.0), -1)
    elif w[0] > 0:
        s = sym.gen_eig_definite(-P0, D)
        z0 = sym.kernel_tolerance(sym.eigvalsh(P0), tol) / w[-1]
        z1 = sym.kernel_tolerance(sym.eigvalsh(P0 + D), tol) / w[-1]
        hits = s[(s > z0) & (s <= 1.0 + z1)]
        crossings = _group_crossings(np.clip(hits, 0.0, 1.0), +1)
    elif np.all(np.abs(w) <= sym.kernel_tolerance(w, tol)) and sym.kernel_dim(P0, tol) == 0:
        return FlowResult(0, (), "pencil")
    else:
        return spectral_flow_tracked(path, tol, max_depth)
    return FlowResult(sum(c.sign * c.kernel_dim for c in crossings), crossings, "pencil")


class _Evaluator:
    def __init__(self, path: OperatorPath, tol: float):
        self.path = path
        self.tol = tol
        self.cache: dict[float, tuple[int, bool]] = {}

    def __call__(self, s: float) -> tuple[int, bool]:
        if s not in self.cache:
            w = sym.eigvalsh(self.path.at(s))
            band = 2.0 * sym.kernel_tolerance(w, self.tol)
            self.cache[s] = (int(np.sum(w < 0)), bool(np.any(np.abs(w) <= band)))
        return self.cache[s]

    def clean_point(self, s: float, lo: float, hi: float) -> float | None:
        """``s`` or the nearest nudge ``s +/- j (hi-lo)/64`` with no near-zero eigenvalue."""
        if not self(s)[1]:
            return s
        step = (hi - lo) / 64.0
        for j in range(1, 32):
            for cand in (s + j * step, s - j * step):
                if lo < cand < hi and not self(cand)[1]:
                    return cand
        return None


def spectral_flow_tracked(path: OperatorPath, tol: float = DEFAULT_TOL, max_depth: int = DEFAULT_MAX_DEPTH) -> FlowResult:
    """Spectral flow by adaptive bisection of negative-eigenvalue counts.

    An interval is settled when both ends are clean (no eigenvalue within
    ``2 tol`` of zero) and carry equal counts.  The search starts from the
    path breakpoints merged with a uniform seed grid.  Intervals whose counts
    differ are bisected until narrower than ``LOCALIZE_WIDTH``; interior
    split points sitting on a near-zero eigenvalue are nudged.  The flow is
    the telescoped count change.
    """
    ev = _Evaluator(path, tol)
    for s in (0.0, 1.0):
        if ev(s)[1]:
            raise PreconditionError(f"path endpoint s={s} is numerically singular")

    bps = sorted(set(path.breakpoints()) | set(np.linspace(0.0, 1.0, SEED_POINTS).tolist()))
    points = [0.0]
    for lo, s, hi in zip(bps[:-2], bps[1:-1], bps[2:]):
        c = ev.clean_point(s, lo, hi)
        if c is None:
            raise ResolutionError(f"no clean evaluation point near node s={s}", (lo, hi))
        points.append(c)
    points.append(1.0)

    crossings: list[Crossing] = []

    def resolve(a: float, b: float, depth: int):
        na, nb = ev(a)[0], ev(b)[0]
        if na == nb:
            return
        m = None
        if (b - a) > LOCALIZE_WIDTH:
            if depth >= max_depth:
                raise ResolutionError(f"unresolved interval [{a:.17g}, {b:.17g}] at depth {depth}", (a, b))
            m = ev.clean_point(0.5 * (a + b), a, b)
        if m is None:
            # ends are clean, so the count change is unambiguous at this resolution
            crossings.append(Crossing(0.5 * (a + b), abs(na - nb), 1 if na > nb else -1))
            return
        resolve(a, m, depth + 1)
        resolve(m, b, depth + 1)

    for a, b in zip(points[:-1], points[1:]):
        resolve(a, b, 0)

    sf = ev(0.0)[0] - ev(1.0)[0]
    crossings.sort(key=lambda c: c.s)
    return FlowResult(sf, tuple(crossings), "tracking")


def spectral_flow(path: OperatorPath, tol: float = DEFAULT_TOL, max_depth: int = DEFAULT_MAX_DEPTH) -> FlowResult:
    """Dispatch: exact pencil route for affine paths, tracking otherwise."""
    if path.kind == "affine":
        return spectral_flow_affine(path, tol, max_depth)
    return spectral_flow_tracked(path, tol, max_depth)


@dataclass(frozen=True)
class SfCheck:
    sf: int
    minus_i: int
    method: str

    def __iter__(self):
        return iter((self.sf, self.minus_i))


def verify_sf_index(G: GappedOperator, B, tol: float = DEFAULT_TOL) -> SfCheck:
    """Spectral flow of the canonical path next to ``-i_A(B)``.

    When an endpoint of the canonical path is singular and the direction is
    indefinite, the flow is obtained by the concatenation
    ``Bbar -> B' = Bbar -> B - (B -> B')`` with ``B' = c I`` above both B
    and Bbar; both legs then have definite directions.  The route taken is
    reported in ``method``.
    """
    P = B if isinstance(B, Perturbation) else check_admissible(G, B)
    minus_i = -index_pair(G, P).i
    path = OperatorPath.canonical(G, P)
    w = sym.eigvalsh(path.direction)
    definite = w[-1] < 0 or w[0] > 0
    singular = any(sym.kernel_dim(M, tol) for M in path.endpoints())
    if definite or not singular:
        res = spectral_flow(path, tol)
        return SfCheck(res.sf, minus_i, res.method)
    c = 0.5 * (max(P.lambda_max, G.midpoint) + G.lambda_b)
    Bp = c * np.eye(G.dim)
    leg3 = spectral_flow_affine(OperatorPath.affine(G.A - G.bbar(), G.A - Bp), tol)
    leg2 = spectral_flow_affine(OperatorPath.affine(G.A - P.B, G.A - Bp), tol)
    return SfCheck(leg3.sf - leg2.sf, minus_i, "concatenation")
