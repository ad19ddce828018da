"""Random gapped operators and admissible perturbations for property sweeps.

Cases are generated with spectra kept away from the numerical tie points
(crossings at path endpoints, eigenvalues on the gap midpoint) so that the
integer identities are decided far from every tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import ortho_group

from . import symmetric as sym
from .index import GappedOperator, check_admissible

#: minimal |eigenvalue| separation from numerical tie points
SEPARATION = 1e-3


def random_orthogonal(rng: np.random.Generator, dim: int) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0]])
    return ortho_group.rvs(dim, random_state=rng)


def random_symmetric(rng, dim: int, eigenvalues) -> np.ndarray:
    Q = random_orthogonal(rng, dim)
    return sym.symmetrize((Q * np.asarray(eigenvalues, dtype=float)) @ Q.T)


@dataclass(frozen=True)
class GapCase:
    G: GappedOperator
    B: np.ndarray


def random_gap(rng) -> tuple[float, float]:
    a = float(rng.uniform(-3.0, 1.0))
    return a, a + float(rng.uniform(1.0, 4.0))


def random_gapped_operator(
    rng,
    dim: int,
    gap: tuple[float, float] | None = None,
    edge: float = 0.05,
    n_inside: int | None = None,
) -> GappedOperator:
    """A with ``n_inside`` eigenvalues inside the gap, the rest outside it.

    ``gap_hygiene(G, edge)`` holds by construction.  Eigenvalues outside
    the gap play the role of the essential spectrum.
    """
    a, b = gap if gap is not None else random_gap(rng)
    if n_inside is None:
        n_inside = int(rng.integers(0, dim + 1))
    n_inside = min(n_inside, dim)
    inside = rng.uniform(a + edge, b - edge, size=n_inside)
    n_out = dim - n_inside
    below = rng.uniform(a - 3.0, a - edge, size=n_out)
    above = rng.uniform(b + edge, b + 3.0, size=n_out)
    outside = np.where(rng.random(n_out) < 0.5, below, above)
    w = np.concatenate([inside, outside])
    return GappedOperator(random_symmetric(rng, dim, w), a, b, edge_margin=edge)


def random_perturbation(rng, G: GappedOperator, lo: float | None = None, hi: float | None = None):
    """Symmetric B with spectrum uniformly inside ``(lo, hi)`` (default: 90% of the gap)."""
    a, b = G.lambda_a, G.lambda_b
    pad = 0.05 * (b - a)
    lo = a + pad if lo is None else lo
    hi = b - pad if hi is None else hi
    w = rng.uniform(lo, hi, size=G.dim)
    return random_symmetric(rng, G.dim, w)


def _well_separated(G: GappedOperator, *Bs) -> bool:
    mats = [G.A - G.bbar()] + [G.A - B for B in Bs]
    return all(np.min(np.abs(sym.eigvalsh(M))) > SEPARATION for M in mats)


def random_case(rng, dim_min: int = 2, dim_max: int = 40, degenerate: bool = False) -> GapCase:
    """One admissible (G, B) pair; ``degenerate`` empties sigma(A) in the gap."""
    while True:
        dim = int(rng.integers(dim_min, dim_max + 1))
        G = random_gapped_operator(rng, dim, n_inside=0 if degenerate else None)
        B = random_perturbation(rng, G)
        if _well_separated(G, B):
            check_admissible(G, B)
            return GapCase(G, B)


def random_ordered_pair(rng, dim_min: int = 2, dim_max: int = 40):
    """``(G, B1, B2)`` with ``B1 < B2`` (positive definite difference), both admissible."""
    while True:
        dim = int(rng.integers(dim_min, dim_max + 1))
        G = random_gapped_operator(rng, dim)
        a, b = G.lambda_a, G.lambda_b
        width = b - a
        B1 = random_perturbation(rng, G, a + 0.05 * width, a + 0.55 * width)
        step = random_symmetric(rng, dim, rng.uniform(0.05 * width, 0.35 * width, size=dim))
        B2 = B1 + step
        if sym.lambda_max(B2) >= b - 0.02 * width:
            continue
        if _well_separated(G, B1, B2):
            return G, sym.symmetrize(B1), sym.symmetrize(B2)


def case_with_kernel(rng, dim: int, multiplicity: int = 1) -> GapCase:
    """Admissible pair whose ``A - B`` has an engineered kernel of given dimension.

    B agrees with A on ``multiplicity`` gap eigenvectors and sits strictly
    away from A on the complement.
    """
    a, b = -1.0, 1.0
    inside = np.linspace(-0.6, 0.6, dim)
    Q = random_orthogonal(rng, dim)
    A = (Q * inside) @ Q.T
    wb = inside.copy()
    wb[multiplicity:] = np.clip(inside[multiplicity:] + 0.3, -0.9, 0.9)
    wb[multiplicity:] = np.where(
        np.abs(wb[multiplicity:] - inside[multiplicity:]) < 0.1, inside[multiplicity:] - 0.3, wb[multiplicity:]
    )
    B = (Q * wb) @ Q.T
    return GapCase(GappedOperator(A, a, b), sym.symmetrize(B))
