import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from relindex import symmetric as sym
from relindex.errors import ModelError
from relindex.index import GappedOperator, check_admissible
from relindex.models import (
    Grid1D,
    MatrixFunction,
    constant,
    count_in_window,
    dirac1d_operator,
    example_L,
    hamiltonian_operator,
    multiplication_operator,
    potential_well_V,
    radial_first_eigenvalue,
    rayleigh_witness,
    symplectic_J,
    tent_closed_forms,
    tent_profile,
)


def _grid(T, h, comp=2):
    return Grid1D(T, int(round(2 * T / h)) - 1, comp)


def test_grid_invariants():
    g = Grid1D(6.0, 2015)
    assert g.h * (g.n + 1) == pytest.approx(12.0)
    assert g.nodes[0] == pytest.approx(-6 + g.h)
    assert g.nodes[-1] == pytest.approx(6 - g.h)
    with pytest.raises(ModelError):
        Grid1D(1.0, 2)
    with pytest.raises(ModelError):
        Grid1D(-1.0, 10)


def test_symplectic_J():
    J = symplectic_J(2)
    assert np.array_equal(J.T, -J)
    assert np.array_equal(J @ J, -np.eye(4))


def test_hamiltonian_zero_L_symmetric_spectrum():
    g = Grid1D(2.0, 15, 4)
    A = hamiltonian_operator(constant(np.zeros((4, 4))), g, 2)
    assert np.array_equal(A, A.T)
    w = sym.eigvalsh(A)
    assert np.allclose(w, -w[::-1], atol=1e-12)


def test_hamiltonian_periodic_fourier_symbol():
    b, g = 0.7, Grid1D(3.0, 64, 2)
    L = constant(np.array([[0.0, b], [b, 0.0]]))
    A = hamiltonian_operator(L, g, 1, boundary="periodic")
    # symbol of the periodic central difference is i sin(xi h)/h
    sig = np.sin(2 * np.pi * np.arange(g.n) / g.n) / g.h
    band = np.sqrt(sig**2 + b**2)
    assert np.allclose(sym.eigvalsh(A), np.sort(np.concatenate([band, -band])), atol=1e-10)


def test_hamiltonian_symbol_second_order_on_resolved_modes():
    b = 0.7
    errs = []
    for n in (64, 128, 256):
        g = Grid1D(3.0, n, 2)
        A = hamiltonian_operator(constant(np.array([[0.0, b], [b, 0.0]])), g, 1, boundary="periodic")
        xi = 2 * np.pi * 3 / (n * g.h)  # fixed physical wavenumber, mode k = 3
        lam = np.sqrt(xi**2 + b**2)
        w = sym.eigvalsh(A)
        errs.append(np.min(np.abs(w - lam)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_hamiltonian_rejects_asymmetric_L():
    g = Grid1D(1.0, 9, 2)
    bad = MatrixFunction(lambda t: np.array([[0.0, 1.0], [0.0, 0.0]]), 2, (-1, 1))
    with pytest.raises(ModelError, match="asymmetry"):
        hamiltonian_operator(bad, g, 1)
    with pytest.raises(ModelError):
        hamiltonian_operator(constant(np.zeros((2, 2))), Grid1D(1.0, 9, 4), 1)


def test_example_L_values():
    L = example_L(1.0, 2.0, 3.0)
    assert np.array_equal(L(0.0), np.zeros((2, 2)))
    assert np.allclose(np.linalg.eigvalsh(L(2.5)), [-3.0, 3.0])
    assert np.allclose(np.linalg.eigvalsh(L(-2.0)), [-3.0, 3.0])
    assert L(1.5)[0, 1] == pytest.approx(1.5)
    assert L.spot_check(Grid1D(6.0, 500).nodes)
    with pytest.raises(ModelError):
        example_L(2.0, 1.0, 3.0)
    with pytest.raises(ModelError):
        example_L(1.0, 2.0, 0.0)


def test_example_L_blocks_for_larger_N():
    L = example_L(1.0, 2.0, 3.0, N=2)
    assert L.dim == 4
    assert np.allclose(L(3.0)[:2, 2:], 3.0 * np.eye(2))


def test_tent_profile_and_closed_forms():
    t = np.array([-2.0, -0.75, 0.0, 0.3, 0.9])
    assert np.allclose(tent_profile(t, 0.5, 1.0), [0.0, 0.5, 1.0, 1.0, 0.2])
    num, den = tent_closed_forms(0.5, 1.0)
    # check the closed forms by fine quadrature of f and f'
    x = np.linspace(-1.5, 1.5, 600001)
    f = tent_profile(x, 0.5, 1.0)
    assert trapezoid(f**2, x) == pytest.approx(den, rel=1e-8)
    assert trapezoid(np.gradient(f, x) ** 2, x) == pytest.approx(num, rel=1e-3)


def test_rayleigh_witness_converges_to_closed_forms():
    exact_num, exact_den = tent_closed_forms(0.5, 1.0)
    vals = [rayleigh_witness(0.5, 1.0, _grid(1.5, h)) for h in (1 / 32, 1 / 64, 1 / 128)]
    num_err = [abs(v[0] - exact_num) for v in vals]
    den_err = [abs(v[1] - exact_den) for v in vals]
    # kinks of the profile make the difference quotient first order
    assert num_err[0] / num_err[1] == pytest.approx(2.0, rel=0.05)
    assert num_err[1] / num_err[2] == pytest.approx(2.0, rel=0.05)
    assert den_err[0] / den_err[1] == pytest.approx(4.0, rel=0.1)
    assert den_err[1] / den_err[2] == pytest.approx(4.0, rel=0.1)


def test_rayleigh_witness_preconditions():
    with pytest.raises(ModelError):
        rayleigh_witness(1.0, 0.5, Grid1D(2.0, 99))
    with pytest.raises(ModelError):
        rayleigh_witness(0.5, 3.0, Grid1D(2.0, 99))


def test_gap_pair_second_order_and_truncation():
    L = example_L(1.0, 2.0, 3.0)
    means = []
    for h in (1 / 32, 1 / 64, 1 / 128):
        w = sym.eigvals_in(hamiltonian_operator(L, _grid(3.0, h), 1), 0.0, 1.0)
        assert len(w) == 2  # physical mode and its central-difference partner
        means.append(w.mean())
    d = np.diff(means)
    assert d[0] / d[1] == pytest.approx(4.0, rel=0.05)
    w6 = sym.eigvals_in(hamiltonian_operator(L, _grid(6.0, 1 / 32), 1), 0.0, 1.0)
    assert w6.mean() == pytest.approx(means[0], rel=1e-2)


def test_outer_density_grows_with_n():
    L = example_L(1.0, 2.0, 3.0)
    counts = []
    for n in (100, 200):
        A = hamiltonian_operator(L, Grid1D(6.0, n), 1)
        w = sym.eigvalsh(A)
        counts.append(int(np.sum(np.abs(w) >= 3.0)))
    assert counts[1] > counts[0]


def test_multiplication_operator(rng):
    g = Grid1D(1.0, 7, 2)
    assert np.array_equal(multiplication_operator(constant(0.3 * np.eye(2)), g), 0.3 * np.eye(14))
    Bf = MatrixFunction(lambda t: np.array([[t, 0.1], [0.1, -t]]), 2, (-1.1, 1.1))
    M = multiplication_operator(Bf, g)
    blocks = np.concatenate([np.linalg.eigvalsh(Bf(t)) for t in g.nodes])
    assert np.allclose(sym.eigvalsh(M), np.sort(blocks))
    G = GappedOperator(np.zeros((14, 14)), -2.0, 2.0)
    check_admissible(G, M)
    with pytest.raises(ModelError):
        multiplication_operator(Bf, Grid1D(1.0, 7, 4))


def test_potential_well():
    V = potential_well_V(1.0, 3.0)
    assert V(0.0) == 0.0 and V(0.99) == 0.0
    assert V(2.5) == 3.0 and V(-7.0) == 3.0
    x = np.linspace(0, 3, 301)
    assert np.all(np.diff(V(x)) >= 0)
    with pytest.raises(ModelError):
        potential_well_V(0.0, 1.0)


def test_dirac_constant_mass_periodic_symbol():
    m, g = 0.8, Grid1D(3.0, 48, 4)
    M = dirac1d_operator(lambda x: m * np.ones_like(x), g, boundary="periodic")
    sig = np.sin(2 * np.pi * np.arange(g.n) / g.n) / g.h
    band = np.sqrt(sig**2 + m**2)
    ref = np.sort(np.concatenate([band, -band, band, -band]))
    assert np.allclose(sym.eigvalsh(M), ref, atol=1e-10)
    assert np.min(np.abs(sym.eigvalsh(M))) == pytest.approx(m)


def test_dirac_zero_potential_and_doubling():
    g = Grid1D(2.0, 31, 4)
    M = dirac1d_operator(lambda x: np.zeros_like(x), g)
    assert np.array_equal(M, M.T)
    w = sym.eigvalsh(M)
    assert np.allclose(w, -w[::-1], atol=1e-12)
    W = sym.eigvalsh(dirac1d_operator(potential_well_V(0.5, 3.0), g))
    assert np.allclose(W[0::2], W[1::2], atol=1e-10)


def test_radial_first_eigenvalue():
    assert radial_first_eigenvalue(math.pi, 2000) == pytest.approx(1.0, rel=1e-5)
    assert radial_first_eigenvalue(1.0, 2000) == pytest.approx(math.pi**2, rel=1e-2)
    assert radial_first_eigenvalue(2.0, 500) == pytest.approx(radial_first_eigenvalue(1.0, 500) / 4, rel=1e-12)
    with pytest.raises(ModelError):
        radial_first_eigenvalue(1.0, 50)


def test_count_in_window():
    assert count_in_window(np.diag([-2.0, -0.5, 0.1, 0.9, 3.0]), -1.0, 1.0) == 3
