import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relindex import symmetric as sym
from relindex.errors import InadmissibleError, PreconditionError
from relindex.index import (
    GappedOperator,
    check_admissible,
    choose_shift,
    crossing_sum,
    dual_operator,
    duality_identity_check,
    gap_hygiene,
    index_pair,
    index_via_crossings,
    morse_index,
    nullity,
    shift_candidates,
)
from relindex.sampling import case_with_kernel, random_case, random_ordered_pair

import oracles


@pytest.fixture
def scalar():
    return GappedOperator(np.diag([0.5]), -1.0, 1.0)


def test_check_admissible_margins(scalar):
    assert check_admissible(scalar, np.zeros((1, 1))).delta == pytest.approx(1.0)
    assert check_admissible(scalar, np.diag([0.95])).delta == pytest.approx(0.05)
    with pytest.raises(InadmissibleError, match="lambda_max"):
        check_admissible(scalar, np.diag([1.2]))
    with pytest.raises(InadmissibleError, match="lambda_min"):
        check_admissible(scalar, np.diag([-1.0]))


def test_gap_hygiene():
    G = GappedOperator(np.diag([-2.0, 0.97, 0.2]), -1.0, 1.0)
    assert gap_hygiene(G, 0.01)
    assert not gap_hygiene(G, 0.05)
    with pytest.raises(PreconditionError):
        GappedOperator(np.diag([0.97]), -1.0, 1.0, edge_margin=0.05)


def test_choose_shift_midpoint_rule(scalar):
    assert choose_shift(scalar, np.zeros((1, 1))) == pytest.approx(-0.5)


def test_choose_shift_interval(rng):
    G = GappedOperator(np.diag([-0.95, 0.3]), -1.0, 1.0)
    B = np.diag([-0.9, 0.5])
    k = choose_shift(G, B)
    assert -1.0 <= k < -0.9
    assert np.min(np.abs(G.spectrum - k)) >= 1e-6 * (1 + G.norm)


def test_choose_shift_nudges_off_spectrum():
    # eigenvalue sitting exactly on the candidate -0.5
    G = GappedOperator(np.diag([-0.5, 0.2]), -1.0, 1.0)
    k = choose_shift(G, np.zeros((2, 2)))
    eta = 1.0 / 64
    assert k == pytest.approx(-0.5 + eta)


def test_dual_operator_scalar(scalar):
    T = dual_operator(scalar, np.diag([0.8]), -0.5)
    assert T[0, 0] == pytest.approx(1 / 1.3 - 1)
    assert dual_operator(scalar, np.zeros((1, 1)), -0.5)[0, 0] == pytest.approx(1.0)


def test_dual_operator_symmetric(rng):
    c = random_case(rng)
    T = dual_operator(c.G, c.B, choose_shift(c.G, c.B))
    assert np.array_equal(T, T.T)


def test_dual_operator_rejects_bad_shift(scalar):
    with pytest.raises(PreconditionError):
        dual_operator(scalar, np.diag([0.0]), 0.1)


def test_index_pair_examples(scalar):
    assert index_pair(scalar, scalar.bbar()).i == 0
    p = index_pair(scalar, np.diag([0.8]))
    assert (p.i, p.nu, p.m - p.m_bar) == (1, 0, 1)
    assert index_pair(scalar, np.diag([0.5])).nu == 1


def test_crossing_sum_examples(scalar):
    assert crossing_sum(scalar, np.zeros((1, 1)), np.diag([0.8])) == 1
    assert crossing_sum(scalar, np.zeros((1, 1)), np.diag([0.3])) == 0
    with pytest.raises(PreconditionError):
        crossing_sum(scalar, np.diag([0.3]), np.diag([0.2]))


def test_crossing_sum_half_open_ends(scalar):
    # crossing exactly at s = 0 counts, exactly at s = 1 does not
    assert crossing_sum(scalar, np.diag([0.5]), np.diag([0.9])) == 1
    assert crossing_sum(scalar, np.diag([0.1]), np.diag([0.5])) == 0


def test_index_via_crossings_examples(scalar):
    assert index_via_crossings(scalar, scalar.bbar()) == 0
    assert index_via_crossings(scalar, np.diag([0.8])) == 1
    assert index_via_crossings(scalar, np.diag([0.8]), k=-0.9) == 1


def test_duality_examples(scalar):
    assert duality_identity_check(scalar, scalar.bbar()) == (0, 0)
    assert index_pair(scalar.negated(), np.diag([-0.8])).i == -1
    assert duality_identity_check(scalar, np.diag([0.8])) == (0, 0)


def test_duality_with_midpoint_eigenvalue():
    G = GappedOperator(np.diag([0.0, 0.4]), -1.0, 1.0)
    lhs, rhs = duality_identity_check(G, np.diag([0.2, -0.3]))
    assert lhs == rhs == 1


def test_index_matches_schur_oracle(rng):
    for _ in range(60):
        c = random_case(rng)
        ref = oracles.schur_index(c.G.A, c.B, c.G.lambda_a, c.G.lambda_b)
        assert index_pair(c.G, c.B).i == ref


def test_shift_independence(rng):
    for _ in range(10):
        c = random_case(rng, 2, 25)
        P = check_admissible(c.G, c.B)
        Pbar = check_admissible(c.G, c.G.bbar())
        ks = shift_candidates(c.G, P, Pbar, count=20)
        assert len(set(ks)) == 20
        pairs = {(index_pair(c.G, P, k).i, index_pair(c.G, P, k).nu) for k in ks}
        assert len(pairs) == 1


def test_engineered_kernel(rng):
    for mult in (1, 2, 3):
        c = case_with_kernel(rng, 8, mult)
        assert nullity(c.G, c.B) == mult
        k = choose_shift(c.G, c.B)
        assert sym.kernel_dim(dual_operator(c.G, c.B, k)) == mult
        lhs, rhs = duality_identity_check(c.G, c.B)
        assert lhs == rhs


def test_monotonicity_and_crossing_formula(rng):
    for _ in range(30):
        G, B1, B2 = random_ordered_pair(rng, 2, 30)
        i1, i2 = index_pair(G, B1).i, index_pair(G, B2).i
        assert i2 - i1 == crossing_sum(G, B1, B2) >= 0
        for k in shift_candidates(G, B1, B2, count=3):
            assert morse_index(G, B2, k) - morse_index(G, B1, k) == i2 - i1


def test_degenerate_gap_gives_zero(rng):
    for _ in range(20):
        c = random_case(rng, degenerate=True)
        p = index_pair(c.G, c.B)
        assert (p.i, p.nu) == (0, 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_definitions_agree(seed):
    c = random_case(np.random.default_rng(seed), 2, 20)
    assert index_pair(c.G, c.B).i == index_via_crossings(c.G, c.B)
    lhs, rhs = duality_identity_check(c.G, c.B)
    assert lhs == rhs
