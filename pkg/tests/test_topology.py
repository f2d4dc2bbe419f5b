import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from magorbit.errors import HypothesisViolationError
from magorbit.topology import (CATALOG, BettiVector, MorseBottCensus, betti, check_morse_bott,
                               predict_bound, predict_bound_for, product_betti,
                               sphere_betti, sphere_bundle_betti, sum_betti, summed_conclusion,
                               torus_betti, torus_split, total_space_betti, twisted_matrix)


def test_sum_betti_examples():
    assert sum_betti(torus_betti(2)) == 4
    assert sum_betti(sphere_betti(2)) == 2
    assert sum_betti(betti(1)) == 1
    assert sum_betti(torus_betti(4)) == 16


def test_catalog_duality_and_euler():
    for name, (b, _, _) in CATALOG.items():
        assert b.satisfies_duality(), name
    assert CATALOG["S2"][0].euler == 2 and CATALOG["T2"][0].euler == 0


def test_betti_validation():
    with pytest.raises(ValueError):
        BettiVector((1, -1, 1), 2)
    with pytest.raises(ValueError):
        BettiVector((1, 1), 2)


def test_sphere_bundle_formula():
    s2 = sphere_betti(2)
    E = sphere_bundle_betti(s2, 2)
    assert E.betti == (1, 0, 0, 1)
    assert sphere_bundle_betti(CATALOG["CP1"][0]) == E
    # equality case: SB(E) = 2 SB(M) - (beta_0 + beta_n) for a connected base
    assert sum_betti(E) == 2 * sum_betti(s2) - (s2[0] + s2[2])
    with pytest.raises(HypothesisViolationError):
        sphere_bundle_betti(torus_betti(2))
    with pytest.raises(ValueError):
        sphere_bundle_betti(s2, 3)


@given(st.integers(1, 3).flatmap(lambda m: st.tuples(
    st.just(2 * m), st.lists(st.integers(0, 5), min_size=m, max_size=m))))
def test_sphere_bundle_sum_property(data):
    # even dimension, Poincare-dual Betti vector with beta_0 = beta_n = 1, nonzero Euler number
    n, inner = data
    half = [1] + inner
    b = half + half[-2::-1]
    base = BettiVector(tuple(b), n)
    if base.euler == 0:
        return
    E = sphere_bundle_betti(base)
    assert E.dim == 2 * n - 1
    assert sum_betti(E) == 2 * sum_betti(base) - 2
    assert sum_betti(E) / 2 + 1 >= sum_betti(base)


def test_total_space_of_tori_is_product():
    assert total_space_betti("T2").betti == (1, 3, 3, 1)
    assert sum_betti(total_space_betti("T4")) == 16 * 2
    assert product_betti(betti(1, 1), betti(1, 1)).betti == (1, 2, 1)


def test_morse_bott_examples():
    E = sphere_bundle_betti(sphere_betti(2))
    v = check_morse_bott(MorseBottCensus((1, 0, 1, 0)), E)
    assert v.passed and all(s >= 0 for s in v.basic_slack)
    assert v.conclusion_slack == 0
    perfect = check_morse_bott(MorseBottCensus(E.betti), E)
    assert perfect.passed
    bad = check_morse_bott(MorseBottCensus((0, 0, 0, 0)), E)
    assert not bad.passed and bad.first_failure.startswith("mu_0")
    with pytest.raises(ValueError):
        check_morse_bott(MorseBottCensus((1, 0, 1)), E)


@given(st.lists(st.integers(0, 4), min_size=4, max_size=4))
def test_summed_inequality_follows_from_basic(mu):
    # the summed conclusion is implied by the individual inequalities
    E = sphere_bundle_betti(sphere_betti(2))
    v = check_morse_bott(MorseBottCensus(tuple(mu)), E)
    if v.passed:
        assert v.summed_slack >= -1e-12
        assert summed_conclusion(sum(mu), E, trivial_bundle=False)[1] == (v.conclusion_slack >= 0)


def test_bound_examples():
    t2 = predict_bound_for("T2")
    assert (t2.branch, t2.predicted_min_orbits, t2.cup_length_bound) == ("trivial-bundle", 4, 3)
    s2 = predict_bound_for("S2")
    assert s2.branch == "nontrivial-bundle" and s2.predicted_min_orbits == 2
    assert s2.general_branch_bound == 2 == s2.sb_base
    t4 = predict_bound_for("T4")
    assert t4.predicted_min_orbits == 17 and t4.cup_length_bound == 6
    assert t4.as_dict()["conjectural_bound_unproven"] == 32
    anon = predict_bound(torus_betti(2), 2, True)
    assert anon.cup_length_bound is None and anon.notes
    odd = predict_bound_for("T3")
    assert odd.predicted_min_orbits is None and odd.branch == "not-applicable"


def test_bound_depends_only_on_betti_data():
    assert predict_bound_for("CP1").as_dict() | {"manifold": "S2"} == predict_bound_for("S2").as_dict()


def _check_split(a, split):
    om = twisted_matrix(a)
    assert split.congruence_residual() <= 1e-12
    B = split.basis_change
    assert np.allclose(B.T @ om @ B, split.block_form, atol=1e-12)
    k, n = split.k, split.n
    assert 2 * k == np.linalg.matrix_rank(np.asarray(a, float))
    blk = split.block_form
    std = np.block([[np.zeros((k, k)), np.eye(k)], [-np.eye(k), np.zeros((k, k))]])
    assert np.allclose(blk[:2 * k, :2 * k], std, atol=1e-12)
    assert np.allclose(blk[:2 * k, 2 * k:], 0, atol=1e-12)
    # lattice directions are the first columns of the second factor
    assert np.array_equal(B[:, 2 * k:2 * k + n], np.eye(2 * n)[:, :n])
    assert abs(np.linalg.det(B)) > 1e-9
    assert abs(np.linalg.det(blk[2 * k:, 2 * k:])) > 1e-12


def test_split_examples():
    a = np.zeros((3, 3), dtype=int)
    a[0, 1], a[1, 0] = 1, -1
    s = torus_split(a, 3)
    assert s.k == 1 and s.w1_dim == 4 and s.exact
    _check_split(a, s)
    z = torus_split(np.zeros((2, 2)))
    assert z.k == 0 and np.array_equal(z.basis_change, np.eye(4))
    r = np.array([[0, 2, -1, 3], [-2, 0, 1, 1], [1, -1, 0, 4], [-3, -1, -4, 0]])
    s4 = torus_split(r)
    assert s4.k == 2
    _check_split(r, s4)
    with pytest.raises(ValueError):
        torus_split([[0, 1], [1, 0]])


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 5).flatmap(lambda n: st.lists(
    st.integers(-3, 3), min_size=n * (n - 1) // 2, max_size=n * (n - 1) // 2).map(
    lambda v: (n, v))))
def test_split_random_integer_matrices(data):
    n, vals = data
    a = np.zeros((n, n), dtype=int)
    a[np.triu_indices(n, 1)] = vals
    a = a - a.T
    _check_split(a, torus_split(a))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2, allow_nan=False), min_size=6, max_size=6))
def test_split_random_real_matrices(vals):
    a = np.zeros((4, 4))
    a[np.triu_indices(4, 1)] = vals
    a = a - a.T
    if np.linalg.svd(a, compute_uv=False)[-1] < 1e-3 and np.linalg.matrix_rank(a, 1e-6) != np.linalg.matrix_rank(a):
        return
    s = torus_split(a)
    assert s.congruence_residual() <= 1e-12
