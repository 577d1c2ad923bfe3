import itertools
import math

import numpy as np
import pytest

from regdecomp import (
    EXACT,
    INF,
    BudgetExceeded,
    Heuristic,
    Measure,
    PreconditionError,
    SeminormFamily,
    StepTensor,
    best_response,
    cut_norm,
    family_membership,
    lp_norm,
    ones,
    operator_norm,
    r_seminorm,
    rank1,
    zeros,
)
from regdecomp.seminorms import exact_values_batch, operator_norm_search

CHECKER = StepTensor([[1.0, -1.0], [-1.0, 1.0]])


def brute_force(a: StepTensor, values):
    """sup |<a, f_1 ⊗ ... ⊗ f_l>| over every choice of factors from ``values``."""
    n, l = a.resolution, a.order
    vecs = [np.array(v, dtype=float) for v in itertools.product(values, repeat=n)]
    best = 0.0
    for combo in itertools.product(vecs, repeat=l):
        r = combo[0]
        for f in combo[1:]:
            r = np.multiply.outer(r, f)
        best = max(best, abs(float(np.sum(a.values * r))) * a.weight)
    return best


def test_cut_examples():
    assert cut_norm(CHECKER) == 0.25
    assert cut_norm(ones(2, 5)) == 1.0
    res = best_response(SeminormFamily.cut(5), ones(2, 5))
    assert np.array_equal(res.witness.values, np.ones((5, 5)))


def test_sign_example_and_witness():
    res = best_response(SeminormFamily.sign(2, 2), CHECKER)
    assert res.value == 1.0
    assert abs(res.witness.values).min() == 1.0
    assert np.array_equal(np.abs(res.witness.values * CHECKER.values), np.ones((2, 2)))
    assert brute_force(CHECKER, (-1, 1)) == 1.0


def test_zero_tensor():
    for fam in (SeminormFamily.cut(3), SeminormFamily.sign(2, 3), SeminormFamily.rectangle(3, 3),
                SeminormFamily.holder(1, 2, 3), SeminormFamily.holder(INF, 2, 3)):
        assert r_seminorm(fam, zeros(fam.order, 3)) == 0.0


@pytest.mark.parametrize("order,n", [(2, 2), (2, 3), (2, 4), (3, 2), (3, 3)])
@pytest.mark.parametrize("measure", list(Measure))
def test_exact_oracles_match_brute_force(order, n, measure):
    rng = np.random.default_rng(order * 10 + n)
    for _ in range(5):
        a = StepTensor(rng.standard_normal((n,) * order), measure)
        rect = SeminormFamily.rectangle(order, n)
        sign = SeminormFamily.sign(order, n)
        r = best_response(rect, a)
        assert r.exact and r.value == pytest.approx(brute_force(a, (0, 1)), rel=1e-12)
        assert r.value == pytest.approx(abs(float(np.sum(a.values * r.witness.values))) * a.weight, rel=1e-12)
        assert family_membership(rect, r.witness)
        s = best_response(sign, a)
        assert s.value == pytest.approx(brute_force(a, (-1, 1)), rel=1e-12)
        assert family_membership(sign, s.witness)
        h = best_response(SeminormFamily.holder(INF, order, n), a)
        assert h.value == pytest.approx(s.value, rel=1e-12)


def test_holder_one_is_the_largest_spike():
    rng = np.random.default_rng(1)
    a = StepTensor(rng.standard_normal((4, 4)))
    fam = SeminormFamily.holder(1, 2, 4)
    res = best_response(fam, a)
    # unit L1 factors on a probability grid: spikes of height n
    assert res.value == pytest.approx(np.abs(a.values).max(), rel=1e-12)
    assert family_membership(fam, res.witness)


def test_holder_two_rank_one_and_grid_oracle():
    u = np.array([1.2, 0.6])
    u /= math.sqrt(np.mean(u**2))
    v = np.array([0.3, -1.35])
    v /= math.sqrt(np.mean(v**2))
    a = rank1([u, v])
    fam = SeminormFamily.holder(2, 2, 2)
    res = best_response(fam, a, Heuristic(restarts=8, seed=0))
    assert res.value == pytest.approx(lp_norm(a, 2), rel=1e-9)
    wu, wv = res.factors
    assert abs(np.dot(wu, u) / 2) == pytest.approx(1.0, rel=1e-6)
    assert abs(np.dot(wv, v) / 2) == pytest.approx(1.0, rel=1e-6)
    # exhaustive angle grid over the unit sphere of L^2 on two cells
    th = np.linspace(0, 2 * np.pi, 4001)
    F = np.sqrt(2) * np.stack([np.cos(th), np.sin(th)], 1)
    grid = np.abs(F @ a.values @ F.T).max() / 4
    assert res.value >= grid - 1e-12
    assert res.value == pytest.approx(grid, rel=1e-5)


@pytest.mark.parametrize("q", [1.5, 3, 4])
def test_holder_heuristic_against_grid_at_n2(q):
    rng = np.random.default_rng(int(q * 10))
    a = StepTensor(rng.standard_normal((2, 2)))
    th = np.linspace(0, 2 * np.pi, 4001)
    c, s = np.cos(th), np.sin(th)
    F = np.stack([c, s], 1) / ((np.abs(c) ** q + np.abs(s) ** q) / 2)[:, None] ** (1 / q)
    grid = np.abs(F @ a.values @ F.T).max() / 4
    val = r_seminorm(SeminormFamily.holder(q, 2, 2), a, Heuristic(restarts=16, seed=0))
    assert val >= grid - 1e-9
    assert val == pytest.approx(grid, rel=1e-4)


def test_holder_exact_unavailable():
    with pytest.raises(PreconditionError):
        best_response(SeminormFamily.holder(2, 2, 3), ones(2, 3), EXACT)


def test_budget():
    with pytest.raises(BudgetExceeded):
        cut_norm(ones(2, 21))
    assert cut_norm(ones(2, 20)) == pytest.approx(1.0)


def test_heuristic_lower_bounds_exact():
    rng = np.random.default_rng(5)
    for n in (5, 7):
        for _ in range(10):
            a = StepTensor(rng.standard_normal((n, n)))
            for fam in (SeminormFamily.cut(n), SeminormFamily.sign(2, n)):
                ex = r_seminorm(fam, a)
                he = best_response(fam, a, Heuristic(restarts=8, seed=1))
                assert not he.exact
                assert he.value <= ex + 1e-12
                assert he.value == pytest.approx(abs(float(np.sum(a.values * he.witness.values))) * a.weight)


def test_heuristic_deterministic():
    a = StepTensor(np.random.default_rng(0).standard_normal((12, 12)))
    m = Heuristic(restarts=4, seed=9)
    assert best_response(SeminormFamily.cut(12), a, m).value == best_response(SeminormFamily.cut(12), a, m).value


def test_cut_bounded_by_l1():
    rng = np.random.default_rng(2)
    for _ in range(20):
        a = StepTensor(rng.standard_normal((4, 4)))
        assert cut_norm(a) <= lp_norm(a, 1) + 1e-15


def test_tie_break_is_deterministic():
    a = ones(2, 3)
    r1 = best_response(SeminormFamily.sign(2, 3), a)
    r2 = best_response(SeminormFamily.sign(2, 3), a)
    assert np.array_equal(r1.witness.values, r2.witness.values)


def test_batch_matches_single():
    rng = np.random.default_rng(3)
    stack = rng.standard_normal((7, 5, 5))
    for fam in (SeminormFamily.cut(5), SeminormFamily.sign(2, 5)):
        batch = exact_values_batch(fam, stack, 1 / 25)
        single = [r_seminorm(fam, StepTensor(s)) for s in stack]
        assert np.allclose(batch, single, rtol=1e-12)


def test_operator_norm_examples():
    for n in (2, 4, 6, 10):
        assert operator_norm(StepTensor(np.eye(n)), INF, 1) == pytest.approx(1 / n)
        assert operator_norm(StepTensor(np.eye(n)), INF, 1, Heuristic(restarts=8)) == pytest.approx(1 / n)
    for p0, q0 in [(INF, 1), (2, 2), (4, 4 / 3), (1.5, 3)]:
        assert operator_norm(ones(2, 5), p0, q0, Heuristic(restarts=4)) == pytest.approx(1.0)


def test_operator_two_two_is_scaled_top_singular_value():
    rng = np.random.default_rng(4)
    for n in (3, 6, 9):
        W = rng.standard_normal((n, n))
        sv = np.linalg.svd(W, compute_uv=False)[0] / n
        assert operator_norm(StepTensor(W), 2, 2, Heuristic(restarts=8)) == pytest.approx(sv, rel=1e-8)


def test_operator_inf_one_matches_sign_brute_force():
    rng = np.random.default_rng(5)
    W = StepTensor(rng.standard_normal((5, 5)))
    assert operator_norm(W, INF, 1) == pytest.approx(brute_force(W, (-1, 1)), rel=1e-12)
    val, f = operator_norm_search(W, INF, 1)
    assert set(np.abs(f)) == {1.0}
    with pytest.raises(PreconditionError):
        operator_norm(W, 2, 2, EXACT)


def test_membership():
    A = np.array([1, 0, 1, 1.0])
    B = np.array([0, 1, 1, 0.0])
    chi = rank1([A, B])
    cut = SeminormFamily.cut(4)
    assert family_membership(cut, chi)
    assert not family_membership(cut, 1.5 * chi)
    assert family_membership(cut, 1.5 * chi, scale=1.5)
    assert family_membership(SeminormFamily.sign(2, 4), ones(2, 4))
    assert not family_membership(cut, StepTensor(np.eye(4)))
    assert family_membership(SeminormFamily.holder(2, 2, 4), rank1([np.ones(4), np.ones(4)]))
    assert not family_membership(SeminormFamily.holder(2, 2, 4), 1.01 * ones(2, 4))


def test_family_parse():
    assert SeminormFamily.parse("holder:4", 2, 3).q == 4
    assert SeminormFamily.parse("cut", 2, 3).kind == "cut"
    for bad in ("holder", "cut:2", "nope"):
        with pytest.raises(PreconditionError):
            SeminormFamily.parse(bad, 2, 3)
    with pytest.raises(PreconditionError):
        SeminormFamily.cut(3).check_tensor(ones(3, 3))
    with pytest.raises(PreconditionError):
        SeminormFamily("cut", 3, 2)


def test_permutation_invariance():
    rng = np.random.default_rng(6)
    a = rng.standard_normal((6, 6))
    p = rng.permutation(6)
    for fam in (SeminormFamily.cut(6), SeminormFamily.sign(2, 6)):
        assert r_seminorm(fam, StepTensor(a)) == pytest.approx(r_seminorm(fam, StepTensor(a[np.ix_(p, p)])), rel=1e-12)
