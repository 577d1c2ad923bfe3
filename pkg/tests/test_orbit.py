import itertools
from fractions import Fraction

import numpy as np
import pytest

from regdecomp import (
    EXACT,
    INF,
    BlockPermutation,
    BudgetExceeded,
    Heuristic,
    PreconditionError,
    SeminormFamily,
    StepTensor,
    apply_permutation,
    corner_block,
    cut_norm,
    greedy_cover,
    interp_exponents,
    lp_norm,
    lp_orbit_distance,
    ones,
    orbit_distance,
    r_seminorm,
    random_ball_sample,
    riesz_thorin_check,
    zeros,
)

CUT6 = SeminormFamily.cut(6)


def test_permutation_basics():
    g = BlockPermutation([2, 0, 1])
    assert g.inverse().compose(g) == BlockPermutation.identity(3)
    assert g.compose(g.inverse()) == BlockPermutation.identity(3)
    with pytest.raises(PreconditionError):
        BlockPermutation([0, 0, 1])
    with pytest.raises(PreconditionError):
        BlockPermutation([[0, 1], [1, 0]])


def test_action_definition():
    t = StepTensor(np.arange(9, dtype=float).reshape(3, 3))
    g = BlockPermutation([2, 0, 1])
    gt = apply_permutation(t, g)
    inv = g.inverse().perm
    for i, j in itertools.product(range(3), repeat=2):
        assert gt.values[i, j] == t.values[inv[i], inv[j]]
    assert apply_permutation(t, BlockPermutation.identity(3)) == t


def test_action_is_a_group_action():
    t = random_ball_sample(3, 4, 2, seed=0)
    g, h = BlockPermutation.random(4, 1), BlockPermutation.random(4, 2)
    assert apply_permutation(apply_permutation(t, h), g) == apply_permutation(t, g.compose(h))


def test_action_preserves_norms():
    t = random_ball_sample(2, 6, 2, seed=1)
    g = BlockPermutation.random(6, 5)
    gt = apply_permutation(t, g)
    for p in (1, 2, 3, INF):
        assert lp_norm(gt, p) == pytest.approx(lp_norm(t, p), rel=1e-14)
    assert cut_norm(gt) == pytest.approx(cut_norm(t), rel=1e-12)


def test_same_orbit_distance_zero():
    for seed in range(10):
        a = random_ball_sample(2, 6, 2, seed=seed)
        g = BlockPermutation.random(6, seed)
        res = orbit_distance(a, apply_permutation(a, g), CUT6, EXACT)
        assert res.distance == 0.0
        assert apply_permutation(apply_permutation(a, g), res.aligner) == a
        assert orbit_distance(a, apply_permutation(a, g), CUT6, Heuristic(restarts=2)).distance <= 1e-15


def test_distance_to_zero_is_seminorm():
    for fam in (CUT6, SeminormFamily.sign(2, 6)):
        assert orbit_distance(ones(2, 6), zeros(2, 6), fam, EXACT).distance == r_seminorm(fam, ones(2, 6))


def test_exact_matches_brute_force():
    rng = np.random.default_rng(0)
    a = StepTensor(rng.standard_normal((4, 4)))
    b = StepTensor(rng.standard_normal((4, 4)))
    fam = SeminormFamily.cut(4)
    brute = min(r_seminorm(fam, a - apply_permutation(b, BlockPermutation(p))) for p in itertools.permutations(range(4)))
    res = orbit_distance(a, b, fam, EXACT)
    assert res.distance == pytest.approx(brute, rel=1e-12)
    assert r_seminorm(fam, a - apply_permutation(b, res.aligner)) == pytest.approx(res.distance, rel=1e-12)


def test_exact_non_batched_family():
    a = random_ball_sample(3, 3, 2, seed=0)
    b = random_ball_sample(3, 3, 2, seed=1)
    fam = SeminormFamily.rectangle(3, 3)
    res = orbit_distance(a, b, fam, EXACT)
    brute = min(r_seminorm(fam, a - apply_permutation(b, BlockPermutation(p))) for p in itertools.permutations(range(3)))
    assert res.distance == pytest.approx(brute)


def test_heuristic_upper_bounds_exact():
    gaps = []
    for i in range(20):
        a = random_ball_sample(2, 6, 2, seed=100 + i)
        b = random_ball_sample(2, 6, 2, seed=200 + i)
        ex = orbit_distance(a, b, CUT6, EXACT)
        he = orbit_distance(a, b, CUT6, Heuristic(restarts=2, seed=i))
        assert he.inner_exact and not he.exact
        assert he.distance >= ex.distance - 1e-12
        assert r_seminorm(CUT6, a - apply_permutation(b, he.aligner)) == pytest.approx(he.distance)
        gaps.append(he.distance - ex.distance)
    assert np.quantile(gaps, 0.5) >= 0


def test_exact_budget():
    a = random_ball_sample(2, 9, 2)
    with pytest.raises(BudgetExceeded):
        orbit_distance(a, a, SeminormFamily.cut(9), EXACT)
    res = orbit_distance(a, a, SeminormFamily.cut(9), Heuristic(restarts=1))
    assert res.distance <= 1e-15


def test_pseudometric_small():
    ts = [random_ball_sample(2, 5, 2, seed=s) for s in range(6)]
    fam = SeminormFamily.cut(5)
    D = np.array([[orbit_distance(a, b, fam, EXACT).distance for b in ts] for a in ts])
    assert np.allclose(D, D.T, atol=1e-9)
    assert np.all(np.diag(D) == 0)
    for i, j, k in itertools.permutations(range(6), 3):
        assert D[i, k] <= D[i, j] + D[j, k] + 1e-9


def test_cover_trivial_cases():
    a = random_ball_sample(2, 6, 4, seed=0)
    orbit = [apply_permutation(a, BlockPermutation.random(6, s)) for s in range(8)]
    cover = greedy_cover(orbit, CUT6, 0.01, EXACT)
    assert cover.net == [0] and cover.distance_mode == "exact"
    samples = [random_ball_sample(2, 6, 4, seed=s) for s in range(10)]
    assert len(greedy_cover(samples, CUT6, 10.0, EXACT).net) == 1
    assert greedy_cover([], CUT6, 0.1).net == []


def test_cover_is_valid_net():
    samples = [random_ball_sample(2, 6, 4, seed=s) for s in range(25)]
    for mode in (EXACT, Heuristic(restarts=2)):
        cover = greedy_cover(samples, CUT6, 0.15, mode)
        assert np.all(cover.distances <= 0.15)
        assert set(cover.assignment.tolist()) <= set(cover.net)
        for i, j in enumerate(cover.assignment):
            if i not in cover.net:
                d = orbit_distance(samples[i], samples[j], CUT6, EXACT).distance
                assert d <= cover.distances[i] + 1e-12
        d = cover.to_dict()
        assert d["net_size"] == len(cover.net)


def test_cover_exact_request_falls_back_above_eight():
    samples = [random_ball_sample(2, 10, 4, seed=s) for s in range(4)]
    cover = greedy_cover(samples, SeminormFamily.cut(10), 0.3, EXACT)
    assert cover.distance_mode == "heuristic"


def test_cover_thread_count_does_not_change_result(monkeypatch):
    samples = [random_ball_sample(2, 6, 4, seed=s) for s in range(15)]
    monkeypatch.setenv("REGDECOMP_THREADS", "1")
    one = greedy_cover(samples, CUT6, 0.12, Heuristic(restarts=2)).to_dict()
    monkeypatch.setenv("REGDECOMP_THREADS", "4")
    four = greedy_cover(samples, CUT6, 0.12, Heuristic(restarts=2)).to_dict()
    assert one == four


def test_interp_examples():
    assert interp_exponents(2, 4, Fraction(1, 2)) == (Fraction(8, 3), Fraction(8, 5))
    assert interp_exponents(2, 4, 0.5) == (Fraction(8, 3), Fraction(8, 5))
    assert interp_exponents(INF, INF, 0.5) == (2, 2)
    for theta in (0, 1, -0.1, 1.5):
        with pytest.raises(PreconditionError):
            interp_exponents(2, 4, theta)


def test_interp_endpoint_consistency():
    for p, q in [(2, 4), (3, 3), (4, INF), (1.5, 6)]:
        ps = 1 - (0 if p == INF else 1 / p)  # 1/p*
        qs = 1 - (0 if q == INF else 1 / q)  # 1/q*
        pt, qt = interp_exponents(p, q, 0.01)
        assert 1 / float(pt) == pytest.approx(ps, rel=0.02)
        pt, qt = interp_exponents(p, q, 0.99)
        assert 1 / float(qt) == pytest.approx(qs, rel=0.02)


def test_riesz_thorin_examples():
    rep = riesz_thorin_check(ones(2, 5), 4, 4, 0.5, Heuristic(restarts=4))
    assert rep.lhs_lower == pytest.approx(1.0) and rep.rhs_power == pytest.approx(1.0)
    assert not rep.anomaly
    rep = riesz_thorin_check(zeros(2, 5), 4, 4, 0.5, Heuristic(restarts=4))
    assert rep.lhs_lower == 0.0 and rep.rhs_power == 0.0 and not rep.anomaly
    with pytest.raises(PreconditionError):
        riesz_thorin_check(3 * ones(2, 3), 4, 4, 0.5)


def test_corner_blocks():
    for i in (1, 2, 4, 8):
        f = corner_block(i, 8)
        assert lp_norm(f, 2) == pytest.approx(1.0)
        assert lp_norm(f, 1) == pytest.approx(1 / i)
    with pytest.raises(PreconditionError):
        corner_block(3, 8)


def test_corner_blocks_stay_apart_in_l2():
    # i = 2^k, j = 2^l with l >= k + 2; exhaustive over all 8! relabelings
    for i, j in [(1, 4), (1, 8), (2, 8)]:
        d2 = lp_orbit_distance(corner_block(i, 8), corner_block(j, 8), 2) ** 2
        assert d2 >= 0.5
    assert lp_orbit_distance(corner_block(2, 8), corner_block(2, 8)) == 0.0
