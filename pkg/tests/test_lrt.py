"""Tests for the equality statistics and leave-out increments.

Expected values come from independent routes: hand calculations on
tiny datasets, a numerical likelihood maximizer, a high-precision
re-evaluation of the correction factor, and combinatorial identities.
"""

import math
from itertools import combinations

import mpmath
import numpy as np
import pytest
from scipy.optimize import minimize

from ggmtest.chi2 import chi2_sf
from ggmtest.errors import DomainError
from ggmtest.linalg import cholesky, covariance_mle, log_det, mean_vector
from ggmtest.lrt import (
    NodeSet,
    TwoSampleData,
    adjusted_t,
    bartlett_delta,
    bartlett_mu,
    dof_global,
    dof_increment,
    enumerate_subsets,
    increment,
    increment_scan,
    lrt_w,
    restrict,
)
from ggmtest.simulate import ScenarioSpec, simulate_replicate

mpmath.mp.dps = 50


def labels_for(p):
    return tuple(str(j) for j in range(1, p + 1))


def random_data(seed, n1, n2, p, scale=1.0):
    rng = np.random.default_rng(seed)
    x1 = rng.normal(size=(n1, p)) * scale
    x2 = rng.normal(size=(n2, p)) * scale
    return TwoSampleData(x1, x2, labels_for(p))


# ---------------------------------------------------------------- dof


def test_dof_global_values():
    assert dof_global(8) == 44
    assert dof_global(1) == 2
    assert dof_global(7) == 35
    assert dof_global(8) - dof_global(7) == 9 == dof_increment(1, 8)


def test_dof_global_counts_free_parameters():
    # p mean entries plus p(p+1)/2 covariance entries
    for p in range(1, 31):
        assert dof_global(p) == p + p * (p + 1) // 2


def test_dof_global_domain():
    for bad in (0, -2, 1.5, "3"):
        with pytest.raises(DomainError):
            dof_global(bad)


def test_dof_increment_values():
    assert dof_increment(1, 8) == 9
    assert dof_increment(2, 8) == 17
    assert dof_increment(3, 8) == 24
    for p in range(2, 12):
        assert dof_increment(p - 1, p) == dof_global(p) - 2


def test_dof_increment_difference_identity():
    for p in range(2, 31):
        for l in range(1, p):
            assert dof_increment(l, p) == dof_global(p) - dof_global(p - l)


def test_dof_increment_domain():
    for l, p in ((0, 5), (5, 5), (6, 5), (-1, 3)):
        with pytest.raises(DomainError):
            dof_increment(l, p)


# ---------------------------------------------------------------- lrt_w


def test_lrt_w_identical_groups_is_zero():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(12, 3))
    data = TwoSampleData(x, x.copy(), labels_for(3))
    w = lrt_w(data)
    assert 0.0 <= w <= 1e-10


def test_lrt_w_hand_example_univariate():
    # grand-mean MLE variance 1.25, group MLE variances 1 and 1
    data = TwoSampleData([[0.0], [2.0]], [[1.0], [3.0]], ("x",))
    assert lrt_w(data) == pytest.approx(4.0 * math.log(1.25), abs=1e-12)


def test_lrt_w_matches_numerical_likelihood_maximizer():
    p = 3
    rng = np.random.default_rng(314)
    x1 = rng.normal(size=(20, p)) @ np.diag([1.0, 2.0, 0.7]) + rng.normal(size=p)
    x2 = rng.normal(size=(20, p)) * 1.3
    data = TwoSampleData(x1, x2, labels_for(p))

    tri = np.tril_indices(p, -1)

    def negloglik(theta, x):
        mu = theta[:p]
        lower = np.zeros((p, p))
        lower[np.diag_indices(p)] = np.exp(theta[p : 2 * p])
        lower[tri] = theta[2 * p :]
        solved = np.linalg.solve(lower, (x - mu).T)
        logdet = 2.0 * np.log(np.diag(lower)).sum()
        rows = x.shape[0]
        return 0.5 * (rows * (p * math.log(2.0 * math.pi) + logdet) + (solved**2).sum())

    def max_loglik(x):
        start_lower = np.linalg.cholesky(np.cov(x, rowvar=False, bias=True))
        theta = np.concatenate(
            [x.mean(axis=0), np.log(np.diag(start_lower)), start_lower[tri]]
        )
        theta = theta + 0.01 * np.random.default_rng(1).normal(size=theta.size)
        for _ in range(3):
            theta = minimize(
                negloglik, theta, args=(x,), method="BFGS",
                options={"gtol": 1e-12, "maxiter": 5000},
            ).x
        return -negloglik(theta, x)

    oracle = 2.0 * (
        max_loglik(x1) + max_loglik(x2) - max_loglik(np.vstack([x1, x2]))
    )
    assert lrt_w(data) == pytest.approx(oracle, abs=1e-6)


def test_lrt_w_equals_public_helper_composition():
    # same arithmetic as the statistic itself, so equality is exact
    for seed in (21, 22, 23):
        data = random_data(seed, 17, 23, 4)
        n1, n2 = data.x1.shape[0], data.x2.shape[0]
        n = n1 + n2
        m1, m2 = mean_vector(data.x1), mean_vector(data.x2)
        grand = (n1 * m1 + n2 * m2) / n
        pooled = (
            n1 * covariance_mle(data.x1, grand)
            + n2 * covariance_mle(data.x2, grand)
        ) / n
        composed = (
            n * log_det(cholesky(pooled))
            - n1 * log_det(cholesky(covariance_mle(data.x1, m1)))
            - n2 * log_det(cholesky(covariance_mle(data.x2, m2)))
        )
        assert lrt_w(data) == max(composed, 0.0)


def test_lrt_w_rejects_collinear_columns():
    rng = np.random.default_rng(3)
    base = rng.normal(size=(10, 1))
    x = np.hstack([base, 2.0 * base])
    from ggmtest.errors import SingularCovariance

    with pytest.raises(SingularCovariance):
        lrt_w(TwoSampleData(x, rng.normal(size=(10, 2)), ("a", "b")))


# ------------------------------------------------------- bartlett factor


def hp_mu(p, n1, n2):
    p, n1, n2 = map(mpmath.mpf, (p, n1, n2))
    n = n1 + n2

    def r2(v, x):
        return -mpmath.log(1 - v / x)

    total = -4 * p - p / n1 - p / n2 + n * r2(p, n) * (2 * p - 2 * n + 3)
    for nc in (n1, n2):
        total -= nc * r2(p, nc - 1) * (2 * p - 2 * nc + 3)
    return total / 4


def test_bartlett_mu_hand_example():
    # bracket: -4 - 0.2 - 700 log(20/19) + 300 log(9/8), divided by 4
    bracket = -4.2 - 700.0 * math.log(20.0 / 19.0) + 300.0 * math.log(9.0 / 8.0)
    assert bracket == pytest.approx(-4.7704, abs=5e-5)
    assert bartlett_mu(1, 10, 10) == pytest.approx(bracket / 4.0, abs=1e-12)


def test_bartlett_mu_high_precision_oracle():
    for p, n1, n2 in ((1, 10, 10), (8, 250, 250), (5, 30, 47), (8, 12, 15), (2, 100, 40)):
        expect = float(hp_mu(p, n1, n2))
        got = bartlett_mu(p, n1, n2)
        assert got == pytest.approx(expect, rel=1e-12)
        assert got < 0.0


def test_bartlett_delta_hand_example():
    delta = bartlett_delta(1, 10, 10)
    assert delta == pytest.approx(0.8385, abs=1e-3)
    assert delta == pytest.approx(2.0 / (-2.0 * bartlett_mu(1, 10, 10)), abs=1e-15)


def test_bartlett_delta_large_sample_range():
    assert 0.9 < bartlett_delta(8, 250, 250) < 1.0


def test_bartlett_delta_approaches_one():
    deltas = [bartlett_delta(1, n, n) for n in (20, 50, 100, 10_000)]
    assert all(d < 1.0 for d in deltas)
    assert deltas == sorted(deltas)
    assert bartlett_delta(1, 10**6, 10**6) == pytest.approx(1.0, abs=1e-4)


def test_bartlett_sweep_negative_mu_bounded_delta():
    # every supported size in a broad grid keeps mu < 0 and delta near (0, 1]
    for p in range(1, 13):
        pairs = [(n, n) for n in range(p + 2, 501, 7)]
        pairs += [(p + 2, 500), (p + 2, p + 3), (p + 3, 2 * p + 11)]
        for n1, n2 in pairs:
            mu = bartlett_mu(p, n1, n2)
            delta = bartlett_delta(p, n1, n2)
            assert mu < 0.0, (p, n1, n2)
            assert 0.0 < delta < 1.05, (p, n1, n2)


def test_bartlett_domain_errors():
    with pytest.raises(DomainError):
        bartlett_mu(8, 9, 50)  # p = n1 - 1
    with pytest.raises(DomainError):
        bartlett_mu(8, 50, 9)
    with pytest.raises(DomainError):
        bartlett_mu(0, 10, 10)
    with pytest.raises(DomainError):
        bartlett_delta(3, 4, 10)
    with pytest.raises(DomainError):
        bartlett_mu(2.0, 10, 10)


# ---------------------------------------------------------- adjusted_t


def test_adjusted_t_identical_groups():
    rng = np.random.default_rng(15)
    x = rng.normal(size=(14, 3))
    res = adjusted_t(TwoSampleData(x, x.copy(), labels_for(3)))
    assert res.t <= 1e-10
    assert res.p_t == 1.0
    assert res.p_w == 1.0


def test_adjusted_t_field_consistency():
    data = random_data(77, 30, 28, 4)
    res = adjusted_t(data)
    assert res.w == lrt_w(data)
    assert res.mu_bartlett == bartlett_mu(4, 30, 28)
    assert res.delta_bartlett == bartlett_delta(4, 30, 28)
    assert res.t == res.delta_bartlett * res.w
    assert res.dof == dof_global(4) == 14
    assert res.p_w == chi2_sf(res.w, 14)
    assert res.p_t == chi2_sf(res.t, 14)
    assert 0.0 <= res.p_t <= 1.0 and 0.0 <= res.p_w <= 1.0
    assert res.w >= 0.0 and res.mu_bartlett < 0.0


def test_adjusted_t_shrinks_w():
    data = random_data(5, 12, 12, 3)
    res = adjusted_t(data)
    assert res.delta_bartlett < 1.0
    assert res.w > 0.0
    assert res.t < res.w


# ------------------------------------------------------------ restrict


def test_restrict_drops_named_columns():
    x1 = np.arange(12.0).reshape(4, 3)
    x2 = np.arange(12.0, 24.0).reshape(4, 3)
    data = TwoSampleData(x1, x2, ("a", "b", "c"))
    sub = restrict(data, NodeSet((2,), 3))
    assert sub.node_labels == ("a", "c")
    assert np.array_equal(sub.x1, x1[:, [0, 2]])
    assert np.array_equal(sub.x2, x2[:, [0, 2]])


def test_restrict_composition_reindexes():
    data = random_data(9, 5, 5, 3)
    twice = restrict(restrict(data, NodeSet((1,), 3)), NodeSet((1,), 2))
    assert np.array_equal(twice.x1, data.x1[:, [2]])
    assert twice.node_labels == (data.node_labels[2],)


def test_restrict_pair_equals_sequential():
    data = random_data(10, 6, 7, 5)
    joint = restrict(data, NodeSet((1, 2), 5))
    seq = restrict(restrict(data, NodeSet((2,), 5)), NodeSet((1,), 4))
    assert np.array_equal(joint.x1, seq.x1)
    assert np.array_equal(joint.x2, seq.x2)
    assert joint.node_labels == seq.node_labels


def test_restrict_rejects_full_removal_and_mismatch():
    data = random_data(1, 5, 5, 3)
    with pytest.raises(DomainError):
        restrict(data, NodeSet((1, 2, 3), 3))
    with pytest.raises(DomainError):
        restrict(data, NodeSet((1,), 4))


# ----------------------------------------------------------- increment


def test_increment_identical_groups():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(20, 4))
    data = TwoSampleData(x, x.copy(), labels_for(4))
    inc = increment(data, NodeSet((2,), 4))
    assert abs(inc.delta_w) <= 1e-10
    assert inc.p_w == 1.0 and inc.p_t == 1.0


def test_increment_additivity_is_exact():
    data = random_data(123, 25, 25, 6)
    full = adjusted_t(data)
    for members in ((1,), (2, 5), (1, 2, 3)):
        m = NodeSet(members, 6)
        inc = increment(data, m)
        sub = adjusted_t(restrict(data, m))
        assert inc.delta_w == full.w - sub.w
        assert inc.delta_t == full.t - sub.t
        assert inc.l == len(members)
        assert inc.dof == dof_increment(len(members), 6)
        assert inc.p_w == chi2_sf(inc.delta_w, inc.dof)
        assert inc.p_t == chi2_sf(inc.delta_t, inc.dof)


def test_increment_rejects_bad_subsets():
    data = random_data(4, 10, 10, 4)
    with pytest.raises(DomainError):
        increment(data, NodeSet((1, 2, 3, 4), 4))
    with pytest.raises(DomainError):
        increment(data, NodeSet((1,), 5))


def test_negative_delta_t_maps_to_p_one():
    # small n relative to p widens the gap between correction factors,
    # so near-null removals can push the adjusted increment negative
    rng = np.random.default_rng(5)
    data = TwoSampleData(
        rng.normal(size=(12, 8)), rng.normal(size=(12, 8)), labels_for(8)
    )
    negatives = [inc for inc in increment_scan(data, 1) if inc.delta_t < 0.0]
    assert negatives
    for inc in negatives:
        assert inc.p_t == 1.0
        assert inc.delta_w >= -1e-9


def test_delta_w_nonnegative_on_random_data():
    rng = np.random.default_rng(2026)
    for trial in range(10_000):
        n1, n2 = 6 + trial % 3, 7
        if trial % 3 == 0:
            x1 = rng.normal(size=(n1, 3))
            x2 = rng.normal(size=(n2, 3))
        elif trial % 3 == 1:
            x1 = rng.standard_t(3, size=(n1, 3)) * 2.0
            x2 = rng.standard_t(3, size=(n2, 3))
        else:
            x1 = np.exp(rng.normal(size=(n1, 3)) * 0.5)
            x2 = np.exp(rng.normal(size=(n2, 3)) * 0.5) + 1.0
        data = TwoSampleData(x1, x2, ("1", "2", "3"))
        inc = increment(data, NodeSet((1 + trial % 3,), 3))
        assert inc.delta_w >= -1e-9


def test_subvector_w_nesting():
    for seed in range(200):
        data = random_data(seed, 20, 20, 5)
        w = lrt_w(data)
        prev = w
        kept = data
        for node in (1, 1, 1):
            kept = restrict(kept, NodeSet((node,), kept.p))
            current = lrt_w(kept)
            assert current <= prev + 1e-9
            prev = current


# --------------------------------------------------------- enumeration


def test_enumerate_subsets_examples():
    assert [m.members for m in enumerate_subsets(3, 1)] == [(1,), (2,), (3,)]
    assert [m.members for m in enumerate_subsets(4, 2)] == [
        (1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4),
    ]
    assert len(enumerate_subsets(8, 3)) == 56


def test_enumerate_subsets_is_lexicographic():
    got = [m.members for m in enumerate_subsets(8, 3)]
    assert got == list(combinations(range(1, 9), 3))
    assert all(m.p == 8 for m in enumerate_subsets(8, 3))


def test_enumerate_subsets_domain():
    for l, p in ((0, 4), (4, 4), (5, 4)):
        with pytest.raises(DomainError):
            enumerate_subsets(p, l)


# ---------------------------------------------------------------- scan


def test_scan_matches_individual_increments():
    data = random_data(55, 18, 22, 6)
    for l in (1, 2, 3):
        scan = increment_scan(data, l)
        singles = [increment(data, m) for m in enumerate_subsets(6, l)]
        assert len(scan) == len(singles)
        for a, b in zip(scan, singles):
            assert a.m.members == b.m.members
            assert a.delta_w == b.delta_w
            assert a.delta_t == b.delta_t
            assert a.p_w == b.p_w and a.p_t == b.p_t
            assert a.dof == b.dof


def test_scan_shape_for_singletons():
    data = random_data(60, 30, 30, 8)
    scan = increment_scan(data, 1)
    assert len(scan) == 8
    assert all(inc.dof == 9 for inc in scan)
    assert [inc.m.members for inc in scan] == [(j,) for j in range(1, 9)]


def test_scan_ranks_strongly_perturbed_node_first():
    spec = ScenarioSpec(
        n1=100, n2=100, delta_mu=1.5, xi=0.5,
        s=NodeSet((1,), 8), l_values=(1,), master_seed=404,
    )
    hits = 0
    for r in range(500):
        incs = simulate_replicate(spec, r).increments[1]
        best = max(incs, key=lambda inc: inc.delta_t)
        hits += best.m.members == (1,)
    assert hits >= 475


# ----------------------------------------------------------- symmetry


def test_common_diagonal_affine_invariance():
    data = random_data(42, 25, 30, 5)
    scale = np.array([0.5, 2.0, 3.0, 0.1, 7.0])
    shift = np.array([1.0, -2.0, 0.5, 10.0, -3.0])
    moved = TwoSampleData(
        data.x1 * scale + shift, data.x2 * scale + shift, data.node_labels
    )
    assert lrt_w(moved) == pytest.approx(lrt_w(data), abs=1e-8)
    for l in (1, 2):
        before = increment_scan(data, l)
        after = increment_scan(moved, l)
        for a, b in zip(before, after):
            assert b.delta_w == pytest.approx(a.delta_w, abs=1e-8)
            assert b.delta_t == pytest.approx(a.delta_t, abs=1e-8)
            assert b.p_t == pytest.approx(a.p_t, abs=1e-8)
    sub = NodeSet((2, 4), 5)
    assert lrt_w(restrict(moved, sub)) == pytest.approx(
        lrt_w(restrict(data, sub)), abs=1e-8
    )


def test_relabeling_permutes_the_scan():
    data = random_data(31, 20, 20, 4)
    perm = [2, 0, 3, 1]
    moved = TwoSampleData(
        data.x1[:, perm],
        data.x2[:, perm],
        tuple(data.node_labels[j] for j in perm),
    )
    base = {inc.m.members[0]: inc for inc in increment_scan(data, 1)}
    for k, inc in enumerate(increment_scan(moved, 1), start=1):
        original = base[perm[k - 1] + 1]
        assert inc.delta_t == pytest.approx(original.delta_t, abs=1e-9)
        assert moved.node_labels[k - 1] == data.node_labels[perm[k - 1]]
    p_before = sorted(inc.p_t for inc in increment_scan(data, 1))
    p_after = sorted(inc.p_t for inc in increment_scan(moved, 1))
    assert np.allclose(p_before, p_after, atol=1e-12)


# ---------------------------------------------------------- validation


def test_nodeset_validation():
    NodeSet((1, 3), 4)
    with pytest.raises(DomainError):
        NodeSet((), 4)
    with pytest.raises(DomainError):
        NodeSet((2, 2), 4)
    with pytest.raises(DomainError):
        NodeSet((3, 1), 4)
    with pytest.raises(DomainError):
        NodeSet((0,), 4)
    with pytest.raises(DomainError):
        NodeSet((5,), 4)
    with pytest.raises(DomainError):
        NodeSet((1,), 0)


def test_two_sample_data_validation():
    ok = np.zeros((3, 2))
    with pytest.raises(DomainError):
        TwoSampleData(ok, np.zeros((3, 3)), ("a", "b"))
    with pytest.raises(DomainError):
        TwoSampleData(np.zeros((1, 2)), ok, ("a", "b"))
    with pytest.raises(DomainError):
        TwoSampleData(ok, ok, ("a",))
    with pytest.raises(DomainError):
        TwoSampleData(ok, ok, ("a", "a"))
    with pytest.raises(DomainError):
        TwoSampleData(np.array([[1.0, np.nan], [0.0, 1.0]]), ok, ("a", "b"))
    data = TwoSampleData(ok, ok, ("a", "b"))
    assert data.p == 2
    with pytest.raises((ValueError, AttributeError)):
        data.x1[0, 0] = 5.0
