import itertools
import math

import numpy as np
import pytest

from cradl import aggregation as ag
from cradl.aggregation import InfeasibleRule, RbaRuleSpec

RULES = ["mean", "median", "trimmed", "geomedian", "krum", "phocas", "faba"]


def brute_krum_scores(z, f):
    n = len(z)
    scores = []
    for i in range(n):
        d = sorted(float(np.sum((z[i] - z[j]) ** 2)) for j in range(n) if j != i)
        scores.append(sum(d[: n - f - 2]))
    return np.array(scores)


class TestRules:
    def test_median(self):
        np.testing.assert_array_equal(ag.coord_median([[1, 2], [3, 4], [5, 6]]), [3, 4])
        np.testing.assert_array_equal(ag.coord_median([[1.0], [2.0], [4.0], [10.0]]), [3.0])

    def test_trimmed(self):
        np.testing.assert_array_equal(ag.trimmed_mean([[0], [1], [2], [100]], 1), [1.5])

    def test_trimmed_infeasible(self):
        with pytest.raises(InfeasibleRule):
            ag.trimmed_mean(np.zeros((4, 1)), 2)

    def test_krum_example(self):
        z = np.array([[0.0], [0.1], [0.2], [10.0]])
        np.testing.assert_allclose(ag.krum_scores(z, 1), [0.01, 0.01, 0.01, 96.04], rtol=1e-12)
        np.testing.assert_array_equal(ag.krum(z, 1), [0.0])

    def test_krum_scores_oracle(self):
        z = np.random.default_rng(1).normal(size=(9, 3))
        np.testing.assert_allclose(ag.krum_scores(z, 2), brute_krum_scores(z, 2), rtol=1e-12)

    def test_krum_infeasible(self):
        with pytest.raises(InfeasibleRule):
            ag.krum(np.zeros((4, 2)), 2)

    def test_geomedian_1d(self):
        res = ag.weiszfeld([[0.0], [0.0], [10.0]])
        assert res.converged
        assert abs(res.point[0]) <= 1e-10

    def test_geomedian_triangle(self):
        tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])
        np.testing.assert_allclose(ag.geometric_median(tri), tri.mean(axis=0), atol=1e-9)

    def test_geomedian_optimality(self):
        z = np.random.default_rng(2).normal(size=(11, 4))
        y = ag.geometric_median(z)
        diff = y - z
        grad = (diff / np.linalg.norm(diff, axis=1)[:, None]).sum(axis=0)
        assert np.linalg.norm(grad) < 1e-6

    def test_geomedian_flag(self):
        z = np.random.default_rng(3).normal(size=(10, 3))
        res = ag.weiszfeld(z, tol=1e-300, max_iter=3)
        assert not res.converged and res.iterations == 3

    def test_faba_example(self):
        np.testing.assert_array_equal(ag.faba([[0], [1], [2], [100]], 1), [1.0])

    def test_phocas(self):
        # trimmed mean (1 per side) = 1.5; the three nearest of {0,1,2,100} are 0,1,2
        np.testing.assert_array_equal(ag.phocas([[0], [1], [2], [100]], 1), [1.0])

    @pytest.mark.parametrize("kind", RULES)
    def test_identity(self, kind):
        v = np.array([1.5, -2.0, 3.25])
        out = ag.aggregate(RbaRuleSpec(kind), np.tile(v, (10, 1)), alpha=0.2)
        np.testing.assert_allclose(out, v, rtol=1e-15)

    @pytest.mark.parametrize("kind", RULES)
    def test_permutation_invariance(self, kind):
        rng = np.random.default_rng(4)
        z = rng.normal(size=(10, 3))
        z[3] = z[7]  # a tie for Krum
        base = ag.aggregate(RbaRuleSpec(kind), z, 0.2)
        for _ in range(5):
            out = ag.aggregate(RbaRuleSpec(kind), z[rng.permutation(10)], 0.2)
            np.testing.assert_allclose(out, base, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("kind", ["mean", "median", "trimmed", "geomedian", "krum", "faba"])
    def test_translation(self, kind):
        rng = np.random.default_rng(5)
        z = rng.normal(size=(10, 3))
        c = np.array([3.0, -7.0, 0.5])
        out = ag.aggregate(RbaRuleSpec(kind), z + c, 0.2)
        np.testing.assert_allclose(out, ag.aggregate(RbaRuleSpec(kind), z, 0.2) + c, atol=1e-9)


class TestDispatch:
    def test_parse(self):
        assert RbaRuleSpec.parse("trimmed:0.1") == RbaRuleSpec("trimmed", trim=0.1)
        assert RbaRuleSpec.parse(" Median ") == RbaRuleSpec("median")
        assert str(RbaRuleSpec.parse("trimmed:0.1")) == "trimmed:0.1"
        for bad in ("medoid", "krum:3", "trimmed:0.7"):
            with pytest.raises(ValueError):
                RbaRuleSpec.parse(bad)

    def test_parameters(self):
        assert ag.resolve_parameter(RbaRuleSpec("trimmed"), 10, 0.3) == 3
        assert ag.resolve_parameter(RbaRuleSpec("trimmed"), 100, 0.03) == 3
        assert ag.resolve_parameter(RbaRuleSpec("krum"), 10, 0.2) == 2
        assert ag.resolve_parameter(RbaRuleSpec("faba", count=1), 10, 0.2) == 1

    def test_infeasible(self):
        with pytest.raises(InfeasibleRule, match="0.3333"):
            ag.aggregate(RbaRuleSpec("faba"), np.zeros((10, 2)), 0.4)
        with pytest.raises(InfeasibleRule):
            ag.aggregate(RbaRuleSpec("median"), np.zeros((10, 2)), 0.5)
        with pytest.raises(ValueError):
            ag.aggregate(RbaRuleSpec("median"), np.zeros((0, 2)))


class TestConstants:
    def test_table_values(self):
        assert ag.c_alpha_sq("trimmed", 0.2, 10, 5) == pytest.approx(2 * 0.2 * 0.8 / 0.36)
        assert round(ag.c_alpha_sq("trimmed", 0.2, 10, 5), 4) == 0.8889
        assert ag.c_alpha_sq("krum", 0.0, 10, 5) == 8.0
        assert ag.c_alpha_sq("faba", 0.0, 10, 5) == 0.0
        assert ag.c_alpha_sq("median", 0.2, 100, 100) == pytest.approx(78.125)
        assert ag.c_alpha_sq("median", 1 / 3, 3, 1) == pytest.approx(1.125)

    def test_other_rules(self):
        a, N = 0.2, 10
        assert ag.c_alpha_sq("geomedian", a, N, 5) == pytest.approx((2 * 0.8 / 0.6) ** 2)
        assert ag.c_alpha_sq("phocas", a, N, 5) == pytest.approx(4 + 12 * 0.16 / 0.36)
        # FABA with N alpha = 2: 4 (2/8 + 9/8 * 2/4)
        assert ag.c_alpha_sq("faba", a, N, 5) == pytest.approx(4 * (2 / 8 + 9 / 8 * 2 / 4))

    def test_mean(self):
        assert ag.c_alpha_sq("mean", 0.0, 10, 2) == 0.0
        assert ag.c_alpha_sq("mean", 0.1, 10, 2) == math.inf

    def test_range(self):
        with pytest.raises(ValueError, match="0.3333"):
            ag.c_alpha_sq("faba", 0.34, 100, 5)
        with pytest.raises(ValueError, match="0.5"):
            ag.c_alpha_sq("krum", 0.5, 100, 5)


class TestRobustBound:
    def test_hand_example(self):
        rep = ag.robust_bound_check(RbaRuleSpec("median"), [[0.0], [2.0]], [[100.0]], alpha=1 / 3)
        assert rep.varsigma == 1.0 and rep.lhs == 1.0
        assert rep.c_alpha_sq == pytest.approx(1.125)
        assert rep.satisfied

    def test_majority_identical(self):
        honest = np.tile([1.0, 2.0], (7, 1))
        byz = np.random.default_rng(0).normal(scale=100, size=(3, 2))
        rep = ag.robust_bound_check(RbaRuleSpec("median"), honest, byz)
        assert rep.lhs == 0.0 and rep.varsigma == 0.0 and rep.satisfied

    def test_alpha_mismatch(self):
        with pytest.raises(ValueError):
            ag.robust_bound_check(RbaRuleSpec("median"), np.zeros((8, 2)), np.ones((2, 2)), alpha=0.4)

    @pytest.mark.parametrize("kind", ["median", "trimmed", "phocas"])
    @pytest.mark.parametrize("alpha", [0.03, 0.2, 0.4])
    def test_evaluated_rules(self, kind, alpha):
        # N = 100 so that every tested alpha is an integer count
        rng = np.random.default_rng(int(alpha * 100))
        nb = int(round(alpha * 100))
        for trial in range(20):
            honest = rng.normal(size=(100 - nb, 5)) * rng.uniform(0.1, 3)
            byz = np.tile(-2 * honest.mean(axis=0) + 50, (nb, 1))
            assert ag.robust_bound_check(RbaRuleSpec(kind), honest, byz, alpha, seed=trial).satisfied

    def test_spread(self):
        z = np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 3.0]])
        mu = z.mean(axis=0)
        assert ag.spread(z) == pytest.approx(max(np.sum((r - mu) ** 2) for r in z))


@pytest.mark.parametrize("kind", ["median", "trimmed", "krum", "phocas", "faba"])
def test_even_and_odd_counts_are_consistent(kind):
    # dropping a message far away must not move these rules much
    z = np.vstack([np.random.default_rng(6).normal(size=(9, 2)), [[1e6, 1e6]]])
    out = ag.aggregate(RbaRuleSpec(kind), z, 0.1)
    assert np.all(np.abs(out) < 10)


def test_all_pairs_of_rules_run():
    z = np.random.default_rng(7).normal(size=(10, 2))
    for a, b in itertools.combinations(RULES, 2):
        assert ag.aggregate(RbaRuleSpec(a), z, 0.2).shape == ag.aggregate(RbaRuleSpec(b), z, 0.2).shape
