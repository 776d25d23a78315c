import math

import numpy as np
import pytest

from improvepac.ballworld import (
    LEARNERS,
    CoverSpec,
    b_grid,
    cell_mixture,
    coupon_success_probability,
    covering_experiment,
    covering_sample_size,
    exact_loss_1d,
    exact_memorization_loss_1d,
    greedy_cover,
    memorization_loss,
    memorization_sample_size,
    memorize,
    memorize_pac,
    negatives_zero_loss,
    spread_adversary_loss,
    spread_points,
    spread_points_lower_bound,
    union_bound_failure,
    union_interval_concept,
    union_interval_demo,
    union_interval_violations,
    unit_cells,
)
from improvepac.core import (
    Ball,
    FiniteConcept,
    FiniteWeighted,
    InstanceSpace,
    IntervalConcept,
    LabeledSample,
    UniformInterval,
    improvement_loss,
    sample,
)
from improvepac.errors import DomainError, InvariantError, ParameterError
from improvepac.intervals import IntervalSet
from improvepac.rng import stream

LINE = InstanceSpace.euclidean(1)


def _sample(pairs):
    return LabeledSample.from_pairs(LINE, [(np.array([x]), y) for x, y in pairs])


class TestMemorize:
    def test_keeps_unique_positives(self):
        h = memorize(_sample([(0.1, 1), (0.1, 1), (0.3, 0), (0.5, 1)]))
        np.testing.assert_allclose(h.positives[:, 0], [0.1, 0.5])
        assert h(np.array([0.3])) == 0
        assert h(np.array([0.2])) == 0

    def test_empty_sample(self):
        h = memorize(_sample([]))
        assert len(h.positives) == 0
        assert h(np.array([0.0])) == 0

    def test_finite_space_rejected(self):
        S = sample(FiniteWeighted.uniform(2), FiniteConcept.from_bits([1, 0]), 3)
        with pytest.raises(DomainError):
            memorize(S)

    def test_false_positive_detected(self):
        h = memorize(_sample([(0.9, 1)]))
        f = IntervalConcept(IntervalSet.closed(0.0, 0.5))
        with pytest.raises(InvariantError):
            memorization_loss(h, f, 0.1, UniformInterval())


class TestMemorizationLoss:
    def setup_method(self):
        self.h = memorize(_sample([(0.5, 1)]))
        self.f = IntervalConcept(IntervalSet.closed(0.25, 0.75))

    def test_monte_carlo_matches_exact(self):
        # true positives farther than r=0.1 from 0.5: [0.25, 0.4) U (0.6, 0.75], mass 0.3
        exact = exact_memorization_loss_1d(self.h, self.f.positive, 0.1, [(0.0, 1.0, 1.0)])
        np.testing.assert_allclose(exact, 0.3, atol=1e-12)
        est = memorization_loss(self.h, self.f, 0.1, UniformInterval(), n_mc=40_000, rng=stream(1, "t"))
        assert abs(est.value - exact) <= 3 * est.stderr

    def test_matches_generic_improvement_loss(self, rng):
        for x in rng.uniform(0, 1, 300):
            p = np.array([x])
            want = improvement_loss(p, self.h, self.f, Ball(0.1))
            exact_pointwise = int(self.f(p) == 1 and abs(x - 0.5) > 0.1)
            assert want == exact_pointwise

    def test_monotone_in_radius(self):
        vals = [
            exact_memorization_loss_1d(self.h, self.f.positive, r, [(0.0, 1.0, 1.0)])
            for r in np.linspace(0, 0.3, 31)
        ]
        assert np.all(np.diff(vals) <= 1e-12)
        np.testing.assert_allclose(vals[-1], 0.0, atol=1e-12)

    def test_true_negatives_never_err(self):
        grid = np.linspace(-1, 2, 601)
        assert negatives_zero_loss(self.h, self.f, 0.3, grid)


class TestCovering:
    def test_sample_sizes(self):
        assert covering_sample_size(0.1, 10, 0.1) == 47
        assert covering_sample_size(0.05, 20, 0.1) == 106
        assert memorization_sample_size(0.05, 20, 0.1, 0.5) == 212

    def test_sample_size_guards(self):
        with pytest.raises(ParameterError):
            covering_sample_size(0, 10, 0.1)
        with pytest.raises(ParameterError):
            memorization_sample_size(0.1, 10, 0.1, 0)

    def test_two_cells_three_draws(self):
        dist, cover = unit_cells(2)
        rows = covering_experiment(dist, cover, 3, 4000, seed=5)
        freq = np.mean([r.hit for r in rows])
        p = coupon_success_probability(2, 3)
        np.testing.assert_allclose(p, 0.75)
        assert abs(freq - p) <= 3 * math.sqrt(p * (1 - p) / 4000)

    def test_zero_draws_never_cover(self):
        dist, cover = unit_cells(3)
        assert not any(r.hit for r in covering_experiment(dist, cover, 0, 10))

    def test_union_bound_dominates_failure(self):
        for N, m in [(5, 10), (10, 47), (20, 60)]:
            assert 1 - coupon_success_probability(N, m) <= union_bound_failure(N, 1 / N, m) + 1e-12

    def test_greedy_cover_covers(self, rng):
        pts = rng.uniform(0, 1, size=(300, 2))
        cover = greedy_cover(pts, 0.2)
        assert cover.membership(pts).any(axis=1).all()
        c = cover.centers
        d = np.linalg.norm(c[:, None] - c[None, :], axis=2)
        assert np.all(d[~np.eye(len(c), dtype=bool)] > 0.1)

    def test_cell_mixture_cover_verifies(self):
        dist, fstar, cover = cell_mixture(10, 0.1)
        assert cover.N == 10
        # every cell holds 1/N of the positive part; as a fraction of the full mixture it is half that
        half = CoverSpec(cover.centers, cover.radius, 0.5, 0.5 / 10)
        assert half.verify(dist, n_mc=20_000)

    def test_memorize_pac_rows(self):
        rows = memorize_pac(N=5, r=0.1, m=40, trials=20, seed=2)
        assert all(r.negatives_ok for r in rows)
        assert all(0 <= r.loss <= 0.5 for r in rows)
        again = memorize_pac(N=5, r=0.1, m=40, trials=5, seed=2, start=15)
        assert rows[15:] == again


class TestSpreadPoints:
    def test_spacing(self):
        pts = spread_points(5, 0.1)
        np.testing.assert_allclose(np.diff(pts[:, 0]), 0.2)

    @pytest.mark.parametrize("name", sorted(LEARNERS))
    def test_each_unseen_point_costs_a_mistake(self, name):
        rows = spread_points_lower_bound(0.1, 0.1, 8, 50, learner=name, seed=3)
        for r in rows:
            assert r.loss >= r.unsampled / 10 - 1e-12

    def test_memorize_is_perfect_once_everything_is_seen(self):
        pts = spread_points(4, 0.1)
        labels = np.array([1, 0, 1, 1], dtype=np.int8)
        positives = pts[labels == 1]
        loss, fstar = spread_adversary_loss(positives, pts, labels, np.ones(4, bool), 0.1)
        assert loss == 0.0
        np.testing.assert_array_equal(fstar, labels)

    def test_adversary_completion(self):
        pts = spread_points(3, 0.1)
        labels = np.array([1, 0, 0], dtype=np.int8)
        sampled = np.array([True, False, False])
        # hypothesis positive at the unseen point 1: the adversary makes it negative
        loss, fstar = spread_adversary_loss(pts[[0, 1]], pts, labels, sampled, 0.1)
        np.testing.assert_array_equal(fstar, [1, 0, 1])
        np.testing.assert_allclose(loss, 2 / 3)

    def test_non_integer_inverse_beta(self):
        with pytest.raises(ParameterError):
            spread_points_lower_bound(0.3, 0.1, 5, 1)

    def test_coupon_probability_extremes(self):
        assert coupon_success_probability(4, 3) == pytest.approx(0.0, abs=1e-12)
        assert coupon_success_probability(1, 1) == pytest.approx(1.0)


class TestUnionOfIntervals:
    @pytest.mark.parametrize("b", [0.26, 0.3, 0.45, 0.5, 0.6, 0.74])
    def test_loss_is_distance_to_nearest_end(self, b):
        # points outside [1/4, 3/4] within 1/2 of b all reach the hole at b
        fstar = union_interval_concept(b)
        for bp in b_grid(21):
            if abs(bp - b) < 1e-12:
                continue
            np.testing.assert_allclose(exact_loss_1d(union_interval_concept(bp), fstar, 0.5), min(b, 1 - b), atol=1e-12)

    def test_correct_hypothesis_has_zero_loss(self):
        f = union_interval_concept(0.4)
        assert exact_loss_1d(f, f, 0.5) == 0.0

    def test_no_violations_on_grid(self):
        assert union_interval_violations(0.5, 31) == []

    def test_exact_integration_matches_fine_grid(self):
        h, f = union_interval_concept(0.6), union_interval_concept(0.35)
        xs = (np.arange(4000) + 0.5) / 4000
        riemann = np.mean([improvement_loss(np.array([x]), h, f, Ball(0.5)) for x in xs])
        np.testing.assert_allclose(exact_loss_1d(h, f, 0.5), riemann, atol=1e-3)

    def test_demo_losses(self):
        rows = union_interval_demo(trials=20, m=30, seed=4, grid_size=41)
        for r in rows:
            if r.b_hat != r.b:
                assert r.loss >= 0.25
            else:
                assert r.loss == 0.0
