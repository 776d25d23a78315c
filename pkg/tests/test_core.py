import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from improvepac.core import (
    TOL,
    Ball,
    Cap,
    Explicit,
    FiniteConcept,
    FiniteSupportConcept,
    FiniteWeighted,
    HalfspaceConcept,
    InstanceSpace,
    IntervalConcept,
    UniformInterval,
    UniformSphere,
    angle_of,
    improvement_loss,
    population_loss,
    reaction_set,
    sample,
    strategic_loss,
    unit,
    wrap_angle,
    zero_one_loss,
)
from improvepac.errors import CapabilityError, DomainError, ParameterError
from improvepac.intervals import Interval, IntervalSet
from improvepac.rng import stream


# ---------------------------------------------------------------------------
# brute-force oracles
# ---------------------------------------------------------------------------


def oracle_reaction(x, hbits, sets):
    if hbits[x]:
        return {x}
    pos = {v for v in sets[x] if hbits[v]}
    return pos or {x}


def oracle_losses(x, hbits, fbits, sets):
    rs = oracle_reaction(x, hbits, sets)
    imp = max(int(hbits[v] != fbits[v]) for v in rs)
    strat = max(int(hbits[v] != fbits[x]) for v in rs)
    return imp, strat


def oracle_chart_loss(x, r, h_contains, f_contains, breakpoints, origin=False):
    """Exact worst case over the reaction set by probing every cell of the window."""
    # reachability carries the library's 1e-9 boundary tolerance
    lo, hi = x - r - TOL, x + r + TOL
    pts = sorted({p for p in breakpoints if lo <= p <= hi} | {lo, hi})
    probes = pts + [(a + b) / 2 for a, b in zip(pts, pts[1:])]
    if h_contains(x):
        return int(not f_contains(x))
    reach = [p for p in probes if h_contains(p)]
    if not reach:
        return int(f_contains(x))
    if origin:
        return int(not f_contains(x))
    return int(any(not f_contains(p) for p in reach))


finite_instances = st.integers(1, 6).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.lists(st.integers(0, 1), min_size=n, max_size=n),
        st.lists(st.integers(0, 1), min_size=n, max_size=n),
        st.lists(st.frozensets(st.integers(0, n - 1)), min_size=n, max_size=n),
    )
)


class TestFiniteLosses:
    @settings(max_examples=300, deadline=None)
    @given(finite_instances)
    def test_losses_match_oracle(self, inst):
        n, hb, fb, sets = inst
        h, f = FiniteConcept.from_bits(hb), FiniteConcept.from_bits(fb)
        delta = Explicit(n, tuple(sets))
        for x in range(n):
            assert reaction_set(x, h, delta) == oracle_reaction(x, hb, sets)
            imp, strat = oracle_losses(x, hb, fb, sets)
            assert improvement_loss(x, h, f, delta) == imp
            assert strategic_loss(x, h, f, delta) == strat
            assert zero_one_loss(x, h, f) == int(hb[x] != fb[x])

    @settings(max_examples=100, deadline=None)
    @given(finite_instances)
    def test_identity_map_reduces_to_zero_one(self, inst):
        n, hb, fb, _ = inst
        h, f = FiniteConcept.from_bits(hb), FiniteConcept.from_bits(fb)
        delta = Explicit.identity(n)
        for x in range(n):
            assert improvement_loss(x, h, f, delta) == zero_one_loss(x, h, f)

    def test_exact_population_loss(self):
        h = FiniteConcept.from_bits([0, 1, 0])
        f = FiniteConcept.from_bits([0, 0, 1])
        delta = Explicit.everything(3)
        dist = FiniteWeighted((0.5, 0.25, 0.25))
        # every point moves to instance 1, which f labels negative
        est = population_loss(h, f, delta, dist)
        assert est.exact
        np.testing.assert_allclose(est.value, 1.0)
        # with truth at the origin only x=2 (f=1, accepted at 1) is charged nothing
        est = population_loss(h, f, delta, dist, loss="strategic")
        np.testing.assert_allclose(est.value, 0.75)

    def test_strategic_and_improvement_disagree(self):
        # x=0 is negative, moves to 1, which truly is positive: improvement forgives it
        h = FiniteConcept.from_bits([0, 1])
        f = FiniteConcept.from_bits([0, 1])
        delta = Explicit(2, (frozenset({1}), frozenset()))
        assert improvement_loss(0, h, f, delta) == 0
        assert strategic_loss(0, h, f, delta) == 1

    def test_bad_instance_rejected(self):
        h = FiniteConcept.from_bits([0, 1])
        with pytest.raises(DomainError):
            improvement_loss(2, h, h, Explicit.identity(2))
        with pytest.raises(DomainError):
            improvement_loss(True, h, h, Explicit.identity(2))

    def test_mixed_spaces_rejected(self):
        with pytest.raises(DomainError):
            improvement_loss(0, FiniteConcept.from_bits([0]), FiniteConcept.from_bits([0, 1]), Explicit.identity(2))

    def test_unknown_loss_rejected(self):
        h = FiniteConcept.from_bits([0])
        with pytest.raises(ParameterError):
            population_loss(h, h, Explicit.identity(1), FiniteWeighted.uniform(1), loss="hinge")


def _union(pairs):
    return IntervalSet(Interval(lo, hi) for lo, hi in pairs)


interval_pairs = st.lists(
    st.tuples(st.integers(-16, 16), st.integers(0, 8)).map(lambda t: (t[0] / 4, (t[0] + t[1]) / 4)),
    max_size=3,
)


class TestLineLosses:
    @settings(max_examples=200, deadline=None)
    @given(interval_pairs, interval_pairs, st.floats(-5, 5), st.sampled_from([0.0, 0.25, 0.5, 1.3]))
    def test_closed_form_matches_cell_oracle(self, hp, fp, x, r):
        h, f = IntervalConcept(_union(hp)), IntervalConcept(_union(fp))
        bps = [p for pair in hp + fp for p in pair]
        for origin, fn in ((False, improvement_loss), (True, strategic_loss)):
            want = oracle_chart_loss(x, r, h.positive.contains, f.positive.contains, bps, origin)
            assert fn(np.array([x]), h, f, Ball(r)) == want

    def test_finite_support_hypothesis_uses_enumeration(self):
        h = FiniteSupportConcept(np.array([[0.5]]), InstanceSpace.euclidean(1))
        f = IntervalConcept(IntervalSet.closed(0.4, 0.6))
        assert improvement_loss(np.array([0.3]), h, f, Ball(0.25)) == 0
        # out of reach and truly negative: stays put, correctly rejected
        assert improvement_loss(np.array([0.2]), h, f, Ball(0.25)) == 0
        g = IntervalConcept(IntervalSet.closed(0.0, 0.1))
        assert improvement_loss(np.array([0.05]), h, g, Ball(0.25)) == 1
        assert reaction_set(np.array([0.3]), h, Ball(0.25)) == frozenset({(0.5,)})

    def test_monte_carlo_agrees_with_closed_form(self):
        h = IntervalConcept(IntervalSet.closed(0.5, 1.0))
        f = IntervalConcept(IntervalSet.closed(0.4, 1.0))
        est = population_loss(h, f, Ball(0.2), UniformInterval(0.0, 1.0), n_mc=20_000, rng=stream(3, "mc"))
        # midpoint-rule value of the exact loss
        grid = (np.arange(20_000) + 0.5) / 20_000
        exact = np.mean([
            oracle_chart_loss(x, 0.2, h.positive.contains, f.positive.contains, [0.4, 0.5, 1.0])
            for x in grid
        ])
        assert abs(est.value - exact) <= 3 * max(est.stderr, 1e-3)


class TestCircleLosses:
    @settings(max_examples=200, deadline=None)
    @given(
        st.floats(-math.pi, math.pi),
        st.floats(-math.pi, math.pi),
        st.floats(-math.pi, math.pi),
        st.sampled_from([0.0, 0.1, 0.7, 2.0]),
    )
    def test_halfspaces_match_cell_oracle(self, wh, wf, phi, r):
        h, f = HalfspaceConcept(unit(wh)), HalfspaceConcept(unit(wf))
        # work on the unwrapped line of angles around phi
        def on(w):
            return lambda a: math.cos(a - w) >= -1e-12
        bps = [w + s * math.pi / 2 + k * 2 * math.pi for w in (wh, wf) for s in (-1, 1) for k in (-1, 0, 1)]
        want = oracle_chart_loss(phi, r, on(wh), on(wf), bps)
        # skip configurations within rounding distance of a tangency
        near = min(abs(wrap_angle(b - phi - s * r)) for b in bps for s in (-1, 0, 1))
        if near < 1e-7:
            return
        assert improvement_loss(unit(phi), h, f, Cap(r)) == want

    def test_sampled_neighborhood_agrees(self, rng):
        h = HalfspaceConcept(unit(0.0))
        f = HalfspaceConcept(unit(0.4))
        cap = Cap(0.3)
        for phi in rng.uniform(-math.pi, math.pi, 200):
            offsets = np.linspace(-0.3, 0.3, 6001)
            pts = np.stack([np.cos(phi + offsets), np.sin(phi + offsets)], axis=1)
            x = unit(phi)
            if h(x):
                want = int(f(x) == 0)
            else:
                reach = pts[h.evaluate(pts) == 1]
                want = int(f(x) == 1) if len(reach) == 0 else int(np.any(f.evaluate(reach) == 0))
            assert improvement_loss(x, h, f, cap) == want

    def test_gaussian_space_has_no_chart(self):
        h = HalfspaceConcept(np.array([1.0, 0.0]), InstanceSpace.euclidean(2))
        with pytest.raises(CapabilityError):
            improvement_loss(np.array([-0.1, 0.0]), h, h, Ball(0.5))

    def test_off_sphere_point_rejected(self):
        h = HalfspaceConcept(unit(0.0))
        with pytest.raises(DomainError):
            improvement_loss(np.array([2.0, 0.0]), h, h, Cap(0.1))


class TestSampling:
    def test_labels_follow_target(self, rng):
        f = HalfspaceConcept(unit(1.0))
        S = sample(UniformSphere(2), f, 500, rng)
        np.testing.assert_array_equal(S.labels, f.evaluate(S.points))
        assert len(S) == 500

    def test_zero_draws(self):
        f = FiniteConcept.from_bits([1, 0])
        S = sample(FiniteWeighted.uniform(2), f, 0)
        assert len(S) == 0 and not S.has_negative()

    def test_deterministic_stream(self):
        f = FiniteConcept.from_bits([1, 0, 1])
        a = sample(FiniteWeighted.uniform(3, seed=7), f, 50)
        b = sample(FiniteWeighted.uniform(3, seed=7), f, 50)
        np.testing.assert_array_equal(a.points, b.points)

    def test_weights_must_sum_to_one(self):
        with pytest.raises(DomainError):
            FiniteWeighted((0.5, 0.4))

    def test_angle_roundtrip(self):
        for a in np.linspace(-3, 3, 13):
            np.testing.assert_allclose(angle_of(unit(a)), a, atol=1e-12)
