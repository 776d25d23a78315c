import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from improvepac.intervals import Interval, IntervalSet


def _interval_sets():
    # multiples of 1/8 keep shifts exact in binary floating point
    bound = st.integers(-40, 40).map(lambda k: k / 8)
    iv = st.tuples(bound, bound, st.booleans(), st.booleans()).map(
        lambda t: Interval(min(t[0], t[1]), max(t[0], t[1]), t[2], t[3])
    )
    return st.lists(iv, max_size=4).map(IntervalSet)


PROBES = np.concatenate([np.arange(-48, 49) / 8, np.arange(-48, 48) / 8 + 1 / 16])


class TestInterval:
    def test_open_point_is_empty(self):
        assert Interval(1.0, 1.0, True, False).is_empty()
        assert not Interval(1.0, 1.0).is_empty()

    def test_endpoint_membership(self):
        iv = Interval(0.0, 1.0, False, True)
        assert not iv.contains(0.0)
        assert iv.contains(1.0)

    def test_intersect_keeps_strictest_endpoint(self):
        a = Interval(0.0, 2.0, True, True)
        b = Interval(0.0, 1.0, False, True)
        out = a.intersect(b)
        assert (out.lo, out.hi, out.lo_closed, out.hi_closed) == (0.0, 1.0, False, True)


class TestIntervalSet:
    def test_merge_touching(self):
        s = IntervalSet([Interval(0, 1, True, False), Interval(1, 2)])
        assert len(s.intervals) == 1
        assert s.measure == 2.0

    def test_gap_at_open_point_is_preserved(self):
        s = IntervalSet([Interval(0, 1, True, False), Interval(1, 2, False, True)])
        assert not s.contains(1.0)
        assert s.measure == 2.0

    def test_complement_of_empty_is_line(self):
        assert IntervalSet.empty().complement() == IntervalSet.real_line()

    @settings(max_examples=200, deadline=None)
    @given(_interval_sets(), _interval_sets())
    def test_set_algebra_matches_pointwise(self, a, b):
        for x in PROBES:
            assert a.union(b).contains(x) == (a.contains(x) or b.contains(x))
            assert a.intersect(b).contains(x) == (a.contains(x) and b.contains(x))
            assert a.difference(b).contains(x) == (a.contains(x) and not b.contains(x))
            assert a.complement().contains(x) == (not a.contains(x))

    @settings(max_examples=100, deadline=None)
    @given(_interval_sets(), st.integers(-24, 24).map(lambda k: k / 8))
    def test_shift_translates_membership(self, a, dx):
        shifted = a.shift(dx)
        for x in PROBES:
            assert shifted.contains(x + dx) == a.contains(x)

    @settings(max_examples=100, deadline=None)
    @given(_interval_sets(), _interval_sets())
    def test_inclusion_exclusion(self, a, b):
        lhs = a.union(b).measure + a.intersect(b).measure
        np.testing.assert_allclose(lhs, a.measure + b.measure, atol=1e-9)
