import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from improvepac.classprops import (
    ConceptClass,
    all_classes,
    all_labelings,
    closure,
    disjoint_singletons_class,
    intervals_class,
    is_intersection_closed,
    is_minimally_consistent,
    is_nearly_minimally_consistent,
    least_consistent,
    leave_one_out_class,
    random_class,
    random_closure_system,
    shattered_witness,
    singletons_plus_empty,
    vc_dimension,
)
from improvepac.errors import CapabilityError, DomainError


# ---------------------------------------------------------------------------
# set-based oracles, written directly from the definitions
# ---------------------------------------------------------------------------


def supports(cls):
    return [frozenset(i for i, b in enumerate(c.bits) if b) for c in cls]


def oracle_vc(cls):
    sups = supports(cls)
    best = 0
    for k in range(1, cls.n + 1):
        for T in itertools.combinations(range(cls.n), k):
            if len({s & frozenset(T) for s in sups}) == 2 ** k:
                best = k
    return best


def oracle_consistency(cls, need_negative):
    sups = supports(cls)
    for f in sups:
        for k in range(1, cls.n + 1):
            for S in itertools.combinations(range(cls.n), k):
                labels = {x: x in f for x in S}
                if need_negative and all(labels.values()):
                    continue
                cons = [g for g in sups if all((x in g) == y for x, y in labels.items())]
                if not any(all(g <= h for h in cons) for g in cons):
                    return False
    return True


def oracle_intersection_closed(cls):
    sups = set(supports(cls))
    X = frozenset(range(cls.n))
    for k in range(cls.n + 1):
        for S in itertools.combinations(range(cls.n), k):
            sup = [h for h in sups if frozenset(S) <= h]
            c = frozenset.intersection(*sup) if sup else X
            if c not in sups:
                return False
    return True


small_classes = st.integers(1, 4).flatmap(
    lambda n: st.sets(st.integers(0, 2 ** n - 1), min_size=1, max_size=2 ** n).map(
        lambda ms: ConceptClass.from_masks(n, sorted(ms))
    )
)


class TestOracles:
    @settings(max_examples=200, deadline=None)
    @given(small_classes)
    def test_properties_match_definitions(self, cls):
        assert vc_dimension(cls) == oracle_vc(cls)
        assert is_minimally_consistent(cls).holds == oracle_consistency(cls, False)
        assert is_nearly_minimally_consistent(cls).holds == oracle_consistency(cls, True)
        assert is_intersection_closed(cls).holds == oracle_intersection_closed(cls)

    @settings(max_examples=100, deadline=None)
    @given(small_classes)
    def test_witnesses_are_genuine(self, cls):
        rep = is_nearly_minimally_consistent(cls)
        if rep.holds:
            return
        f = cls[rep.witness["f"]]
        S = rep.witness["S"]
        assert all(f(x) == y for x, y in S)
        assert any(y == 0 for _, y in S)
        assert least_consistent(cls, S) is None

    @settings(max_examples=100, deadline=None)
    @given(small_classes)
    def test_shattered_witness_is_shattered(self, cls):
        T = frozenset(shattered_witness(cls))
        assert len(T) == vc_dimension(cls)
        assert len({s & T for s in supports(cls)}) == 2 ** len(T)


class TestHierarchy:
    def test_every_class_on_three_points(self):
        # intersection-closed => minimally consistent => nearly minimally consistent
        for cls in itertools.islice(all_classes(3), None):
            ic = is_intersection_closed(cls).holds
            mc = is_minimally_consistent(cls).holds
            nmc = is_nearly_minimally_consistent(cls).holds
            assert (not ic) or mc
            assert (not mc) or nmc

    def test_disjoint_singletons_separate_ic_from_mc(self):
        cls = disjoint_singletons_class()
        assert is_minimally_consistent(cls).holds
        assert not is_intersection_closed(cls).holds

    def test_leave_one_out_separates_mc_from_nmc(self):
        cls = leave_one_out_class(3)
        assert is_nearly_minimally_consistent(cls).holds
        assert not is_minimally_consistent(cls).holds

    def test_random_closure_systems_are_closed(self, rng):
        for _ in range(10):
            cls = random_closure_system(6, 4, rng)
            assert is_intersection_closed(cls).holds

    def test_reference_classes(self):
        assert vc_dimension(all_labelings(4)) == 4
        assert vc_dimension(intervals_class(6)) == 2
        assert vc_dimension(singletons_plus_empty(5)) == 1
        assert is_intersection_closed(intervals_class(5)).holds
        assert is_intersection_closed(singletons_plus_empty(4)).holds is False


class TestClosureAndLeast:
    def test_closure_of_uncovered_set_is_everything(self):
        cls = singletons_plus_empty(3)
        assert closure(cls, [0, 1]) == frozenset({0, 1, 2})
        assert closure(cls, [2]) == frozenset({2})
        assert closure(cls, []) == frozenset()

    def test_least_consistent_is_below_every_consistent(self, rng):
        for _ in range(30):
            cls = random_class(5, 12, rng)
            f = cls[int(rng.integers(len(cls)))]
            S = [(int(x), f(int(x))) for x in rng.choice(5, size=3, replace=False)]
            g = least_consistent(cls, S)
            cons = [cls[i] for i in cls.consistent(S)]
            if g is not None:
                assert all(g.support <= c.support for c in cons)
            else:
                assert not any(all(c.support <= d.support for d in cons) for c in cons)

    def test_closure_rejects_out_of_range(self):
        with pytest.raises(DomainError):
            closure(leave_one_out_class(3), [3])


class TestValidation:
    def test_duplicates_rejected(self):
        with pytest.raises(DomainError):
            ConceptClass.from_bits([[0, 1], [0, 1]])

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            ConceptClass.from_bits([])

    def test_exhaustive_limit(self):
        cls = ConceptClass.from_masks(30, [0, 1])
        with pytest.raises(CapabilityError):
            is_minimally_consistent(cls)

    def test_matrix_shape(self):
        cls = leave_one_out_class(4)
        np.testing.assert_array_equal(cls.matrix, 1 - np.eye(4, dtype=np.int8))

    def test_report_serializes(self):
        rep = is_minimally_consistent(leave_one_out_class(3))
        assert '"MinimallyConsistent"' in rep.to_json()
