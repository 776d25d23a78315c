import math

import numpy as np
import pytest

from improvepac.classprops import (
    ConceptClass,
    intervals_class,
    is_nearly_minimally_consistent,
    leave_one_out_class,
    random_class,
)
from improvepac.core import Explicit, FiniteConcept, FiniteWeighted, population_loss
from improvepac.errors import DomainError, ParameterError, PropertyViolationError, RealizabilityError
from improvepac.proper import (
    Branch,
    algorithm1,
    hardness_delta,
    hardness_value,
    pac_experiment,
    random_explicit_map,
    random_weights,
    sample_size,
)


class TestAlgorithm1:
    def test_least_branch_on_negative(self):
        cls = intervals_class(4)
        out = algorithm1(cls, [(1, 1), (3, 0)])
        assert out.branch is Branch.LEAST_CONSISTENT
        assert out.hypothesis.support == frozenset({1})

    def test_any_branch_without_negative(self):
        out = algorithm1(intervals_class(4), [(1, 1), (2, 1)])
        assert out.branch is Branch.ANY_CONSISTENT
        assert {1, 2} <= out.hypothesis.support

    def test_unrealizable_sample(self):
        with pytest.raises(RealizabilityError):
            algorithm1(intervals_class(3), [(1, 1), (1, 0)])

    def test_failure_on_class_without_least_element(self):
        # {0} and {1} are both consistent with a lone negative at 2, and neither is inside the other
        cls = ConceptClass.from_bits([[1, 0, 0], [0, 1, 0], [1, 1, 0]])
        with pytest.raises(PropertyViolationError):
            algorithm1(cls, [(2, 0)])

    def test_output_is_consistent_and_inside_target(self, rng):
        # whenever the least branch fires, the output's support sits inside the target's
        for _ in range(50):
            cls = random_class(5, 10, rng)
            if not is_nearly_minimally_consistent(cls).holds:
                continue
            f = cls[int(rng.integers(len(cls)))]
            S = [(int(x), f(int(x))) for x in rng.integers(0, 5, size=4)]
            out = algorithm1(cls, S)
            assert all(out.hypothesis(x) == y for x, y in S)
            if out.branch is Branch.LEAST_CONSISTENT:
                assert out.hypothesis.support <= f.support


class TestSampleSize:
    def test_formula(self):
        assert sample_size(0.1, 0.05, 3) == math.ceil(80 * (3 + math.log(20)))
        assert sample_size(0.5, 0.5, 0) == math.ceil(16 * math.log(2))

    @pytest.mark.parametrize("eps,delta", [(0, 0.1), (1, 0.1), (0.1, 0), (0.1, 1.5)])
    def test_rejects_bad_parameters(self, eps, delta):
        with pytest.raises(ParameterError):
            sample_size(eps, delta, 1)


class TestHardness:
    def _witness(self, cls):
        rep = is_nearly_minimally_consistent(cls)
        assert not rep.holds
        return rep.witness

    def test_every_proper_hypothesis_suffers(self, rng):
        found = 0
        while found < 10:
            cls = random_class(4, 6, rng)
            if is_nearly_minimally_consistent(cls).holds:
                continue
            found += 1
            w = self._witness(cls)
            val = hardness_value(cls, w, consistent_only=False)
            assert val["min_worst_loss"] >= val["bound"] - 1e-12

    def test_map_moves_only_the_negative(self):
        cls = ConceptClass.from_bits([[1, 0, 0], [0, 1, 0], [1, 1, 0]])
        w = self._witness(cls)
        delta, dist = hardness_delta(cls, w)
        x_neg = next(x for x, y in w["S"] if y == 0)
        for x in range(cls.n):
            assert delta.neighbors(x) == (frozenset(range(cls.n)) if x == x_neg else frozenset())
        np.testing.assert_allclose(sum(dist.weights), 1.0)

    def test_witness_validation(self):
        cls = leave_one_out_class(3)
        with pytest.raises(DomainError):
            hardness_delta(cls, {"f": 0, "S": [[1, 1]]})
        with pytest.raises(DomainError):
            hardness_delta(cls, {"f": 0, "S": [[0, 1]]})


class TestExperiment:
    def setup_method(self):
        self.cls = intervals_class(5)
        self.f = self.cls[3]
        self.delta = Explicit.everything(5)
        self.dist = FiniteWeighted.uniform(5, seed=4)

    def test_deterministic(self):
        a = pac_experiment(self.cls, self.f, self.delta, self.dist, 20, 10, seed=1)
        b = pac_experiment(self.cls, self.f, self.delta, self.dist, 20, 10, seed=1)
        assert a == b

    def test_start_offset_matches_full_run(self):
        full = pac_experiment(self.cls, self.f, self.delta, self.dist, 8, 10, seed=2)
        tail = pac_experiment(self.cls, self.f, self.delta, self.dist, 8, 4, seed=2, start=6)
        assert full[6:] == tail

    def test_losses_are_exact(self):
        rows = pac_experiment(self.cls, self.f, self.delta, self.dist, 20, 5, seed=3)
        for r in rows:
            assert r.loss in {k / 5 for k in range(6)}

    def test_target_must_belong(self):
        with pytest.raises(DomainError):
            pac_experiment(self.cls, FiniteConcept.from_bits([1, 0, 1, 0, 1]), self.delta, self.dist, 5, 1)

    def test_random_helpers(self, rng):
        w = random_weights(6, rng)
        np.testing.assert_allclose(sum(w.weights), 1.0)
        d = random_explicit_map(6, rng)
        assert len(d.sets) == 6
