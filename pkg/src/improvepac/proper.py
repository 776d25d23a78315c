"""Proper learning with improvements on finite concept classes.

Includes the learner that returns the least consistent concept whenever the
sample contains a negative example, the improvement-map construction that
defeats every proper learner on classes that are not nearly minimally
consistent, and a seeded PAC trial loop.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .classprops import ConceptClass, least_consistent
from .core import (
    Distribution,
    Explicit,
    FiniteConcept,
    FiniteWeighted,
    ImprovementMap,
    LabeledSample,
    population_loss,
    sample,
)
from .errors import DomainError, ParameterError, PropertyViolationError, RealizabilityError
from .rng import stream


class Branch(enum.Enum):
    LEAST_CONSISTENT = "LeastConsistent"
    ANY_CONSISTENT = "AnyConsistent"


@dataclass(frozen=True)
class ProperLearnerOutput:
    hypothesis: FiniteConcept
    branch: Branch


def algorithm1(cls: ConceptClass, S) -> ProperLearnerOutput:
    """Least consistent concept if S has a negative example, else the first consistent one."""
    if not isinstance(S, LabeledSample):
        S = LabeledSample.from_pairs(cls.space, S)
    consistent = cls.consistent(S)
    if not consistent:
        raise RealizabilityError("sample is not realizable by the class")
    if S.has_negative():
        g = least_consistent(cls, S)
        if g is None:
            raise PropertyViolationError(
                "no least consistent concept for a sample with a negative example; "
                "the class is not nearly minimally consistent",
                witness={"S": S.items},
            )
        return ProperLearnerOutput(g, Branch.LEAST_CONSISTENT)
    return ProperLearnerOutput(cls.concepts[consistent[0]], Branch.ANY_CONSISTENT)


def sample_size(eps: float, delta: float, vc: int, c: float = 8.0) -> int:
    """ceil((c/eps) * (VC + ln(1/delta)))."""
    if not (0 < eps < 1 and 0 < delta < 1):
        raise ParameterError("eps and delta must lie in (0, 1)")
    return math.ceil((c / eps) * (vc + math.log(1 / delta)))


def _validate_witness(cls: ConceptClass, witness) -> tuple[int, list[tuple[int, int]]]:
    f_idx = witness["f"] if isinstance(witness, dict) else witness[0]
    pairs = witness["S"] if isinstance(witness, dict) else witness[1]
    pairs = [(int(x), int(y)) for x, y in pairs]
    if not 0 <= f_idx < len(cls):
        raise DomainError("witness concept index out of range")
    f = cls[f_idx]
    if not pairs or any(f(x) != y for x, y in pairs):
        raise DomainError("witness sample must be a nonempty subset of graph(f)")
    if not any(y == 0 for _, y in pairs):
        raise DomainError("witness sample must contain a negative example")
    if least_consistent(cls, pairs) is not None:
        raise DomainError("witness sample admits a least consistent concept")
    return f_idx, pairs


def hardness_delta(cls: ConceptClass, witness) -> tuple[Explicit, FiniteWeighted]:
    """Improvement map and distribution on which no proper learner succeeds.

    The first negative instance of the witness sample may move anywhere; all
    other instances cannot move. The distribution is uniform over the
    witness instances.
    """
    _, pairs = _validate_witness(cls, witness)
    x_neg = next(x for x, y in pairs if y == 0)
    n = cls.n
    sets = tuple(frozenset(range(n)) if x == x_neg else frozenset() for x in range(n))
    return Explicit(n, sets), FiniteWeighted.uniform_over(n, [x for x, _ in pairs])


def hardness_value(cls: ConceptClass, witness, consistent_only: bool = True) -> dict:
    """Exact min over proper hypotheses of the worst-case (over consistent targets) loss."""
    _, pairs = _validate_witness(cls, witness)
    delta, dist = hardness_delta(cls, witness)
    targets = cls.consistent(pairs)
    candidates = targets if consistent_only else range(len(cls))
    worst = {}
    for g in candidates:
        worst[g] = max(
            population_loss(cls[g], cls[t], delta, dist).value for t in targets
        )
    g_best = min(worst, key=worst.get)
    return {
        "min_worst_loss": worst[g_best],
        "argmin": g_best,
        "bound": 1.0 / len({x for x, _ in pairs}),
        "per_hypothesis": worst,
    }


@dataclass(frozen=True)
class TrialRow:
    trial: int
    m: int
    loss: float
    branch: str
    seed: int


def pac_trial(cls, fstar, delta, dist, m, seed, trial) -> TrialRow:
    rng = stream(seed, "proper", trial)
    S = sample(dist, fstar, m, rng)
    out = algorithm1(cls, S)
    loss = population_loss(out.hypothesis, fstar, delta, dist).value
    return TrialRow(trial, m, loss, out.branch.value, seed)


def pac_experiment(
    cls: ConceptClass,
    fstar: FiniteConcept,
    delta: ImprovementMap,
    dist: Distribution,
    m: int,
    trials: int,
    seed: int = 0,
    start: int = 0,
) -> list[TrialRow]:
    """Per-trial exact improvement loss of the proper learner's output."""
    if fstar not in cls.concepts:
        raise DomainError("target concept must belong to the class")
    if not dist.is_finite:
        raise DomainError("proper experiments run on finite distributions")
    return [pac_trial(cls, fstar, delta, dist, m, seed, t) for t in range(start, start + trials)]


def random_explicit_map(n: int, rng: np.random.Generator, p: float = 0.5) -> Explicit:
    return Explicit(n, tuple(frozenset(int(v) for v in np.flatnonzero(rng.random(n) < p)) for _ in range(n)))


def random_weights(n: int, rng: np.random.Generator, seed: int = 0) -> FiniteWeighted:
    w = rng.dirichlet(np.ones(n))
    w[-1] = 1.0 - w[:-1].sum()
    return FiniteWeighted(tuple(float(v) for v in w), seed)
