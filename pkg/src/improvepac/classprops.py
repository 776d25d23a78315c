"""Exhaustive structural analysis of finite concept classes.

Concepts are handled internally as integer bitmasks of their supports, so a
subset scan over ``2^n`` instance sets costs ``O(2^n * |H|)`` word operations.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from .core import FiniteConcept, InstanceSpace, LabeledSample
from .errors import CapabilityError, DomainError, InvariantError

VC_LIMIT = 20
CONSISTENCY_LIMIT = 12


@dataclass(frozen=True)
class ConceptClass:
    space: InstanceSpace
    concepts: tuple

    def __post_init__(self):
        concepts = tuple(self.concepts)
        if not concepts:
            raise DomainError("a concept class must be nonempty")
        if any(c.space != self.space for c in concepts):
            raise DomainError("all concepts must share the class space")
        if len({c.bits for c in concepts}) != len(concepts):
            raise DomainError("duplicate concepts in class")
        object.__setattr__(self, "concepts", concepts)

    @classmethod
    def from_bits(cls, rows: Iterable[Sequence[int]]) -> "ConceptClass":
        rows = [tuple(r) for r in rows]
        if not rows:
            raise DomainError("a concept class must be nonempty")
        space = InstanceSpace.finite(len(rows[0]))
        return cls(space, tuple(FiniteConcept(space, r) for r in rows))

    @classmethod
    def from_masks(cls, n: int, masks: Iterable[int]) -> "ConceptClass":
        return cls.from_bits([[(m >> i) & 1 for i in range(n)] for m in masks])

    def __len__(self) -> int:
        return len(self.concepts)

    def __iter__(self) -> Iterator[FiniteConcept]:
        return iter(self.concepts)

    def __getitem__(self, i: int) -> FiniteConcept:
        return self.concepts[i]

    @property
    def n(self) -> int:
        return self.space.n

    @cached_property
    def masks(self) -> tuple:
        return tuple(c.mask for c in self.concepts)

    @cached_property
    def matrix(self) -> np.ndarray:
        """|H| x n array of labels."""
        return np.array([c.bits for c in self.concepts], dtype=np.int8)

    def index(self, concept: FiniteConcept) -> int:
        return self.concepts.index(concept)

    def consistent(self, sample) -> list[int]:
        """Indices of concepts consistent with ``sample`` (LabeledSample or pairs)."""
        pos, neg = _sample_masks(sample)
        return [i for i, m in enumerate(self.masks) if m & pos == pos and m & neg == 0]


@dataclass(frozen=True)
class PropertyReport:
    property: str
    holds: object  # bool, or int for VC
    witness: dict | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"property": self.property, "holds": self.holds, "witness": self.witness, **self.details}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _sample_masks(sample) -> tuple[int, int]:
    pairs = sample.items if isinstance(sample, LabeledSample) else list(sample)
    pos = neg = 0
    for x, y in pairs:
        if y:
            pos |= 1 << int(x)
        else:
            neg |= 1 << int(x)
    return pos, neg


def _mask_to_set(mask: int) -> list[int]:
    return [i for i in range(mask.bit_length()) if (mask >> i) & 1]


def _subsets_by_size(n: int, start: int = 0) -> Iterator[int]:
    """All subsets of range(n) as masks, by size then lexicographic order."""
    for k in range(start, n + 1):
        for combo in itertools.combinations(range(n), k):
            yield sum(1 << i for i in combo)


def _check_limit(cls: ConceptClass, limit: int, what: str):
    if cls.n > limit:
        raise CapabilityError(
            f"{what} enumerates all subsets; |X|={cls.n} exceeds the exhaustive limit {limit} "
            "(a sampling mode is not implemented)"
        )


def vc_dimension(cls: ConceptClass, limit: int = VC_LIMIT) -> int:
    _check_limit(cls, limit, "vc_dimension")
    best = 0
    masks = cls.masks
    for k in range(1, cls.n + 1):
        found = False
        for combo in itertools.combinations(range(cls.n), k):
            t = sum(1 << i for i in combo)
            if len({m & t for m in masks}) == 1 << k:
                found = True
                break
        if not found:
            break
        best = k
    return best


def shattered_witness(cls: ConceptClass) -> list[int]:
    d = vc_dimension(cls)
    for combo in itertools.combinations(range(cls.n), d):
        t = sum(1 << i for i in combo)
        if len({m & t for m in cls.masks}) == 1 << d:
            return list(combo)
    raise InvariantError("no shattered set of size vc_dimension")


def closure(cls: ConceptClass, S: Iterable[int]) -> frozenset:
    """Intersection of the supports containing S; the whole space if none does."""
    s = 0
    for x in S:
        if not 0 <= x < cls.n:
            raise DomainError(f"instance {x} outside the space")
        s |= 1 << x
    return frozenset(_mask_to_set(_closure_mask(cls.masks, s, (1 << cls.n) - 1)))


def _closure_mask(masks, s: int, full: int) -> int:
    out = full
    hit = False
    for m in masks:
        if m & s == s:
            out &= m
            hit = True
    return out if hit else full


def is_intersection_closed(cls: ConceptClass, limit: int = CONSISTENCY_LIMIT) -> PropertyReport:
    """Closure of every subset must itself be a support.

    The pairwise criterion (h1 & h2 in H for all pairs) is also computed. For a
    finite class the closure criterion is equivalent to pairwise closure plus
    membership of the full space (the closure of an uncovered set is the full
    space), and that relation is checked on every call.
    """
    _check_limit(cls, limit, "is_intersection_closed")
    full = (1 << cls.n) - 1
    supports = set(cls.masks)
    witness = None
    for s in _subsets_by_size(cls.n):
        c = _closure_mask(cls.masks, s, full)
        if c not in supports:
            witness = {"S": _mask_to_set(s), "closure": _mask_to_set(c)}
            break
    pairwise = all((a & b) in supports for a, b in itertools.combinations(cls.masks, 2))
    has_full = full in supports
    holds = witness is None
    if holds != (pairwise and has_full):
        raise InvariantError("closure and pairwise intersection criteria disagree")
    return PropertyReport(
        "IntersectionClosed",
        holds,
        witness,
        {"pairwise_closed": pairwise, "contains_full_space": has_full},
    )


def least_consistent(cls: ConceptClass, sample) -> FiniteConcept | None:
    """The consistent concept whose support lies inside every consistent support."""
    idx = cls.consistent(sample)
    if not idx:
        return None
    inter = (1 << cls.n) - 1
    for i in idx:
        inter &= cls.masks[i]
    for i in idx:
        if cls.masks[i] == inter:
            return cls.concepts[i]
    return None


def _consistency_scan(cls: ConceptClass, need_negative: bool) -> dict | None:
    masks = cls.masks
    for t in _subsets_by_size(cls.n, start=1):
        groups: dict[int, list[int]] = {}
        for i, m in enumerate(masks):
            groups.setdefault(m & t, []).append(i)
        for pattern, members in groups.items():
            if need_negative and pattern == t:
                continue
            inter = (1 << cls.n) - 1
            for i in members:
                inter &= masks[i]
            if not any(masks[i] == inter for i in members):
                f = members[0]
                S = [[x, (pattern >> x) & 1] for x in _mask_to_set(t)]
                return {"f": f, "S": S}
    return None


def is_minimally_consistent(cls: ConceptClass, limit: int = CONSISTENCY_LIMIT) -> PropertyReport:
    _check_limit(cls, limit, "is_minimally_consistent")
    w = _consistency_scan(cls, need_negative=False)
    return PropertyReport("MinimallyConsistent", w is None, w)


def is_nearly_minimally_consistent(cls: ConceptClass, limit: int = CONSISTENCY_LIMIT) -> PropertyReport:
    """Like minimal consistency, but only samples with a negative example count."""
    _check_limit(cls, limit, "is_nearly_minimally_consistent")
    w = _consistency_scan(cls, need_negative=True)
    return PropertyReport("NearlyMinimallyConsistent", w is None, w)


def vc_report(cls: ConceptClass) -> PropertyReport:
    d = vc_dimension(cls)
    return PropertyReport("VC", d, {"shattered": shattered_witness(cls)})


def properly_learnable(cls: ConceptClass) -> bool:
    """Finite classes always have finite VC dimension, so this is near-minimal consistency."""
    return bool(is_nearly_minimally_consistent(cls).holds)


# ---------------------------------------------------------------------------
# Class constructors
# ---------------------------------------------------------------------------


def disjoint_singletons_class() -> ConceptClass:
    """Two points, two concepts {x1}, {x2}: minimally consistent, not intersection-closed."""
    return ConceptClass.from_bits([[1, 0], [0, 1]])


def leave_one_out_class(n: int = 3) -> ConceptClass:
    """h_i(x_j) = 1[i != j]: nearly minimally consistent but not minimally consistent."""
    return ConceptClass.from_bits([[int(i != j) for j in range(n)] for i in range(n)])


def all_labelings(n: int) -> ConceptClass:
    return ConceptClass.from_masks(n, range(1 << n))


def intervals_class(n: int) -> ConceptClass:
    """Contiguous runs on a line of n points, including the empty concept."""
    masks = [0] + [sum(1 << i for i in range(a, b + 1)) for a in range(n) for b in range(a, n)]
    return ConceptClass.from_masks(n, masks)


def singletons_plus_empty(n: int) -> ConceptClass:
    return ConceptClass.from_masks(n, [0] + [1 << i for i in range(n)])


def all_classes(n: int) -> Iterator[ConceptClass]:
    """Every nonempty concept class on n points (2^(2^n) - 1 of them)."""
    labelings = list(range(1 << n))
    for choice in range(1, 1 << len(labelings)):
        yield ConceptClass.from_masks(n, [m for m in labelings if (choice >> m) & 1])


def random_class(n: int, size: int, rng: np.random.Generator) -> ConceptClass:
    size = min(size, 1 << n)
    masks = rng.choice(1 << n, size=size, replace=False)
    return ConceptClass.from_masks(n, sorted(int(m) for m in masks))


def random_closure_system(n: int, generators: int, rng: np.random.Generator) -> ConceptClass:
    """Random intersection-closed class: close random sets (plus the full space) under intersection."""
    full = (1 << n) - 1
    family = {full} | {int(m) for m in rng.integers(0, 1 << n, size=generators)}
    changed = True
    while changed:
        changed = False
        for a, b in itertools.combinations(list(family), 2):
            if a & b not in family:
                family.add(a & b)
                changed = True
    return ConceptClass.from_masks(n, sorted(family))
