"""Instance spaces, concepts, improvement maps, reaction sets and losses.

Finite spaces are handled by direct enumeration of reaction sets. On
``Euclidean(1)`` with ball improvement sets and on the unit circle
(``Sphere(2)``) with arc-length caps, losses are evaluated in closed form by
interval arithmetic in a local chart around the query point; the reaction
set itself is never materialized. Hypotheses with finite support (e.g. the
memorization rule) have finite reaction sets in any dimension and are
enumerated directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import CapabilityError, DomainError, InvariantError, ParameterError
from .intervals import Interval, IntervalSet
from .rng import stream

TOL = 1e-9
LOSSES = ("improvement", "strategic", "zero_one")
DEFAULT_N_MC = 100_000


# ---------------------------------------------------------------------------
# Spaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InstanceSpace:
    kind: str  # "finite" | "euclidean" | "sphere"
    size: int  # point count for finite spaces, dimension otherwise

    def __post_init__(self):
        if self.kind not in ("finite", "euclidean", "sphere"):
            raise DomainError(f"unknown space kind {self.kind!r}")
        if self.size < 1:
            raise DomainError("space size/dimension must be >= 1")

    @classmethod
    def finite(cls, n: int) -> "InstanceSpace":
        return cls("finite", n)

    @classmethod
    def euclidean(cls, d: int) -> "InstanceSpace":
        return cls("euclidean", d)

    @classmethod
    def sphere(cls, d: int) -> "InstanceSpace":
        return cls("sphere", d)

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    @property
    def n(self) -> int:
        if not self.is_finite:
            raise DomainError("continuous spaces have no point count")
        return self.size

    @property
    def d(self) -> int:
        if self.is_finite:
            raise DomainError("finite spaces have no dimension")
        return self.size

    def coerce(self, x):
        """Validate ``x`` and return it in canonical form (int or 1-D float array)."""
        if self.is_finite:
            if isinstance(x, (bool, np.bool_)) or not isinstance(x, (int, np.integer)):
                raise DomainError(f"finite instance must be an int, got {x!r}")
            if not 0 <= x < self.size:
                raise DomainError(f"instance {x} outside 0..{self.size - 1}")
            return int(x)
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        if arr.shape != (self.size,):
            raise DomainError(f"expected a point in R^{self.size}, got shape {arr.shape}")
        if self.kind == "sphere" and abs(np.linalg.norm(arr) - 1.0) > TOL:
            raise DomainError("sphere points must have unit norm")
        return arr

    def points(self) -> range:
        return range(self.n)


# ---------------------------------------------------------------------------
# Circle chart helpers
# ---------------------------------------------------------------------------


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    a = math.remainder(a, 2 * math.pi)
    return math.pi if a == -math.pi else a


def angle_of(v) -> float:
    return math.atan2(float(v[1]), float(v[0]))


def unit(angle: float) -> np.ndarray:
    return np.array([math.cos(angle), math.sin(angle)])


def angular_distance(a: float, b: float) -> float:
    return abs(wrap_angle(a - b))


def arc_near(center: float, half_width: float, phi: float, closed: bool = True) -> IntervalSet:
    """The arc ``center +- half_width`` expressed as offsets from angle ``phi``."""
    if half_width >= math.pi:
        return IntervalSet([Interval(-2 * math.pi, 2 * math.pi)])
    d = wrap_angle(center - phi)
    return IntervalSet(
        Interval(d + k * 2 * math.pi - half_width, d + k * 2 * math.pi + half_width, closed, closed)
        for k in (-1, 0, 1)
    )


# ---------------------------------------------------------------------------
# Concepts
# ---------------------------------------------------------------------------


class Concept:
    """A total binary labeling of an instance space."""

    space: InstanceSpace

    def __call__(self, x) -> int:
        raise NotImplementedError

    def evaluate(self, points) -> np.ndarray:
        """Vectorized labels for an array of instances."""
        return np.array([self(p) for p in points], dtype=np.int8)

    def positive_set_near(self, x, radius: float) -> IntervalSet:
        """Positive region in the local 1-D chart around ``x`` (offsets from ``x``)."""
        raise CapabilityError(f"{type(self).__name__} has no closed-form chart representation")


@dataclass(frozen=True, eq=True)
class FiniteConcept(Concept):
    space: InstanceSpace
    bits: tuple

    def __post_init__(self):
        if not self.space.is_finite:
            raise DomainError("FiniteConcept requires a finite space")
        bits = tuple(int(b) for b in self.bits)
        if len(bits) != self.space.n or any(b not in (0, 1) for b in bits):
            raise DomainError(f"bit vector must have length {self.space.n} with 0/1 entries")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "FiniteConcept":
        return cls(InstanceSpace.finite(len(bits)), tuple(bits))

    @classmethod
    def from_support(cls, n: int, support: Iterable[int]) -> "FiniteConcept":
        s = set(support)
        return cls(InstanceSpace.finite(n), tuple(int(i in s) for i in range(n)))

    def __call__(self, x) -> int:
        return self.bits[self.space.coerce(x)]

    def evaluate(self, points) -> np.ndarray:
        return np.asarray(self.bits, dtype=np.int8)[np.asarray(points, dtype=int)]

    @property
    def support(self) -> frozenset:
        return frozenset(i for i, b in enumerate(self.bits) if b)

    @property
    def mask(self) -> int:
        return sum(1 << i for i, b in enumerate(self.bits) if b)

    def __repr__(self) -> str:
        return "FiniteConcept(" + "".join(map(str, self.bits)) + ")"


@dataclass(frozen=True)
class IntervalConcept(Concept):
    """Concept on the real line positive exactly on a union of intervals."""

    positive: IntervalSet
    space: InstanceSpace = field(default_factory=lambda: InstanceSpace.euclidean(1))

    def __call__(self, x) -> int:
        return int(self.positive.contains(float(self.space.coerce(x)[0])))

    def evaluate(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1)
        out = np.zeros(pts.shape[0], dtype=np.int8)
        for iv in self.positive.intervals:
            lo = pts >= iv.lo if iv.lo_closed else pts > iv.lo
            hi = pts <= iv.hi if iv.hi_closed else pts < iv.hi
            out |= (lo & hi).astype(np.int8)
        return out

    def positive_set_near(self, x, radius: float) -> IntervalSet:
        return self.positive.shift(-float(np.atleast_1d(x)[0]))


@dataclass(frozen=True, eq=False)
class HalfspaceConcept(Concept):
    """Homogeneous halfspace: positive iff <w, x> >= 0."""

    w: np.ndarray
    space: InstanceSpace = None

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        nrm = np.linalg.norm(w)
        if nrm == 0:
            raise DomainError("halfspace normal must be nonzero")
        object.__setattr__(self, "w", w / nrm)
        if self.space is None:
            object.__setattr__(self, "space", InstanceSpace.sphere(w.shape[0]))

    def __call__(self, x) -> int:
        return int(float(self.w @ self.space.coerce(x)) >= 0.0)

    def evaluate(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) @ self.w >= 0.0).astype(np.int8)

    def positive_set_near(self, x, radius: float) -> IntervalSet:
        _require_circle(self.space)
        return arc_near(angle_of(self.w), math.pi / 2, angle_of(x), closed=True)


@dataclass(frozen=True, eq=False)
class FiniteSupportConcept(Concept):
    """Positive exactly on a finite point set (matching within ``tol``)."""

    support_points: np.ndarray
    space: InstanceSpace
    tol: float = TOL

    def __post_init__(self):
        pts = np.asarray(self.support_points, dtype=float).reshape(-1, self.space.d)
        object.__setattr__(self, "support_points", pts)

    def __call__(self, x) -> int:
        x = self.space.coerce(x)
        if self.support_points.shape[0] == 0:
            return 0
        return int(np.min(np.linalg.norm(self.support_points - x, axis=1)) <= self.tol)

    def evaluate(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.space.d)
        if self.support_points.shape[0] == 0:
            return np.zeros(pts.shape[0], dtype=np.int8)
        out = np.zeros(pts.shape[0], dtype=np.int8)
        for p in self.support_points:
            out |= (np.linalg.norm(pts - p, axis=1) <= self.tol).astype(np.int8)
        return out

    def positive_set_near(self, x, radius: float) -> IntervalSet:
        if self.space == InstanceSpace.euclidean(1):
            x0 = float(np.atleast_1d(x)[0])
            return IntervalSet(Interval(p - x0, p - x0) for p in self.support_points[:, 0])
        _require_circle(self.space)
        phi = angle_of(x)
        return IntervalSet(
            Interval(wrap_angle(angle_of(p) - phi), wrap_angle(angle_of(p) - phi))
            for p in self.support_points
        )


def _require_circle(space: InstanceSpace):
    if space != InstanceSpace.sphere(2):
        raise CapabilityError("closed-form arc evaluation is implemented for the unit circle only")


# ---------------------------------------------------------------------------
# Improvement maps
# ---------------------------------------------------------------------------


class ImprovementMap:
    finite = False

    def neighbors(self, x) -> frozenset:
        raise CapabilityError(f"{type(self).__name__} has no finite neighborhoods")


@dataclass(frozen=True)
class Explicit(ImprovementMap):
    """Per-instance finite improvement sets on a finite space."""

    n: int
    sets: tuple  # tuple of frozensets, index = instance
    finite = True

    def __post_init__(self):
        sets = tuple(frozenset(int(v) for v in s) for s in self.sets)
        if len(sets) != self.n:
            raise DomainError("one improvement set per instance is required")
        for s in sets:
            if any(not 0 <= v < self.n for v in s):
                raise DomainError("improvement set contains an instance outside the space")
        object.__setattr__(self, "sets", sets)

    @classmethod
    def from_dict(cls, n: int, mapping: dict) -> "Explicit":
        return cls(n, tuple(frozenset(mapping.get(i, mapping.get(str(i), ()))) for i in range(n)))

    @classmethod
    def identity(cls, n: int) -> "Explicit":
        return cls(n, tuple(frozenset([i]) for i in range(n)))

    @classmethod
    def everything(cls, n: int) -> "Explicit":
        return cls(n, tuple(frozenset(range(n)) for _ in range(n)))

    def neighbors(self, x) -> frozenset:
        return self.sets[x]


@dataclass(frozen=True)
class GraphNeighborhood(ImprovementMap):
    """Improvement set of a node = its neighbors in an undirected graph."""

    n: int
    adjacency: tuple
    finite = True

    def __post_init__(self):
        adj = tuple(frozenset(int(v) for v in s) for s in self.adjacency)
        if len(adj) != self.n:
            raise DomainError("adjacency must list every node")
        for u, s in enumerate(adj):
            for v in s:
                if not 0 <= v < self.n or u not in adj[v]:
                    raise DomainError("adjacency must be symmetric and within range")
        object.__setattr__(self, "adjacency", adj)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "GraphNeighborhood":
        adj = [set() for _ in range(n)]
        for u, v in edges:
            adj[u].add(v)
            adj[v].add(u)
        return cls(n, tuple(frozenset(a) for a in adj))

    def neighbors(self, x) -> frozenset:
        return self.adjacency[x]


@dataclass(frozen=True)
class Ball(ImprovementMap):
    """Euclidean ball of radius r around each point."""

    r: float

    def __post_init__(self):
        if not self.r >= 0:
            raise ParameterError("radius must be nonnegative")

    def contains(self, x, x2) -> bool:
        return float(np.linalg.norm(np.asarray(x2, float) - np.asarray(x, float))) <= self.r + TOL

    def distances(self, x, pts: np.ndarray) -> np.ndarray:
        return np.linalg.norm(np.asarray(pts, float) - np.asarray(x, float), axis=1)


@dataclass(frozen=True)
class Cap(ImprovementMap):
    """Spherical cap of arc-length radius r: arccos(<x, x'>) <= r."""

    r: float

    def __post_init__(self):
        if not self.r >= 0:
            raise ParameterError("radius must be nonnegative")

    def contains(self, x, x2) -> bool:
        c = float(np.clip(np.dot(x, x2), -1.0, 1.0))
        return math.acos(c) <= self.r + TOL

    def distances(self, x, pts: np.ndarray) -> np.ndarray:
        return np.arccos(np.clip(np.asarray(pts, float) @ np.asarray(x, float), -1.0, 1.0))


# ---------------------------------------------------------------------------
# Reaction sets and losses
# ---------------------------------------------------------------------------


def _check_same_space(*concepts: Concept):
    spaces = {c.space for c in concepts}
    if len(spaces) != 1:
        raise DomainError(f"concepts live on different spaces: {spaces}")


def reaction_set(x, h: Concept, delta: ImprovementMap, candidates=None) -> frozenset:
    """Points ``x`` may end up at once ``h`` is published.

    On finite spaces this is exact. On continuous spaces the positive part of
    the improvement set must be finite: either ``h`` has finite support or the
    caller passes ``candidates``. Continuous points are returned as tuples.
    """
    x = h.space.coerce(x)
    if h.space.is_finite:
        if h(x) == 1:
            return frozenset([x])
        pos = frozenset(v for v in delta.neighbors(x) if h(v) == 1)
        return pos if pos else frozenset([x])
    if h(x) == 1:
        return frozenset([tuple(x)])
    if candidates is None:
        if not isinstance(h, FiniteSupportConcept):
            raise CapabilityError("continuous reaction sets need a finite candidate set")
        candidates = h.support_points
    cand = np.asarray(candidates, float).reshape(-1, h.space.d)
    inside = cand[delta.distances(x, cand) <= delta.r + TOL] if len(cand) else cand
    pos = frozenset(tuple(p) for p in inside if h(p) == 1)
    return pos if pos else frozenset([tuple(x)])


def _chart_window(space: InstanceSpace, delta: ImprovementMap) -> IntervalSet:
    if space == InstanceSpace.euclidean(1) and isinstance(delta, Ball):
        return IntervalSet.closed(-delta.r - TOL, delta.r + TOL)
    if space == InstanceSpace.sphere(2) and isinstance(delta, Cap):
        r = min(delta.r + TOL, math.pi)
        return IntervalSet.closed(-r, r)
    raise CapabilityError(
        f"no closed-form chart for {space} with {type(delta).__name__} improvement sets"
    )


def _continuous_loss(x, h: Concept, fstar: Concept, delta: ImprovementMap, origin: bool) -> int:
    hx = h(x)
    fx = fstar(x)
    if hx == 1:
        return int(fx == 0)
    if isinstance(h, FiniteSupportConcept):
        pts = h.support_points
        reach = pts[delta.distances(x, pts) <= delta.r + TOL] if len(pts) else pts
        if len(reach) == 0:
            return int(fx == 1)
        if origin:
            return int(fx == 0)
        return int(np.any(fstar.evaluate(reach) == 0))
    window = _chart_window(h.space, delta)
    radius = window.intervals[0].hi
    hpos = h.positive_set_near(x, radius).intersect(window)
    if hpos.is_empty():
        return int(fx == 1)
    if origin:
        # every reachable point is h-positive
        return int(fx == 0)
    fneg = fstar.positive_set_near(x, radius).complement()
    return int(not hpos.intersect(fneg).is_empty())


def improvement_loss(x, h: Concept, fstar: Concept, delta: ImprovementMap) -> int:
    """Worst case over the reaction set of 1[h(x') != f*(x')]."""
    _check_same_space(h, fstar)
    x = h.space.coerce(x)
    if h.space.is_finite:
        rs = reaction_set(x, h, delta)
        if not rs:
            raise InvariantError("empty reaction set")
        return max(int(h(v) != fstar(v)) for v in rs)
    return _continuous_loss(x, h, fstar, delta, origin=False)


def strategic_loss(x, h: Concept, fstar: Concept, delta: ImprovementMap) -> int:
    """Worst case over the reaction set of 1[h(x') != f*(x)] (truth at the origin)."""
    _check_same_space(h, fstar)
    x = h.space.coerce(x)
    if h.space.is_finite:
        rs = reaction_set(x, h, delta)
        if not rs:
            raise InvariantError("empty reaction set")
        fx = fstar(x)
        return max(int(h(v) != fx) for v in rs)
    return _continuous_loss(x, h, fstar, delta, origin=True)


def zero_one_loss(x, h: Concept, fstar: Concept, delta: ImprovementMap | None = None) -> int:
    _check_same_space(h, fstar)
    return int(h(x) != fstar(x))


LOSS_FUNCTIONS = {
    "improvement": improvement_loss,
    "strategic": strategic_loss,
    "zero_one": zero_one_loss,
}


# ---------------------------------------------------------------------------
# Distributions and samples
# ---------------------------------------------------------------------------


class Distribution:
    space: InstanceSpace
    seed: int
    is_finite = False

    def draw(self, m: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def rng(self, *keys) -> np.random.Generator:
        return stream(self.seed, *keys)


@dataclass(frozen=True)
class FiniteWeighted(Distribution):
    weights: tuple
    seed: int = 0
    is_finite = True

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if not w or any(v < 0 for v in w) or abs(sum(w) - 1.0) > 1e-12:
            raise DomainError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, n: int, seed: int = 0) -> "FiniteWeighted":
        return cls(tuple([1.0 / n] * n), seed)

    @classmethod
    def uniform_over(cls, n: int, points: Iterable[int], seed: int = 0) -> "FiniteWeighted":
        pts = sorted(set(points))
        w = [0.0] * n
        for p in pts:
            w[p] = 1.0 / len(pts)
        # exact renormalization against rounding
        w[pts[-1]] = 1.0 - sum(w[p] for p in pts[:-1])
        return cls(tuple(w), seed)

    @property
    def space(self) -> InstanceSpace:
        return InstanceSpace.finite(len(self.weights))

    def draw(self, m, rng):
        return rng.choice(len(self.weights), size=m, p=np.asarray(self.weights))


@dataclass(frozen=True)
class UniformInterval(Distribution):
    lo: float = 0.0
    hi: float = 1.0
    seed: int = 0

    @property
    def space(self):
        return InstanceSpace.euclidean(1)

    def draw(self, m, rng):
        return rng.uniform(self.lo, self.hi, size=(m, 1))


@dataclass(frozen=True)
class PiecewiseUniform(Distribution):
    """Mixture of uniform distributions on disjoint intervals of the real line."""

    pieces: tuple  # ((lo, hi), ...)
    weights: tuple
    seed: int = 0

    def __post_init__(self):
        if len(self.pieces) != len(self.weights):
            raise DomainError("one weight per piece")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-12:
            raise DomainError("weights must be nonnegative and sum to 1")

    @property
    def space(self):
        return InstanceSpace.euclidean(1)

    def draw(self, m, rng):
        idx = rng.choice(len(self.pieces), size=m, p=np.asarray(self.weights))
        lo = np.array([p[0] for p in self.pieces])[idx]
        hi = np.array([p[1] for p in self.pieces])[idx]
        return (lo + (hi - lo) * rng.random(m)).reshape(m, 1)


@dataclass(frozen=True)
class UniformSphere(Distribution):
    d: int = 2
    seed: int = 0

    @property
    def space(self):
        return InstanceSpace.sphere(self.d)

    def draw(self, m, rng):
        g = rng.standard_normal((m, self.d))
        return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass(frozen=True)
class Gaussian(Distribution):
    d: int = 2
    seed: int = 0

    @property
    def space(self):
        return InstanceSpace.euclidean(self.d)

    def draw(self, m, rng):
        return rng.standard_normal((m, self.d))


@dataclass(frozen=True, eq=False)
class LabeledSample:
    """Ordered (instance, label) pairs. Finite instances are ints; points are rows."""

    space: InstanceSpace
    points: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def items(self) -> list:
        if self.space.is_finite:
            return [(int(p), int(y)) for p, y in zip(self.points, self.labels)]
        return [(p, int(y)) for p, y in zip(self.points, self.labels)]

    @classmethod
    def from_pairs(cls, space: InstanceSpace, pairs: Iterable[tuple]) -> "LabeledSample":
        pairs = list(pairs)
        if space.is_finite:
            pts = np.array([space.coerce(p) for p, _ in pairs], dtype=int)
        else:
            pts = np.array([space.coerce(p) for p, _ in pairs], dtype=float).reshape(-1, space.d)
        labels = np.array([int(y) for _, y in pairs], dtype=np.int8)
        if np.any((labels != 0) & (labels != 1)):
            raise DomainError("labels must be 0 or 1")
        return cls(space, pts, labels)

    def has_negative(self) -> bool:
        return bool(np.any(self.labels == 0))


def sample(dist: Distribution, fstar: Concept, m: int, rng: np.random.Generator | None = None) -> LabeledSample:
    """m i.i.d. draws from ``dist`` labeled by ``fstar``."""
    if m < 0:
        raise ParameterError("m must be >= 0")
    if dist.space != fstar.space:
        raise DomainError("distribution and concept live on different spaces")
    rng = dist.rng("sample") if rng is None else rng
    pts = dist.draw(m, rng)
    if m == 0:
        pts = np.zeros((0,), dtype=int) if dist.space.is_finite else np.zeros((0, dist.space.d))
    labels = fstar.evaluate(pts) if m else np.zeros(0, dtype=np.int8)
    return LabeledSample(dist.space, pts, np.asarray(labels, dtype=np.int8))


@dataclass(frozen=True)
class LossEstimate:
    value: float
    stderr: float
    n: int
    exact: bool

    def __float__(self) -> float:
        return self.value


def population_loss(
    h: Concept,
    fstar: Concept,
    delta: ImprovementMap | None,
    dist: Distribution,
    loss: str = "improvement",
    n_mc: int = DEFAULT_N_MC,
    rng: np.random.Generator | None = None,
) -> LossEstimate:
    """P_{x~dist}[loss(x; h, f*)]: exact for finite distributions, Monte-Carlo otherwise."""
    if loss not in LOSS_FUNCTIONS:
        raise ParameterError(f"loss must be one of {LOSSES}")
    _check_same_space(h, fstar)
    if dist.space != h.space:
        raise DomainError("distribution and concepts live on different spaces")
    fn = LOSS_FUNCTIONS[loss]
    if dist.is_finite:
        total = math.fsum(w * fn(x, h, fstar, delta) for x, w in enumerate(dist.weights) if w > 0)
        return LossEstimate(total, 0.0, dist.space.n, True)
    if n_mc < 1:
        raise ParameterError("n_mc must be >= 1 for continuous distributions")
    rng = dist.rng("population_loss") if rng is None else rng
    pts = dist.draw(n_mc, rng)
    vals = np.fromiter((fn(p, h, fstar, delta) for p in pts), dtype=float, count=n_mc)
    se = float(vals.std(ddof=1) / math.sqrt(n_mc)) if n_mc > 1 else float("nan")
    return LossEstimate(float(vals.mean()), se, n_mc, False)
