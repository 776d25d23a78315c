"""Improper learning with Euclidean-ball improvement sets.

Memorization, cover specifications and a greedy cover finder, the covering
experiment, the spread-points adversary, and the union-of-intervals
demonstration that proper learners fail under ball improvements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import (
    TOL,
    Ball,
    Concept,
    Distribution,
    FiniteSupportConcept,
    InstanceSpace,
    IntervalConcept,
    LabeledSample,
    LossEstimate,
    PiecewiseUniform,
    UniformInterval,
    improvement_loss,
    sample,
)
from .errors import DomainError, InvariantError, ParameterError
from .intervals import Interval, IntervalSet
from .rng import stream


# ---------------------------------------------------------------------------
# Covers
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CoverSpec:
    """N balls of radius r/2; ``beta`` lower-bounds each ball's mass, ``eps`` the uncovered mass."""

    centers: np.ndarray
    radius: float
    eps: float
    beta: float

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float)
        object.__setattr__(self, "centers", c.reshape(c.shape[0], -1))

    @property
    def N(self) -> int:
        return int(self.centers.shape[0])

    def membership(self, pts: np.ndarray) -> np.ndarray:
        """Boolean (m, N) matrix: point i lies in ball k."""
        pts = np.asarray(pts, float).reshape(-1, self.centers.shape[1])
        d = np.linalg.norm(pts[:, None, :] - self.centers[None, :, :], axis=2)
        return d <= self.radius + TOL

    def measure(self, dist: Distribution, n_mc: int = 100_000, rng=None) -> dict:
        """Monte-Carlo ball masses and covered mass, with standard errors."""
        rng = dist.rng("cover-measure") if rng is None else rng
        pts = dist.draw(n_mc, rng)
        inside = self.membership(pts)
        masses = inside.mean(axis=0)
        covered = inside.any(axis=1).mean()
        return {
            "ball_mass": masses,
            "ball_mass_se": np.sqrt(masses * (1 - masses) / n_mc),
            "covered": float(covered),
            "covered_se": float(math.sqrt(covered * (1 - covered) / n_mc)),
        }

    def verify(self, dist: Distribution, n_mc: int = 100_000, z: float = 3.0) -> bool:
        m = self.measure(dist, n_mc)
        ok_beta = np.all(m["ball_mass"] + z * m["ball_mass_se"] >= self.beta)
        ok_eps = m["covered"] + z * m["covered_se"] >= 1 - self.eps
        return bool(ok_beta and ok_eps)


def greedy_cover(points: np.ndarray, r: float, beta: float | None = None) -> CoverSpec:
    """k-center style cover of a point cloud by balls of radius r/2.

    Repeatedly centers a ball at the first uncovered point. Masses are the
    empirical fractions; ``beta`` defaults to the smallest one and ``eps`` is 0
    on the sample by construction. This finds a concrete cover; it proves
    nothing about the underlying distribution.
    """
    pts = np.asarray(points, float)
    pts = pts.reshape(pts.shape[0], -1)
    half = r / 2
    uncovered = np.ones(pts.shape[0], dtype=bool)
    centers = []
    while uncovered.any():
        c = pts[np.flatnonzero(uncovered)[0]]
        centers.append(c)
        uncovered &= np.linalg.norm(pts - c, axis=1) > half + TOL
    spec = CoverSpec(np.array(centers), half, 0.0, 0.0)
    masses = spec.membership(pts).mean(axis=0)
    return CoverSpec(spec.centers, half, 0.0, float(masses.min()) if beta is None else beta)


# ---------------------------------------------------------------------------
# Memorization
# ---------------------------------------------------------------------------


class MemorizedClassifier(FiniteSupportConcept):
    """Positive exactly on the positively labeled training instances."""

    @property
    def positives(self) -> np.ndarray:
        return self.support_points


def memorize(S: LabeledSample) -> MemorizedClassifier:
    if S.space.is_finite:
        raise DomainError("memorize works on Euclidean or spherical samples")
    pos = S.points[S.labels == 1].reshape(-1, S.space.d)
    if len(pos):
        pos = np.unique(pos, axis=0)
    return MemorizedClassifier(pos, S.space)


def _uncovered_positive(h: MemorizedClassifier, fstar: Concept, r: float, pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, float).reshape(-1, h.space.d)
    fpos = fstar.evaluate(pts) == 1
    if len(h.positives) == 0:
        return fpos
    dmin = np.full(pts.shape[0], np.inf)
    for p in h.positives:
        dmin = np.minimum(dmin, np.linalg.norm(pts - p, axis=1))
    memorized = dmin <= h.tol
    return fpos & ~memorized & (dmin > r + TOL)


def memorization_loss(
    h: MemorizedClassifier,
    fstar: Concept,
    r: float,
    dist: Distribution,
    n_mc: int = 100_000,
    rng: np.random.Generator | None = None,
) -> LossEstimate:
    """Improvement loss of a memorized classifier under Ball(r) improvements.

    A point errs iff it is a true positive, not memorized, and no memorized
    positive lies within r. Memorization never has false positives, so true
    negatives cannot err; that is checked rather than estimated.
    """
    if r < 0:
        raise ParameterError("r must be nonnegative")
    if len(h.positives) and np.any(fstar.evaluate(h.positives) == 0):
        raise InvariantError("memorized classifier has a false positive")
    rng = dist.rng("memorization_loss") if rng is None else rng
    pts = dist.draw(n_mc, rng)
    err = _uncovered_positive(h, fstar, r, pts).astype(float)
    mean = float(err.mean())
    return LossEstimate(mean, math.sqrt(mean * (1 - mean) / n_mc), n_mc, False)


def exact_memorization_loss_1d(
    h: MemorizedClassifier, positive_set: IntervalSet, r: float, density: Sequence[tuple[float, float, float]]
) -> float:
    """Exact loss on the line for a piecewise-constant density.

    ``density`` lists (lo, hi, mass) pieces, each uniform. The loss is the
    mass of true positives farther than r from every memorized positive.
    """
    reach = IntervalSet(Interval(p - r, p + r) for p in h.positives[:, 0])
    bad = positive_set.difference(reach)
    total = 0.0
    for lo, hi, mass in density:
        if mass == 0:
            continue
        total += mass * bad.intersect(IntervalSet.closed(lo, hi)).measure / (hi - lo)
    return total


def negatives_zero_loss(h: MemorizedClassifier, fstar: Concept, r: float, pts: np.ndarray) -> bool:
    """Evaluate the generic improvement loss on true-negative points; all must be 0."""
    delta = Ball(r)
    for p in np.asarray(pts, float).reshape(-1, h.space.d):
        if fstar(p) == 0 and improvement_loss(p, h, fstar, delta) != 0:
            return False
    return True


def cell_mixture(
    N: int, r: float, pos_frac: float = 0.5, gap: float | None = None, seed: int = 0
) -> tuple[PiecewiseUniform, IntervalConcept, CoverSpec]:
    """1-D mixture whose positive part is (0, 1/N, N)-coverable by balls of radius r/2.

    Positive mass is uniform over the contiguous block [0, N*r), split into
    N cells of width r; negative mass is uniform over [N*r + gap, 2*N*r + gap).
    """
    block = N * r
    gap = r if gap is None else gap
    pieces = ((0.0, block), (block + gap, 2 * block + gap))
    dist = PiecewiseUniform(pieces, (pos_frac, 1.0 - pos_frac), seed)
    fstar = IntervalConcept(IntervalSet([Interval(0.0, block, True, False)]))
    cover = CoverSpec((np.arange(N) + 0.5) * r, r / 2, 0.0, 1.0 / N)
    return dist, fstar, cover


def covering_sample_size(beta: float, N: int, gamma: float) -> int:
    """ceil((1/beta) ln(N/gamma)): draws needed to hit N balls of mass >= beta w.p. 1-gamma."""
    if not (0 < beta <= 1 and 0 < gamma < 1 and N >= 1):
        raise ParameterError("need 0 < beta <= 1, 0 < gamma < 1, N >= 1")
    return math.ceil(math.log(N / gamma) / beta)


def memorization_sample_size(beta: float, N: int, gamma: float, pos_frac: float) -> int:
    """Total draws from the mixture so that the expected number of positives covers the balls.

    The covering argument runs on positive draws only, so the positive-sample
    count ``covering_sample_size`` is divided by the positive fraction.
    """
    if not 0 < pos_frac <= 1:
        raise ParameterError("pos_frac must lie in (0, 1]")
    return math.ceil(covering_sample_size(beta, N, gamma) / pos_frac)


@dataclass(frozen=True)
class MemorizeRow:
    trial: int
    m: int
    loss: float
    negatives_ok: bool
    seed: int


def memorize_pac(
    N: int = 20,
    r: float = 0.05,
    m: int = 212,
    trials: int = 500,
    seed: int = 0,
    pos_frac: float = 0.5,
    n_neg_check: int = 200,
    start: int = 0,
) -> list[MemorizeRow]:
    """Memorization on ``cell_mixture``; exact loss and a zero-loss check on true negatives."""
    dist, fstar, _ = cell_mixture(N, r, pos_frac, seed=seed)
    (plo, phi), (nlo, nhi) = dist.pieces
    density = [(plo, phi, pos_frac), (nlo, nhi, 1 - pos_frac)]
    rows = []
    for t in range(start, start + trials):
        rng = stream(seed, "memorize", t)
        S = sample(dist, fstar, m, rng)
        h = memorize(S)
        loss = exact_memorization_loss_1d(h, fstar.positive, r, density)
        # true negatives: training negatives, a grid across the negative piece, and the boundary
        grid = np.concatenate([
            S.points[S.labels == 0, 0],
            np.linspace(nlo, nhi, n_neg_check, endpoint=False),
            [phi, phi + r / 2, phi + r],
        ])
        rows.append(MemorizeRow(t, m, loss, negatives_zero_loss(h, fstar, r, grid), seed))
    return rows


# ---------------------------------------------------------------------------
# Covering experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoveringRow:
    trial: int
    m: int
    hit: bool
    seed: int


def covering_experiment(
    dist: Distribution, cover: CoverSpec, m: int, trials: int, seed: int = 0, start: int = 0
) -> list[CoveringRow]:
    """Per trial: did every cover ball receive at least one of m samples?"""
    rows = []
    for t in range(start, start + trials):
        rng = stream(seed, "covering", t)
        if m == 0:
            rows.append(CoveringRow(t, m, cover.N == 0, seed))
            continue
        pts = dist.draw(m, rng)
        rows.append(CoveringRow(t, m, bool(cover.membership(pts).any(axis=0).all()), seed))
    return rows


def union_bound_failure(N: int, beta: float, m: int) -> float:
    """N * exp(-beta * m)."""
    return N * math.exp(-beta * m)


def unit_cells(N: int) -> tuple[UniformInterval, CoverSpec]:
    """Uniform [0,1] split into N equal disjoint cells (each of mass 1/N)."""
    w = 1.0 / N
    return UniformInterval(0.0, 1.0), CoverSpec((np.arange(N) + 0.5) * w, w / 2, 0.0, w)


# ---------------------------------------------------------------------------
# Spread points lower bound
# ---------------------------------------------------------------------------

# A learner maps (training sample on the spread points, the point array, r)
# to a hypothesis given by its positive point set in R^d.
Learner = Callable[[LabeledSample, np.ndarray, float], np.ndarray]


def learner_memorize(S: LabeledSample, pts: np.ndarray, r: float) -> np.ndarray:
    return memorize(S).positives


def learner_all_positive(S: LabeledSample, pts: np.ndarray, r: float) -> np.ndarray:
    return pts.copy()


def learner_all_negative(S: LabeledSample, pts: np.ndarray, r: float) -> np.ndarray:
    return np.zeros((0, pts.shape[1]))


def learner_optimistic(S: LabeledSample, pts: np.ndarray, r: float) -> np.ndarray:
    """Memorize, and guess positive on every unseen point."""
    seen = {tuple(p) for p in S.points}
    unseen = [p for p in pts if tuple(p) not in seen]
    pos = list(memorize(S).positives) + unseen
    return np.array(pos).reshape(-1, pts.shape[1])


def learner_shifted(S: LabeledSample, pts: np.ndarray, r: float) -> np.ndarray:
    """Off-support positives within r/2 of each unseen point, plus the memorized positives."""
    seen = {tuple(p) for p in S.points}
    off = [p + np.r_[r / 2, np.zeros(pts.shape[1] - 1)] for p in pts if tuple(p) not in seen]
    pos = list(memorize(S).positives) + off
    return np.array(pos).reshape(-1, pts.shape[1])


LEARNERS: dict[str, Learner] = {
    "memorize": learner_memorize,
    "all_positive": learner_all_positive,
    "all_negative": learner_all_negative,
    "optimistic": learner_optimistic,
    "shifted": learner_shifted,
}


def spread_points(N: int, r: float) -> np.ndarray:
    """N points on a line with spacing 2r (pairwise distance > r)."""
    return (np.arange(N, dtype=float) * 2 * r).reshape(N, 1)


@dataclass(frozen=True)
class SpreadRow:
    trial: int
    m: int
    loss: float
    unsampled: int
    seed: int


def spread_adversary_loss(positives: np.ndarray, pts: np.ndarray, labels: np.ndarray, sampled: np.ndarray, r: float) -> tuple[float, np.ndarray]:
    """Adversarial completion of the target on unsampled points; returns (loss, f*).

    Off-support points are negative under every concept. Each unsampled point
    is made negative if some hypothesis-positive point lies within r (it then
    moves to a true negative or is itself a false positive), and positive
    otherwise (it cannot improve).
    """
    N = pts.shape[0]
    fstar = labels.copy()
    for i in np.flatnonzero(~sampled):
        near = len(positives) and np.any(np.linalg.norm(positives - pts[i], axis=1) <= r + TOL)
        fstar[i] = 0 if near else 1
    hyp = FiniteSupportConcept(positives, InstanceSpace.euclidean(pts.shape[1]))
    target = FiniteSupportConcept(pts[fstar == 1], InstanceSpace.euclidean(pts.shape[1]))
    delta = Ball(r)
    losses = [_spread_loss(pts[i], hyp, target, delta) for i in range(N)]
    return float(np.mean(losses)), fstar


def _spread_loss(x, hyp: FiniteSupportConcept, target: FiniteSupportConcept, delta: Ball) -> int:
    # both concepts have finite support, so the reaction set is finite and exact
    return improvement_loss(x, hyp, target, delta)


def spread_points_lower_bound(
    beta: float, r: float, m: int, trials: int, learner: str | Learner = "memorize", seed: int = 0, start: int = 0
) -> list[SpreadRow]:
    """Adversarial loss per trial on N = 1/beta spread points with all 2^N labelings."""
    N = round(1 / beta)
    if abs(N * beta - 1) > 1e-9:
        raise ParameterError("1/beta must be an integer")
    learn = LEARNERS[learner] if isinstance(learner, str) else learner
    pts = spread_points(N, r)
    rows = []
    for t in range(start, start + trials):
        rng = stream(seed, "spread", t)
        base = rng.integers(0, 2, size=N).astype(np.int8)
        idx = rng.integers(0, N, size=m)
        S = LabeledSample(InstanceSpace.euclidean(1), pts[idx], base[idx])
        sampled = np.zeros(N, dtype=bool)
        sampled[idx] = True
        positives = np.asarray(learn(S, pts, r), float).reshape(-1, 1)
        loss, _ = spread_adversary_loss(positives, pts, base, sampled, r)
        rows.append(SpreadRow(t, m, loss, int(N - sampled.sum()), seed))
    return rows


def coupon_success_probability(N: int, m: int) -> float:
    """P(all N equally likely coupons seen in m draws), by inclusion-exclusion."""
    return float(sum((-1) ** k * math.comb(N, k) * (1 - k / N) ** m for k in range(N + 1)))


# ---------------------------------------------------------------------------
# Union of two intervals
# ---------------------------------------------------------------------------


def union_interval_concept(b: float) -> IntervalConcept:
    """Positive on [1/4, b) U (b, 3/4]."""
    return IntervalConcept(IntervalSet([Interval(0.25, b, True, False), Interval(b, 0.75, False, True)]))


def exact_loss_1d(h: IntervalConcept, fstar: IntervalConcept, r: float, lo: float = 0.0, hi: float = 1.0) -> float:
    """Exact improvement loss under Uniform[lo, hi] and Ball(r) improvements.

    The pointwise loss is piecewise constant between the concepts' endpoints
    shifted by 0 and +-r, so evaluating it at midpoints and summing lengths is
    exact.
    """
    delta = Ball(r)
    cuts = {lo, hi}
    for e in h.positive.endpoints() + fstar.positive.endpoints():
        for s in (e - r, e, e + r):
            if lo < s < hi:
                cuts.add(s)
    cuts = sorted(cuts)
    total = 0.0
    for a, b in zip(cuts, cuts[1:]):
        if b > a:
            total += (b - a) * improvement_loss((a + b) / 2, h, fstar, delta)
    return total / (hi - lo)


def b_grid(size: int = 101) -> np.ndarray:
    """``size`` values strictly inside (1/4, 3/4)."""
    return 0.25 + 0.5 * (np.arange(size) + 1) / (size + 1)


@dataclass(frozen=True)
class UnionRow:
    trial: int
    m: int
    b: float
    b_hat: float
    loss: float
    seed: int


def union_interval_violations(r: float = 0.5, grid_size: int = 101, threshold: float = 0.25) -> list[tuple[float, float, float]]:
    """All grid pairs (b, b') with b' != b whose exact loss falls below ``threshold``."""
    grid = b_grid(grid_size)
    concepts = [union_interval_concept(float(b)) for b in grid]
    bad = []
    for i, fstar in enumerate(concepts):
        for j, h in enumerate(concepts):
            if i != j:
                loss = exact_loss_1d(h, fstar, r)
                if loss < threshold:
                    bad.append((float(grid[i]), float(grid[j]), loss))
    return bad


def union_interval_demo(r: float = 0.5, trials: int = 101, m: int = 50, seed: int = 0, grid_size: int = 101, start: int = 0) -> list[UnionRow]:
    """Grid-ERM proper learner vs a target b drawn from the grid.

    Every candidate b' is consistent with the sample unless a training point
    lands exactly on b'; the learner returns the first consistent grid value.
    """
    grid = b_grid(grid_size)
    rows = []
    for t in range(start, start + trials):
        rng = stream(seed, "union", t)
        b = float(grid[rng.integers(grid_size)])
        fstar = union_interval_concept(b)
        S = sample(UniformInterval(), fstar, m, rng)
        b_hat = None
        for cand in grid:
            hc = union_interval_concept(float(cand))
            if np.array_equal(hc.evaluate(S.points), S.labels):
                b_hat = float(cand)
                break
        h = union_interval_concept(b_hat)
        rows.append(UnionRow(t, m, b, b_hat, exact_loss_1d(h, fstar, r), seed))
    return rows
