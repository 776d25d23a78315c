"""Bounded label noise, halfspaces on the circle, and a conservative improper classifier.

A noisy proper learner (grid ERM over normal angles) produces a normal
``w_hat``. The improper classifier is positive only where every halfspace
whose normal lies within ``theta_hat`` of ``w_hat`` is positive: the closed arc
of half-width pi/2 - theta_hat around ``w_hat``. With arc-length caps as
improvement sets, the expected loss of that classifier is evaluated in closed
form per point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    TOL,
    Cap,
    Concept,
    Distribution,
    HalfspaceConcept,
    InstanceSpace,
    LabeledSample,
    UniformSphere,
    angle_of,
    angular_distance,
    arc_near,
    sample,
    unit,
    wrap_angle,
)
from .errors import CapabilityError, DomainError, ParameterError
from .intervals import Interval, IntervalSet
from .rng import stream

HALF_PI = math.pi / 2


# ---------------------------------------------------------------------------
# Flip-probability functions
# ---------------------------------------------------------------------------


class FlipRate:
    """Per-point flip probability nu(x), with sup/inf over chart regions on the circle."""

    nu_max: float

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sup(self, region: IntervalSet, phi: float) -> float:
        raise NotImplementedError

    def inf(self, region: IntervalSet, phi: float) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantNu(FlipRate):
    nu0: float

    @property
    def nu_max(self) -> float:
        return self.nu0

    def __call__(self, pts):
        return np.full(np.asarray(pts).reshape(len(pts), -1).shape[0], self.nu0)

    def sup(self, region, phi):
        return self.nu0

    def inf(self, region, phi):
        return self.nu0


# On the sphere the norm is constant, so a radial profile is a constant rate.
RadialNu = ConstantNu


@dataclass(frozen=True, eq=False)
class BoundaryBandNu(FlipRate):
    """nu0 on the open band |<w, x>| < b, zero elsewhere."""

    nu0: float
    w: np.ndarray
    b: float

    def __post_init__(self):
        w = np.asarray(self.w, float)
        object.__setattr__(self, "w", w / np.linalg.norm(w))
        if not 0 < self.b <= 1:
            raise ParameterError("band half-width b must lie in (0, 1]")

    @property
    def nu_max(self) -> float:
        return self.nu0

    def __call__(self, pts):
        pts = np.asarray(pts, float)
        return np.where(np.abs(pts @ self.w) < self.b, self.nu0, 0.0)

    def band_near(self, phi: float) -> IntervalSet:
        half = math.asin(self.b)
        a = angle_of(self.w)
        return arc_near(a + HALF_PI, half, phi, closed=False).union(
            arc_near(a - HALF_PI, half, phi, closed=False)
        )

    def sup(self, region, phi):
        return self.nu0 if not region.intersect(self.band_near(phi)).is_empty() else 0.0

    def inf(self, region, phi):
        return 0.0 if not region.difference(self.band_near(phi)).is_empty() else self.nu0


# ---------------------------------------------------------------------------
# Noise channels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseChannel:
    """RCN (constant flip rate) or Massart (pointwise rate bounded by nu_max < 1/2)."""

    kind: str
    rate: FlipRate

    def __post_init__(self):
        if self.kind not in ("rcn", "massart"):
            raise ParameterError("channel kind must be 'rcn' or 'massart'")
        if not 0 <= self.rate.nu_max < 0.5:
            raise ParameterError("flip probability must lie in [0, 1/2)")
        if self.kind == "rcn" and not isinstance(self.rate, ConstantNu):
            raise ParameterError("RCN requires a constant flip rate")

    @classmethod
    def rcn(cls, nu: float) -> "NoiseChannel":
        return cls("rcn", ConstantNu(float(nu)))

    @classmethod
    def massart(cls, rate: FlipRate) -> "NoiseChannel":
        return cls("massart", rate)

    def nu(self, pts) -> np.ndarray:
        return self.rate(pts)


def noisy_sample(
    dist: Distribution, fbayes: HalfspaceConcept, channel: NoiseChannel, m: int, rng: np.random.Generator | None = None
) -> LabeledSample:
    """Clean sample from ``fbayes`` with each label flipped per the channel."""
    if not isinstance(fbayes, HalfspaceConcept):
        raise DomainError("the Bayes classifier must be a homogeneous halfspace")
    rng = dist.rng("noisy_sample") if rng is None else rng
    clean = sample(dist, fbayes, m, rng)
    if m == 0:
        return clean
    flips = rng.random(m) < channel.nu(clean.points)
    return LabeledSample(clean.space, clean.points, (clean.labels ^ flips).astype(np.int8))


# ---------------------------------------------------------------------------
# Learners and classifiers
# ---------------------------------------------------------------------------


def angle_grid(size: int) -> np.ndarray:
    return 2 * math.pi * np.arange(size) / size


def erm_halfspace_2d(S: LabeledSample, grid: int = 720) -> np.ndarray:
    """Unit normal on an angle grid minimizing empirical 0-1 error; ties go to the smallest index."""
    if len(S) == 0:
        raise ParameterError("ERM needs a nonempty sample")
    if grid < 360:
        raise ParameterError("angle grid must have at least 360 points")
    if S.space.kind == "finite" or S.space.d != 2:
        raise DomainError("grid ERM is implemented for 2-D samples")
    angles = angle_grid(grid)
    normals = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    pred = (S.points @ normals.T) >= 0.0  # m x grid
    errors = (pred != (S.labels[:, None] == 1)).sum(axis=0)
    return normals[int(np.argmin(errors))]


@dataclass(frozen=True, eq=False)
class AgreementClassifier(Concept):
    """Positive where all halfspaces with normal within ``theta_hat`` of ``center`` agree positive.

    Closed form: <center, x> >= |x| sin(theta_hat).
    """

    center: np.ndarray
    theta_hat: float
    space: InstanceSpace = None

    def __post_init__(self):
        c = np.asarray(self.center, float)
        object.__setattr__(self, "center", c / np.linalg.norm(c))
        if not 0 <= self.theta_hat < HALF_PI:
            raise ParameterError("theta_hat must lie in [0, pi/2)")
        if self.space is None:
            object.__setattr__(self, "space", InstanceSpace.sphere(c.shape[0]))

    def _margin(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, float).reshape(-1, self.center.shape[0])
        return pts @ self.center - np.linalg.norm(pts, axis=1) * math.sin(self.theta_hat)

    def __call__(self, x) -> int:
        return int(self._margin(self.space.coerce(x))[0] >= -TOL)

    def evaluate(self, points) -> np.ndarray:
        return (self._margin(points) >= -TOL).astype(np.int8)

    def positive_set_near(self, x, radius: float) -> IntervalSet:
        if self.space != InstanceSpace.sphere(2):
            raise CapabilityError("closed-form arcs are implemented for the unit circle only")
        return arc_near(angle_of(self.center), HALF_PI - self.theta_hat, angle_of(x), closed=True)


def build_agreement_classifier(w_hat, theta_hat: float) -> AgreementClassifier:
    return AgreementClassifier(np.asarray(w_hat, float), float(theta_hat))


def normal_angle(w1, w2) -> float:
    return angular_distance(angle_of(w1), angle_of(w2))


def disagreement_mass(w1, w2) -> float:
    """Uniform-circle mass where two homogeneous halfspaces disagree, by interval arithmetic."""
    a = arc_near(angle_of(w1), HALF_PI, 0.0).intersect(IntervalSet.closed(-math.pi, math.pi))
    b = arc_near(angle_of(w2), HALF_PI, 0.0).intersect(IntervalSet.closed(-math.pi, math.pi))
    return (a.difference(b).measure + b.difference(a).measure) / (2 * math.pi)


def estimate_angle_constant(dist: Distribution, w1, w2, n: int = 100_000, rng=None) -> float:
    """Empirical ratio angle / P[disagree] for an arbitrary marginal (pi on isotropic 2-D marginals)."""
    rng = dist.rng("angle-constant") if rng is None else rng
    pts = dist.draw(n, rng)
    dis = np.mean(((pts @ np.asarray(w1)) >= 0) != ((pts @ np.asarray(w2)) >= 0))
    return float(normal_angle(w1, w2) / dis) if dis > 0 else float("inf")


# ---------------------------------------------------------------------------
# Noisy improvement loss
# ---------------------------------------------------------------------------


def _point_loss(label: int, bayes: int, nu: float) -> float:
    """E[1[label != y]] where y is the Bayes label flipped with probability nu."""
    return nu if label == bayes else 1.0 - nu


def noisy_improvement_loss(x, h: Concept, fbayes: HalfspaceConcept, channel: NoiseChannel, r: float) -> float:
    """Worst expected disagreement with the noisy label over the reaction set, on the unit circle."""
    if h.space != InstanceSpace.sphere(2) or fbayes.space != h.space:
        raise CapabilityError("closed-form noisy loss is implemented on the unit circle")
    x = h.space.coerce(x)
    nu_x = float(channel.nu(x.reshape(1, 2))[0])
    hx, fx = h(x), fbayes(x)
    if hx == 1:
        return _point_loss(1, fx, nu_x)
    phi = angle_of(x)
    w = min(r + TOL, math.pi)
    reach = h.positive_set_near(x, w).intersect(IntervalSet.closed(-w, w))
    if reach.is_empty():
        return _point_loss(0, fx, nu_x)
    fpos = fbayes.positive_set_near(x, w)
    agree = reach.intersect(fpos)
    disagree = reach.difference(fpos)
    best = 0.0
    if not agree.is_empty():
        best = max(best, channel.rate.sup(agree, phi))
    if not disagree.is_empty():
        best = max(best, 1.0 - channel.rate.inf(disagree, phi))
    return best


def bayes_loss(x, fbayes: HalfspaceConcept, channel: NoiseChannel) -> float:
    """Pointwise loss of the Bayes classifier: nu(x)."""
    return float(channel.nu(np.asarray(x, float).reshape(1, -1))[0])


# ---------------------------------------------------------------------------
# Experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BayesRow:
    trial: int
    m: int
    angle: float
    within_budget: bool
    excess: float
    conservative_violations: int
    seed: int


def bayes_optimal_experiment(
    channel: str | NoiseChannel = "rcn",
    nu: float = 0.2,
    r: float = 0.2,
    m: int = 20_000,
    trials: int = 100,
    seed: int = 0,
    test_grid: int = 720,
    erm_grid: int = 720,
    theta_hat: float | None = None,
    band: float = 0.1,
    start: int = 0,
) -> list[BayesRow]:
    """Per trial: learn w_hat by grid ERM, build the agreement classifier, score it on a test grid.

    The Bayes normal is drawn uniformly per trial. ``excess`` is the maximum
    over test points of |noisy loss - nu(x)|; ``within_budget`` records whether
    the learned normal is within ``r`` of the Bayes normal, the condition the
    guarantee needs.
    """
    theta_hat = r if theta_hat is None else theta_hat
    tests = np.stack([np.cos(angle_grid(test_grid)), np.sin(angle_grid(test_grid))], axis=1)
    dist = UniformSphere(2, seed)
    rows = []
    for t in range(start, start + trials):
        rng = stream(seed, "noisy", t)
        w_star = unit(rng.uniform(-math.pi, math.pi))
        fbayes = HalfspaceConcept(w_star)
        if isinstance(channel, NoiseChannel):
            ch = channel
        elif channel == "rcn":
            ch = NoiseChannel.rcn(nu)
        elif channel == "massart":
            ch = NoiseChannel.massart(BoundaryBandNu(nu, w_star, band))
        else:
            raise ParameterError("channel must be 'rcn' or 'massart'")
        S = noisy_sample(dist, fbayes, ch, m, rng)
        w_hat = erm_halfspace_2d(S, erm_grid)
        f_hat = build_agreement_classifier(w_hat, theta_hat)
        angle = normal_angle(w_hat, w_star)
        excess = 0.0
        for x in tests:
            excess = max(excess, abs(noisy_improvement_loss(x, f_hat, fbayes, ch, r) - bayes_loss(x, fbayes, ch)))
        violations = int(np.sum((f_hat.evaluate(tests) == 1) & (fbayes.evaluate(tests) == 0)))
        rows.append(BayesRow(t, m, angle, angle <= r + TOL, excess, violations, seed))
    return rows


def excess_band(w_hat, w_star, theta_hat: float, r: float) -> IntervalSet:
    """Absolute angles where the agreement classifier's RCN loss exceeds nu.

    These are points the Bayes halfspace labels positive that lie farther
    than ``r`` from the agreement arc. The set is empty when the angle between
    the normals is at most ``r - theta_hat`` and nonempty as soon as it exceeds
    that, so ``theta_hat = r`` leaves a band as wide as the angle error.
    """
    a_hat, a_star = angle_of(w_hat), angle_of(w_star)
    agree = arc_near(a_hat, HALF_PI - theta_hat + r, 0.0, closed=True)
    bayes_pos = arc_near(a_star, HALF_PI, 0.0, closed=True)
    window = IntervalSet([Interval(-math.pi, math.pi, False, True)])
    return bayes_pos.difference(agree).intersect(window)
