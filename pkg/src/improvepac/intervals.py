"""Finite unions of real intervals with explicit open/closed endpoints.

Used for exact loss evaluation on one-dimensional charts: the real line for
``Euclidean(1)`` and local arc-length coordinates for points on the circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence


@dataclass(frozen=True, order=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def is_empty(self) -> bool:
        if self.lo > self.hi:
            return True
        if self.lo == self.hi:
            return not (self.lo_closed and self.hi_closed)
        return False

    def contains(self, x: float) -> bool:
        if x < self.lo or x > self.hi:
            return False
        if x == self.lo and not self.lo_closed:
            return False
        if x == self.hi and not self.hi_closed:
            return False
        return True

    @property
    def length(self) -> float:
        return max(0.0, self.hi - self.lo)

    def intersect(self, other: "Interval") -> "Interval":
        if self.lo > other.lo:
            lo, lo_c = self.lo, self.lo_closed
        elif other.lo > self.lo:
            lo, lo_c = other.lo, other.lo_closed
        else:
            lo, lo_c = self.lo, self.lo_closed and other.lo_closed
        if self.hi < other.hi:
            hi, hi_c = self.hi, self.hi_closed
        elif other.hi < self.hi:
            hi, hi_c = other.hi, other.hi_closed
        else:
            hi, hi_c = self.hi, self.hi_closed and other.hi_closed
        return Interval(lo, hi, lo_c, hi_c)

    def shift(self, dx: float) -> "Interval":
        return Interval(self.lo + dx, self.hi + dx, self.lo_closed, self.hi_closed)


def _touch_or_overlap(a: Interval, b: Interval) -> bool:
    # a.lo <= b.lo assumed
    if b.lo < a.hi:
        return True
    if b.lo == a.hi:
        return a.hi_closed or b.lo_closed
    return False


class IntervalSet:
    """Normalized, sorted, disjoint union of intervals."""

    __slots__ = ("intervals",)

    def __init__(self, intervals: Iterable[Interval] = ()):
        items = sorted(
            (iv for iv in intervals if not iv.is_empty()),
            key=lambda iv: (iv.lo, not iv.lo_closed),
        )
        merged: list[Interval] = []
        for iv in items:
            if merged and _touch_or_overlap(merged[-1], iv):
                last = merged[-1]
                if iv.hi > last.hi:
                    hi, hi_c = iv.hi, iv.hi_closed
                elif iv.hi < last.hi:
                    hi, hi_c = last.hi, last.hi_closed
                else:
                    hi, hi_c = last.hi, last.hi_closed or iv.hi_closed
                merged[-1] = Interval(last.lo, hi, last.lo_closed, hi_c)
            else:
                merged.append(iv)
        self.intervals: tuple[Interval, ...] = tuple(merged)

    @classmethod
    def closed(cls, lo: float, hi: float) -> "IntervalSet":
        return cls([Interval(lo, hi, True, True)])

    @classmethod
    def point(cls, x: float) -> "IntervalSet":
        return cls([Interval(x, x, True, True)])

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls()

    @classmethod
    def real_line(cls) -> "IntervalSet":
        return cls([Interval(-math.inf, math.inf, False, False)])

    def __repr__(self) -> str:
        parts = []
        for iv in self.intervals:
            parts.append(
                f"{'[' if iv.lo_closed else '('}{iv.lo:g}, {iv.hi:g}{']' if iv.hi_closed else ')'}"
            )
        return "IntervalSet(" + " U ".join(parts) + ")"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, IntervalSet) and self.intervals == other.intervals

    def __hash__(self) -> int:
        return hash(self.intervals)

    def is_empty(self) -> bool:
        return not self.intervals

    def contains(self, x: float) -> bool:
        return any(iv.contains(x) for iv in self.intervals)

    @property
    def measure(self) -> float:
        return sum(iv.length for iv in self.intervals)

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(self.intervals + other.intervals)

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        out = []
        for a in self.intervals:
            for b in other.intervals:
                if b.lo > a.hi:
                    break
                out.append(a.intersect(b))
        return IntervalSet(out)

    def complement(self) -> "IntervalSet":
        out = []
        lo, lo_c = -math.inf, False
        for iv in self.intervals:
            out.append(Interval(lo, iv.lo, lo_c, not iv.lo_closed))
            lo, lo_c = iv.hi, not iv.hi_closed
        out.append(Interval(lo, math.inf, lo_c, False))
        return IntervalSet(out)

    def difference(self, other: "IntervalSet") -> "IntervalSet":
        return self.intersect(other.complement())

    def shift(self, dx: float) -> "IntervalSet":
        return IntervalSet(iv.shift(dx) for iv in self.intervals)

    def endpoints(self) -> list[float]:
        pts = []
        for iv in self.intervals:
            if math.isfinite(iv.lo):
                pts.append(iv.lo)
            if math.isfinite(iv.hi):
                pts.append(iv.hi)
        return pts


def union_all(sets: Sequence[IntervalSet]) -> IntervalSet:
    ivs: list[Interval] = []
    for s in sets:
        ivs.extend(s.intervals)
    return IntervalSet(ivs)
