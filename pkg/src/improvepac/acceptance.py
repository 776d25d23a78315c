"""Acceptance criteria as callable checks, shared by the test suite and the ``suite`` CLI verb.

Each check returns a ``CriterionResult``; a criterion passes only if its
property holds and it finishes inside its time budget.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import ballworld, classprops, noisy, online, proper
from .classprops import ConceptClass
from .core import Explicit, FiniteConcept, FiniteWeighted, population_loss
from .errors import ParameterError
from .io import load_fixture
from .rng import stream


@dataclass
class CriterionResult:
    cid: int
    name: str
    passed: bool
    measured: str
    runtime: float
    budget: float
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} C{self.cid:02d} {self.name}: {self.measured} [{self.runtime:.2f}s / {self.budget:g}s]"

    def to_dict(self) -> dict:
        return {
            "criterion": self.cid,
            "name": self.name,
            "passed": self.passed,
            "measured": self.measured,
            "runtime": round(self.runtime, 3),
            "budget": self.budget,
        }


def _timed(cid: int, name: str, budget: float, body: Callable[[], tuple[bool, str, dict]]) -> CriterionResult:
    t0 = time.perf_counter()
    ok, measured, details = body()
    dt = time.perf_counter() - t0
    return CriterionResult(cid, name, bool(ok and dt <= budget), measured, dt, budget, details)


# ---------------------------------------------------------------------------


def venn_separations() -> CriterionResult:
    def body():
        two = load_fixture("two_point_disjoint")
        loo = load_fixture("leave_one_out")
        a = ConceptClass.from_bits(two["concepts"])
        b = ConceptClass.from_bits(loo["concepts"])
        verdicts = {
            "two_point.intersection_closed": classprops.is_intersection_closed(a).holds,
            "two_point.minimally_consistent": classprops.is_minimally_consistent(a).holds,
            "leave_one_out.minimally_consistent": classprops.is_minimally_consistent(b).holds,
            "leave_one_out.nearly_minimally_consistent": classprops.is_nearly_minimally_consistent(b).holds,
        }
        expected = {
            "two_point.intersection_closed": False,
            "two_point.minimally_consistent": True,
            "leave_one_out.minimally_consistent": False,
            "leave_one_out.nearly_minimally_consistent": True,
        }
        counter, total = [], 0
        for n in (1, 2, 3):
            for cls in classprops.all_classes(n):
                total += 1
                ic = classprops.is_intersection_closed(cls).holds
                mc = classprops.is_minimally_consistent(cls).holds
                nmc = classprops.is_nearly_minimally_consistent(cls).holds
                if (ic and not mc) or (mc and not nmc):
                    counter.append(cls.masks)
        ok = verdicts == expected and not counter
        return ok, f"fixture verdicts {'match' if verdicts == expected else 'MISMATCH'}; {total} classes, {len(counter)} chain counterexamples", {
            "verdicts": verdicts,
            "classes": total,
            "counterexamples": counter,
        }

    return _timed(1, "inclusion chain and fixture verdicts", 10, body)


def random_nmc_classes(count: int = 24, seed: int = 0) -> list[ConceptClass]:
    """Half intersection-closed systems on 8 points, half rejection-sampled classes on 4 to 8 points."""
    out = []
    i = 0
    while len(out) < count // 2:
        rng = stream(seed, "closure", i)
        i += 1
        cls = classprops.random_closure_system(8, int(rng.integers(3, 8)), rng)
        if len(cls) >= 2:
            out.append(cls)
    i = 0
    while len(out) < count:
        rng = stream(seed, "rejection", i)
        i += 1
        n = int(rng.integers(4, 9))
        cls = classprops.random_class(n, int(rng.integers(3, 12)), rng)
        if classprops.is_nearly_minimally_consistent(cls).holds:
            out.append(cls)
    return out


def proper_forward(eps: float = 0.1, delta: float = 0.1, trials: int = 200, n_classes: int = 24, seed: int = 0) -> CriterionResult:
    def body():
        rates = []
        for k, cls in enumerate(random_nmc_classes(n_classes, seed)):
            rng = stream(seed, "instance", k)
            fstar = cls[int(rng.integers(len(cls)))]
            dmap = proper.random_explicit_map(cls.n, rng)
            dist = proper.random_weights(cls.n, rng, seed)
            m = proper.sample_size(eps, delta, classprops.vc_dimension(cls))
            rows = proper.pac_experiment(cls, fstar, dmap, dist, m, trials, seed=seed + k)
            rates.append(float(np.mean([r.loss <= eps for r in rows])))
        ok = len(rates) >= 20 and min(rates) >= 0.85
        return ok, f"{len(rates)} classes; min success rate {min(rates):.3f} (need >= 0.85)", {"rates": rates}

    return _timed(2, "proper learner on nearly minimally consistent classes", 60, body)


def proper_reverse() -> CriterionResult:
    def body():
        failing, bad = 0, []
        worst_margin = math.inf
        for n in (1, 2, 3):
            for cls in classprops.all_classes(n):
                rep = classprops.is_nearly_minimally_consistent(cls)
                if rep.holds:
                    continue
                failing += 1
                for consistent_only in (True, False):
                    v = proper.hardness_value(cls, rep.witness, consistent_only=consistent_only)
                    worst_margin = min(worst_margin, v["min_worst_loss"] - v["bound"])
                    if not (v["min_worst_loss"] >= v["bound"] > 0):
                        bad.append((cls.masks, consistent_only, v["min_worst_loss"]))
        ok = failing > 0 and not bad
        return ok, f"{failing} failing classes; {len(bad)} below 1/|S|; min margin {worst_margin:.3f}", {"bad": bad}

    return _timed(3, "hardness construction on classes without near-minimal consistency", 10, body)


def covering_hits(trials: int = 1000, seed: int = 0) -> CriterionResult:
    def body():
        N, beta, gamma = 10, 0.1, 0.1
        m = ballworld.covering_sample_size(beta, N, gamma)
        dist, cover = ballworld.unit_cells(N)
        rows = ballworld.covering_experiment(dist, cover, m, trials, seed)
        freq = float(np.mean([r.hit for r in rows]))
        exact = ballworld.coupon_success_probability(N, m)
        return m == 47 and freq >= 0.87, f"m={m}; all-hit frequency {freq:.3f} (need >= 0.87; exact {exact:.4f})", {"freq": freq}

    return _timed(4, "covering sample hits every cell", 5, body)


def memorization(trials: int = 500, seed: int = 0) -> CriterionResult:
    def body():
        N, beta, gamma, pos_frac = 20, 0.05, 0.1, 0.5
        m_pos = ballworld.covering_sample_size(beta, N, gamma)
        m = ballworld.memorization_sample_size(beta, N, gamma, pos_frac)
        rows = ballworld.memorize_pac(N=N, r=1.0 / N, m=m, trials=trials, seed=seed, pos_frac=pos_frac)
        zero = float(np.mean([r.loss == 0 for r in rows]))
        neg = all(r.negatives_ok for r in rows)
        # informational: the same count spent on total draws leaves about m_pos/2 positives
        raw = ballworld.memorize_pac(N=N, r=1.0 / N, m=m_pos, trials=trials, seed=seed, pos_frac=pos_frac)
        raw_zero = float(np.mean([r.loss == 0 for r in raw]))
        return zero >= 0.9 and neg, (
            f"positive-sample target {m_pos}, total draws {m}; zero-loss rate {zero:.3f} (need >= 0.90); "
            f"negatives exact zero in {'all' if neg else 'NOT all'} trials; "
            f"with {m_pos} total draws the rate is {raw_zero:.3f}"
        ), {"zero_rate": zero, "zero_rate_total_draws": raw_zero}

    return _timed(5, "memorization on a coverable mixture", 30, body)


def spread_lower_bound(trials: int = 200, seed: int = 0) -> CriterionResult:
    def body():
        fx = load_fixture("spread_points")
        beta, r = fx["beta"], fx["r"]
        N = round(1 / beta)
        m_low = int(N * math.log(N) / 2)
        m_high = math.ceil(N * math.log(N) + 3 * N)
        under = {}
        for name in ballworld.LEARNERS:
            rows = ballworld.spread_points_lower_bound(beta, r, m_low, trials, name, seed)
            under[name] = float(np.mean([x.loss > 0 for x in rows]))
        rows = ballworld.spread_points_lower_bound(beta, r, m_high, trials, "memorize", seed)
        succ = float(np.mean([x.loss == 0 for x in rows]))
        pred = 1 - math.exp(-3)
        ok = all(v == 1.0 for v in under.values()) and succ >= 0.9 and abs(succ - pred) <= 0.05
        return ok, (
            f"m={m_low}: min failure rate over learners {min(under.values()):.3f}; "
            f"m={m_high}: memorize success {succ:.3f} (prediction {pred:.3f} +- 0.05)"
        ), {"under": under, "success": succ}

    return _timed(6, "spread-points lower bound", 30, body)


def union_interval(seed: int = 0) -> CriterionResult:
    def body():
        fx = load_fixture("union_interval")
        viol = ballworld.union_interval_violations(fx["r"], fx["grid_size"])
        rows = ballworld.union_interval_demo(fx["r"], trials=fx["grid_size"], seed=seed, grid_size=fx["grid_size"])
        mean = float(np.mean([x.loss for x in rows]))
        floor = 0.25 * (fx["grid_size"] - 1) / fx["grid_size"]
        return not viol and mean >= floor, f"{len(viol)} pairs below 0.25; ERM mean loss {mean:.4f} (need >= {floor:.4f})", {}

    return _timed(7, "union of two intervals defeats proper learners", 5, body)


def noisy_bayes(trials: int = 100, seed: int = 0) -> CriterionResult:
    def body():
        rows = noisy.bayes_optimal_experiment("rcn", 0.2, 0.2, 20_000, trials, seed)
        good = [x for x in rows if x.within_budget]
        exact = sum(x.excess <= 1e-12 for x in good)
        viol = sum(x.conservative_violations for x in good)
        ok = len(good) >= 90 and exact == len(good) and viol == 0
        # with theta_hat = r the off-grid band where the loss is 1 - nu is exactly as wide as the angle error
        gaps = [x.angle for x in good if x.angle > 1e-12]
        return ok, (
            f"{len(good)}/{trials} trials within angle budget; {exact} exact on the test grid; "
            f"{viol} conservativeness violations; off-grid excess bands in {len(gaps)} trials "
            f"(widest {max(gaps, default=0.0):.4f} rad)"
        ), {"off_grid_band_widths": gaps}

    return _timed(8, "noisy improvement loss matches the Bayes loss", 120, body)


def star_majority() -> CriterionResult:
    def body():
        fx = load_fixture("star_majority")
        graph = online.Graph.from_edges(fx["n"], [tuple(e) for e in fx["edges"]])
        matrix = np.array(fx["concepts"], dtype=np.int8)
        xs = [fx["sequence"]["repeat"]] * 50
        std = online.play_online(graph, matrix, "standard", online.ScriptedAdversary(xs, matrix[fx["target"]]), 50)
        ra = online.play_online(graph, matrix, "alg3", online.ScriptedAdversary(xs, matrix[fx["target"]]), 50)
        bound = online.alg3_mistake_bound(len(matrix), graph.max_degree)
        ok = std.mistakes == 50 and ra.mistakes <= bound
        return ok, f"standard {std.mistakes}/50; risk-averse {ra.mistakes} (bound {bound:.2f})", {}

    return _timed(9, "majority vote fails on the star", 1, body)


def realizable_online(runs: int = 100, seed: int = 0) -> CriterionResult:
    def body():
        res = [online.random_online_run(i, seed, "alg3")[0] for i in range(runs)]
        b = sum(r.bound_ok for r in res)
        s = sum(r.fstar_survives for r in res)
        p = sum(r.progress_ok for r in res)
        ok = b == s == p == runs
        return ok, f"bound {b}/{runs}; target survives {s}/{runs}; per-mistake progress {p}/{runs}", {}

    return _timed(10, "risk-averse majority mistake bound", 60, body)


def agnostic_online(runs: int = 100, corrupt: int = 20, seed: int = 0) -> CriterionResult:
    def body():
        res = [online.random_online_run(i, seed, "alg4", corrupt=corrupt)[0] for i in range(runs)]
        b = sum(r.bound_ok for r in res)
        p = sum(r.progress_ok for r in res)
        worst = max(r.opt for r in res)
        ok = b == p == runs and worst <= corrupt
        return ok, f"weight inequality {b}/{runs}; per-mistake shrinkage {p}/{runs}; max OPT {worst}", {}

    return _timed(11, "risk-averse weighted majority mistake bound", 60, body)


def star_lower_bound() -> CriterionResult:
    def body():
        fails = []
        for d in (3, 5, 8):
            for name in online.LEARNERS:
                a = online.star_adversary(d, "agnostic", name)
                if a.ledger.mistakes < d * a.opt or a.ledger.mistakes != 10 * d:
                    fails.append(("agnostic", d, name, a.ledger.mistakes, a.opt))
                r = online.star_adversary(d, "realizable", name)
                if r.ledger.mistakes < d - 1 or not r.certified or r.opt != 0:
                    fails.append(("realizable", d, name, r.ledger.mistakes))
        return not fails, f"{9 - len({f[1:3] for f in fails})}/9 learner-degree pairs pass both modes", {"fails": fails}

    return _timed(12, "adaptive star adversary lower bounds", 10, body)


def strategic_contrast(eps: float = 0.2) -> CriterionResult:
    def body():
        fx = load_fixture("strategic_ten_point")
        n = fx["n"]
        cls = classprops.all_labelings(n)
        fstar = FiniteConcept.from_support(n, fx["target_support"])
        dmap = Explicit.everything(n)
        dist = FiniteWeighted.uniform(n)
        pos_mass = len(fx["target_support"]) / n
        if not (pos_mass > eps and 1 - pos_mass > eps):
            raise ParameterError("fixture must put more than eps mass on each label")
        viol = 0
        for h in cls:
            s = population_loss(h, fstar, dmap, dist, "strategic").value
            if h.support and not s > eps:
                viol += 1
        zero = FiniteConcept.from_support(n, [])
        s0 = population_loss(zero, fstar, dmap, dist, "strategic").value
        z0 = population_loss(zero, fstar, dmap, dist, "zero_one").value
        imp = population_loss(fstar, fstar, dmap, dist, "improvement").value
        strat_star = population_loss(fstar, fstar, dmap, dist, "strategic").value
        ok = viol == 0 and abs(s0 - z0) < 1e-12 and imp == 0.0 and strat_star > eps
        return ok, (
            f"{viol} violations over {len(cls) - 1} hypotheses; all-negative strategic {s0:.2f} = 0-1 {z0:.2f}; "
            f"target: improvement {imp:.2f} vs strategic {strat_star:.2f}"
        ), {}

    return _timed(13, "strategic loss contrast", 5, body)


CRITERIA = {
    1: venn_separations,
    2: proper_forward,
    3: proper_reverse,
    4: covering_hits,
    5: memorization,
    6: spread_lower_bound,
    7: union_interval,
    8: noisy_bayes,
    9: star_majority,
    10: realizable_online,
    11: agnostic_online,
    12: star_lower_bound,
    13: strategic_contrast,
}

BUNDLES = {
    "venn": (1,),
    "proper": (2, 3, 13),
    "ball": (4, 5, 6, 7),
    "noise": (8,),
    "online": (9, 10, 11, 12),
    "all": tuple(CRITERIA),
}


def run_bundle(name: str) -> list[CriterionResult]:
    if name not in BUNDLES:
        raise ParameterError(f"suite must be one of {sorted(BUNDLES)}")
    return [CRITERIA[c]() for c in BUNDLES[name]]
