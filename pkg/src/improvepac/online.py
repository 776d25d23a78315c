"""Online learning with improvements on graphs.

Each round the learner publishes a labeling of every node, the adversary
reveals a node and its label, and the learner is told only whether it made a
mistake. A mistake is the improvement loss at the revealed node: the agent
moves to a positively labeled neighbor when it is labeled negative and one
exists, and the learner errs if any possible destination is mislabeled.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from .classprops import ConceptClass
from .core import FiniteConcept, GraphNeighborhood, InstanceSpace
from .errors import AdversaryError, DomainError, ParameterError, ProtocolError, RealizabilityError

LEARNERS = ("standard", "alg3", "alg4")


# ---------------------------------------------------------------------------
# Graphs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset

    def __post_init__(self):
        norm = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise DomainError("self-loops are not allowed")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise DomainError(f"edge ({u}, {v}) outside 0..{self.n - 1}")
            norm.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        edges = list(edges)
        keyed = [(min(u, v), max(u, v)) for u, v in edges]
        if len(set(keyed)) != len(keyed):
            raise DomainError("duplicate edges")
        return cls(n, frozenset(keyed))

    @cached_property
    def adjacency(self) -> tuple:
        adj = [[] for _ in range(self.n)]
        for u, v in sorted(self.edges):
            adj[u].append(v)
            adj[v].append(u)
        return tuple(np.array(sorted(a), dtype=int) for a in adj)

    @cached_property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    def neighbors(self, x: int) -> np.ndarray:
        return self.adjacency[x]

    def improvement_map(self) -> GraphNeighborhood:
        return GraphNeighborhood(self.n, tuple(frozenset(a.tolist()) for a in self.adjacency))


def star_graph(delta: int) -> Graph:
    """Leaves 0..delta-1, center delta."""
    return Graph.from_edges(delta + 1, [(i, delta) for i in range(delta)])


def random_graph(n: int, max_deg: int, rng: np.random.Generator, p: float = 0.3) -> Graph:
    """Random graph with degrees capped at ``max_deg`` and at least one edge."""
    if n < 2 or max_deg < 1:
        raise ParameterError("need n >= 2 and max_deg >= 1")
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    order = rng.permutation(len(pairs))
    deg = np.zeros(n, dtype=int)
    edges = []
    for k in order:
        u, v = pairs[k]
        if deg[u] < max_deg and deg[v] < max_deg and (not edges or rng.random() < p):
            edges.append((u, v))
            deg[u] += 1
            deg[v] += 1
    return Graph.from_edges(n, edges)


# ---------------------------------------------------------------------------
# Mistakes and hindsight optimum
# ---------------------------------------------------------------------------


def graph_mistake(pred: np.ndarray, f: np.ndarray, graph: Graph, x: int) -> int:
    """Improvement loss at node x for labeling ``pred`` against truth ``f``."""
    if pred[x] == 1:
        return int(f[x] == 0)
    nbr = graph.neighbors(x)
    pos = nbr[pred[nbr] == 1]
    if len(pos) == 0:
        return int(f[x] == 1)
    return int(np.any(f[pos] == 0))


def mistakes_per_concept(matrix: np.ndarray, f: np.ndarray, graph: Graph, x: int) -> np.ndarray:
    """Vectorized ``graph_mistake`` for every row of a concept matrix."""
    hx = matrix[:, x] == 1
    nbr = graph.neighbors(x)
    if len(nbr):
        pos = matrix[:, nbr] == 1
        has = pos.any(axis=1)
        bad = (pos & (f[nbr] == 0)[None, :]).any(axis=1)
    else:
        has = np.zeros(matrix.shape[0], dtype=bool)
        bad = has
    return np.where(hx, f[x] == 0, np.where(has, bad, f[x] == 1)).astype(int)


def hindsight_mistakes(matrix: np.ndarray, graph: Graph, xs: Sequence[int], truths: Sequence[np.ndarray]) -> np.ndarray:
    total = np.zeros(matrix.shape[0], dtype=int)
    for x, f in zip(xs, truths):
        total += mistakes_per_concept(matrix, f, graph, x)
    return total


def opt(matrix: np.ndarray, graph: Graph, xs, truths) -> int:
    """Fewest mistakes of any single concept on the played sequence."""
    return int(hindsight_mistakes(matrix, graph, xs, truths).min())


# ---------------------------------------------------------------------------
# Ensembles and predictions
# ---------------------------------------------------------------------------


def _as_matrix(concepts) -> np.ndarray:
    if isinstance(concepts, np.ndarray):
        return concepts.astype(np.int8)
    if isinstance(concepts, ConceptClass):
        return concepts.matrix.copy()
    return np.array([c.bits for c in concepts], dtype=np.int8)


@dataclass
class WeightedEnsemble:
    """Concepts as rows of a label matrix with nonnegative weights (0 = discarded)."""

    matrix: np.ndarray
    weights: np.ndarray

    @classmethod
    def uniform(cls, concepts) -> "WeightedEnsemble":
        m = _as_matrix(concepts)
        if m.shape[0] == 0:
            raise DomainError("ensemble needs at least one concept")
        return cls(m, np.ones(m.shape[0]))

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    @property
    def alive(self) -> np.ndarray:
        return self.weights > 0

    @property
    def size(self) -> int:
        return int(self.alive.sum())

    def positive_mass(self) -> np.ndarray:
        return self.weights @ self.matrix

    def copy(self) -> "WeightedEnsemble":
        return WeightedEnsemble(self.matrix, self.weights.copy())


def standard_majority_predict(ens: WeightedEnsemble) -> np.ndarray:
    """Label 1 where strictly more than half the surviving concepts vote 1."""
    if ens.size == 0:
        raise ProtocolError("no surviving concepts")
    alive = ens.matrix[ens.alive]
    return (2 * alive.sum(axis=0) > alive.shape[0]).astype(np.int8)


def risk_averse_predict(ens: WeightedEnsemble, delta_G: int) -> np.ndarray:
    """Label 1 where the positive mass is at least delta_G/(delta_G+1) of the total (inclusive)."""
    W = ens.total
    if W <= 0:
        raise ProtocolError("total weight must be positive")
    return ((delta_G + 1) * ens.positive_mass() >= delta_G * W).astype(np.int8)


def _positive_neighbors(pred: np.ndarray, graph: Graph, x: int) -> np.ndarray:
    nbr = graph.neighbors(x)
    return nbr[pred[nbr] == 1]


def _h_prime(ens: WeightedEnsemble, dplus: np.ndarray) -> np.ndarray:
    """Concepts positive on every node of ``dplus``."""
    return np.all(ens.matrix[:, dplus] == 1, axis=1)


def algorithm3_step(ens: WeightedEnsemble, graph: Graph, pred: np.ndarray, x: int, mistake: int, strict: bool = True):
    """Discard rule of the risk-averse majority vote. Returns (ensemble, action)."""
    if not mistake:
        return ens, "none"
    alive = ens.alive
    if pred[x] == 0:
        dplus = _positive_neighbors(pred, graph, x)
        if len(dplus) == 0:
            keep, action = ens.matrix[:, x] == 1, "keep_positive_at_x"
        else:
            keep, action = ~_h_prime(ens, dplus), "discard_h_prime"
    else:
        keep, action = ens.matrix[:, x] == 0, "keep_negative_at_x"
    new = alive & keep
    if not new.any():
        if strict:
            raise RealizabilityError("every concept was discarded; the sequence is not realizable")
        return ens, action + "_skipped"
    out = ens.copy()
    out.weights[~new] = 0.0
    return out, action


def algorithm4_step(ens: WeightedEnsemble, graph: Graph, pred: np.ndarray, x: int, mistake: int):
    """Halving rule of the risk-averse weighted majority vote. Returns (ensemble, action)."""
    if not mistake:
        return ens, "none"
    if pred[x] == 0:
        dplus = _positive_neighbors(pred, graph, x)
        if len(dplus) == 0:
            sel, action = ens.matrix[:, x] == 0, "halve_negative_at_x"
        else:
            sel, action = _h_prime(ens, dplus), "halve_h_prime"
    else:
        sel, action = ens.matrix[:, x] == 1, "halve_positive_at_x"
    out = ens.copy()
    out.weights[sel] /= 2
    return out, action


# ---------------------------------------------------------------------------
# Learners
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Feedback:
    """Everything the learner is told after a round; the destination node is never revealed."""

    x: int
    label: int
    mistake: int


class OnlineLearner:
    name = ""

    def __init__(self, concepts, graph: Graph, strict: bool = True):
        self.ens = WeightedEnsemble.uniform(concepts)
        self.graph = graph
        self.strict = strict
        self._pred = None

    @property
    def state_value(self) -> float:
        return float(self.ens.size)

    def predict(self) -> np.ndarray:
        raise NotImplementedError

    def update(self, fb: Feedback) -> str:
        raise NotImplementedError


class StandardMajority(OnlineLearner):
    """Majority of surviving concepts; on a mistake, drop concepts contradicting the revealed label.

    With ``strict=False`` an update that would drop every concept is skipped.
    """

    name = "standard"

    def predict(self):
        self._pred = standard_majority_predict(self.ens)
        return self._pred

    def update(self, fb: Feedback) -> str:
        if not fb.mistake:
            return "none"
        new = self.ens.alive & (self.ens.matrix[:, fb.x] == fb.label)
        if not new.any():
            if self.strict:
                raise RealizabilityError("every concept contradicts the revealed labels")
            return "discard_inconsistent_skipped"
        self.ens.weights[~new] = 0.0
        return "discard_inconsistent"


class RiskAverseMajority(OnlineLearner):
    name = "alg3"

    def predict(self):
        self._pred = risk_averse_predict(self.ens, self.graph.max_degree)
        return self._pred

    def update(self, fb: Feedback) -> str:
        self.ens, action = algorithm3_step(self.ens, self.graph, self._pred, fb.x, fb.mistake, self.strict)
        return action


class RiskAverseWeighted(OnlineLearner):
    name = "alg4"

    @property
    def state_value(self) -> float:
        return self.ens.total

    def predict(self):
        self._pred = risk_averse_predict(self.ens, self.graph.max_degree)
        return self._pred

    def update(self, fb: Feedback) -> str:
        self.ens, action = algorithm4_step(self.ens, self.graph, self._pred, fb.x, fb.mistake)
        return action


def make_learner(name: str, concepts, graph: Graph, strict: bool = True) -> OnlineLearner:
    if name not in LEARNERS:
        raise ParameterError(f"learner must be one of {LEARNERS}")
    if name in ("alg3", "alg4") and graph.max_degree < 1:
        raise ParameterError("risk-averse learners need a graph with maximum degree >= 1")
    return {"standard": StandardMajority, "alg3": RiskAverseMajority, "alg4": RiskAverseWeighted}[name](
        concepts, graph, strict
    )


# ---------------------------------------------------------------------------
# Ledger
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LedgerRow:
    t: int
    x: int
    label: int
    mistake: int
    before: float
    after: float
    action: str
    prediction: str


@dataclass
class MistakeLedger:
    learner: str
    delta_G: int
    n_concepts: int
    rows: list = field(default_factory=list)
    xs: list = field(default_factory=list)
    truths: list = field(default_factory=list)

    @property
    def mistakes(self) -> int:
        return sum(r.mistake for r in self.rows)

    def cumulative(self) -> np.ndarray:
        return np.cumsum([r.mistake for r in self.rows])

    def mistake_rows(self) -> list:
        return [r for r in self.rows if r.mistake]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "mistake", "survivors_or_weight", "action"])
        for r in self.rows:
            w.writerow([r.t, r.x, r.mistake, repr(r.after), r.action])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# Adversaries and the game loop
# ---------------------------------------------------------------------------


class Adversary:
    """Chooses the round's node and the full truth labeling after seeing the prediction."""

    realizable = False

    def choose(self, t: int, pred: np.ndarray) -> tuple[int, np.ndarray]:
        raise NotImplementedError

    def committed_truth(self) -> np.ndarray | None:
        """The single labeling every round must agree with in realizable mode."""
        return None


class ScriptedAdversary(Adversary):
    """Fixed node sequence; truth is ``fstar`` except at the listed corrupted rounds."""

    def __init__(self, xs: Sequence[int], fstar: np.ndarray, corrupt: Iterable[int] = (), realizable: bool | None = None):
        self.xs = [int(x) for x in xs]
        self.fstar = np.asarray(fstar, dtype=np.int8)
        self.corrupt = frozenset(int(t) for t in corrupt)
        self.realizable = not self.corrupt if realizable is None else realizable

    def choose(self, t, pred):
        x = self.xs[t]
        f = self.fstar.copy()
        if t in self.corrupt:
            f[x] ^= 1
        return x, f

    def committed_truth(self):
        return self.fstar if self.realizable else None


def play_online(graph: Graph, concepts, learner: str | OnlineLearner, adversary: Adversary, T: int, strict: bool | None = None) -> MistakeLedger:
    """Run T rounds and record every round in a ledger."""
    matrix = _as_matrix(concepts)
    if matrix.shape[1] != graph.n:
        raise DomainError("concepts must label every graph node")
    if isinstance(learner, str):
        learner = make_learner(learner, matrix, graph, adversary.realizable if strict is None else strict)
    ledger = MistakeLedger(learner.name, graph.max_degree, matrix.shape[0])
    committed = adversary.committed_truth()
    for t in range(T):
        pred = learner.predict().copy()
        x, f = adversary.choose(t, pred)
        f = np.asarray(f, dtype=np.int8)
        if committed is not None and not np.array_equal(f, committed):
            raise AdversaryError(f"round {t}: labeling departs from the committed target")
        mistake = graph_mistake(pred, f, graph, x)
        before = learner.state_value
        action = learner.update(Feedback(x, int(f[x]), mistake))
        ledger.rows.append(
            LedgerRow(t, x, int(f[x]), mistake, before, learner.state_value, action, "".join(map(str, pred)))
        )
        ledger.xs.append(x)
        ledger.truths.append(f)
    return ledger


# ---------------------------------------------------------------------------
# Bound checks
# ---------------------------------------------------------------------------


def alg3_mistake_bound(n_concepts: int, delta_G: int) -> float:
    """(delta_G + 1) ln |H|."""
    return (delta_G + 1) * math.log(n_concepts)


def alg4_mistake_bound(opt_value: int, n_concepts: int, delta_G: int) -> float:
    """Largest M with 2^-OPT <= |H| (1 - 1/(2(delta_G+1)))^M."""
    return (opt_value * math.log(2) + math.log(n_concepts)) / -math.log1p(-1 / (2 * (delta_G + 1)))


def alg4_bound_holds(M: int, opt_value: int, n_concepts: int, delta_G: int) -> bool:
    lhs = -opt_value * math.log(2)
    rhs = math.log(n_concepts) + M * math.log1p(-1 / (2 * (delta_G + 1)))
    return lhs <= rhs + 1e-12


def alg3_progress_ok(ledger: MistakeLedger) -> list[bool]:
    """Per mistake round: at least |H|/(delta_G+1) concepts discarded."""
    d = ledger.delta_G
    return [(d + 1) * (r.before - r.after) >= r.before for r in ledger.mistake_rows()]


def alg4_progress_ok(ledger: MistakeLedger) -> list[bool]:
    """Per mistake round: total weight shrinks by a factor at most 1 - 1/(2(delta_G+1))."""
    factor = 1 - 1 / (2 * (ledger.delta_G + 1))
    return [r.after <= r.before * factor * (1 + 1e-12) for r in ledger.mistake_rows()]


# ---------------------------------------------------------------------------
# Star constructions and the adaptive lower-bound adversary
# ---------------------------------------------------------------------------

STAR_VARIANTS = ("leave_one_out", "singleton", "all_leaves")


def star_concepts(delta: int, variant: str = "leave_one_out", center_label: int = 0) -> np.ndarray:
    """Concept matrix on the star with ``delta`` leaves.

    ``leave_one_out``: concept i is positive on every leaf except leaf i.
    ``singleton``: concept i is positive on leaf i only.
    ``all_leaves``: every concept is positive on all leaves, so all rows coincide.
    """
    if variant not in STAR_VARIANTS:
        raise ParameterError(f"variant must be one of {STAR_VARIANTS}")
    rows = []
    for i in range(delta):
        if variant == "leave_one_out":
            leaves = [int(i != j) for j in range(delta)]
        elif variant == "singleton":
            leaves = [int(i == j) for j in range(delta)]
        else:
            leaves = [1] * delta
        rows.append(leaves + [center_label])
    return np.array(rows, dtype=np.int8)


class StarAgnosticAdversary(Adversary):
    """Forces a mistake every round while at most one concept errs (on the singleton class)."""

    def __init__(self, delta: int):
        self.delta = delta
        self.center = delta
        self.cases = []

    def choose(self, t, pred):
        d, c = self.delta, self.center
        if pred[c] == 1:
            f = np.ones(d + 1, dtype=np.int8)
            f[c] = 0
            self.cases.append(1)
            return c, f
        leaves = np.flatnonzero(pred[:d] == 1)
        if len(leaves) == 0:
            self.cases.append(2)
            return c, np.ones(d + 1, dtype=np.int8)
        self.cases.append(3)
        return int(leaves[0]), np.zeros(d + 1, dtype=np.int8)


class CandidateAdversary(Adversary):
    """Realizable adaptive adversary over a candidate set of targets.

    Each round it picks the node and label for which the prediction errs
    against the most surviving candidates that carry that label, keeping
    exactly those. The target is fixed after the game to a survivor, and the
    whole transcript is re-verified against it.
    """

    realizable = True

    def __init__(self, matrix: np.ndarray, graph: Graph):
        self.matrix = matrix
        self.graph = graph
        self.candidates = np.ones(matrix.shape[0], dtype=bool)

    def choose(self, t, pred):
        best = None
        idx = np.flatnonzero(self.candidates)
        for x in range(self.graph.n):
            for label in (0, 1):
                sel = idx[self.matrix[idx, x] == label]
                errs = sel[[graph_mistake(pred, self.matrix[k], self.graph, x) == 1 for k in sel]]
                if best is None or len(errs) > len(best[2]):
                    best = (x, label, errs)
        x, label, errs = best
        if len(errs) == 0:
            # no forced mistake is available; reveal a label consistent with all candidates
            errs = idx[self.matrix[idx, x] == self.matrix[idx[0], x]]
        self.candidates = np.zeros_like(self.candidates)
        self.candidates[errs] = True
        # placeholder truth: one current candidate; re-verified post hoc against the final survivor
        return x, self.matrix[errs[0]].copy()


@dataclass
class StarResult:
    ledger: MistakeLedger
    opt: int
    mode: str
    survivor: int | None = None
    certified: bool = False
    cases: list = field(default_factory=list)


def star_adversary(
    delta: int,
    mode: str,
    learner: str,
    T: int | None = None,
    variant: str | None = None,
    center_label: int = 0,
) -> StarResult:
    """Play the adaptive star adversary against a deterministic learner.

    Agnostic mode runs T rounds (default 10*delta) on the singleton class and
    reports OPT. Realizable mode runs delta-1 rounds on the leave-one-out class
    and certifies a surviving concept that makes no mistakes and agrees with
    every revealed label.
    """
    if delta < 2:
        raise ParameterError("delta must be > 1")
    graph = star_graph(delta)
    if mode == "agnostic":
        matrix = star_concepts(delta, variant or "singleton", center_label)
        adv = StarAgnosticAdversary(delta)
        T = 10 * delta if T is None else T
        ledger = play_online(graph, matrix, learner, adv, T, strict=False)
        return StarResult(ledger, opt(matrix, graph, ledger.xs, ledger.truths), mode, cases=adv.cases)
    if mode != "realizable":
        raise ParameterError("mode must be 'agnostic' or 'realizable'")
    matrix = star_concepts(delta, variant or "leave_one_out", center_label)
    adv = CandidateAdversary(matrix, graph)
    rounds = delta - 1 if T is None else T
    learner_obj = make_learner(learner, matrix, graph, strict=False)
    ledger = play_online(graph, matrix, learner_obj, adv, rounds)
    survivor = int(np.flatnonzero(adv.candidates)[0])
    f = matrix[survivor]
    certified = _certify(ledger, graph, f, matrix[survivor])
    if not certified:
        raise AdversaryError("no surviving concept is consistent with the transcript")
    truths = [f] * len(ledger.xs)
    return StarResult(ledger, opt(matrix, graph, ledger.xs, truths), mode, survivor, certified)


def _certify(ledger: MistakeLedger, graph: Graph, f: np.ndarray, h: np.ndarray) -> bool:
    """Revealed labels match f, every recorded mistake bit is recomputed against f, and h never errs."""
    for r in ledger.rows:
        pred = np.array([int(c) for c in r.prediction], dtype=np.int8)
        if f[r.x] != r.label or graph_mistake(pred, f, graph, r.x) != r.mistake:
            return False
        if graph_mistake(h, f, graph, r.x) != 0:
            return False
    return True


# ---------------------------------------------------------------------------
# Random instances
# ---------------------------------------------------------------------------


def random_concepts(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` distinct random labelings of n nodes."""
    if size > 2**n:
        raise ParameterError(f"only {2**n} distinct labelings exist on {n} nodes")
    seen, rows = set(), []
    while len(rows) < size:
        row = rng.integers(0, 2, size=n).astype(np.int8)
        key = row.tobytes()
        if key not in seen:
            seen.add(key)
            rows.append(row)
    return np.array(rows, dtype=np.int8)


@dataclass(frozen=True)
class OnlineRun:
    run: int
    n: int
    delta_G: int
    n_concepts: int
    mistakes: int
    bound: float
    opt: int
    corrupted: int
    fstar_survives: bool
    progress_ok: bool
    bound_ok: bool


def random_online_run(
    run: int, seed: int, learner: str = "alg3", rounds: int = 500, corrupt: int = 0,
    max_n: int = 50, max_deg: int = 8, max_concepts: int = 64,
) -> tuple[OnlineRun, MistakeLedger]:
    """Random graph, class, target and node sequence; ``corrupt`` rounds get a flipped label."""
    from .rng import stream

    rng = stream(seed, "online", learner, run)
    n = int(rng.integers(5, max_n + 1))
    graph = random_graph(n, int(rng.integers(1, max_deg + 1)), rng)
    size = int(rng.integers(2, min(max_concepts, 2**n) + 1))
    matrix = random_concepts(n, size, rng)
    target = int(rng.integers(size))
    xs = rng.integers(0, n, size=rounds)
    bad = rng.choice(rounds, size=corrupt, replace=False) if corrupt else []
    adv = ScriptedAdversary(xs, matrix[target], bad)
    ledger = play_online(graph, matrix, learner, adv, rounds)
    M, d = ledger.mistakes, graph.max_degree
    o = opt(matrix, graph, ledger.xs, ledger.truths)
    if learner == "alg4":
        bound, ok, prog = alg4_mistake_bound(o, size, d), alg4_bound_holds(M, o, size, d), all(alg4_progress_ok(ledger))
        survives = True
    else:
        bound = alg3_mistake_bound(size, d)
        ok, prog = M <= bound, all(alg3_progress_ok(ledger)) if learner == "alg3" else True
        survives = learner != "alg3" or ledger is not None and _survives(matrix, graph, ledger, target)
    return OnlineRun(run, n, d, size, M, bound, o, len(bad), survives, prog, ok), ledger


def _survives(matrix, graph, ledger, target) -> bool:
    """Replay the risk-averse discards and confirm the target is never removed."""
    ens = WeightedEnsemble.uniform(matrix)
    for r in ledger.rows:
        pred = risk_averse_predict(ens, graph.max_degree)
        ens, _ = algorithm3_step(ens, graph, pred, r.x, r.mistake)
        if ens.weights[target] == 0:
            return False
    return True
