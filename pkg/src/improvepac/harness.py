"""Experiment configuration, dispatch, reports and the command-line interface."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__, acceptance, ballworld, classprops, noisy, online, proper
from .errors import ConfigError, FixtureError, ImprovePacError, InvariantError
from .io import load_class, load_delta, load_distribution, load_fixture, load_graph, load_json
from .rng import stream

# verb -> {parameter: default}; None marks "derived when omitted"
SCHEMAS: dict[str, dict] = {
    "proper-pac": {"class": "leave_one_out", "fstar": 0, "delta": None, "dist": "random", "eps": 0.1, "confidence": 0.1, "m": None},
    "memorize-pac": {"N": 20, "beta": 0.05, "gamma": 0.1, "pos_frac": 0.5, "m": None},
    "covering": {"N": 10, "gamma": 0.1, "m": None},
    "spread-lb": {"beta": 0.05, "r": 0.1, "m": 29, "learner": "memorize"},
    "union-demo": {"r": 0.5, "m": 50, "grid_size": 101},
    "noisy-bayes": {"channel": "rcn", "nu": 0.2, "r": 0.2, "m": 20_000, "theta_hat": None, "test_grid": 720, "erm_grid": 720},
    "online-realizable": {"graph": None, "class": None, "fixture": "star_majority", "learner": "alg3", "rounds": 50, "target": None, "sequence": "fixture"},
    "online-agnostic": {"graph": None, "class": None, "fixture": None, "learner": "alg4", "rounds": 500, "target": None, "corrupt": 20, "sequence": "random"},
    "online-lb": {"delta": 5, "mode": "agnostic", "learner": "alg4", "rounds": None, "variant": None},
}

METRIC = {
    "proper-pac": "loss",
    "memorize-pac": "loss",
    "covering": "hit",
    "spread-lb": "loss",
    "union-demo": "loss",
    "noisy-bayes": "excess",
    "online-realizable": "mistake",
    "online-agnostic": "mistake",
    "online-lb": "mistake",
}


@dataclass
class ExperimentConfig:
    verb: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    trials: int = 1
    out: str | None = None
    name: str = ""

    def __post_init__(self):
        if self.verb not in SCHEMAS:
            raise ConfigError(f"unknown verb {self.verb!r}; choose from {sorted(SCHEMAS)}")
        unknown = sorted(set(self.params) - set(SCHEMAS[self.verb]))
        if unknown:
            raise ConfigError(f"unknown parameter(s) for {self.verb}: {', '.join(unknown)}")
        if self.trials < 0:
            raise ConfigError("trials must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        self.name = self.name or self.verb

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        allowed = {"verb", "params", "seed", "trials", "out", "name"}
        unknown = sorted(set(doc) - allowed)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        if "verb" not in doc:
            raise ConfigError("config needs a 'verb'")
        return cls(**doc)

    def resolved(self) -> dict:
        params = dict(SCHEMAS[self.verb])
        params.update(self.params)
        return {"name": self.name, "verb": self.verb, "params": params, "seed": self.seed, "trials": self.trials, "out": self.out}


@dataclass
class RunReport:
    config: dict
    columns: list
    rows: list
    summary: dict
    wall_clock: float
    version: str = __version__

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in self.columns])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {"config": self.config, "summary": self.summary, "wall_clock": self.wall_clock, "version": self.version},
            indent=2,
            sort_keys=True,
        )

    def write(self, out: str | Path, fmt: str = "csv"):
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            doc = json.loads(self.to_json())
            doc["rows"] = [{c: r[c] for c in self.columns} for r in self.rows]
            out.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable))
        else:
            out.write_text(self.to_csv())
            out.with_suffix(".summary.json").write_text(self.to_json())


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(type(v))


def summarize(values) -> dict:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {"count": 0, "mean": None, "stderr": None, "min": None, "max": None}
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return {"count": int(v.size), "mean": float(v.mean()), "stderr": se, "min": float(v.min()), "max": float(v.max())}


# ---------------------------------------------------------------------------
# Trial runners (module-level so they can be shipped to worker processes)
# ---------------------------------------------------------------------------


def _chunks(trials: int, jobs: int) -> list[tuple[int, int]]:
    jobs = max(1, min(jobs, trials))
    size = math.ceil(trials / jobs) if trials else 0
    return [(s, min(size, trials - s)) for s in range(0, trials, size)] if trials else []


def _parallel(fn: Callable, kwargs: dict, trials: int, jobs: int) -> list:
    if jobs <= 1 or trials <= 1:
        return fn(**kwargs, trials=trials, start=0)
    parts = _chunks(trials, jobs)
    with ProcessPoolExecutor(max_workers=len(parts)) as pool:
        futures = [pool.submit(fn, **kwargs, trials=n, start=s) for s, n in parts]
        rows = [r for f in futures for r in f.result()]
    return sorted(rows, key=lambda r: r.trial)


def _resolve_class(ref):
    doc = load_fixture(ref) if not str(ref).endswith(".json") else load_json(ref)
    return load_class(doc), doc


def _improvement_map(ref, doc, n, rng):
    """Improvement map from a keyword, a JSON file, or the class file's own ``delta`` entry."""
    if ref is None:
        dmap = load_delta(doc, n)
        return dmap if dmap is not None else proper.random_explicit_map(n, rng)
    if ref == "identity":
        return proper.Explicit.identity(n)
    if ref == "everything":
        return proper.Explicit.everything(n)
    if ref == "random":
        return proper.random_explicit_map(n, rng)
    dmap = load_delta(load_json(ref), n)
    if dmap is None or dmap.n != n:
        raise FixtureError(f"{ref}: needs a 'delta' entry over {n} instances")
    return dmap


def _distribution(ref, n, rng, seed):
    if ref == "random":
        return proper.random_weights(n, rng, seed)
    if ref == "uniform":
        return proper.FiniteWeighted.uniform(n, seed)
    dist = load_distribution(ref, seed)
    if len(dist.weights) != n:
        raise FixtureError(f"{ref}: needs {n} weights")
    return dist


def _run_proper(p, cfg, jobs):
    cls, doc = _resolve_class(p["class"])
    rng = stream(cfg.seed, "proper-instance")
    if not 0 <= int(p["fstar"]) < len(cls):
        raise ConfigError(f"fstar must index one of the {len(cls)} concepts")
    fstar = cls[int(p["fstar"])]
    dmap = _improvement_map(p["delta"], doc, cls.n, rng)
    dist = _distribution(p["dist"], cls.n, rng, cfg.seed)
    if not classprops.is_nearly_minimally_consistent(cls).holds:
        raise InvariantError("class is not nearly minimally consistent; the proper learner is undefined on some samples")
    m = p["m"] or proper.sample_size(p["eps"], p["confidence"], classprops.vc_dimension(cls))
    rows = _parallel(proper.pac_experiment, dict(cls=cls, fstar=fstar, delta=dmap, dist=dist, m=m, seed=cfg.seed), cfg.trials, jobs)
    return ["trial", "m", "loss", "branch", "seed"], rows


def _run_memorize(p, cfg, jobs):
    N = p["N"]
    m = p["m"] or ballworld.memorization_sample_size(p["beta"], N, p["gamma"], p["pos_frac"])
    rows = _parallel(ballworld.memorize_pac, dict(N=N, r=1.0 / N, m=m, seed=cfg.seed, pos_frac=p["pos_frac"]), cfg.trials, jobs)
    if not all(r.negatives_ok for r in rows):
        raise InvariantError("memorization incurred loss on a ground-truth negative point")
    return ["trial", "m", "loss", "seed"], rows


def _run_covering(p, cfg, jobs):
    N = p["N"]
    m = ballworld.covering_sample_size(1.0 / N, N, p["gamma"]) if p["m"] is None else p["m"]
    dist, cover = ballworld.unit_cells(N)
    rows = _parallel(ballworld.covering_experiment, dict(dist=dist, cover=cover, m=m, seed=cfg.seed), cfg.trials, jobs)
    return ["trial", "m", "hit", "seed"], rows


def _run_spread(p, cfg, jobs):
    rows = _parallel(
        ballworld.spread_points_lower_bound,
        dict(beta=p["beta"], r=p["r"], m=p["m"], learner=p["learner"], seed=cfg.seed),
        cfg.trials,
        jobs,
    )
    return ["trial", "m", "loss", "seed"], rows


def _run_union(p, cfg, jobs):
    rows = _parallel(
        ballworld.union_interval_demo, dict(r=p["r"], m=p["m"], seed=cfg.seed, grid_size=p["grid_size"]), cfg.trials, jobs
    )
    bad = [r for r in rows if r.b != r.b_hat and r.loss < 0.25]
    if bad:
        raise InvariantError(f"proper hypothesis with loss below 1/4 in trial {bad[0].trial}")
    return ["trial", "m", "loss", "seed"], rows


def _run_noisy(p, cfg, jobs):
    kwargs = dict(
        channel=p["channel"], nu=p["nu"], r=p["r"], m=p["m"], seed=cfg.seed,
        test_grid=p["test_grid"], erm_grid=p["erm_grid"], theta_hat=p["theta_hat"],
    )
    rows = _parallel(noisy.bayes_optimal_experiment, kwargs, cfg.trials, jobs)
    if any(r.within_budget and r.conservative_violations for r in rows):
        raise InvariantError("agreement classifier labeled a Bayes-negative point positive")
    return ["trial", "m", "angle", "within_budget", "excess", "conservative_violations", "seed"], rows


@dataclass(frozen=True)
class _LedgerOut:
    game: int
    t: int
    x: int
    mistake: int
    survivors_or_weight: float
    action: str

    @property
    def trial(self):
        return self.game


def _online_instance(p, cfg, game):
    if p.get("graph") and p.get("class"):
        graph = load_graph(p["graph"])
        cls_doc = load_json(p["class"])
        matrix = np.array(cls_doc["concepts"], dtype=np.int8)
        fixture = {}
    elif p.get("fixture"):
        fixture = load_fixture(p["fixture"])
        graph = load_graph(fixture)
        matrix = np.array(fixture["concepts"], dtype=np.int8)
    else:
        return None
    rng = stream(cfg.seed, "online-game", game)
    target = p["target"] if p["target"] is not None else fixture.get("target", int(rng.integers(len(matrix))))
    if p["sequence"] == "fixture" and "sequence" in fixture:
        xs = [fixture["sequence"]["repeat"]] * p["rounds"]
    else:
        xs = rng.integers(0, graph.n, size=p["rounds"]).tolist()
    return graph, matrix, int(target), xs, rng


def _ledger_rows(game, ledger):
    return [_LedgerOut(game, r.t, r.x, r.mistake, r.after, r.action) for r in ledger.rows]


def _check_online(ledger, learner, matrix, graph, opt_value):
    if learner == "alg3" and not all(online.alg3_progress_ok(ledger)):
        raise InvariantError("per-mistake discard progress failed")
    if learner == "alg4":
        if not all(online.alg4_progress_ok(ledger)):
            raise InvariantError("per-mistake weight shrinkage failed")
        if not online.alg4_bound_holds(ledger.mistakes, opt_value, len(matrix), graph.max_degree):
            raise InvariantError("weight inequality 2^-OPT <= |H|(1-1/(2(D+1)))^M failed")


def _run_online(p, cfg, jobs, realizable: bool):
    rows, summary_extra = [], {"games": []}
    for game in range(cfg.trials):
        inst = _online_instance(p, cfg, game)
        if inst is None:
            run, ledger = online.random_online_run(game, cfg.seed, p["learner"], p["rounds"], 0 if realizable else p["corrupt"])
            summary_extra["games"].append(dataclasses.asdict(run))
            if not (run.bound_ok and run.progress_ok and run.fstar_survives):
                raise InvariantError(f"mistake bound or progress check failed in game {game}")
        else:
            graph, matrix, target, xs, rng = inst
            corrupt = [] if realizable else rng.choice(p["rounds"], size=min(p["corrupt"], p["rounds"]), replace=False).tolist()
            adv = online.ScriptedAdversary(xs, matrix[target], corrupt)
            ledger = online.play_online(graph, matrix, p["learner"], adv, p["rounds"])
            o = online.opt(matrix, graph, ledger.xs, ledger.truths)
            _check_online(ledger, p["learner"], matrix, graph, o)
            summary_extra["games"].append({"game": game, "mistakes": ledger.mistakes, "opt": o, "delta_G": graph.max_degree})
        rows.extend(_ledger_rows(game, ledger))
    return ["game", "t", "x", "mistake", "survivors_or_weight", "action"], rows, summary_extra


def _run_online_lb(p, cfg, jobs):
    rows, games = [], []
    for game in range(cfg.trials):
        res = online.star_adversary(p["delta"], p["mode"], p["learner"], p["rounds"], p["variant"])
        M = res.ledger.mistakes
        ok = M >= p["delta"] * res.opt if p["mode"] == "agnostic" else (M >= p["delta"] - 1 and res.certified)
        if not ok:
            raise InvariantError("star adversary lower bound failed")
        games.append({"game": game, "mistakes": M, "opt": res.opt, "survivor": res.survivor})
        rows.extend(_ledger_rows(game, res.ledger))
    return ["game", "t", "x", "mistake", "survivors_or_weight", "action"], rows, {"games": games}


def run(config: ExperimentConfig, jobs: int = 1, fmt: str = "csv") -> RunReport:
    """Dispatch a configured experiment and build its report; writes outputs if ``config.out`` is set."""
    t0 = time.perf_counter()
    p = config.resolved()["params"]
    extra = {}
    verb = config.verb
    if verb == "proper-pac":
        cols, rows = _run_proper(p, config, jobs)
    elif verb == "memorize-pac":
        cols, rows = _run_memorize(p, config, jobs)
    elif verb == "covering":
        cols, rows = _run_covering(p, config, jobs)
    elif verb == "spread-lb":
        cols, rows = _run_spread(p, config, jobs)
    elif verb == "union-demo":
        cols, rows = _run_union(p, config, jobs)
    elif verb == "noisy-bayes":
        cols, rows = _run_noisy(p, config, jobs)
    elif verb == "online-realizable":
        cols, rows, extra = _run_online(p, config, jobs, realizable=True)
    elif verb == "online-agnostic":
        cols, rows, extra = _run_online(p, config, jobs, realizable=False)
    else:
        cols, rows, extra = _run_online_lb(p, config, jobs)
    dict_rows = [dataclasses.asdict(r) for r in rows]
    metric = METRIC[verb]
    summary = {metric: summarize([r[metric] for r in dict_rows]), **extra}
    if verb.startswith("online"):
        summary["mistakes"] = int(sum(r["mistake"] for r in dict_rows))
    report = RunReport(config.resolved(), cols, dict_rows, summary, round(time.perf_counter() - t0, 3))
    if config.out:
        report.write(config.out, fmt)
    return report


def suite(name: str, out: str | None = None) -> tuple[bool, list]:
    results = acceptance.run_bundle(name)
    if out:
        Path(out).write_text(json.dumps([r.to_dict() for r in results], indent=2))
    return all(r.passed for r in results), results


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INVARIANT = 0, 1, 2, 3


def _add_globals(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output file (CSV rows plus a .summary.json, or JSON)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--trials", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="improvepac", description="Learning-with-improvements experiments")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("proper-pac", help="least-consistent proper learner on a finite class")
    s.add_argument("--class", dest="class_", default="leave_one_out", help="fixture name or class JSON file")
    s.add_argument("--fstar", type=int, default=0, help="index of the target concept")
    s.add_argument("--delta", default=None, help="identity, everything, random, or a JSON file with a 'delta' entry")
    s.add_argument("--dist", default="random", help="random, uniform, or a JSON file with 'weights'")
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--confidence", type=float, default=0.1, help="failure probability used to size m")
    s.add_argument("--m", type=int, default=None)
    _add_globals(s)

    s = sub.add_parser("memorize-pac", help="memorization on a coverable 1-D mixture")
    s.add_argument("--N", type=int, default=20)
    s.add_argument("--beta", type=float, default=0.05)
    s.add_argument("--gamma", type=float, default=0.1)
    s.add_argument("--pos-frac", type=float, default=0.5)
    s.add_argument("--m", type=int, default=None)
    _add_globals(s)

    s = sub.add_parser("covering", help="all-balls-hit frequency for equal-mass cells")
    s.add_argument("--N", type=int, default=10)
    s.add_argument("--gamma", type=float, default=0.1)
    s.add_argument("--m", type=int, default=None)
    _add_globals(s)

    s = sub.add_parser("spread-lb", help="adversarial loss on spread points")
    s.add_argument("--beta", type=float, default=0.05)
    s.add_argument("--r", type=float, default=0.1)
    s.add_argument("--m", type=int, default=29)
    s.add_argument("--learner", choices=sorted(ballworld.LEARNERS), default="memorize")
    _add_globals(s)

    s = sub.add_parser("union-demo", help="grid-ERM proper learner on the union-of-intervals class")
    s.add_argument("--r", type=float, default=0.5)
    s.add_argument("--m", type=int, default=50)
    s.add_argument("--grid-size", type=int, default=101)
    _add_globals(s)

    s = sub.add_parser("noisy-bayes", help="agreement classifier under label noise on the circle")
    s.add_argument("--channel", choices=("rcn", "massart"), default="rcn")
    s.add_argument("--nu", type=float, default=0.2)
    s.add_argument("--r", type=float, default=0.2)
    s.add_argument("--m", type=int, default=20_000)
    s.add_argument("--theta-hat", type=float, default=None)
    _add_globals(s)

    for verb, learner, rounds in (("online-realizable", "alg3", 50), ("online-agnostic", "alg4", 500)):
        s = sub.add_parser(verb, help="online game on a graph")
        s.add_argument("--graph", default=None, help="graph JSON file")
        s.add_argument("--class", dest="class_", default=None, help="class JSON file")
        s.add_argument("--fixture", default="star_majority" if verb == "online-realizable" else None)
        s.add_argument("--learner", choices=online.LEARNERS, default=learner)
        s.add_argument("--rounds", type=int, default=rounds)
        s.add_argument("--target", type=int, default=None)
        if verb == "online-agnostic":
            s.add_argument("--corrupt", type=int, default=20)
        _add_globals(s)

    s = sub.add_parser("online-lb", help="adaptive star adversary")
    s.add_argument("--delta", type=int, default=5)
    s.add_argument("--mode", choices=("agnostic", "realizable"), default="agnostic")
    s.add_argument("--learner", choices=online.LEARNERS, default="alg4")
    s.add_argument("--rounds", type=int, default=None)
    s.add_argument("--variant", choices=online.STAR_VARIANTS, default=None)
    _add_globals(s)

    s = sub.add_parser("run", help="run an experiment from a JSON config")
    s.add_argument("config")
    _add_globals(s)

    s = sub.add_parser("suite", help="run an acceptance bundle")
    s.add_argument("name", choices=sorted(acceptance.BUNDLES))
    _add_globals(s)
    return parser


_FLAG_TO_PARAM = {"class_": "class", "pos_frac": "pos_frac", "grid_size": "grid_size", "theta_hat": "theta_hat"}
_GLOBALS = {"verb", "seed", "out", "format", "jobs", "trials", "config", "name"}
_DEFAULT_TRIALS = {"online-realizable": 1, "online-agnostic": 1, "online-lb": 1, "union-demo": 101, "covering": 1000}


def _config_from_args(args) -> ExperimentConfig:
    params = {_FLAG_TO_PARAM.get(k, k): v for k, v in vars(args).items() if k not in _GLOBALS}
    trials = args.trials if args.trials is not None else _DEFAULT_TRIALS.get(args.verb, 100)
    if args.verb == "online-realizable":
        params["sequence"] = "fixture" if params.get("fixture") else "random"
    return ExperimentConfig(args.verb, params, args.seed, trials, args.out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "suite":
            ok, results = suite(args.name, args.out)
            for r in results:
                print(r.line())
            return EXIT_OK if ok else EXIT_FAIL
        if args.verb == "run":
            doc = load_json(args.config)
            cfg = ExperimentConfig.from_dict(doc)
            if args.out:
                cfg.out = args.out
        else:
            cfg = _config_from_args(args)
        report = run(cfg, jobs=args.jobs, fmt=args.format)
        if not cfg.out:
            sys.stdout.write(report.to_csv() if args.format == "csv" else report.to_json() + "\n")
        else:
            print(json.dumps(report.summary, indent=2, default=_jsonable))
        return EXIT_OK
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FixtureError as exc:
        print(f"fixture error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantError as exc:
        print(f"invariant failed: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ImprovePacError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    raise SystemExit(main())
