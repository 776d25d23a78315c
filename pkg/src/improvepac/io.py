"""JSON loaders for concept classes, improvement maps, graphs and distributions, plus fixture lookup.

Class files use ``{"n": int, "concepts": [[0/1, ...], ...], "delta": ...}``
where ``delta`` is optional and is either ``"identity"``, ``"everything"``,
or a mapping from instance (as a string key) to a list of instances. Graph
files use ``{"n": int, "edges": [[u, v], ...]}``. Distribution files use
``{"weights": [...]}``.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .classprops import ConceptClass
from .core import Explicit, FiniteWeighted
from .errors import DomainError, FixtureError
from .online import Graph

FIXTURE_ENV = "IMPROVEPAC_FIXTURES"


def fixture_dir() -> Path:
    override = os.environ.get(FIXTURE_ENV)
    return Path(override) if override else Path(__file__).with_name("fixtures")


def load_json(source) -> dict:
    if isinstance(source, dict):
        return source
    path = Path(source)
    try:
        return json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise FixtureError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise FixtureError(f"{path}: invalid JSON ({exc})") from exc


def load_fixture(name: str) -> dict:
    path = fixture_dir() / (name if name.endswith(".json") else name + ".json")
    if not path.exists():
        raise FixtureError(f"fixture {name!r} not found in {path.parent}")
    return load_json(path)


def _require(doc: dict, *keys):
    missing = [k for k in keys if k not in doc]
    if missing:
        raise FixtureError(f"missing keys: {missing}")


def load_class(source) -> ConceptClass:
    doc = load_json(source)
    _require(doc, "n", "concepts")
    n = int(doc["n"])
    rows = doc["concepts"]
    if any(len(r) != n for r in rows):
        raise FixtureError(f"every concept must have {n} labels")
    try:
        return ConceptClass.from_bits(rows)
    except DomainError as exc:
        raise FixtureError(str(exc)) from exc


def load_delta(source, n: int | None = None) -> Explicit | None:
    doc = load_json(source)
    n = int(doc.get("n", n))
    spec = doc.get("delta")
    if spec is None:
        return None
    if spec == "identity":
        return Explicit.identity(n)
    if spec == "everything":
        return Explicit.everything(n)
    if isinstance(spec, dict):
        return Explicit.from_dict(n, spec)
    if isinstance(spec, list):
        return Explicit(n, tuple(frozenset(s) for s in spec))
    raise FixtureError(f"unrecognized delta specification {spec!r}")


def dump_class(cls: ConceptClass, delta: Explicit | None = None) -> dict:
    doc = {"n": cls.n, "concepts": [list(c.bits) for c in cls]}
    if delta is not None:
        doc["delta"] = {str(i): sorted(s) for i, s in enumerate(delta.sets)}
    return doc


def load_graph(source) -> Graph:
    doc = load_json(source)
    _require(doc, "n", "edges")
    try:
        return Graph.from_edges(int(doc["n"]), [tuple(e) for e in doc["edges"]])
    except DomainError as exc:
        raise FixtureError(str(exc)) from exc


def dump_graph(g: Graph) -> dict:
    return {"n": g.n, "edges": [list(e) for e in sorted(g.edges)]}


def load_distribution(source, seed: int = 0) -> FiniteWeighted:
    doc = load_json(source)
    _require(doc, "weights")
    return FiniteWeighted(tuple(doc["weights"]), seed)
