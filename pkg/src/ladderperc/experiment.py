"""Declarative experiment files: parsing, validation and object builders.

An experiment file is a YAML mapping. Top-level keys:

``task``         one of :data:`TASKS`
``seed``         root seed (mandatory, no clock default)
``graph``        ``{segment: [lo, hi]}``, ``{file: path}`` or ``{vertices, edges}``
``orientation``  ``unoriented`` (default) or ``oriented``
``window``       ``{levels: [n_min, n_max]}``, ``{N: n}`` (levels ``[0, n]``) or,
                 for block tasks, ``{blocks: k}``
``classes``      ``{edges: [[u, v], ...], vertices: [...]}`` by vertex label
``region``       block region, ``{center: v, radius: r}`` or ``{vertices: [...]}``;
                 classes are then derived from the region
``params``       ``{p, q, epsilon, q_prime | delta}``; ``q`` is a scalar or one
                 value per class
``query``        ``{kind: crossing}``, ``{kind: survival, origin, level, lateral}``
                 or ``{kind: custom, sources, targets, level}``
``replicas``, ``tolerance``, ``max_replicas``, ``q_grid``
``coupling``     couple-verify options (``level``, ``samples``, ``backend``)
``search``       counterexample options (``stages``, ``random_budget``, ``expect``)
``instances``, ``couplings``  oracle-verify suites
``output``       ``{dir, prefix}``
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

from .errors import ValidationError
from .graph import (BaseGraph, BlockGeometry, EdgeClassMap, GraphError, LadderWindow,
                    build_block_geometry, build_ladder, classify_edges, graph_from_mapping,
                    load_base_graph, region_edges_and_vertices)
from .percolation import ParamSet, ReachQuery

TASKS = ("sample", "estimate", "pc", "sweep", "couple-verify", "counterexample",
         "oracle-verify")
BLOCK_TASKS = ("couple-verify", "counterexample")
TOP_KEYS = {"task", "seed", "graph", "orientation", "window", "classes", "region", "params",
            "query", "replicas", "max_replicas", "tolerance", "q_grid", "coupling", "search",
            "instances", "couplings", "output", "method", "description", "time_budget"}


def _fail(path: str, msg: str):
    raise ValidationError(f"field '{path}': {msg}")


def _mapping(data, path: str) -> dict:
    if data is None:
        return {}
    if not isinstance(data, dict):
        _fail(path, f"expected a mapping, got {type(data).__name__}")
    return data


def _int(data, path: str, *, minimum: int | None = None) -> int:
    if isinstance(data, bool) or not isinstance(data, int):
        _fail(path, f"expected an integer, got {data!r}")
    if minimum is not None and data < minimum:
        _fail(path, f"must be at least {minimum}")
    return data


def _prob(data, path: str, *, open_interval: bool = False) -> float:
    if isinstance(data, bool) or not isinstance(data, (int, float)):
        _fail(path, f"expected a number, got {data!r}")
    x = float(data)
    ok = 0.0 < x < 1.0 if open_interval else 0.0 <= x <= 1.0
    if not ok or math.isnan(x):
        _fail(path, f"{x} outside {'(0, 1)' if open_interval else '[0, 1]'}")
    return x


def _unknown(data: dict, allowed, path: str):
    extra = sorted(set(data) - set(allowed))
    if extra:
        _fail(f"{path}.{extra[0]}" if path else extra[0], "unknown key")


@dataclass(frozen=True)
class ExperimentSpec:
    """A validated experiment file. Builders turn it into graph objects."""

    task: str
    seed: int
    graph: dict = field(default_factory=lambda: {"segment": [0, 0]})
    orientation: str = "unoriented"
    window: dict = field(default_factory=dict)
    classes: dict = field(default_factory=dict)
    region: dict | None = None
    params: dict = field(default_factory=dict)
    query: dict = field(default_factory=lambda: {"kind": "crossing"})
    replicas: int | None = None
    max_replicas: int | None = None
    tolerance: float = 0.01
    q_grid: list | None = None
    coupling: dict = field(default_factory=dict)
    search: dict = field(default_factory=dict)
    instances: list = field(default_factory=list)
    couplings: list = field(default_factory=list)
    output: dict = field(default_factory=dict)
    method: str = "threshold"
    name: str = "experiment"
    base_dir: Path = field(default=Path("."), compare=False)

    # -- loading -------------------------------------------------------------

    @classmethod
    def from_mapping(cls, data, *, name: str = "experiment", base_dir=".",
                     path: str = "") -> "ExperimentSpec":
        data = _mapping(data, path or "<root>")
        _unknown(data, TOP_KEYS, path)
        pre = f"{path}." if path else ""
        if "task" not in data:
            _fail(pre + "task", "missing")
        task = data["task"]
        if task not in TASKS:
            _fail(pre + "task", f"{task!r} is not one of {', '.join(TASKS)}")
        if "seed" not in data:
            _fail(pre + "seed", "missing (a seed is mandatory)")
        seed = _int(data["seed"], pre + "seed", minimum=0)
        orientation = data.get("orientation", "unoriented")
        if orientation not in ("oriented", "unoriented"):
            _fail(pre + "orientation", "must be 'oriented' or 'unoriented'")
        kw: dict[str, Any] = {"task": task, "seed": seed, "orientation": orientation,
                              "name": name, "base_dir": Path(base_dir)}
        for key in ("graph", "window", "classes", "params", "coupling", "search", "output"):
            if key in data:
                kw[key] = _mapping(data[key], pre + key)
        if "region" in data:
            kw["region"] = _mapping(data["region"], pre + "region")
        if "query" in data:
            kw["query"] = _mapping(data["query"], pre + "query")
        for key in ("replicas", "max_replicas"):
            if key in data:
                kw[key] = _int(data[key], pre + key, minimum=1)
        if "tolerance" in data:
            kw["tolerance"] = _prob(data["tolerance"], pre + "tolerance", open_interval=True)
        if "q_grid" in data:
            if not isinstance(data["q_grid"], list) or not data["q_grid"]:
                _fail(pre + "q_grid", "expected a nonempty list")
            kw["q_grid"] = data["q_grid"]
        if "method" in data:
            if data["method"] not in ("threshold", "direct"):
                _fail(pre + "method", "must be 'threshold' or 'direct'")
            kw["method"] = data["method"]
        for key in ("instances", "couplings"):
            if key in data:
                if not isinstance(data[key], list):
                    _fail(pre + key, "expected a list")
                kw[key] = data[key]
        spec = cls(**kw)
        spec.validate(path)
        return spec

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ValidationError(f"cannot read experiment file {p}: {exc}") from exc
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ValidationError(f"experiment file {p} is not valid YAML: {exc}") from exc
        return cls.from_mapping(data, name=p.stem, base_dir=p.parent)

    def with_seed(self, seed: int) -> "ExperimentSpec":
        return replace(self, seed=_int(seed, "seed", minimum=0))

    # -- validation ----------------------------------------------------------

    def validate(self, path: str = ""):
        """Task-specific checks that need no graph construction."""
        pre = f"{path}." if path else ""
        t = self.task
        if t == "oracle-verify":
            if not self.instances and not self.couplings:
                _fail(pre + "instances", "oracle-verify needs instances or couplings")
            return
        if not self.graph:
            _fail(pre + "graph", "missing")
        _unknown(self.params, ("p", "q", "epsilon", "q_prime", "delta"), pre + "params")
        if t in BLOCK_TASKS:
            if self.region is None:
                _fail(pre + "region", f"required for task {t}")
            if self.classes:
                _fail(pre + "classes", "block tasks derive their classes from the region")
        if t in ("sample", "estimate", "couple-verify") and "p" not in self.params:
            _fail(pre + "params.p", f"required for task {t}")
        if "p" in self.params:
            _prob(self.params["p"], pre + "params.p")
        if t == "couple-verify":
            if "epsilon" not in self.params:
                _fail(pre + "params.epsilon", "required for task couple-verify")
            eps = _prob(self.params["epsilon"], pre + "params.epsilon", open_interval=True)
            if "q" not in self.params:
                _fail(pre + "params.q", "required for task couple-verify")
            if ("q_prime" in self.params) == ("delta" in self.params):
                _fail(pre + "params.q_prime", "give exactly one of q_prime and delta")
            if self.params["p"] + eps >= 1.0:
                _fail(pre + "params.epsilon", "p + epsilon must be below 1")
            _unknown(self.coupling, ("level", "samples", "backend", "literal"), pre + "coupling")
            if self.coupling.get("level", "block") not in ("block", "window"):
                _fail(pre + "coupling.level", "must be 'block' or 'window'")
            if self.coupling.get("backend", "sequential") not in ("sequential", "interval"):
                _fail(pre + "coupling.backend", "must be 'sequential' or 'interval'")
            _int(self.coupling.get("samples", 1), pre + "coupling.samples", minimum=1)
        if (t in ("sample", "estimate") and "q" not in self.params and self.classes
                and not (t == "estimate" and self.q_grid)):
            _fail(pre + "params.q", "required when classes are defined (or q_grid for estimate)")
        if t == "sweep" and self.q_grid is None:
            _fail(pre + "q_grid", "required for task sweep")
        if t == "counterexample":
            _unknown(self.search, ("stages", "random_budget", "open_probability",
                                   "exhaustive_limit", "minimize", "expect"), pre + "search")
        _unknown(self.output, ("dir", "prefix"), pre + "output")

    # -- builders ------------------------------------------------------------

    @property
    def oriented(self) -> bool:
        return self.orientation == "oriented"

    def base_graph(self) -> BaseGraph:
        g = self.graph
        try:
            if "file" in g:
                src = Path(g["file"])
                if not src.is_absolute():
                    src = self.base_dir / src
                try:
                    return load_base_graph(src.read_text())
                except OSError as exc:
                    _fail("graph.file", f"cannot read {src}: {exc}")
            _unknown(g, ("segment", "vertices", "edges"), "graph")
            return graph_from_mapping(g)
        except GraphError as exc:
            raise ValidationError(f"field 'graph': {exc}") from exc

    def _labels(self, base: BaseGraph, labels, path: str) -> list[int]:
        if not isinstance(labels, list):
            _fail(path, "expected a list of vertex labels")
        try:
            return [base.vertex(x) for x in labels]
        except GraphError as exc:
            raise ValidationError(f"field '{path}': {exc}") from exc

    def region_vertices(self, base: BaseGraph) -> tuple[int, ...]:
        r = self.region or {}
        _unknown(r, ("center", "radius", "vertices"), "region")
        if "vertices" in r:
            return tuple(self._labels(base, r["vertices"], "region.vertices"))
        if "center" not in r or "radius" not in r:
            _fail("region", "give center and radius, or vertices")
        c = self._labels(base, [r["center"]], "region.center")[0]
        return base.ball(c, _int(r["radius"], "region.radius", minimum=0))

    def _levels(self, height: int | None = None) -> tuple[int, int]:
        w = self.window
        _unknown(w, ("levels", "N", "blocks"), "window")
        if "levels" in w:
            lv = w["levels"]
            if (not isinstance(lv, list) or len(lv) != 2
                    or not all(isinstance(x, int) and not isinstance(x, bool) for x in lv)):
                _fail("window.levels", "expected [n_min, n_max]")
            if lv[1] <= lv[0]:
                _fail("window.levels", "n_max must exceed n_min")
            return lv[0], lv[1]
        if "N" in w:
            return 0, _int(w["N"], "window.N", minimum=1)
        if height is not None:
            return 0, height * _int(w.get("blocks", 1), "window.blocks", minimum=1)
        _fail("window", "give levels or N")

    def build(self) -> tuple[LadderWindow, EdgeClassMap, BlockGeometry | None]:
        """Window, edge classes and (block tasks) the block geometry."""
        base = self.base_graph()
        try:
            if self.task in BLOCK_TASKS:
                reg = self.region_vertices(base)
                edges, verts = region_edges_and_vertices(base, reg)
                if self.oriented:
                    verts = ()
                h = 2 * len(edges) + 2 if self.oriented else 2 * len(verts) + 2
                lo, hi = self._levels(h)
                window = build_ladder(base, self.oriented, lo, hi)
                classes = classify_edges(window, edges, verts)
                block = build_block_geometry(window, classes, region=reg)
                return window, classes, block
            lo, hi = self._levels()
            window = build_ladder(base, self.oriented, lo, hi)
            c = self.classes
            _unknown(c, ("edges", "vertices"), "classes")
            edges = []
            for i, e in enumerate(c.get("edges", [])):
                if not isinstance(e, list) or len(e) != 2:
                    _fail(f"classes.edges[{i}]", "expected [u, v]")
                edges.append(tuple(self._labels(base, e, f"classes.edges[{i}]")))
            verts = self._labels(base, c.get("vertices", []), "classes.vertices")
            classes = classify_edges(window, edges, verts)
            return window, classes, None
        except GraphError as exc:
            raise ValidationError(str(exc)) from exc

    def q_vector(self, value, n: int, path: str) -> tuple[float, ...]:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return (_prob(value, path, open_interval=True),) * n
        if not isinstance(value, list):
            _fail(path, "expected a number or a list of numbers")
        if len(value) != n:
            _fail(path, f"{len(value)} values given, {n} classes defined")
        return tuple(_prob(x, f"{path}[{i}]", open_interval=True) for i, x in enumerate(value))

    def param_set(self, classes: EdgeClassMap) -> ParamSet:
        n = classes.n_classes
        raw = self.params.get("q", self.q_grid[0] if self.q_grid else [])
        q = self.q_vector(raw, n, "params.q") if n else ()
        p = _prob(self.params.get("p", 0.5), "params.p")
        eps = self.params.get("epsilon")
        try:
            return ParamSet(p, q, None if eps is None else float(eps))
        except ValueError as exc:
            raise ValidationError(f"field 'params': {exc}") from exc

    def q_prime(self, q: tuple[float, ...]) -> tuple[float, ...]:
        if "q_prime" in self.params:
            return self.q_vector(self.params["q_prime"], len(q), "params.q_prime")
        d = self.params["delta"]
        if isinstance(d, bool) or not isinstance(d, (int, float)):
            _fail("params.delta", f"expected a number, got {d!r}")
        out = tuple(x + float(d) for x in q)
        for x in out:
            if not 0.0 < x < 1.0:
                _fail("params.delta", f"q + delta = {x} leaves (0, 1)")
        return out

    def q_points(self, n: int) -> list[tuple[float, ...]]:
        if self.q_grid is None:
            return [self.q_vector(self.params.get("q", []), n, "params.q") if n else ()]
        return [self.q_vector(x, n, f"q_grid[{i}]") for i, x in enumerate(self.q_grid)]

    def reach_query(self, window: LadderWindow) -> ReachQuery:
        q = self.query
        kind = q.get("kind", "crossing")
        base = window.base
        try:
            if kind == "crossing":
                _unknown(q, ("kind",), "query")
                return ReachQuery.crossing(window)
            if kind == "survival":
                _unknown(q, ("kind", "origin", "level", "lateral"), "query")
                origin = self._labels(base, q.get("origin", []), "query.origin")
                if not origin:
                    _fail("query.origin", "needs at least one vertex")
                level = q.get("level")
                if level is not None:
                    _int(level, "query.level")
                return ReachQuery.survival(window, origin, level, bool(q.get("lateral", True)))
            if kind == "custom":
                _unknown(q, ("kind", "sources", "targets", "level"), "query")

                def pts(key):
                    out = []
                    for i, x in enumerate(q.get(key, [])):
                        if not isinstance(x, list) or len(x) != 2:
                            _fail(f"query.{key}[{i}]", "expected [vertex label, level]")
                        v = self._labels(base, [x[0]], f"query.{key}[{i}]")[0]
                        n = _int(x[1], f"query.{key}[{i}]")
                        if not window.n_min <= n <= window.n_max:
                            _fail(f"query.{key}[{i}]", f"level {n} outside the window")
                        out.append((v, n))
                    return out

                return ReachQuery(frozenset(pts("sources")), frozenset(pts("targets")),
                                  q.get("level"), label="custom")
        except ValueError as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"field 'query': {exc}") from exc
        _fail("query.kind", f"unknown kind {kind!r}")

    def output_paths(self, out_dir=None) -> tuple[Path, str]:
        d = Path(out_dir) if out_dir is not None else Path(self.output.get("dir",
                                                                           f"results/{self.name}"))
        return d, str(self.output.get("prefix", self.name))
