"""Command-line experiment runner.

    ladderperc run --spec FILE [--seed-override N] [--out DIR]

Exit codes: 0 success, 2 validation, 3 infeasible coupling, 4 hard-assertion
failure, 5 enumeration budget exceeded.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import (HardAssertionError, InfeasibleCouplingError,
                     LadderPercError, ValidationError)
from .experiment import ExperimentSpec
from .percolation import reach_indicator, replica_rng, sample_configuration

log = logging.getLogger("ladderperc")

ESTIMATE_COLUMNS = ("q", "p", "value", "stderr", "replicas", "seed", "window", "query")
PC_COLUMNS = ("q", "pc_hat", "ci_lo", "ci_hi", "bracket_lo", "bracket_hi", "replicas",
              "iterations", "ambiguous_steps", "seed", "window", "query")


class Outputs:
    """Collects the files written by one task."""

    def __init__(self, out_dir: Path, prefix: str):
        self.dir, self.prefix = Path(out_dir), prefix
        self.files: list[str] = []
        self.summary: dict = {}

    def path(self, suffix: str) -> Path:
        return self.dir / f"{self.prefix}{suffix}"

    def csv(self, table, columns, rows, suffix=".csv"):
        from .reporting import write_csv
        self.files.append(str(write_csv(self.path(suffix), table, columns, rows)))

    def json(self, data, suffix=".json"):
        from .reporting import write_json
        self.files.append(str(write_json(self.path(suffix), data)))

    def audit(self, suffix=".audit.jsonl"):
        from .reporting import AuditLog
        log_ = AuditLog(self.path(suffix))
        self.files.append(str(log_.path))
        return log_


def _window_tag(window) -> str:
    return f"{window.base.n_vertices}x[{window.n_min},{window.n_max}]"


# ---------------------------------------------------------------------------
# Tasks. Each returns a JSON-ready summary and writes its tables.
# ---------------------------------------------------------------------------


def task_sample(spec: ExperimentSpec, out: Outputs) -> dict:
    window, classes, _ = spec.build()
    params = spec.param_set(classes)
    query = spec.reach_query(window)
    n = spec.replicas or 1
    rows = []
    for r in range(n):
        c = sample_configuration(window, classes, params, spec.seed, replica=r)
        rows.append((r, c.open_fraction, int(reach_indicator(c, query)), c.to_hex()))
    out.csv("sample", ("replica", "open_fraction", "reach", "configuration_hex"), rows)
    return {"replicas": n, "window": _window_tag(window), "fingerprint": window.fingerprint,
            "reach_fraction": float(np.mean([r[2] for r in rows]))}


def task_estimate(spec: ExperimentSpec, out: Outputs) -> dict:
    from .estimator import DEFAULT_REPLICAS, estimate_reach
    from .percolation import ParamSet

    window, classes, _ = spec.build()
    params = spec.param_set(classes)
    query = spec.reach_query(window)
    rows, ests = [], []
    for q in spec.q_points(classes.n_classes):
        est = estimate_reach(window, classes, ParamSet(params.p, q), query,
                             spec.replicas or DEFAULT_REPLICAS, spec.seed, method=spec.method)
        ests.append(asdict(est))
        rows.append((list(q), est.p, est.value, est.stderr, est.replicas, est.seed,
                     _window_tag(window), est.query))
    out.csv("estimate", ESTIMATE_COLUMNS, rows)
    return {"estimates": ests, "method": spec.method}


def _pc_row(pt, window, query) -> tuple:
    return (list(pt.q), pt.pc_hat, pt.ci[0], pt.ci[1], pt.bracket[0], pt.bracket[1],
            pt.replicas, pt.iterations, pt.ambiguous_steps, pt.seed, _window_tag(window),
            query.describe())


def _eval_rows(pt, window) -> list[tuple]:
    return [(list(e["q"]), e["p"], e["value"], e["stderr"], e["replicas"], e["seed"],
             _window_tag(window), e["query"]) for e in pt.evaluations]


def task_pc(spec: ExperimentSpec, out: Outputs) -> dict:
    from .estimator import DEFAULT_REPLICAS, estimate_pc

    window, classes, _ = spec.build()
    query = spec.reach_query(window)
    pts = [estimate_pc(window, classes, q, query, tolerance=spec.tolerance,
                       replicas=spec.replicas or DEFAULT_REPLICAS,
                       max_replicas=spec.max_replicas, seed=spec.seed)
           for q in spec.q_points(classes.n_classes)]
    out.csv("pc", PC_COLUMNS, [_pc_row(p, window, query) for p in pts])
    out.csv("estimate", ESTIMATE_COLUMNS, [r for p in pts for r in _eval_rows(p, window)],
            suffix=".evaluations.csv")
    return {"points": [p.as_dict() for p in pts]}


def task_sweep(spec: ExperimentSpec, out: Outputs) -> dict:
    from .estimator import DEFAULT_REPLICAS, sweep_q

    window, classes, _ = spec.build()
    query = spec.reach_query(window)
    res = sweep_q(window, classes, spec.q_points(classes.n_classes), query, seed=spec.seed,
                  tolerance=spec.tolerance, replicas=spec.replicas or DEFAULT_REPLICAS,
                  max_replicas=spec.max_replicas)
    out.csv("sweep", PC_COLUMNS, [_pc_row(p, window, query) for p in res.points])
    out.csv("series", ("x", "y"), [(p.q[0] if p.q else "", p.pc_hat) for p in res.points],
            suffix=".series.csv")
    return {**res.as_dict(), "jump_within_tolerance": res.max_jump <= 3 * spec.tolerance}


def task_couple_verify(spec: ExperimentSpec, out: Outputs) -> dict:
    from .coupling.blocks import BlockCoupler, WindowCoupler

    window, classes, block = spec.build()
    params = spec.param_set(classes)
    q = params.q
    qp = spec.q_prime(q)
    opts = spec.coupling
    level = opts.get("level", "block")
    kwargs = {"backend": opts.get("backend", "sequential")}
    if "literal" in opts:
        kwargs["literal"] = bool(opts["literal"])
    n = opts.get("samples", 1)
    summary = {"level": level, "samples": n, "q": list(q), "q_prime": list(qp),
               "p": params.p, "epsilon": params.epsilon, "region": list(block.region),
               "block_height": block.height, "oriented": block.oriented}
    try:
        if level == "window":
            coupler = WindowCoupler(block, q, qp, params.p, params.epsilon, **kwargs)
            query = spec.reach_query(window)
            coupler.check_query(query)
        else:
            coupler = BlockCoupler(block, q, qp, params.p, params.epsilon, **kwargs)
            query = None
    except InfeasibleCouplingError as exc:
        summary.update({"status": "infeasible", "feasibility": exc.report})
        out.summary.update(summary)
        raise
    summary["feasibility"] = coupler.report
    cases: dict[str, int] = {}
    failures = []
    with out.audit() as audit:
        for i in range(n):
            rng = replica_rng(spec.seed, i)
            s = coupler.sample(rng, query) if level == "window" else coupler.sample(rng)
            rec = s.record(i)
            audit.write(rec)
            tags = rec["cases"].values() if level == "window" else [rec["case"]]
            for t in tags:
                cases[t] = cases.get(t, 0) + 1
            if not rec["containment"] or rec.get("implication", True) is False:
                failures.append(rec)
    total = sum(cases.values())
    out.csv("couple_verify", ("case", "count", "fraction"),
            [(k, v, v / total) for k, v in sorted(cases.items())])
    summary.update({"cases": cases, "failures": failures[:20], "n_failures": len(failures),
                    "status": "ok" if not failures else "violation"})
    out.summary.update(summary)
    if failures:
        raise HardAssertionError(f"{len(failures)} of {n} coupled samples violate containment "
                                 f"or reach implication", failures[0])
    return summary


def task_counterexample(spec: ExperimentSpec, out: Outputs) -> dict:
    from .coupling.search import search_counterexample

    _, _, block = spec.build()
    s = spec.search
    stages = tuple(s.get("stages", ("extremal", "random", "exhaustive")))
    rep = search_counterexample(block, stages=stages,
                                random_budget=int(s.get("random_budget", 2000)),
                                open_probability=float(s.get("open_probability", 0.5)),
                                exhaustive_limit=int(s.get("exhaustive_limit", 20)),
                                seed=spec.seed, minimize=bool(s.get("minimize", True)))
    summary = rep.summary(block)
    rows = []
    for d, w in summary["witnesses"].items():
        if w is None:
            rows.append((d, 0, "", "", "", "", rep.n_local_edges))
        else:
            v, n = w["source"]
            rows.append((d, 1, w["stage"], f"{block.window.base.label(v)}@{n}", w["subset_mask"],
                         w["configuration_hex"], w["n_local_edges"]))
    out.csv("counterexample", ("direction", "found", "stage", "source", "subset_mask",
                               "configuration_hex", "n_local_edges"), rows)
    expect = s.get("expect", {})
    mismatch = {d: bool(v) for d, v in expect.items() if bool(v) != rep.found(d)}
    summary["expectation_mismatch"] = mismatch
    out.summary.update(summary)
    if mismatch:
        raise HardAssertionError(f"search outcome differs from expectation: {mismatch}",
                                 mismatch)
    return summary


def _oracle_instance(spec: ExperimentSpec, i: int, inst) -> tuple[str, ExperimentSpec]:
    if not isinstance(inst, dict):
        raise ValidationError(f"field 'instances[{i}]': expected a mapping")
    inst = dict(inst)
    name = str(inst.pop("name", f"instance{i}"))
    inst.setdefault("seed", spec.seed)
    inst.setdefault("replicas", spec.replicas or 100_000)
    inst["task"] = "estimate"
    return name, ExperimentSpec.from_mapping(inst, base_dir=spec.base_dir,
                                             path=f"instances[{i}]")


def _finite_pair(i: int, c: dict):
    from .coupling.measures import FiniteMeasure, FinitePair

    path = f"couplings[{i}]"
    try:
        m1 = np.asarray(c["mu1"], float)
        m2 = np.asarray(c["mu2"], float)
        anchors = [int(a) for a in c["anchors"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"field '{path}': needs mu1, mu2 and anchors ({exc})") from exc
    part = c.get("first_part")
    if part is not None:
        part = np.isin(np.arange(m1.size), part)
    return FinitePair(FiniteMeasure(m1), FiniteMeasure(m2), anchors, part)


def task_oracle_verify(spec: ExperimentSpec, out: Outputs) -> dict:
    from .estimator import estimate_reach
    from .oracle import EnumerationBudget, exact_coupling_audit, exact_reach_probability

    rows, failures = [], []
    for i, inst in enumerate(spec.instances):
        name, sub = _oracle_instance(spec, i, inst)
        window, classes, _ = sub.build()
        params = sub.param_set(classes)
        query = sub.reach_query(window)
        exact = exact_reach_probability(window, classes, params, query)
        est = estimate_reach(window, classes, params, query, sub.replicas, sub.seed)
        se = max(est.stderr, 1.0 / sub.replicas)
        z = (est.value - exact["probability"]) / se
        ok = abs(z) <= 4.0 and abs(exact["total_mass"] - 1.0) <= 1e-10
        rows.append((name, window.n_edges, exact["probability"], est.value, est.stderr,
                     est.replicas, z, int(ok)))
        if not ok:
            failures.append(name)
    out.csv("oracle_reach", ("instance", "n_edges", "exact", "estimate", "stderr",
                             "replicas", "z", "ok"), rows)
    crow = []
    for i, c in enumerate(spec.couplings):
        if not isinstance(c, dict):
            raise ValidationError(f"field 'couplings[{i}]': expected a mapping")
        name = str(c.get("name", f"coupling{i}"))
        pair = _finite_pair(i, c)
        for backend in c.get("backends", ["interval", "sequential"]):
            a = exact_coupling_audit(pair, backend, EnumerationBudget())
            ok = (a["tv_first"] <= 1e-12 and a["tv_second"] <= 1e-12
                  and not a["violating_atoms"] and not a.get("second_anchor_violations"))
            cond = a.get("second_anchor_conditional", "")
            crow.append((name, backend, a["tv_first"], a["tv_second"], a["p_x_equals_y"],
                         len(a["violating_atoms"]), cond, int(ok)))
            if not ok:
                failures.append(f"{name}/{backend}")
    if crow:
        out.csv("oracle_coupling", ("instance", "backend", "tv_first", "tv_second",
                                    "p_x_equals_y", "violating_atoms",
                                    "second_anchor_conditional", "ok"),
                crow, suffix=".couplings.csv")
    summary = {"reach_instances": len(rows), "coupling_audits": len(crow),
               "failures": failures, "status": "ok" if not failures else "mismatch"}
    out.summary.update(summary)
    if failures:
        raise HardAssertionError(f"oracle disagreement on {failures}", {"failures": failures})
    return summary


TASK_RUNNERS = {"sample": task_sample, "estimate": task_estimate, "pc": task_pc,
                "sweep": task_sweep, "couple-verify": task_couple_verify,
                "counterexample": task_counterexample, "oracle-verify": task_oracle_verify}


def run(spec: ExperimentSpec, out_dir=None) -> tuple[int, dict]:
    """Run one experiment. Returns (exit status, summary)."""
    d, prefix = spec.output_paths(out_dir)
    out = Outputs(d, prefix)
    t0 = time.perf_counter()
    try:
        out.summary.update(TASK_RUNNERS[spec.task](spec, out))
        status = 0
    except LadderPercError as exc:
        status = exc.exit_code
        out.summary.update({"error": type(exc).__name__, "message": str(exc)})
        if isinstance(exc, InfeasibleCouplingError):
            out.summary.update({"status": "infeasible", "feasibility": exc.report})
        if isinstance(exc, HardAssertionError):
            out.summary["record"] = exc.record
    summary = {"task": spec.task, "seed": spec.seed, "exit_status": status,
               "elapsed_seconds": round(time.perf_counter() - t0, 3), **out.summary}
    out.json(summary)
    summary["files"] = out.files
    return status, summary


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ladderperc",
                                     description="Percolation on ladder graphs: experiments "
                                                 "from declarative YAML files.")
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment file")
    r.add_argument("--spec", required=True, help="experiment YAML file")
    r.add_argument("--seed-override", type=int, default=None, help="replace the file's seed")
    r.add_argument("--out", default=None, help="output directory")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        spec = ExperimentSpec.load(args.spec)
        if args.seed_override is not None:
            spec = spec.with_seed(args.seed_override)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return ValidationError.exit_code
    try:
        status, summary = run(spec, args.out)
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return 1
    if status:
        print(f"{spec.task} failed ({summary.get('error')}): {summary.get('message')}",
              file=sys.stderr)
    else:
        log.info("%s done in %.1f s; wrote %s", spec.task, summary["elapsed_seconds"],
                 ", ".join(summary["files"]))
    return status


if __name__ == "__main__":
    sys.exit(main())
