"""``htype`` command line: structure checks, constants, Landis margins, barrier and Harnack runs.

Every command writes one JSON document (stdout or ``--output``) and a short
human summary on stderr.  Exit codes: 0 pass, 1 fail, 2 config error,
3 precondition error, 4 inconclusive.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .barrier import ball_minus_ball, ball_region, ball_test_points, verify_barrier_lemma
from .config import ConfigError, RunConfig, check_field_dimension, parse_override
from .exceptions import (
    DomainError,
    NumericalConsistencyError,
    PreconditionError,
    SingularityError,
    SolverError,
    StructureError,
)
from .gauge import (
    estimate_K,
    euclidean_gradient_d,
    gauge_constants,
    gauge_norm,
    horizontal_gradient_d,
    horizontal_hessian_d,
    mean_value_beta,
    phi,
    psi0,
)
from .group import validate_htype
from .harnack_lab import CSV_COLUMNS, BoundaryData, boundary_preset, critical_density_sweep, run_case
from .operator import apply_LA_closed_form_d, delta_from_ratio, landis_delta_field, landis_sample_points

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_PRECONDITION, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4
_VERDICT_CODES = {"pass": EXIT_PASS, "fail": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}


def _clean(obj):
    """JSON-safe copy: numpy to builtins, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _vector(value, N: int, where: str):
    if value is None:
        return np.zeros(N)
    if isinstance(value, str):
        value = yaml.safe_load(value if value.lstrip().startswith("[") else f"[{value}]")
    try:
        v = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"not a numeric vector: {value!r}", where) from exc
    if v.shape != (N,):
        raise ConfigError(f"expected {N} coordinates, got shape {v.shape}", where)
    return v


# ---------------------------------------------------------------- commands


def cmd_group_check(cfg: RunConfig):
    spec = cfg.group()
    violations = validate_htype(spec)
    result = {
        "group": spec.name, "m": spec.m, "n": spec.n, "Q": spec.Q, "rescaled": spec.is_rescaled,
        "violations": [{"kind": v.kind, "index": list(v.index), "magnitude": v.magnitude} for v in violations],
    }
    status = "pass" if not violations else "fail"
    lines = [f"group {spec.name}: m={spec.m} n={spec.n} Q={spec.Q} -> {status}"]
    lines += [f"  {v}" for v in violations]
    return status, result, lines


def cmd_gauge_eval(cfg: RunConfig):
    spec = cfg.group()
    fld = cfg.field(spec)
    check_field_dimension(fld, spec)
    p = _vector(cfg["gauge"].get("point"), spec.N, "gauge.point")
    d = float(gauge_norm(spec, p))
    result = {"point": p, "d": d, "phi": float(phi(spec, p)), "singular": d == 0.0}
    if d > 0:
        result.update({
            "horizontal_gradient_d": horizontal_gradient_d(spec, p),
            "euclidean_gradient_d": euclidean_gradient_d(spec, p),
            "horizontal_hessian_d": horizontal_hessian_d(spec, p),
            "psi0": float(psi0(spec, p)),
            "LA_d": float(apply_LA_closed_form_d(fld, spec, p[None])[0]),
        })
    return "pass", result, [f"d = {d:.12g}" + ("  (origin: derivatives undefined)" if d == 0 else "")]


def cmd_constants(cfg: RunConfig):
    spec = cfg.group()
    block = cfg["constants"]
    budget, seed = int(block["budget"]), cfg.seed
    try:
        gc = gauge_constants(spec, budget=budget, seed=seed, K_samples=int(block["K_samples"]))
    except NumericalConsistencyError as exc:
        return "fail", {"error": str(exc)}, [f"estimator disagreement: {exc}"]
    # independent seeds per radius so the comparison is statistical, not an identity
    betas = [mean_value_beta(spec, budget=budget, seed=seed + 1 + i, R=float(R), check=False)
             for i, R in enumerate(block["R_list"])]
    base = mean_value_beta(spec, budget=budget, seed=seed, check=False)
    z = [abs(b.beta - base.beta) / math.hypot(b.stderr, base.stderr) for b in betas]
    K_sup = estimate_K(spec, samples=int(block["K_samples"]), seed=seed, return_sup=True)[1]
    result = dict(gc.as_dict(), group=spec.name, Q=spec.Q, K_sup=K_sup,
                  beta_surface=base.beta_surface, beta_surface_stderr=base.surface_stderr,
                  beta_relative_disagreement=base.relative_disagreement,
                  R_independence={"R": [float(R) for R in block["R_list"]], "beta": [b.beta for b in betas],
                                  "stderr": [b.stderr for b in betas], "max_z": max(z), "within_2sigma": max(z) <= 2})
    status = "pass" if max(z) <= 2 else "fail"
    lines = [f"beta = {gc.beta:.6g} +- {gc.beta_stderr:.2g} (surface {base.beta_surface:.6g})",
             f"K = {gc.K:.6g}  |B_1| = {gc.ball_volume:.8g}",
             f"R-independence: max z = {max(z):.3g} -> {status}"]
    return status, result, lines


def cmd_landis(cfg: RunConfig):
    spec = cfg.group()
    fld = cfg.field(spec)
    check_field_dimension(fld, spec)
    block = cfg["landis"]
    pts = landis_sample_points(spec, int(block["samples"]), seed=cfg.seed, R=float(block["R"]))
    report = landis_delta_field(fld, pts, spec.Q)
    ratio_delta = delta_from_ratio(fld.bounds, spec.Q)
    result = {"delta": report.delta, "satisfied": report.satisfied, "worst_point": report.worst_point,
              "samples": report.samples, "delta_from_ratio": ratio_delta,
              "lambda": fld.bounds.lam, "Lambda": fld.bounds.Lam, "Q": spec.Q}
    status = "pass" if report.delta > 0 else "fail"
    lines = [f"delta = {report.delta:.12g} (ratio bound {ratio_delta:.12g}) -> {status}"]
    return status, result, lines


def _region(spec, block):
    center = _vector(block.get("center"), spec.N, "barrier.region.center")
    kind = block.get("kind", "ball")
    if kind == "ball":
        return ball_region(spec, center, float(block["radius"]))
    if kind == "ball_minus_ball":
        hole = _vector(block.get("hole_center"), spec.N, "barrier.region.hole_center")
        return ball_minus_ball(spec, center, float(block["radius"]), hole, float(block["hole_radius"]))
    raise ConfigError(f"unknown region kind {kind!r}", "barrier.region.kind")


def cmd_barrier_verify(cfg: RunConfig):
    spec = cfg.group()
    fld = cfg.field(spec)
    check_field_dimension(fld, spec)
    block = cfg["barrier"]
    region = _region(spec, block["region"])
    test = block["test"]
    center = _vector(test.get("center"), spec.N, "barrier.test.center")
    pts = ball_test_points(spec, center, float(test["radius"]), int(test["count"]), seed=cfg.seed)
    verdict = verify_barrier_lemma(fld, spec, region, pts, delta=block.get("delta"), eps=block.get("eps"),
                                   budget=int(block["budget"]), seed=cfg.seed,
                                   tolerance=float(block["tolerance"]))
    result = dict(verdict.as_dict(), landis_delta=verdict.landis.delta if verdict.landis else None)
    lines = [f"margin {verdict.margin_min:+.4g} +- {verdict.stderr:.2g} (C = {verdict.C:.4g}, "
             f"delta = {verdict.delta:.4g}) -> {verdict.verdict}"]
    return verdict.verdict, result, lines


def _csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(row[k]) if isinstance(row[k], float) else row[k] for k in CSV_COLUMNS})
    return buf.getvalue()


def cmd_harnack_run(cfg: RunConfig):
    spec = cfg.group()
    block = cfg["harnack"]
    x0 = _vector(block.get("x0"), spec.N, "harnack.x0")
    R, res = float(block["R"]), int(block["resolution"])
    sweep = int(block["sweep"])
    if sweep > 0:
        out = critical_density_sweep(spec, sweep, seed=cfg.seed, resolution=res, R=R, x0=x0,
                                     delta_min=float(block["delta_min"]))
        rows, summary = out.rows, out.summary
        status = "pass" if summary["counterexamples"] == 0 else "fail"
    else:
        fld = cfg.field(spec)
        check_field_dimension(fld, spec)
        bblock = dict(block["boundary"])
        name = bblock.pop("name", "sine")
        boundary = boundary_preset(name, spec, **bblock) if name != "random" else \
            boundary_preset(name, spec, seed=bblock.get("seed", cfg.seed))
        row, sol = run_case(0, fld, spec, boundary, R, x0, res, pad=float(block["pad"]))
        rows = [row]
        summary = {"cases": 1, "boundary": boundary.descriptor, "min_value": sol.min_value,
                   "solver": sol.solver, "resolution": res}
        status = "pass" if math.isfinite(row["quotient"]) else "fail"
    text = _csv_text(rows)
    if block.get("csv"):
        Path(block["csv"]).write_text(text)
    result = {"columns": list(CSV_COLUMNS), "rows": rows, "summary": summary}
    lines = [f"{len(rows)} case(s); max quotient {max(r['quotient'] for r in rows):.4g} -> {status}"]
    return status, result, lines


COMMANDS = {
    ("group", "check"): cmd_group_check,
    ("gauge", "eval"): cmd_gauge_eval,
    ("constants", None): cmd_constants,
    ("landis", "check"): cmd_landis,
    ("barrier", "verify"): cmd_barrier_verify,
    ("harnack", "run"): cmd_harnack_run,
}


# ------------------------------------------------------------------ parser


def _common(parser):
    parser.add_argument("--config", help="YAML or JSON config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key, e.g. --set barrier.budget=100000")
    parser.add_argument("--preset", help="group preset (overrides group.*)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--output", help="write the JSON document here instead of stdout")
    parser.add_argument("--show-config", action="store_true", help="print the resolved config and exit")
    parser.add_argument("--quiet", action="store_true", help="no human summary on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="htype", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    top = parser.add_subparsers(dest="command", required=True)

    group = top.add_parser("group").add_subparsers(dest="action", required=True)
    _common(group.add_parser("check", help="validate the H-type structure"))

    gauge = top.add_parser("gauge").add_subparsers(dest="action", required=True)
    ev = gauge.add_parser("eval", help="gauge and its derivatives at a point")
    ev.add_argument("point", help="comma-separated coordinates, e.g. 1,0,0.5")
    _common(ev)

    const = top.add_parser("constants", help="beta, K and |B_1| with error bars")
    const.add_argument("--budget", type=int)
    _common(const)

    landis = top.add_parser("landis").add_subparsers(dest="action", required=True)
    lc = landis.add_parser("check", help="Cordes-Landis margin of the configured field")
    lc.add_argument("--field", help="field block as YAML, e.g. '{kind: diagonal, diag: [1, 1.5]}'")
    _common(lc)

    barrier = top.add_parser("barrier").add_subparsers(dest="action", required=True)
    bv = barrier.add_parser("verify", help="check the barrier lower bound at test points")
    bv.add_argument("--field")
    bv.add_argument("--budget", type=int)
    _common(bv)

    harnack = top.add_parser("harnack").add_subparsers(dest="action", required=True)
    hr = harnack.add_parser("run", help="Dirichlet solves, Harnack quotients, density sweep")
    hr.add_argument("--field")
    hr.add_argument("--sweep", type=int, help="number of random Landis-compliant cases")
    hr.add_argument("--resolution", type=int)
    hr.add_argument("--csv", help="write CSV rows here")
    _common(hr)
    return parser


def _overrides(args) -> list:
    out = [parse_override(s) for s in args.set]
    if args.preset:
        out.append({"group": {"preset": args.preset}})
    if args.seed is not None:
        out.append({"seed": args.seed})
    if args.output:
        out.append({"output": args.output})
    if getattr(args, "field", None):
        try:
            block = yaml.safe_load(args.field)
        except yaml.YAMLError as exc:
            raise ConfigError(str(exc), "--field") from exc
        if not isinstance(block, dict):
            raise ConfigError("field must be a mapping", "--field")
        out.append({"field": block})
    if getattr(args, "point", None) is not None:
        out.append({"gauge": {"point": args.point}})
    budget = getattr(args, "budget", None)
    if budget is not None:
        out.append({args.command: {"budget": budget}})
    for key in ("sweep", "resolution", "csv"):
        if getattr(args, key, None) is not None:
            out.append({"harnack": {key: getattr(args, key)}})
    return out


def _emit(cfg: RunConfig, command: str, status: str, result: dict):
    doc = {"command": command, "status": status, "version": __version__, "seed": cfg.seed,
           "config_digest": cfg.digest(), "config": cfg.tree, "result": result}
    text = json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n"
    if cfg["output"]:
        Path(cfg["output"]).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    key = (args.command, getattr(args, "action", None))
    name = " ".join(k for k in key if k)
    try:
        cfg = RunConfig.build(args.config, _overrides(args))
        if args.show_config:
            sys.stdout.write(yaml.safe_dump(_clean(cfg.tree), sort_keys=True))
            return EXIT_PASS
        status, result, lines = COMMANDS[key](cfg)
    except (ConfigError, StructureError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PreconditionError, DomainError, SingularityError) as exc:
        print(f"precondition error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (NumericalConsistencyError, SolverError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _emit(cfg, name, status, result)
    if not args.quiet:
        for line in lines:
            print(line, file=sys.stderr)
    return _VERDICT_CODES[status]


if __name__ == "__main__":
    sys.exit(main())
