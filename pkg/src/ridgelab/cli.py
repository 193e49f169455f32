"""ridgelab command line: declarative configs, experiment dispatch, JSON/CSV artifacts.

Exit codes: 0 pass or inconclusive, 1 fail verdict, 2 usage/config error,
3 experiment error (partial artifacts are flagged in report.json).
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import catalog
from .bestapprox import SolverConfig, best_approx_chain, check_remainder_axioms
from .core import Domain, NormQuery
from .ratelab import (ExperimentReport, _clean, direct_theorem_experiment, l2_relu_experiment,
                      rate_fit, sharpness_gap_experiment, synchronous_error_experiment_d1,
                      InsufficientData)
from .resonance import resonance_function, resonance_modulus_bound, shatter_fit, verify_corsharp_chain
from .smoothness import ModulusQuery, modulus

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


DEFAULTS = {
    "experiment": None,
    "function": {"id": "abs-kink", "params": {}},
    "activation": {"kind": "logistic", "k": 1, "alpha": 1.0},
    "domain": {"kind": "unit-cube", "dim": 1},
    "n_list": [4, 8, 16, 32],
    "r": 1,
    "k": 1,
    "norm": {"p": "inf", "sampling": "tensor-grid", "resolution": 257, "count": 4096},
    "solver": {"restarts": 8},
    "seed": 0,
    "params": {},
    "output": {"dir": "ridgelab-out"},
}

SUBCOMMAND_EXPERIMENT = {
    "verify-chain": "verify-chain", "shatter": "shatter", "modulus": "modulus",
    "best-approx": "best-approx", "resonance": "resonance", "rates": "direct-theorem",
}


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config_file(path):
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None
    try:
        if p.suffix == ".toml":
            return tomllib.loads(text)
        return json.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError("--config", f"cannot parse: {exc}") from None


def _parse_value(text):
    try:
        return json.loads(text)
    except ValueError:
        return text


def apply_override(cfg, assignment):
    if "=" not in assignment:
        raise ConfigError("--set", f"expected key=value, got {assignment!r}")
    key, value = assignment.split("=", 1)
    node = cfg
    parts = key.strip().split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(key, "cannot descend into a non-table value")
    node[parts[-1]] = _parse_value(value)
    return cfg


def _p_value(v, field="norm.p"):
    if isinstance(v, str) and v.lower() in ("inf", "infinity"):
        return math.inf
    try:
        p = float(v)
    except (TypeError, ValueError):
        raise ConfigError(field, f"not a number: {v!r}") from None
    if p < 1:
        raise ConfigError(field, "must be >= 1 or 'inf'")
    return p


def build_domain(spec):
    kind = spec.get("kind", "unit-cube")
    dim = int(spec.get("dim", 1))
    if kind == "unit-cube":
        return Domain.cube(dim)
    if kind == "unit-ball":
        return Domain.ball(dim)
    if kind == "interval-product":
        if "bounds" not in spec:
            raise ConfigError("domain.bounds", "required for interval-product")
        return Domain.box([tuple(b) for b in spec["bounds"]])
    raise ConfigError("domain.kind", f"unknown domain {kind!r}")


def build_norm(spec):
    try:
        return NormQuery(_p_value(spec.get("p", "inf")), sampling=spec.get("sampling", "tensor-grid"),
                         resolution=int(spec.get("resolution", 257)), count=int(spec.get("count", 4096)),
                         seed=int(spec.get("seed", 0)))
    except ValueError as exc:
        raise ConfigError("norm", str(exc)) from None


def build_solver(spec, seed, norm, jobs):
    allowed = set(SolverConfig.__dataclass_fields__) - {"norm", "seed", "jobs"}
    unknown = set(spec) - allowed
    if unknown:
        raise ConfigError(f"solver.{sorted(unknown)[0]}", "unknown solver field")
    kw = dict(spec)
    if "temperatures" in kw:
        kw["temperatures"] = tuple(kw["temperatures"])
    if "w_scale" in kw:
        kw["w_scale"] = tuple(kw["w_scale"])
    try:
        return SolverConfig(**kw, seed=int(seed), norm=norm, jobs=int(jobs))
    except (TypeError, ValueError) as exc:
        raise ConfigError("solver", str(exc)) from None


def validate(cfg):
    exp = cfg.get("experiment")
    if exp not in catalog.EXPERIMENTS:
        raise ConfigError("experiment", f"unknown experiment {exp!r}")
    if exp not in ("verify-chain", "shatter", "resonance", "sharpness-gap"):
        fn = cfg.get("function") or {}
        if "id" not in fn:
            raise ConfigError("function.id", "missing function id")
        if fn["id"] not in catalog.FUNCTIONS:
            raise ConfigError("function.id", f"unknown function {fn['id']!r}")
    act = cfg.get("activation") or {}
    if act.get("kind") not in catalog.ACTIVATIONS:
        raise ConfigError("activation.kind", f"unknown activation {act.get('kind')!r}")
    if not isinstance(cfg.get("seed"), int):
        raise ConfigError("seed", "an explicit integer seed is required")
    nl = cfg.get("n_list")
    if not isinstance(nl, list) or not all(isinstance(n, int) and n >= 1 for n in nl):
        raise ConfigError("n_list", "must be a list of positive integers")


# ---------------------------------------------------------------------------
# Experiment runners: each returns an ExperimentReport
# ---------------------------------------------------------------------------

def _target(cfg):
    fn = cfg["function"]
    params = dict(fn.get("params", {}))
    try:
        return catalog.build_function(fn["id"], params)
    except catalog.CatalogError as exc:
        raise ConfigError("function.params", str(exc)) from None


def _chain_report(cfg, ctx):
    p = cfg["params"]
    try:
        C_d, E = p.get("C_d", 1), p.get("E", 64)
        d = int(p.get("d", 1))
        lo, hi = int(p.get("n_min", 2)), int(p.get("n_max", 10 ** 6))
    except (TypeError, ValueError) as exc:
        raise ConfigError("params", str(exc)) from None
    if lo < 2 or hi < lo:
        raise ConfigError("params.n_min", "need 2 <= n_min <= n_max")
    rep = verify_corsharp_chain(C_d, E, np.arange(lo, hi + 1), d)
    ok = rep.per_n_ok
    # full table is large: keep log-spaced rows plus the first failures
    idx = set(np.unique(np.geomspace(1, rep.n.size, num=min(rep.n.size, 200)).astype(int) - 1).tolist())
    idx |= set(np.nonzero(~ok)[0][:50].tolist())
    rows = []
    for i in sorted(idx):
        rows.append([int(rep.n[i]), int(rep.D[i]), float(rep.Dd[i]), float(rep.bartlett[i]),
                     *[int(bool(rep.steps[s][i])) for s in rep.steps], int(bool(rep.growth_cond[i]))])
    cols = [("n", "network width"), ("D", "grid size D(n)"), ("D^d", "[D(n)]^d"),
            ("bartlett", "informational VC bound 2(nd+2n+1)log2(24e(nd+2n+1)D)")]
    cols += [(s, f"1 when chain step {s} holds") for s in rep.steps]
    cols.append(("growth_cond", "1 when D(4n)^d <= 12 E n (1 + log2 n)"))
    return ExperimentReport(
        "verify-chain", {"C_d": C_d, "E": E, "d": d, "n_min": lo, "n_max": hi}, cols, rows, {},
        rep.verdict,
        {"e_condition": rep.e_condition, "e_condition_margin": rep.e_condition_margin, "n0": rep.n0, "failures": rep.failures(),
         "rows_shown": len(rows), "rows_total": int(rep.n.size)})


def _shatter_report(cfg, ctx):
    p = cfg["params"]
    pts = np.asarray(p.get("points", [[0.2], [0.5], [0.8]]), dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    signs = p.get("signs", [1, -1, 1])
    n = int(p.get("n", 1))
    res = shatter_fit(n, ctx["activation"], pts, signs, ctx["solver"], offset=bool(p.get("offset", False)),
                      margin_target=float(p.get("margin", 0.1)))
    verdict = "pass" if (res.fit or res.certificate == "PROVEN") else "inconclusive"
    rows = [[i, m] for i, m in enumerate(res.margins)]
    return ExperimentReport(
        "shatter", {"n": n, "points": pts.tolist(), "signs": list(signs),
                    "activation": ctx["activation"].label(), "solver": _clean(ctx["solver"])},
        [("restart", "restart index"), ("margin", "min_i s_i g(x_i) after optimization")],
        rows, {}, verdict,
        {"fit": res.fit, "margin": res.margin, "certificate": res.certificate,
         "params": res.params.to_dict() if res.params is not None else None})


def _modulus_report(cfg, ctx):
    p = cfg["params"]
    deltas = [float(x) for x in p.get("deltas", [0.01, 0.02, 0.05, 0.1, 0.2])]
    f = _target(cfg)
    r = int(cfg["r"])
    q = ModulusQuery(r, deltas[0], ctx["norm"], directions=p.get("directions", "axis-aligned"),
                     count=int(p.get("count", 0)), seed=int(cfg["seed"]))
    rows = []
    for delta in deltas:
        rows.append([delta, modulus(f, q.with_delta(delta), ctx["domain"])])
    fits = {}
    try:
        fits["omega"] = rate_fit([(1.0 / d, w) for d, w in rows]).to_dict()
    except InsufficientData:
        pass
    return ExperimentReport(
        "modulus", {"function": f.label, "r": r, "deltas": deltas, "norm": _clean(ctx["norm"])},
        [("delta", "step bound"), ("omega_r", "sampled radial modulus")], rows, fits, "pass")


def _best_approx_report(cfg, ctx):
    f = _target(cfg)
    chain = best_approx_chain(f, cfg["n_list"], ctx["activation"], ctx["norm"].p, ctx["domain"], ctx["solver"])
    rows = [[int(n), r.error, r.meta["norm_f"]] for n, r in zip(cfg["n_list"], chain)]
    fits = {}
    try:
        fits["E_n"] = rate_fit([(row[0], row[1]) for row in rows]).to_dict()
    except InsufficientData:
        pass
    return ExperimentReport(
        "best-approx", {"function": f.label, "activation": ctx["activation"].label(),
                        "n_list": cfg["n_list"], "solver": _clean(ctx["solver"])},
        [("n", "network width"), ("E_n", "best sampled error found (upper estimate)"),
         ("norm_f", "sampled norm of f")], rows, fits, "pass",
        {"networks": [r.params.to_dict() for r in chain]})


def _resonance_report(cfg, ctx):
    p = cfg["params"]
    tau, dim = int(p.get("tau", 4)), int(p.get("dim", 1))
    try:
        rf = resonance_function(catalog.resonance_grid(tau, dim, p.get("signs", "alternating"), int(cfg["seed"])))
    except (catalog.CatalogError, ValueError) as exc:
        raise ConfigError("params.signs", str(exc)) from None
    deltas = [float(x) for x in p.get("deltas", [1 / (16 * tau), 1 / (8 * tau), 1 / (4 * tau), 1 / (2 * tau), 1.0 / tau])]
    rep = resonance_modulus_bound(rf, int(cfg["r"]), deltas)
    pts = rf.signed_grid.points()
    exact = bool(np.array_equal(rf.values(pts), rf.signed_grid.flat_signs().astype(float)))
    sup = rf.sup_norm()
    rows = [[d, w, q] for d, w, q in zip(rep.deltas, rep.omegas, rep.ratios)]
    verdict = "pass" if exact and sup <= 1.0 else "fail"
    return ExperimentReport(
        "resonance", {"tau": tau, "dim": dim, "r": int(cfg["r"]), "signs": rf.signed_grid.label()},
        [("delta", "step bound"), ("omega_r", "sampled modulus of h"),
         ("ratio", "omega_r / min(1, (2 tau delta)^r)")], rows, {}, verdict,
        {"exact_at_grid": exact, "sup_norm": sup, "C2": rep.C2, "bump_lipschitz": rep.lipschitz_bound})


def _axioms_report(cfg, ctx):
    p = cfg["params"]
    ids = p.get("functions", [{"id": cfg["function"]["id"], "params": cfg["function"].get("params", {})}])
    fs = []
    for spec in ids:
        if spec.get("id") not in catalog.FUNCTIONS:
            raise ConfigError("params.functions", f"unknown function {spec.get('id')!r}")
        fs.append(catalog.build_function(spec["id"], spec.get("params", {})))
    rep = check_remainder_axioms(fs, cfg["n_list"], ctx["activation"], ctx["norm"].p, ctx["domain"],
                                 ctx["solver"], float(p.get("factor", 2.0)), float(p.get("slack", 0.05)))
    rows = []
    for f, errs in zip(fs, rep.monotonicity["errors"]):
        for n, e in zip(cfg["n_list"], errs):
            rows.append([f.label, int(n), e])
    return ExperimentReport(
        "axioms", {"functions": [f.label for f in fs], "n_list": cfg["n_list"]},
        [("function", "target label"), ("n", "network width"), ("E_n", "warm-chain estimate")],
        rows, {}, "pass" if rep.passed else "fail",
        {"monotonicity": rep.monotonicity, "homogeneity": rep.homogeneity,
         "subadditivity": rep.subadditivity, "stability": rep.stability})


def _direct_report(cfg, ctx):
    return direct_theorem_experiment(_target(cfg), ctx["activation"], int(cfg["r"]), cfg["n_list"],
                                     ctx["norm"].p, ctx["domain"], ctx["solver"],
                                     float(cfg["params"].get("limit", 5.0)))


def _l2_report(cfg, ctx):
    dom = ctx["domain"] if ctx["domain"].kind == "unit-ball" else Domain.ball(ctx["domain"].dim)
    try:
        return l2_relu_experiment(_target(cfg), int(cfg["k"]), int(cfg["r"]), cfg["n_list"], dom, ctx["solver"],
                                  samples=ctx["norm"].count, seed=int(cfg["seed"]))
    except ValueError as exc:
        raise ConfigError("r", str(exc)) from None


def _sharpness_report(cfg, ctx):
    p = cfg["params"]
    try:
        return sharpness_gap_experiment(ctx["activation"], int(cfg["r"]), int(p.get("d", 1)),
                                        float(p.get("alpha", 0.5)), int(p.get("m", 2)), ctx["solver"],
                                        floor=float(p.get("floor", 0.5)))
    except ValueError as exc:
        raise ConfigError("params.alpha", str(exc)) from None


def _sync_report(cfg, ctx):
    dom = ctx["domain"]
    if cfg["domain"].get("kind", "unit-cube") == "unit-cube" and "bounds" not in cfg["domain"]:
        dom = Domain.box([(-1.0, 1.0)])
    return synchronous_error_experiment_d1(_target(cfg), ctx["activation"], int(cfg["k"]), cfg["n_list"],
                                           dom, ctx["norm"])


RUNNERS = {
    "verify-chain": _chain_report, "shatter": _shatter_report, "modulus": _modulus_report,
    "best-approx": _best_approx_report, "resonance": _resonance_report, "axioms": _axioms_report,
    "direct-theorem": _direct_report, "l2-relu": _l2_report, "sharpness-gap": _sharpness_report,
    "synchronous-d1": _sync_report,
}


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_artifacts(report: ExperimentReport, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    with open(out / "table.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["#schema"] + [f"{n}: {d}" for n, d in report.columns])
        w.writerow(report.column_names)
        for row in report.rows:
            w.writerow([_fmt(v) for v in row])


def execute(cfg, jobs=1):
    validate(cfg)
    domain = build_domain(cfg["domain"])
    normq = build_norm(cfg["norm"])
    try:
        act = catalog.build_activation(cfg["activation"])
    except (catalog.CatalogError, ValueError) as exc:
        raise ConfigError("activation", str(exc)) from None
    solver = build_solver(cfg.get("solver", {}), cfg["seed"], normq, jobs)
    ctx = {"domain": domain, "norm": normq, "activation": act, "solver": solver}
    report = RUNNERS[cfg["experiment"]](cfg, ctx)
    report.inputs.setdefault("seed", cfg["seed"])
    return report


def build_parser():
    ap = argparse.ArgumentParser(prog="ridgelab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("list-catalog", help="print built-in functions, activations and experiments")
    for name in ("run",) + tuple(SUBCOMMAND_EXPERIMENT):
        sp = sub.add_parser(name, help=f"run the {SUBCOMMAND_EXPERIMENT.get(name, 'configured')} experiment")
        sp.add_argument("--config", help="JSON or TOML config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--jobs", type=int)
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config leaf by dotted path")
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "list-catalog":
        sys.stdout.write(catalog.listing())
        return 0
    out_dir = None
    try:
        cfg = copy.deepcopy(DEFAULTS)
        if args.command != "run":
            cfg["experiment"] = SUBCOMMAND_EXPERIMENT[args.command]
        else:
            cfg["function"] = {"params": {}}  # a run config names its function explicitly
        if args.config:
            cfg = _merge(cfg, load_config_file(args.config))
        for item in args.set:
            apply_override(cfg, item)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.out:
            cfg["output"]["dir"] = args.out
        try:
            jobs = args.jobs or int(os.environ.get("RIDGELAB_JOBS", "1") or 1)
        except ValueError:
            raise ConfigError("RIDGELAB_JOBS", "must be an integer") from None
        out_dir = cfg["output"]["dir"]
        report = execute(cfg, jobs)
    except ConfigError as exc:
        print(f"ridgelab: config error in {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # experiment failure: flag partial artifacts
        print(f"ridgelab: experiment error: {exc!r}", file=sys.stderr)
        if out_dir:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            (Path(out_dir) / "report.json").write_text(
                json.dumps({"error": repr(exc), "partial": True, "experiment": cfg.get("experiment")},
                           sort_keys=True, indent=2) + "\n")
        return 3
    write_artifacts(report, out_dir)
    print(f"{report.experiment}: {report.verdict} -> {out_dir}")
    return 1 if report.verdict == "fail" else 0


if __name__ == "__main__":
    sys.exit(main())
