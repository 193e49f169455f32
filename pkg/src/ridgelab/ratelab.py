"""Experiments: direct-theorem trends, L2 ReLU^k bounds, sharpness gaps, rate fits."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from . import __version__
from .bestapprox import SolverConfig, best_approx, best_approx_chain, net_derivative
from .core import Activation, Domain, NormQuery, TargetFunction, norm, sample_plan
from .resonance import (PROVEN, HEURISTIC, default_resonance_component, gliding_hump_compose,
                        sign_changes)
from .ridgepoly import Polynomial, poly_best_approx, poly_by_network, simultaneous_error
from .smoothness import AbstractModulus, ModulusQuery, RateFunction, modulus


class InsufficientData(ValueError):
    pass


class HypothesisViolation(ValueError):
    pass


@dataclass
class RateFit:
    pairs: list
    beta: float
    constant: float
    residual: float
    window: tuple

    def to_dict(self):
        return {"beta": self.beta, "constant": self.constant, "residual": self.residual,
                "window": list(self.window), "pairs": [list(p) for p in self.pairs]}


def rate_fit(pairs, window=None) -> RateFit:
    """Least squares on (log n, log e); error ~ constant * n^(-beta)."""
    pts = [(float(n), float(e)) for n, e in pairs
           if e > 0 and math.isfinite(e) and (window is None or window[0] <= n <= window[1])]
    if len(pts) < 3:
        raise InsufficientData("need at least 3 pairs with positive errors")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    win = (pts[0][0], pts[-1][0]) if window is None else tuple(window)
    return RateFit(pts, float(-slope), float(math.exp(intercept)), resid, win)


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _clean({f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)})
    if isinstance(obj, Activation):
        return obj.label()
    return obj


@dataclass
class ExperimentReport:
    experiment: str
    inputs: dict
    columns: list  # (name, description)
    rows: list
    fits: dict = field(default_factory=dict)
    verdict: str = "inconclusive"
    details: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=lambda: {"ridgelab": __version__})

    @property
    def column_names(self):
        return [c[0] for c in self.columns]

    def column(self, name):
        i = self.column_names.index(name)
        return [row[i] for row in self.rows]

    def to_dict(self):
        return _clean({"experiment": self.experiment, "inputs": self.inputs,
                       "columns": [{"name": n, "description": d} for n, d in self.columns],
                       "rows": self.rows, "fits": self.fits, "verdict": self.verdict,
                       "details": self.details, "provenance": self.provenance})

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def growth_verdict(ratios, limit=5.0):
    """pass / inconclusive / fail for a ratio column that should stay bounded.

    ``growth`` is the largest forward increase ratio_j / ratio_i (i < j).  Fail
    needs growth beyond twice the limit together with a monotone increase.
    """
    r = [x for x in ratios if math.isfinite(x)]
    growth = 1.0
    for i in range(len(r)):
        for j in range(i + 1, len(r)):
            if r[i] > 0:
                growth = max(growth, r[j] / r[i])
            elif r[j] > 0:
                growth = math.inf
    monotone = len(r) > 1 and all(b > a for a, b in zip(r, r[1:]))
    if growth <= limit:
        return "pass", growth
    if growth > 2 * limit and monotone:
        return "fail", growth
    return "inconclusive", growth


def _ratio(e, ref, tol):
    if ref > 0:
        return e / ref
    return 0.0 if e <= tol else math.inf


def _cfg_dict(cfg: SolverConfig):
    return _clean(cfg)


def direct_theorem_experiment(f: TargetFunction, activation: Activation, r: int, n_list: Sequence[int],
                              p=math.inf, domain: Domain = None, cfg: SolverConfig = None,
                              limit: float = 5.0) -> ExperimentReport:
    """Found E_n against omega_r(f, n^(-1/d)) along a warm-started chain."""
    domain = domain or Domain.cube(f.dim)
    cfg = cfg or SolverConfig()
    d = domain.dim
    chain = best_approx_chain(f, n_list, activation, p, domain, cfg)
    q = cfg.norm.with_p(p)
    rows, ratios = [], []
    for n, res in zip(n_list, chain):
        delta = float(n) ** (-1.0 / d)
        om = modulus(f, ModulusQuery(r, delta, q), domain)
        ratio = _ratio(res.error, om, cfg.tolerance)
        ratios.append(ratio)
        rows.append([int(n), res.error, delta, om, ratio, int(n < 4 ** d)])
    verdict, growth = growth_verdict(ratios, limit)
    finite = [x for x in ratios if math.isfinite(x) and x > 0]
    fits = {}
    try:
        fits["E_n"] = rate_fit([(row[0], row[1]) for row in rows]).to_dict()
    except InsufficientData:
        pass
    details = {"max_ratio": max(ratios) if ratios else math.nan, "growth": growth,
               "spread": (max(finite) / min(finite)) if finite else math.nan,
               "networks": [res.params.to_dict() for res in chain]}
    return ExperimentReport(
        "direct-theorem",
        {"function": f.label, "activation": activation.label(), "r": r, "p": p,
         "n_list": list(n_list), "domain": domain.kind, "solver": _cfg_dict(cfg), "limit": limit},
        [("n", "network width"), ("E_n", "best sampled error found (upper estimate)"),
         ("delta", "n^(-1/d)"), ("omega_r", "sampled radial modulus at delta"),
         ("ratio", "E_n / omega_r"), ("below_4^d", "1 when n < 4^d")],
        rows, fits, verdict, details)


def l2_relu_experiment(f: TargetFunction, k: int, r: int, n_list: Sequence[int], domain: Domain = None,
                       cfg: SolverConfig = None, limit: float = 5.0, samples: int = 4096,
                       seed: int = 0) -> ExperimentReport:
    """L2 errors of ReLU^k networks on the ball against omega_r + n^(-r/d) ||f||."""
    domain = domain or Domain.ball(f.dim)
    d = domain.dim
    if d < 2:
        raise HypothesisViolation("the L2 bound is stated for d >= 2")
    if not r < k + 1 + (d - 1) / 2:
        raise HypothesisViolation(f"r={r} violates r < k + 1 + (d - 1)/2 = {k + 1 + (d - 1) / 2}")
    q = NormQuery(2, sampling="monte-carlo", count=samples, seed=seed)
    cfg = dataclasses.replace(cfg or SolverConfig(), norm=q)
    act = Activation("relu-power", k=k)
    chain = best_approx_chain(f, n_list, act, 2, domain, cfg)
    nf = norm(f, domain, q)
    rows, ratios = [], []
    for n, res in zip(n_list, chain):
        delta = float(n) ** (-1.0 / d)
        om = modulus(f, ModulusQuery(r, delta, q, directions="random", count=16, seed=seed), domain)
        rhs = om + float(n) ** (-r / d) * nf
        ratio = _ratio(res.error, rhs, cfg.tolerance)
        ratios.append(ratio)
        rows.append([int(n), res.error, om, rhs, ratio])
    verdict, growth = growth_verdict(ratios, limit)
    return ExperimentReport(
        "l2-relu",
        {"function": f.label, "k": k, "r": r, "n_list": list(n_list), "domain": domain.kind,
         "solver": _cfg_dict(cfg), "limit": limit},
        [("n", "network width"), ("E_n", "best sampled L2 error found"),
         ("omega_r", "sampled L2 radial modulus at n^(-1/d)"),
         ("rhs", "omega_r + n^(-r/d) ||f||_2"), ("ratio", "E_n / rhs")],
        rows, {}, verdict, {"growth": growth, "norm_f": nf})


def sharpness_gap_experiment(activation: Activation, r: int, d: int, alpha: float, m: int,
                             cfg: SolverConfig = None, deltas: Sequence[float] = (1 / 64, 1 / 32, 1 / 16, 1 / 8, 1 / 4),
                             floor: float = 0.5, indices: Optional[Sequence[int]] = None) -> ExperimentReport:
    """Gliding-hump f with modulus delta^(d alpha): upper and lower side tables.

    The component at index n_j is a resonance element meant to resist width
    n_j / 4; the lower side reports E_{n_j/4}(f) / omega(phi(n_j)^r) with
    phi(x) = (x (1 + log2 x))^(-1/d).
    """
    if not 0 < alpha < r / d:
        raise ValueError(f"need 0 < alpha < r/d = {r / d}")
    cfg = cfg or SolverConfig(restarts=16)
    omega = AbstractModulus.power(alpha * d / r)
    phi = RateFunction("log-power", r=1, d=d)
    indices = [4 ** (j + 1) for j in range(m)] if indices is None else list(indices)[:m]
    widths = [max(n // 4, 1) for n in indices]
    comps = [default_resonance_component(w, d) for w in widths]
    series = gliding_hump_compose(comps, omega, phi, r, m, indices)
    f = series.partial(m)
    per_cell = 16
    resolution = max(h.tau for h in comps) * per_cell + 1
    q = NormQuery(math.inf, resolution=resolution)
    dom = Domain.cube(d)
    upper = []
    for delta in deltas:
        om = modulus(f, ModulusQuery(r, float(delta), q), dom)
        ref = float(delta) ** (d * alpha)
        upper.append([float(delta), om, ref, om / ref])
    scfg = dataclasses.replace(cfg, norm=q)
    rows = []
    for j, (n, w, h) in enumerate(zip(indices, widths, comps)):
        res = best_approx(f, w, activation, math.inf, dom, scfg)
        ratio = res.error / series.weights[j]
        pts = h.signed_grid.points()
        cert = PROVEN if (w == 1 and d == 1 and activation.monotone and
                          sign_changes(pts[:, 0], h.signed_grid.flat_signs()) > 1) else HEURISTIC
        rows.append([int(n), int(w), int(h.tau), series.weights[j], res.error, ratio, cert])
    ratios = [row[5] for row in rows]
    lowest = min(ratios)
    verdict = "pass" if lowest >= floor else ("inconclusive" if lowest >= floor / 2 else "fail")
    up_ratios = [u[3] for u in upper]
    return ExperimentReport(
        "sharpness-gap",
        {"activation": activation.label(), "r": r, "d": d, "alpha": alpha, "m": m,
         "indices": indices, "widths": widths, "solver": _cfg_dict(scfg), "floor": floor},
        [("n_j", "resonance index"), ("width", "network width tested"), ("tau", "grid parameter"),
         ("weight", "omega(phi(n_j)^r)"), ("E", "best sampled sup error found"),
         ("ratio", "E / weight"), ("certificate", "PROVEN or HEURISTIC resistance")],
        rows, {}, verdict,
        {"upper": {"columns": ["delta", "omega_r", "delta^(d alpha)", "ratio"], "rows": upper,
                   "max_ratio": max(up_ratios)},
         "series": series.to_dict(), "min_ratio": lowest})


def _joint_outer_lp(params, targets, scales, X):
    """Re-fit outer weights minimizing max_j ||d^j (f - g)|| / scale_j (one variable)."""
    n = params.n
    blocks, rhs = [], []
    for j, (tv, s) in enumerate(zip(targets, scales)):
        cols = []
        for k in range(n):
            single = dataclasses.replace(params, a=np.eye(n)[k], offset=0.0)
            cols.append(net_derivative(single, (j,), X))
        B = np.stack(cols, axis=1) / s
        blocks.append(B)
        rhs.append(tv / s)
    B = np.vstack(blocks)
    y = np.concatenate(rhs)
    ones = np.ones((B.shape[0], 1))
    A = np.vstack([np.hstack([B, -ones]), np.hstack([-B, -ones])])
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    res = linprog(cost, A_ub=A, b_ub=np.concatenate([y, -y]),
                  bounds=[(None, None)] * n + [(0, None)], method="highs")
    return None if res.status != 0 else res.x[:n]


def synchronous_error_experiment_d1(f: TargetFunction, activation: Activation, k: int,
                                    n_list: Sequence[int], domain: Domain = None,
                                    norm_query: NormQuery = None) -> ExperimentReport:
    """Simultaneous sup errors of derivatives 0..k for constructed networks.

    For width n the degree-(n-1) minimax polynomial is realized by divided
    differences; the outer weights are then re-fitted by an LP that cannot
    worsen any derivative order relative to the construction.
    """
    if f.dim != 1:
        raise ValueError("one-dimensional experiment")
    if not activation.smooth:
        raise ValueError("needs a smooth activation")
    domain = domain or Domain.box([(-1.0, 1.0)])
    q = (norm_query or NormQuery()).with_p(math.inf)
    X, _ = sample_plan(domain, q)
    targets = []
    for j in range(k + 1):
        g = f.derivative((j,)) if f.derivative is not None else None
        if g is None:
            raise ValueError(f"target has no derivative of order {j}")
        targets.append(np.asarray(g(X), dtype=float).reshape(-1))
    top = f.derivative((k,))
    top_f = TargetFunction(lambda Z: np.asarray(top(Z), dtype=float).reshape(-1), 1, "f^(k)")
    rows = []
    errors_by_order = {j: [] for j in range(k + 1)}
    for n in n_list:
        poly, _ = poly_best_approx(f, n - 1, math.inf, domain, q)
        built = poly_by_network(poly, activation, n, math.inf, domain, norm=q)
        params = built.params
        errs0 = [float(np.max(np.abs(net_derivative(params, (j,), X) - targets[j]))) for j in range(k + 1)]
        scales = [max(e, 1e-300) for e in errs0]
        a = _joint_outer_lp(params, targets, scales, X)
        if a is not None:
            cand = dataclasses.replace(params, a=a)
            errs1 = [float(np.max(np.abs(net_derivative(cand, (j,), X) - targets[j]))) for j in range(k + 1)]
            if all(e1 <= e0 for e1, e0 in zip(errs1, errs0)):
                params, errs0 = cand, errs1
        om = modulus(top_f, ModulusQuery(1, 1.0 / n, q), domain)
        for j in range(k + 1):
            rhs = float(n) ** (-(k - j)) * om
            errors_by_order[j].append((n, errs0[j]))
            rows.append([int(n), j, errs0[j], rhs, _ratio(errs0[j], rhs, 1e-12), params.n])
    fits = {}
    for j, pairs in errors_by_order.items():
        try:
            fits[f"order_{j}"] = rate_fit(pairs).to_dict()
        except InsufficientData:
            pass
    decays = all(v["beta"] > 0 for v in fits.values()) and len(fits) == k + 1
    verdict = "pass" if decays else "inconclusive"
    return ExperimentReport(
        "synchronous-d1",
        {"function": f.label, "activation": activation.label(), "k": k, "n_list": list(n_list),
         "domain": [list(b) for b in domain.bounds], "resolution": q.resolution},
        [("n", "network width budget"), ("order", "derivative order j"),
         ("error", "sampled sup norm of the j-th derivative error"),
         ("rhs", "n^(-(k-j)) omega_1(f^(k), 1/n)"), ("ratio", "error / rhs"),
         ("neurons", "neurons used")],
        rows, fits, verdict)
