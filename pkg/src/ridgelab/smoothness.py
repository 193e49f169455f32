"""Radial differences and moduli of smoothness, Sobolev seminorms,
abstract moduli, rate functions and a Peetre K-functional estimator."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (Domain, NormQuery, TargetFunction, domain_shrink, sample_plan,
                   sampled_norm)
from .functions import partial_evaluator


class PointOutsideShrunkDomain(ValueError):
    pass


class NoAdmissiblePoints(ValueError):
    pass


class MissingDerivatives(ValueError):
    pass


def multi_indices(d, order):
    """All alpha in N_0^d with |alpha| = order, graded lexicographic (descending)."""
    out = []
    for combo in itertools.combinations_with_replacement(range(d), order):
        alpha = [0] * d
        for i in combo:
            alpha[i] += 1
        out.append(tuple(alpha))
    return sorted(set(out), reverse=True)


def _difference_values(f: TargetFunction, r, v, X):
    acc = np.zeros(X.shape[0])
    for j in range(r + 1):
        acc += (-1) ** (r - j) * math.comb(r, j) * f.values(X + j * v)
    return acc


def radial_difference(f: TargetFunction, r: int, v, x, domain: Optional[Domain] = None):
    """sum_j (-1)^(r-j) C(r,j) f(x + j v); checks x in Omega(r v) when a domain is given."""
    v = np.asarray(v, dtype=float).reshape(-1)
    X = np.atleast_2d(np.asarray(x, dtype=float))
    if X.shape[1] != f.dim and f.dim == 1:
        X = X.reshape(-1, 1)
    if domain is not None:
        ok = domain_shrink(domain, r * v)(X)
        if not np.all(ok):
            raise PointOutsideShrunkDomain("x + t*r*v leaves the domain")
    out = _difference_values(f, r, v, X)
    return float(out[0]) if np.ndim(x) <= 1 and out.size == 1 else out


# ---------------------------------------------------------------------------
# Moduli
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModulusQuery:
    """Order, step and sampling of omega_r(f, delta)_p.

    ``directions`` is ``"axis-aligned"``, ``"random"`` (axis directions plus
    ``count`` random unit vectors) or ``"explicit"`` (``explicit`` vectors used
    as given).  Non-explicit directions are scaled by ``delta * s`` for each
    ``s`` in ``scales``.
    """

    order: int
    delta: float
    norm: NormQuery = field(default_factory=NormQuery)
    directions: str = "axis-aligned"
    count: int = 0
    seed: int = 0
    explicit: tuple = ()
    scales: tuple = (1.0, 0.5)

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.directions not in ("axis-aligned", "random", "explicit"):
            raise ValueError(f"unknown direction sampling {self.directions!r}")
        if any(not 0 < s <= 1 for s in self.scales):
            raise ValueError("scales must lie in (0, 1]")

    def with_delta(self, delta):
        return ModulusQuery(self.order, delta, self.norm, self.directions, self.count,
                            self.seed, self.explicit, self.scales)

    def with_order(self, order):
        return ModulusQuery(order, self.delta, self.norm, self.directions, self.count,
                            self.seed, self.explicit, self.scales)

    def direction_set(self, dim):
        if self.directions == "explicit":
            vs = np.atleast_2d(np.asarray(self.explicit, dtype=float))
            if vs.shape[1] != dim:
                raise ValueError("explicit directions have the wrong dimension")
            if np.any(np.linalg.norm(vs, axis=1) > self.delta * (1 + 1e-12)):
                raise ValueError("explicit directions must satisfy |v| <= delta")
            return vs
        units = [np.eye(dim)[i] for i in range(dim)]
        if self.directions == "random" and self.count > 0:
            rng = np.random.default_rng(self.seed)
            g = rng.standard_normal((self.count, dim))
            units.extend(g / np.linalg.norm(g, axis=1, keepdims=True))
        return np.array([self.delta * s * u for s in self.scales for u in units])


@dataclass
class ModulusResult:
    value: float
    directions: np.ndarray
    per_direction: np.ndarray
    admissible: np.ndarray


def modulus(f: TargetFunction, q: ModulusQuery, domain: Domain, detail: bool = False):
    """Sampled omega_r(f, delta)_{p, Omega}: a lower estimate of the true sup.

    Each direction v contributes the sampled norm of Delta_v^r f over the
    sample points lying in Omega(r v).  Admissible-point counts are kept in the
    detailed result.
    """
    pts, weights = sample_plan(domain, q.norm)
    dirs = q.direction_set(domain.dim)
    r = q.order
    vals = np.full(len(dirs), np.nan)
    counts = np.zeros(len(dirs), dtype=int)
    for i, v in enumerate(dirs):
        mask = domain_shrink(domain, r * v)(pts)
        counts[i] = int(mask.sum())
        if counts[i] == 0:
            continue
        diff = _difference_values(f, r, v, pts[mask])
        vals[i] = sampled_norm(diff, None if weights is None else weights[mask], q.norm.p)
    if not np.any(counts):
        raise NoAdmissiblePoints("Omega(r v) contains no sample point for any direction")
    value = float(np.nanmax(vals))
    if detail:
        return ModulusResult(value, dirs, vals, counts)
    return value


def modulus_curve(f, q: ModulusQuery, domain, deltas):
    return np.array([modulus(f, q.with_delta(dl), domain) for dl in deltas])


# ---------------------------------------------------------------------------
# Sobolev seminorms and the derivative bound
# ---------------------------------------------------------------------------

def sobolev_seminorm(f: TargetFunction, r: int, p=math.inf, domain: Domain = None,
                     norm_query: Optional[NormQuery] = None, fd_fallback: bool = True,
                     count_orderings: bool = False):
    """sum over |alpha| = r of ||d^alpha f||_p.

    With ``count_orderings`` every multi-index is weighted by its number of
    orderings r!/alpha!, i.e. the sum runs over ordered derivative tuples.
    """
    domain = domain or Domain.cube(f.dim)
    q = (norm_query or NormQuery()).with_p(p)
    pts, w = sample_plan(domain, q)
    total = 0.0
    for alpha in multi_indices(f.dim, r):
        g = partial_evaluator(f, alpha, fd_fallback)
        if g is None:
            raise MissingDerivatives(f"no derivative for multi-index {alpha}")
        mult = math.factorial(r) / math.prod(math.factorial(a) for a in alpha) if count_orderings else 1.0
        total += mult * sampled_norm(g(pts), w, q.p)
    return total


@dataclass
class DerivativeBoundReport:
    order: int
    deltas: np.ndarray
    moduli: np.ndarray
    seminorm: float
    ratios: np.ndarray
    max_ratio: float
    constant_bound: float
    diverging: bool
    within_constant: bool

    @property
    def passed(self):
        return self.within_constant and not self.diverging


def check_derivative_bound(f: TargetFunction, r: int, deltas: Sequence[float], p=math.inf,
                           domain: Domain = None, modulus_query: Optional[ModulusQuery] = None,
                           slack: float = 0.01) -> DerivativeBoundReport:
    """Ratios omega_r(f, delta) / (delta^r |f|_{W^r_p}) over ``deltas``.

    The rigorous constant for this seminorm convention is r! (1 in one
    dimension); ``diverging`` flags ratios that keep growing as delta shrinks.
    """
    domain = domain or Domain.cube(f.dim)
    mq = modulus_query or ModulusQuery(r, 1.0)
    mq = ModulusQuery(r, 1.0, mq.norm.with_p(p), mq.directions, mq.count, mq.seed,
                      mq.explicit, mq.scales)
    deltas = np.sort(np.asarray(deltas, dtype=float))[::-1]
    semi = sobolev_seminorm(f, r, p, domain, mq.norm)
    mods = modulus_curve(f, mq, domain, deltas)
    pts, _ = sample_plan(domain, mq.norm)
    scale = max(1.0, float(np.max(np.abs(f.values(pts)))))
    mods = np.where(mods <= 1e-12 * scale, 0.0, mods)  # rounding noise, not a difference
    if semi > 0:
        ratios = mods / (deltas ** r * semi)
    else:
        ratios = np.where(mods <= 1e-12 * scale, 0.0, np.inf)
    bound = 1.0 if f.dim == 1 else float(math.factorial(r))
    half = max(1, len(ratios) // 2)
    head = float(np.max(ratios[:half]))
    diverging = bool(len(ratios) > 1 and ratios[-1] > 2 * head * (1 + slack) + 1e-12)
    max_ratio = float(np.max(ratios))
    return DerivativeBoundReport(r, deltas, mods, semi, ratios, max_ratio, bound, diverging,
                                 bool(max_ratio <= bound * (1 + slack)))


# ---------------------------------------------------------------------------
# K-functional
# ---------------------------------------------------------------------------

def _hermite_e(n, t):
    """Probabilists' Hermite polynomial He_n(t)."""
    return np.polynomial.hermite_e.hermeval(t, [0] * n + [1])


def _gaussian_kernels(width, dim, nodes, orders):
    """Quadrature nodes and weights for Gaussian smoothing and its derivatives.

    Returns nodes ``Y`` and a dict alpha -> weights such that
    ``d^alpha g(x) ~ sum_i weights[i] * f(x - Y[i])``.
    """
    t = np.linspace(-6.0, 6.0, nodes)
    base = np.exp(-0.5 * t * t)
    base = base / base.sum()
    per_order = {}
    for m in sorted({a for alpha in orders for a in alpha} | {0}):
        # d^m/dy^m G(y) dy at y = width * t
        per_order[m] = (-1) ** m * _hermite_e(m, t) * base / width ** m
    grids = np.meshgrid(*([t] * dim), indexing="ij")
    Y = width * np.stack([g.reshape(-1) for g in grids], axis=1)
    weights = {}
    for alpha in orders:
        ws = [per_order[a] for a in alpha]
        mesh = np.meshgrid(*ws, indexing="ij")
        w = np.ones_like(mesh[0])
        for m in mesh:
            w = w * m
        weights[alpha] = w.reshape(-1)
    return Y, weights


def _smooth(f: TargetFunction, domain: Domain, pts, width, alphas, nodes):
    Y, weights = _gaussian_kernels(width, domain.dim, nodes, [tuple([0] * domain.dim)] + alphas)
    out = {a: np.zeros(pts.shape[0]) for a in weights}
    chunk = max(1, 200000 // max(1, len(Y)))
    for start in range(0, pts.shape[0], chunk):
        P = pts[start:start + chunk]
        shifted = (P[:, None, :] - Y[None, :, :]).reshape(-1, domain.dim)
        vals = f.values(domain.project(shifted)).reshape(P.shape[0], len(Y))
        for a, w in weights.items():
            out[a][start:start + chunk] = vals @ w
    return out


@dataclass
class KFunctionalResult:
    value: float
    best: str
    candidates: dict


def k_functional_estimate(f: TargetFunction, delta: float, r: int, p=math.inf,
                          domain: Domain = None, widths: Optional[Sequence[float]] = None,
                          norm_query: Optional[NormQuery] = None, include_zero: bool = True,
                          include_self: bool = True, nodes: Optional[int] = None,
                          detail: bool = False):
    """Upper estimate of K(delta, f, X^p, W^r_p) over a finite smoothing family.

    Candidates are Gaussian smoothings g_w of f (f extended outside the domain
    by nearest-point projection), optionally g = 0 and g = f itself.
    """
    domain = domain or Domain.cube(f.dim)
    q = (norm_query or NormQuery(resolution=257 if f.dim == 1 else 49)).with_p(p)
    pts, wq = sample_plan(domain, q)
    fvals = f.values(pts)
    alphas = multi_indices(f.dim, r)
    if widths is None:
        widths = [delta ** (1.0 / r) * 2.0 ** (-i) for i in range(7)] if delta > 0 else []
    if nodes is None:
        nodes = 241 if f.dim == 1 else 41
    candidates = {}
    if include_zero:
        candidates["zero"] = sampled_norm(fvals, wq, q.p)
    if include_self:
        try:
            semi = sobolev_seminorm(f, r, p, domain, q, fd_fallback=False)
            if np.isfinite(semi):
                candidates["self"] = delta * semi
        except MissingDerivatives:
            pass
    for w in widths:
        if w <= 0:
            continue
        sm = _smooth(f, domain, pts, w, alphas, nodes)
        zero = tuple([0] * f.dim)
        dist = sampled_norm(fvals - sm[zero], wq, q.p)
        semi = sum(sampled_norm(sm[a], wq, q.p) for a in alphas)
        candidates[f"gauss(w={w:.6g})"] = dist + delta * semi
    if not candidates:
        raise ValueError("empty smoothing family")
    best = min(candidates, key=candidates.get)
    if detail:
        return KFunctionalResult(candidates[best], best, candidates)
    return candidates[best]


# ---------------------------------------------------------------------------
# Abstract moduli and rate functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AbstractModulus:
    """omega(delta) = delta^alpha, or linear interpolation of monotone samples."""

    form: str = "power"
    exponent: float = 1.0
    samples: tuple = ()

    def __post_init__(self):
        if self.form == "power":
            if not 0 < self.exponent <= 1:
                raise ValueError("power modulus needs exponent in (0, 1]")
        elif self.form == "tabulated":
            xs, ys = np.asarray(self.samples, dtype=float).T
            if xs[0] != 0 or ys[0] != 0:
                raise ValueError("tabulated modulus must start at (0, 0)")
            if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
                raise ValueError("tabulated modulus must be strictly increasing")
        else:
            raise ValueError(f"unknown modulus form {self.form!r}")

    @classmethod
    def power(cls, exponent):
        return cls("power", float(exponent))

    @classmethod
    def tabulated(cls, xs, ys):
        return cls("tabulated", 1.0, tuple(zip(map(float, xs), map(float, ys))))

    def __call__(self, delta):
        delta = np.asarray(delta, dtype=float)
        if self.form == "power":
            out = np.power(delta, self.exponent)
        else:
            xs, ys = np.asarray(self.samples).T
            slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
            out = np.where(delta <= xs[-1], np.interp(delta, xs, ys),
                           ys[-1] + slope * (delta - xs[-1]))
        return float(out) if out.ndim == 0 else out

    @property
    def divergent_at_zero(self):
        """Whether omega(delta)/delta -> infinity as delta -> 0+."""
        return self.form == "power" and self.exponent < 1

    def check_axioms(self, deltas):
        """Check omega(0) = 0, strict increase, and subadditivity on all sampled pairs."""
        d = np.sort(np.asarray(deltas, dtype=float))
        w = self(d)
        pair_sum = self(d[:, None] + d[None, :])
        sub = bool(np.all(pair_sum <= w[:, None] + w[None, :] + 1e-15))
        return {"zero": self(0.0) == 0.0,
                "increasing": bool(np.all(np.diff(w) > 0)),
                "subadditive": sub,
                "divergent_at_zero": self.divergent_at_zero}


@dataclass(frozen=True)
class RateFunction:
    """phi(x) = x^(-r/d) ("power") or [x (1 + log2 x)]^(-r/d) ("log-power")."""

    form: str = "log-power"
    r: int = 1
    d: int = 1

    def __post_init__(self):
        if self.form not in ("power", "log-power"):
            raise ValueError(f"unknown rate form {self.form!r}")

    @property
    def exponent(self):
        return self.r / self.d

    def _base(self, x):
        x = np.asarray(x, dtype=float)
        return x if self.form == "power" else x * (1.0 + np.log2(x))

    def __call__(self, x):
        out = np.power(self._base(x), -self.exponent)
        return float(out) if np.ndim(out) == 0 else out

    def ratio(self, a, b):
        """phi(a) / phi(b) without forming the (possibly tiny) values."""
        out = np.power(self._base(b) / self._base(a), self.exponent)
        return float(out) if np.ndim(out) == 0 else out

    def default_x0(self, lam):
        return lam ** -2 if self.form == "log-power" else 1.0 / lam


@dataclass
class PhiReport:
    c_lambda: dict
    proof_bound_ok: dict
    d2: float
    d2_argmax: int
    decreasing: bool


def check_phi_conditions(phi: RateFunction, lambdas: Sequence[float], n_range) -> PhiReport:
    """Empirical C_lambda for phi(lambda x) <= C phi(x) (x > X0(lambda)) and D_2
    for phi(floor(n/2)) <= D_2 phi(n), over the integers in ``n_range``.

    For the log-power form the bound C_lambda <= (2/lambda)^(r/d) valid for
    x > lambda^-2 is checked as well.
    """
    lo, hi = int(n_range[0]), int(n_range[1])
    n = np.arange(max(lo, 1), hi + 1, dtype=float)
    c_lambda, proof_ok = {}, {}
    for lam in lambdas:
        if not 0 < lam < 1:
            raise ValueError("lambda must lie in (0, 1)")
        xs = n[n > phi.default_x0(lam)]
        if xs.size == 0:
            c_lambda[lam] = float("nan")
            continue
        ratios = phi.ratio(lam * xs, xs)
        c_lambda[lam] = float(np.max(ratios))
        if phi.form == "log-power":
            proof_ok[lam] = bool(np.all(ratios < (2.0 / lam) ** phi.exponent))
    nn = n[n >= 2]
    halves = phi.ratio(np.floor(nn / 2), nn)
    i = int(np.argmax(halves))
    vals = phi(n)
    return PhiReport(c_lambda, proof_ok, float(halves[i]), int(nn[i]),
                     bool(np.all(np.diff(vals) < 0)))
