"""Resonance functions, shattering searches, VC-chain arithmetic and gliding humps."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence

import mpmath
import numpy as np
from scipy.optimize import minimize

from .bestapprox import (BestApproxResult, NetworkParams, SolverConfig, best_approx, net_eval,
                         random_inner_weights)
from .core import (Activation, Domain, GridSpec, NormQuery, TargetFunction, activation_eval,
                   grid_points, sample_plan, sampled_norm)
from .smoothness import AbstractModulus, ModulusQuery, RateFunction, modulus


def bump(x):
    """exp(1 - 1/(1 - x^2)) on |x| < 1, zero elsewhere."""
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1.0
    safe = np.where(inside, x, 0.0)
    out = np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe * safe)), 0.0)
    return float(out) if out.ndim == 0 else out


def bump_derivative(x):
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1.0
    safe = np.where(inside, x, 0.0)
    one = 1.0 - safe * safe
    return np.where(inside, bump(safe) * (-2.0 * safe / (one * one)), 0.0)


BUMP_LIPSCHITZ = float(np.max(np.abs(bump_derivative(np.linspace(-1, 1, 200001)))))


# ---------------------------------------------------------------------------
# Signed grids and resonance functions
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class SignedGrid:
    """Signs s_z on the grid {0, 1/tau, ..., 1}^d, stored as a (tau+1,)*d array."""

    grid: GridSpec
    signs: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.signs, dtype=int)
        shape = (self.grid.tau + 1,) * self.grid.domain.dim
        if s.size != int(np.prod(shape)):
            raise ValueError(f"need {int(np.prod(shape))} signs, got {s.size}")
        s = s.reshape(shape)
        if not np.all(np.abs(s) == 1):
            raise ValueError("signs must be +1 or -1")
        self.signs = s

    @classmethod
    def alternating(cls, tau: int, dim: int = 1, first: int = 1):
        idx = np.indices((tau + 1,) * dim).sum(axis=0)
        return cls(GridSpec(Domain.cube(dim), tau), first * (-1) ** idx)

    @classmethod
    def constant(cls, tau: int, dim: int = 1, sign: int = 1):
        return cls(GridSpec(Domain.cube(dim), tau), np.full((tau + 1,) * dim, sign))

    @property
    def tau(self):
        return self.grid.tau

    @property
    def dim(self):
        return self.grid.domain.dim

    def points(self):
        return grid_points(self.grid)

    def flat_signs(self):
        return self.signs.reshape(-1)

    def label(self):
        return "".join("+" if s > 0 else "-" for s in self.flat_signs())


class ResonanceFunction:
    """h(x) = sum_z s_z prod_k bump(2 tau (x_k - z_k)).

    The supports are cubes of half-width 1/(2 tau) around the grid points and
    meet only on their faces, so the sum is evaluated through the nearest grid
    point alone.
    """

    def __init__(self, sg: SignedGrid):
        self.signed_grid = sg
        self.scale = 2.0 * sg.tau

    @property
    def dim(self):
        return self.signed_grid.dim

    @property
    def tau(self):
        return self.signed_grid.tau

    def values(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        tau = self.tau
        j = np.clip(np.rint(X * tau), 0, tau).astype(int)
        prod = np.ones(X.shape[0])
        for k in range(self.dim):
            prod = prod * bump(self.scale * (X[:, k] - j[:, k] / tau))
        return self.signed_grid.signs[tuple(j.T)] * prod

    def __call__(self, x):
        X = np.asarray(x, dtype=float)
        if X.ndim <= 1 and X.size == self.dim:
            return float(self.values(X.reshape(1, -1))[0])
        if self.dim == 1:
            return self.values(X.reshape(-1, 1))
        return self.values(X)

    def sample_resolution(self, per_cell: int = 16):
        """Tensor-grid resolution whose nodes contain every resonance grid point."""
        return self.tau * per_cell + 1

    def sup_norm(self, per_cell: int = 16):
        q = NormQuery(math.inf, resolution=self.sample_resolution(per_cell))
        X, w = sample_plan(Domain.cube(self.dim), q)
        return sampled_norm(self.values(X), w, math.inf)

    def as_target(self, label=None):
        return TargetFunction(self.values, self.dim, label or f"resonance(tau={self.tau},{self.signed_grid.label()[:24]})")


def resonance_function(sg: SignedGrid) -> ResonanceFunction:
    return ResonanceFunction(sg)


@dataclass
class ModulusBoundReport:
    r: int
    tau: int
    deltas: list
    omegas: list
    ratios: list
    C2: float
    lipschitz_bound: float


def resonance_modulus_bound(rf: ResonanceFunction, r: int, deltas: Sequence[float], p=math.inf,
                            per_cell: int = 16) -> ModulusBoundReport:
    """omega_r(h, delta) against min{1, (2 tau delta)^r}; C2 is the largest ratio.

    The reference scale comes from the chain rule: every r-th partial of h is
    O((2 tau)^r), while ||h|| <= 1 caps the modulus by 2^r.
    """
    q = NormQuery(p, resolution=rf.sample_resolution(per_cell))
    target = rf.as_target()
    omegas, ratios = [], []
    for delta in deltas:
        om = modulus(target, ModulusQuery(r, float(delta), q), Domain.cube(rf.dim))
        ref = min(1.0, (rf.scale * delta) ** r)
        omegas.append(om)
        ratios.append(om / ref)
    return ModulusBoundReport(r, rf.tau, list(map(float, deltas)), omegas, ratios,
                              float(max(ratios)), BUMP_LIPSCHITZ)


def resonance_constant_sweep(taus: Sequence[int], r: int, dim: int = 1, fractions=(0.125, 0.25, 0.5, 1.0, 2.0)):
    """Measured C2 for alternating grids across tau, with deltas scaled as f / (2 tau)."""
    rows = []
    for tau in taus:
        rf = resonance_function(SignedGrid.alternating(tau, dim))
        rep = resonance_modulus_bound(rf, r, [f / (2 * tau) for f in fractions])
        rows.append((tau, rep.C2))
    return rows


# ---------------------------------------------------------------------------
# Shattering
# ---------------------------------------------------------------------------

PROVEN = "PROVEN"
HEURISTIC = "HEURISTIC"


def sign_changes(points, signs) -> int:
    order = np.argsort(np.asarray(points, dtype=float).reshape(-1))
    s = np.asarray(signs)[order]
    return int(np.sum(s[1:] != s[:-1]))


def _monotone_obstruction(n, activation: Activation, points, signs) -> bool:
    """True when n = 1, d = 1 and a monotone ridge cannot produce the pattern.

    a sigma(w x + c) + a0 is monotone in x, so it changes sign at most once.
    """
    P = np.atleast_2d(points)
    return n == 1 and P.shape[1] == 1 and activation.monotone and sign_changes(P[:, 0], signs) > 1


@dataclass
class ShatterResult:
    fit: bool
    margin: float
    params: Optional[NetworkParams]
    restarts: int
    certificate: Optional[str] = None
    margins: list = field(default_factory=list)


def shatter_fit(n: int, activation: Activation, points, signs, cfg: SolverConfig = None,
                offset: bool = False, margin_target: float = 0.1) -> ShatterResult:
    """Search g in M_n (plus a constant if ``offset``) with s_i g(x_i) >= margin_target.

    Multi-start L-BFGS-B on a squared hinge loss.  Failure is a value: the
    best margin min_i s_i g(x_i) is reported.  When the pattern is impossible
    for the monotone n = 1, d = 1 class the failure is marked PROVEN.
    """
    cfg = cfg or SolverConfig(restarts=16, iterations=500)
    X = np.atleast_2d(np.asarray(points, dtype=float))
    if X.shape[0] == 1 and X.shape[1] != 1 and np.ndim(points) == 1 and len(signs) == X.shape[1]:
        X = X.reshape(-1, 1)
    s = np.asarray(signs, dtype=float).reshape(-1)
    if X.shape[0] != s.size:
        raise ValueError("one sign per point")
    if len({tuple(p) for p in X}) != X.shape[0]:
        raise ValueError("points must be distinct")
    d = X.shape[1]
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    domain = Domain.box(list(zip(lo - 0.05 * span, hi + 0.05 * span)))
    target = 2.0 * margin_target

    def unpack(theta):
        a, W, c = theta[:n], theta[n:n + n * d].reshape(n, d), theta[n + n * d:n + n * d + n]
        off = theta[-1] if offset else 0.0
        return a, W, c, off

    def loss(theta):
        a, W, c, off = unpack(theta)
        Z = X @ W.T + c
        S = activation_eval(activation, 0, Z)
        g = S @ a + off
        slack = np.maximum(0.0, target - s * g)
        val = float(np.sum(slack ** 2))
        v = -2.0 * slack * s
        A = a * activation_eval(activation, 1, Z, ae=True)
        grad = np.concatenate([S.T @ v, ((A * v[:, None]).T @ X).reshape(-1), A.T @ v])
        if offset:
            grad = np.append(grad, v.sum())
        return val, grad

    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    best_margin, best_params, margins = -math.inf, None, []
    for ss in seeds:
        rng = np.random.default_rng(ss)
        W, c = random_inner_weights(rng, n, domain, X, cfg.w_scale)
        a = rng.standard_normal(n)
        theta = np.concatenate([a, W.reshape(-1), c] + ([[0.0]] if offset else []))
        with np.errstate(over="ignore", invalid="ignore"):
            res = minimize(loss, theta, jac=True, method="L-BFGS-B",
                           options={"maxiter": cfg.iterations, "ftol": 1e-15, "gtol": 1e-12})
        if not np.all(np.isfinite(res.x)):
            margins.append(math.nan)
            continue
        a, W, c, off = unpack(res.x)
        params = NetworkParams(a, W, c, activation, off)
        margin = float(np.min(s * net_eval(params, X)))
        margins.append(margin)
        if margin > best_margin:
            best_margin, best_params = margin, params
        if margin >= margin_target:
            break
    fit = best_margin >= margin_target
    cert = None
    if not fit:
        cert = PROVEN if _monotone_obstruction(n, activation, X, s) else HEURISTIC
    return ShatterResult(fit, best_margin, best_params, len(margins), cert, margins)


def dense_sign_search(activation: Activation, points, signs, box=(-50.0, 50.0), counts=(101, 101, 101),
                      offset: bool = False) -> int:
    """Number of (a, w, c) grid nodes whose width-1 network matches every sign (d = 1)."""
    x = np.asarray(points, dtype=float).reshape(-1)
    s = np.asarray(signs, dtype=float).reshape(-1)
    A = np.linspace(box[0], box[1], counts[0])
    Wv = np.linspace(box[0], box[1], counts[1])
    Cv = np.linspace(box[0], box[1], counts[2])
    hits = 0
    for w in Wv:
        S = activation_eval(activation, 0, w * x[None, :] + Cv[:, None])  # (nc, N)
        G = A[:, None, None] * S[None, :, :]  # (na, nc, N)
        hits += int(np.sum(np.all(np.sign(G) == s, axis=2)))
    return hits


def _candidate_assignments(count: int, dims, limit: int, rng):
    """Alternating patterns first, then all (<= limit points) or random ones."""
    alt = ((-1) ** np.indices(dims).sum(axis=0)).reshape(-1)
    yield alt
    yield -alt
    if count <= limit:
        for bits in itertools.product((1, -1), repeat=count):
            yield np.array(bits)
    else:
        while True:
            yield rng.choice((-1, 1), size=count)


@dataclass
class UnshatterableResult:
    signed_grid: SignedGrid
    attempt: ShatterResult
    tried: int
    certificate: str


def find_unshatterable_signs(n: int, activation: Activation, grid: GridSpec, cfg: SolverConfig = None,
                             exhaustive_limit: int = 20, max_tries: int = 256, seed: int = 0,
                             margin_target: float = 0.1) -> Optional[UnshatterableResult]:
    """First sign assignment on the grid that shatter_fit cannot realize, or None."""
    pts = grid_points(grid)
    dims = (grid.tau + 1,) * grid.domain.dim
    rng = np.random.default_rng(seed)
    seen = set()
    tried = 0
    for signs in _candidate_assignments(pts.shape[0], dims, exhaustive_limit, rng):
        key = tuple(int(v) for v in signs)
        if key in seen:
            continue
        seen.add(key)
        tried += 1
        res = shatter_fit(n, activation, pts, signs, cfg, margin_target=margin_target)
        if not res.fit:
            return UnshatterableResult(SignedGrid(grid, signs.reshape(dims)), res, tried, res.certificate)
        if tried >= max_tries:
            break
    return None


# ---------------------------------------------------------------------------
# VC-dimension arithmetic
# ---------------------------------------------------------------------------

def bartlett_bound(n: int, d: int, D) -> float:
    """2 (nd + 2n + 1) log2(24 e (nd + 2n + 1) D), in 50-digit arithmetic."""
    if n < 1 or d < 1 or D < 1:
        raise ValueError("need n, d, D >= 1")
    with mpmath.workdps(50):
        w = mpmath.mpf(n * d + 2 * n + 1)
        return float(2 * w * mpmath.log(24 * mpmath.e * w * mpmath.mpf(D), 2))


def _as_fraction(E):
    return Fraction(E) if isinstance(E, (int, Fraction)) else Fraction(str(E))


def grid_size_D(n: int, d: int, E) -> int:
    """floor((E n (1 + log2 n))^(1/d)) without boundary rounding errors."""
    if n < 2 or d < 1:
        raise ValueError("need n >= 2, d >= 1")
    Ef = _as_fraction(E)
    if Ef <= 1:
        raise ValueError("need E > 1")
    if n & (n - 1) == 0:
        V = Ef * n * (1 + (n.bit_length() - 1))  # exact rational
        x = int(float(V) ** (1.0 / d))
        while x ** d > V:
            x -= 1
        while (x + 1) ** d <= V:
            x += 1
        return x
    # log2 n is irrational here, so V is never an exact d-th power of an integer
    with mpmath.workdps(60):
        V = mpmath.mpf(Ef.numerator) / Ef.denominator * n * (1 + mpmath.log(n, 2))
        x = int(mpmath.floor(mpmath.root(V, d)))
        while mpmath.mpf(x) ** d > V:
            x -= 1
        while mpmath.mpf(x + 1) ** d <= V:
            x += 1
    return x


def _grid_size_vector(n, d, E):
    """Vectorized D(n); roots within rounding distance of an integer are recomputed exactly."""
    V = float(E) * n * (1.0 + np.log2(n))
    root = V ** (1.0 / d)
    D = np.floor(root).astype(np.int64)
    near = np.abs(root - np.rint(root)) <= 1e-12 * np.maximum(root, 1.0)
    for i in np.nonzero(near)[0]:
        D[i] = grid_size_D(int(n[i]), d, E)
    return D


CHAIN_STEPS = ("L1<=L2", "L2<=L3", "L3<=L4", "L4<L5", "L5<=L6")


@dataclass
class VCChainReport:
    n: np.ndarray
    C_d: float
    E: float
    d: int
    e_condition: bool
    e_condition_margin: float
    D: np.ndarray
    Dd: np.ndarray
    bartlett: np.ndarray
    steps: dict
    growth_cond: np.ndarray
    n0: Optional[int]
    rtol: float = 1e-12

    @property
    def final_step(self):
        return self.steps["L5<=L6"]

    @property
    def per_n_ok(self):
        ok = self.growth_cond.copy()
        for v in self.steps.values():
            ok &= v
        return ok

    @property
    def verdict(self):
        return "pass" if self.e_condition and bool(np.all(self.per_n_ok)) else "fail"

    def failures(self):
        out = {"e_condition": None if self.e_condition else "fail"}
        for k, v in self.steps.items():
            bad = self.n[~v]
            out[k] = int(bad[0]) if bad.size else None
        bad = self.n[~self.growth_cond]
        out["growth_cond"] = int(bad[0]) if bad.size else None
        return out


def verify_corsharp_chain(C_d: float, E, n_range, d: int = 1, rtol: float = 1e-12) -> VCChainReport:
    """Check the condition on E and every line of the VC-dimension chain over ``n_range``.

    Lines, with L = log2 n:
      L1 = C n [L + log2(E n (1 + L)) / d]
      L2 = C n [2L + log2 E + log2(2L)]
      L3 = C n [3L + log2 E + 1]
      L4 = 4 C n L (1 + log2 E)
      L5 = E n L
      L6 = D(n)^d
    Non-strict steps tolerate a relative 1e-12 for floating rounding; the
    condition on E and the last step are decided exactly.  The growth condition
    2 D(4n) <= 2 (12 E)^(1/d) / phi(n), phi(x) = (x (1 + log2 x))^(-1/d), is
    checked as D(4n)^d <= 12 E n (1 + L).
    """
    n = np.asarray(list(n_range) if not isinstance(n_range, np.ndarray) else n_range, dtype=np.int64)
    if n.size == 0 or n.min() < 2:
        raise ValueError("n-range must lie in [2, inf)")
    Ef = _as_fraction(E)
    Cf = _as_fraction(C_d)
    with mpmath.workdps(50):
        lhs = 4 * mpmath.mpf(Cf.numerator) / Cf.denominator * (1 + mpmath.log(mpmath.mpf(Ef.numerator) / Ef.denominator, 2))
        rhs = mpmath.mpf(Ef.numerator) / Ef.denominator
        e_condition = bool(lhs < rhs)
        margin = float(rhs - lhs)
    E_ = float(E)
    C = float(C_d)
    nf = n.astype(float)
    L = np.log2(nf)
    lE = math.log2(E_)
    L1 = C * nf * (L + np.log2(E_ * nf * (1.0 + L)) / d)
    L2 = C * nf * (2 * L + lE + np.log2(2 * L))
    L3 = C * nf * (3 * L + lE + 1.0)
    L4 = 4 * C * nf * L * (1.0 + lE)
    L5 = E_ * nf * L
    D = _grid_size_vector(n, d, E)
    Dd = D.astype(float) ** d

    def le(a, b):
        return a <= b * (1 + rtol)

    steps = {"L1<=L2": le(L1, L2), "L2<=L3": le(L2, L3), "L3<=L4": le(L3, L4), "L4<L5": L4 < L5}
    last = L5 <= Dd
    close = np.abs(L5 - Dd) <= 1e-12 * Dd
    for i in np.nonzero(close)[0]:  # decide exactly: E n log2 n <= D^d
        ni = int(n[i])
        with mpmath.workdps(60):
            last[i] = bool(rhs * ni * mpmath.log(ni, 2) <= mpmath.mpf(int(D[i])) ** d)
    steps["L5<=L6"] = last
    D4 = _grid_size_vector(4 * n, d, E)
    growth_cond = D4.astype(float) ** d <= 12.0 * E_ * nf * (1.0 + L) * (1 + rtol)
    w = nf * d + 2 * nf + 1
    bart = 2 * w * np.log2(24 * math.e * w * D)

    ok = growth_cond.copy()
    for v in steps.values():
        ok &= v
    # smallest n from which every later n in the range passes
    n0 = None
    if ok.size and ok[-1]:
        bad = np.nonzero(~ok)[0]
        n0 = int(n[bad[-1] + 1]) if bad.size else int(n[0])
    return VCChainReport(n, C, E_, d, e_condition, margin, D, Dd, bart, steps, growth_cond, n0, rtol)


# ---------------------------------------------------------------------------
# Gliding hump
# ---------------------------------------------------------------------------

class NonIncreasingIndexSequence(ValueError):
    pass


@dataclass
class GlidingHumpSeries:
    indices: list
    weights: list
    components: list
    r: int
    modulus: AbstractModulus
    rate: RateFunction

    @property
    def m(self):
        return len(self.indices)

    def term(self, j):
        w, h = self.weights[j], self.components[j]
        return lambda X: w * h.values(X)

    def term_sup(self, j):
        """Exact sup-norm of the j-th term: each component attains |h| = 1 at its grid points."""
        h = self.components[j]
        pts = h.signed_grid.points()
        return float(np.max(np.abs(self.weights[j] * h.values(pts))))

    def partial(self, m):
        idx = range(min(m, self.m))

        def ev(X):
            X = np.atleast_2d(np.asarray(X, dtype=float))
            out = np.zeros(X.shape[0])
            for j in idx:
                out += self.weights[j] * self.components[j].values(X)
            return out

        return TargetFunction(ev, self.components[0].dim, f"gliding-hump(m={min(m, self.m)})")

    def weight_sum(self):
        return float(sum(self.weights))

    def to_dict(self):
        return {"indices": list(self.indices), "weights": list(self.weights), "r": self.r,
                "taus": [h.tau for h in self.components]}


def hump_weights(indices, omega: AbstractModulus, phi: RateFunction, r: int):
    return [float(omega(phi(n) ** r)) for n in indices]


def gliding_hump_compose(components: Sequence[ResonanceFunction], omega: AbstractModulus,
                         phi: RateFunction, r: int, m: Optional[int] = None,
                         indices: Optional[Sequence[int]] = None) -> GlidingHumpSeries:
    """f_m = sum_{j <= m} omega(phi(n_j)^r) h_{n_j}, with n_j = 4^j by default."""
    m = len(components) if m is None else m
    if m < 1 or m > len(components):
        raise ValueError("truncation must be between 1 and the number of components")
    indices = [4 ** (j + 1) for j in range(m)] if indices is None else list(indices)[:m]
    if len(indices) < m:
        raise ValueError("not enough indices")
    for a, b in zip(indices, indices[1:]):
        if b < 4 * a:
            raise NonIncreasingIndexSequence(f"need n_(j+1) >= 4 n_j, got {a} -> {b}")
    weights = hump_weights(indices, omega, phi, r)
    if any(b >= a for a, b in zip(weights, weights[1:])):
        raise ValueError("weights must be strictly decreasing")
    return GlidingHumpSeries(list(indices), weights, list(components[:m]), r, omega, phi)


def default_resonance_component(width: int, dim: int = 1) -> ResonanceFunction:
    """Resonance element meant to resist networks of the given width.

    Width 1 in one variable uses the three-point pattern (+, -, +), which no
    monotone ridge can follow.  Larger widths use a fully alternating grid with
    tau = 4 * width (heuristic).
    """
    if width == 1 and dim == 1:
        return resonance_function(SignedGrid.alternating(2, 1))
    return resonance_function(SignedGrid.alternating(4 * width, dim))


@dataclass
class ResonanceConditionReport:
    sup_norms: list
    C2: list
    lower: list
    slack: float
    certificates: list

    @property
    def passed(self):
        return (all(s <= 1.0 for s in self.sup_norms)
                and all(v >= 1.0 - self.slack for v in self.lower))


def check_resonance_conditions(components: Sequence[ResonanceFunction], widths: Sequence[int],
                               activation: Activation, r: int = 1,
                               deltas: Sequence[float] = (0.01, 0.03, 0.1, 0.3),
                               cfg: SolverConfig = None, slack: float = 0.1) -> ResonanceConditionReport:
    """Uniform bound, modulus bound and resistance to networks of the given widths.

    The lower-bound entry is the largest |h - g| over the grid points for the
    best network g found with the given width.
    """
    cfg = cfg or SolverConfig(restarts=16)
    sups, c2s, lows, certs = [], [], [], []
    for h, width in zip(components, widths):
        sups.append(h.sup_norm())
        c2s.append(resonance_modulus_bound(h, r, deltas).C2)
        q = NormQuery(math.inf, resolution=h.sample_resolution())
        res = best_approx(h.as_target(), width, activation, math.inf, Domain.cube(h.dim),
                          SolverConfig(**{**cfg.__dict__, "norm": q}))
        pts = h.signed_grid.points()
        lows.append(float(np.max(np.abs(h.values(pts) - net_eval(res.params, pts)))))
        monotone = width == 1 and h.dim == 1 and activation.monotone and \
            sign_changes(pts[:, 0], h.signed_grid.flat_signs()) > 1
        certs.append(PROVEN if monotone else HEURISTIC)
    return ResonanceConditionReport(sups, c2s, lows, slack, certs)
