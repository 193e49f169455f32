"""Domains, grids, target functions, activations and sampled norms.

Everything here is immutable and vectorized: evaluators take an ``(N, d)``
array of points and return ``(N,)`` values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class UnsupportedDerivativeOrder(ValueError):
    pass


class EmptySampleSet(ValueError):
    pass


class NonCubeDomain(ValueError):
    pass


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Domain:
    """A unit cube, an axis-aligned box, or the open unit ball in R^d."""

    kind: str
    dim: int
    bounds: tuple = ()

    def __post_init__(self):
        if self.kind not in ("unit-cube", "unit-ball", "interval-product"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        if self.kind == "unit-cube":
            object.__setattr__(self, "bounds", tuple((0.0, 1.0) for _ in range(self.dim)))
        elif self.kind == "interval-product":
            b = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
            if len(b) != self.dim:
                raise ValueError("need one interval per axis")
            if any(lo >= hi for lo, hi in b):
                raise ValueError("interval bounds need lower < upper")
            object.__setattr__(self, "bounds", b)
        else:
            object.__setattr__(self, "bounds", tuple((-1.0, 1.0) for _ in range(self.dim)))

    @classmethod
    def cube(cls, dim=1):
        return cls("unit-cube", dim)

    @classmethod
    def box(cls, bounds):
        return cls("interval-product", len(bounds), tuple(bounds))

    @classmethod
    def ball(cls, dim=2):
        return cls("unit-ball", dim)

    @property
    def is_box(self):
        return self.kind != "unit-ball"

    @property
    def lower(self):
        return np.array([lo for lo, _ in self.bounds])

    @property
    def upper(self):
        return np.array([hi for _, hi in self.bounds])

    @property
    def volume(self):
        if self.is_box:
            return float(np.prod(self.upper - self.lower))
        d = self.dim
        return math.pi ** (d / 2) / math.gamma(d / 2 + 1)

    def contains(self, x):
        """Membership for the closure of a box, the open ball otherwise."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.is_box:
            return np.all((x >= self.lower) & (x <= self.upper), axis=1)
        return np.einsum("ij,ij->i", x, x) < 1.0

    def project(self, x):
        """Nearest-point map onto the closed domain (used to extend f outside)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.is_box:
            return np.clip(x, self.lower, self.upper)
        r = np.linalg.norm(x, axis=1)
        scale = np.where(r > 1.0 - 1e-12, (1.0 - 1e-12) / np.maximum(r, 1e-300), 1.0)
        return x * scale[:, None]


def domain_shrink(domain: Domain, v) -> Callable[[np.ndarray], np.ndarray]:
    """Predicate for Omega(v): x and the whole segment [x, x+v] lie in Omega.

    Both domain kinds are convex, so checking the two endpoints suffices.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != domain.dim or not np.all(np.isfinite(v)):
        raise ValueError("direction must be a finite vector of the domain dimension")

    def predicate(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return domain.contains(x) & domain.contains(x + v)

    return predicate


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------

ACTIVATION_KINDS = ("logistic", "arctan-sigmoid", "elu", "relu-power", "heaviside")


@dataclass(frozen=True)
class Activation:
    kind: str
    k: int = 1
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in ACTIVATION_KINDS:
            raise ValueError(f"unknown activation {self.kind!r}")
        if self.kind == "relu-power" and int(self.k) < 1:
            raise ValueError("relu-power needs k >= 1")
        if self.kind == "elu" and self.alpha == 0:
            raise ValueError("elu needs alpha != 0")

    @property
    def smooth(self):
        return self.kind in ("logistic", "arctan-sigmoid")

    @property
    def monotone(self):
        if self.kind == "elu":
            return self.alpha > 0
        return True

    def max_order(self, ae=False):
        """Largest supported derivative order (``ae`` allows a.e. derivatives)."""
        if self.kind == "heaviside":
            return 0
        if self.kind == "relu-power":
            return self.k if ae else self.k - 1
        return math.inf

    def __call__(self, x, order=0):
        return activation_eval(self, order, x)

    def label(self):
        if self.kind == "relu-power":
            return f"relu-power(k={self.k})"
        if self.kind == "elu":
            return f"elu(alpha={self.alpha:g})"
        return self.kind


def _logistic(x):
    # Branch-free stable form; exp never overflows.
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


_LOGISTIC_POLYS: list = [np.array([0.0, 1.0])]


def _logistic_poly(order):
    """Coefficients (increasing powers of s) of sigma^(order) as a polynomial in s = sigma."""
    while len(_LOGISTIC_POLYS) <= order:
        p = np.polynomial.Polynomial(_LOGISTIC_POLYS[-1])
        nxt = p.deriv() * np.polynomial.Polynomial([0.0, 1.0, -1.0])
        _LOGISTIC_POLYS.append(nxt.coef)
    return _LOGISTIC_POLYS[order]


def activation_eval(a: Activation, order: int, x, ae: bool = False):
    """sigma^(order)(x), vectorized over ``x``.

    relu-power derivatives at 0 take the right-hand value.  Orders >= k are
    rejected for relu-power unless ``ae`` is set, in which case order k
    returns the a.e. derivative k! * H(x).
    """
    order = int(order)
    if order < 0:
        raise UnsupportedDerivativeOrder("negative derivative order")
    if a.kind == "heaviside" and order > 0:
        raise UnsupportedDerivativeOrder("heaviside cannot be differentiated")
    if order > a.max_order(ae):
        raise UnsupportedDerivativeOrder(
            f"order {order} unsupported for {a.label()}")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0

    if a.kind == "logistic":
        s = _logistic(x)
        out = s if order == 0 else np.polynomial.polynomial.polyval(s, _logistic_poly(order))
    elif a.kind == "arctan-sigmoid":
        if order == 0:
            out = 0.5 + np.arctan(x) / math.pi
        else:
            y = np.arctan(x)
            out = (math.factorial(order - 1) * np.cos(y) ** order
                   * np.sin(order * (y + math.pi / 2)) / math.pi)
    elif a.kind == "elu":
        neg = a.alpha * (np.expm1(np.minimum(x, 0.0)) if order == 0 else np.exp(np.minimum(x, 0.0)))
        if order == 0:
            pos = x
        elif order == 1:
            pos = np.ones_like(x)
        else:
            pos = np.zeros_like(x)
        out = np.where(x >= 0, pos, neg)
    elif a.kind == "relu-power":
        k = a.k
        coef = math.factorial(k) / math.factorial(k - order)
        xp = np.maximum(x, 0.0)
        out = np.where(x >= 0, coef * xp ** (k - order), 0.0)
    else:
        out = np.where(x >= 0, 1.0, 0.0)
    return float(out) if scalar else out


# ---------------------------------------------------------------------------
# Target functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TargetFunction:
    """A vectorized real function on R^d.

    ``derivative(alpha)`` returns an evaluator for the partial derivative of
    multi-index ``alpha`` or ``None`` when no closed form is known.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    dim: int
    label: str = "f"
    derivative: Optional[Callable[[tuple], Optional[Callable]]] = None
    smoothness: dict = field(default_factory=dict)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            return float(self.values(x.reshape(1, 1))[0])
        if x.ndim == 1:
            if self.dim == 1:
                return self.values(x[:, None])
            return float(self.values(x[None, :])[0])
        return self.values(x)

    def values(self, X):
        return np.asarray(self.evaluator(np.atleast_2d(X)), dtype=float).reshape(-1)

    def has_derivative(self, alpha):
        return self.derivative is not None and self.derivative(tuple(alpha)) is not None

    def scaled(self, c):
        c = float(c)
        deriv = None
        if self.derivative is not None:
            def deriv(alpha, _d=self.derivative):
                g = _d(alpha)
                return None if g is None else (lambda X: c * np.asarray(g(X), dtype=float))
        return TargetFunction(lambda X: c * self.values(X), self.dim,
                              f"{c:g}*{self.label}", deriv, dict(self.smoothness))

    def __add__(self, other: "TargetFunction"):
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        deriv = None
        if self.derivative is not None and other.derivative is not None:
            def deriv(alpha):
                g, h = self.derivative(alpha), other.derivative(alpha)
                if g is None or h is None:
                    return None
                return lambda X: np.asarray(g(X), dtype=float) + np.asarray(h(X), dtype=float)
        return TargetFunction(lambda X: self.values(X) + other.values(X), self.dim,
                              f"({self.label}+{other.label})", deriv)


def constant_function(value, dim=1):
    value = float(value)

    def deriv(alpha):
        if sum(alpha) == 0:
            return lambda X: np.full(np.atleast_2d(X).shape[0], value)
        return lambda X: np.zeros(np.atleast_2d(X).shape[0])

    return TargetFunction(lambda X: np.full(np.atleast_2d(X).shape[0], value), dim,
                          f"const({value:g})", deriv, {"differentiability": math.inf})


def check_derivatives(f: TargetFunction, alphas, points, h=1e-5, tol=1e-5):
    """Largest disagreement between analytic partials and central differences.

    Only first-order partials of the given derivative evaluators are probed
    (each ``alpha`` is compared with a central difference of the partial of
    order ``alpha - e_j``).
    """
    worst = 0.0
    points = np.atleast_2d(points)
    for alpha in alphas:
        alpha = tuple(alpha)
        j = next(i for i, a in enumerate(alpha) if a > 0)
        lower = list(alpha)
        lower[j] -= 1
        base = f.values if sum(lower) == 0 else f.derivative(tuple(lower))
        e = np.zeros(f.dim)
        e[j] = h
        fd = (np.asarray(base(points + e)) - np.asarray(base(points - e))) / (2 * h)
        exact = np.asarray(f.derivative(alpha)(points), dtype=float)
        worst = max(worst, float(np.max(np.abs(fd - exact) / (1.0 + np.abs(exact)))))
    return worst, worst <= tol


# ---------------------------------------------------------------------------
# Grids and sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    domain: Domain
    tau: int

    def __post_init__(self):
        if not self.domain.is_box:
            raise NonCubeDomain("grids live on cubes or boxes only")
        if int(self.tau) < 1:
            raise ValueError("tau must be >= 1")

    @property
    def size(self):
        return (self.tau + 1) ** self.domain.dim

    @property
    def step(self):
        return 1.0 / self.tau


def grid_points(g: GridSpec) -> np.ndarray:
    """Lexicographic tensor grid {j/tau}^d mapped affinely into the box."""
    if not g.domain.is_box:
        raise NonCubeDomain("grids live on cubes or boxes only")
    t = np.arange(g.tau + 1) / g.tau
    lo, hi = g.domain.lower, g.domain.upper
    axes = [lo[i] + (hi[i] - lo[i]) * t for i in range(g.domain.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


@dataclass(frozen=True)
class NormQuery:
    """Norm index ``p`` (``math.inf`` for the sup norm) plus a sampling plan.

    ``sampling`` is ``"tensor-grid"`` (``resolution`` points per axis) or
    ``"monte-carlo"`` (``count`` points drawn with ``seed``).
    """

    p: float = math.inf
    sampling: str = "tensor-grid"
    resolution: int = 257
    count: int = 4096
    seed: int = 0

    def __post_init__(self):
        if not (self.p == math.inf or self.p >= 1):
            raise ValueError("need 1 <= p <= inf")
        if self.sampling not in ("tensor-grid", "monte-carlo"):
            raise ValueError(f"unknown sampling {self.sampling!r}")
        if self.sampling == "tensor-grid" and self.resolution < 2:
            raise ValueError("resolution must be >= 2")
        if self.sampling == "monte-carlo" and self.count < 1:
            raise ValueError("monte-carlo count must be >= 1")

    def with_p(self, p):
        return NormQuery(p, self.sampling, self.resolution, self.count, self.seed)


def sample_plan(domain: Domain, q: NormQuery):
    """Sample points and quadrature weights for ``q`` on ``domain``.

    Sup norms on grids use the closed grid (boundary included); integrals use
    midpoint cells.  Monte-Carlo weights are ``vol / count`` after rejection.
    Weights are ``None`` for the sup norm.
    """
    d = domain.dim
    if q.sampling == "tensor-grid":
        m = q.resolution
        lo, hi = domain.lower, domain.upper
        if q.p == math.inf:
            axes = [np.linspace(lo[i], hi[i], m) for i in range(d)]
        else:
            axes = [lo[i] + (hi[i] - lo[i]) * (np.arange(m) + 0.5) / m for i in range(d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([a.reshape(-1) for a in mesh], axis=1)
        cell = float(np.prod((hi - lo) / m))
        if not domain.is_box:
            pts = pts[domain.contains(pts)]
        weights = None if q.p == math.inf else np.full(pts.shape[0], cell)
    else:
        rng = np.random.default_rng(q.seed)
        lo, hi = domain.lower, domain.upper
        chunks, have = [], 0
        while have < q.count:
            cand = rng.uniform(lo, hi, size=(max(2 * (q.count - have), 16), d))
            cand = cand[domain.contains(cand)]
            chunks.append(cand)
            have += cand.shape[0]
        pts = np.concatenate(chunks)[: q.count]
        weights = None if q.p == math.inf else np.full(pts.shape[0], domain.volume / q.count)
    if pts.shape[0] == 0:
        raise EmptySampleSet("sampling plan produced no points in the domain")
    return pts, weights


def sampled_norm(values, weights, p):
    """The norm of sampled ``values``; shared by every error computation."""
    values = np.abs(np.asarray(values, dtype=float))
    if values.size == 0:
        raise EmptySampleSet("no sample values")
    if p == math.inf:
        return float(np.max(values))
    if p == 1:
        return float(np.sum(weights * values))
    if p == 2:
        return float(math.sqrt(np.sum(weights * values * values)))
    return float(np.sum(weights * values ** p) ** (1.0 / p))


def norm(f: TargetFunction, domain: Domain, q: NormQuery) -> float:
    pts, w = sample_plan(domain, q)
    return sampled_norm(f.values(pts), w, q.p)


def random_interior_points(domain: Domain, count, seed=0, margin=0.05):
    rng = np.random.default_rng(seed)
    if domain.is_box:
        lo, hi = domain.lower, domain.upper
        span = hi - lo
        return rng.uniform(lo + margin * span, hi - margin * span, size=(count, domain.dim))
    pts = []
    while len(pts) < count:
        c = rng.uniform(-1, 1, size=domain.dim)
        if c @ c < (1 - margin) ** 2:
            pts.append(c)
    return np.array(pts)


def as_points(x: Sequence, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1 and dim == 1:
        return x[:, None]
    return np.atleast_2d(x)
