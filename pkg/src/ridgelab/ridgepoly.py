"""Polynomial spaces, ridge decompositions and their realization by networks."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from .bestapprox import NetworkParams, net_derivative, net_eval
from .core import (Activation, Domain, NormQuery, TargetFunction, UnsupportedDerivativeOrder,
                   activation_eval, sample_plan, sampled_norm)
from .smoothness import multi_indices

MultiIndex = Tuple[int, ...]


class RankDeficient(ValueError):
    pass


class UnderdeterminedSample(ValueError):
    pass


class DerivativeVanishes(ValueError):
    pass


class TargetUnreachable(RuntimeError):
    """Raised when no network within the budget meets the target; carries the best attempt."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


def graded_indices(d: int, k: int):
    """All multi-indices with |alpha| <= k in graded lexicographic order."""
    out = []
    for m in range(k + 1):
        out.extend(multi_indices(d, m))
    return out


def _monomials(X, alphas):
    X = np.atleast_2d(X)
    return np.stack([np.prod(X ** np.array(a), axis=1) for a in alphas], axis=1)


@dataclass
class Polynomial:
    dim: int
    degree: int
    coeffs: Dict[MultiIndex, float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for a, v in self.coeffs.items():
            a = tuple(int(t) for t in a)
            if len(a) != self.dim or min(a) < 0:
                raise ValueError(f"bad multi-index {a}")
            if sum(a) > self.degree:
                raise ValueError(f"|{a}| exceeds degree bound {self.degree}")
            if v != 0:
                clean[a] = clean.get(a, 0.0) + float(v)
        self.coeffs = clean

    @classmethod
    def from_univariate(cls, coefs):
        """Coefficients in increasing powers of x."""
        return cls(1, max(len(coefs) - 1, 0), {(i,): c for i, c in enumerate(coefs)})

    @property
    def actual_degree(self):
        return max((sum(a) for a in self.coeffs), default=0)

    def homogeneous_part(self, l):
        return {a: v for a, v in self.coeffs.items() if sum(a) == l}

    def __call__(self, x):
        X = np.atleast_2d(np.asarray(x, dtype=float))
        if X.shape[1] != self.dim and self.dim == 1:
            X = X.reshape(-1, 1)
        out = np.zeros(X.shape[0])
        for a, v in self.coeffs.items():
            out += v * np.prod(X ** np.array(a), axis=1)
        return out

    def derivative(self, alpha):
        alpha = tuple(alpha)
        res = {}
        for a, v in self.coeffs.items():
            if all(ai >= bi for ai, bi in zip(a, alpha)):
                factor = math.prod(math.perm(ai, bi) for ai, bi in zip(a, alpha))
                res[tuple(ai - bi for ai, bi in zip(a, alpha))] = v * factor
        return Polynomial(self.dim, max(self.degree - sum(alpha), 0), res)

    def as_target(self, label=None):
        return TargetFunction(lambda X: self(X), self.dim, label or f"poly(deg={self.actual_degree})",
                              derivative=lambda alpha: self.derivative(alpha))

    def coefficient_norm(self):
        return math.sqrt(sum(v * v for v in self.coeffs.values()))


def dim_homogeneous(d: int, k: int) -> int:
    """dim H_k = C(d+k-1, k); checked against the coarse bound (k+1)^(d-1)."""
    if d < 1 or k < 0:
        raise ValueError("need d >= 1, k >= 0")
    s = math.comb(d + k - 1, k)
    assert s <= (k + 1) ** (d - 1)
    return s


def integer_root(n: int, d: int) -> int:
    """floor(n^(1/d)) without floating-point boundary errors."""
    if n < 0 or d < 1:
        raise ValueError("need n >= 0, d >= 1")
    x = int(round(n ** (1.0 / d)))
    while x ** d > n:
        x -= 1
    while (x + 1) ** d <= n:
        x += 1
    return x


def max_poly_degree(n: int, d: int) -> int:
    """floor(n^(1/d)) - 1; may be negative, callers check."""
    if n < 1:
        raise ValueError("need n >= 1")
    return integer_root(n, d) - 1


def _ridge_matrix(dirs, l):
    """Columns: monomial coefficients of (w_j . x)^l over |alpha| = l."""
    d = dirs.shape[1]
    alphas = multi_indices(d, l)
    M = np.empty((len(alphas), dirs.shape[0]))
    for i, a in enumerate(alphas):
        multinom = math.factorial(l) / math.prod(math.factorial(t) for t in a)
        M[i] = multinom * np.prod(dirs ** np.array(a), axis=1)
    return alphas, M


def _system_condition(dirs, k):
    """(full rank for every degree <= k, worst condition number)."""
    worst = 1.0
    for l in range(k + 1):
        alphas, M = _ridge_matrix(dirs, l)
        sv = np.linalg.svd(M, compute_uv=False)
        if sv.size < len(alphas) or sv[-1] <= 1e-14 * sv[0]:
            return False, math.inf
        worst = max(worst, sv[0] / sv[len(alphas) - 1])
    return True, worst


@dataclass
class DirectionSet:
    directions: np.ndarray
    degree: int
    condition: float
    attempts: int = 1

    def __len__(self):
        return self.directions.shape[0]


def ridge_directions(d: int, k: int, seed: int = 0, max_retries: int = 50,
                     cond_threshold: float = 1e8) -> DirectionSet:
    """Directions w_1..w_s whose ridge powers span P_k."""
    if d < 1 or k < 0:
        raise ValueError("need d >= 1, k >= 0")
    if d == 1:
        dirs = np.ones((1, 1))
        return DirectionSet(dirs, k, _system_condition(dirs, k)[1])
    if d == 2:
        theta = np.arange(k + 1) * math.pi / (k + 1)
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        ok, cond = _system_condition(dirs, k)
        if not ok:
            raise RankDeficient("planar directions failed the rank check")
        return DirectionSet(dirs, k, cond)
    s = dim_homogeneous(d, k)
    rng = np.random.default_rng(seed)
    for attempt in range(1, max_retries + 1):
        g = rng.standard_normal((s, d))
        dirs = g / np.linalg.norm(g, axis=1, keepdims=True)
        ok, cond = _system_condition(dirs, k)
        if ok and cond < cond_threshold:
            return DirectionSet(dirs, k, cond, attempt)
    raise RankDeficient(f"no well-conditioned direction set after {max_retries} draws")


@dataclass
class RidgeForm:
    """sum_j p_j(w_j . x), with p_j given by coefficients[j, i] of t^i."""

    directions: np.ndarray
    coefficients: np.ndarray
    residual: float = 0.0

    @property
    def s(self):
        return self.directions.shape[0]

    def __call__(self, x):
        X = np.atleast_2d(np.asarray(x, dtype=float))
        if X.shape[1] != self.directions.shape[1]:
            X = X.reshape(-1, self.directions.shape[1])
        T = X @ self.directions.T  # (N, s)
        out = np.zeros(X.shape[0])
        for j in range(self.s):
            out += np.polynomial.polynomial.polyval(T[:, j], self.coefficients[j])
        return out


def poly_to_ridge(q: Polynomial, dirs) -> RidgeForm:
    """Solve for univariate p_j with sum_j p_j(w_j . x) = q, degree by degree."""
    D = dirs.directions if isinstance(dirs, DirectionSet) else np.atleast_2d(np.asarray(dirs, dtype=float))
    if D.shape[1] != q.dim:
        raise ValueError("direction dimension differs from polynomial dimension")
    k = q.actual_degree
    coefs = np.zeros((D.shape[0], k + 1))
    worst = 0.0
    for l in range(k + 1):
        alphas, M = _ridge_matrix(D, l)
        rhs = np.array([q.coeffs.get(a, 0.0) for a in alphas])
        if not rhs.any():
            continue
        sol = np.linalg.lstsq(M, rhs, rcond=None)[0]
        res = float(np.linalg.norm(M @ sol - rhs))
        if res > 1e-8 * (1.0 + np.linalg.norm(rhs)):
            raise RankDeficient(f"degree-{l} coefficients not reachable (residual {res:.3g})")
        worst = max(worst, res)
        coefs[:, l] = sol
    return RidgeForm(D, coefs, worst)


# ---------------------------------------------------------------------------
# Best polynomial approximation on samples
# ---------------------------------------------------------------------------

def _cheb_to_monomial(m, lo, hi):
    """Monomial coefficients (in x) of T_m((2x - lo - hi) / (hi - lo))."""
    P = np.polynomial.Polynomial
    u = P([-(lo + hi) / (hi - lo), 2.0 / (hi - lo)])
    cheb = np.polynomial.chebyshev.cheb2poly([0] * m + [1])
    acc = P([0.0])
    for i, c in enumerate(cheb):
        if c:
            acc = acc + c * u ** i
    return np.pad(acc.coef, (0, m + 1 - acc.coef.size))


def _basis(X, alphas, lo, hi):
    cols = []
    for a in alphas:
        col = np.ones(X.shape[0])
        for j, m in enumerate(a):
            if m:
                u = (2.0 * X[:, j] - lo[j] - hi[j]) / (hi[j] - lo[j])
                col = col * np.polynomial.chebyshev.chebval(u, [0] * m + [1])
        cols.append(col)
    return np.stack(cols, axis=1)


def _to_monomials(c, alphas, lo, hi, d, k):
    out: Dict[MultiIndex, float] = {}
    tables = {}
    for coef, a in zip(c, alphas):
        per_axis = []
        for j, m in enumerate(a):
            key = (j, m)
            if key not in tables:
                tables[key] = _cheb_to_monomial(m, lo[j], hi[j])
            per_axis.append(tables[key])
        for powers in itertools.product(*[range(len(t)) for t in per_axis]):
            v = coef * math.prod(per_axis[j][p] for j, p in enumerate(powers))
            if v:
                out[powers] = out.get(powers, 0.0) + v
    return Polynomial(d, k, out)


def poly_best_approx(f: TargetFunction, k: int, p=math.inf, domain: Domain = None,
                     sampling: NormQuery = None):
    """Best sampled approximation of f from P_k; returns (Polynomial, error).

    p = 2 is least squares, p in {1, inf} a linear program on the samples,
    other p a convex minimization.  The basis is a tensor Chebyshev basis on
    the bounding box; the result is converted to monomials and the reported
    error is measured on that returned polynomial.
    """
    domain = domain or Domain.cube(f.dim)
    q = (sampling or NormQuery()).with_p(p)
    X, w = sample_plan(domain, q)
    y = f.values(X)
    alphas = graded_indices(domain.dim, k)
    if X.shape[0] < len(alphas):
        raise UnderdeterminedSample(f"{X.shape[0]} samples for {len(alphas)} coefficients")
    lo = domain.lower if domain.is_box else -np.ones(domain.dim)
    hi = domain.upper if domain.is_box else np.ones(domain.dim)
    B = _basis(X, alphas, lo, hi)
    m = B.shape[1]
    if p == 2:
        sw = np.sqrt(w)
        c = np.linalg.lstsq(B * sw[:, None], y * sw, rcond=None)[0]
    elif p == math.inf:
        ones = np.ones((X.shape[0], 1))
        A = np.vstack([np.hstack([B, -ones]), np.hstack([-B, -ones])])
        cost = np.zeros(m + 1)
        cost[-1] = 1.0
        res = linprog(cost, A_ub=A, b_ub=np.concatenate([y, -y]),
                      bounds=[(None, None)] * m + [(0, None)], method="highs")
        c = res.x[:m]
    elif p == 1:
        N = X.shape[0]
        eye = np.eye(N)
        A = np.vstack([np.hstack([B, -eye]), np.hstack([-B, -eye])])
        cost = np.concatenate([np.zeros(m), w])
        res = linprog(cost, A_ub=A, b_ub=np.concatenate([y, -y]),
                      bounds=[(None, None)] * m + [(0, None)] * N, method="highs")
        c = res.x[:m]
    else:
        from scipy.optimize import minimize

        def obj(c):
            r = B @ c - y
            ar = np.abs(r)
            return float(np.sum(w * ar ** p)), B.T @ (p * w * ar ** (p - 1) * np.sign(r))

        c0 = np.linalg.lstsq(B, y, rcond=None)[0]
        c = minimize(obj, c0, jac=True, method="L-BFGS-B", options={"maxiter": 5000}).x
    poly = _to_monomials(c, alphas, lo, hi, domain.dim, k)
    return poly, sampled_norm(poly(X) - y, w, p)


# ---------------------------------------------------------------------------
# Realizing polynomials by networks
# ---------------------------------------------------------------------------

DEFAULT_H_LADDER = tuple(10.0 ** -e for e in range(1, 7))


def find_anchor(activation: Activation, k: int, candidates=None, threshold=1e-6) -> float:
    """First c0 in the scan with |sigma^(i)(c0)| >= threshold for all i <= k."""
    if not activation.smooth and activation.kind != "elu":
        raise DerivativeVanishes(f"{activation.label()} is not smooth")
    if candidates is None:
        grid = [round(0.1 * i, 10) for i in range(1, 21)]
        candidates = [-g for g in grid] if activation.kind == "elu" else grid
    for c0 in candidates:
        vals = [abs(float(activation_eval(activation, i, np.array([c0]))[0])) for i in range(k + 1)]
        if min(vals) >= threshold:
            return float(c0)
    raise DerivativeVanishes(f"no anchor with non-vanishing derivatives up to order {k}")


def difference_weights(k: int):
    """Weights omega[i, m] with sum_m omega[i, m] g(beta_m) ~ g^(i)(0), nodes beta_m = m - k/2."""
    beta = np.arange(k + 1) - k / 2.0
    V = np.vander(beta, k + 1, increasing=True).T  # V[l, m] = beta_m^l
    rhs = np.diag([math.factorial(i) for i in range(k + 1)]).astype(float)
    return beta, np.linalg.solve(V, rhs).T  # row i solves V omega = i! e_i


def ridge_network(form: RidgeForm, activation: Activation, anchor: float, h: float) -> NetworkParams:
    """Divided-difference realization of a ridge form with spacing h."""
    k = form.coefficients.shape[1] - 1
    beta, omega = difference_weights(k)
    dsig = np.array([float(activation_eval(activation, i, np.array([anchor]))[0]) for i in range(k + 1)])
    a_list, W_list, c_list = [], [], []
    const = 0.0
    scale = omega / (h ** np.arange(k + 1))[:, None] / dsig[:, None]  # (i, m)
    for j in range(form.s):
        outer = form.coefficients[j] @ scale  # (m,)
        for m in range(k + 1):
            if outer[m] == 0.0:
                continue
            if beta[m] == 0.0:
                const += outer[m]  # all w = 0 neurons coincide
                continue
            a_list.append(outer[m])
            W_list.append(beta[m] * h * form.directions[j])
            c_list.append(anchor)
    if const != 0.0 or not a_list:
        a_list.insert(0, const)
        W_list.insert(0, np.zeros(form.directions.shape[1]))
        c_list.insert(0, anchor)
    return NetworkParams(np.array(a_list), np.array(W_list), np.array(c_list), activation)


@dataclass
class PolyNetworkResult:
    params: NetworkParams
    error: float
    h: float
    anchor: float
    ladder: dict
    form: RidgeForm

    @property
    def n(self):
        return self.params.n


def poly_by_network(q: Polynomial, activation: Activation, n_budget: int, eps_target: float,
                    domain: Domain = None, anchor: Optional[float] = None,
                    h_ladder: Sequence[float] = DEFAULT_H_LADDER, norm: NormQuery = None,
                    directions: Optional[DirectionSet] = None) -> PolyNetworkResult:
    """Network with at most s(k+1) neurons approximating q in the sampled sup norm."""
    domain = domain or Domain.box([(-1.0, 1.0)] * q.dim)
    k = q.actual_degree
    dirs = directions or ridge_directions(q.dim, k)
    form = poly_to_ridge(q, dirs)
    anchor = find_anchor(activation, k) if anchor is None else anchor
    for i in range(k + 1):
        if abs(float(activation_eval(activation, i, np.array([anchor]))[0])) < 1e-12:
            raise DerivativeVanishes(f"sigma^({i}) vanishes at c0={anchor}")
    X, w = sample_plan(domain, (norm or NormQuery()).with_p(math.inf))
    y = q(X)
    best = None
    ladder = {}
    for h in h_ladder:
        params = ridge_network(form, activation, anchor, h)
        with np.errstate(over="ignore", invalid="ignore"):
            err = sampled_norm(net_eval(params, X) - y, w, math.inf)
        if not math.isfinite(err):
            err = math.inf
        ladder[h] = err
        if best is None or err < best.error:
            best = PolyNetworkResult(params, err, h, anchor, ladder, form)
    if best.params.n > n_budget:
        raise TargetUnreachable(f"construction needs {best.params.n} neurons, budget is {n_budget}", best)
    if best.error > eps_target:
        raise TargetUnreachable(f"best error {best.error:.3g} exceeds target {eps_target:.3g}", best)
    return best


def simultaneous_error(q, params: NetworkParams, order: int, domain: Domain = None,
                       norm: NormQuery = None):
    """Sampled sup norms of d^alpha(q - g) for every |alpha| <= order.

    Returns {alpha: error}.  ``q`` may be a Polynomial or a TargetFunction with
    derivatives.
    """
    act = params.activation
    if not act.smooth:
        if order > act.max_order(ae=False):
            raise UnsupportedDerivativeOrder(f"{act.label()} has no derivative of order {order}")
    domain = domain or Domain.box([(-1.0, 1.0)] * params.dim)
    X, w = sample_plan(domain, (norm or NormQuery()).with_p(math.inf))
    out = {}
    for m in range(order + 1):
        for alpha in multi_indices(params.dim, m):
            if isinstance(q, Polynomial):
                qv = q.derivative(alpha)(X)
            else:
                g = q.derivative(alpha) if q.derivative is not None else None
                if g is None:
                    raise UnsupportedDerivativeOrder(f"target has no derivative {alpha}")
                qv = g(X)
            out[alpha] = sampled_norm(net_derivative(params, alpha, X) - qv, w, math.inf)
    return out
