"""Best approximation by single-hidden-layer networks.

``best_approx`` only ever produces *upper* estimates of E(M_n, f): it returns
the best network it found.  The zero network is always a candidate, so the
estimate never exceeds the sampled norm of f.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares, linprog, minimize

from .core import (Activation, Domain, NormQuery, TargetFunction, activation_eval,
                   sample_plan, sampled_norm)

log = logging.getLogger(__name__)


class DimensionMismatch(ValueError):
    pass


class NonFiniteObjective(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class NetworkParams:
    """g(x) = offset + sum_k a_k sigma(w_k . x + c_k).

    ``offset`` stays 0 for members of M_n; it is only used by the shattering
    search, where the constant a_0 is an extra degree of freedom.
    """

    a: np.ndarray
    W: np.ndarray
    c: np.ndarray
    activation: Activation
    offset: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(-1)
        W = np.asarray(self.W, dtype=float)
        if W.ndim == 1:
            W = W.reshape(a.shape[0], -1)
        c = np.asarray(self.c, dtype=float).reshape(-1)
        if not (a.shape[0] == W.shape[0] == c.shape[0]):
            raise ValueError("need exactly n triples (a_k, w_k, c_k)")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(W)) and np.all(np.isfinite(c))
                and math.isfinite(self.offset)):
            raise ValueError("network parameters must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def n(self):
        return self.a.shape[0]

    @property
    def dim(self):
        return self.W.shape[1]

    def scaled(self, factor):
        return replace(self, a=factor * self.a, offset=factor * self.offset)

    def padded(self, W_new, c_new):
        """Append neurons with zero outer weight (same function, wider network)."""
        W_new = np.atleast_2d(W_new)
        return replace(self, a=np.concatenate([self.a, np.zeros(W_new.shape[0])]),
                       W=np.vstack([self.W, W_new]), c=np.concatenate([self.c, c_new]))

    def concat(self, other: "NetworkParams"):
        return replace(self, a=np.concatenate([self.a, other.a]), W=np.vstack([self.W, other.W]),
                       c=np.concatenate([self.c, other.c]), offset=self.offset + other.offset)

    def vector(self):
        return np.concatenate([self.a, self.W.reshape(-1), self.c])

    def with_vector(self, theta):
        n, d = self.W.shape
        return replace(self, a=theta[:n], W=theta[n:n + n * d].reshape(n, d), c=theta[n + n * d:])

    def as_target(self, label=None):
        return TargetFunction(lambda X: net_eval(self, X), self.dim,
                              label or f"net(n={self.n}, {self.activation.label()})")

    def to_dict(self):
        return {"activation": self.activation.label(), "a": self.a.tolist(),
                "W": self.W.tolist(), "c": self.c.tolist(), "offset": self.offset}


def net_eval(params: NetworkParams, x):
    """sum_k a_k sigma(w_k . x + c_k), accumulated neuron by neuron.

    The fixed accumulation order makes appending zero-weight neurons leave the
    values bit-for-bit unchanged.
    """
    X = np.asarray(x, dtype=float)
    scalar = X.ndim == 1 and X.shape[0] == params.dim or X.ndim == 0
    X = np.atleast_2d(X)
    if X.shape[1] != params.dim:
        if params.dim == 1 and X.shape[0] == 1:
            X = X.reshape(-1, 1)
        else:
            raise DimensionMismatch(f"points have dimension {X.shape[1]}, weights {params.dim}")
    out = np.full(X.shape[0], params.offset)
    for k in range(params.n):
        out += params.a[k] * activation_eval(params.activation, 0, X @ params.W[k] + params.c[k])
    return float(out[0]) if scalar else out


def net_derivative(params: NetworkParams, alpha, X):
    """d^alpha g = sum_k a_k w_k^alpha sigma^(|alpha|)(w_k . x + c_k)."""
    alpha = tuple(alpha)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    order = sum(alpha)
    if order == 0:
        return net_eval(params, X)
    out = np.zeros(X.shape[0])
    for k in range(params.n):
        mono = math.prod(params.W[k, i] ** a for i, a in enumerate(alpha))
        out += params.a[k] * mono * activation_eval(params.activation, order, X @ params.W[k] + params.c[k])
    return out


def net_param_gradient(params: NetworkParams, x):
    """Partials of g(x) with respect to a_k, w_k and c_k.

    Returns a dict with arrays shaped (N, n), (N, n, d) and (N, n); uses the
    a.e. derivative for piecewise activations.
    """
    X = np.atleast_2d(np.asarray(x, dtype=float))
    if X.shape[1] != params.dim:
        raise DimensionMismatch("point dimension differs from weight dimension")
    Z = X @ params.W.T + params.c
    S = activation_eval(params.activation, 0, Z)
    A = params.a * activation_eval(params.activation, 1, Z, ae=True)
    return {"a": S, "W": A[:, :, None] * X[:, None, :], "c": A}


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolverConfig:
    """Multi-start settings.

    For the sup norm each restart runs a Levenberg-Marquardt least-squares
    warm-up, ``lawson_rounds`` rounds of Lawson reweighting (weighted least
    squares pushing towards the minimax fit), L-BFGS-B on a log-mean-cosh
    surrogate at every temperature of the ladder (relative to the current sup
    error), and an LP polish of the outer weights.  p = 2 uses
    Levenberg-Marquardt directly, other p use L-BFGS-B.
    """

    restarts: int = 8
    iterations: int = 400
    temperatures: tuple = (1.0, 0.3, 0.1, 0.03, 0.01)
    w_scale: tuple = (0.1, 50.0)
    seed: int = 0
    tolerance: float = 1e-6
    norm: NormQuery = field(default_factory=NormQuery)
    l2_warmup: bool = True
    lawson_rounds: int = 12
    lawson_evals: int = 100
    lp_polish: bool = True
    staircase: bool = True
    jobs: int = 1

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if any(b >= a for a, b in zip(self.temperatures, self.temperatures[1:])):
            raise ValueError("temperatures must be strictly decreasing")
        if not 0 < self.w_scale[0] <= self.w_scale[1]:
            raise ValueError("invalid weight-magnitude range")


@dataclass
class BestApproxResult:
    params: NetworkParams
    error: float
    restart_errors: list
    best_restart: int
    surrogate: Optional[float] = None
    meta: dict = field(default_factory=dict)


class _Problem:
    """Sampled objective and gradient for a fixed target on fixed points."""

    def __init__(self, X, y, weights, p, activation, n, offset=False):
        self.X, self.y, self.weights, self.p = X, y, weights, p
        self.activation, self.n, self.d = activation, n, X.shape[1]
        self.offset = offset
        self.scale = max(float(np.max(np.abs(y))) if y.size else 0.0, 1e-300)

    def split(self, theta):
        n, d = self.n, self.d
        a, W, c = theta[:n], theta[n:n + n * d].reshape(n, d), theta[n + n * d:n + n * d + n]
        off = theta[-1] if self.offset else 0.0
        return a, W, c, off

    def forward(self, theta):
        a, W, c, off = self.split(theta)
        Z = self.X @ W.T + c
        S = activation_eval(self.activation, 0, Z)
        return S, Z, a, W, off, S @ a + off - self.y

    def gradient(self, theta, v, S, Z, a):
        A = a * activation_eval(self.activation, 1, Z, ae=True)
        parts = [S.T @ v, (A * v[:, None]).T @ self.X, A.T @ v]
        grad = np.concatenate([parts[0], parts[1].reshape(-1), parts[2]])
        if self.offset:
            grad = np.append(grad, v.sum())
        return grad

    def lp_objective(self, theta, p):
        S, Z, a, W, off, r = self.forward(theta)
        w = self.weights
        if p == 2:
            v = 2.0 * w * r
            val = float(np.sum(w * r * r))
        elif p == 1:
            eta = 1e-6 * self.scale
            root = np.sqrt(r * r + eta * eta)
            val, v = float(np.sum(w * root)), w * r / root
        else:
            ar = np.abs(r)
            val, v = float(np.sum(w * ar ** p)), p * w * ar ** (p - 1) * np.sign(r)
        return val, self.gradient(theta, v, S, Z, a)

    def softmax_objective(self, theta, T):
        """T * log(mean_i cosh(r_i / T)): smooth, and never above max |r_i|."""
        S, Z, a, W, off, r = self.forward(theta)
        z = r / T
        az = np.abs(z)
        logcosh = az + np.log1p(np.exp(-2.0 * az)) - math.log(2.0)
        m = float(np.max(logcosh))
        wts = np.exp(logcosh - m)
        total = float(np.sum(wts))
        val = T * (m + math.log(total) - math.log(r.size))
        v = (wts / total) * np.tanh(z)
        return val, self.gradient(theta, v, S, Z, a)


def _solve_lp_outer(S, y, weights, p, offset=False):
    """Optimal outer weights (and offset) for fixed inner weights, p in {1, inf}."""
    N, n = S.shape
    B = np.hstack([S, np.ones((N, 1))]) if offset else S
    m = B.shape[1]
    if p == math.inf:
        cost = np.zeros(m + 1)
        cost[-1] = 1.0
        ones = np.ones((N, 1))
        A_ub = np.vstack([np.hstack([B, -ones]), np.hstack([-B, -ones])])
        b_ub = np.concatenate([y, -y])
    else:
        cost = np.concatenate([np.zeros(m), weights])
        eye = np.eye(N)
        A_ub = np.vstack([np.hstack([B, -eye]), np.hstack([-B, -eye])])
        b_ub = np.concatenate([y, -y])
    bounds = [(None, None)] * m + [(0, None)] * (A_ub.shape[1] - m)
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        return None
    return res.x[:m]


def _outer_fit(S, y, weights, p, offset=False):
    B = np.hstack([S, np.ones((S.shape[0], 1))]) if offset else S
    if p == 2 and weights is not None:
        sw = np.sqrt(weights)
        sol = np.linalg.lstsq(B * sw[:, None], y * sw, rcond=None)[0]
    elif p in (1, math.inf):
        sol = _solve_lp_outer(S, y, weights, p, offset)
        if sol is None:
            sol = np.linalg.lstsq(B, y, rcond=None)[0]
    else:
        sol = np.linalg.lstsq(B, y, rcond=None)[0]
    return sol


def random_inner_weights(rng, n, domain: Domain, points, w_scale=(0.1, 50.0)):
    """Directions uniform on the sphere, |w| log-uniform, hyperplanes through the domain."""
    d = domain.dim
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    mags = np.exp(rng.uniform(math.log(w_scale[0]), math.log(w_scale[1]), size=n))
    W = g * mags[:, None]
    anchors = points[rng.integers(0, points.shape[0], size=n)]
    c = -np.einsum("ij,ij->i", W, anchors)
    return W, c


def staircase_inner_weights(rng, n, points):
    """Steep ridges with transitions spread evenly along one random direction.

    Mimics the classical step-function construction: n jittered thresholds
    across the projected domain, steepness a few times n per unit length.
    """
    d = points.shape[1]
    u = rng.standard_normal(d)
    u = u / np.linalg.norm(u) if d > 1 else np.ones(1)
    t = points @ u
    lo, hi = float(t.min()), float(t.max())
    width = max(hi - lo, 1e-12)
    centers = lo + (np.arange(n) + 0.5 + rng.uniform(-0.25, 0.25, size=n)) * width / n
    kappa = np.exp(rng.uniform(0.0, math.log(8.0)))
    w = kappa * n / width
    W = np.outer(np.full(n, w), u)
    return W, -w * centers


class BestApproxSolver:
    """Shared machinery for ``best_approx`` and ``shatter``-style searches."""

    def __init__(self, f: TargetFunction, n: int, activation: Activation, p, domain: Domain,
                 cfg: SolverConfig):
        if n < 1:
            raise ValueError("need n >= 1")
        self.f, self.n, self.activation, self.p, self.domain, self.cfg = f, n, activation, p, domain, cfg
        self.X, self.weights = sample_plan(domain, cfg.norm.with_p(p))
        self.y = f.values(self.X)
        self.problem = _Problem(self.X, self.y, self.weights, p, activation, n)

    def error(self, params: NetworkParams):
        return sampled_norm(net_eval(params, self.X) - self.y, self.weights, self.p)

    def _minimize(self, fun, theta):
        res = minimize(fun, theta, jac=True, method="L-BFGS-B",
                       options={"maxiter": self.cfg.iterations, "ftol": 1e-15, "gtol": 1e-14})
        return res.x

    def _gauss_newton(self, theta, sw, max_nfev=None):
        """Levenberg-Marquardt on the residuals scaled by ``sw``."""
        prob = self.problem

        def res(t):
            return sw * prob.forward(t)[-1]

        def jac(t):
            S, Z, a, W, off, r = prob.forward(t)
            A = a * activation_eval(self.activation, 1, Z, ae=True)
            J = np.hstack([S, (A[:, :, None] * self.X[:, None, :]).reshape(len(r), -1), A])
            return sw[:, None] * J

        method = "lm" if self.X.shape[0] >= theta.size else "trf"
        try:
            out = least_squares(res, theta, jac=jac, method=method,
                                max_nfev=max_nfev or self.cfg.iterations)
        except (ValueError, np.linalg.LinAlgError):
            return theta
        return out.x

    def _template(self):
        return NetworkParams(np.zeros(self.n), np.zeros((self.n, self.domain.dim)),
                             np.zeros(self.n), self.activation)

    def run_restart(self, theta0):
        """Optimize from ``theta0``; returns (best params, error, surrogate, history)."""
        prob, cfg = self.problem, self.cfg
        template = self._template()
        best = [None, math.inf]
        history = []

        def consider(theta, stage):
            if not np.all(np.isfinite(theta)):
                history.append((stage, math.nan))
                return
            try:
                cand = template.with_vector(theta)
            except ValueError:
                return
            err = self.error(cand)
            history.append((stage, err))
            if math.isfinite(err) and err < best[1]:
                best[0], best[1] = cand, err

        theta = np.array(theta0, dtype=float)
        consider(theta, "init")
        N = self.X.shape[0]
        with np.errstate(over="ignore", invalid="ignore"):
            if self.p == math.inf:
                if cfg.l2_warmup:
                    theta = self._gauss_newton(theta, np.ones(N))
                    consider(theta, "l2")
                v = np.full(N, 1.0 / N)
                for k in range(cfg.lawson_rounds):
                    # Lawson: reweight towards the largest residuals
                    theta = self._gauss_newton(best[0].vector() if k == 0 and best[0] is not None else theta,
                                               np.sqrt(v), cfg.lawson_evals)
                    consider(theta, f"lawson{k}")
                    r = np.abs(prob.forward(theta)[-1])
                    if not np.all(np.isfinite(r)):
                        break
                    v = np.maximum(v * r / max(float(np.sum(v * r)), 1e-300), 1e-14)
                for T in cfg.temperatures:
                    if best[0] is not None:
                        theta = best[0].vector()
                    T_eff = T * max(best[1], 1e-12 * prob.scale)
                    theta = self._minimize(lambda t, T_eff=T_eff: prob.softmax_objective(t, T_eff), theta)
                    consider(theta, f"T={T:g}")
            elif self.p == 2:
                theta = self._gauss_newton(theta, np.sqrt(self.weights))
                consider(theta, "p=2")
            else:
                theta = self._minimize(lambda t: prob.lp_objective(t, self.p), theta)
                consider(theta, f"p={self.p:g}")
        if best[0] is None:
            return None, math.nan, None, history
        if cfg.lp_polish:
            S = activation_eval(self.activation, 0, self.X @ best[0].W.T + best[0].c)
            sol = _outer_fit(S, self.y, self.weights, self.p)
            if sol is not None and np.all(np.isfinite(sol)):
                cand = replace(best[0], a=sol)
                err = self.error(cand)
                history.append(("polish", err))
                if err < best[1]:
                    best[0], best[1] = cand, err
        surrogate = None
        if self.p == math.inf:
            T_last = cfg.temperatures[-1] * max(best[1], 1e-12 * prob.scale)
            surrogate = prob.softmax_objective(best[0].vector(), T_last)[0]
        return best[0], best[1], surrogate, history

    def initial_theta(self, rng, zero=False, staircase=False):
        if staircase:
            W, c = staircase_inner_weights(rng, self.n, self.X)
        else:
            W, c = random_inner_weights(rng, self.n, self.domain, self.X, self.cfg.w_scale)
        if zero:
            a = np.zeros(self.n)
        else:
            S = activation_eval(self.activation, 0, self.X @ W.T + c)
            a = _outer_fit(S, self.y, self.weights, self.p if staircase else 2)
            if not np.all(np.isfinite(a)):
                a = np.zeros(self.n)
        return np.concatenate([a, W.reshape(-1), c])


def best_approx(f: TargetFunction, n: int, activation: Activation, p=math.inf,
                domain: Domain = None, cfg: SolverConfig = None,
                init: Sequence[NetworkParams] = ()) -> BestApproxResult:
    """Multi-start upper estimate of E(M_n, f)_{p, Omega}.

    Candidates: the zero network, restart 0 started from a = 0, random
    restarts (every other one a staircase start when ``cfg.staircase``), and
    any ``init`` networks (evaluated as given, then optimized).
    Deterministic for a fixed ``cfg.seed``.
    """
    domain = domain or Domain.cube(f.dim)
    cfg = cfg or SolverConfig()
    solver = BestApproxSolver(f, n, activation, p, domain, cfg)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)

    jobs = []
    for i, ss in enumerate(seeds):
        stair = cfg.staircase and i % 2 == 1
        jobs.append(("random", solver.initial_theta(np.random.default_rng(ss), zero=(i == 0), staircase=stair)))
    for params in init:
        if params.n != n or params.dim != domain.dim:
            raise DimensionMismatch("warm start has the wrong shape")
        jobs.append(("warm", params.vector()))

    def run(job):
        return solver.run_restart(job[1])

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            outcomes = list(pool.map(run, jobs))
    else:
        outcomes = [run(j) for j in jobs]

    zero = NetworkParams(np.zeros(n), np.zeros((n, domain.dim)), np.zeros(n), activation)
    best_params, best_err, best_idx, best_sur = zero, solver.error(zero), -1, None
    restart_errors = []
    for idx, (params, err, sur, _) in enumerate(outcomes):
        restart_errors.append(err)
        if params is not None and err < best_err:
            best_params, best_err, best_idx, best_sur = params, err, idx, sur
    if all(not math.isfinite(e) for e in restart_errors):
        raise NonFiniteObjective("every restart diverged")
    if best_sur is None and p == math.inf:
        T_last = cfg.temperatures[-1] * max(best_err, 1e-12 * solver.problem.scale)
        best_sur = solver.problem.softmax_objective(best_params.vector(), T_last)[0]
    meta = {"n": n, "p": p, "activation": activation.label(), "restarts": cfg.restarts,
            "warm_starts": len(init), "sample_points": int(solver.X.shape[0]),
            "norm_f": solver.error(zero)}
    return BestApproxResult(best_params, best_err, restart_errors, best_idx, best_sur, meta)


def best_approx_chain(f: TargetFunction, n_list: Sequence[int], activation: Activation, p=math.inf,
                      domain: Domain = None, cfg: SolverConfig = None):
    """Warm-started results for increasing widths; errors are non-increasing.

    The width-n solution padded with zero neurons is a candidate for every
    larger width and evaluates to bit-identical values.
    """
    domain = domain or Domain.cube(f.dim)
    cfg = cfg or SolverConfig()
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("widths must be strictly increasing")
    results = []
    prev = None
    pts, _ = sample_plan(domain, cfg.norm.with_p(p))
    for i, n in enumerate(n_list):
        init = []
        if prev is not None:
            rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, n, 7919]))
            W, c = random_inner_weights(rng, n - prev.params.n, domain, pts, cfg.w_scale)
            init.append(prev.params.padded(W, c))
        res = best_approx(f, n, activation, p, domain, replace(cfg, seed=cfg.seed + i), init)
        if prev is not None and res.error > prev.error:
            raise AssertionError("warm start failed to carry over")  # cannot happen by construction
        results.append(res)
        prev = res
    return results


# ---------------------------------------------------------------------------
# Lower bounds for n = 1, d = 1 and the remainder axioms
# ---------------------------------------------------------------------------

def monotone_lower_bound(f: TargetFunction, domain: Domain = None, resolution: int = 2001):
    """Certified lower bound on the sup distance from f to monotone functions.

    For non-decreasing g, ||f - g|| >= max_{x<y} (f(x) - f(y)) / 2, and
    symmetrically for non-increasing g.  Every width-1 network with a monotone
    activation in one variable is monotone, so this bounds E(M_1, f) from below.
    """
    domain = domain or Domain.cube(1)
    if domain.dim != 1:
        raise ValueError("monotone bound needs d = 1")
    x = np.linspace(domain.lower[0], domain.upper[0], resolution)[:, None]
    y = f.values(x)
    drop = float(np.max(np.maximum.accumulate(y) - y))  # max_{x<y} f(x) - f(y)
    rise = float(np.max(y - np.minimum.accumulate(y)))
    return 0.5 * min(drop, rise)


def dense_parameter_search(f: TargetFunction, activation: Activation, domain: Domain = None,
                           box=(-50.0, 50.0), counts=(101, 101, 101), resolution: int = 257):
    """Smallest sampled sup error over a dense (a, w, c) grid for n = d = 1."""
    domain = domain or Domain.cube(1)
    x = np.linspace(domain.lower[0], domain.upper[0], resolution)
    y = f.values(x[:, None])
    A = np.linspace(box[0], box[1], counts[0])
    Wv = np.linspace(box[0], box[1], counts[1])
    Cv = np.linspace(box[0], box[1], counts[2])
    best = (math.inf, None)
    for w in Wv:
        S = activation_eval(activation, 0, w * x[None, :] + Cv[:, None])  # (nc, N)
        err = np.max(np.abs(A[:, None, None] * S[None, :, :] - y[None, None, :]), axis=2)
        i, j = np.unravel_index(np.argmin(err), err.shape)
        if err[i, j] < best[0]:
            best = (float(err[i, j]), (float(A[i]), float(w), float(Cv[j])))
    return best


@dataclass
class AxiomReport:
    monotonicity: dict
    homogeneity: dict
    subadditivity: dict
    stability: dict
    slack: float

    @property
    def passed(self):
        return all(s.get("passed", True) for s in
                   (self.monotonicity, self.homogeneity, self.subadditivity, self.stability))


def check_remainder_axioms(f_list: Sequence[TargetFunction], n_list: Sequence[int],
                           activation: Activation, p=math.inf, domain: Domain = None,
                           cfg: SolverConfig = None, factor: float = 2.0,
                           slack: float = 0.05) -> AxiomReport:
    """Evaluate the remainder axioms on found upper estimates.

    Monotonicity uses the warm-start chain (exact).  Homogeneity compares an
    independent run on c*f with |c| times the result for f; both directions
    are also certified by rescaling the found networks.  Subadditivity checks
    E_{2n}(f1 + f2) against E_n(f1) + E_n(f2) with the concatenated networks
    as a warm start.  Stability reports E_n(f) / ||f||.
    """
    domain = domain or Domain.cube(f_list[0].dim)
    cfg = cfg or SolverConfig()
    chains = [best_approx_chain(f, n_list, activation, p, domain, cfg) for f in f_list]

    mono = {"errors": [[r.error for r in ch] for ch in chains]}
    mono["passed"] = all(all(b <= a for a, b in zip(e, e[1:])) for e in mono["errors"])

    homo = {"factor": factor, "ratios": [], "certified": []}
    for f, ch in zip(f_list, chains):
        base = ch[0]
        cf = f.scaled(factor)
        run = best_approx(cf, base.params.n, activation, p, domain, cfg)
        target = abs(factor) * base.error
        ratio = run.error / target if target > 0 else (0.0 if run.error == 0 else math.inf)
        solver = BestApproxSolver(cf, base.params.n, activation, p, domain, cfg)
        up = solver.error(base.params.scaled(factor))
        down = BestApproxSolver(f, base.params.n, activation, p, domain, cfg).error(
            run.params.scaled(1.0 / factor))
        homo["ratios"].append(ratio)
        homo["certified"].append({"E(cf) <=": up, "E(f) <=": down})
    homo["passed"] = all(1.0 / (1.0 + slack) <= r <= 1.0 + slack or r == 0.0 for r in homo["ratios"])

    sub = {"cases": []}
    if len(f_list) >= 2:
        f1, f2 = f_list[0], f_list[1]
        n = n_list[0]
        r1, r2 = chains[0][0], chains[1][0]
        joint = r1.params.concat(r2.params)
        res = best_approx(f1 + f2, 2 * n, activation, p, domain, cfg, init=[joint])
        bound = r1.error + r2.error
        sub["cases"].append({"n": n, "E_2n(f1+f2)": res.error, "sum": bound})
        sub["passed"] = res.error <= bound * (1 + slack) + 1e-12
    stab = {"ratios": []}
    for f, ch in zip(f_list, chains):
        nf = ch[0].meta["norm_f"]
        stab["ratios"].append([r.error / nf if nf > 0 else 0.0 for r in ch])
    stab["passed"] = all(all(x <= 1.0 for x in row) for row in stab["ratios"])
    return AxiomReport(mono, homo, sub, stab, slack)
