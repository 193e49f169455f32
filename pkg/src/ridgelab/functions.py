"""Target functions built from symbolic expressions, plus finite differences."""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .core import TargetFunction

_SYMBOLS = ("x", "y", "z", "u", "v", "w")


def from_expression(expr: str, dim: int = 1, label: str | None = None, smoothness=None):
    """Build a TargetFunction from a sympy-parsable expression.

    Variables are ``x, y, z, u, v, w`` for axes 0..5.  Partial derivatives of
    any multi-index are produced symbolically on demand.
    """
    import sympy as sp

    if dim > len(_SYMBOLS):
        raise ValueError(f"at most {len(_SYMBOLS)} variables supported")
    syms = sp.symbols(_SYMBOLS[:dim], real=True)
    local = {name: s for name, s in zip(_SYMBOLS, syms)}
    parsed = sp.sympify(expr, locals=local)

    def compile_(e):
        fn = sp.lambdify(syms, e, modules="numpy")

        def evaluator(X):
            X = np.atleast_2d(np.asarray(X, dtype=float))
            out = fn(*[X[:, i] for i in range(dim)])
            return np.broadcast_to(np.asarray(out, dtype=float), (X.shape[0],)).copy()

        return evaluator

    @lru_cache(maxsize=None)
    def derivative(alpha):
        if len(alpha) != dim:
            return None
        e = parsed
        for s, a in zip(syms, alpha):
            if a:
                e = sp.diff(e, s, a)
        if e.has(sp.DiracDelta):
            # not a function: f is not in the corresponding Sobolev space
            return None
        return compile_(e)

    return TargetFunction(compile_(parsed), dim, label or expr, derivative,
                          dict(smoothness or {}))


def _axis_stencil(m, h):
    """Offsets and weights of the centered m-th difference with step h."""
    offsets = np.array([(m / 2.0 - j) * h for j in range(m + 1)])
    weights = np.array([(-1) ** j * math.comb(m, j) for j in range(m + 1)], dtype=float) / h ** m
    return offsets, weights


def fd_step(order):
    return 1e-4 if order <= 1 else 10.0 ** (-4.0 / order)


def fd_partial(f: TargetFunction, alpha, X, h=None):
    """Central-difference partial derivative, Richardson-extrapolated once."""
    alpha = tuple(int(a) for a in alpha)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    order = sum(alpha)
    if order == 0:
        return f.values(X)
    h = fd_step(order) if h is None else h

    def stencil_eval(step):
        per_axis = [_axis_stencil(a, step) if a else (np.zeros(1), np.ones(1)) for a in alpha]
        acc = np.zeros(X.shape[0])
        for combo in itertools.product(*[range(len(o)) for o, _ in per_axis]):
            shift = np.array([per_axis[i][0][j] for i, j in enumerate(combo)])
            wt = math.prod(per_axis[i][1][j] for i, j in enumerate(combo))
            acc += wt * f.values(X + shift)
        return acc

    coarse = stencil_eval(h)
    fine = stencil_eval(h / 2)
    return (4.0 * fine - coarse) / 3.0


def partial_evaluator(f: TargetFunction, alpha, fd_fallback=True):
    alpha = tuple(alpha)
    if f.derivative is not None:
        g = f.derivative(alpha)
        if g is not None:
            return lambda X: np.asarray(g(np.atleast_2d(X)), dtype=float).reshape(-1)
    if not fd_fallback:
        return None
    return lambda X: fd_partial(f, alpha, X)
