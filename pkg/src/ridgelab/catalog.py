"""Built-in target functions, activations and experiment ids for configs and the CLI."""
from __future__ import annotations

import numpy as np

from .bestapprox import NetworkParams
from .core import Activation, Domain, GridSpec
from .functions import from_expression
from .resonance import SignedGrid, default_resonance_component, gliding_hump_compose, resonance_function
from .smoothness import AbstractModulus, RateFunction


class CatalogError(KeyError):
    pass


def _expr(expr, dim=1, label=None):
    return from_expression(expr, dim, label)


def _abs_kink(center=0.5, dim=1):
    return _expr(f"Abs(x - ({center}))", dim, f"|x-{center}|")


def _abs_x(dim=2):
    return _expr("Abs(x)", dim, "|x|")


def _sin(freq=1.0, dim=1):
    return _expr(f"sin(2*pi*{freq}*x)", dim, f"sin(2pi*{freq}x)")


def _x_abs_x(dim=1):
    return _expr("x*Abs(x)/2", dim, "x|x|/2")


def _gaussian(center=0.5, width=0.2, dim=1):
    names = "xyzuvw"[:dim]
    quad = " + ".join(f"({v} - ({center}))**2" for v in names)
    return _expr(f"exp(-({quad})/(2*{width}**2))", dim, f"gauss(c={center},s={width})")


def _poly(expr="x**2", dim=1):
    return _expr(expr, dim, expr)


def resonance_grid(tau=2, dim=1, signs="alternating", seed=0) -> SignedGrid:
    if isinstance(signs, str):
        if signs == "alternating":
            sg = SignedGrid.alternating(tau, dim)
        elif signs == "random":
            rng = np.random.default_rng(seed)
            sg = SignedGrid(GridSpec(Domain.cube(dim), tau), rng.choice((-1, 1), size=(tau + 1) ** dim))
        elif signs == "constant":
            sg = SignedGrid.constant(tau, dim)
        else:
            raise CatalogError(f"unknown sign pattern {signs!r}")
    else:
        sg = SignedGrid(GridSpec(Domain.cube(dim), tau), signs)
    return sg


def _resonance(tau=2, dim=1, signs="alternating", seed=0):
    return resonance_function(resonance_grid(tau, dim, signs, seed)).as_target()


def _gliding_hump(alpha=0.5, r=1, m=2, dim=1):
    widths = [max(4 ** (j + 1) // 4, 1) for j in range(m)]
    comps = [default_resonance_component(w, dim) for w in widths]
    series = gliding_hump_compose(comps, AbstractModulus.power(alpha * dim / r),
                                  RateFunction("log-power", 1, dim), r, m)
    return series.partial(m)


def _network(n=2, activation="logistic", dim=1, seed=0, k=1):
    rng = np.random.default_rng(seed)
    act = Activation(activation, k=k)
    p = NetworkParams(rng.standard_normal(n), rng.standard_normal((n, dim)) * 3,
                      rng.standard_normal(n), act)
    return p.as_target(f"net(n={n},{act.label()},seed={seed})")


FUNCTIONS = {
    "abs-kink": (_abs_kink, "|x - center| (absolute-value kink), params center, dim"),
    "abs-x": (_abs_x, "|x_1| on R^d, params dim"),
    "sin": (_sin, "sin(2 pi freq x_1), params freq, dim"),
    "x-abs-x": (_x_abs_x, "x|x|/2, a C^1 function, params dim"),
    "gaussian": (_gaussian, "isotropic Gaussian bump, params center, width, dim"),
    "poly": (_poly, "polynomial or any sympy expression in x, y, z, ..., params expr, dim"),
    "resonance": (_resonance, "sign-grid bump sum h_n, params tau, dim, signs, seed"),
    "gliding-hump": (_gliding_hump, "truncated gliding-hump series, params alpha, r, m, dim"),
    "network": (_network, "random network in M_n, params n, activation, dim, seed"),
}

ACTIVATIONS = {
    "logistic": "1/(1 + exp(-x))",
    "arctan-sigmoid": "1/2 + arctan(x)/pi",
    "elu": "x for x > 0, alpha (exp(x) - 1) otherwise; param alpha",
    "relu-power": "max(0, x)^k; param k",
    "heaviside": "H(x) with H(0) = 1",
}

EXPERIMENTS = {
    "direct-theorem": "E_n against omega_r(f, n^(-1/d)) with a rate fit",
    "l2-relu": "L2 errors of ReLU^k networks on the ball against the modulus bound",
    "sharpness-gap": "gliding-hump counterexample: upper and lower side tables",
    "synchronous-d1": "simultaneous derivative errors of constructed networks (d = 1)",
    "verify-chain": "VC-dimension inequality chain and the condition on E",
    "shatter": "sign-pattern fitting by width-n networks",
    "modulus": "sampled radial moduli of smoothness over a delta list",
    "best-approx": "warm-started best-approximation estimates over an n list",
    "resonance": "resonance-function exactness and modulus constants",
    "axioms": "remainder-functional axioms on found estimates",
}


def build_function(fid: str, params: dict | None = None):
    if fid not in FUNCTIONS:
        raise CatalogError(fid)
    try:
        return FUNCTIONS[fid][0](**(params or {}))
    except TypeError as exc:
        raise CatalogError(f"{fid}: {exc}") from None


def build_activation(spec) -> Activation:
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind")
    if kind not in ACTIVATIONS:
        raise CatalogError(str(kind))
    return Activation(kind, k=int(spec.get("k", 1)), alpha=float(spec.get("alpha", 1.0)))


def listing() -> str:
    lines = ["functions:"]
    lines += [f"  {k:<15} {v[1]}" for k, v in FUNCTIONS.items()]
    lines.append("activations:")
    lines += [f"  {k:<15} {v}" for k, v in ACTIVATIONS.items()]
    lines.append("experiments:")
    lines += [f"  {k:<15} {v}" for k, v in EXPERIMENTS.items()]
    return "\n".join(lines) + "\n"
