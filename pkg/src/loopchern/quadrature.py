"""Quadrature control: grid specification, trapezoid/Simpson rules (definite
and cumulative, vectorized over leading axes), Chen iterated integrals on the
time simplex, and counter-based Monte-Carlo simplex sampling.

Grids are uniform on [0, 1].  ``grid_t`` / ``grid_s`` count subintervals, so a
grid of M has M + 1 nodes.  The cumulative Simpson rule fits a parabola
through each node triple, which keeps the running integral fourth-order
accurate at every node, not only at pair boundaries.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matrices import as_matrix, sample_matrix_path

__all__ = [
    "QuadratureSpec",
    "rule_weights",
    "integrate",
    "cumulative_integral",
    "sorted_uniform_tuples",
    "iterated_integral",
    "iterated_integral_mc",
]

_RULES = ("trapezoid", "simpson")


@dataclass(frozen=True)
class QuadratureSpec:
    """Grid sizes, rule selection, and Monte-Carlo controls.

    mc_samples = 0 selects deterministic simplex quadrature; a positive value
    switches iterated integrals to Monte-Carlo over sorted uniform tuples
    drawn from a Philox stream keyed by ``seed`` (reproducible by position,
    independent of thread count).
    """

    grid_t: int = 256
    grid_s: int = 32
    rule: str = "simpson"
    mc_samples: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.rule not in _RULES:
            raise ValueError(f"unknown quadrature rule {self.rule!r}; choose from {_RULES}")
        if self.grid_t < 8:
            raise ValueError(f"grid_t must be >= 8, got {self.grid_t}")
        if self.grid_s < 2:
            raise ValueError(f"grid_s must be >= 2, got {self.grid_s}")
        if self.rule == "simpson" and (self.grid_t % 2 or self.grid_s % 2):
            raise ValueError("simpson rule needs an even subinterval count "
                             f"(grid_t={self.grid_t}, grid_s={self.grid_s})")
        if self.mc_samples < 0:
            raise ValueError("mc_samples must be >= 0")

    @property
    def t_step(self) -> float:
        return 1.0 / self.grid_t

    @property
    def s_step(self) -> float:
        return 1.0 / self.grid_s

    def t_nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid_t + 1)

    def s_nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid_s + 1)

    def with_(self, **kw) -> "QuadratureSpec":
        data = self.__dict__ | kw
        return QuadratureSpec(**data)


def rule_weights(npoints: int, step: float, rule: str) -> np.ndarray:
    """Quadrature weights for ``npoints`` uniform nodes spaced by ``step``."""
    if npoints < 2:
        raise ValueError("need at least two nodes")
    w = np.empty(npoints)
    if rule == "trapezoid":
        w[:] = step
        w[0] = w[-1] = 0.5 * step
    elif rule == "simpson":
        if (npoints - 1) % 2:
            raise ValueError("simpson rule needs an even subinterval count")
        w[:] = 2.0 * step / 3.0
        w[1::2] = 4.0 * step / 3.0
        w[0] = w[-1] = step / 3.0
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    return w


def integrate(y: np.ndarray, step: float, rule: str, axis: int = -1) -> np.ndarray:
    """Definite integral of sampled values along ``axis``."""
    y = np.asarray(y)
    w = rule_weights(y.shape[axis], step, rule)
    return np.tensordot(np.moveaxis(y, axis, 0), w, axes=(0, 0))


def _cumulative_trapezoid(y: np.ndarray, step: float) -> np.ndarray:
    out = np.zeros_like(y)
    np.cumsum(0.5 * step * (y[1:] + y[:-1]), axis=0, out=out[1:])
    return out


def _cumulative_simpson(y: np.ndarray, step: float) -> np.ndarray:
    npts = y.shape[0]
    if (npts - 1) % 2:
        raise ValueError("cumulative simpson needs an even subinterval count")
    inc = np.empty_like(y[1:])
    a, b, c = y[0:-2:2], y[1:-1:2], y[2::2]
    inc[0::2] = (step / 12.0) * (5.0 * a + 8.0 * b - c)
    inc[1::2] = (step / 12.0) * (-a + 8.0 * b + 5.0 * c)
    out = np.zeros_like(y)
    np.cumsum(inc, axis=0, out=out[1:])
    return out


def cumulative_integral(y: np.ndarray, step: float, rule: str, axis: int = 0) -> np.ndarray:
    """Running integral along ``axis``; output node j holds int over [x0, xj]."""
    y = np.asarray(y)
    moved = np.moveaxis(y, axis, 0)
    if rule == "trapezoid":
        res = _cumulative_trapezoid(moved, step)
    elif rule == "simpson":
        res = _cumulative_simpson(moved, step)
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    return np.moveaxis(res, 0, axis)


def sorted_uniform_tuples(dim: int, count: int, seed: int) -> np.ndarray:
    """(count, dim) array of increasing uniform tuples: points of the simplex.

    The Philox stream is keyed by ``seed`` so the draw is reproducible sample
    by sample regardless of execution order.
    """
    gen = np.random.Generator(np.random.Philox(key=seed))
    u = gen.random((count, dim))
    u.sort(axis=1)
    return u


def iterated_integral(fns, quad: QuadratureSpec, dim: int | None = None) -> np.ndarray:
    """Chen iterated integral int_{0<t1<...<tn<1} f1(t1) ... fn(tn) dt.

    Matrix factors multiply in slot order.  Computed by the cumulative
    recursion I_j(t) = int_0^t I_{j-1} f_j, which costs O(n * grid) rule
    applications; with quad.mc_samples > 0 a sorted-uniform Monte-Carlo
    estimate is used instead.  n = 0 returns the identity.
    """
    fns = list(fns)
    if not fns:
        return np.eye(dim or 1, dtype=complex)
    if quad.mc_samples > 0:
        return iterated_integral_mc(fns, quad)
    ts = quad.t_nodes()
    cur = None
    for f in fns:
        vals = sample_matrix_path(_lift(f), ts)
        if cur is not None:
            vals = cur @ vals
        cur = cumulative_integral(vals, quad.t_step, quad.rule, axis=0)
    return cur[-1]


def iterated_integral_mc(fns, quad: QuadratureSpec) -> np.ndarray:
    """Monte-Carlo estimate of the iterated integral over sorted tuples."""
    fns = [_lift(f) for f in fns]
    n = len(fns)
    pts = sorted_uniform_tuples(n, quad.mc_samples, quad.seed)
    total = None
    for row in pts:
        prod = as_matrix(fns[0](float(row[0])))
        for j in range(1, n):
            prod = prod @ as_matrix(fns[j](float(row[j])))
        total = prod if total is None else total + prod
    vol = 1.0
    for j in range(2, n + 1):
        vol /= j
    return total * (vol / quad.mc_samples)


def _lift(f):
    """Wrap scalar-valued callables so they return 1x1 matrices."""
    if hasattr(f, "values"):
        return f

    def wrapped(t, _f=f):
        return as_matrix(_f(t))

    return wrapped
