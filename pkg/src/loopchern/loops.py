"""Loops in U(n), tangent fields along them, finite-dimensional families
(plots), cylinders (paths of loops), and group-valued map plots.

Every object carries derivative oracles.  Generated loops (exponential,
deformed, Fourier, block sums, concatenations) have analytic velocities and
family partials; generic callables fall back to central finite differences.
All evaluators accept scalar t and provide batched ``values(ts)`` /
``velocities(ts)`` over node arrays, which is what the form evaluators use.

Time parameters live on [0, 1] and loops are understood as 1-periodic.
"""
from __future__ import annotations

import json
import math

import numpy as np

from .matrices import (
    as_matrix,
    block_diag,
    expm,
    identity_like,
    random_anti_hermitian,
    unitarity_defect,
    anti_hermitian_defect,
    cmat_from_json,
    cmat_to_json,
)
from .quadrature import cumulative_integral

__all__ = [
    "UnitaryLoop", "CallableLoop", "ConstantLoop", "ExpLoop", "DeformedLoop",
    "DirectSumLoop", "InverseLoop", "ProductLoop", "ConcatLoop", "FourierLoop",
    "TangentField", "velocity_field", "left_translated_field",
    "right_translated_field", "block_field", "concat_fields",
    "exp_loop", "constant_loop", "direct_sum", "concat", "loop_inverse",
    "loop_product", "tabulated_loop", "smooth_step", "smooth_step_deriv",
    "LoopPlot", "CallableLoopPlot", "DeformedLoopPlot", "ConstantLoopPlot",
    "MapPlot", "FactorMapPlot", "CallableMapPlot",
    "MapPath", "FactorMapPath",
    "CylinderMap", "FactorCylinder", "TConstantCylinder", "CylinderField",
    "rotation_field_grid", "CylinderPlot", "CallableCylinderPlot",
    "loop_from_config", "load_tabulated_json", "check_loop",
    "random_deformed_loop", "random_factors",
]

_FD_STEP = 1e-4   # default step for finite-difference oracles


# ---------------------------------------------------------------------------
# smooth reparametrizer with vanishing derivatives at 0 and 1
# ---------------------------------------------------------------------------

def _bump(u):
    u = np.asarray(u, dtype=float)
    inside = (u > 0.0) & (u < 1.0)
    out = np.zeros_like(u)
    v = u[inside]
    out[inside] = np.exp(-1.0 / (v * (1.0 - v)))
    return out


class _SittingTable:
    """Cumulative table for phi(u) = int_0^u psi / int_0^1 psi."""

    def __init__(self, size=2 ** 14):
        self.us = np.linspace(0.0, 1.0, size + 1)
        psi = _bump(self.us)
        cum = cumulative_integral(psi, 1.0 / size, "simpson", axis=0)
        self.norm = cum[-1]
        self.phis = cum / self.norm
        self.dphis = psi / self.norm
        self.h = 1.0 / size


_TABLE = None


def _table() -> _SittingTable:
    global _TABLE
    if _TABLE is None:
        _TABLE = _SittingTable()
    return _TABLE


def smooth_step(u):
    """phi: [0,1] -> [0,1], strictly increasing, flat to all orders at 0, 1.

    Evaluated by cubic Hermite interpolation of a dense cumulative table; the
    derivative used by the interpolant is the analytic psi / norm.
    """
    tab = _table()
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    idx = np.minimum((u / tab.h).astype(int), len(tab.us) - 2)
    x = (u - tab.us[idx]) / tab.h
    p0, p1 = tab.phis[idx], tab.phis[idx + 1]
    m0, m1 = tab.dphis[idx] * tab.h, tab.dphis[idx + 1] * tab.h
    x2, x3 = x * x, x * x * x
    return ((2 * x3 - 3 * x2 + 1) * p0 + (x3 - 2 * x2 + x) * m0
            + (-2 * x3 + 3 * x2) * p1 + (x3 - x2) * m1)


def smooth_step_deriv(u):
    tab = _table()
    return _bump(u) / tab.norm


# ---------------------------------------------------------------------------
# loops
# ---------------------------------------------------------------------------

class UnitaryLoop:
    """Closed curve gamma: [0,1] -> U(n) with a velocity oracle.

    Subclasses implement ``value`` / ``velocity`` and usually override the
    batched forms.  Instances are immutable and safe to share across threads.
    """

    dim: int

    def value(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def velocity(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def values(self, ts) -> np.ndarray:
        return np.stack([self.value(float(t)) for t in np.atleast_1d(ts)])

    def velocities(self, ts) -> np.ndarray:
        return np.stack([self.velocity(float(t)) for t in np.atleast_1d(ts)])


class CallableLoop(UnitaryLoop):
    """Loop from a plain callable; velocity by central differences if absent."""

    def __init__(self, dim, value, velocity=None, fd_step=_FD_STEP):
        self.dim = int(dim)
        self._value = value
        self._velocity = velocity
        self._h = float(fd_step)

    def value(self, t):
        return as_matrix(self._value(t % 1.0))

    def velocity(self, t):
        if self._velocity is not None:
            return as_matrix(self._velocity(t % 1.0))
        h = self._h
        return (self.value(t + h) - self.value(t - h)) / (2.0 * h)


class ConstantLoop(UnitaryLoop):
    def __init__(self, g, unitary_tol=1e-9):
        g = as_matrix(g)
        defect = unitarity_defect(g)
        if defect > unitary_tol:
            raise ValueError(f"constant loop needs a unitary matrix; defect {defect:.3e}")
        self.g = g
        self.dim = g.shape[0]
        self._zero = np.zeros_like(g)

    def value(self, t):
        return self.g

    def velocity(self, t):
        return self._zero

    def values(self, ts):
        return np.broadcast_to(self.g, (len(np.atleast_1d(ts)),) + self.g.shape).copy()

    def velocities(self, ts):
        return np.zeros((len(np.atleast_1d(ts)),) + self.g.shape, dtype=complex)


class _ExpGen:
    """Batched a -> exp(a K) for anti-Hermitian K via eigendecomposition."""

    def __init__(self, K):
        K = as_matrix(K)
        self.K = K
        if anti_hermitian_defect(K) < 1e-8:
            lam, u = np.linalg.eigh(-1j * K)
            self._lam = 1j * lam
            self._u = u
        else:
            # non-normal generator: no stable eigen route, use expm per point
            self._lam = None

    def batch(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        if self._lam is None:
            flat = a.reshape(-1)
            out = np.stack([expm(x * self.K) for x in flat])
            return out.reshape(a.shape + self.K.shape)
        phases = np.exp(np.multiply.outer(a, self._lam))
        return np.einsum("ij,...j,kj->...ik", self._u, phases, self._u.conj())


class ExpLoop(UnitaryLoop):
    """gamma(t) = g0 exp(t X) with exp(X) = I, so the curve closes."""

    def __init__(self, X, g0=None, close_tol=1e-9):
        X = as_matrix(X)
        self.X = X
        self.dim = X.shape[0]
        if g0 is None:
            g0 = identity_like(X)
        g0 = as_matrix(g0)
        if unitarity_defect(g0) > 1e-8:
            raise ValueError("exp_loop base point must be unitary")
        self.g0 = g0
        defect = float(np.max(np.abs(expm(X) - identity_like(X))))
        if defect > close_tol:
            raise ValueError(
                f"exp_loop generator does not close: |exp(X) - I| = {defect:.3e}")
        self._gen = _ExpGen(X)

    def value(self, t):
        return self.values(np.array([t]))[0]

    def velocity(self, t):
        return self.value(t) @ self.X

    def values(self, ts):
        return self.g0 @ self._gen.batch(np.atleast_1d(np.asarray(ts, dtype=float)))

    def velocities(self, ts):
        return self.values(ts) @ self.X


class _FactorChain:
    """Product of exponential factors E_i = exp(f_i K_i) applied to a base.

    Shared engine behind deformed loops, cylinders and map plots: given the
    sampled scalar arrays f_i (any batch shape) it forms the product and the
    sandwich sums needed for derivatives and family partials.
    """

    def __init__(self, gens):
        self.gens = list(gens)

    def exps(self, fvals):
        return [g.batch(f) for g, f in zip(self.gens, fvals)]

    @staticmethod
    def product(exps, base_vals):
        out = base_vals
        for e in reversed(exps):
            out = e @ out
        return out

    @staticmethod
    def suffixes(exps, base_vals):
        # R[i] = E_i ... E_{m-1} @ base, R[m] = base
        out = [base_vals]
        for e in reversed(exps):
            out.append(e @ out[-1])
        out.reverse()
        return out

    @staticmethod
    def prefixes(exps, like):
        # L[i] = E_0 ... E_{i-1}, L[0] = I
        eye = identity_like(like[..., 0, :, :] if like.ndim > 2 else like)
        out = [np.broadcast_to(eye, like.shape)]
        acc = None
        for e in exps:
            acc = e if acc is None else acc @ e
            out.append(acc)
        return out

    def derivative(self, exps, dfvals, base_vals, base_dvals):
        """d/dt of the product when f_i' = dfvals[i] and base' = base_dvals."""
        R = self.suffixes(exps, base_vals)
        L = self.prefixes(exps, base_vals)
        out = L[-1] @ base_dvals
        for i, g in enumerate(self.gens):
            term = L[i] @ (np.asarray(dfvals[i])[..., None, None] * g.K) @ R[i]
            out = out + term
        return out

    def partial(self, exps, i, weights, base_vals):
        """Derivative against a coefficient scaling f_i: L_i (w K_i) R_i."""
        R = self.suffixes(exps, base_vals)
        L = self.prefixes(exps, base_vals)
        return L[i] @ (np.asarray(weights)[..., None, None] * self.gens[i].K) @ R[i]


class DeformedLoop(UnitaryLoop):
    """gamma(t) = prod_i exp(f_i(t) K_i) . base(t), f_i smooth and 1-periodic.

    ``factors`` is a list of (K, f, fprime) with K anti-Hermitian and f a
    vectorized scalar callable; periodic f keeps the curve closed.
    """

    def __init__(self, base, factors):
        self.base = base
        self.dim = base.dim
        self.factors = [(as_matrix(K), f, fp) for K, f, fp in factors]
        self._chain = _FactorChain(_ExpGen(K) for K, _, _ in self.factors)

    def _fvals(self, ts):
        return [np.asarray(f(ts), dtype=float) for _, f, _ in self.factors]

    def value(self, t):
        return self.values(np.array([t]))[0]

    def velocity(self, t):
        return self.velocities(np.array([t]))[0]

    def values(self, ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        exps = self._chain.exps(self._fvals(ts))
        return self._chain.product(exps, self.base.values(ts))

    def velocities(self, ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        exps = self._chain.exps(self._fvals(ts))
        dfs = [np.asarray(fp(ts), dtype=float) for _, _, fp in self.factors]
        return self._chain.derivative(exps, dfs, self.base.values(ts),
                                      self.base.velocities(ts))


class DirectSumLoop(UnitaryLoop):
    def __init__(self, a: UnitaryLoop, b: UnitaryLoop):
        self.a, self.b = a, b
        self.dim = a.dim + b.dim

    def value(self, t):
        return block_diag(self.a.value(t), self.b.value(t))

    def velocity(self, t):
        return block_diag(self.a.velocity(t), self.b.velocity(t))

    def values(self, ts):
        return _block_stack(self.a.values(ts), self.b.values(ts))

    def velocities(self, ts):
        return _block_stack(self.a.velocities(ts), self.b.velocities(ts))


def _block_stack(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, m = a.shape[-1], b.shape[-1]
    out = np.zeros(a.shape[:-2] + (n + m, n + m), dtype=complex)
    out[..., :n, :n] = a
    out[..., n:, n:] = b
    return out


class InverseLoop(UnitaryLoop):
    def __init__(self, a: UnitaryLoop):
        self.a = a
        self.dim = a.dim

    def value(self, t):
        return np.linalg.inv(self.a.value(t))

    def velocity(self, t):
        inv = self.value(t)
        return -inv @ self.a.velocity(t) @ inv

    def values(self, ts):
        return np.linalg.inv(self.a.values(ts))

    def velocities(self, ts):
        inv = self.values(ts)
        return -(inv @ self.a.velocities(ts) @ inv)


class ProductLoop(UnitaryLoop):
    def __init__(self, a: UnitaryLoop, b: UnitaryLoop):
        if a.dim != b.dim:
            raise ValueError("pointwise product needs equal dimensions")
        self.a, self.b = a, b
        self.dim = a.dim

    def value(self, t):
        return self.a.value(t) @ self.b.value(t)

    def velocity(self, t):
        return (self.a.velocity(t) @ self.b.value(t)
                + self.a.value(t) @ self.b.velocity(t))

    def values(self, ts):
        return self.a.values(ts) @ self.b.values(ts)

    def velocities(self, ts):
        return (self.a.velocities(ts) @ self.b.values(ts)
                + self.a.values(ts) @ self.b.velocities(ts))


class ConcatLoop(UnitaryLoop):
    """gamma1 on [0, 1/2], gamma2 on [1/2, 1], each run through the sitting
    reparametrizer so the joint curve is smooth with flat junction velocity."""

    def __init__(self, a: UnitaryLoop, b: UnitaryLoop, endpoint_tol=1e-9):
        if a.dim != b.dim:
            raise ValueError("concat needs equal dimensions")
        gap = float(np.max(np.abs(a.value(1.0) - b.value(0.0))))
        if gap > endpoint_tol:
            raise ValueError(f"concat endpoint mismatch: |a(1) - b(0)| = {gap:.3e}")
        self.a, self.b = a, b
        self.dim = a.dim

    def value(self, t):
        return self.values(np.array([t]))[0]

    def velocity(self, t):
        return self.velocities(np.array([t]))[0]

    def _split(self, ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float)) % 1.0
        first = ts < 0.5
        return ts, first

    def values(self, ts):
        ts, first = self._split(ts)
        out = np.empty((len(ts), self.dim, self.dim), dtype=complex)
        if first.any():
            out[first] = self.a.values(smooth_step(2.0 * ts[first]))
        if (~first).any():
            out[~first] = self.b.values(smooth_step(2.0 * ts[~first] - 1.0))
        return out

    def velocities(self, ts):
        ts, first = self._split(ts)
        out = np.empty((len(ts), self.dim, self.dim), dtype=complex)
        if first.any():
            u = 2.0 * ts[first]
            out[first] = (2.0 * smooth_step_deriv(u))[:, None, None] \
                * self.a.velocities(smooth_step(u))
        if (~first).any():
            u = 2.0 * ts[~first] - 1.0
            out[~first] = (2.0 * smooth_step_deriv(u))[:, None, None] \
                * self.b.velocities(smooth_step(u))
        return out


class FourierLoop(UnitaryLoop):
    """Trigonometric interpolant through equispaced samples g_j = g(j / M)."""

    def __init__(self, coeffs: np.ndarray, freqs: np.ndarray, sample_defect=0.0):
        self.coeffs = np.asarray(coeffs, dtype=complex)
        self.freqs = np.asarray(freqs, dtype=float)
        self.dim = self.coeffs.shape[-1]
        self.sample_defect = float(sample_defect)

    @classmethod
    def from_samples(cls, samples, unitary_tol=1e-6):
        samples = np.asarray(samples, dtype=complex)
        if samples.ndim != 3 or samples.shape[1] != samples.shape[2]:
            raise ValueError("samples must be a stack of square matrices")
        m = samples.shape[0]
        if m < 8:
            raise ValueError(f"tabulated loop needs at least 8 samples, got {m}")
        if not np.all(np.isfinite(samples.view(float))):
            raise ValueError("tabulated samples have non-finite entries")
        defect = max(unitarity_defect(s) for s in samples)
        if defect > unitary_tol:
            raise ValueError(
                f"tabulated samples not unitary: max defect {defect:.3e} > {unitary_tol:g}")
        coeffs = np.fft.fft(samples, axis=0) / m
        freqs = np.fft.fftfreq(m, d=1.0 / m)
        if m % 2 == 0:
            # split the Nyquist mode symmetrically so the interpolant stays
            # the minimal-oscillation (cosine) one
            ny = m // 2
            coeffs = np.concatenate([coeffs, 0.5 * coeffs[ny:ny + 1]], axis=0)
            coeffs[ny] *= 0.5
            freqs = np.concatenate([freqs, [m / 2.0]])
            freqs[ny] = -m / 2.0
        return cls(coeffs, freqs, sample_defect=defect)

    def value(self, t):
        return self.values(np.array([t]))[0]

    def velocity(self, t):
        return self.velocities(np.array([t]))[0]

    def values(self, ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        phases = np.exp(2j * np.pi * np.outer(ts, self.freqs))
        return np.einsum("tm,mij->tij", phases, self.coeffs)

    def velocities(self, ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        phases = np.exp(2j * np.pi * np.outer(ts, self.freqs)) \
            * (2j * np.pi * self.freqs)
        return np.einsum("tm,mij->tij", phases, self.coeffs)

    def unitarity_drift(self, probe=64):
        ts = np.linspace(0.0, 1.0, probe, endpoint=False)
        vals = self.values(ts)
        eye = identity_like(vals[0])
        return float(max(np.linalg.norm(v.conj().T @ v - eye) for v in vals))


# constructor-style names matching the generator mini-language

def exp_loop(X, g0=None) -> ExpLoop:
    return ExpLoop(X, g0)


def constant_loop(g) -> ConstantLoop:
    return ConstantLoop(g)


def direct_sum(a, b) -> DirectSumLoop:
    return DirectSumLoop(a, b)


def concat(a, b) -> ConcatLoop:
    return ConcatLoop(a, b)


def loop_inverse(a) -> InverseLoop:
    return InverseLoop(a)


def loop_product(a, b) -> ProductLoop:
    return ProductLoop(a, b)


def tabulated_loop(samples, mode="fourier") -> FourierLoop:
    if mode != "fourier":
        raise ValueError(f"unsupported interpolation mode {mode!r}")
    return FourierLoop.from_samples(samples)


# ---------------------------------------------------------------------------
# tangent fields
# ---------------------------------------------------------------------------

class TangentField:
    """Periodic variation V(t) in T_{gamma(t)} U(n) along a base loop."""

    def __init__(self, base, value=None, values=None):
        self.base = base
        self.dim = base.dim
        self._value = value
        self._values = values
        if value is None and values is None:
            raise ValueError("tangent field needs a value or values oracle")

    def value(self, t):
        if self._value is not None:
            return as_matrix(self._value(t % 1.0))
        return self.values(np.array([t]))[0]

    def values(self, ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if self._values is not None:
            return np.asarray(self._values(ts), dtype=complex)
        return np.stack([self.value(float(t)) for t in ts])


def velocity_field(loop: UnitaryLoop) -> TangentField:
    """The loop-rotation field t -> gamma'(t)."""
    return TangentField(loop, value=loop.velocity, values=loop.velocities)


def left_translated_field(loop: UnitaryLoop, K) -> TangentField:
    K = as_matrix(K)
    return TangentField(loop, values=lambda ts: loop.values(ts) @ K)


def right_translated_field(loop: UnitaryLoop, K) -> TangentField:
    K = as_matrix(K)
    return TangentField(loop, values=lambda ts: K @ loop.values(ts))


def block_field(f1, f2, sum_loop) -> TangentField:
    """Block-diagonal extension (V1, V2) over a direct-sum loop."""
    return TangentField(sum_loop,
                        values=lambda ts: _block_stack(f1.values(ts), f2.values(ts)))


def concat_fields(f1, f2, concat_loop: ConcatLoop) -> TangentField:
    """Transport a pair of fields to the reparametrized concatenation.

    Fields push forward like velocities, picking up the reparametrization
    Jacobian 2 phi'; this is the transport under which the iterated-integral
    forms split over the two halves.  The vanishing Jacobian at the junction
    also keeps the transported field smooth there.
    """

    def values(ts):
        ts_arr = np.atleast_1d(np.asarray(ts, dtype=float)) % 1.0
        first = ts_arr < 0.5
        out = np.empty((len(ts_arr), concat_loop.dim, concat_loop.dim), dtype=complex)
        if first.any():
            u = 2.0 * ts_arr[first]
            out[first] = (2.0 * smooth_step_deriv(u))[:, None, None] \
                * f1.values(smooth_step(u))
        if (~first).any():
            u = 2.0 * ts_arr[~first] - 1.0
            out[~first] = (2.0 * smooth_step_deriv(u))[:, None, None] \
                * f2.values(smooth_step(u))
        return out

    return TangentField(concat_loop, values=values)


def check_loop(loop: UnitaryLoop, samples=64, seed=0) -> dict:
    """Defect report for the loop contract: unitarity, periodicity, and
    anti-Hermitian logarithmic velocity."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    ts = rng.random(samples)
    vals = loop.values(ts)
    vels = loop.velocities(ts)
    eye = identity_like(vals[0])
    unit = max(float(np.linalg.norm(v.conj().T @ v - eye)) for v in vals)
    omega = np.linalg.solve(vals, vels)
    ah = max(float(np.max(np.abs(w + w.conj().T))) for w in omega)
    per = float(np.max(np.abs(loop.value(0.0) - loop.value(1.0))))
    per_vel = float(np.max(np.abs(loop.velocity(0.0) - loop.velocity(1.0))))
    return {"unitarity": unit, "log_velocity_anti_hermitian": ah,
            "period_value": per, "period_velocity": per_vel}


# ---------------------------------------------------------------------------
# plots of loops
# ---------------------------------------------------------------------------

class LoopPlot:
    """Smooth family p in R^m -> loop, with partial-derivative oracles."""

    param_dim: int
    dim: int

    def at(self, p) -> UnitaryLoop:
        raise NotImplementedError

    def partial(self, p, i: int) -> TangentField:
        raise NotImplementedError

    def _cached_at(self, p):
        key = tuple(np.round(np.atleast_1d(np.asarray(p, dtype=float)), 14))
        cache = getattr(self, "_loop_cache", None)
        if cache is None:
            cache = self._loop_cache = {}
        if key not in cache:
            cache[key] = self.at(p)
        return cache[key]


class CallableLoopPlot(LoopPlot):
    """Plot from a builder p -> loop; partials by central differences."""

    def __init__(self, param_dim, builder, dim, fd_step=_FD_STEP):
        self.param_dim = int(param_dim)
        self._builder = builder
        self.dim = int(dim)
        self._h = float(fd_step)

    def at(self, p):
        return self._builder(np.atleast_1d(np.asarray(p, dtype=float)))

    def partial(self, p, i):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        if not 0 <= i < self.param_dim:
            raise IndexError(f"plot axis {i} out of range")
        h = self._h
        up, dn = p.copy(), p.copy()
        up[i] += h
        dn[i] -= h
        lo, hi = self.at(dn), self.at(up)
        base = self._cached_at(p)
        return TangentField(base,
                            values=lambda ts: (hi.values(ts) - lo.values(ts)) / (2 * h))


class DeformedLoopPlot(LoopPlot):
    """Family gamma_p(t) = prod_i exp(p_i f_i(t) K_i) . base(t).

    Partials in p are analytic sandwich products; the f_i must be periodic so
    that every member stays a closed loop.
    """

    def __init__(self, base: UnitaryLoop, factors):
        self.base = base
        self.dim = base.dim
        self.factors = [(as_matrix(K), f, fp) for K, f, fp in factors]
        self.param_dim = len(self.factors)
        self._chain = _FactorChain(_ExpGen(K) for K, _, _ in self.factors)

    def at(self, p):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        scaled = [(K, _scale_fn(f, c), _scale_fn(fp, c))
                  for (K, f, fp), c in zip(self.factors, p)]
        return DeformedLoop(self.base, scaled)

    def partial(self, p, i):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        if not 0 <= i < self.param_dim:
            raise IndexError(f"plot axis {i} out of range")
        base_loop = self._cached_at(p)

        def values(ts, i=i, p=p):
            ts = np.atleast_1d(np.asarray(ts, dtype=float))
            fvals = [c * np.asarray(f(ts), dtype=float)
                     for (K, f, fp), c in zip(self.factors, p)]
            exps = self._chain.exps(fvals)
            weights = np.asarray(self.factors[i][1](ts), dtype=float)
            return self._chain.partial(exps, i, weights, self.base.values(ts))

        return TangentField(base_loop, values=values)


def _scale_fn(f, c):
    return lambda ts, f=f, c=c: c * np.asarray(f(ts))


# ---------------------------------------------------------------------------
# group-valued map plots and paths (no loop direction)
# ---------------------------------------------------------------------------

class MapPlot:
    """Smooth map g: R^m -> U(n) with partial derivatives."""

    param_dim: int
    dim: int

    def value(self, p) -> np.ndarray:
        raise NotImplementedError

    def partial(self, p, i: int) -> np.ndarray:
        raise NotImplementedError


class FactorMapPlot(MapPlot):
    """g(p) = prod_i exp(p_i K_i) . g0 with analytic partials."""

    def __init__(self, Ks, g0=None):
        self.Ks = [as_matrix(K) for K in Ks]
        self.param_dim = len(self.Ks)
        self.dim = self.Ks[0].shape[0]
        self.g0 = identity_like(self.Ks[0]) if g0 is None else as_matrix(g0)
        self._chain = _FactorChain(_ExpGen(K) for K in self.Ks)

    def _exps(self, p):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        return [g.batch(np.asarray(c)) for g, c in zip(self._chain.gens, p)]

    def value(self, p):
        return self._chain.product(self._exps(p), self.g0)

    def partial(self, p, i):
        if not 0 <= i < self.param_dim:
            raise IndexError(f"map plot axis {i} out of range")
        exps = self._exps(p)
        return self._chain.partial(exps, i, np.asarray(1.0), self.g0)


class CallableMapPlot(MapPlot):
    def __init__(self, param_dim, value, dim, fd_step=_FD_STEP):
        self.param_dim = int(param_dim)
        self._value = value
        self.dim = int(dim)
        self._h = float(fd_step)

    def value(self, p):
        return as_matrix(self._value(np.atleast_1d(np.asarray(p, dtype=float))))

    def partial(self, p, i):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        up, dn = p.copy(), p.copy()
        up[i] += self._h
        dn[i] -= self._h
        return (self.value(up) - self.value(dn)) / (2 * self._h)


class ConstantLoopPlot(LoopPlot):
    """Plot of constant loops induced by a map plot (image of the
    constant-loop inclusion)."""

    def __init__(self, map_plot: MapPlot):
        self.map_plot = map_plot
        self.param_dim = map_plot.param_dim
        self.dim = map_plot.dim

    def at(self, p):
        return ConstantLoop(self.map_plot.value(p))

    def partial(self, p, i):
        w = self.map_plot.partial(p, i)
        base = self._cached_at(p)
        return TangentField(
            base, values=lambda ts: np.broadcast_to(
                w, (len(np.atleast_1d(ts)),) + w.shape).copy())


class MapPath:
    """Smooth family g: R^m x [0,1] -> U(n): a path of maps, the carrier of
    the odd Chern-Simons form.  Batched over the path coordinate u."""

    param_dim: int
    dim: int

    def values_u(self, p, us) -> np.ndarray:
        raise NotImplementedError

    def u_velocities(self, p, us) -> np.ndarray:
        raise NotImplementedError

    def partials_u(self, p, i, us) -> np.ndarray:
        raise NotImplementedError

    def endpoint_plot(self, u: float) -> MapPlot:
        path = self

        class _End(MapPlot):
            param_dim = path.param_dim
            dim = path.dim

            def value(self, p):
                return path.values_u(p, np.array([u]))[0]

            def partial(self, p, i):
                return path.partials_u(p, i, np.array([u]))[0]

        return _End()


class FactorMapPath(MapPath):
    """g(p, u) = prod_i exp(p_i a_i(u) K_i) . c(u), analytic in everything.

    ``base`` is any object with batched values/velocities on [0,1] (a loop or
    an open path); a_i are vectorized scalar callables with derivatives.
    """

    def __init__(self, factors, base):
        self.factors = [(as_matrix(K), a, ap) for K, a, ap in factors]
        self.param_dim = len(self.factors)
        self.base = base
        self.dim = base.dim
        self._chain = _FactorChain(_ExpGen(K) for K, _, _ in self.factors)

    def _exps(self, p, us):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        fvals = [c * np.asarray(a(us), dtype=float)
                 for (K, a, ap), c in zip(self.factors, p)]
        return self._chain.exps(fvals)

    def values_u(self, p, us):
        us = np.atleast_1d(np.asarray(us, dtype=float))
        return self._chain.product(self._exps(p, us), self.base.values(us))

    def u_velocities(self, p, us):
        us = np.atleast_1d(np.asarray(us, dtype=float))
        p = np.atleast_1d(np.asarray(p, dtype=float))
        exps = self._exps(p, us)
        dfs = [c * np.asarray(ap(us), dtype=float)
               for (K, a, ap), c in zip(self.factors, p)]
        return self._chain.derivative(exps, dfs, self.base.values(us),
                                      self.base.velocities(us))

    def partials_u(self, p, i, us):
        us = np.atleast_1d(np.asarray(us, dtype=float))
        exps = self._exps(p, us)
        weights = np.asarray(self.factors[i][1](us), dtype=float)
        return self._chain.partial(exps, i, weights, self.base.values(us))


# ---------------------------------------------------------------------------
# cylinders: paths of loops
# ---------------------------------------------------------------------------

class CylinderMap:
    """Path of loops s -> gamma_s with an s-derivative oracle; also exposes
    full (s, t) grids for the even transgression form."""

    dim: int

    def at(self, s: float) -> UnitaryLoop:
        raise NotImplementedError

    def sderiv(self, s: float) -> TangentField:
        raise NotImplementedError

    def value_grid(self, ss, ts) -> np.ndarray:
        raise NotImplementedError

    def t_velocity_grid(self, ss, ts) -> np.ndarray:
        raise NotImplementedError

    def s_velocity_grid(self, ss, ts) -> np.ndarray:
        raise NotImplementedError


class FactorCylinder(CylinderMap):
    """g(s, t) = prod_i exp(phi_i(s, t) K_i) . base(t).

    phi_i are vectorized scalar maps with both partial derivatives supplied;
    they must be 1-periodic in t so each slice is a closed loop.
    """

    def __init__(self, base: UnitaryLoop, factors):
        # factors: list of (K, phi(s,t), dphi_ds, dphi_dt), phi vectorized
        self.base = base
        self.dim = base.dim
        self.factors = [(as_matrix(K), f, fs, ft) for K, f, fs, ft in factors]
        self._chain = _FactorChain(_ExpGen(K) for K, _, _, _ in self.factors)

    def at(self, s):
        s = float(s)
        scaled = [(K, lambda ts, f=f, s=s: f(s, ts), lambda ts, ft=ft, s=s: ft(s, ts))
                  for K, f, fs, ft in self.factors]
        return DeformedLoop(self.base, scaled)

    def sderiv(self, s):
        s = float(s)
        base_loop = self.at(s)

        def values(ts):
            ts = np.atleast_1d(np.asarray(ts, dtype=float))
            fvals = [np.asarray(f(s, ts), dtype=float) for K, f, fs, ft in self.factors]
            exps = self._chain.exps(fvals)
            dfs = [np.asarray(fs(s, ts), dtype=float) for K, f, fs, ft in self.factors]
            return self._chain.derivative(exps, dfs, self.base.values(ts),
                                          np.zeros_like(self.base.values(ts)))

        return TangentField(base_loop, values=values)

    def _grid_fvals(self, ss, ts, which):
        sg = np.asarray(ss, dtype=float)[:, None]
        tg = np.asarray(ts, dtype=float)[None, :]
        return [np.asarray(fn(sg, tg), dtype=float) + np.zeros((len(ss), len(ts)))
                for fn in which]

    def value_grid(self, ss, ts):
        fv = self._grid_fvals(ss, ts, [f for K, f, fs, ft in self.factors])
        exps = self._chain.exps(fv)
        base = np.broadcast_to(self.base.values(ts), (len(ss), len(ts), self.dim, self.dim))
        return self._chain.product(exps, base)

    def t_velocity_grid(self, ss, ts):
        fv = self._grid_fvals(ss, ts, [f for K, f, fs, ft in self.factors])
        dft = self._grid_fvals(ss, ts, [ft for K, f, fs, ft in self.factors])
        exps = self._chain.exps(fv)
        base = np.broadcast_to(self.base.values(ts), (len(ss), len(ts), self.dim, self.dim))
        base_d = np.broadcast_to(self.base.velocities(ts), base.shape)
        return self._chain.derivative(exps, dft, base, base_d)

    def s_velocity_grid(self, ss, ts):
        fv = self._grid_fvals(ss, ts, [f for K, f, fs, ft in self.factors])
        dfs = self._grid_fvals(ss, ts, [fs for K, f, fs, ft in self.factors])
        exps = self._chain.exps(fv)
        base = np.broadcast_to(self.base.values(ts), (len(ss), len(ts), self.dim, self.dim))
        return self._chain.derivative(exps, dfs, base, np.zeros_like(base))


class TConstantCylinder(CylinderMap):
    """Cylinder constant along the loop direction: g(s, t) = path(s).

    ``path`` needs batched values/velocities on [0, 1] (velocity = d/ds).
    """

    def __init__(self, path):
        self.path = path
        self.dim = path.dim

    def at(self, s):
        return ConstantLoop(self.path.value(float(s)))

    def sderiv(self, s):
        w = self.path.velocity(float(s))
        base = self.at(s)
        return TangentField(base, values=lambda ts: np.broadcast_to(
            w, (len(np.atleast_1d(ts)),) + w.shape).copy())

    def value_grid(self, ss, ts):
        vals = self.path.values(ss)
        return np.broadcast_to(vals[:, None], (len(ss), len(ts)) + vals.shape[1:]).copy()

    def t_velocity_grid(self, ss, ts):
        return np.zeros((len(ss), len(ts), self.dim, self.dim), dtype=complex)

    def s_velocity_grid(self, ss, ts):
        vels = self.path.velocities(ss)
        return np.broadcast_to(vels[:, None], (len(ss), len(ts)) + vels.shape[1:]).copy()


class CylinderField:
    """Variation of a whole cylinder: W(s, t) in T_{g(s,t)} U(n)."""

    def __init__(self, cylinder: CylinderMap, grid_fn):
        self.cylinder = cylinder
        self.dim = cylinder.dim
        self._grid = grid_fn

    def grid(self, ss, ts) -> np.ndarray:
        return np.asarray(self._grid(ss, ts), dtype=complex)

    def restrict(self, s: float) -> TangentField:
        base = self.cylinder.at(s)
        return TangentField(base, values=lambda ts: self.grid(np.array([s]), np.atleast_1d(ts))[0])


def rotation_field_grid(cylinder: CylinderMap) -> CylinderField:
    """The loop-rotation field of every slice, as a cylinder field."""
    return CylinderField(cylinder, cylinder.t_velocity_grid)


class CylinderPlot:
    """Family p -> cylinder with partial-derivative oracles."""

    param_dim: int
    dim: int

    def at(self, p) -> CylinderMap:
        raise NotImplementedError

    def partial(self, p, i: int) -> CylinderField:
        raise NotImplementedError


class CallableCylinderPlot(CylinderPlot):
    def __init__(self, param_dim, builder, dim, fd_step=_FD_STEP):
        self.param_dim = int(param_dim)
        self._builder = builder
        self.dim = int(dim)
        self._h = float(fd_step)

    def at(self, p):
        return self._builder(np.atleast_1d(np.asarray(p, dtype=float)))

    def partial(self, p, i):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        up, dn = p.copy(), p.copy()
        up[i] += self._h
        dn[i] -= self._h
        hi, lo = self.at(up), self.at(dn)
        cyl = self.at(p)
        return CylinderField(
            cyl, lambda ss, ts: (hi.value_grid(ss, ts) - lo.value_grid(ss, ts))
            / (2 * self._h))


# ---------------------------------------------------------------------------
# randomized smooth inputs (seeded; used by the suite and demos)
# ---------------------------------------------------------------------------

def random_factors(n, count, rng, scale=1.0, modes=2, based=False):
    """Deformation factors (K, f, f') with trigonometric periodic profiles.

    With ``based`` the profiles vanish at t = 0, so the deformed loop keeps
    the basepoint of its base loop (needed for concatenation inputs).
    """
    out = []
    for _ in range(count):
        K = random_anti_hermitian(n, rng, scale=1.0)
        amps = scale * rng.standard_normal(modes) / math.sqrt(modes)
        phases = np.zeros(modes) if based else 2.0 * np.pi * rng.random(modes)
        ks = 2.0 * np.pi * np.arange(1, modes + 1)

        def f(ts, amps=amps, phases=phases, ks=ks):
            ts = np.asarray(ts, dtype=float)
            return sum(a * np.sin(k * ts + ph) for a, k, ph in zip(amps, ks, phases))

        def fp(ts, amps=amps, phases=phases, ks=ks):
            ts = np.asarray(ts, dtype=float)
            return sum(a * k * np.cos(k * ts + ph) for a, k, ph in zip(amps, ks, phases))

        out.append((K, f, fp))
    return out


def random_deformed_loop(n, rng, scale=0.4, nfactors=2, base=None,
                         based=False) -> DeformedLoop:
    """Smooth winding-zero loop with Maurer-Cartan norm O(2 pi scale)."""
    if base is None:
        base = ConstantLoop(np.eye(n, dtype=complex))
    return DeformedLoop(base, random_factors(n, nfactors, rng, scale=scale,
                                             based=based))


# ---------------------------------------------------------------------------
# ingestion: tabulated files and the generator mini-language
# ---------------------------------------------------------------------------

def load_tabulated_json(obj) -> FourierLoop:
    """Build a Fourier loop from {"n": int, "samples": [...], "interpolation": ...}."""
    if isinstance(obj, (str, bytes)):
        obj = json.loads(obj)
    try:
        n = int(obj["n"])
        raw = obj["samples"]
        mode = obj.get("interpolation", "fourier")
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed tabulated loop JSON: {exc}") from exc
    samples = np.stack([cmat_from_json(s) for s in raw])
    if samples.shape[1] != n:
        raise ValueError(f"tabulated samples are {samples.shape[1]}x{samples.shape[1]}, "
                         f"header says n={n}")
    return tabulated_loop(samples, mode=mode)


def loop_from_config(obj) -> UnitaryLoop:
    """Build a loop from the generator mini-language (JSON-compatible dict).

    Generators mirror the constructors one to one:
      {"gen": "exp_loop", "k": [1, -2]}            diagonal 2 pi i winding vector
      {"gen": "exp_loop", "X": CMat, "g0": CMat}   explicit generator
      {"gen": "constant", "g": CMat}
      {"gen": "direct_sum" | "product" | "concat", "parts": [cfg, cfg]}
      {"gen": "inverse", "of": cfg}
      {"gen": "tabulated", "samples": [CMat...]}
      {"gen": "deformed", "n": 2, "seed": 7, "scale": 0.4, "factors": 2}
    """
    if isinstance(obj, (str, bytes)):
        obj = json.loads(obj)
    if not isinstance(obj, dict) or "gen" not in obj:
        raise ValueError("loop config must be an object with a 'gen' field")
    gen = obj["gen"]
    if gen == "exp_loop":
        if "k" in obj:
            ks = np.asarray(obj["k"], dtype=float)
            X = 2j * np.pi * np.diag(ks)
        else:
            X = cmat_from_json(obj["X"])
        g0 = cmat_from_json(obj["g0"]) if "g0" in obj else None
        return exp_loop(X, g0)
    if gen == "constant":
        return constant_loop(cmat_from_json(obj["g"]))
    if gen in ("direct_sum", "product", "concat"):
        parts = obj.get("parts", [])
        if len(parts) < 2:
            raise ValueError(f"{gen} needs at least two parts")
        ctor = {"direct_sum": direct_sum, "product": loop_product, "concat": concat}[gen]
        loop = loop_from_config(parts[0])
        for part in parts[1:]:
            loop = ctor(loop, loop_from_config(part))
        return loop
    if gen == "inverse":
        return loop_inverse(loop_from_config(obj["of"]))
    if gen == "tabulated":
        return load_tabulated_json({"n": obj.get("n"), "samples": obj["samples"],
                                    "interpolation": obj.get("interpolation", "fourier")}
                                   if "n" in obj or "samples" in obj else obj)
    if gen == "deformed":
        n = int(obj.get("n", 2))
        rng = np.random.Generator(np.random.Philox(key=int(obj.get("seed", 0))))
        base_cfg = obj.get("base")
        base = loop_from_config(base_cfg) if base_cfg else None
        return random_deformed_loop(n, rng, scale=float(obj.get("scale", 0.4)),
                                    nfactors=int(obj.get("factors", 2)), base=base)
    raise ValueError(f"unknown loop generator {gen!r}")


def loop_to_tabulated_json(loop: UnitaryLoop, samples=64) -> dict:
    ts = np.linspace(0.0, 1.0, samples, endpoint=False)
    vals = loop.values(ts)
    return {"n": loop.dim, "samples": [cmat_to_json(v) for v in vals],
            "interpolation": "fourier"}
