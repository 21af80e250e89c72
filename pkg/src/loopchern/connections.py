"""Connection data along loops: local connection/curvature evaluators, paths
of connections, the gauge path d + s omega, and projector (Grassmannian)
connections.

A connection here is purely local data along a chosen base loop: a one-form
value A(t, V) and a curvature value R(t, V, W), both n x n complex matrices.
The tangent representation is whatever the base loop uses (matrices for loops
in U(n), coordinate vectors for loops in a parameter space), so the same
machinery drives gauge connections and projector families.
"""
from __future__ import annotations

import numpy as np

from .matrices import as_matrix
from .loops import UnitaryLoop, TangentField

__all__ = [
    "ConnectionData",
    "ConnectionPath",
    "GaugeConnectionPath",
    "gauge_path_connection",
    "ProjectorFamily",
    "grassmann_connection",
    "BaseLoop",
    "BaseField",
    "sum_connection",
    "tensor_connection",
]


class ConnectionData:
    """Local connection matrix A and curvature R along a base loop."""

    def __init__(self, dim, one_form, curvature):
        self.dim = int(dim)          # fiber dimension of the matrix values
        self._one_form = one_form
        self._curvature = curvature

    def one_form(self, t, v) -> np.ndarray:
        return as_matrix(self._one_form(t, v))

    def curvature(self, t, v, w) -> np.ndarray:
        return as_matrix(self._curvature(t, v, w))


class ConnectionPath:
    """One-parameter family of connections A_s with its s-derivative A'_s."""

    def __init__(self, dim, at_s, s_deriv_one_form):
        self.dim = int(dim)
        self._at_s = at_s
        self._s_deriv = s_deriv_one_form

    def at_s(self, s) -> ConnectionData:
        return self._at_s(s)

    def s_deriv_one_form(self, s, t, v) -> np.ndarray:
        return as_matrix(self._s_deriv(s, t, v))


class GaugeConnectionPath(ConnectionPath):
    """The straight gauge path A_s = s omega along a loop in U(n):

        A_s(t, V)    = s gamma(t)^-1 V
        R_s(t, V, W) = -s(1-s) [omega(V) omega(W) - omega(W) omega(V)](t)
        A'_s(t, V)   = gamma(t)^-1 V

    The s-dependence is polynomial, which the evaluator exploits by building
    grids from Maurer-Cartan samples and broadcasting the s profiles.
    """

    def __init__(self, loop: UnitaryLoop):
        self.loop = loop
        super().__init__(loop.dim, self._make_at_s, self._sderiv)

    def _omega(self, t, v):
        return np.linalg.solve(self.loop.value(t), as_matrix(v))

    def _make_at_s(self, s):
        s = float(s)

        def one_form(t, v):
            return s * self._omega(t, v)

        def curvature(t, v, w):
            a = self._omega(t, v)
            b = self._omega(t, w)
            return -s * (1.0 - s) * (a @ b - b @ a)

        return ConnectionData(self.dim, one_form, curvature)

    def _sderiv(self, s, t, v):
        return self._omega(t, v)


def gauge_path_connection(loop: UnitaryLoop) -> GaugeConnectionPath:
    return GaugeConnectionPath(loop)


# ---------------------------------------------------------------------------
# base-space loops with vector-valued tangents (parameter-space carriers)
# ---------------------------------------------------------------------------

class BaseLoop:
    """Closed curve in a parameter space R^m, tangents are coordinate vectors."""

    def __init__(self, dim_params, value, velocity, fd_step=1e-4):
        self.param_dim = int(dim_params)
        self._value = value
        self._velocity = velocity
        self._h = float(fd_step)

    def value(self, t):
        return np.atleast_1d(np.asarray(self._value(t % 1.0), dtype=float))

    def velocity(self, t):
        if self._velocity is not None:
            return np.atleast_1d(np.asarray(self._velocity(t % 1.0), dtype=float))
        h = self._h
        return (self.value(t + h) - self.value(t - h)) / (2 * h)


class BaseField:
    """Variation along a base-space loop (vector-valued)."""

    def __init__(self, base: BaseLoop, value):
        self.base = base
        self._value = value

    def value(self, t):
        return np.atleast_1d(np.asarray(self._value(t % 1.0), dtype=float))


# ---------------------------------------------------------------------------
# projector families: nabla = P d with curvature P (dP)^2
# ---------------------------------------------------------------------------

class ProjectorFamily:
    """Family p -> Hermitian projector P(p) on C^n, with partials.

    ``partial`` may be omitted, in which case central differences with the
    given step are used.
    """

    def __init__(self, param_dim, value, partial=None, fd_step=1e-5,
                 projector_tol=1e-8):
        self.param_dim = int(param_dim)
        self._value = value
        self._partial = partial
        self._h = float(fd_step)
        self._tol = float(projector_tol)

    def value(self, p):
        P = as_matrix(self._value(np.atleast_1d(np.asarray(p, dtype=float))))
        herm = float(np.max(np.abs(P - P.conj().T)))
        idem = float(np.max(np.abs(P @ P - P)))
        if herm > self._tol or idem > self._tol:
            raise ValueError(
                f"not a Hermitian projector: |P-P*|={herm:.3e}, |P^2-P|={idem:.3e}")
        return P

    def partial(self, p, i):
        if self._partial is not None:
            return as_matrix(self._partial(np.atleast_1d(np.asarray(p, dtype=float)), i))
        p = np.atleast_1d(np.asarray(p, dtype=float))
        up, dn = p.copy(), p.copy()
        up[i] += self._h
        dn[i] -= self._h
        return (as_matrix(self._value(up)) - as_matrix(self._value(dn))) / (2 * self._h)

    def directional(self, p, v):
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return sum(v[i] * self.partial(p, i) for i in range(self.param_dim))


def grassmann_connection(family: ProjectorFamily, base_loop: BaseLoop) -> ConnectionData:
    """Connection P dP of a projector family, pulled to a parameter-space loop.

        A(t, V)    = P(c(t)) dP(V)
        R(t, V, W) = P(c(t)) (dP(V) dP(W) - dP(W) dP(V))
    """
    probe = family.value(base_loop.value(0.0))

    def one_form(t, v):
        p = base_loop.value(t)
        return family.value(p) @ family.directional(p, v)

    def curvature(t, v, w):
        p = base_loop.value(t)
        dv = family.directional(p, v)
        dw = family.directional(p, w)
        return family.value(p) @ (dv @ dw - dw @ dv)

    return ConnectionData(probe.shape[0], one_form, curvature)


# ---------------------------------------------------------------------------
# sums and (abelian) tensor products of connection data
# ---------------------------------------------------------------------------

def sum_connection(c1: ConnectionData, c2: ConnectionData) -> ConnectionData:
    """Whitney-sum connection: block-diagonal one-form and curvature."""
    from .matrices import block_diag

    def one_form(t, v):
        return block_diag(c1.one_form(t, v), c2.one_form(t, v))

    def curvature(t, v, w):
        return block_diag(c1.curvature(t, v, w), c2.curvature(t, v, w))

    return ConnectionData(c1.dim + c2.dim, one_form, curvature)


def tensor_connection(c1: ConnectionData, c2: ConnectionData) -> ConnectionData:
    """Tensor-product connection A (x) I + I (x) A-bar, curvature likewise.

    The curvature of the tensor connection is R (x) I + I (x) R-bar; the
    cross terms cancel because the two factors commute in End(E (x) E-bar).
    """
    i1 = np.eye(c1.dim, dtype=complex)
    i2 = np.eye(c2.dim, dtype=complex)

    def one_form(t, v):
        return np.kron(c1.one_form(t, v), i2) + np.kron(i1, c2.one_form(t, v))

    def curvature(t, v, w):
        return np.kron(c1.curvature(t, v, w), i2) + np.kron(i1, c2.curvature(t, v, w))

    return ConnectionData(c1.dim * c2.dim, one_form, curvature)


def connection_field(base: UnitaryLoop, values) -> TangentField:
    """Convenience wrapper so matrix-group tangent data can be fed uniformly."""
    return TangentField(base, values=values)
