"""The named differential forms: odd Chern, odd Chern-Simons, even holonomy
(Bismut-Chern) components, even Bismut-Chern-Simons, odd Bismut-Chern, and
its transgression on cylinders.

Each form is compiled once to a list of slot-sequence terms (a scalar
coefficient and an ordered word of degree-0/1/2 factors, one per simplex
variable) by ``build_form_spec`` and evaluated through the shared word
engine.  Series in the word length n are truncated at ``n_max``; the tail is
bounded by the exponential remainder in the sup norm of the contracted
Maurer-Cartan form.

Conventions, fixed throughout and pinned by tests:
  * wedge evaluation uses the shuffle sum with no factorial normalization,
    so omega^2(V, W) = omega(V) omega(W) - omega(W) omega(V);
  * position sums run over a distinguished index r and an increasing k-subset
    {j_1 < ... < j_k} disjoint from it, all factors ordered by time index;
  * no 1/(2 pi i) normalization anywhere except the reported normalized
    winding number;
  * in the cylinder transgression form, the term that differentiates a
    curvature slot against the family parameter carries the sign +1 when
    r < j_i and -1 when r > j_i, and the slot payload is
    omega(V) D_s - D_s omega(V) with D_s = g^-1 dg/ds.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations, permutations

import numpy as np

from .quadrature import QuadratureSpec, integrate
from .loops import UnitaryLoop, ConstantLoop, CylinderMap, CylinderField
from .connections import ConnectionData, ConnectionPath, GaugeConnectionPath
from .formeval import PayloadTable, Term, TermSlot, evaluate_terms, _check_fields

__all__ = [
    "FORM_NAMES", "FormSpec", "build_form_spec",
    "ch_odd", "ch_odd_at", "cs_odd", "winding_number", "WindingResult",
    "tr_hol_even", "bcs_even", "bch_odd", "bcs_odd",
    "series_tail_bound", "omega_sup_norm",
]

FORM_NAMES = ("ch-odd", "cs-odd", "tr-hol-even", "bcs-even", "bch-odd", "bcs-odd")

_MAX_DEGREE = 6


def _fact(n: int) -> float:
    return float(math.factorial(n))


def _series_coeff(n: int, k: int) -> float:
    # (-1)^k (n-1)! k! / (n+k)!
    return (-1.0) ** k * _fact(n - 1) * _fact(k) / _fact(n + k)


@dataclass(frozen=True)
class FormSpec:
    """A named form compiled to slot-sequence terms."""

    name: str
    degree: int
    n_max: int
    terms: tuple

    @property
    def term_count(self) -> int:
        return len(self.terms)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "degree": self.degree,
            "n_max": self.n_max,
            "terms": [
                {
                    "coeff": [float(np.real(t.coeff)), float(np.imag(t.coeff))],
                    "slots": [s.kind for s in t.slots],
                    "sIntegrated": bool(t.s_integrated),
                }
                for t in self.terms
            ],
        }


def _positions(n, r, jset):
    """Word slots for positions 1..n with the r and j markers placed."""
    return tuple(
        TermSlot("one", 1) if pos == r
        else TermSlot("two", 2) if pos in jset
        else TermSlot("contract", 0)
        for pos in range(1, n + 1)
    )


def build_form_spec(name: str, degree: int, n_max: int = 10) -> FormSpec:
    """Compile a named form at one degree to its term list.

    Raises on a degree/parity mismatch and on degrees beyond the supported
    cap (words of degree > 6 are out of scope).
    """
    if name not in FORM_NAMES:
        raise ValueError(f"unknown form {name!r}; choose from {FORM_NAMES}")
    if degree < 0 or degree > _MAX_DEGREE:
        raise ValueError(f"degree {degree} outside supported range 0..{_MAX_DEGREE}")
    odd = name in ("ch-odd", "bcs-even", "bch-odd")
    if odd and degree % 2 == 0:
        raise ValueError(f"{name} has odd degrees, got {degree}")
    if not odd and degree % 2:
        raise ValueError(f"{name} has even degrees, got {degree}")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")

    terms = []
    if name == "ch-odd":
        kappa = (degree - 1) // 2
        coeff = (-1.0) ** kappa * _fact(kappa) / _fact(2 * kappa + 1)
        terms.append(Term(coeff, tuple(TermSlot("one", 1) for _ in range(degree))))
    elif name == "cs-odd":
        kappa = degree // 2
        coeff = (-1.0) ** kappa * _fact(kappa) / _fact(2 * kappa)
        slots = (TermSlot("contract", 0),) + tuple(TermSlot("one", 1) for _ in range(degree))
        terms.append(Term(coeff, slots))
    elif name == "tr-hol-even":
        k = degree // 2
        for m in range(k, n_max + 1):
            for jset in combinations(range(1, m + 1), k):
                slots = tuple(
                    TermSlot("two", 2) if pos in jset else TermSlot("contract", 0)
                    for pos in range(1, m + 1))
                terms.append(Term(1.0, slots, label=m))
    elif name == "bch-odd":
        k = (degree - 1) // 2
        for n in range(k + 1, n_max + 1):
            c = _series_coeff(n, k)
            for r in range(1, n + 1):
                rest = [pos for pos in range(1, n + 1) if pos != r]
                for jset in combinations(rest, k):
                    terms.append(Term(c, _positions(n, r, jset), label=n))
    elif name == "bcs-even":
        k = (degree - 1) // 2
        for n in range(k + 1, n_max + 1):
            for r in range(1, n + 1):
                rest = [pos for pos in range(1, n + 1) if pos != r]
                for jset in combinations(rest, k):
                    slots = tuple(
                        TermSlot("sd_one", 1) if pos == r
                        else TermSlot("two", 2) if pos in jset
                        else TermSlot("contract", 0)
                        for pos in range(1, n + 1))
                    terms.append(Term(1.0, slots, s_integrated=True, label=n))
    else:  # bcs-odd
        k = degree // 2
        for n in range(k + 1, n_max + 1):
            c = _series_coeff(n, k)
            for r in range(1, n + 1):
                rest = [pos for pos in range(1, n + 1) if pos != r]
                for jset in combinations(rest, k):
                    # family derivative on the distinguished one-form slot
                    slots = tuple(
                        TermSlot("sd_contract", 0) if pos == r
                        else TermSlot("two", 2) if pos in jset
                        else TermSlot("contract", 0)
                        for pos in range(1, n + 1))
                    terms.append(Term(c, slots, s_integrated=True, label=n))
                    # family derivative on one curvature slot, signed by the
                    # relative position of r
                    for jm in jset:
                        sign = 1.0 if r < jm else -1.0
                        slots = tuple(
                            TermSlot("one", 1) if pos == r
                            else TermSlot("sd_two", 1) if pos == jm
                            else TermSlot("two", 2) if pos in jset
                            else TermSlot("contract", 0)
                            for pos in range(1, n + 1))
                        terms.append(Term(sign * c, slots, s_integrated=True, label=n))
    return FormSpec(name, degree, n_max, tuple(terms))


# ---------------------------------------------------------------------------
# payload tables
# ---------------------------------------------------------------------------

class LoopOmegaTable(PayloadTable):
    """Maurer-Cartan payloads along a loop: iota omega, omega(V), omega^2."""

    def __init__(self, loop: UnitaryLoop, fields, quad: QuadratureSpec):
        super().__init__(loop.dim, has_s=False)
        self._ts = quad.t_nodes()
        self._g = loop.values(self._ts)
        self._iw = np.linalg.solve(self._g, loop.velocities(self._ts))
        self._fields = list(fields)
        self._w = {}

    def _omega(self, i):
        if i not in self._w:
            self._w[i] = np.linalg.solve(self._g, self._fields[i].values(self._ts))
        return self._w[i]

    def _build(self, role, block):
        if role == "contract":
            return self._iw
        if role == "one":
            return self._omega(block[0])
        if role == "two":
            a, b = self._omega(block[0]), self._omega(block[1])
            return a @ b - b @ a
        raise KeyError(f"role {role!r} not available on a loop table")


class ConnectionTable(PayloadTable):
    """Connection payloads along a base loop: iota A and R(V_i, V_j)."""

    def __init__(self, base_loop, conn: ConnectionData, fields, quad: QuadratureSpec):
        super().__init__(conn.dim, has_s=False)
        self._ts = quad.t_nodes()
        self._loop = base_loop
        self._conn = conn
        self._fields = list(fields)

    def _build(self, role, block):
        ts = self._ts
        if role == "contract":
            return np.stack([self._conn.one_form(float(t), self._loop.velocity(float(t)))
                             for t in ts])
        if role == "one":
            f = self._fields[block[0]]
            return np.stack([self._conn.one_form(float(t), f.value(float(t)))
                             for t in ts])
        if role == "two":
            fa, fb = self._fields[block[0]], self._fields[block[1]]
            return np.stack([self._conn.curvature(float(t), fa.value(float(t)),
                                                  fb.value(float(t)))
                             for t in ts])
        raise KeyError(f"role {role!r} not available on a connection table")


class ConnectionPathTable(PayloadTable):
    """Payloads of a path of connections, with the outer s axis.

    For the straight gauge path the s-dependence is polynomial and the grids
    are built by broadcasting Maurer-Cartan samples; a generic path falls
    back to pointwise calls on the (s, t) grid.
    """

    def __init__(self, base_loop, path: ConnectionPath, fields, quad: QuadratureSpec):
        super().__init__(path.dim, has_s=True)
        self._loop = base_loop
        self._path = path
        self._fields = list(fields)
        self._quad = quad
        self._ss = quad.s_nodes()
        self._ts = quad.t_nodes()
        self._gauge = isinstance(path, GaugeConnectionPath)
        if self._gauge:
            g = base_loop.values(self._ts)
            self._g = g
            self._iw = np.linalg.solve(g, base_loop.velocities(self._ts))
            self._w = {}

    def _omega(self, i):
        if i not in self._w:
            self._w[i] = np.linalg.solve(self._g, self._fields[i].values(self._ts))
        return self._w[i]

    def _build(self, role, block):
        ss, ts = self._ss, self._ts
        if self._gauge:
            s_col = ss[:, None, None, None]
            if role == "contract":
                return s_col * self._iw[None]
            if role == "sd_one":
                w = self._omega(block[0])
                return np.broadcast_to(w, (len(ss),) + w.shape).copy()
            if role == "two":
                a, b = self._omega(block[0]), self._omega(block[1])
                comm = a @ b - b @ a
                return (-(ss * (1.0 - ss)))[:, None, None, None] * comm[None]
            raise KeyError(f"role {role!r} not available on a connection-path table")

        def grid(fn):
            return np.stack([
                np.stack([fn(float(s), float(t)) for t in ts]) for s in ss])

        if role == "contract":
            return grid(lambda s, t: self._path.at_s(s).one_form(
                t, self._loop.velocity(t)))
        if role == "sd_one":
            f = self._fields[block[0]]
            return grid(lambda s, t: self._path.s_deriv_one_form(s, t, f.value(t)))
        if role == "two":
            fa, fb = self._fields[block[0]], self._fields[block[1]]
            return grid(lambda s, t: self._path.at_s(s).curvature(
                t, fa.value(t), fb.value(t)))
        raise KeyError(f"role {role!r} not available on a connection-path table")


class CylinderTable(PayloadTable):
    """Payloads for the transgression form on a cylinder of loops."""

    def __init__(self, cyl: CylinderMap, fields, quad: QuadratureSpec):
        super().__init__(cyl.dim, has_s=True)
        ss, ts = quad.s_nodes(), quad.t_nodes()
        self._ss, self._ts = ss, ts
        g = cyl.value_grid(ss, ts)
        self._g = g
        self._iw = np.linalg.solve(g, cyl.t_velocity_grid(ss, ts))
        self._ds = np.linalg.solve(g, cyl.s_velocity_grid(ss, ts))
        self._fields = list(fields)
        self._w = {}

    def _omega(self, i):
        if i not in self._w:
            self._w[i] = np.linalg.solve(self._g, self._fields[i].grid(self._ss, self._ts))
        return self._w[i]

    def _build(self, role, block):
        if role == "contract":
            return self._iw
        if role == "sd_contract":
            return self._ds
        if role == "one":
            return self._omega(block[0])
        if role == "two":
            a, b = self._omega(block[0]), self._omega(block[1])
            return a @ b - b @ a
        if role == "sd_two":
            w = self._omega(block[0])
            return w @ self._ds - self._ds @ w
        raise KeyError(f"role {role!r} not available on a cylinder table")


# ---------------------------------------------------------------------------
# named evaluators
# ---------------------------------------------------------------------------

def _default_quad(quad):
    return quad if quad is not None else QuadratureSpec()


def ch_odd_at(g, tangents) -> complex:
    """Odd Chern form at a group element on explicit tangent matrices.

    Tr sum_n (-1)^n n!/(2n+1)! omega^{2n+1} evaluated under the shuffle
    convention: the full alternating sum over orderings of g^-1 W_i.
    """
    tangents = [np.asarray(w, dtype=complex) for w in tangents]
    d = len(tangents)
    if d % 2 == 0:
        raise ValueError(f"odd Chern form needs an odd number of tangents, got {d}")
    g = np.asarray(g, dtype=complex)
    mats = [np.linalg.solve(g, w) for w in tangents]
    kappa = (d - 1) // 2
    coeff = (-1.0) ** kappa * _fact(kappa) / _fact(d)
    return coeff * _alternating_trace(mats)


def _alternating_trace(mats) -> complex:
    d = len(mats)
    if d == 0:
        return complex(mats)  # unreachable; degree >= 1 here
    total = 0.0 + 0.0j
    for perm in permutations(range(d)):
        prod = mats[perm[0]]
        for idx in perm[1:]:
            prod = prod @ mats[idx]
        total += _perm_sign(perm) * np.trace(prod)
    return total


def _perm_sign(perm) -> int:
    inv = sum(1 for i in range(len(perm)) for j in range(i + 1, len(perm))
              if perm[i] > perm[j])
    return -1 if inv % 2 else 1


def ch_odd(map_plot, p, indices) -> complex:
    """Odd Chern form of a map plot, on the chosen parameter directions."""
    g = map_plot.value(p)
    ws = [map_plot.partial(p, i) for i in indices]
    return ch_odd_at(g, ws)


def cs_odd(map_path, p, indices, quad: QuadratureSpec = None) -> complex:
    """Odd Chern-Simons form of a path of maps, degree = len(indices).

    Tr sum_n (-1)^n n!/(2n)! int_0^1 (g^-1 g') (g^-1 dg)^{2n} dt with the
    wedge power expanded as the alternating sum over the chosen directions.
    """
    quad = _default_quad(quad)
    indices = tuple(indices)
    if len(indices) % 2:
        raise ValueError(f"odd Chern-Simons form has even degrees, got {len(indices)}")
    us = quad.t_nodes()
    g = map_path.values_u(p, us)
    dvel = np.linalg.solve(g, map_path.u_velocities(p, us))
    mats = [np.linalg.solve(g, map_path.partials_u(p, i, us)) for i in indices]
    d = len(indices)
    kappa = d // 2
    coeff = (-1.0) ** kappa * _fact(kappa) / _fact(d) if d else 1.0
    if d == 0:
        integrand = np.trace(dvel, axis1=-2, axis2=-1)
        return complex(integrate(integrand, quad.t_step, quad.rule, axis=0))
    alt = None
    for perm in permutations(range(d)):
        prod = mats[perm[0]]
        for idx in perm[1:]:
            prod = prod @ mats[idx]
        alt = _perm_sign(perm) * prod if alt is None else alt + _perm_sign(perm) * prod
    integrand = np.trace(dvel @ alt, axis1=-2, axis2=-1)
    return coeff * complex(integrate(integrand, quad.t_step, quad.rule, axis=0))


@dataclass(frozen=True)
class WindingResult:
    raw: complex           # Tr int gamma^-1 gamma' dt, no 1/(2 pi i)
    rounded: int
    residual: float        # |raw/(2 pi i) - rounded|

    def to_json(self) -> dict:
        return {"raw": [self.raw.real, self.raw.imag], "rounded": self.rounded,
                "residual": self.residual}


def winding_number(loop: UnitaryLoop, quad: QuadratureSpec = None) -> WindingResult:
    """Degree-zero odd Chern-Simons value of a loop and its integer rounding."""
    quad = _default_quad(quad)
    ts = quad.t_nodes()
    iw = np.linalg.solve(loop.values(ts), loop.velocities(ts))
    raw = complex(integrate(np.trace(iw, axis1=-2, axis2=-1), quad.t_step,
                            quad.rule, axis=0))
    normalized = raw / (2j * np.pi)
    rounded = int(np.round(normalized.real))
    residual = abs(normalized - rounded)
    if residual > 0.01:
        warnings.warn(f"winding number not integral at current quadrature: "
                      f"residual {residual:.3e}", stacklevel=2)
    return WindingResult(raw, rounded, residual)


def _degree_k(vectors, parity_odd, what):
    d = len(vectors)
    if parity_odd and d % 2 == 0:
        raise ValueError(f"{what} takes an odd number of vectors, got {d}")
    if not parity_odd and d % 2:
        raise ValueError(f"{what} takes an even number of vectors, got {d}")
    return (d - 1) // 2 if parity_odd else d // 2


def tr_hol_even(base_loop, conn: ConnectionData, vectors, n_max: int = 10,
                quad: QuadratureSpec = None, detail: bool = False):
    """Even holonomy form Tr(hol_{2k}): the time-ordered series with k
    curvature insertions at all increasing position subsets."""
    quad = _default_quad(quad)
    vectors = list(vectors)
    _degree_k(vectors, parity_odd=False, what="tr_hol_even")
    spec = build_form_spec("tr-hol-even", len(vectors), n_max)
    table = ConnectionTable(base_loop, conn, vectors, quad)
    return evaluate_terms(spec.terms, table, quad, detail)


def bcs_even(loop, path: ConnectionPath, vectors, n_max: int = 10,
             quad: QuadratureSpec = None, detail: bool = False):
    """Even-family Bismut-Chern-Simons form: one A'_s insertion, k curvature
    insertions, outer numeric integral over the family parameter."""
    quad = _default_quad(quad)
    vectors = list(vectors)
    _degree_k(vectors, parity_odd=True, what="bcs_even")
    spec = build_form_spec("bcs-even", len(vectors), n_max)
    table = ConnectionPathTable(loop, path, vectors, quad)
    return evaluate_terms(spec.terms, table, quad, detail)


def bch_odd(loop: UnitaryLoop, vectors, n_max: int = 10,
            quad: QuadratureSpec = None, detail: bool = False):
    """Odd Bismut-Chern form on a loop in U(n).

    The family integral of the gauge path is already folded into the printed
    coefficient (-1)^k (n-1)! k! / (n+k)!, so no s-quadrature appears."""
    quad = _default_quad(quad)
    vectors = list(vectors)
    _degree_k(vectors, parity_odd=True, what="bch_odd")
    _check_fields(loop, vectors)
    spec = build_form_spec("bch-odd", len(vectors), n_max)
    table = LoopOmegaTable(loop, vectors, quad)
    return evaluate_terms(spec.terms, table, quad, detail)


def bcs_odd(cyl: CylinderMap, fields, n_max: int = 10,
            quad: QuadratureSpec = None, detail: bool = False):
    """Transgression of the odd Bismut-Chern form on a cylinder of loops.

    ``fields`` are cylinder variations (CylinderField); the s-direction of
    the cylinder fills the distinguished slot of each word, so the arity
    equals the form degree 2k."""
    quad = _default_quad(quad)
    fields = list(fields)
    _degree_k(fields, parity_odd=False, what="bcs_odd")
    for f in fields:
        if f.dim != cyl.dim:
            raise ValueError("cylinder field dimension mismatch")
    spec = build_form_spec("bcs-odd", len(fields), n_max)
    table = CylinderTable(cyl, fields, quad)
    return evaluate_terms(spec.terms, table, quad, detail)


# ---------------------------------------------------------------------------
# truncation diagnostics
# ---------------------------------------------------------------------------

def omega_sup_norm(loop: UnitaryLoop, samples: int = 257) -> float:
    """Sup of the spectral norm of gamma^-1 gamma' on a probe grid."""
    ts = np.linspace(0.0, 1.0, samples)
    iw = np.linalg.solve(loop.values(ts), loop.velocities(ts))
    return float(np.max(np.linalg.norm(iw, 2, axis=(-2, -1))))


def series_tail_bound(sup_norm: float, n_max: int) -> float:
    """Bound on sum_{n > n_max} x^n / n! (exponential remainder)."""
    x = float(sup_norm)
    head = x ** (n_max + 1) / _fact(n_max + 1)
    ratio = x / (n_max + 2)
    if ratio >= 1.0:
        return float("inf")
    return head / (1.0 - ratio)
