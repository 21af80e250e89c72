"""Generic evaluation of iterated-integral differential forms.

A form is compiled to *terms*: a scalar coefficient, an ordered word of slots
(each slot a time-indexed matrix-valued form of degree 0, 1 or 2), and a flag
for an outer integral over a family parameter s.  Evaluation on a tuple of
tangent vectors distributes the vectors over the positive-degree slots in
slot order with shuffle signs (no factorial normalization), computes the Chen
iterated integral of the resulting matrix word over the time simplex, and
traces.

Two routes are provided: a generic one driven by payload callables (used by
``eval_slot_sequence`` and the Monte-Carlo mode), and a fast one driven by
payload arrays sampled on the quadrature grid (``evaluate_terms``), which is
what the named forms use.  Both share the shuffle combinatorics.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np

from .matrices import as_matrix
from .quadrature import QuadratureSpec, cumulative_integral, integrate, rule_weights, \
    sorted_uniform_tuples
from .loops import UnitaryLoop, TangentField, velocity_field

__all__ = [
    "SLOT_DEGREE", "Slot", "SlotSequence", "TermSlot", "Term",
    "shuffle_assignments", "word_integral", "PayloadTable", "evaluate_terms",
    "EvalResult", "eval_slot_sequence", "contract_rotation", "pullback_to_plot",
    "fd_exterior_derivative", "observed_order",
]

SLOT_DEGREE = {
    "Contract": 0,
    "OneForm": 1,
    "TwoForm": 2,
    "SDerivOneForm": 1,
    "SDerivTwoForm": 2,
}


# ---------------------------------------------------------------------------
# shuffle combinatorics
# ---------------------------------------------------------------------------

def _parity(perm) -> int:
    inv = 0
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                inv += 1
    return -1 if inv % 2 else 1


@lru_cache(maxsize=None)
def shuffle_assignments(arities: tuple) -> tuple:
    """All signed distributions of inputs (0..d-1) over slots of given arities.

    Each assignment is a tuple of index blocks, one per slot in slot order,
    with indices increasing inside every block; the sign is the parity of the
    concatenated sequence as a permutation of (0..d-1).
    """
    total = sum(arities)

    def rec(remaining, rest):
        if not rest:
            yield ()
            return
        head, tail = rest[0], rest[1:]
        for combo in combinations(remaining, head):
            left = tuple(x for x in remaining if x not in combo)
            for sub in rec(left, tail):
                yield (combo,) + sub

    out = []
    for blocks in rec(tuple(range(total)), tuple(arities)):
        flat = tuple(i for b in blocks for i in b)
        out.append((_parity(flat), blocks))
    return tuple(out)


# ---------------------------------------------------------------------------
# engine-level terms (array route)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TermSlot:
    """One factor of a compiled word.

    ``role`` selects the payload family in the evaluation table; eval_arity
    is the number of shuffle vectors the slot consumes, which for the odd
    transgression form can be one less than the nominal degree of the slot
    (the remaining argument is filled by the s-direction of the cylinder).
    """

    role: str        # contract | one | two | sd_one | sd_contract | sd_two
    eval_arity: int

    @property
    def kind(self) -> str:
        return {"contract": "Contract", "one": "OneForm", "two": "TwoForm",
                "sd_one": "SDerivOneForm", "sd_contract": "SDerivOneForm",
                "sd_two": "SDerivTwoForm"}[self.role]


@dataclass(frozen=True)
class Term:
    coeff: complex
    slots: tuple
    s_integrated: bool = False
    label: object = None   # diagnostic tag (series order n)

    @property
    def total_arity(self) -> int:
        return sum(s.eval_arity for s in self.slots)


def word_integral(arrays, step: float, rule: str):
    """Iterated integral of a word of sampled factors.

    Each array has shape (..., T+1, n, n) with matching leading axes; the
    time axis is third from the right.  Returns the value at t = 1 with the
    time axis dropped.  An empty word returns None (identity).
    """
    cur = None
    for a in arrays:
        prod = a if cur is None else cur @ a
        cur = cumulative_integral(prod, step, rule, axis=-3)
    if cur is None:
        return None
    return cur[..., -1, :, :]


class PayloadTable:
    """Sampled payload arrays for one evaluation, cached by (role, block).

    Subclasses implement ``_build(role, block)`` returning (T+1, n, n) arrays
    or (S+1, T+1, n, n) when the table carries an s axis.
    """

    def __init__(self, dim: int, has_s: bool = False):
        self.dim = int(dim)
        self.has_s = bool(has_s)
        self._cache = {}

    def array(self, role: str, block: tuple) -> np.ndarray:
        key = (role, block)
        if key not in self._cache:
            self._cache[key] = self._build(role, block)
        return self._cache[key]

    def _build(self, role, block):
        raise NotImplementedError


@dataclass
class EvalResult:
    value: complex
    abs_sum: float                 # sum of |contribution| over terms
    by_label: dict = field(default_factory=dict)

    def __complex__(self):
        return complex(self.value)


def evaluate_terms(terms, table: PayloadTable, quad: QuadratureSpec,
                   detail: bool = False):
    """Sum coeff * sum_shuffles sign * Tr(iterated integral) over the terms.

    Words are memoized by their payload keys, so repeated words (common in
    low-degree series) are integrated once.  With an s axis, the trace is
    taken per s node and the outer integral applies quad.rule on the s grid.
    """
    memo = {}
    total = 0.0 + 0.0j
    abs_sum = 0.0
    by_label = {}
    for term in terms:
        arities = tuple(s.eval_arity for s in term.slots)
        acc = None
        for sign, blocks in shuffle_assignments(arities):
            keys = tuple((s.role, b) for s, b in zip(term.slots, blocks))
            val = memo.get(keys)
            if val is None:
                arrays = [table.array(s.role, b) for s, b in zip(term.slots, blocks)]
                mat = word_integral(arrays, quad.t_step, quad.rule)
                if mat is None:
                    val = complex(table.dim)
                    if term.s_integrated:
                        val = np.full(quad.grid_s + 1, val)
                else:
                    val = np.trace(mat, axis1=-2, axis2=-1)
                memo[keys] = val
            acc = sign * val if acc is None else acc + sign * val
        if acc is None:
            acc = complex(table.dim)
        if term.s_integrated:
            acc = integrate(np.asarray(acc), quad.s_step, quad.rule, axis=0)
        contrib = term.coeff * complex(acc)
        total += contrib
        if detail:
            abs_sum += abs(contrib)
            if term.label is not None:
                by_label[term.label] = by_label.get(term.label, 0.0 + 0.0j) + contrib
    if detail:
        return EvalResult(total, abs_sum, by_label)
    return total


# ---------------------------------------------------------------------------
# generic slot sequences with callable payloads
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Slot:
    """A form factor with its payload.

    Payload call conventions (s prepended when the sequence is s-integrated):
      Contract          payload(t, rot)        rot = gamma'(t), consumes none
      OneForm           payload(t, v)
      SDerivOneForm     payload(t, v)
      TwoForm           payload(t, v, w), or a pair (alpha, beta) of one-form
                        payloads combined as alpha(v) beta(w) - alpha(w) beta(v)
    """

    kind: str
    payload: object

    @property
    def degree(self) -> int:
        return SLOT_DEGREE[self.kind]


@dataclass(frozen=True)
class SlotSequence:
    coeff: complex
    slots: tuple
    s_integrated: bool = False

    @property
    def total_degree(self) -> int:
        return sum(s.degree for s in self.slots)


def _check_fields(loop: UnitaryLoop, fields):
    for f in fields:
        if f.dim != loop.dim:
            raise ValueError(f"tangent field dimension {f.dim} does not match "
                             f"loop dimension {loop.dim}")
        base = getattr(f, "base", None)
        if base is not None and base is not loop:
            for t in (0.17, 0.55, 0.89):
                if np.max(np.abs(base.value(t) - loop.value(t))) > 1e-8:
                    raise ValueError("tangent field is over a different base loop")
            break  # one spot check is enough per tuple


def _payload_fn(slot: Slot, block, rot, vec_fields, s):
    """Bind a slot payload and its assigned vectors into t -> matrix."""
    pay = slot.payload
    args = tuple(vec_fields[i] for i in block)

    def at(t):
        if slot.kind == "Contract":
            vals = (rot(t),)
        elif slot.kind in ("OneForm", "SDerivOneForm"):
            vals = (args[0](t),)
        else:
            vals = (args[0](t), args[1](t))
        if slot.kind == "TwoForm" and isinstance(pay, tuple):
            alpha, beta = pay
            v, w = vals
            if s is None:
                return (as_matrix(alpha(t, v)) @ as_matrix(beta(t, w))
                        - as_matrix(alpha(t, w)) @ as_matrix(beta(t, v)))
            return (as_matrix(alpha(s, t, v)) @ as_matrix(beta(s, t, w))
                    - as_matrix(alpha(s, t, w)) @ as_matrix(beta(s, t, v)))
        if s is None:
            return as_matrix(pay(t, *vals))
        return as_matrix(pay(s, t, *vals))

    return at


def eval_slot_sequence(loop: UnitaryLoop, seq: SlotSequence, vectors,
                       quad: QuadratureSpec, s_context=None) -> complex:
    """Evaluate one slot word on a tuple of tangent fields.

    This is the reference route: payloads are called pointwise, the simplex
    integral runs through the cumulative recursion (or Monte-Carlo when
    quad.mc_samples > 0), and an s-integrated sequence applies quad.rule on
    the s grid.  The fast array route in the named forms must agree with it.
    """
    vectors = list(vectors)
    if len(vectors) != seq.total_degree:
        raise ValueError(f"arity mismatch: sequence of degree {seq.total_degree} "
                         f"evaluated on {len(vectors)} vectors")
    _check_fields(loop, vectors)
    rot = loop.velocity
    vec_fns = [v.value for v in vectors]
    arities = tuple(s.degree for s in seq.slots)

    def inner(s):
        acc = 0.0 + 0.0j
        for sign, blocks in shuffle_assignments(arities):
            fns = [_payload_fn(slot, block, rot, vec_fns, s)
                   for slot, block in zip(seq.slots, blocks)]
            mat = _simplex_value(fns, quad, loop.dim)
            acc += sign * np.trace(mat)
        return acc

    if not seq.s_integrated:
        return seq.coeff * inner(None)
    ss = quad.s_nodes()
    vals = np.array([inner(float(s)) for s in ss])
    return seq.coeff * complex(integrate(vals, quad.s_step, quad.rule, axis=0))


def _simplex_value(fns, quad: QuadratureSpec, dim: int) -> np.ndarray:
    if not fns:
        return np.eye(dim, dtype=complex)
    if quad.mc_samples > 0:
        pts = sorted_uniform_tuples(len(fns), quad.mc_samples, quad.seed)
        total = None
        for row in pts:
            prod = fns[0](float(row[0]))
            for j in range(1, len(fns)):
                prod = prod @ fns[j](float(row[j]))
            total = prod if total is None else total + prod
        vol = 1.0
        for j in range(2, len(fns) + 1):
            vol /= j
        return total * (vol / quad.mc_samples)
    ts = quad.t_nodes()
    cur = None
    for f in fns:
        vals = np.stack([f(float(t)) for t in ts])
        if cur is not None:
            vals = cur @ vals
        cur = cumulative_integral(vals, quad.t_step, quad.rule, axis=0)
    return cur[-1]


# ---------------------------------------------------------------------------
# contraction, pullback, and the finite-difference exterior derivative
# ---------------------------------------------------------------------------

def contract_rotation(loop: UnitaryLoop, form, vectors=()) -> complex:
    """Insert the loop-rotation field gamma' into the first slot of a form.

    ``form`` is a loop-space form evaluator: form(loop, fields) -> complex.
    """
    return form(loop, [velocity_field(loop), *vectors])


def pullback_to_plot(form, plot, indices):
    """Component of the pulled-back form along the chosen parameter axes.

    Returns p -> form(plot.at(p); partial_{i1}, ..., partial_{ik}).  Repeated
    indices give the zero function (the form is alternating).
    """
    indices = tuple(int(i) for i in indices)
    for i in indices:
        if not 0 <= i < plot.param_dim:
            raise IndexError(f"plot axis {i} out of range (param_dim={plot.param_dim})")
    if len(set(indices)) != len(indices):
        return lambda p: 0.0 + 0.0j

    def component(p):
        loop = plot._cached_at(p) if hasattr(plot, "_cached_at") else plot.at(p)
        fields = [plot.partial(p, i) for i in indices]
        return form(loop, fields)

    return component


def fd_exterior_derivative(alpha, p, h: float, out_indices, domain=None) -> complex:
    """(d alpha)_{i0...ik}(p) by central differences with step h.

    ``alpha(p, indices)`` evaluates a component of the k-form; the result is
    sum_j (-1)^j d/dx_{i_j} alpha_{... i_j omitted ...} at p, order-2 in h.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    out_indices = tuple(int(i) for i in out_indices)
    if domain is not None:
        for (lo, hi), x in zip(domain, p):
            if not (lo + h <= x <= hi - h):
                raise ValueError(f"point {x} within h={h} of the domain boundary")
    total = 0.0 + 0.0j
    for j, ij in enumerate(out_indices):
        rest = out_indices[:j] + out_indices[j + 1:]
        up, dn = p.copy(), p.copy()
        up[ij] += h
        dn[ij] -= h
        diff = (alpha(up, rest) - alpha(dn, rest)) / (2.0 * h)
        total += (-1) ** j * diff
    return total


def observed_order(pairs) -> float:
    """Median convergence order from a list of (h, residual) pairs."""
    rates = []
    for (h1, r1), (h2, r2) in zip(pairs, pairs[1:]):
        if r1 > 0 and r2 > 0 and h1 != h2:
            rates.append(np.log(r1 / r2) / np.log(h1 / h2))
    if not rates:
        return float("nan")
    return float(np.median(rates))
