"""Scratch 4: Lemma 5.1, BCS restriction (sign-rule pin), tensor, closure order."""
import numpy as np

from loopchern.quadrature import QuadratureSpec
from loopchern.loops import (
    ConstantLoop, TangentField, FactorMapPath, TConstantCylinder,
    CallableLoop, DeformedLoopPlot, random_deformed_loop, random_factors,
    velocity_field,
)
from loopchern.connections import gauge_path_connection, ConnectionData
from loopchern.forms import (
    bch_odd, bcs_even, bcs_odd, ch_odd_at, cs_odd, tr_hol_even,
)
from loopchern.matrices import random_anti_hermitian, random_unitary, expm, path_ordered_exp

rng = np.random.default_rng(21)
quad = QuadratureSpec(grid_t=256, grid_s=64, rule="simpson")

print("=== Lemma 5.1: ch_odd vs bcs_even(gauge path) at constant loop ===")
g = random_unitary(2, rng)
Ws = [g @ random_anti_hermitian(2, rng) for _ in range(3)]
loop = ConstantLoop(g)
fields = [TangentField(loop, values=lambda ts, W=W: np.broadcast_to(W, (len(ts), 2, 2)).copy())
          for W in Ws]
path = gauge_path_connection(loop)
for d in (1, 3):
    lhs = ch_odd_at(g, Ws[:d])
    rhs = bcs_even(loop, path, fields[:d], n_max=6, quad=quad)
    print(f"deg{d}: ch={lhs:.10g} cs(gauge)={rhs:.10g} diff={abs(lhs-rhs):.3e}")

print("=== Prop 7.1 restriction: bcs_odd on t-constant cylinder vs cs_odd ===")
Ks = [random_anti_hermitian(2, rng) for _ in range(3)]
funcs = [(lambda u: np.sin(np.pi * np.asarray(u)) ** 2, lambda u: np.pi * np.sin(2 * np.pi * np.asarray(u))),
         (lambda u: np.asarray(u) ** 2 * (1 - np.asarray(u)), lambda u: 2 * np.asarray(u) - 3 * np.asarray(u) ** 2),
         (lambda u: np.asarray(u), lambda u: np.ones_like(np.asarray(u)))]
mp = FactorMapPath([(K, a, ap) for K, (a, ap) in zip(Ks, funcs)],
                   ConstantLoop(np.eye(2, dtype=complex)))
p0 = np.array([0.6, -0.4, 0.25])


class _PathAdapter:
    """Group path s -> g(p0, s) with velocity, for the t-constant cylinder."""
    dim = 2

    def value(self, s):
        return mp.values_u(p0, np.array([s]))[0]

    def velocity(self, s):
        return mp.u_velocities(p0, np.array([s]))[0]

    def values(self, ss):
        return mp.values_u(p0, ss)

    def velocities(self, ss):
        return mp.u_velocities(p0, ss)


cyl = TConstantCylinder(_PathAdapter())
q2 = QuadratureSpec(grid_t=96, grid_s=96, rule="simpson")
# degree 0
v_bcs = bcs_odd(cyl, [], n_max=4, quad=q2)
v_cs = cs_odd(mp, p0, (), quad=QuadratureSpec(grid_t=96, rule="simpson"))
print(f"deg0: bcs={v_bcs:.10g} cs={v_cs:.10g} diff={abs(v_bcs-v_cs):.3e}")
# degree 2 (exercises the +/- sign rule of the curvature-slot derivative)
from loopchern.loops import CylinderField
fld = [CylinderField(cyl, lambda ss, ts, i=i: np.broadcast_to(
    np.stack([mp.partials_u(p0, i, np.array([s]))[0] for s in ss])[:, None],
    (len(ss), len(ts), 2, 2)).copy()) for i in (0, 1)]
v_bcs2 = bcs_odd(cyl, fld, n_max=4, quad=q2)
v_cs2 = cs_odd(mp, p0, (0, 1), quad=QuadratureSpec(grid_t=96, rule="simpson"))
print(f"deg2: bcs={v_bcs2:.10g} cs={v_cs2:.10g} diff={abs(v_bcs2-v_cs2):.3e}")

print("=== tensor: abelian U(1)xU(1); hol0 and tr_hol2 ===")


class Circle:
    """Base loop: circle in R^2."""
    param_dim = 2
    dim = 1

    def value(self, t):
        return np.array([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)])

    def velocity(self, t):
        return 2 * np.pi * np.array([-np.sin(2 * np.pi * t), np.cos(2 * np.pi * t)])


def abelian_connection(c1, c2):
    # A = (c1 x2 dx1 + c2 x1^2 dx2) * i  on R^2; R = dA
    def one_form(t, v):
        x = Circle().value(t)
        return np.array([[1j * (c1 * x[1] * v[0] + c2 * x[0] ** 2 * v[1])]])

    def curvature(t, v, w):
        x = Circle().value(t)
        # dA = (2 c2 x1 - c1) dx1 ^ dx2
        coef = 1j * (2 * c2 * x[0] - c1)
        return np.array([[coef * (v[0] * w[1] - v[1] * w[0])]])

    return ConnectionData(1, one_form, curvature)


class VecField:
    def __init__(self, fn):
        self.fn = fn
        self.base = None
        self.dim = 1

    def value(self, t):
        return self.fn(t)


circle = Circle()
A = abelian_connection(0.7, 0.3)
Abar = abelian_connection(-0.4, 0.9)
A_tensor = abelian_connection(0.7 - 0.4, 0.3 + 0.9)  # sums of coefficients
V = VecField(lambda t: np.array([np.cos(2 * np.pi * t), 0.3]))
W = VecField(lambda t: np.array([0.1, np.sin(2 * np.pi * t) + 0.2]))
qt = QuadratureSpec(grid_t=512, rule="simpson")
h0a = tr_hol_even(circle, A, [], n_max=14, quad=qt)
h0b = tr_hol_even(circle, Abar, [], n_max=14, quad=qt)
h0ab = tr_hol_even(circle, A_tensor, [], n_max=18, quad=qt)
print(f"hol0: product={h0a*h0b:.10g} tensor={h0ab:.10g} diff={abs(h0a*h0b-h0ab):.3e}")
h2a = tr_hol_even(circle, A, [V, W], n_max=14, quad=qt)
h2b = tr_hol_even(circle, Abar, [V, W], n_max=14, quad=qt)
h2ab = tr_hol_even(circle, A_tensor, [V, W], n_max=18, quad=qt)
wedge = h0a * h2b + h2a * h0b
print(f"deg2: wedge={wedge:.10g} tensor={h2ab:.10g} diff={abs(wedge-h2ab):.3e}")

print("=== closure degree 2 order ladder (grid 512) ===")
rng2 = np.random.default_rng(5)
base = random_deformed_loop(2, rng2, scale=0.25, nfactors=2)
plot = DeformedLoopPlot(base, random_factors(2, 2, rng2, scale=0.45, modes=3))
p0 = np.array([0.37, -0.22])
q3 = QuadratureSpec(grid_t=512, rule="simpson")
nmax = 14
lp = plot.at(p0)
iota = bch_odd(lp, [velocity_field(lp), plot.partial(p0, 0), plot.partial(p0, 1)],
               n_max=nmax, quad=q3)


def alpha(p, i):
    loop = plot.at(p)
    return bch_odd(loop, [plot.partial(p, i)], n_max=nmax, quad=q3)


prev = None
for h in (8e-3, 4e-3, 2e-3, 1e-3):
    d01 = (alpha(p0 + [h, 0], 1) - alpha(p0 - [h, 0], 1)) / (2 * h)
    d10 = (alpha(p0 + [0, h], 0) - alpha(p0 - [0, h], 0)) / (2 * h)
    res = abs((d01 - d10) + iota)
    order = "" if prev is None else f" order={np.log2(prev / res):.2f}"
    print(f"h={h:g}: res={res:.4e} res/scale={res / abs(iota):.3e}{order}")
    prev = res
