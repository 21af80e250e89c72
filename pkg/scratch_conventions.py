"""Scratch: pin conventions numerically before freezing tests."""
import numpy as np

from loopchern.quadrature import QuadratureSpec
from loopchern.loops import (
    ConstantLoop, ExpLoop, DeformedLoop, DeformedLoopPlot, FactorCylinder,
    CallableCylinderPlot, left_translated_field, velocity_field,
    random_factors, random_deformed_loop, CylinderField, rotation_field_grid,
    TangentField,
)
from loopchern.connections import gauge_path_connection
from loopchern.forms import bch_odd, bcs_even, bcs_odd, ch_odd_at, omega_sup_norm
from loopchern.matrices import random_anti_hermitian

rng = np.random.default_rng(11)
quad = QuadratureSpec(grid_t=256, grid_s=64, rule="simpson")

print("=== 1. restriction: bch_odd at constant loop vs ch_odd, degrees 1,3 ===")
from loopchern.matrices import random_unitary
g = random_unitary(2, rng)
loop = ConstantLoop(g)
Ws = [random_anti_hermitian(2, rng) for _ in range(3)]
fields = [TangentField(loop, values=lambda ts, W=W: np.broadcast_to(g @ W, (len(ts), 2, 2)).copy()) for W in Ws]
tangents = [g @ W for W in Ws]
b1 = bch_odd(loop, fields[:1], n_max=6, quad=quad)
c1 = ch_odd_at(g, tangents[:1])
print("deg1:", b1, c1, "diff", abs(b1 - c1))
b3 = bch_odd(loop, fields, n_max=6, quad=quad)
c3 = ch_odd_at(g, tangents)
print("deg3:", b3, c3, "diff", abs(b3 - c3))

print("=== 2. route equivalence bch vs bcs_even(gauge), degrees 1,3, U(2) ===")
loop2 = random_deformed_loop(2, rng, scale=0.35, nfactors=2)
print("omega sup:", omega_sup_norm(loop2))
flds = [left_translated_field(loop2, random_anti_hermitian(2, rng)) for _ in range(3)]
path = gauge_path_connection(loop2)
for d in (1, 3):
    a = bch_odd(loop2, flds[:d], n_max=8, quad=quad)
    b = bcs_even(loop2, path, flds[:d], n_max=8, quad=quad)
    print(f"deg{d}: bch={a:.12g} bcs={b:.12g} diff={abs(a-b):.3e}")

print("=== 3. closure degree 0: BCh1(gamma; gamma') for exp loops ===")
for n, ks in ((1, [1]), (1, [2]), (2, [1, -1])):
    X = 2j * np.pi * np.diag(ks).astype(complex)
    el = ExpLoop(X)
    val = bch_odd(el, [velocity_field(el)], n_max=30,
                  quad=QuadratureSpec(grid_t=1024, rule="simpson"), detail=True)
    print(f"U({n}) k={ks}: |BCh1(rot)| = {abs(val.value):.3e}  scale={val.abs_sum:.3e}")

print("=== 4. closure degree 2: d(F*BCh1) + F*(iota BCh3) on U(2) plot ===")
base = ConstantLoop(np.eye(2, dtype=complex))
plot = DeformedLoopPlot(base, random_factors(2, 2, rng, scale=0.5))
p0 = np.array([0.4, -0.3])
nmax = 9


def alpha(p, i):
    lp = plot.at(p)
    return bch_odd(lp, [plot.partial(p, i)], n_max=nmax, quad=quad)


h = 1e-3
d01 = (alpha(p0 + [h, 0], 1) - alpha(p0 - [h, 0], 1)) / (2 * h)
d10 = (alpha(p0 + [0, h], 0) - alpha(p0 - [0, h], 0)) / (2 * h)
dpart = d01 - d10
lp = plot.at(p0)
iota = bch_odd(lp, [velocity_field(lp), plot.partial(p0, 0), plot.partial(p0, 1)],
               n_max=nmax, quad=quad)
print(f"d-part={dpart:.6g} iota(first)={iota:.6g}")
print(f"residual (d + iota_first) = {abs(dpart + iota):.3e}   vs flipped {abs(dpart - iota):.3e}")

print("=== 5. transgression: d BCS0 + BCS2(rot, dp) = BCh1|s1 - BCh1|s0 ===")
K1 = random_anti_hermitian(2, rng)
K2 = random_anti_hermitian(2, rng)
base2 = random_deformed_loop(2, rng, scale=0.3)


def build_cyl(p):
    c = float(p[0])
    fac = [
        (K1, lambda s, t, c=c: c * np.sin(2 * np.pi * np.asarray(t)) * np.asarray(s) ** 2,
         lambda s, t, c=c: 2 * c * np.sin(2 * np.pi * np.asarray(t)) * np.asarray(s),
         lambda s, t, c=c: 2 * np.pi * c * np.cos(2 * np.pi * np.asarray(t)) * np.asarray(s) ** 2),
        (K2, lambda s, t, c=c: (0.4 + 0.2 * c) * np.cos(2 * np.pi * np.asarray(t)) * np.asarray(s),
         lambda s, t, c=c: (0.4 + 0.2 * c) * np.cos(2 * np.pi * np.asarray(t)) * np.ones_like(np.asarray(s) * np.asarray(t)),
         lambda s, t, c=c: -(0.4 + 0.2 * c) * 2 * np.pi * np.sin(2 * np.pi * np.asarray(t)) * np.asarray(s)),
    ]
    return FactorCylinder(base2, fac)


cplot = CallableCylinderPlot(1, build_cyl, dim=2)
p0 = np.array([0.5])
q2 = QuadratureSpec(grid_t=192, grid_s=48, rule="simpson")
nmax = 9


def bcs0(p):
    return bcs_odd(cplot.at(p), [], n_max=nmax, quad=q2)


h = 1e-3
dpart = (bcs0(p0 + h) - bcs0(p0 - h)) / (2 * h)
cyl = cplot.at(p0)
rot = rotation_field_grid(cyl)
dp = cplot.partial(p0, 0)
iota = bcs_odd(cyl, [rot, dp], n_max=nmax, quad=q2)
iota_rev = bcs_odd(cyl, [dp, rot], n_max=nmax, quad=q2)
g1 = cyl.at(1.0)
g0 = cyl.at(0.0)
end1 = bch_odd(g1, [dp.restrict(1.0)], n_max=nmax, quad=q2)
end0 = bch_odd(g0, [dp.restrict(0.0)], n_max=nmax, quad=q2)
print(f"d={dpart:.6g} iota(rot first)={iota:.6g} end1-end0={end1-end0:.6g}")
print(f"residual rot-first : {abs(dpart + iota - (end1 - end0)):.3e}")
print(f"residual rot-second: {abs(dpart + iota_rev - (end1 - end0)):.3e}")
print(f"residual sign-flip : {abs(dpart - iota - (end1 - end0)):.3e}")
