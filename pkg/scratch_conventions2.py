"""Scratch 2: transgression error budget + concat additivity."""
import numpy as np

from loopchern.quadrature import QuadratureSpec
from loopchern.loops import (
    ExpLoop, FactorCylinder, CallableCylinderPlot, left_translated_field,
    random_deformed_loop, rotation_field_grid, concat, concat_fields,
    direct_sum, block_field, ConstantLoop,
)
from loopchern.forms import bch_odd, bcs_odd, omega_sup_norm
from loopchern.matrices import random_anti_hermitian

rng = np.random.default_rng(5)

print("=== transgression with small amplitudes, nMax sweep ===")
K1 = random_anti_hermitian(2, rng)
K2 = random_anti_hermitian(2, rng)
base2 = random_deformed_loop(2, rng, scale=0.15)


def build_cyl(p, a1=0.35, a2=0.25):
    c = float(p[0])
    fac = [
        (K1, lambda s, t: a1 * c * np.sin(2 * np.pi * np.asarray(t)) * np.asarray(s) ** 2,
         lambda s, t: 2 * a1 * c * np.sin(2 * np.pi * np.asarray(t)) * np.asarray(s),
         lambda s, t: 2 * np.pi * a1 * c * np.cos(2 * np.pi * np.asarray(t)) * np.asarray(s) ** 2),
        (K2, lambda s, t: a2 * (0.5 + c) * np.cos(2 * np.pi * np.asarray(t)) * np.asarray(s),
         lambda s, t: a2 * (0.5 + c) * np.cos(2 * np.pi * np.asarray(t)) * np.ones(np.broadcast_shapes(np.shape(s), np.shape(t))),
         lambda s, t: -2 * np.pi * a2 * (0.5 + c) * np.sin(2 * np.pi * np.asarray(t)) * np.asarray(s)),
    ]
    return FactorCylinder(base2, fac)


cplot = CallableCylinderPlot(1, build_cyl, dim=2)
p0 = np.array([0.5])
cyl = cplot.at(p0)
print("omega sup of middle loop:", omega_sup_norm(cyl.at(0.5)))
q2 = QuadratureSpec(grid_t=192, grid_s=48, rule="simpson")

for nmax in (8, 10, 12):
    def bcs0(p, nmax=nmax):
        return bcs_odd(cplot.at(p), [], n_max=nmax, quad=q2)

    rows = []
    for h in (2e-3, 1e-3, 5e-4):
        dpart = (bcs0(p0 + h) - bcs0(p0 - h)) / (2 * h)
        rot = rotation_field_grid(cyl)
        dp = cplot.partial(p0, 0)
        iota = bcs_odd(cyl, [rot, dp], n_max=nmax, quad=q2)
        end1 = bch_odd(cyl.at(1.0), [dp.restrict(1.0)], n_max=nmax, quad=q2)
        end0 = bch_odd(cyl.at(0.0), [dp.restrict(0.0)], n_max=nmax, quad=q2)
        res = abs(dpart + iota - (end1 - end0))
        scale = max(abs(dpart), abs(iota), abs(end1 - end0))
        rows.append((h, res, scale))
    print(f"nMax={nmax}: " + "  ".join(f"h={h:g} res={res:.3e} (scale {scale:.3e})"
                                       for h, res, scale in rows))

print("=== concat additivity, degree 1 and 3, U(2) ===")
X = 2j * np.pi * np.diag([1.0, -1.0]).astype(complex)
g0 = np.eye(2, dtype=complex)
a = ExpLoop(X)
b = random_deformed_loop(2, rng, scale=0.3)   # based at I
cc = concat(a, b)
Ks = [random_anti_hermitian(2, rng) for _ in range(3)]
qa = QuadratureSpec(grid_t=1024, rule="simpson")
for d, nmax in ((1, 30), (3, 26)):
    fa = [left_translated_field(a, K) for K in Ks[:d]]
    fb = [left_translated_field(b, K) for K in Ks[:d]]
    fc = [concat_fields(f1, f2, cc) for f1, f2 in zip(fa, fb)]
    va = bch_odd(a, fa, n_max=nmax, quad=qa)
    vb = bch_odd(b, fb, n_max=nmax, quad=qa)
    vc = bch_odd(cc, fc, n_max=nmax, quad=qa)
    print(f"deg{d}: concat={vc:.8g} sum={va+vb:.8g} diff={abs(vc-(va+vb)):.3e} "
          f"scale={max(abs(vc), abs(va+vb)):.3e}")

print("=== direct sum additivity degree 3 U(2)+U(1) ===")
c1 = random_deformed_loop(2, rng, scale=0.4)
c2 = ExpLoop(np.array([[2j * np.pi]]))
ds = direct_sum(c1, c2)
f1 = [left_translated_field(c1, random_anti_hermitian(2, rng)) for _ in range(3)]
f2 = [left_translated_field(c2, random_anti_hermitian(1, rng)) for _ in range(3)]
fds = [block_field(x, y, ds) for x, y in zip(f1, f2)]
q = QuadratureSpec(grid_t=512, rule="simpson")
v1 = bch_odd(c1, f1, n_max=10, quad=q)
v2 = bch_odd(c2, f2, n_max=24, quad=q)
vs = bch_odd(ds, fds, n_max=24, quad=q)
print(f"sum={v1+v2:.8g} block={vs:.8g} diff={abs(vs-(v1+v2)):.3e}")
