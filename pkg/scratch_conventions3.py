"""Scratch 3: concat/block additivity, closure deg-2 with rich plot + sweep."""
import numpy as np

from loopchern.quadrature import QuadratureSpec
from loopchern.loops import (
    ExpLoop, DeformedLoopPlot, left_translated_field, velocity_field,
    random_deformed_loop, random_factors, concat, concat_fields, direct_sum,
    block_field,
)
from loopchern.forms import bch_odd, omega_sup_norm
from loopchern.matrices import random_anti_hermitian

rng = np.random.default_rng(5)

print("=== concat additivity, degree 1 and 3, U(2), basepoint I ===")
X = 2j * np.pi * np.diag([1.0, -1.0]).astype(complex)
a = ExpLoop(X)
b = random_deformed_loop(2, rng, scale=0.3, based=True)
cc = concat(a, b)
Ks = [random_anti_hermitian(2, rng) for _ in range(3)]
qa = QuadratureSpec(grid_t=1024, rule="simpson")
for d, nmax in ((1, 28), (3, 24)):
    fa = [left_translated_field(a, K) for K in Ks[:d]]
    fb = [left_translated_field(b, K) for K in Ks[:d]]
    fc = [concat_fields(f1, f2, cc) for f1, f2 in zip(fa, fb)]
    va = bch_odd(a, fa, n_max=nmax, quad=qa)
    vb = bch_odd(b, fb, n_max=nmax, quad=qa)
    vc = bch_odd(cc, fc, n_max=nmax, quad=qa)
    print(f"deg{d} nMax={nmax}: concat={vc:.8g} sum={va+vb:.8g} "
          f"diff={abs(vc-(va+vb)):.3e} scale={max(abs(vc), abs(va+vb)):.3e}")

print("=== direct sum additivity degree 3, U(2)+U(1), same nMax ===")
c1 = random_deformed_loop(2, rng, scale=0.4)
c2 = ExpLoop(np.array([[2j * np.pi]]))
ds = direct_sum(c1, c2)
f1 = [left_translated_field(c1, random_anti_hermitian(2, rng)) for _ in range(3)]
f2 = [left_translated_field(c2, random_anti_hermitian(1, rng)) for _ in range(3)]
fds = [block_field(x, y, ds) for x, y in zip(f1, f2)]
q = QuadratureSpec(grid_t=512, rule="simpson")
v1 = bch_odd(c1, f1, n_max=24, quad=q)
v2 = bch_odd(c2, f2, n_max=24, quad=q)
vs = bch_odd(ds, fds, n_max=24, quad=q)
print(f"sum={v1+v2:.8g} block={vs:.8g} diff={abs(vs-(v1+v2)):.3e}")

print("=== closure degree 2: richer plot, h sweep, order estimate ===")
base = random_deformed_loop(2, rng, scale=0.25, nfactors=2)
plot = DeformedLoopPlot(base, random_factors(2, 2, rng, scale=0.45, modes=3))
p0 = np.array([0.37, -0.22])
quad = QuadratureSpec(grid_t=256, grid_s=32, rule="simpson")
nmax = 14
print("omega sup at p0:", omega_sup_norm(plot.at(p0)))

lp = plot.at(p0)
iota = bch_odd(lp, [velocity_field(lp), plot.partial(p0, 0), plot.partial(p0, 1)],
               n_max=nmax, quad=quad)


def alpha(p, i):
    loop = plot.at(p)
    return bch_odd(loop, [plot.partial(p, i)], n_max=nmax, quad=quad)


prev = None
for h in (4e-3, 2e-3, 1e-3):
    d01 = (alpha(p0 + [h, 0], 1) - alpha(p0 - [h, 0], 1)) / (2 * h)
    d10 = (alpha(p0 + [0, h], 0) - alpha(p0 - [0, h], 0)) / (2 * h)
    dpart = d01 - d10
    res = abs(dpart + iota)
    scale = max(abs(dpart), abs(iota))
    order = "" if prev is None else f" order={np.log2(prev / res):.2f}"
    print(f"h={h:g}: |d|={abs(dpart):.6e} |iota|={abs(iota):.6e} res={res:.3e} "
          f"res/scale={res / scale:.3e}{order}")
    prev = res
