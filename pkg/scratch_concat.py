"""Probe: concat additivity for winding-zero pairs, and the U(1) sector analysis."""
import numpy as np

from loopchern.quadrature import QuadratureSpec
from loopchern.loops import (
    ExpLoop, left_translated_field, random_deformed_loop, concat, concat_fields,
    loop_product,
)
from loopchern.forms import bch_odd, omega_sup_norm, winding_number
from loopchern.matrices import random_anti_hermitian

rng = np.random.default_rng(9)
qa = QuadratureSpec(grid_t=1024, rule="simpson")

print("=== concat additivity, winding-zero U(2) pair ===")
a = random_deformed_loop(2, rng, scale=0.3, based=True)
b = random_deformed_loop(2, rng, scale=0.35, based=True)
cc = concat(a, b)
Ks = [random_anti_hermitian(2, rng) for _ in range(3)]
for d, nmax in ((1, 16), (3, 14)):
    fa = [left_translated_field(a, K) for K in Ks[:d]]
    fb = [left_translated_field(b, K) for K in Ks[:d]]
    fc = [concat_fields(f1, f2, cc) for f1, f2 in zip(fa, fb)]
    va = bch_odd(a, fa, n_max=nmax, quad=qa)
    vb = bch_odd(b, fb, n_max=nmax, quad=qa)
    vc = bch_odd(cc, fc, n_max=nmax, quad=qa)
    print(f"deg{d}: concat={vc:.10g} sum={va+vb:.10g} diff={abs(vc-(va+vb)):.3e} "
          f"scale={max(abs(vc), abs(va+vb)):.3e}")

print("=== concat additivity, winding (1,-1) + winding-zero U(2) pair ===")
a2 = ExpLoop(2j * np.pi * np.diag([1.0, -1.0]).astype(complex))
cc2 = concat(a2, b)
for d, nmax in ((1, 30),):
    fa = [left_translated_field(a2, K) for K in Ks[:d]]
    fb = [left_translated_field(b, K) for K in Ks[:d]]
    fc = [concat_fields(f1, f2, cc2) for f1, f2 in zip(fa, fb)]
    va = bch_odd(a2, fa, n_max=nmax, quad=qa)
    vb = bch_odd(b, fb, n_max=nmax, quad=qa)
    vc = bch_odd(cc2, fc, n_max=nmax, quad=qa)
    print(f"deg{d}: concat={vc:.10g} sum={va+vb:.10g} diff={abs(vc-(va+vb)):.3e}")

print("=== U(1) winding (+1,-1) analytic counterexample check ===")
u1a = ExpLoop(np.array([[2j * np.pi]]))
u1b = ExpLoop(np.array([[-2j * np.pi]]))
ccu = concat(u1a, u1b)
c1, c2 = 0.3, 0.7
f1 = left_translated_field(u1a, np.array([[1j * c1]]))
f2 = left_translated_field(u1b, np.array([[1j * c2]]))
fc = concat_fields(f1, f2, ccu)
v1 = bch_odd(u1a, [f1], n_max=30, quad=qa)
v2 = bch_odd(u1b, [f2], n_max=30, quad=qa)
vc = bch_odd(ccu, [fc], n_max=30, quad=qa)
print(f"parts: {v1:.4g}, {v2:.4g}; concat: {vc:.6g}; predicted i(c1+c2) = {1j*(c1+c2):.6g}")
print("winding of concat:", winding_number(ccu, qa).rounded)
