"""
Fixed-velocity reduction
========================

Instead of fixing the momentum of the surviving circle one can fix its
velocity.  The reduced function is then H - J^xi, its critical points are
relative equilibria with exactly that velocity, and their momentum moves
by O(eps).
"""
import numpy as np

from symbreak.census import run_census
from symbreak.modelzoo import builtin
from symbreak.releq import find_re

setup = builtin("oscillator")
model, sub, eps = setup.model, setup.sub, setup.eps
base = find_re(model, 0.0, "full", setup.seed_x, setup.seed_xi, setup.mu_target)

for mode in ("symplectic", "poisson"):
    rep = run_census(model, base, sub, eps, mode=mode).report
    print(f"{mode}: {rep.count} points")
    for m in rep.mapped:
        j = sub.restrict(model.momentum_value(m.x))[0]
        print(f"  velocity={np.ravel(m.xi)[0]:.9f} momentum={j:.9f} "
              f"momentum shift={m.diagnostics['momentum_deviation']:.2e}")
