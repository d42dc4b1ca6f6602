"""
Checking survivors by integrating the flow
==========================================

A relative equilibrium should stay on its group orbit and advance along
it at its velocity.  Integrating from each census point confirms this,
while a point nudged off the equilibrium drifts away.
"""
import numpy as np

from symbreak.census import run_census
from symbreak.dynverify import integrate, verify_re
from symbreak.modelzoo import builtin
from symbreak.releq import RelativeEquilibrium, find_re

setup = builtin("oscillator")
model, sub, eps = setup.model, setup.sub, setup.eps
base = find_re(model, 0.0, "full", setup.seed_x, setup.seed_xi, setup.mu_target)
rep = run_census(model, base, sub, eps).report

for m in rep.mapped:
    v = verify_re(model, eps, m, sub, horizon=50.0)
    print(f"passed={v.passed} orbit drift={v.orbit_drift:.1e} "
          f"rate={v.advance_rate[0]:.9f} expected={v.expected_rate[0]:.9f}")

x = rep.mapped[0].x + np.array([1e-2, 0.0, 0.0, 0.0])
nudged = RelativeEquilibrium(x, rep.mapped[0].xi, rep.mapped[0].mu, 1.0, eps)
v = verify_re(model, eps, nudged, sub, horizon=50.0)
print(f"nudged start: passed={v.passed} orbit drift={v.orbit_drift:.1e}")

traj = integrate(model, eps, x, 50.0)
print(f"energy drift along the nudged trajectory: {traj.energy_drift:.1e}")
