"""
Charged spherical pendulum: a ring of equilibria
================================================

Without the charge offset every point of the ring theta = pi/2 is an
equilibrium.  Moving the charge off axis breaks the rotation symmetry
completely, and the reduced function on the circle picks out the two
survivors, phi = 0 and phi = pi.
"""
import numpy as np

from symbreak.census import run_census
from symbreak.modelzoo import builtin
from symbreak.releq import find_re

setup = builtin("pendulum")
model = setup.model

# the ring: Newton from a few phases lands on theta = pi/2 every time
for phi in np.linspace(0, 2 * np.pi, 4, endpoint=False):
    re = find_re(model, 0.0, "full", [1.5, phi, 0.0, 0.0], [0.0], [0.0])
    print(f"seed phi={phi:.3f} -> theta={re.x[0]:.12f}, residual={re.residual:.1e}")

# census at eps = 0.2
base = find_re(model, 0.0, "full", setup.seed_x, setup.seed_xi, setup.mu_target)
run = run_census(model, base, setup.sub, 0.2)
rep = run.report
print(f"\n{rep.count} critical points (LS bound {rep.ls_bound}, Morse bound {rep.morse_bound})")
for p, m in zip(rep.points, rep.mapped):
    print(f"  k={p.k[0]:.6f}  index={p.morse_index}  phi={m.x[1]:.6f}  H={p.value:.8f}")

# the reduced function itself, coarsely
k = run.reduced.axes()[0]
vals = run.reduced.values()
for i in range(0, len(k), 8):
    print(f"  hbar({k[i]:.2f}) = {vals[i]:.8f}")
