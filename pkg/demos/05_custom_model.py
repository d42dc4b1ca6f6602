"""
A model described in TOML
=========================

Models can be written as expressions.  Gradients come from forward-mode
dual numbers, and loading checks commutation and invariance on random
samples.  The same file drives the command line:

    symbreak census --model-file demos/models/oscillator.toml --subtorus 1,1 \\
        --eps 1e-3 --seed-x 1,1,0,0 --seed-xi 0.5,0.5 --mu 0.5,0.5
"""
from pathlib import Path

import numpy as np

from symbreak.census import run_census
from symbreak.model import SubtorusInclusion, validate
from symbreak.modelzoo import load_model, parse_expression, pretty
from symbreak.numkernel import fd_gradient
from symbreak.releq import find_re

path = Path(__file__).parent / "models" / "oscillator.toml"
model = load_model(path)
print(pretty(parse_expression("((q1^2 + p1^2)/2)^2/2 + eps*c*(q1*q2 + p1*p2)")))

x = np.array([0.9, 1.1, 0.3, -0.2])
g = model.grad(0.1, x)
print("dual vs finite-difference gradient gap:",
      np.linalg.norm(g - fd_gradient(lambda y: model.energy(0.1, y), x)))

sub = SubtorusInclusion(np.array([[1], [1]]))
for check in validate(model, sub).checks:
    print(f"  {check.name}: passed={check.passed} worst={check.worst:.1e}")

base = find_re(model, 0.0, "full", [1.0, 1.0, 0.0, 0.0], [0.5, 0.5], [0.5, 0.5])
rep = run_census(model, base, sub, 1e-3).report
print("critical points:", [round(float(p.k[0]), 6) for p in rep.points])
