"""The bundled models written in the config language.

These sources go through the parser and dual-number path, so comparing
them with the hand-coded models checks both implementations.
"""
from __future__ import annotations

from .bundled import OscillatorParams, PendulumParams

_PENDULUM = """\
name = "pendulum-source"

[chart]
dim = 4
names = ["th", "ph", "pth", "pph"]
domain = ["th", "pi - th"]
periodic = ["ph"]

[torus]
n = 1
angles = ["s"]
J = ["pph"]
action = ["th", "ph + s", "pth", "pph"]

[hamiltonian]
H = "pth^2/(2*m_b*l^2) + pph^2/(2*m_b*l^2*sin(th)^2) - m_b*g*l*cos(th) + kappa/sqrt((l*sin(th)*cos(ph) - eps*a0)^2 + (l*sin(th)*sin(ph))^2 + (d - l*cos(th))^2)"

[params]
{params}
"""

_OSCILLATOR = """\
name = "{name}-source"

[chart]
dim = 4
names = ["q1", "q2", "p1", "p2"]
domain = ["q1^2 + p1^2", "q2^2 + p2^2"]

[torus]
n = 2
angles = ["t1", "t2"]
J = ["(q1^2 + p1^2)/2", "(q2^2 + p2^2)/2"]
action = [
    "q1*cos(t1) + p1*sin(t1)",
    "q2*cos(t2) + p2*sin(t2)",
    "-q1*sin(t1) + p1*cos(t1)",
    "-q2*sin(t2) + p2*cos(t2)",
]

[hamiltonian]
H = "((q1^2 + p1^2)/2 - s1)^2/2 + ((q2^2 + p2^2)/2 - s2)^2/2 + eps*({coupling})"

[params]
{params}
"""


def _table(values: dict) -> str:
    return "\n".join(f"{k} = {float(v)!r}" for k, v in values.items())


def bundled_source(name: str, **params) -> str:
    """TOML text equivalent to ``builtin(name, **params).model``."""
    if name == "pendulum":
        p = PendulumParams(**params)
        vals = dict(m_b=p.m_b, l=p.l, g=p.g, kappa=p.kappa, d=p.d, a0=p.a0)
        return _PENDULUM.format(params=_table(vals))
    if name in ("oscillator", "oscillator-break"):
        coupling = "diagonal-invariant" if name == "oscillator" else "full-break"
        p = OscillatorParams(coupling=coupling, **params)
        s1, s2 = p.shift
        vals = dict(s1=s1, s2=s2, c1=p.c1, c2=p.c2)
        term = "q1*q2 + p1*p2" if name == "oscillator" else "c1*q1 + c2*q2"
        return _OSCILLATOR.format(name=name, coupling=term, params=_table(vals))
    raise KeyError(f"no source for model {name!r}")
