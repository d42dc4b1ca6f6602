"""Analytically tractable bundled models.

The charged spherical pendulum realises the ring-of-equilibria picture
(n = 1, symmetry broken completely); the two-plane oscillator is a
desk-scale T^2 system with either a diagonal circle surviving or nothing.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..model import Model, SubtorusInclusion
from ..numkernel import SymplecticStructure


@dataclass(frozen=True)
class PendulumParams:
    """Spherical pendulum with a repelling charge below the pivot.

    The fixed charge sits at ``(eps * a0, 0, -d)``; ``kappa`` is the Coulomb
    strength ``q^2 / (4 pi eps_0)``.  The defaults put the ring at
    ``theta = pi/2`` and are our choice (no numerical values are implied
    by the physical setting).
    """

    m_b: float = 1.0
    l: float = 1.0
    g: float = 1.0
    kappa: float = 2.0 * np.sqrt(2.0)
    d: float = 1.0
    a0: float = 0.05

    def __post_init__(self):
        for name in ("m_b", "l", "g", "kappa", "d", "a0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"pendulum parameter {name} must be positive")
        c = self.ring_cos()
        if not -1.0 < c < 1.0:
            raise ValueError(f"no ring of equilibria: cos(theta*) = {c:.6g} is outside (-1, 1)")

    def ring_radius(self) -> float:
        """Bob-to-charge distance on the ring, ``(kappa d / (m g))^(1/3)``."""
        return (self.kappa * self.d / (self.m_b * self.g)) ** (1.0 / 3.0)

    def ring_cos(self) -> float:
        rho = self.ring_radius()
        return (self.l**2 + self.d**2 - rho**2) / (2.0 * self.l * self.d)

    def ring_theta(self) -> float:
        return float(np.arccos(self.ring_cos()))


def make_pendulum(p: PendulumParams = PendulumParams()) -> Model:
    """Charged spherical pendulum on the chart ``(theta, phi, p_theta, p_phi)``."""
    m, l, g, kappa, d, a0 = p.m_b, p.l, p.g, p.kappa, p.d, p.a0
    inertia = m * l * l

    def offsets(eps, x):
        th, ph = x[0], x[1]
        s, c = np.sin(th), np.cos(th)
        diff = np.array([l * s * np.cos(ph) - eps * a0, l * s * np.sin(ph), d - l * c])
        return s, c, diff

    def H(eps, x):
        s, c, diff = offsets(eps, x)
        rho = np.sqrt(diff @ diff)
        return (x[2] ** 2 / (2 * inertia) + x[3] ** 2 / (2 * inertia * s * s)
                - m * g * l * c + kappa / rho)

    def dH(eps, x):
        th, ph = x[0], x[1]
        s, c, diff = offsets(eps, x)
        rho3 = (diff @ diff) ** 1.5
        dbob_th = np.array([l * c * np.cos(ph), l * c * np.sin(ph), l * s])
        dbob_ph = np.array([-l * s * np.sin(ph), l * s * np.cos(ph), 0.0])
        return np.array([
            -x[3] ** 2 * c / (inertia * s**3) + m * g * l * s - kappa * (diff @ dbob_th) / rho3,
            -kappa * (diff @ dbob_ph) / rho3,
            x[2] / inertia,
            x[3] / (inertia * s * s),
        ])

    def J(x):
        return np.array([x[3]])

    def dJ(x):
        return np.array([[0.0, 0.0, 0.0, 1.0]])

    def action(theta, x):
        y = np.array(x, dtype=float)
        y[1] += theta[0]
        return y

    def action_jac(theta, x):
        return np.eye(4)

    def domain(x):
        if not 0.0 < x[0] < np.pi:
            return False
        _, _, diff = offsets(0.0, x)
        return bool(diff @ diff > 0.0)

    def sampler(rng):
        return np.array([rng.uniform(0.3, np.pi - 0.3), rng.uniform(0, 2 * np.pi),
                         0.5 * rng.standard_normal(), 0.5 * rng.standard_normal()])

    return Model(
        name="pendulum", chart=SymplecticStructure(4), n=1, hamiltonian=H, momentum=J,
        action=action, hamiltonian_grad=dH, momentum_jacobian=dJ, action_jacobian=action_jac,
        domain=domain, periodic=(1,), sampler=sampler,
        coord_names=("theta", "phi", "p_theta", "p_phi"),
        params=dict(m_b=m, l=l, g=g, kappa=kappa, d=d, a0=a0))


@dataclass(frozen=True)
class OscillatorParams:
    """Two uncoupled planar rotors ``H_0 = ((I1 - s1)^2 + (I2 - s2)^2) / 2``.

    ``coupling`` selects the perturbation: ``"diagonal-invariant"`` adds
    ``eps (q1 q2 + p1 p2)`` (the diagonal circle survives), ``"full-break"``
    adds ``eps (c1 q1 + c2 q2)``.  ``shift`` defaults to ``(0, 0)`` for the
    diagonal coupling and to ``(1/2, 1/2)`` for the full break, which makes
    the orbit through ``(1, 1, 0, 0)`` a ring of genuine equilibria (zero
    velocity), as a complete break requires.
    """

    coupling: str = "diagonal-invariant"
    c1: float = 1.0
    c2: float = 0.7
    shift: Optional[tuple] = None

    def __post_init__(self):
        if self.coupling not in ("diagonal-invariant", "full-break"):
            raise ValueError(f"unknown coupling {self.coupling!r}")
        if not (np.isfinite(self.c1) and np.isfinite(self.c2)):
            raise ValueError("c1, c2 must be finite")
        if self.coupling == "full-break" and (self.c1 == 0 or self.c2 == 0):
            raise ValueError("full-break coupling needs c1 != 0 and c2 != 0")
        if self.shift is None:
            object.__setattr__(self, "shift",
                               (0.5, 0.5) if self.coupling == "full-break" else (0.0, 0.0))
        object.__setattr__(self, "shift", tuple(float(s) for s in self.shift))


def _rotation(t):
    c, s = np.cos(t), np.sin(t)
    return c, s


def make_oscillator(p: OscillatorParams = OscillatorParams()) -> Model:
    """Oscillator on ``(q1, q2, p1, p2)`` with ``J = (I1, I2)``, ``I_j = (q_j^2 + p_j^2)/2``."""
    s1, s2 = p.shift
    diag = p.coupling == "diagonal-invariant"
    c1, c2 = p.c1, p.c2
    swap = np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=float)

    def actions(x):
        return 0.5 * (x[0] ** 2 + x[2] ** 2), 0.5 * (x[1] ** 2 + x[3] ** 2)

    def H(eps, x):
        i1, i2 = actions(x)
        h = 0.5 * ((i1 - s1) ** 2 + (i2 - s2) ** 2)
        if diag:
            return h + eps * (x[0] * x[1] + x[2] * x[3])
        return h + eps * (c1 * x[0] + c2 * x[1])

    def dI(x):
        return np.array([[x[0], 0.0, x[2], 0.0], [0.0, x[1], 0.0, x[3]]])

    def dH(eps, x):
        i1, i2 = actions(x)
        g = dI(x).T @ np.array([i1 - s1, i2 - s2])
        if diag:
            return g + eps * np.array([x[1], x[0], x[3], x[2]])
        return g + eps * np.array([c1, c2, 0.0, 0.0])

    def d2H(eps, x):
        i1, i2 = actions(x)
        dj = dI(x)
        h = dj.T @ dj + np.diag([i1 - s1, i2 - s2, i1 - s1, i2 - s2])
        if diag:
            h = h + eps * swap
        return h

    def J(x):
        return np.array(actions(x))

    def action(theta, x):
        ca, sa = _rotation(theta[0])
        cb, sb = _rotation(theta[1])
        return np.array([x[0] * ca + x[2] * sa, x[1] * cb + x[3] * sb,
                         -x[0] * sa + x[2] * ca, -x[1] * sb + x[3] * cb])

    def action_jac(theta, x):
        ca, sa = _rotation(theta[0])
        cb, sb = _rotation(theta[1])
        return np.array([[ca, 0, sa, 0], [0, cb, 0, sb], [-sa, 0, ca, 0], [0, -sb, 0, cb]])

    def domain(x):
        i1, i2 = actions(x)
        return bool(i1 > 0 and i2 > 0)

    def sampler(rng):
        return 0.8 * rng.standard_normal(4)

    name = "oscillator" if diag else "oscillator-break"
    return Model(
        name=name, chart=SymplecticStructure(4), n=2, hamiltonian=H, momentum=J,
        action=action, hamiltonian_grad=dH, hamiltonian_hess=d2H, momentum_jacobian=dI,
        action_jacobian=action_jac, domain=domain, sampler=sampler,
        coord_names=("q1", "q2", "p1", "p2"),
        params=dict(coupling=p.coupling, c1=c1, c2=c2, shift=list(p.shift)))


# ---------------------------------------------------------------------------
# named setups used by the CLI and the demos


@dataclass(frozen=True)
class Setup:
    """A bundled model together with the data needed to run the pipeline on it."""

    model: Model
    sub: SubtorusInclusion
    seed_x: np.ndarray
    seed_xi: np.ndarray
    mu_target: np.ndarray
    eps: float
    description: str = ""
    params: dict = field(default_factory=dict)


BUILTINS = ("pendulum", "oscillator", "oscillator-break")


def builtin(name: str, **params) -> Setup:
    """Bundled setup by name; keyword arguments override the model parameters."""
    if name == "pendulum":
        model = make_pendulum(PendulumParams(**params))
        return Setup(model, SubtorusInclusion.trivial(1), np.array([1.5, 0.0, 0.0, 0.0]),
                     np.zeros(1), np.zeros(1), 0.2,
                     "charged spherical pendulum, circle symmetry broken by a displaced charge",
                     dict(params))
    if name == "oscillator":
        model = make_oscillator(OscillatorParams(coupling="diagonal-invariant", **params))
        return Setup(model, SubtorusInclusion(np.array([[1], [1]])),
                     np.array([1.05, 0.95, 0.0, 0.0]), np.array([0.5, 0.5]),
                     np.array([0.5, 0.5]), 1e-3,
                     "two-plane oscillator, T^2 broken to the diagonal circle", dict(params))
    if name == "oscillator-break":
        model = make_oscillator(OscillatorParams(coupling="full-break", **params))
        return Setup(model, SubtorusInclusion.trivial(2),
                     np.array([1.05, 0.95, 0.0, 0.0]), np.zeros(2),
                     np.array([0.5, 0.5]), 1e-3,
                     "detuned two-plane oscillator, T^2 broken completely", dict(params))
    raise KeyError(f"unknown builtin model {name!r}; choose from {', '.join(BUILTINS)}")
