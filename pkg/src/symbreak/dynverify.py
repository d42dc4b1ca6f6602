"""Dynamical check of relative equilibria by integrating the flow of H_eps.

A relative equilibrium of the subtorus must stay on its T^r orbit, advance
along it at its velocity and keep the restricted momentum fixed.  The flow
is integrated with an adaptive eighth-order Runge-Kutta scheme at tight
tolerance; this is a drift detector, not a long-time integrator.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import least_squares

from .model import Model, SubtorusInclusion
from .numkernel import DomainError
from .releq import RelativeEquilibrium, velocity_in_subalgebra

TWO_PI = 2.0 * math.pi


class IntegrationError(RuntimeError):
    pass


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    energy_drift: float
    momentum_drift: np.ndarray
    complete: bool = True
    message: str = ""
    energies: np.ndarray = field(default_factory=lambda: np.zeros(0))
    momenta: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def to_csv(self, fh, names=None) -> None:
        dim = self.states.shape[1]
        n = self.momenta.shape[1]
        names = list(names) if names else [f"x_{i + 1}" for i in range(dim)]
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + names + ["H"] + [f"J_{i + 1}" for i in range(n)])
        for t, x, h, j in zip(self.times, self.states, self.energies, self.momenta):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [repr(float(h))]
                       + [repr(float(v)) for v in j])


def integrate(model: Model, eps: float, x0, horizon: float, tol: float = 1e-12,
              n_samples: int = 201, method: str = "DOP853") -> Trajectory:
    """Integrate ``dx/dt = P grad H_eps(x)`` on ``[0, horizon]``.

    Leaving the domain truncates the trajectory (``complete=False``).
    """
    x0 = model.check(x0)
    if horizon <= 0:
        raise ValueError("horizon must be positive")

    def rhs(_t, x):
        return model.vector_field(eps, x)

    def exit_event(_t, x):
        return 1.0 if model.in_domain(x) else -1.0

    exit_event.terminal = True
    t_eval = np.linspace(0.0, horizon, n_samples)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            sol = solve_ivp(rhs, (0.0, horizon), x0, method=method, t_eval=t_eval,
                            rtol=tol, atol=tol, events=exit_event)
        except DomainError as err:
            raise IntegrationError(f"integration left the domain: {err}") from err
    if sol.status < 0:
        raise IntegrationError(f"integration failed: {sol.message}")
    times, states = sol.t, sol.y.T
    complete = sol.status == 0 and times.size == n_samples
    energies = np.array([model.energy(eps, x) for x in states])
    momenta = np.array([model.momentum_value(x) for x in states]).reshape(len(times), model.n)
    return Trajectory(times=times, states=states,
                      energy_drift=float(np.max(np.abs(energies - energies[0]))),
                      momentum_drift=np.max(np.abs(momenta - momenta[0]), axis=0),
                      complete=complete,
                      message="" if complete else "left the domain before the horizon",
                      energies=energies, momenta=momenta)


def _grid_size(r: int) -> int:
    return {1: 64, 2: 16}.get(r, 6)


def orbit_distance(model: Model, x, x_ref, sub: SubtorusInclusion, return_angle: bool = False,
                   guess=None):
    """``min_theta |x - act(i(theta), x_ref)|`` over the subtorus.

    A grid search (or a supplied guess) is refined by nonlinear least squares.
    """
    x = np.asarray(x, float)
    x_ref = np.asarray(x_ref, float)
    r = sub.r
    if r == 0:
        d = model.distance(x, x_ref)
        return (d, np.zeros(0)) if return_angle else d
    gm = sub.matrix.astype(float)

    def resid(theta):
        return model.difference(x, model.act(gm @ theta, x_ref))

    def dist(theta):
        return float(np.linalg.norm(resid(theta)))

    if guess is not None:
        starts = [np.asarray(guess, float)]
    else:
        g = _grid_size(r)
        axis = np.arange(g) * TWO_PI / g
        pts = [np.array(t) for t in product(axis, repeat=r)]
        vals = [dist(t) for t in pts]
        starts = [pts[int(np.argmin(vals))]]
    best_t, best = starts[0], dist(starts[0])
    for t0 in starts:
        res = least_squares(resid, t0, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
        val = dist(res.x)
        if val < best:
            best, best_t = val, res.x
    best_t = np.mod(best_t, TWO_PI)
    return (best, best_t) if return_angle else best


@dataclass
class VerificationReport:
    passed: bool
    orbit_drift: float
    momentum_drift: float
    energy_drift: float
    advance_rate: np.ndarray
    expected_rate: np.ndarray
    velocity_error: float
    residual: float
    precondition_ok: bool
    complete: bool
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(passed=self.passed, orbit_drift=self.orbit_drift,
                    momentum_drift=self.momentum_drift, energy_drift=self.energy_drift,
                    advance_rate=[float(v) for v in self.advance_rate],
                    expected_rate=[float(v) for v in self.expected_rate],
                    velocity_error=self.velocity_error, residual=self.residual,
                    precondition_ok=self.precondition_ok, complete=self.complete,
                    notes=list(self.notes))


def _subalgebra_velocity(re: RelativeEquilibrium, sub: SubtorusInclusion, n: int) -> np.ndarray:
    xi = np.atleast_1d(np.asarray(re.xi, float))
    if xi.size == sub.r:
        return xi
    if xi.size == n:
        return velocity_in_subalgebra(xi, sub)[0]
    raise ValueError("velocity length matches neither the subtorus nor the torus")


def verify_re(model: Model, eps: float, re: RelativeEquilibrium, sub: SubtorusInclusion,
              horizon: float = 50.0, n_samples: int = 201, tol: float = 1e-12,
              orbit_tol: float = 1e-6, momentum_tol: float = 1e-8, rate_rtol: float = 1e-4
              ) -> VerificationReport:
    """Integrate from ``re.x`` and check drift from the orbit, momentum and velocity.

    The residual precondition (about 1e-8) is reported but not enforced so
    that non-equilibrium starts can serve as negative controls.
    """
    traj = integrate(model, eps, re.x, horizon, tol, n_samples)
    eta = _subalgebra_velocity(re, sub, model.n)
    drifts, angles = [], []
    guess = np.zeros(sub.r)
    for x in traj.states:
        d, th = orbit_distance(model, x, re.x, sub, return_angle=True,
                               guess=guess if sub.r else None)
        if sub.r and d > orbit_tol:
            d2, th2 = orbit_distance(model, x, re.x, sub, return_angle=True)
            if d2 < d:
                d, th = d2, th2
        drifts.append(d)
        angles.append(th)
        guess = th
    drift = float(np.max(drifts))
    jr = traj.momenta @ sub.matrix.astype(float) if sub.r else np.zeros((len(traj.times), 0))
    mom_drift = float(np.max(np.abs(jr - jr[0]))) if sub.r else 0.0
    notes = []
    if sub.r:
        ang = np.unwrap(np.array(angles), axis=0)
        rate = np.array([np.polyfit(traj.times, ang[:, a], 1)[0] for a in range(sub.r)])
        scale = float(np.linalg.norm(eta))
        err = float(np.linalg.norm(rate - eta))
        vel_err = err / scale if scale > 1e-8 else err
    else:
        rate, vel_err = np.zeros(0), 0.0
    resid = float(re.residual)
    pre = resid <= 1e-8
    if not pre:
        notes.append(f"start residual {resid:.3e} exceeds 1e-8")
    if not traj.complete:
        notes.append(traj.message)
    ok = traj.complete and drift <= orbit_tol and mom_drift <= momentum_tol and vel_err <= rate_rtol
    if drift > orbit_tol:
        notes.append(f"orbit drift {drift:.3e} exceeds {orbit_tol:g}")
    if mom_drift > momentum_tol:
        notes.append(f"restricted momentum drift {mom_drift:.3e} exceeds {momentum_tol:g}")
    if vel_err > rate_rtol:
        notes.append(f"advance rate {rate} differs from velocity {eta}")
    return VerificationReport(passed=bool(ok), orbit_drift=drift, momentum_drift=mom_drift,
                              energy_drift=traj.energy_drift, advance_rate=rate,
                              expected_rate=eta, velocity_error=float(vel_err), residual=resid,
                              precondition_ok=pre, complete=traj.complete, notes=notes)
