"""Relative equilibria as critical points of the augmented Hamiltonian.

A point x is a relative equilibrium for a group with generators
``J_a`` iff ``grad H(x) = sum_a xi_a grad J_a(x)`` for some velocity xi.
The solutions come in whole group orbits, so :func:`find_re` appends gauge
rows pinning the orbit coordinate to the seed and solves the (consistent,
overdetermined) system with minimum-norm Gauss-Newton.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .model import Model, SubtorusInclusion
from .numkernel import RANK_RTOL, DomainError, NewtonOptions, fd_jacobian, newton_solve


class ConvergenceError(RuntimeError):
    """A nonlinear solve did not reach its tolerance."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class RankDeficiencyError(np.linalg.LinAlgError):
    """Generator directions lost rank (the action is not free here)."""


@dataclass
class RelativeEquilibrium:
    x: np.ndarray
    xi: np.ndarray
    mu: np.ndarray
    residual: float
    epsilon: float
    iters: int = 0
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = dict(x=[float(v) for v in self.x], xi=[float(v) for v in self.xi],
                   mu=[float(v) for v in self.mu], residual=float(self.residual),
                   epsilon=float(self.epsilon))
        if self.diagnostics:
            out["diagnostics"] = self.diagnostics
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "RelativeEquilibrium":
        return cls(np.array(d["x"], float), np.array(d["xi"], float), np.array(d["mu"], float),
                   float(d["residual"]), float(d["epsilon"]),
                   diagnostics=dict(d.get("diagnostics", {})))


def group_matrix(model: Model, group: Union[str, SubtorusInclusion, None]) -> np.ndarray:
    """``n x g`` matrix whose columns are the Lie algebra directions of the group."""
    if group is None or (isinstance(group, str) and group == "full"):
        return np.eye(model.n)
    if isinstance(group, SubtorusInclusion):
        if group.n != model.n:
            raise ValueError(f"subtorus of T^{group.n} used with a T^{model.n} model")
        return group.matrix.astype(float)
    raise ValueError(f"unknown group {group!r}")


def augmented_gradient(model: Model, eps: float, x, xi, gm: np.ndarray) -> np.ndarray:
    """``grad H_eps(x) - sum_a xi_a grad (J . gm)_a(x)``."""
    dj = model.momentum_jac(x)
    return model.grad(eps, x) - dj.T @ (gm @ np.atleast_1d(xi))


def find_re(model: Model, eps: float, group, seed_x, seed_xi=None, mu_target=None,
            opts: NewtonOptions = NewtonOptions(abs_tol=1e-12, max_iters=60, max_step=0.5),
            tol: float = 1e-10) -> RelativeEquilibrium:
    """Locate a relative equilibrium near ``seed_x``.

    ``group`` is ``"full"`` (the whole torus) or a :class:`SubtorusInclusion`.
    With ``mu_target`` the group momentum is pinned to it; without, the
    momentum-drift directions at the seed are pinned instead.  The returned
    residual is the augmented-gradient norm.
    """
    gm = group_matrix(model, group)
    g = gm.shape[1]
    dim = model.dim
    seed_x = model.check(seed_x)
    seed_xi = np.zeros(g) if seed_xi is None else np.atleast_1d(np.asarray(seed_xi, float))
    if seed_xi.shape != (g,):
        raise ValueError(f"seed velocity must have {g} components")
    if mu_target is not None:
        mu_target = np.atleast_1d(np.asarray(mu_target, float))
        if mu_target.shape != (g,):
            raise ValueError(f"momentum target must have {g} components")

    dj0 = model.momentum_jac(seed_x)
    gauge = (model.chart.poisson @ dj0.T @ gm).T  # rows: generator directions at the seed
    if mu_target is None:
        gauge = np.vstack([gauge, gm.T @ dj0])

    def unpack(z):
        return z[:dim], z[dim:]

    def residual(z):
        x, xi = unpack(z)
        if not model.in_domain(x):
            raise DomainError("left the chart domain")
        rows = [augmented_gradient(model, eps, x, xi, gm)]
        if mu_target is not None:
            rows.append(gm.T @ model.momentum_value(x) - mu_target)
        rows.append(gauge @ model.difference(x, seed_x))
        return np.concatenate(rows)

    def jacobian(z):
        x, xi = unpack(z)
        dj = model.momentum_jac(x)
        # second derivatives of J . gm xi by differencing its gradient
        jxi = gm @ xi
        if np.any(jxi):
            d2j = fd_jacobian(lambda y: model.momentum_jac(y).T @ jxi, x, 1e-6)
        else:
            d2j = np.zeros((dim, dim))
        top = np.hstack([model.hess(eps, x) - d2j, -(dj.T @ gm)])
        blocks = [top]
        if mu_target is not None:
            blocks.append(np.hstack([gm.T @ dj, np.zeros((g, g))]))
        blocks.append(np.hstack([gauge, np.zeros((gauge.shape[0], g))]))
        return np.vstack(blocks)

    z0 = np.concatenate([seed_x, seed_xi])
    try:
        res = newton_solve(residual, z0, opts, jac=jacobian)
        if not res.converged and opts.line_search:
            # the monotone search can stall in a local minimum of |F|; retry
            # with capped full steps
            retry = newton_solve(residual, z0, replace(opts, line_search=False,
                                                       max_step=opts.max_step or 0.5),
                                 jac=jacobian)
            if retry.residual_norm < res.residual_norm:
                res = retry
    except DomainError as err:
        raise ConvergenceError(f"relative equilibrium search left the domain: {err}") from err
    x, xi = unpack(res.x)
    if not model.in_domain(x):
        raise ConvergenceError("converged point lies outside the chart domain", res)
    if not np.all(np.isfinite(xi)):
        raise ConvergenceError("converged velocity is not finite", res)
    aug = float(np.linalg.norm(augmented_gradient(model, eps, x, xi, gm)))
    if not res.converged and aug > tol:
        raise ConvergenceError(
            f"no relative equilibrium found (residual {res.residual_norm:.3e} after {res.iters} iterations)",
            res)
    return RelativeEquilibrium(x=x, xi=xi, mu=model.momentum_value(x), residual=aug,
                               epsilon=float(eps), iters=res.iters)


def recover_velocity(model: Model, eps: float, x, sub: SubtorusInclusion):
    """Least-squares velocity ``eta`` in t^r with ``grad H ~ sum eta_a grad (J . i)_a``.

    Returns ``(eta, residual)``; x is a T^r relative equilibrium iff the
    residual is below tolerance.
    """
    gr = model.grad(eps, x)
    if sub.r == 0:
        return np.zeros(0), float(np.linalg.norm(gr))
    gens = model.momentum_jac(x).T @ sub.matrix.astype(float)
    s = np.linalg.svd(gens, compute_uv=False)
    if s[-1] <= RANK_RTOL * max(s[0], 1.0):
        raise RankDeficiencyError("subtorus generator gradients are rank deficient at x")
    eta = np.linalg.lstsq(gens, gr, rcond=None)[0]
    return eta, float(np.linalg.norm(gr - gens @ eta))


def velocity_in_subalgebra(xi, sub: SubtorusInclusion):
    """Closest ``eta`` with ``i(eta) ~ xi`` and the distance ``|xi - i(eta)|``."""
    xi = np.atleast_1d(np.asarray(xi, float))
    if sub.r == 0:
        return np.zeros(0), float(np.linalg.norm(xi))
    m = sub.matrix.astype(float)
    eta = np.linalg.lstsq(m, xi, rcond=None)[0]
    return eta, float(np.linalg.norm(xi - m @ eta))
