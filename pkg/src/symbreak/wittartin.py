"""Witt-Artin splitting ``T_m M = V_m + t^n.m + W`` and alpha-nondegeneracy.

``V_m`` complements the orbit inside ``ker DJ(m)``, ``W`` is an isotropic
complement of the orbit in ``V_m^omega``.  The nondegeneracy space is
``N_alpha = A_alpha + V_m`` with ``A_alpha = W & ker(i^T DJ(m))``; the
verdict is whether the Hessian of ``H_0 - J^xi`` restricted to it is
nondegenerate.  The verdict and the signature do not depend on which
admissible ``V_m`` and ``W`` are used; ``decompose(..., rng=...)`` draws a
random admissible splitting so this can be checked.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import Model, SubtorusInclusion
from .numkernel import (SubspaceBasis, complement_in, fd_jacobian, kernel_basis,
                        lagrangian_complement, orthonormalize, symplectic_orthogonal)


class NonFreeError(ValueError):
    """The orbit directions are rank deficient at the point."""


class MomentumDegeneracyError(ValueError):
    """The momentum map has the wrong rank at the point or on W."""


class NotCriticalError(ValueError):
    """The point is not a critical point of the augmented Hamiltonian."""


@dataclass(frozen=True)
class WittArtinDecomposition:
    at: np.ndarray
    orbit: SubspaceBasis
    v_m: SubspaceBasis
    w: SubspaceBasis
    momentum_jacobian: np.ndarray

    @property
    def dim(self) -> int:
        return self.at.size

    def full_basis(self) -> np.ndarray:
        return np.hstack([self.v_m.columns, self.orbit.columns, self.w.columns])


@dataclass(frozen=True)
class NondegeneracyReport:
    n_alpha: SubspaceBasis
    restricted_hessian: np.ndarray
    eigenvalues: np.ndarray
    nondegenerate: bool
    signature: tuple

    def to_dict(self) -> dict:
        return dict(dim=self.n_alpha.dim, eigenvalues=[float(e) for e in self.eigenvalues],
                    nondegenerate=bool(self.nondegenerate), signature=list(self.signature),
                    restricted_hessian=self.restricted_hessian.tolist())


def _random_mix(rng, d):
    # well-conditioned random change of basis
    while True:
        a = rng.standard_normal((d, d))
        if d == 0 or np.linalg.cond(a) < 50:
            return a


def _check_free(gens, n):
    if n and np.linalg.matrix_rank(gens, tol=1e-10 * max(1.0, np.abs(gens).max())) < n:
        raise NonFreeError("orbit directions are rank deficient: the action is not free at m")


def decompose(model: Model, m, rng: Optional[np.random.Generator] = None) -> WittArtinDecomposition:
    """Witt-Artin decomposition at ``m``.

    Without ``rng`` the choice is deterministic (orthonormal complements).
    With ``rng`` V_m gets random orbit components and a random basis, and W
    is grown from a random complement; both remain admissible.
    """
    n, dim = model.n, model.dim
    m = np.asarray(m, dtype=float)
    if model.momentum_jacobian is not None and m.shape == (dim,):
        # freeness first: points where it fails usually sit outside the domain
        raw = np.asarray(model.momentum_jacobian(m), dtype=float).reshape(n, dim)
        _check_free(model.chart.poisson @ raw.T, n)
    m = model.check(m)
    dj = model.momentum_jac(m)
    gens = model.chart.poisson @ dj.T
    _check_free(gens, n)
    orbit = SubspaceBasis(orthonormalize(gens) if n else np.zeros((dim, 0)), "orbit")
    ker = kernel_basis(dj, ambient=dim) if n else SubspaceBasis(np.eye(dim))
    if ker.dim != dim - n:
        raise MomentumDegeneracyError(
            f"ker DJ has dimension {ker.dim}, expected {dim - n}")
    vm = complement_in(orbit.columns, ker.columns)
    if rng is not None and vm.shape[1]:
        shear = orbit.columns @ rng.standard_normal((n, vm.shape[1])) if n else 0.0
        vm = (vm + shear) @ _random_mix(rng, vm.shape[1])
    v_m = SubspaceBasis(vm, "symplectic-normal")
    container = symplectic_orthogonal(v_m, model.chart)
    start = None
    if rng is not None and n:
        start = rng.standard_normal((dim, n))
    w = lagrangian_complement(orbit, container, model.chart, start=start)
    if rng is not None and n:
        w = SubspaceBasis(w.columns @ _random_mix(rng, n), "orbital-complement")
    return WittArtinDecomposition(at=m, orbit=orbit, v_m=v_m, w=w, momentum_jacobian=dj)


def nondegeneracy_space(wa: WittArtinDecomposition, sub: SubtorusInclusion) -> SubspaceBasis:
    """``N_alpha = A_alpha + V_m`` with ``A_alpha = {w in W : i^T DJ(m) w = 0}``."""
    n = wa.orbit.dim
    constraint = sub.matrix.T.astype(float) @ wa.momentum_jacobian @ wa.w.columns
    if sub.r == 0:
        coeffs = np.eye(n)
    else:
        coeffs = kernel_basis(constraint).columns
    if coeffs.shape[1] != n - sub.r:
        raise MomentumDegeneracyError(
            f"A_alpha has dimension {coeffs.shape[1]}, expected {n - sub.r}")
    a_alpha = wa.w.columns @ coeffs
    return SubspaceBasis(np.hstack([a_alpha, wa.v_m.columns]), "N-alpha")


def poisson_space(wa: WittArtinDecomposition) -> SubspaceBasis:
    """``W + V_m``, the space of the Poisson-reduction nondegeneracy condition."""
    return SubspaceBasis(np.hstack([wa.w.columns, wa.v_m.columns]), "N-alpha")


def augmented_hessian(model: Model, eps: float, m, xi) -> np.ndarray:
    """Hessian of ``H_eps - J^xi`` at m."""
    xi = np.atleast_1d(np.asarray(xi, float))
    h = model.hess(eps, m)
    if np.any(xi):
        h = h - fd_jacobian(lambda y: model.momentum_jac(y).T @ xi, m, 1e-6)
    return 0.5 * (h + h.T)


def check_nondegenerate(model: Model, eps0: float, m, xi, n_alpha: SubspaceBasis,
                        crit_tol: float = 1e-8, rel_tol: float = 1e-8) -> NondegeneracyReport:
    """Restrict ``D^2 (H - J^xi)(m)`` to ``n_alpha`` and decide nondegeneracy."""
    m = model.check(m)
    xi = np.atleast_1d(np.asarray(xi, float))
    grad = model.grad(eps0, m) - model.momentum_jac(m).T @ xi
    if np.linalg.norm(grad) > crit_tol:
        raise NotCriticalError(
            f"m is not a critical point of H - J^xi (gradient norm {np.linalg.norm(grad):.3e})")
    b = n_alpha.columns
    hr = b.T @ augmented_hessian(model, eps0, m, xi) @ b
    hr = 0.5 * (hr + hr.T)
    eig = np.sort(np.linalg.eigvalsh(hr)) if hr.size else np.zeros(0)
    scale = max(1.0, float(np.max(np.abs(eig), initial=0.0)))
    nondeg = bool(eig.size == 0 or np.min(np.abs(eig)) > rel_tol * scale)
    thresh = rel_tol * scale
    sig = (int(np.sum(eig > thresh)), int(np.sum(eig < -thresh)))
    return NondegeneracyReport(n_alpha=n_alpha, restricted_hessian=hr, eigenvalues=eig,
                               nondegenerate=nondeg, signature=sig)
