"""Dense numerical primitives shared by the pipeline.

Newton iteration (square or minimum-norm), finite differences and the
linear algebra of subspaces of a symplectic vector space.  Rank decisions
are made with an SVD and a relative tolerance of ``RANK_RTOL``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

RANK_RTOL = 1e-10

SUBSPACE_LABELS = (
    "orbit",
    "symplectic-normal",
    "orbital-complement",
    "A-alpha",
    "N-alpha",
    "generic",
)


class SingularJacobianError(np.linalg.LinAlgError):
    """Raised by the square-solve Newton policy on a numerically singular Jacobian.

    Callers should retry with ``rank_policy="pseudo-inverse"``.
    """


class DomainError(ValueError):
    """A function was evaluated outside its domain (or returned non-finite values)."""


# ---------------------------------------------------------------------------
# symplectic structure and subspaces


@dataclass(frozen=True)
class SymplecticStructure:
    """Constant symplectic form on R^{2N}, ``omega(u, v) = u @ omega @ v``.

    The default is canonical with coordinates ordered (q_1..q_N, p_1..p_N),
    so that ``omega(e_i, e_{N+i}) = 1``.
    """

    dim: int
    omega: np.ndarray = None

    def __post_init__(self):
        if self.dim % 2:
            raise ValueError(f"symplectic dimension must be even, got {self.dim}")
        if self.omega is None:
            object.__setattr__(self, "omega", canonical_omega(self.dim // 2))
        om = np.asarray(self.omega, dtype=float)
        if om.shape != (self.dim, self.dim):
            raise ValueError(f"omega has shape {om.shape}, expected {(self.dim, self.dim)}")
        if np.max(np.abs(om + om.T), initial=0.0) > 1e-14:
            raise ValueError("omega is not antisymmetric")
        if abs(np.linalg.det(om)) <= 0:
            raise ValueError("omega is degenerate")
        om.setflags(write=False)
        object.__setattr__(self, "omega", om)
        poisson = -np.linalg.inv(om)
        poisson.setflags(write=False)
        object.__setattr__(self, "_poisson", poisson)

    @property
    def poisson(self) -> np.ndarray:
        """Poisson tensor P with X_f = P grad f, i.e. omega(X_f, .) = df."""
        return self._poisson

    def pair(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Matrix of omega between the columns of ``a`` and of ``b``."""
        return np.asarray(a).T @ self.omega @ np.asarray(b)


def canonical_omega(n_dof: int) -> np.ndarray:
    eye = np.eye(n_dof)
    zero = np.zeros((n_dof, n_dof))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass(frozen=True)
class SubspaceBasis:
    """Full-column-rank basis of a subspace of R^{2N}, stored as columns."""

    columns: np.ndarray
    label: str = "generic"

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=float)
        if cols.ndim != 2:
            raise ValueError("columns must be a 2-d array")
        if self.label not in SUBSPACE_LABELS:
            raise ValueError(f"unknown subspace label {self.label!r}")
        if cols.shape[1] > cols.shape[0]:
            raise ValueError("more basis vectors than ambient dimension")
        if cols.shape[1]:
            normed = cols / np.linalg.norm(cols, axis=0)
            smin = np.linalg.svd(normed, compute_uv=False)[-1]
            if smin <= 1e-10:
                raise ValueError(f"basis is rank deficient (smallest singular value {smin:.3g})")
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)

    @property
    def dim(self) -> int:
        return self.columns.shape[1]

    @property
    def ambient(self) -> int:
        return self.columns.shape[0]

    def relabel(self, label: str) -> "SubspaceBasis":
        return SubspaceBasis(self.columns, label)

    def orthonormal(self) -> "SubspaceBasis":
        return SubspaceBasis(orthonormalize(self.columns), self.label)

    def projector(self) -> np.ndarray:
        q = orthonormalize(self.columns)
        return q @ q.T


def empty_basis(ambient: int, label: str = "generic") -> SubspaceBasis:
    return SubspaceBasis(np.zeros((ambient, 0)), label)


def orthonormalize(a: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the column span of ``a`` (rank by relative SVD)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[1] == 0:
        return np.zeros((a.shape[0], 0))
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((a.shape[0], 0))
    rank = int(np.sum(s > RANK_RTOL * s[0]))
    return u[:, :rank]


def kernel_basis(a: np.ndarray, tol: float = RANK_RTOL, label: str = "generic",
                 ambient: Optional[int] = None) -> SubspaceBasis:
    """Orthonormal basis of ``{v : a @ v = 0}``.

    Singular values below ``tol`` times the largest one count as zero.  A
    matrix with no rows (or the zero matrix) has the whole space as kernel.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(1, -1) if a.size or ambient is None else a.reshape(0, ambient)
    n = a.shape[1]
    if a.shape[0] == 0:
        return SubspaceBasis(np.eye(n), label)
    _, s, vt = np.linalg.svd(a, full_matrices=True)
    if s.size == 0 or s[0] == 0.0:
        return SubspaceBasis(np.eye(n), label)
    rank = int(np.sum(s > tol * s[0]))
    return SubspaceBasis(vt[rank:].T.copy(), label)


def principal_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Principal angles (radians, ascending) between the column spans of ``a`` and ``b``.

    Small angles come from the sines (residual of projecting the smaller
    space onto the larger), large ones from the cosines; arccos alone loses
    half the digits near zero.
    """
    qa, qb = orthonormalize(a), orthonormalize(b)
    if qa.shape[1] == 0 or qb.shape[1] == 0:
        return np.zeros(0)
    if qa.shape[1] > qb.shape[1]:
        qa, qb = qb, qa
    cos = np.clip(np.linalg.svd(qa.T @ qb, compute_uv=False), 0.0, 1.0)  # descending
    sin = np.clip(np.sort(np.linalg.svd(qa - qb @ (qb.T @ qa), compute_uv=False)), 0.0, 1.0)
    return np.where(cos > np.sqrt(0.5), np.arcsin(sin), np.arccos(cos))


def same_span(a: np.ndarray, b: np.ndarray, tol: float = 1e-8) -> bool:
    qa, qb = orthonormalize(a), orthonormalize(b)
    if qa.shape[1] != qb.shape[1]:
        return False
    return bool(np.all(principal_angles(qa, qb) < tol))


def symplectic_orthogonal(s: SubspaceBasis, j: SymplecticStructure,
                          label: str = "generic") -> SubspaceBasis:
    """``{v : omega(s, v) = 0 for all s in S}``; has dimension 2N - dim S."""
    if s.ambient != j.dim:
        raise ValueError(f"subspace lives in R^{s.ambient}, form in R^{j.dim}")
    return kernel_basis(s.columns.T @ j.omega, label=label, ambient=j.dim)


def is_isotropic(s: np.ndarray, j: SymplecticStructure, tol: float = 1e-12) -> bool:
    s = np.asarray(s, dtype=float)
    if s.shape[1] == 0:
        return True
    return bool(np.max(np.abs(j.pair(s, s))) <= tol * max(1.0, np.max(np.abs(s)) ** 2))


def complement_in(t: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Orthonormal complement of span(t) inside span(u)."""
    qu = orthonormalize(u)
    qt = orthonormalize(t)
    if qt.shape[1] == 0:
        return qu
    coords = qu.T @ qt  # t expressed in the u basis
    null = kernel_basis(coords.T).columns
    return qu @ null


def lagrangian_complement(t: SubspaceBasis, u: SubspaceBasis, j: SymplecticStructure,
                          start: Optional[np.ndarray] = None,
                          label: str = "orbital-complement") -> SubspaceBasis:
    """Isotropic complement W of an isotropic T inside a container U.

    U must satisfy ``dim U == 2 dim T`` with omega nondegenerate on U.  The
    construction is symplectic Gram-Schmidt: take a complement C of T in U
    (the orthonormal one unless ``start`` is given), normalise it so that
    ``omega(t_i, c_j) = delta_ij`` and then shear it along T to kill
    ``omega(c_i, c_j)``.
    """
    tc, uc = t.columns, u.columns
    d = tc.shape[1]
    if u.dim != 2 * d:
        raise ValueError(f"container has dimension {u.dim}, need {2 * d}")
    if d and np.max(principal_angles(tc, uc)) > 1e-8:
        raise ValueError("T is not contained in U")
    if not is_isotropic(tc, j, 1e-10):
        raise ValueError("T is not isotropic")
    if d == 0:
        return empty_basis(j.dim, label)
    if start is None:
        c = complement_in(tc, uc)
    else:
        # project the proposed vectors into U and strip their T components
        qu = orthonormalize(uc)
        c = qu @ (qu.T @ np.asarray(start, dtype=float))
        c = c[:, :d]
    g = j.pair(tc, c)  # g[i, k] = omega(t_i, c_k)
    if abs(np.linalg.det(g)) < 1e-12 * max(1.0, np.max(np.abs(g))) ** d:
        raise ValueError("no isotropic complement: omega pairs T degenerately with its complement")
    c = c @ np.linalg.inv(g)
    a = -0.5 * j.pair(c, c)
    w = c + tc @ a.T
    # one corrective sweep absorbs round-off from the shear
    g = j.pair(tc, w)
    w = w @ np.linalg.inv(g)
    w = w - 0.5 * tc @ j.pair(w, w).T
    if not is_isotropic(w, j, 1e-10):
        raise ValueError("isotropic complement construction did not converge")
    return SubspaceBasis(orthonormalize(w), label)


# ---------------------------------------------------------------------------
# finite differences


def _checked(val):
    arr = np.asarray(val, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("non-finite function value encountered")
    return arr


def fd_gradient(f: Callable, x: np.ndarray, step: float = 1e-5,
                richardson: bool = False) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if step <= 0:
        raise ValueError("step must be positive")

    def central(h):
        g = np.empty(x.size)
        for i in range(x.size):
            e = np.zeros(x.size)
            e[i] = h
            g[i] = (_checked(f(x + e)) - _checked(f(x - e))) / (2 * h)
        return g

    g = central(step)
    if richardson:
        g = (4 * central(step / 2) - g) / 3
    return g


def fd_hessian(f: Callable, x: np.ndarray, step: float = 1e-4,
               richardson: bool = False) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if step <= 0:
        raise ValueError("step must be positive")
    n = x.size
    f0 = float(_checked(f(x)))

    def central(h):
        hess = np.empty((n, n))
        for i in range(n):
            ei = np.zeros(n)
            ei[i] = h
            hess[i, i] = (_checked(f(x + ei)) - 2 * f0 + _checked(f(x - ei))) / h**2
            for k in range(i):
                ek = np.zeros(n)
                ek[k] = h
                val = (_checked(f(x + ei + ek)) - _checked(f(x + ei - ek))
                       - _checked(f(x - ei + ek)) + _checked(f(x - ei - ek))) / (4 * h**2)
                hess[i, k] = hess[k, i] = val
        return hess

    hess = central(step)
    if richardson:
        hess = (4 * central(step / 2) - hess) / 3
    return 0.5 * (hess + hess.T)


def fd_jacobian(f: Callable, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of a vector field."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = step
        cols.append((_checked(f(x + e)) - _checked(f(x - e))) / (2 * step))
    if not cols:
        f0 = _checked(f(x))
        return np.zeros((np.atleast_1d(f0).size, 0))
    return np.column_stack(cols)


def fd_derivatives(f: Callable, x: np.ndarray, order: int, step: Optional[float] = None,
                   richardson: bool = False) -> np.ndarray:
    """Gradient (``order=1``) or symmetrised Hessian (``order=2``) by central differences."""
    if order == 1:
        return fd_gradient(f, x, 1e-5 if step is None else step, richardson)
    if order == 2:
        return fd_hessian(f, x, 1e-4 if step is None else step, richardson)
    raise ValueError(f"order must be 1 or 2, got {order}")


# ---------------------------------------------------------------------------
# Newton


@dataclass(frozen=True)
class NewtonOptions:
    max_iters: int = 50
    abs_tol: float = 1e-12
    step_damping: float = 0.5
    fd_step: float = 1e-7
    rank_policy: str = "pseudo-inverse"
    max_backtracks: int = 30
    max_step: Optional[float] = None  # cap on the Newton step length
    line_search: bool = True  # False: accept every finite (capped) step

    def __post_init__(self):
        if self.abs_tol <= 0:
            raise ValueError("abs_tol must be positive")
        if not 0 < self.step_damping < 1:
            raise ValueError("step_damping must lie in (0, 1)")
        if self.rank_policy not in ("square-solve", "pseudo-inverse"):
            raise ValueError(f"unknown rank policy {self.rank_policy!r}")


@dataclass
class NewtonResult:
    x: np.ndarray
    residual_norm: float
    iters: int
    converged: bool
    history: list = field(default_factory=list)


def newton_solve(fun: Callable, x0, opts: NewtonOptions = NewtonOptions(),
                 jac: Optional[Callable] = None) -> NewtonResult:
    """Damped Newton / Gauss-Newton iteration for ``fun(x) = 0``.

    With ``rank_policy="pseudo-inverse"`` each step is the minimum-norm
    least-squares solution of ``J dx = -F``, which handles both rank
    deficient and overdetermined systems.  A backtracking line search on the
    residual norm guards the full step.  Non-convergence is reported through
    ``converged=False``.
    """
    x = np.array(x0, dtype=float)
    r = np.atleast_1d(np.asarray(fun(x), dtype=float))
    rn = float(np.linalg.norm(r)) if np.all(np.isfinite(r)) else np.inf
    history = [rn]
    it = 0
    while rn > opts.abs_tol and it < opts.max_iters:
        jm = jac(x) if jac is not None else fd_jacobian(fun, x, opts.fd_step)
        jm = np.atleast_2d(np.asarray(jm, dtype=float))
        if opts.rank_policy == "square-solve":
            if jm.shape[0] != jm.shape[1]:
                raise SingularJacobianError("square-solve policy needs a square Jacobian")
            s = np.linalg.svd(jm, compute_uv=False)
            if s[-1] <= RANK_RTOL * s[0]:
                raise SingularJacobianError(
                    f"Jacobian numerically singular (condition {s[0] / max(s[-1], 1e-300):.3g})")
            dx = np.linalg.solve(jm, -r)
        else:
            dx = np.linalg.lstsq(jm, -r, rcond=RANK_RTOL)[0]
        if opts.max_step is not None:
            dn = float(np.linalg.norm(dx))
            if dn > opts.max_step:
                dx *= opts.max_step / dn
        it += 1
        lam = 1.0
        for _ in range(opts.max_backtracks):
            trial = x + lam * dx
            try:
                rt = np.atleast_1d(np.asarray(fun(trial), dtype=float))
                rtn = float(np.linalg.norm(rt)) if np.all(np.isfinite(rt)) else np.inf
            except DomainError:
                rtn = np.inf
            if rtn < rn or rtn <= opts.abs_tol or (not opts.line_search and np.isfinite(rtn)):
                break
            lam *= opts.step_damping
        else:
            history.append(rn)
            break
        x, r, rn = trial, rt, rtn
        history.append(rn)
    return NewtonResult(x=x, residual_norm=rn, iters=it, converged=rn <= opts.abs_tol,
                        history=history)
