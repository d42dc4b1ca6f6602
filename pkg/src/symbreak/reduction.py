"""Slice chart around the unperturbed orbit and elimination of the fibre.

The reduced space near the orbit of m is realised by the chart

    psi(k, v, c) = act(C k, m + B_n v + B_c c),

where ``C`` completes the subtorus lattice to a unimodular basis (so k
runs over T^{n-r}), ``B_n`` spans the nondegeneracy space and ``B_c`` a
complement of ``A_alpha`` in W carrying the momentum constraint.  For every
k the fibre variables are eliminated by Newton:

* symplectic mode -- find (v, c, eta) with the Lagrangian
  ``H_eps - eta . (i^T J - alpha)`` stationary along the slice and the
  level ``i^T J = alpha`` met exactly; ``hbar(k) = H_eps(x*)``.
* Poisson mode -- with the velocity xi held fixed, make ``H_eps - J^xi``
  stationary along ``W + V_m``; ``hbar(k) = (H_eps - J^xi)(x*)``.

At eps = 0 the fibre solution is identically zero.  The stationarity in
the slice makes ``d hbar / dk`` equal to the derivative of H_eps along the
torus directions at x* (the envelope identity, see :meth:`FiberSolution.grad_k`).
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from itertools import product
from typing import Optional, Sequence

import numpy as np

from .model import Model, SubtorusInclusion
from .numkernel import DomainError, NewtonOptions, complement_in, newton_solve, orthonormalize
from .releq import RelativeEquilibrium, velocity_in_subalgebra
from .wittartin import (NondegeneracyReport, WittArtinDecomposition, check_nondegenerate,
                        nondegeneracy_space, poisson_space)

TWO_PI = 2.0 * math.pi
MODES = ("symplectic", "poisson")


class HypothesisError(ValueError):
    """A hypothesis of the persistence theorem fails at the base point."""


class ChartEscapeError(RuntimeError):
    """A fibre solution left the chart neighbourhood."""


class ReductionError(RuntimeError):
    """Too many fibre solves failed while sampling the reduced function."""

    def __init__(self, message, holes=()):
        super().__init__(message)
        self.holes = list(holes)


# ---------------------------------------------------------------------------
# lattice


@dataclass(frozen=True)
class LatticeComplement:
    c_matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.c_matrix.shape[1]


def complement_lattice(sub: SubtorusInclusion) -> LatticeComplement:
    """Integer columns C with ``[i | C]`` unimodular, via the Smith decomposition.

    The columns are size-reduced against the subtorus lattice and signed so
    that their first nonzero entry is positive.
    """
    n, r = sub.n, sub.r
    if r == 0:
        return LatticeComplement(np.eye(n, dtype=int))
    if r == n:
        if round(abs(np.linalg.det(sub.matrix.astype(float)))) != 1:
            raise ValueError("subtorus lattice of full rank is not unimodular")
        return LatticeComplement(np.zeros((n, 0), dtype=int))
    from sympy import Matrix, ZZ
    from sympy.matrices.normalforms import smith_normal_decomp

    a = Matrix(sub.matrix.tolist())
    snf, s, _ = smith_normal_decomp(a, domain=ZZ)
    diag = [abs(int(snf[i, i])) for i in range(r)]
    if any(d != 1 for d in diag):
        raise ValueError(f"subtorus lattice is not saturated (invariant factors {diag}); "
                         "its columns cannot be extended to a unimodular basis")
    s_inv = np.array(s.inv().tolist(), dtype=object)
    c = np.array(s_inv[:, r:], dtype=np.int64)
    basis = sub.matrix.astype(np.int64)
    gram = basis.T @ basis
    for j in range(c.shape[1]):
        col = c[:, j]
        coeff = np.linalg.solve(gram.astype(float), (basis.T @ col).astype(float))
        col = col - basis @ np.floor(coeff + 0.5).astype(np.int64)
        nz = np.flatnonzero(col)
        if nz.size and col[nz[0]] < 0:
            col = -col
        c[:, j] = col
    full = np.hstack([basis, c])
    if round(abs(np.linalg.det(full.astype(float)))) != 1:
        raise ValueError("lattice completion failed")
    return LatticeComplement(c.astype(int))


# ---------------------------------------------------------------------------
# chart


@dataclass(frozen=True)
class SliceChart:
    model: Model
    base: RelativeEquilibrium
    wa: WittArtinDecomposition
    sub: SubtorusInclusion
    complement: LatticeComplement
    b_n: np.ndarray
    b_c: np.ndarray
    mode: str
    radius: float
    xi: np.ndarray
    eta0: np.ndarray
    alpha: np.ndarray
    nondegeneracy: NondegeneracyReport

    @property
    def m(self) -> np.ndarray:
        return self.base.x

    @property
    def torus_dim(self) -> int:
        return self.complement.dim

    @property
    def fiber_dim(self) -> int:
        return self.b_n.shape[1]

    def torus_element(self, k) -> np.ndarray:
        k = np.atleast_1d(np.asarray(k, float)).reshape(self.torus_dim)
        return self.complement.c_matrix @ k

    def slice_point(self, v, c=None) -> np.ndarray:
        y = self.m + self.b_n @ np.asarray(v, float)
        if c is not None and self.b_c.shape[1]:
            y = y + self.b_c @ np.asarray(c, float)
        return y

    def point(self, k, v, c=None) -> np.ndarray:
        return self.model.act(self.torus_element(k), self.slice_point(v, c))

    def base_hbar(self) -> float:
        h = self.model.energy(0.0, self.m)
        if self.mode == "poisson":
            h -= float(self.xi @ self.model.momentum_value(self.m))
        return h


def _as_full_velocity(xi, sub: SubtorusInclusion, n: int) -> np.ndarray:
    xi = np.atleast_1d(np.asarray(xi, float))
    if xi.size == n:
        return xi
    if xi.size == sub.r:
        return sub.embed(xi)
    raise ValueError(f"velocity has {xi.size} components; expected {n} or {sub.r}")


def _probe_radius(model: Model, m, basis: np.ndarray, radius: float) -> float:
    for _ in range(40):
        pts = [m + s * radius * b for b in basis.T for s in (-1.0, 1.0)]
        if all(model.in_domain(p) for p in pts):
            return radius
        radius *= 0.5
    raise HypothesisError("no chart neighbourhood fits inside the model domain")


def build_chart(model: Model, re: RelativeEquilibrium, wa: WittArtinDecomposition,
                sub: SubtorusInclusion, complement: Optional[LatticeComplement] = None,
                mode: str = "symplectic", radius: Optional[float] = None,
                velocity_tol: float = 1e-8) -> SliceChart:
    """Chart on the reduced space near the orbit of ``re.x``.

    Refuses (``HypothesisError``) when the velocity is not in the subtorus
    algebra or when the base point fails the nondegeneracy condition.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if sub.n != model.n:
        raise ValueError("subtorus does not match the model torus")
    if complement is None:
        complement = complement_lattice(sub)
    xi = _as_full_velocity(re.xi, sub, model.n)
    eta0, gap = velocity_in_subalgebra(xi, sub)
    if gap > velocity_tol:
        raise HypothesisError(
            f"velocity hypothesis violated: xi={xi} is at distance {gap:.3e} "
            "from the subtorus algebra")
    if mode == "symplectic":
        n_space = nondegeneracy_space(wa, sub)
    else:
        n_space = poisson_space(wa)
    report = check_nondegenerate(model, 0.0, re.x, xi, n_space)
    if not report.nondegenerate:
        raise HypothesisError(
            f"nondegeneracy hypothesis violated: restricted Hessian eigenvalues "
            f"{report.eigenvalues}")
    b_n = orthonormalize(n_space.columns)
    if mode == "symplectic" and sub.r:
        a_alpha = n_space.columns[:, :model.n - sub.r]
        b_c = complement_in(a_alpha, wa.w.columns)
    else:
        b_c = np.zeros((model.dim, 0))
    alpha = sub.restrict(re.mu) if mode == "symplectic" else sub.restrict(
        model.momentum_value(re.x))
    if radius is None:
        eig = np.abs(report.eigenvalues)
        scale = float(np.min(eig)) if eig.size else 1.0
        radius = 0.1 * min(1.0, scale)
        radius = _probe_radius(model, re.x, np.hstack([b_n, b_c]), radius)
    return SliceChart(model=model, base=re, wa=wa, sub=sub, complement=complement, b_n=b_n,
                      b_c=b_c, mode=mode, radius=float(radius), xi=xi, eta0=eta0,
                      alpha=alpha, nondegeneracy=report)


# ---------------------------------------------------------------------------
# fibre elimination


@dataclass
class FiberSolution:
    k: np.ndarray
    epsilon: float
    v_star: np.ndarray
    c_star: Optional[np.ndarray]
    eta: Optional[np.ndarray]
    x_star: np.ndarray
    hbar: float
    residual: float
    newton_iters: int
    grad_k: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def unknowns(self) -> np.ndarray:
        parts = [self.v_star]
        if self.c_star is not None:
            parts += [self.c_star, self.eta]
        return np.concatenate(parts)

    @property
    def v_norm(self) -> float:
        parts = [self.v_star] + ([self.c_star] if self.c_star is not None else [])
        return float(np.linalg.norm(np.concatenate(parts)))


FIBER_OPTS = NewtonOptions(max_iters=40, abs_tol=1e-13, fd_step=1e-6)


def _fiber_system(chart: SliceChart, k, eps: float):
    model, sub = chart.model, chart.sub
    dn, r = chart.fiber_dim, chart.b_c.shape[1]
    theta = chart.torus_element(k)
    gm = sub.matrix.astype(float)

    def split(z):
        if chart.mode == "poisson":
            return z, None, None
        return z[:dn], z[dn:dn + r], z[dn + r:]

    def residual(z):
        v, c, eta = split(z)
        y = chart.slice_point(v, c)
        if not model.in_domain(y):
            raise DomainError("fibre iterate left the domain")
        x = model.act(theta, y)
        dphi = model.act_jacobian(theta, y)
        dj = model.momentum_jac(x)
        if chart.mode == "poisson":
            g = model.grad(eps, x) - dj.T @ chart.xi
            return (dphi @ chart.b_n).T @ g
        g = model.grad(eps, x) - dj.T @ (gm @ eta)
        rows = [(dphi @ chart.b_n).T @ g, (dphi @ chart.b_c).T @ g,
                gm.T @ model.momentum_value(x) - chart.alpha]
        return np.concatenate(rows)

    return residual, split, theta


def _zero_start(chart: SliceChart) -> np.ndarray:
    if chart.mode == "poisson":
        return np.zeros(chart.fiber_dim)
    return np.concatenate([np.zeros(chart.fiber_dim + chart.b_c.shape[1]), chart.eta0])


def envelope_gradient(chart: SliceChart, eps: float, x_star) -> np.ndarray:
    """Derivative of H_eps at x* along the chart's torus directions."""
    g = chart.model.grad(eps, x_star)
    c = chart.complement.c_matrix.astype(float)
    gens = chart.model.generator
    return np.array([g @ gens(c[:, j], x_star) for j in range(chart.torus_dim)])


def fiber_solve(chart: SliceChart, k, eps: float, warm_start: Optional[FiberSolution] = None,
                opts: NewtonOptions = FIBER_OPTS, tol: float = 1e-10) -> FiberSolution:
    """Eliminate the fibre variables at torus point ``k``."""
    k = np.atleast_1d(np.asarray(k, float)).reshape(chart.torus_dim)
    residual, split, theta = _fiber_system(chart, k, eps)
    z0 = warm_start.unknowns if warm_start is not None else _zero_start(chart)
    try:
        res = newton_solve(residual, z0, opts)
    except DomainError as err:
        raise ChartEscapeError(f"fibre solve at k={k} left the domain: {err}") from err
    if not res.converged and res.residual_norm > tol:
        raise ReductionError(
            f"fibre solve at k={k}, eps={eps} did not converge "
            f"(residual {res.residual_norm:.3e})")
    v, c, eta = split(res.x)
    fiber_norm = float(np.linalg.norm(v if c is None else np.concatenate([v, c])))
    if fiber_norm > chart.radius:
        raise ChartEscapeError(
            f"fibre solution at k={k} has norm {fiber_norm:.3e} beyond the chart radius "
            f"{chart.radius:.3e}")
    x = chart.model.act(theta, chart.slice_point(v, c))
    h = chart.model.energy(eps, x)
    if chart.mode == "poisson":
        h -= float(chart.xi @ chart.model.momentum_value(x))
    return FiberSolution(k=k, epsilon=float(eps), v_star=np.array(v), c_star=c,
                         eta=eta, x_star=x, hbar=float(h), residual=res.residual_norm,
                         newton_iters=res.iters, grad_k=envelope_gradient(chart, eps, x))


# ---------------------------------------------------------------------------
# sampling


@dataclass
class ReducedFunction:
    mode: str
    epsilon: float
    grid: tuple
    samples: np.ndarray  # object array of FiberSolution (None marks a hole)
    holes: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return len(self.grid)

    def axes(self) -> list:
        return [np.arange(g) * TWO_PI / g for g in self.grid]

    def values(self) -> np.ndarray:
        return np.vectorize(lambda s: np.nan if s is None else s.hbar, otypes=[float])(
            self.samples)

    @property
    def complete(self) -> bool:
        return not self.holes

    def rows(self):
        for idx in np.ndindex(*self.grid):
            s = self.samples[idx]
            k = [i * TWO_PI / g for i, g in zip(idx, self.grid)]
            if s is None:
                yield k + [math.nan, math.nan, -1, math.nan]
            else:
                yield k + [s.hbar, s.residual, s.newton_iters, s.v_norm]

    def header(self) -> list:
        return [f"k_{i + 1}" for i in range(self.dim)] + ["hbar", "residual", "newton_iters",
                                                          "v_norm"]

    def to_csv(self, path_or_file) -> None:
        close = False
        if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
            fh = open(path_or_file, "w", newline="")
            close = True
        else:
            fh = path_or_file
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            for row in self.rows():
                w.writerow([_fmt(v) for v in row])
        finally:
            if close:
                fh.close()


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _schedule(eps: float, continuation) -> list:
    if continuation is None:
        return [float(eps)]
    if isinstance(continuation, int):
        return [float(e) for e in np.linspace(0.0, eps, continuation + 1)[1:]]
    steps = [float(e) for e in continuation]
    if not steps or steps[-1] != float(eps):
        steps.append(float(eps))
    return steps


def sample_reduced(chart: SliceChart, eps: float, resolution=64, continuation=None,
                   max_hole_fraction: float = 0.05, previous: Optional[ReducedFunction] = None
                   ) -> ReducedFunction:
    """Fibre solutions on the uniform grid of T^{n-r}.

    Nodes are swept in lexicographic order, each warm-started from the
    previous epsilon step (or ``previous``) and otherwise from its neighbour;
    a failed warm start is retried cold.  ``continuation`` is a number of
    equal epsilon steps from 0 or an explicit schedule.
    """
    d = chart.torus_dim
    if isinstance(resolution, int):
        grid = (resolution,) * d
    else:
        grid = tuple(int(g) for g in resolution)
    if len(grid) != d:
        raise ValueError(f"grid must have {d} dimensions")
    if any(g < 8 for g in grid):
        raise ValueError("resolution must be at least 8 per torus dimension")
    prev = previous.samples if previous is not None and previous.grid == grid else None
    samples = None
    holes = []
    for step_eps in _schedule(eps, continuation):
        samples = np.empty(grid, dtype=object)
        holes = []
        last = None
        for idx in np.ndindex(*grid):
            k = np.array([i * TWO_PI / g for i, g in zip(idx, grid)])
            starts = []
            if prev is not None and prev[idx] is not None:
                starts.append(prev[idx])
            if last is not None:
                starts.append(last)
            starts.append(None)
            sol = None
            for start in starts:
                try:
                    sol = fiber_solve(chart, k, step_eps, warm_start=start)
                    break
                except (ReductionError, ChartEscapeError):
                    continue
            samples[idx] = sol
            if sol is None:
                holes.append(tuple(idx))
            else:
                last = sol
        prev = samples
        total = int(np.prod(grid)) if grid else 1
        if len(holes) > max_hole_fraction * total:
            raise ReductionError(
                f"{len(holes)} of {total} fibre solves failed at eps={step_eps}; the "
                "perturbation is probably too large for the local model", holes)
    if holes:
        warnings.warn(f"reduced function has {len(holes)} holes at eps={eps}", RuntimeWarning)
    return ReducedFunction(mode=chart.mode, epsilon=float(eps), grid=grid, samples=samples,
                           holes=holes)
