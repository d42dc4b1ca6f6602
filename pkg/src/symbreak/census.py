"""Critical points of the reduced function and their relative equilibria.

Candidates are grid nodes where the discrete gradient magnitude is locally
minimal.  Each candidate is refined by Newton on the envelope gradient of
hbar (fresh fibre solves, Hessian by central differences of the gradient),
merged modulo the 2 pi lattice and classified by its Hessian.  The report
compares the observed count with the category bound ``n - r + 1`` and, if
every point is nondegenerate, with the Morse bound ``2^(n - r)``.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .model import Model, SubtorusInclusion
from .numkernel import NewtonOptions
from .releq import (ConvergenceError, RelativeEquilibrium, augmented_gradient, find_re,
                    recover_velocity, velocity_in_subalgebra)
from .reduction import (TWO_PI, ChartEscapeError, FiberSolution, ReducedFunction,
                        ReductionError, SliceChart, build_chart, fiber_solve, sample_reduced)
from .wittartin import decompose

REFINE_TOL = 1e-10
DEGENERACY_RTOL = 1e-6
MAP_TOL = 1e-8
# capped full Newton steps: a monotone line search prefers the minimum
ORACLE_OPTS = NewtonOptions(abs_tol=1e-12, max_iters=60, max_step=0.2, line_search=False)


class RefinementWarning(RuntimeWarning):
    pass


def wrap_angles(k) -> np.ndarray:
    return np.mod(np.asarray(k, float), TWO_PI)


def lattice_distance(a, b) -> float:
    d = np.mod(np.asarray(a, float) - np.asarray(b, float) + math.pi, TWO_PI) - math.pi
    return float(np.linalg.norm(d))


@dataclass
class CriticalPoint:
    k: np.ndarray
    value: float
    gradient_norm: float
    morse_index: Union[int, str]
    hessian_eigs: np.ndarray
    fiber: Optional[FiberSolution] = None

    @property
    def nondegenerate(self) -> bool:
        return self.morse_index != "degenerate"

    def to_dict(self) -> dict:
        return dict(k=[float(v) for v in self.k], value=float(self.value),
                    gradient_norm=float(self.gradient_norm), morse_index=self.morse_index,
                    hessian_eigs=[float(v) for v in self.hessian_eigs])


@dataclass
class CensusReport:
    eps: float
    mode: str
    n: int
    r: int
    points: list
    mapped: list
    count: int
    ls_bound: int
    morse_bound: int
    all_nondegenerate: bool
    ls_satisfied: bool
    morse_satisfied: Optional[bool]
    euler_sum: Optional[int]
    notes: list = field(default_factory=list)
    model_spec: Optional[dict] = None

    def to_dict(self) -> dict:
        out = dict(eps=float(self.eps), mode=self.mode, n=self.n, r=self.r,
                   count=self.count, ls_bound=self.ls_bound, morse_bound=self.morse_bound,
                   all_nondegenerate=self.all_nondegenerate, ls_satisfied=self.ls_satisfied,
                   morse_satisfied=self.morse_satisfied, euler_sum=self.euler_sum,
                   points=[p.to_dict() for p in self.points],
                   mapped=[m.to_dict() for m in self.mapped], notes=list(self.notes))
        if self.model_spec is not None:
            out["model"] = self.model_spec
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    def csv_header(self) -> list:
        d = self.n - self.r
        dim = len(self.mapped[0].x) if self.mapped else 0
        return ([f"k_{i + 1}" for i in range(d)] + ["value", "gradient_norm", "morse_index"]
                + [f"eig_{i + 1}" for i in range(d)] + [f"x_{i + 1}" for i in range(dim)]
                + ["re_residual", "accepted"])

    def to_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.csv_header())
        for p, m in zip(self.points, self.mapped):
            w.writerow([repr(float(v)) for v in p.k] + [repr(float(p.value)),
                        repr(float(p.gradient_norm)), str(p.morse_index)]
                       + [repr(float(v)) for v in p.hessian_eigs]
                       + [repr(float(v)) for v in m.x]
                       + [repr(float(m.residual)), str(bool(m.diagnostics.get("accepted")))])


# ---------------------------------------------------------------------------
# location


def _discrete_gradient_sq(values: np.ndarray) -> np.ndarray:
    g2 = np.zeros_like(values)
    for ax in range(values.ndim):
        g = 0.5 * (np.roll(values, -1, axis=ax) - np.roll(values, 1, axis=ax))
        g2 += g * g
    return g2


def _candidates(values: np.ndarray) -> list:
    g2 = _discrete_gradient_sq(values)
    d = values.ndim
    is_min = np.ones(values.shape, bool)
    for shift in np.ndindex(*(3,) * d):
        off = tuple(s - 1 for s in shift)
        if not any(off):
            continue
        is_min &= g2 <= np.roll(g2, off, axis=tuple(range(d)))
    return [tuple(i) for i in np.argwhere(is_min)]


def _hessian(chart: SliceChart, eps: float, sol: FiberSolution, step: float) -> np.ndarray:
    d = chart.torus_dim
    h = np.zeros((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = step
        gp = fiber_solve(chart, sol.k + e, eps, warm_start=sol).grad_k
        gm = fiber_solve(chart, sol.k - e, eps, warm_start=sol).grad_k
        h[:, j] = (gp - gm) / (2 * step)
    return 0.5 * (h + h.T)


def refine_point(chart: SliceChart, eps: float, start: FiberSolution, cell: float,
                 tol: float = REFINE_TOL, max_iters: int = 30):
    """Newton on the envelope gradient from a grid sample; returns (solution, hessian)."""
    sol = start
    step = 1e-4 * cell
    hess = None
    polish = 0
    for _ in range(max_iters):
        g = sol.grad_k
        hess = _hessian(chart, eps, sol, step)
        gn = float(np.linalg.norm(g))
        if gn <= tol:
            # two extra steps push the gradient well under the tolerance
            polish += 1
            if polish > 2 or gn == 0.0:
                break
        try:
            dk = -np.linalg.solve(hess, g)
        except np.linalg.LinAlgError:
            dk = -np.linalg.lstsq(hess, g, rcond=None)[0]
        norm = float(np.linalg.norm(dk))
        if norm > cell:
            dk *= cell / norm
        new = fiber_solve(chart, sol.k + dk, eps, warm_start=sol)
        if gn <= tol and np.linalg.norm(new.grad_k) >= gn:
            break
        sol = new
    if np.linalg.norm(sol.grad_k) > tol:
        return None, None
    sol = fiber_solve(chart, wrap_angles(sol.k), eps, warm_start=sol)
    return sol, _hessian(chart, eps, sol, step)


def locate_critical_points(rf: ReducedFunction, chart: SliceChart, tol: float = REFINE_TOL,
                           degeneracy_rtol: float = DEGENERACY_RTOL, workers: int = 1) -> list:
    """Refined, deduplicated and classified critical points of ``rf``.

    Candidates are refined independently; ``workers > 1`` uses a thread
    pool, and the result does not depend on the number of workers.
    """
    if rf.holes:
        raise ReductionError("reduced function has holes; resample before the census", rf.holes)
    d = rf.dim
    eps = rf.epsilon
    if d == 0:
        sol = rf.samples[()]
        return [CriticalPoint(np.zeros(0), sol.hbar, 0.0, 0, np.zeros(0), sol)]
    values = rf.values()
    spread = float(values.max() - values.min())
    if spread <= 1e-12 * max(1.0, float(np.abs(values).max())):
        warnings.warn("reduced function is constant: every point is critical", RefinementWarning)
        return []
    cell = TWO_PI / min(rf.grid)
    cands = _candidates(values)

    def attempt(idx):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                return refine_point(chart, eps, rf.samples[idx], cell, tol), None
        except (ReductionError, ChartEscapeError) as err:
            return (None, None), f"refinement from node {idx} failed: {err}"

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(attempt, cands))
    else:
        results = [attempt(idx) for idx in cands]
    found = []
    for idx, ((sol, hess), msg) in zip(cands, results):
        if msg is not None:
            warnings.warn(msg, RefinementWarning)
        elif sol is None:
            warnings.warn(f"refinement from node {idx} diverged; candidate dropped",
                          RefinementWarning)
        else:
            found.append((sol, hess))
    if not found:
        return []

    eig_scale = max([float(np.max(np.abs(np.linalg.eigvalsh(h)))) for _, h in found]
                    + [spread])
    threshold = degeneracy_rtol * eig_scale
    points, merges = [], []
    for sol, hess in found:
        eigs = np.sort(np.linalg.eigvalsh(hess))
        lam = float(np.min(np.abs(eigs)))
        merge = min(0.5 * cell, max(1e-9, 10 * tol / max(lam, threshold)))
        dup = None
        for p, pm in zip(points, merges):
            if lattice_distance(p.k, sol.k) <= max(merge, pm):
                dup = p
                break
        if dup is not None:
            if abs(dup.value - sol.hbar) > 1e-8 * max(1.0, abs(sol.hbar)):
                warnings.warn(f"ambiguous merge at k={sol.k}", RefinementWarning)
            if np.linalg.norm(sol.grad_k) < dup.gradient_norm:
                dup.k, dup.value, dup.fiber = sol.k, sol.hbar, sol
                dup.gradient_norm = float(np.linalg.norm(sol.grad_k))
            continue
        index: Union[int, str] = int(np.sum(eigs < 0)) if lam > threshold else "degenerate"
        cp = CriticalPoint(k=sol.k, value=sol.hbar, gradient_norm=float(np.linalg.norm(sol.grad_k)),
                           morse_index=index, hessian_eigs=eigs, fiber=sol)
        points.append(cp)
        merges.append(merge)
    points.sort(key=lambda p: tuple(np.round(p.k, 9)))
    return points


# ---------------------------------------------------------------------------
# map back and report


def map_back(chart: SliceChart, cp: CriticalPoint, eps: float, tol: float = MAP_TOL
             ) -> RelativeEquilibrium:
    """Relative equilibrium of the subtorus corresponding to ``cp``."""
    model, sub = chart.model, chart.sub
    sol = fiber_solve(chart, cp.k, eps, warm_start=cp.fiber)
    x = sol.x_star
    eta, resid = recover_velocity(model, eps, x, sub)
    mu = model.momentum_value(x)
    eta_xi, _ = velocity_in_subalgebra(chart.xi, sub)
    diag = dict(k=[float(v) for v in cp.k], mode=chart.mode,
                velocity_gap=float(np.linalg.norm(eta - eta_xi)),
                momentum_deviation=float(np.linalg.norm(sub.restrict(mu) - chart.alpha)),
                near_chart_boundary=bool(sol.v_norm > 0.8 * chart.radius))
    if chart.mode == "poisson":
        aug = float(np.linalg.norm(augmented_gradient(model, eps, x, chart.xi, np.eye(model.n))))
        diag["fixed_velocity_residual"] = aug
        xi_out = eta
        ok = aug <= tol and resid <= tol
    else:
        xi_out = eta
        ok = resid <= tol and diag["momentum_deviation"] <= tol
    diag["accepted"] = bool(ok)
    if not ok:
        warnings.warn(f"mapped point at k={cp.k} fails the relative-equilibrium check "
                      f"(residual {resid:.3e}); the correspondence is numerically violated here",
                      RefinementWarning)
    return RelativeEquilibrium(x=x, xi=xi_out, mu=mu, residual=resid, epsilon=float(eps),
                               diagnostics=diag)


def report(points: list, chart: SliceChart, eps: float, model_spec: Optional[dict] = None
           ) -> CensusReport:
    d = chart.torus_dim
    mapped = [map_back(chart, p, eps) for p in points]
    all_nd = bool(points) and all(p.nondegenerate for p in points)
    count = len(points)
    euler = int(sum((-1) ** p.morse_index for p in points)) if all_nd else None
    notes = []
    if not points:
        notes.append("no critical points located")
    if any(m.diagnostics.get("near_chart_boundary") for m in mapped):
        notes.append("some points lie near the chart boundary")
    if any(not m.diagnostics.get("accepted") for m in mapped):
        notes.append("some mapped points fail the relative-equilibrium check")
    return CensusReport(eps=float(eps), mode=chart.mode, n=chart.model.n, r=chart.sub.r,
                        points=points, mapped=mapped, count=count, ls_bound=d + 1,
                        morse_bound=2 ** d, all_nondegenerate=all_nd,
                        ls_satisfied=count >= d + 1,
                        morse_satisfied=(count >= 2 ** d) if all_nd else None,
                        euler_sum=euler, notes=notes, model_spec=model_spec)


def default_resolution(d: int) -> int:
    return 64 if d <= 2 else 16


@dataclass
class CensusRun:
    report: CensusReport
    chart: SliceChart
    reduced: ReducedFunction
    base: RelativeEquilibrium


def run_census(model: Model, base: RelativeEquilibrium, sub: SubtorusInclusion, eps: float,
               mode: str = "symplectic", resolution=None, continuation=None,
               tol: float = REFINE_TOL, model_spec: Optional[dict] = None, rng=None
               ) -> CensusRun:
    """Full pipeline from an unperturbed relative equilibrium ``base``."""
    wa = decompose(model, base.x, rng=rng)
    chart = build_chart(model, base, wa, sub, mode=mode)
    if resolution is None:
        resolution = default_resolution(chart.torus_dim)
    rf = sample_reduced(chart, eps, resolution, continuation)
    points = locate_critical_points(rf, chart, tol)
    return CensusRun(report(points, chart, eps, model_spec), chart, rf, base)


# ---------------------------------------------------------------------------
# brute-force oracle


def brute_force_res(chart: SliceChart, eps: float, n_seeds: int = 1000, seed: int = 0,
                    dedup_tol: float = 1e-6, tube: float = 2.0) -> list:
    """Relative equilibria of the subtorus near the orbit by multi-start search.

    Seeds are ``act(theta, m + radius * u)`` with theta uniform on T^n and u
    uniform in the unit ball.  Converged solutions farther than
    ``tube * radius`` from the unperturbed orbit are discarded; the rest are
    deduplicated modulo the subtorus action.
    """
    from .dynverify import orbit_distance

    model, sub = chart.model, chart.sub
    rng = np.random.default_rng(seed)
    full = SubtorusInclusion.full(model.n)
    m = chart.m
    mu_target = chart.alpha if sub.r else None
    reps = []
    for _ in range(n_seeds):
        theta = rng.uniform(0, TWO_PI, model.n)
        u = rng.standard_normal(model.dim)
        u *= rng.uniform() ** (1.0 / model.dim) / np.linalg.norm(u)
        y = m + chart.radius * u
        if not model.in_domain(y):
            continue
        try:
            x0 = model.act(theta, y)
            re = find_re(model, eps, sub, x0, chart.eta0 if sub.r else None, mu_target,
                         opts=ORACLE_OPTS)
        except (ConvergenceError, np.linalg.LinAlgError, ValueError):
            continue
        if re.residual > MAP_TOL:
            continue
        inv = (model.energy(eps, re.x), sub.restrict(re.mu))
        if any(abs(inv[0] - h) <= 1e-7 and np.allclose(inv[1], mm, atol=1e-7)
               and orbit_distance(model, re.x, x, sub) <= dedup_tol for h, mm, x in reps):
            continue
        if orbit_distance(model, re.x, m, full) > tube * chart.radius:
            continue
        reps.append((inv[0], inv[1], re.x))
    return [x for _, _, x in reps]
