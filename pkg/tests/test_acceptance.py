"""End-to-end acceptance checks on the bundled models (criteria 1 to 9)."""
import math
import time

import numpy as np
import pytest

from conftest import record
from symbreak.census import brute_force_res, run_census
from symbreak.dynverify import orbit_distance, verify_re
from symbreak.model import SubtorusInclusion
from symbreak.modelzoo import builtin, bundled_source, parse_model
from symbreak.numkernel import (SubspaceBasis, canonical_omega, fd_gradient, same_span,
                                symplectic_orthogonal, SymplecticStructure)
from symbreak.reduction import build_chart, sample_reduced
from symbreak.releq import RelativeEquilibrium, find_re
from symbreak.wittartin import (check_nondegenerate, decompose, nondegeneracy_space,
                                poisson_space)


def ang_dist(a, b):
    return abs((a - b + math.pi) % (2 * math.pi) - math.pi)


@pytest.fixture(scope="module")
def census_runs(setups, base_res):
    runs = {}
    for name, res in (("pendulum", 64), ("oscillator", 64), ("oscillator-break", 32)):
        s = setups[name]
        t0 = time.perf_counter()
        runs[name] = (run_census(s.model, base_res[name], s.sub, s.eps, resolution=res),
                      time.perf_counter() - t0)
    s = setups["oscillator"]
    runs["poisson"] = (run_census(s.model, base_res["oscillator"], s.sub, s.eps,
                                  mode="poisson", resolution=64), 0.0)
    return runs


def test_criterion_1_pendulum_ring():
    t0 = time.perf_counter()
    s = builtin("pendulum")
    worst_theta = worst_res = 0.0
    for j in range(8):
        phi = 2 * math.pi * j / 8
        re = find_re(s.model, 0.0, "full", [1.5, phi, 0.0, 0.0], [0.0], [0.0])
        worst_theta = max(worst_theta, abs(re.x[0] - math.pi / 2))
        worst_res = max(worst_res, re.residual)
    base = find_re(s.model, 0.0, "full", s.seed_x, s.seed_xi, s.mu_target)
    run = run_census(s.model, base, s.sub, 0.2)
    elapsed = time.perf_counter() - t0
    rep = run.report
    phis = [float(m.x[1]) for m in rep.mapped]
    near = sorted(min(ang_dist(p, 0.0), ang_dist(p, math.pi)) for p in phis)
    minima = [m.x[1] for p, m in zip(rep.points, rep.mapped) if p.morse_index == 0]
    ok = (worst_theta <= 1e-10 and worst_res <= 1e-10 and rep.count == 2
          and rep.all_nondegenerate and max(near) <= 1e-6 and len(minima) == 1
          and ang_dist(minima[0], math.pi) <= 1e-6 and rep.ls_satisfied
          and rep.morse_satisfied and rep.ls_bound == 2 and rep.morse_bound == 2
          and elapsed <= 5.0)
    record(1, ok, f"theta err {worst_theta:.1e}, residual {worst_res:.1e}, count {rep.count}, "
                  f"phi err {max(near):.1e}, min at pi: {len(minima) == 1}, {elapsed:.2f}s")
    assert ok


def test_criterion_2_oscillator_diagonal(census_runs):
    run, _ = census_runs["oscillator"]
    rep = run.report
    eps = 1e-3
    ks = [float(p.k[0]) for p in rep.points]
    near = max(min(ang_dist(k, 0.0), ang_dist(k, math.pi)) for k in ks) if ks else math.inf
    vals = {round(k / math.pi) % 2: p.value for k, p in zip(ks, rep.points)}
    gap = vals.get(0, math.nan) - vals.get(1, math.nan)
    sub = SubtorusInclusion(np.array([[1], [1]]))
    mom = max(abs(sub.restrict(m.mu)[0] - 1.0) for m in rep.mapped)
    vel = max(abs(m.xi[0] - 0.5) for m in rep.mapped)
    # the exact deviation of the velocity is eps = 1e-3 itself, so the bound is
    # inclusive up to rounding of the computed value
    ok = (rep.count == 2 and near <= 1e-3 and abs(gap - 2 * eps) <= 0.05 * 2 * eps
          and mom <= 1e-8 and vel <= 1e-3 * (1 + 1e-12))
    record(2, ok, f"count {rep.count}, k err {near:.1e}, hbar gap {gap:.6e} (2eps={2 * eps}), "
                  f"momentum err {mom:.1e}, velocity err {vel:.1e}")
    assert ok


def test_criterion_3_full_break(census_runs):
    rep = census_runs["oscillator-break"][0].report
    idx = sorted(p.morse_index for p in rep.points)
    ok = (rep.count == 4 and rep.all_nondegenerate and idx == [0, 1, 1, 2]
          and rep.euler_sum == 0 and rep.ls_bound == 3 and rep.morse_bound == 4
          and rep.ls_satisfied and rep.morse_satisfied)
    record(3, ok, f"count {rep.count}, indices {idx}, euler {rep.euler_sum}, "
                  f"bounds {rep.ls_bound}/{rep.morse_bound}")
    assert ok


def test_criterion_4_poisson_mode(census_runs, setups):
    rep = census_runs["poisson"][0].report
    eps = setups["oscillator"].eps
    fixed = max(m.diagnostics["fixed_velocity_residual"] for m in rep.mapped)
    mom = max(m.diagnostics["momentum_deviation"] for m in rep.mapped)
    ok = rep.count == 2 and fixed <= 1e-8 and mom <= 10 * eps and rep.mode == "poisson"
    record(4, ok, f"count {rep.count}, fixed-velocity residual {fixed:.1e}, "
                  f"momentum deviation {mom:.1e} (eps={eps})")
    assert ok


def test_criterion_5_complement_independence(setups, base_res):
    rng = np.random.default_rng(2024)
    mismatches = 0
    details = []
    for name, s in setups.items():
        re = base_res[name]
        for mode in ("symplectic", "poisson"):
            wa = decompose(s.model, re.x)
            space = nondegeneracy_space(wa, s.sub) if mode == "symplectic" else poisson_space(wa)
            ref = check_nondegenerate(s.model, 0.0, re.x, re.xi, space)
            for _ in range(10):
                wr = decompose(s.model, re.x, rng=rng)
                sp = (nondegeneracy_space(wr, s.sub) if mode == "symplectic"
                      else poisson_space(wr))
                rep = check_nondegenerate(s.model, 0.0, re.x, re.xi, sp)
                if rep.nondegenerate != ref.nondegenerate or rep.signature != ref.signature:
                    mismatches += 1
            details.append(f"{name}/{mode} {ref.signature}")
    ok = mismatches == 0
    record(5, ok, f"{mismatches} mismatches over 60 random splittings; " + ", ".join(details))
    assert ok


def test_criterion_6_unperturbed_fiber(setups, base_res):
    worst_v, worst_h = 0.0, 0.0
    for name, s in setups.items():
        modes = ("symplectic", "poisson") if s.sub.r else ("symplectic",)
        for mode in modes:
            chart = build_chart(s.model, base_res[name], decompose(s.model, base_res[name].x),
                                s.sub, mode=mode)
            res = 32 if chart.torus_dim == 2 else 64
            rf = sample_reduced(chart, 0.0, res)
            vals = rf.values()
            worst_h = max(worst_h, float(vals.max() - vals.min()))
            worst_v = max(worst_v, max(sol.v_norm for sol in rf.samples.flat))
    ok = worst_v <= 1e-10 and worst_h <= 1e-10
    record(6, ok, f"max |v| {worst_v:.1e}, hbar spread {worst_h:.1e}")
    assert ok


def test_criterion_7_oracle_equivalence(census_runs, setups):
    t0 = time.perf_counter()
    summary = []
    ok = True
    for name in ("pendulum", "oscillator", "oscillator-break"):
        run = census_runs[name][0]
        s = setups[name]
        oracle = brute_force_res(run.chart, s.eps, n_seeds=1000, seed=7)
        census = [m.x for m in run.report.mapped]
        matched_o = all(min(orbit_distance(s.model, x, c, s.sub) for c in census) <= 1e-6
                        for x in oracle)
        matched_c = all(min(orbit_distance(s.model, c, x, s.sub) for x in oracle) <= 1e-6
                        for c in census) if oracle else False
        ok &= matched_o and matched_c and len(oracle) == len(census)
        summary.append(f"{name} {len(oracle)}/{len(census)}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed <= 60.0
    record(7, ok, ", ".join(summary) + f", {elapsed:.1f}s")
    assert ok


def test_criterion_8_dynamical_validation(census_runs, setups):
    worst_orbit = worst_mom = 0.0
    all_pass = True
    for name in ("pendulum", "oscillator", "oscillator-break", "poisson"):
        run = census_runs[name][0]
        s = setups["oscillator" if name == "poisson" else name]
        for m in run.report.mapped:
            v = verify_re(s.model, s.eps, m, s.sub, horizon=50.0)
            all_pass &= v.passed
            worst_orbit = max(worst_orbit, v.orbit_drift)
            worst_mom = max(worst_mom, v.momentum_drift)
    rng = np.random.default_rng(99)
    s = setups["oscillator"]
    m = census_runs["oscillator"][0].report.mapped[0]
    bad = RelativeEquilibrium(m.x + 1e-2 * rng.standard_normal(4), m.xi, m.mu, 1.0, s.eps)
    control = verify_re(s.model, s.eps, bad, s.sub, horizon=50.0)
    ok = all_pass and worst_orbit <= 1e-6 and worst_mom <= 1e-8 and not control.passed
    record(8, ok, f"orbit drift {worst_orbit:.1e}, momentum drift {worst_mom:.1e}, "
                  f"negative control drift {control.orbit_drift:.1e} (rejected: "
                  f"{not control.passed})")
    assert ok


def test_criterion_9_numerical_hygiene():
    rng = np.random.default_rng(5)
    worst = 0.0
    for name in ("pendulum", "oscillator", "oscillator-break"):
        model = parse_model(bundled_source(name))
        ref = builtin(name).model
        for _ in range(100):
            x = ref.sample(rng)
            eps = rng.uniform(0, 0.3)
            g = model.grad(eps, x)
            f = fd_gradient(lambda y: model.energy(eps, y), x)
            worst = max(worst, float(np.linalg.norm(g - f) / max(1.0, np.linalg.norm(g))))
    sub_fail = 0
    for _ in range(100):
        n_dof = int(rng.integers(1, 4))
        dim = 2 * n_dof
        k = int(rng.integers(0, dim + 1))
        s = SubspaceBasis(rng.standard_normal((dim, k)))
        j = SymplecticStructure(dim)
        so = symplectic_orthogonal(s, j)
        if so.dim + s.dim != dim:
            sub_fail += 1
            continue
        back = symplectic_orthogonal(so, j)
        if not same_span(back.columns, s.columns):
            sub_fail += 1
    ok = worst <= 1e-6 and sub_fail == 0
    record(9, ok, f"worst dual/FD relative gap {worst:.1e}; {sub_fail} subspace failures of 100")
    assert ok
