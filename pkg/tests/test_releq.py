import numpy as np
import pytest

from symbreak.dynverify import orbit_distance
from symbreak.model import SubtorusInclusion
from symbreak.modelzoo import builtin
from symbreak.releq import (ConvergenceError, RelativeEquilibrium, find_re, recover_velocity,
                            velocity_in_subalgebra)

DIAG = SubtorusInclusion(np.array([[1], [1]]))


def test_oscillator_from_perturbed_seed():
    m = builtin("oscillator").model
    re = find_re(m, 0.0, "full", [1.05, 0.95, 0.01, -0.01], [0.5, 0.5], [0.5, 0.5])
    assert re.residual <= 1e-10
    assert np.allclose(re.xi, [0.5, 0.5], atol=1e-10)
    assert orbit_distance(m, re.x, [1, 1, 0, 0], SubtorusInclusion.full(2)) <= 1e-8


def test_pendulum_ring_keeps_seed_phase():
    m = builtin("pendulum").model
    re = find_re(m, 0.0, "full", [1.5, 0.3, 0.0, 0.0], [0.0], [0.0])
    assert abs(re.x[0] - np.pi / 2) <= 1e-10
    assert abs(re.x[1] - 0.3) <= 1e-12
    assert np.allclose(re.x[2:], 0, atol=1e-12) and abs(re.xi[0]) <= 1e-10


def test_exact_seed_returned_unchanged():
    m = builtin("oscillator").model
    re = find_re(m, 0.0, "full", [1, 1, 0, 0], [0.5, 0.5], [0.5, 0.5])
    assert re.iters == 0 and np.array_equal(re.x, [1, 1, 0, 0])


def test_subtorus_search():
    m = builtin("oscillator").model
    re = find_re(m, 1e-3, DIAG, [1.0, 1.0, 0.0, 0.0], [0.5], [1.0])
    assert re.residual <= 1e-10
    assert re.xi[0] == pytest.approx(0.501, abs=1e-9)


def test_recover_velocity_examples():
    m = builtin("oscillator").model
    eta, res = recover_velocity(m, 0.0, [1, 1, 0, 0], DIAG)
    assert eta[0] == pytest.approx(0.5) and res <= 1e-10
    pend = builtin("pendulum").model
    eta, res = recover_velocity(pend, 0.0, [np.pi / 2, 0, 0, 0], SubtorusInclusion.trivial(1))
    assert eta.size == 0 and res <= 1e-10
    _, res = recover_velocity(m, 0.0, [1.3, 0.4, 0.7, 0.0], DIAG)
    assert res > 1e-2


def test_velocity_in_subalgebra():
    eta, gap = velocity_in_subalgebra([0.5, 0.5], DIAG)
    assert eta[0] == pytest.approx(0.5) and gap < 1e-14
    _, gap = velocity_in_subalgebra([0.5, 0.3], DIAG)
    assert gap > 0.1


def test_failure_raises():
    m = builtin("pendulum").model
    with pytest.raises(ConvergenceError):
        find_re(m, 0.0, "full", [0.05, 0.0, 3.0, 0.0], [0.0], [0.0],
                opts=__import__("symbreak.numkernel", fromlist=["NewtonOptions"]).NewtonOptions(max_iters=2))


def test_round_trip_dict():
    re = RelativeEquilibrium(np.ones(4), np.array([0.5]), np.array([0.5, 0.5]), 1e-12, 0.1)
    back = RelativeEquilibrium.from_dict(re.to_dict())
    assert np.array_equal(back.x, re.x) and back.epsilon == 0.1
