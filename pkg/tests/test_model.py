import numpy as np
import pytest

from symbreak.model import (Model, SubtorusInclusion, poisson_bracket, restricted_momentum,
                            validate)
from symbreak.modelzoo import OscillatorParams, PendulumParams, builtin, make_oscillator
from symbreak.numkernel import DomainError


@pytest.fixture(scope="module")
def osc():
    return builtin("oscillator").model


@pytest.fixture(scope="module")
def pend():
    return builtin("pendulum").model


def test_oscillator_value_at_base(osc):
    x = np.array([1.0, 1.0, 0.0, 0.0])
    assert osc.energy(0.0, x) == pytest.approx(0.25)
    assert osc.energy(0.3, x) - osc.energy(0.0, x) == pytest.approx(0.3)


def test_pendulum_unperturbed_value_independent_of_phi(pend):
    vals = [pend.energy(0.0, [np.pi / 2, phi, 0, 0]) for phi in np.linspace(0, 6, 7)]
    assert np.ptp(vals) < 1e-14


def test_actions(osc, pend):
    assert np.allclose(osc.act([np.pi, 0], [1, 1, 0, 0]), [-1, 1, 0, 0], atol=1e-15)
    x = np.array([1.0, 1.0, 0.2, 0.1])
    assert np.array_equal(osc.act([0, 0], x), x)
    assert np.allclose(pend.act([0.5], [1.0, 0.2, 0.3, 0.4]), [1.0, 0.7, 0.3, 0.4])


def test_momenta(osc, pend, rng):
    x = np.array([1.0, 1.0, 0.0, 0.0])
    assert np.allclose(osc.momentum_value(x), [0.5, 0.5])
    assert restricted_momentum(osc, SubtorusInclusion(np.array([[1], [1]])), x)[0] == 1.0
    assert pend.momentum_value([1.0, 0.2, 0.3, 0.4])[0] == 0.4
    for _ in range(20):
        y, th = osc.sample(rng), rng.uniform(0, 6, 2)
        assert np.allclose(osc.momentum_value(osc.act(th, y)), osc.momentum_value(y))


def test_generators(osc, pend):
    assert np.allclose(osc.generator([0, 0], [1, 0, 0, 0]), 0)
    assert np.allclose(osc.generator([1, 0], [1, 0, 0, 0]), [0, 0, -1, 0])
    assert np.allclose(pend.generator([1.0], [1.2, 0.3, 0.1, 0.2]), [0, 1, 0, 0])


def test_brackets(osc, rng):
    j1 = lambda y: osc.momentum_value(y)[0]
    j2 = lambda y: osc.momentum_value(y)[1]
    for _ in range(10):
        x = osc.sample(rng)
        assert abs(poisson_bracket(osc, j1, j2, x)) < 1e-8
        assert abs(poisson_bracket(osc, lambda y: osc.energy(0.0, y), j1, x)) < 1e-8
    # {q1 q2 + p1 p2, I1} = q2 p1 - q1 p2 vanishes at (1,1,0,0) but not off it
    h = lambda y: osc.energy(0.1, y)
    assert abs(poisson_bracket(osc, h, j1, np.array([1.0, 1.0, 0.0, 0.0]))) < 1e-8
    assert abs(poisson_bracket(osc, h, j1, np.array([1.0, 1.0, 0.5, 0.0]))) == pytest.approx(
        0.05, rel=1e-6)


def test_canonical_bracket():
    m = make_oscillator()
    q1 = lambda y: y[0]
    p1 = lambda y: y[2]
    assert poisson_bracket(m, q1, p1, np.array([0.3, 0.2, 0.1, 0.5])) == pytest.approx(1.0)


def test_validate_oscillator_diagonal(osc):
    rep = validate(osc, SubtorusInclusion(np.array([[1], [1]])), sample_count=128)
    assert rep.ok
    assert rep["full invariance at eps!=0"].expected_failure


def test_validate_pendulum_broken_as_intended(pend):
    rep = validate(pend, eps=0.2)
    assert rep.ok
    assert rep["full invariance at eps=0"].passed
    chk = rep["full invariance at eps!=0"]
    assert not chk.passed and chk.expected_failure


def test_validate_detects_noncommuting_momenta(osc):
    def J(x):
        return np.array([0.5 * (x[0] ** 2 + x[2] ** 2), x[0]])

    def dJ(x):
        return np.array([[x[0], 0, x[2], 0], [1.0, 0, 0, 0]])

    bad = Model(name="bad", chart=osc.chart, n=2, hamiltonian=osc.hamiltonian, momentum=J,
                action=osc.action, hamiltonian_grad=osc.hamiltonian_grad,
                momentum_jacobian=dJ, action_jacobian=osc.action_jacobian, domain=osc.domain,
                sampler=osc.sampler)
    rep = validate(bad, sample_count=32)
    chk = rep["commuting momenta"]
    assert not chk.passed and chk.worst > 0.1


def test_domain_errors(pend):
    with pytest.raises(DomainError):
        pend.energy(0.0, [0.0, 0.0, 0.0, 0.0])
    assert not pend.in_domain([4.0, 0, 0, 0])


def test_periodic_difference(pend):
    d = pend.difference([1.0, 2 * np.pi - 0.1, 0, 0], [1.0, 0.1, 0, 0])
    assert np.allclose(d, [0, -0.2, 0, 0])


def test_subtorus_inclusion():
    s = SubtorusInclusion.parse("1,1", 2)
    assert s.r == 1 and np.array_equal(s.matrix, [[1], [1]])
    assert SubtorusInclusion.parse("1,0;0,1", 2).r == 2
    assert SubtorusInclusion.trivial(3).r == 0
    assert np.allclose(s.embed([0.5]), [0.5, 0.5])
    assert np.allclose(s.restrict([0.5, 0.25]), [0.75])
    with pytest.raises(ValueError):
        SubtorusInclusion(np.array([[2], [4]]))
    with pytest.raises(ValueError):
        SubtorusInclusion(np.array([[1, 2], [1, 2]]))
    with pytest.raises(ValueError):
        SubtorusInclusion(np.array([[0.5], [1.0]]))


def test_parameter_checks():
    with pytest.raises(ValueError):
        PendulumParams(kappa=-1.0)
    with pytest.raises(ValueError):
        PendulumParams(kappa=100.0)
    with pytest.raises(ValueError):
        OscillatorParams(coupling="weird")
    p = PendulumParams()
    assert p.ring_theta() == pytest.approx(np.pi / 2)
    assert p.ring_radius() == pytest.approx(np.sqrt(2))
