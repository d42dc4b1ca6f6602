import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from symbreak.numkernel import (DomainError, NewtonOptions, SingularJacobianError,
                                SubspaceBasis, SymplecticStructure, canonical_omega,
                                complement_in, fd_derivatives, fd_gradient, fd_hessian,
                                fd_jacobian, is_isotropic, kernel_basis, lagrangian_complement,
                                newton_solve, principal_angles, same_span,
                                symplectic_orthogonal)

E = np.eye(4)


def span(*idx):
    return SubspaceBasis(E[:, list(idx)])


def test_canonical_form_and_poisson_tensor():
    j = SymplecticStructure(4)
    assert np.array_equal(j.omega, canonical_omega(2))
    assert j.pair(E[:, 0], E[:, 2]) == 1.0
    assert np.allclose(j.poisson, j.omega)


def test_structure_rejects_bad_forms():
    with pytest.raises(ValueError):
        SymplecticStructure(3)
    with pytest.raises(ValueError):
        SymplecticStructure(2, np.eye(2))
    with pytest.raises(ValueError):
        SymplecticStructure(2, np.zeros((2, 2)))


def test_structure_is_immutable():
    j = SymplecticStructure(2)
    with pytest.raises(ValueError):
        j.omega[0, 1] = 5.0


def test_subspace_rank_check():
    with pytest.raises(ValueError):
        SubspaceBasis(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(ValueError):
        SubspaceBasis(np.eye(2), "nonsense")


@pytest.mark.parametrize("rows, expect", [
    (E[[3]], [0, 1, 2]),
    (E[[0, 1]], [2, 3]),
])
def test_kernel_examples(rows, expect):
    assert same_span(kernel_basis(rows).columns, E[:, expect])


def test_kernel_of_zero_map_is_everything():
    assert kernel_basis(np.zeros((1, 4))).dim == 4


def test_symplectic_orthogonal_examples():
    j = SymplecticStructure(4)
    assert same_span(symplectic_orthogonal(span(0), j).columns, E[:, [0, 1, 3]])
    assert symplectic_orthogonal(SubspaceBasis(np.eye(4)), j).dim == 0
    lag = span(0, 1)
    assert same_span(symplectic_orthogonal(lag, j).columns, lag.columns)


@pytest.mark.parametrize("t, u, w", [((0,), (0, 2), (2,)), ((1,), (1, 3), (3,)),
                                     ((2, 3), (0, 1, 2, 3), (0, 1))])
def test_lagrangian_complement_examples(t, u, w):
    j = SymplecticStructure(4)
    res = lagrangian_complement(span(*t), span(*u), j)
    assert same_span(res.columns, E[:, list(w)])
    assert is_isotropic(res.columns, j)


def test_lagrangian_complement_from_random_start(rng):
    j = SymplecticStructure(4)
    res = lagrangian_complement(span(2, 3), SubspaceBasis(np.eye(4)), j,
                                start=rng.standard_normal((4, 2)))
    assert is_isotropic(res.columns, j, 1e-10)
    assert np.linalg.matrix_rank(np.hstack([res.columns, E[:, [2, 3]]])) == 4


def test_lagrangian_complement_rejects_bad_input():
    j = SymplecticStructure(4)
    with pytest.raises(ValueError):
        lagrangian_complement(span(0), span(0, 1, 2), j)
    with pytest.raises(ValueError):
        lagrangian_complement(span(0), span(1, 3), j)
    with pytest.raises(ValueError):
        lagrangian_complement(span(0, 2), SubspaceBasis(np.eye(4)), j)


def test_principal_angles_small_angle_accuracy():
    a = np.array([[1.0], [0.0]])
    b = np.array([[1.0], [1e-12]])
    assert abs(principal_angles(a, b)[0] - 1e-12) < 1e-20
    assert abs(principal_angles(a, np.array([[0.0], [1.0]]))[0] - np.pi / 2) < 1e-14


@settings(max_examples=100, deadline=None)
@given(n_dof=st.integers(1, 3), data=st.data())
def test_double_orthogonal_and_dimension_law(n_dof, data):
    dim = 2 * n_dof
    k = data.draw(st.integers(0, dim))
    seed = data.draw(st.integers(0, 2**32 - 1))
    s = SubspaceBasis(np.random.default_rng(seed).standard_normal((dim, k)))
    j = SymplecticStructure(dim)
    so = symplectic_orthogonal(s, j)
    assert so.dim + s.dim == dim
    assert same_span(symplectic_orthogonal(so, j).columns, s.columns)


def test_complement_in():
    c = complement_in(E[:, [0]], E[:, [0, 1]])
    assert same_span(c, E[:, [1]])


def test_fd_examples():
    x = np.array([1.0, 1.0])
    g = fd_gradient(lambda y: 3.0, x)
    h = fd_hessian(lambda y: 3.0, x)
    assert np.all(g == 0) and np.all(h == 0)
    q = lambda y: 0.5 * (y[0] ** 2 + 2 * y[1] ** 2)
    assert np.allclose(fd_gradient(q, x), [1, 2], atol=1e-8)
    assert np.allclose(fd_hessian(q, x), np.diag([1, 2]), atol=1e-8)
    assert np.allclose(fd_jacobian(lambda y: np.array([y[0] * y[1], y[1]]), x),
                       [[1, 1], [0, 1]], atol=1e-8)
    assert np.allclose(fd_derivatives(q, x, 1), [1, 2], atol=1e-8)


def test_fd_rejects_nonfinite():
    with pytest.raises(DomainError), np.errstate(all="ignore"):
        fd_gradient(lambda y: np.log(y[0]), np.array([0.0]))


def test_pendulum_ring_potential_derivatives():
    kappa, l, d, m, g = 2 * np.sqrt(2), 1.0, 1.0, 1.0, 1.0

    def V(th):
        th = th[0]
        rho = np.sqrt(l * l + d * d - 2 * l * d * np.cos(th))
        return -m * g * l * np.cos(th) + kappa / rho

    th = np.array([np.pi / 2])
    rho = np.sqrt(2.0)
    assert abs(fd_gradient(V, th)[0]) < 1e-8
    expect = 3 * kappa * l**2 * d**2 * np.sin(th[0]) ** 2 / rho**5
    assert abs(fd_hessian(V, th)[0, 0] - expect) < 1e-6


def test_newton_linear_exact_in_one_step():
    a = np.diag([2.0, 3.0])
    f = lambda x: a @ x - np.array([2.0, 3.0])
    res = newton_solve(f, np.zeros(2), jac=lambda x: a)
    assert res.converged and res.iters == 1
    assert np.allclose(res.x, [1, 1])
    # a difference Jacobian costs at most one extra step
    assert newton_solve(f, np.zeros(2)).iters <= 2


def test_newton_scalar_root():
    res = newton_solve(lambda x: x**2 - 2, np.array([1.0]))
    assert abs(res.x[0] - np.sqrt(2)) < 1e-12


def test_newton_identity_converges_immediately():
    res = newton_solve(lambda x: x, np.zeros(1))
    assert res.converged and res.iters == 0 and res.residual_norm == 0.0


def test_newton_square_policy_detects_singularity():
    opts = NewtonOptions(rank_policy="square-solve")
    with pytest.raises(SingularJacobianError):
        newton_solve(lambda x: np.array([x[0] + x[1] - 1, x[0] + x[1] - 1]), np.zeros(2), opts)
    res = newton_solve(lambda x: np.array([x[0] + x[1] - 1, x[0] + x[1] - 1]), np.zeros(2))
    assert res.converged and np.allclose(res.x, [0.5, 0.5])


def test_newton_options_validation():
    with pytest.raises(ValueError):
        NewtonOptions(abs_tol=0)
    with pytest.raises(ValueError):
        NewtonOptions(rank_policy="magic")


def test_newton_step_cap():
    res = newton_solve(lambda x: x - 10.0, np.zeros(1), NewtonOptions(max_step=1.0))
    assert res.converged and res.iters >= 10
