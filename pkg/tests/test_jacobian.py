import numpy as np
import pytest

from sparse_dflm.jacobian import (ModelInfeasible, NonFiniteResidual, assemble_jacobian, build_interpolation_set,
                                  theoretical_xi)
from sparse_dflm.problems import broyden_tridiagonal
from sparse_dflm.recovery import Status
from sparse_dflm.sensing import Distribution, SensingMatrix, generate
from sparse_dflm.validate import DECAY_SEED


def matrix(entries, dist=Distribution.GAUSSIAN):
    entries = np.atleast_2d(np.asarray(entries, dtype=float))
    return SensingMatrix(entries, dist, None)


class Counter:
    def __init__(self, fun):
        self.fun, self.calls = fun, 0

    def __call__(self, x):
        self.calls += 1
        return self.fun(x)


def test_identity_map_single_point():
    x = np.array([0.5, -2.0, 3.0])
    iset = build_interpolation_set(lambda v: v.copy(), x, x, 1.0, matrix([[1, 0, 0]]))
    np.testing.assert_array_equal(iset.F_shifted[0], x + [1, 0, 0])
    assert iset.fevals_used == 1


def test_broyden_shifts_stay_close():
    prob = broyden_tridiagonal(4)
    x = -np.ones(4)
    F = prob(x)
    iset = build_interpolation_set(prob.residual, x, F, 1e-7, generate(3, 4, "bernoulli", seed=0))
    assert np.all(np.isfinite(iset.F_shifted))
    assert np.max(np.abs(iset.F_shifted - F)) <= 1e-5


def test_non_finite_residual_reports_index():
    def F(x):
        return np.array([np.inf if x[1] > 0.5 else 1.0, 0.0])

    A = matrix([[0.0, 0.0], [0.0, 1.0]])
    with pytest.raises(NonFiniteResidual, match="point 1") as info:
        build_interpolation_set(F, np.zeros(2), np.array([1.0, 0.0]), 1.0, A)
    assert info.value.point_index == 1


def test_sigma_must_be_positive():
    with pytest.raises(ValueError):
        build_interpolation_set(lambda x: x, np.zeros(2), np.zeros(2), 0.0, matrix(np.eye(2)))


def test_exactly_p_evaluations():
    prob = broyden_tridiagonal(12)
    fun = Counter(prob.residual)
    x = prob.initial_point
    build_interpolation_set(fun, x, prob(x), 1e-7, generate(5, 12, "bernoulli", seed=1))
    assert fun.calls == 5


def test_constant_map_gives_zero_model():
    c = np.array([1.0, -2.0, 3.0])
    iset = build_interpolation_set(lambda x: c, np.zeros(5), c, 1e-3, generate(3, 5, "gaussian", seed=2))
    model = assemble_jacobian(iset)
    np.testing.assert_array_equal(model.J, 0.0)
    assert model.shape == (3, 5)


def test_linear_map_square_identity_recovers_matrix():
    M = np.array([[2.0, 0, 0, 1], [0, -1, 0, 0], [0, 0, 3, 0], [1, 0, 0, -4]])
    c = np.array([1.0, 1, 1, 1])
    fun = lambda x: M @ x + c
    x = np.array([0.3, -0.1, 0.2, 0.7])
    model = assemble_jacobian(build_interpolation_set(fun, x, fun(x), 0.5, matrix(np.eye(4))))
    np.testing.assert_allclose(model.J, M, atol=1e-9)
    assert all(s is Status.OPTIMAL for s in model.row_status)


def test_linear_map_model_independent_of_sigma():
    rng = np.random.default_rng(3)
    n = 20
    M = np.zeros((n, n))
    for i in range(n):
        M[i, rng.choice(n, 2, replace=False)] = rng.normal(size=2)
    fun = lambda x: M @ x
    # At x = 0 the differences carry no cancellation error, so only the
    # sigma scaling is exercised; elsewhere rounding is ~eps*|F|/sigma.
    x = np.zeros(n)
    A = generate(10, n, "bernoulli", seed=4)
    Js = [assemble_jacobian(build_interpolation_set(fun, x, fun(x), s, A)).J for s in (1e-9, 1e-7, 1e-1)]
    for J in Js[1:]:
        np.testing.assert_allclose(J, Js[0], atol=1e-8)


def test_broyden_model_error_decays_with_sigma():
    prob = broyden_tridiagonal(30)
    x = prob.initial_point
    J = prob.jacobian(x)
    A = generate(12, 30, "bernoulli", seed=(DECAY_SEED, 0))
    errs = [np.linalg.norm(assemble_jacobian(build_interpolation_set(prob.residual, x, prob(x), s, A)).J - J)
            for s in (1e-3, 1e-5, 1e-7)]
    assert errs[0] >= errs[1] >= errs[2]
    assert errs[2] <= 1e-4


def test_denoising_mode_rows_feasible():
    prob = broyden_tridiagonal(10)
    x = prob.initial_point
    A = generate(8, 10, "gaussian", seed=6)
    iset = build_interpolation_set(prob.residual, x, prob(x), 1e-4, A)
    xi = 1e-3
    model = assemble_jacobian(iset, xi)
    res = np.linalg.norm(A.entries @ model.J.T - iset.scaled_differences(), axis=0)
    assert np.all(res <= xi * (1 + 1e-8))
    assert model.xi_k == xi


def test_infeasible_row_aborts():
    A = matrix([[1.0, 1.0], [1.0, 1.0]])
    fun = lambda x: np.array([x.sum()])
    iset = build_interpolation_set(fun, np.zeros(2), fun(np.zeros(2)), 1.0, A)
    iset.F_shifted[1, 0] += 3.0
    with pytest.raises(ModelInfeasible):
        assemble_jacobian(iset)


def test_theoretical_xi_bernoulli():
    A = generate(4, 16, "bernoulli", seed=0)
    # kappa_bv = sqrt(n/p) = 2, so xi = sqrt(4) * L * 4 * sigma / 2
    assert theoretical_xi(4, 1e-7, 3.0, A) == pytest.approx(2 * 3.0 * 4 * 1e-7 / 2)
