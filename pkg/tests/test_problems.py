import math

import numpy as np
import pytest

from sparse_dflm.problems import (DEFAULT_SIZES, FAMILIES, VALLEY_C1, VALLEY_C2, Problem, ProblemError, Registry,
                                  broyden_tridiagonal, check_problem, extended_freudenstein_roth,
                                  forward_difference_jacobian, get_problem, tridimensional_valley,
                                  trigonometric_system)

SMALL = {"broyden": 10, "valley": 9, "freudenstein": 10, "trig": 10}


def test_broyden_examples():
    p = broyden_tridiagonal(4)
    np.testing.assert_array_equal(p(-np.ones(4)), [-2, -1, -1, -3])
    np.testing.assert_array_equal(p(np.zeros(4)), np.ones(4))
    x = np.array([0.3, -1.2, 2.0, 0.5])
    J = p.jacobian(x)
    np.testing.assert_array_equal(np.diag(J), 3 - 4 * x)
    np.testing.assert_array_equal(np.diag(J, -1), -1.0)
    np.testing.assert_array_equal(np.diag(J, 1), -2.0)
    assert (p.m, p.row_sparsity) == (4, 3)
    np.testing.assert_array_equal(p.initial_point, -np.ones(4))


def test_valley_examples():
    p = tridimensional_valley(3)
    np.testing.assert_allclose(p(np.zeros(3)), [-1, 0, 10], atol=1e-15)
    x = np.array([0.7, math.sin(0.7), -0.3])
    assert p(x)[1] == 0.0
    np.testing.assert_array_equal(tridimensional_valley(6).initial_point, [-4, 1, 2, -4, 1, 2])
    assert (VALLEY_C1, VALLEY_C2) == (1.003344481605351, -3.344481605351171e-3)
    with pytest.raises(ProblemError):
        tridimensional_valley(5)


def test_freudenstein_examples():
    p = extended_freudenstein_roth(2)
    np.testing.assert_array_equal(p([5.0, 4.0]), [0.0, 0.0])
    np.testing.assert_array_equal(p([0.0, 0.0]), [-13.0, -29.0])
    np.testing.assert_array_equal(extended_freudenstein_roth(4).initial_point, [90, 60, 90, 60])
    J = extended_freudenstein_roth(6).jacobian(np.arange(1.0, 7.0))
    for i in (0, 2, 4):
        assert set(np.flatnonzero(J[i])) <= {i, i + 1}
    with pytest.raises(ProblemError):
        extended_freudenstein_roth(7)


def test_trig_examples():
    p = trigonometric_system(10)
    np.testing.assert_allclose(p(np.zeros(10)), 0.0, atol=1e-15)
    np.testing.assert_allclose(p.initial_point, np.arange(1, 11) / 10)
    J = p.jacobian(np.linspace(-1, 1, 10))
    assert not np.any(J[:5, 5:]) and not np.any(J[5:, :5])
    assert p.row_sparsity == 5
    with pytest.raises(ProblemError):
        trigonometric_system(7)


def test_trig_formula_by_hand():
    x = np.random.default_rng(0).uniform(-2, 2, 10)
    F = trigonometric_system(10)(x)
    for i in range(10):
        lo = 5 * (i // 5)
        expect = 5 - (i // 5 + 1) * (1 - math.cos(x[i])) - math.sin(x[i]) - sum(math.cos(v) for v in x[lo:lo + 5])
        assert F[i] == pytest.approx(expect, abs=1e-14)


@pytest.mark.parametrize("family", sorted(FAMILIES))
def test_jacobian_matches_fd_at_random_points(family):
    prob = FAMILIES[family](SMALL[family])
    rng = np.random.default_rng(7)
    for _ in range(10):
        x = rng.uniform(-2, 2, prob.n)
        J = prob.jacobian(x)
        J_fd = forward_difference_jacobian(prob, x)
        assert np.max(np.abs(J - J_fd)) <= 1e-5 * max(1.0, np.max(np.abs(J)))
        assert np.max(np.count_nonzero(J, axis=1)) <= prob.row_sparsity


@pytest.mark.parametrize("family", sorted(FAMILIES))
def test_residuals_are_pure(family):
    prob = FAMILIES[family](SMALL[family])
    x = np.random.default_rng(1).uniform(-2, 2, prob.n)
    assert np.array_equal(prob(x), prob(x.copy()))
    check_problem(prob)


@pytest.mark.parametrize("family", sorted(FAMILIES))
def test_default_sizes_valid(family):
    prob = get_problem(family)
    assert prob.n == DEFAULT_SIZES[family]
    assert np.all(np.isfinite(prob(prob.initial_point)))


def test_registry_lookup_and_duplicates():
    reg = Registry()
    p = broyden_tridiagonal(100)
    reg.register(p)
    assert reg.get(p.name) is p
    with pytest.raises(ProblemError, match="duplicate"):
        reg.register(broyden_tridiagonal(100))
    with pytest.raises(KeyError):
        reg.get("nonexistent")
    assert "trigonometric_system" in reg


def test_registry_rejects_wrong_jacobian():
    wrong = Problem("wrong", 2, 2, lambda x: np.array([x[0] ** 2, x[1]]), np.array([1.0, 1.0]),
                    jacobian=lambda x: np.eye(2), row_sparsity=1)
    with pytest.raises(ProblemError, match="finite differences"):
        Registry().register(wrong)


def test_registry_rejects_understated_sparsity():
    dense = Problem("dense", 2, 2, lambda x: np.array([x.sum(), x[1]]), np.zeros(2),
                    jacobian=lambda x: np.array([[1.0, 1.0], [0.0, 1.0]]), row_sparsity=1)
    with pytest.raises(ProblemError, match="row_sparsity"):
        check_problem(dense)


def test_problems_pickle():
    import pickle

    p = pickle.loads(pickle.dumps(tridimensional_valley(9)))
    assert p(p.initial_point).shape == (9,)
