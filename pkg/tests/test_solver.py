import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparse_dflm.config import AdaptiveP, FixedP, SolverConfig
from sparse_dflm.problems import Problem, broyden_tridiagonal
from sparse_dflm.records import HISTORY_COLUMNS, RunRecord, history_csv, read_records, write_records
from sparse_dflm.solver import (check_history, lm_step, predicted_reduction, ratio, solve, solve_fd_baseline,
                                update_p, update_sigma, update_theta)

CFG = SolverConfig()


def identity_problem(x0=(1.0, 1.0)):
    x0 = np.asarray(x0, dtype=float)
    return Problem("identity", x0.size, x0.size, lambda x: np.array(x, dtype=float), x0)


def test_lm_step_identity():
    d, lam = lm_step(np.eye(2), [1.0, 0.0], 1.0)
    assert lam == 1.0
    np.testing.assert_allclose(d, [-0.5, 0.0], atol=1e-15)


def test_lm_step_singular_model():
    d, lam = lm_step(np.diag([2.0, 0.0]), [1.0, 1.0], 0.5)
    assert lam == 1.0
    np.testing.assert_allclose(d, [-0.4, 0.0], atol=1e-15)


def test_lm_step_rejects_stationary_point():
    with pytest.raises(ValueError, match="stationary"):
        lm_step(np.array([[1.0, 0.0], [0.0, 0.0]]), [0.0, 3.0], 1.0)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), theta=st.floats(1e-8, 1e2))
def test_lm_step_residual_and_bound(seed, theta):
    rng = np.random.default_rng(seed)
    J = rng.normal(size=(6, 4))
    F = rng.normal(size=6)
    d, lam = lm_step(J, F, theta)
    g = J.T @ F
    r = (J.T @ J + lam * np.eye(4)) @ d + g
    assert np.linalg.norm(r) <= 1e-10 * np.linalg.norm(g) * max(1.0, np.linalg.norm(J.T @ J) / lam)
    assert np.linalg.norm(d) <= 1.0 / theta * (1 + 1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), theta=st.floats(1e-3, 10.0))
def test_lm_step_solves_trust_region(seed, theta):
    """No point on the sphere of radius ||d|| does better than d by more than 1e-6."""
    rng = np.random.default_rng(seed)
    J = rng.normal(size=(5, 3))
    F = rng.normal(size=5)
    d, _ = lm_step(J, F, theta)
    r = np.linalg.norm(d)
    u = rng.normal(size=(20000, 3))
    u *= r / np.linalg.norm(u, axis=1, keepdims=True)
    best = np.min(np.linalg.norm(F + u @ J.T, axis=1))
    assert np.linalg.norm(F + J @ d) <= best + 1e-6


def test_predicted_reduction_matches_definition():
    rng = np.random.default_rng(0)
    J, F, d = rng.normal(size=(4, 3)), rng.normal(size=4), rng.normal(size=3)
    assert predicted_reduction(F, J, d) == pytest.approx(F @ F - np.sum((F + J @ d) ** 2))


def test_ratio_examples():
    J = np.array([[2.0, 0.0], [0.0, 1.0]])
    F = np.array([1.0, -1.0])
    d, _ = lm_step(J, F, 0.1)
    assert ratio(F, F + J @ d, J, d) == pytest.approx(1.0)
    assert ratio(F, -F, J, d) == 0.0
    assert ratio(F, F, J, np.zeros(2)) == -math.inf


def test_update_theta_table():
    assert update_theta(1e-8, 0.0, 1.0, CFG) == 4e-8
    assert update_theta(1.0, 0.5, 1.0, CFG) == 1.0
    # ||J^T F|| = 1 is below eta1/theta = 1e4 here, so theta grows
    assert update_theta(1e-8, 0.5, 1.0, CFG) == 4e-8
    assert update_theta(1e-8, 0.5, 1e12, CFG) == 1e-8
    assert update_theta(1.0, 0.5, 1e-5, CFG) == 4.0
    assert update_theta(1.0, 0.5, 2e3, CFG) == 0.25
    assert update_theta(1.0, -math.inf, 5.0, CFG) == 4.0


@given(theta=st.floats(1e-8, 1e8), rho=st.floats(-10, 10), g=st.floats(0, 1e12))
def test_update_theta_never_below_floor(theta, rho, g):
    assert update_theta(theta, rho, g, CFG) >= CFG.theta_min


def test_update_sigma_clamp_and_theory():
    assert update_sigma(1e-3, CFG) == 1e-7
    assert update_sigma(5e-8, CFG) == 5e-8
    assert update_sigma(0.0, CFG) == 1e-9
    assert update_sigma(1e-3, CFG.replace(sigma_theory=True)) == 1e-3


def test_update_p_adaptive():
    cfg = SolverConfig(p_policy=AdaptiveP())
    assert update_p(34, True, cfg, 100) == 44
    assert update_p(44, True, cfg, 100) == 50
    assert update_p(25, False, cfg, 100) == 25
    assert update_p(34, True, SolverConfig(p_policy=FixedP(34)), 100) == 34


def test_config_defaults_and_validation():
    s = SolverConfig(p_policy=AdaptiveP()).schedule(100)
    assert (s.p_init, s.p_min, s.p_max, s.p_diff) == (34, 25, 50, 10)
    assert SolverConfig().schedule(100).p_init == 34
    assert SolverConfig().budget(100) == 101_000
    with pytest.raises(ValueError, match="gamma1"):
        SolverConfig(gamma1=1.5)
    with pytest.raises(ValueError, match="theta0"):
        SolverConfig(theta0=1e-9)
    with pytest.raises(ValueError, match="denoising"):
        SolverConfig(mode="denoising")


def test_config_round_trip():
    cfg = SolverConfig(p_policy=AdaptiveP(p_diff=3), distribution="gaussian", seed=9, max_fevals=77)
    assert SolverConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError, match="unknown"):
        SolverConfig.from_dict({"nope": 1})


@pytest.mark.parametrize("seed", range(5))
def test_solve_identity_converges(seed):
    cfg = SolverConfig(p_policy=FixedP(2), seed=seed, distribution="gaussian")
    rec = solve(identity_problem(), cfg)
    assert np.linalg.norm(rec.x_final) <= 1e-5
    assert rec.fevals <= 200
    assert not check_history(rec, cfg)


def test_rank_one_bernoulli_model_can_look_stationary():
    # Two +-1/sqrt(2) rows are parallel half the time; the l1 model of the
    # identity map is then [[1, 0], [-1, 0]] and J^T F vanishes at (1, 1).
    rec = solve(identity_problem(), SolverConfig(p_policy=FixedP(2), seed=0))
    assert rec.stop_reason == "stationary"
    assert rec.fevals == 3


def test_solve_zero_residual_stops_immediately():
    prob = Problem("zero", 3, 3, lambda x: np.zeros(3), np.ones(3))
    rec = solve(prob, SolverConfig(p_policy=FixedP(2)))
    assert rec.stop_reason == "stationary"
    assert rec.fevals <= 1 + 2
    assert rec.history == []


def test_solve_broyden_small_invariants():
    cfg = SolverConfig(p_policy=FixedP(10), seed=3)
    rec = solve(broyden_tridiagonal(30), cfg)
    assert rec.stop_reason in ("stationary", "small_step", "small_decrease")
    assert rec.final_f <= 1e-10
    assert check_history(rec, cfg) == []
    xs = [h.accepted for h in rec.history]
    assert any(xs)


def test_adaptive_p_varies():
    cfg = SolverConfig(p_policy=AdaptiveP(), seed=2)
    rec = solve(broyden_tridiagonal(30), cfg)
    ps = {h.p for h in rec.history}
    assert len(ps) > 1
    assert all(8 <= p <= 15 for p in ps)


def test_solve_is_deterministic():
    cfg = SolverConfig(p_policy=FixedP(8), seed=4)
    a = solve(broyden_tridiagonal(20), cfg)
    b = solve(broyden_tridiagonal(20), cfg)
    assert history_csv(a.history) == history_csv(b.history)


def test_budget_stop():
    cfg = SolverConfig(p_policy=FixedP(5), max_fevals=20, seed=0)
    rec = solve(broyden_tridiagonal(30), cfg)
    assert rec.stop_reason == "max_fevals"
    assert rec.fevals <= 20 + 5 + 1


def test_non_finite_residual_is_error_record():
    bad = Problem("nan", 2, 2, lambda x: np.array([np.nan, 0.0]) if x[0] > 0.5 else x, np.array([0.0, 1.0]))
    rec = solve(bad, SolverConfig(p_policy=FixedP(2), sigma0=1.0))
    assert rec.stop_reason == "error"
    assert "non-finite" in rec.error


def test_fd_baseline_costs_n_per_iteration():
    cfg = SolverConfig(seed=0, max_fevals=400)
    rec = solve_fd_baseline(broyden_tridiagonal(100), cfg)
    steps = np.diff([h.fevals for h in rec.history])
    assert np.all(steps == 101)
    assert not check_history(rec, cfg)
    dflm = solve(broyden_tridiagonal(100), cfg.replace(p_policy=FixedP(50)))
    assert np.all(np.diff([h.fevals for h in dflm.history]) <= 51)
    assert set(RunRecord.__dataclass_fields__) == set(vars(dflm))


def test_fd_baseline_affine_jacobian():
    from sparse_dflm.problems import forward_difference_jacobian

    M = np.array([[2.0, -1.0, 0.0], [0.5, 3.0, 1.0]])
    J = forward_difference_jacobian(lambda x: M @ x + 1.0, np.array([0.2, -0.4, 1.0]))
    assert np.max(np.abs(J - M)) <= 1e-6 * np.linalg.norm(M)


def test_history_csv_columns():
    rec = solve(identity_problem(), SolverConfig(p_policy=FixedP(2), distribution="gaussian"))
    header, first = history_csv(rec.history).splitlines()[:2]
    assert header.split(",") == HISTORY_COLUMNS
    assert len(first.split(",")) == len(HISTORY_COLUMNS)


def test_record_round_trip(tmp_path):
    rec = solve(identity_problem(), SolverConfig(p_policy=FixedP(2), distribution="gaussian"))
    write_records(tmp_path / "r.jsonl", [rec])
    back = read_records(tmp_path / "r.jsonl")[0]
    assert back.trace == rec.trace
    assert history_csv(back.history) == history_csv(rec.history)


def test_check_history_detects_tampering():
    cfg = SolverConfig(p_policy=FixedP(10), seed=3)
    rec = solve(broyden_tridiagonal(30), cfg)
    rec.history[0].accepted = not rec.history[0].accepted
    rec.history[1].theta_next = rec.history[1].theta * 3
    bad = check_history(rec, cfg)
    assert any("acceptance" in b for b in bad)
    assert any("theta update" in b for b in bad)
