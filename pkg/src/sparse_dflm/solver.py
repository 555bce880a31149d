"""Derivative-free Levenberg-Marquardt iteration with sparse Jacobian models.

Each iteration draws a fresh sensing matrix, builds the model ``J_m`` from
``p`` residual evaluations, and takes the LM step

    (J_m^T J_m + lambda I) d = -J_m^T F,    lambda = theta * ||J_m^T F||.

The step is accepted when ``rho = Ared / Pred > eta0`` and ``theta`` is
updated from ``rho`` and ``||J_m^T F||``.  ``solve_fd_baseline`` runs the
same loop with a forward-difference Jacobian instead of the l1 model.
"""

from __future__ import annotations

import logging
import math
import time

import numpy as np
import scipy.linalg

from .config import SolverConfig
from .jacobian import (JacobianModel, ModelInfeasible, NonFiniteResidual, assemble_jacobian,
                       build_interpolation_set, theoretical_xi)
from .problems import Problem, forward_difference_jacobian
from .records import IterationRecord, RunRecord
from .sensing import generate

log = logging.getLogger(__name__)

DFLM = "dflm"
FD_LM = "fd-lm"


class _CountingResidual:
    """Wraps the residual map; every call costs exactly one evaluation."""

    def __init__(self, fun):
        self.fun = fun
        self.count = 0

    def __call__(self, x):
        self.count += 1
        F = np.asarray(self.fun(x), dtype=float)
        return F


def lm_step(J_m, F_k, theta_k: float) -> tuple[np.ndarray, float]:
    """Solve the regularised normal equations; returns ``(d, lambda)``.

    ``||d|| <= ||J^T F|| / lambda = 1 / theta`` holds by construction.
    """
    J = J_m.J if isinstance(J_m, JacobianModel) else np.asarray(J_m, dtype=float)
    F = np.asarray(F_k, dtype=float)
    g = J.T @ F
    gnorm = np.linalg.norm(g)
    if gnorm == 0:
        raise ValueError("lm_step called at a model-stationary point (J^T F = 0)")
    lam = theta_k * gnorm
    JtJ = J.T @ J
    for attempt in range(2):
        H = JtJ.copy()
        H[np.diag_indices_from(H)] += lam
        try:
            factor = scipy.linalg.cho_factor(H, check_finite=False)
        except np.linalg.LinAlgError:
            if attempt:
                raise
            log.warning("LM system not positive definite at lambda=%.3e; retrying with 10x", lam)
            lam *= 10.0
            continue
        d = scipy.linalg.cho_solve(factor, -g, check_finite=False)
        for _ in range(2):
            r = -g - H @ d
            if np.linalg.norm(r) <= 1e-10 * gnorm:
                break
            d = d + scipy.linalg.cho_solve(factor, r, check_finite=False)
        return d, lam
    raise AssertionError("unreachable")


def predicted_reduction(F_k, J, d) -> float:
    """``||F||^2 - ||F + J d||^2`` in cancellation-free form."""
    Jd = J @ d
    return float(-2.0 * (F_k @ Jd) - Jd @ Jd)


def ratio(F_k, F_trial, J_m, d_k) -> float:
    """Actual over predicted reduction; ``-inf`` when the prediction is not positive."""
    J = J_m.J if isinstance(J_m, JacobianModel) else np.asarray(J_m, dtype=float)
    F_k = np.asarray(F_k, dtype=float)
    F_trial = np.asarray(F_trial, dtype=float)
    pred = predicted_reduction(F_k, J, d_k)
    if not pred > 0:
        return -math.inf
    return float((F_k @ F_k - F_trial @ F_trial) / pred)


def update_theta(theta_k: float, rho_k: float, grad_model_norm: float, cfg: SolverConfig) -> float:
    if rho_k < cfg.eta0:
        return cfg.gamma2 * theta_k
    if grad_model_norm < cfg.eta1 / theta_k:
        return cfg.gamma2 * theta_k
    if grad_model_norm <= cfg.eta2 / theta_k:
        return theta_k
    return max(cfg.gamma1 * theta_k, cfg.theta_min)


def update_sigma(d_prev_norm: float, cfg: SolverConfig) -> float:
    if cfg.sigma_theory:
        return float(d_prev_norm) if d_prev_norm > 0 else cfg.sigma_bounds[0]
    lo, hi = cfg.sigma_bounds
    return max(lo, min(hi, float(d_prev_norm)))


def update_p(p: int, accepted: bool, cfg: SolverConfig, n: int) -> int:
    sched = cfg.schedule(n)
    if not sched.adaptive:
        return p
    p = p + sched.p_diff if accepted else p - sched.p_diff
    return max(sched.p_min, min(sched.p_max, p))


def solve(problem: Problem, cfg: SolverConfig | None = None, solver_id: str = DFLM) -> RunRecord:
    """Run the derivative-free LM method with l1-recovered Jacobian models."""
    cfg = cfg or SolverConfig()
    n = problem.n
    seed = int(cfg.seed)

    def model(fun, x, F, sigma, k, p):
        A = generate(p, n, cfg.distribution, seed=(seed, k))
        iset = build_interpolation_set(fun, x, F, sigma, A)
        xi = 0.0
        if cfg.mode == "denoising":
            xi = cfg.xi if cfg.xi is not None else theoretical_xi(p, sigma, cfg.lipschitz_estimate, A)
        return assemble_jacobian(iset, xi, cfg.recovery).J, p

    return _run(problem, cfg, model, solver_id)


def solve_fd_baseline(problem: Problem, cfg: SolverConfig | None = None, solver_id: str = FD_LM) -> RunRecord:
    """Same outer loop, Jacobian by forward differences (n evaluations per iteration)."""
    cfg = cfg or SolverConfig()

    def model(fun, x, F, sigma, k, p):
        return forward_difference_jacobian(fun, x, F, cfg.fd_step), problem.n

    return _run(problem, cfg, model, solver_id)


def _run(problem: Problem, cfg: SolverConfig, build_model, solver_id: str) -> RunRecord:
    t0 = time.perf_counter()
    n = problem.n
    budget = cfg.budget(n)
    sched = cfg.schedule(n)
    fun = _CountingResidual(problem.residual)

    x = np.array(problem.initial_point, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("initial point must be finite")
    F = fun(x)
    if not np.all(np.isfinite(F)):
        raise NonFiniteResidual("non-finite residual at the initial point", x=x)
    f = 0.5 * float(F @ F)
    f0 = f
    theta = cfg.theta0
    sigma = cfg.sigma0
    p = sched.p_init
    history: list[IterationRecord] = []
    trace = [(fun.count, f)]
    stop = None
    error = None
    k = 0

    try:
        while stop is None:
            if fun.count >= budget:
                stop = "max_fevals"
                break
            J, p_used = build_model(fun, x, F, sigma, k, p)
            g = J.T @ F
            gnorm = float(np.linalg.norm(g))
            if gnorm <= cfg.epsilon0:
                stop = "stationary"
                break
            d, lam = lm_step(J, F, theta)
            dnorm = float(np.linalg.norm(d))
            F_trial = fun(x + d)
            if not np.all(np.isfinite(F_trial)):
                raise NonFiniteResidual(f"non-finite residual at trial point (iteration {k})", x=x + d)
            pred = predicted_reduction(F, J, d)
            rho = ratio(F, F_trial, J, d)
            FF = float(F @ F)
            FtFt = float(F_trial @ F_trial)
            accepted = rho > cfg.eta0
            theta_next = update_theta(theta, rho, gnorm, cfg)
            history.append(IterationRecord(
                k=k, fevals=fun.count, f=f, grad_model_norm=gnorm, theta=theta, lam=lam, rho=rho,
                step_norm=dnorm, accepted=bool(accepted), p=p_used, pred=pred, f_trial=0.5 * FtFt,
                model_hessian_norm=float(np.linalg.norm(J, 2) ** 2), theta_next=theta_next))
            if accepted:
                x = x + d
                F = F_trial
                f = 0.5 * FtFt
            trace.append((fun.count, f))

            if dnorm <= cfg.step_tol:
                stop = "small_step"
            elif abs(FF - FtFt) / (FF + 1e-8) <= cfg.rel_decrease_tol:
                stop = "small_decrease"
            theta = theta_next
            sigma = update_sigma(dnorm, cfg)
            p = update_p(p, accepted, cfg, n)
            k += 1
    except (NonFiniteResidual, ModelInfeasible, np.linalg.LinAlgError) as exc:
        stop = "error"
        error = f"{type(exc).__name__}: {exc}"
        log.warning("%s on %s stopped with error: %s", solver_id, problem.name, error)

    return RunRecord(
        solver_id=solver_id, problem_id=problem.name, seed=int(cfg.seed), trace=trace,
        final_f=f, stop_reason=stop, wall_time=time.perf_counter() - t0, fevals=fun.count,
        budget=budget, n=n, f0=f0, history=history, x_final=x.tolist(), config=cfg.to_dict(),
        error=error)


def check_history(record: RunRecord, cfg: SolverConfig) -> list[str]:
    """Return a description of every violated per-iteration invariant."""
    bad = []
    hist = record.history
    for it in hist:
        tag = f"k={it.k}"
        if it.accepted != (it.rho > cfg.eta0):
            bad.append(f"{tag}: acceptance flag disagrees with rho={it.rho}")
        if it.theta < cfg.theta_min:
            bad.append(f"{tag}: theta={it.theta} below theta_min")
        expected = update_theta(it.theta, it.rho, it.grad_model_norm, cfg)
        if it.theta_next != expected:
            bad.append(f"{tag}: theta update {it.theta_next} != {expected}")
        if not it.accepted and it.rho < cfg.eta0 and it.theta_next != cfg.gamma2 * it.theta:
            bad.append(f"{tag}: rejected step did not multiply theta by gamma2")
        if it.step_norm > 1.0 / it.theta + 1e-12:
            bad.append(f"{tag}: step norm {it.step_norm} exceeds 1/theta")
        gn = it.grad_model_norm
        cauchy = gn * min(it.step_norm, gn / it.model_hessian_norm) if it.model_hessian_norm > 0 else gn * it.step_norm
        if it.pred < cauchy - 1e-10 * (2.0 * it.f):
            bad.append(f"{tag}: Cauchy decrease violated, pred={it.pred} < {cauchy}")
    for a, b in zip(hist, hist[1:]):
        if b.theta != a.theta_next:
            bad.append(f"k={b.k}: theta not carried over from previous iteration")
        if b.fevals <= a.fevals:
            bad.append(f"k={b.k}: feval counter not increasing")
        expected_f = a.f_trial if a.accepted else a.f
        if b.f != expected_f:
            bad.append(f"k={b.k}: f={b.f} inconsistent with previous acceptance")
    tr = record.trace
    for (fa, va), (fb, vb) in zip(tr, tr[1:]):
        if fb <= fa:
            bad.append(f"trace fevals not strictly increasing at {fb}")
        if vb > va:
            bad.append(f"best f increased at feval {fb}")
    return bad
