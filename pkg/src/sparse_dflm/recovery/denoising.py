"""Basis pursuit denoising, ``min ||g||_1 s.t. ||A g - b|| <= xi``.

Solved with a log-barrier interior-point method on the split form

    min sum(u)  s.t.  g - u <= 0,  -g - u <= 0,  (||A g - b||^2 - xi^2) / 2 <= 0,

followed by an exact KKT polish on the identified support.  The barrier's
central-path multipliers give a dual vector, so every returned point comes
with a certified duality gap.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.linalg

from .problem import RecoveryProblem, RecoveryResult, SolverOptions, Status, dual_lower_bound

log = logging.getLogger(__name__)

_BARRIER_GROWTH = 10.0
_MAX_NEWTON = 60
_ALPHA, _BETA = 0.01, 0.5


def bpdn_solve(prob: RecoveryProblem, opts: SolverOptions | None = None) -> RecoveryResult:
    opts = opts or SolverOptions()
    A, b, xi = prob.A, prob.b, prob.xi
    if xi <= 0:
        raise ValueError("bpdn_solve needs xi > 0; use bp_solve for the equality-constrained problem")
    n = A.shape[1]
    if np.linalg.norm(b) <= xi:
        return RecoveryResult.from_point(A, b, np.zeros(n), Status.OPTIMAL, gap=0.0)

    g0 = np.linalg.lstsq(A, b, rcond=None)[0]
    if np.linalg.norm(A @ g0 - b) >= xi:
        return RecoveryResult.from_point(A, b, g0, Status.INFEASIBLE)

    g, y, iters = _barrier(A, b, xi, g0, opts)
    cands = [(g, y)]
    if opts.polish:
        pol = _kkt_polish(A, b, xi, g, y)
        if pol is not None:
            cands.insert(0, pol)

    best = None
    for cand, dual in cands:
        l1 = np.abs(cand).sum()
        res = np.linalg.norm(A @ cand - b)
        gap = l1 - max(dual_lower_bound(A, b, dual, xi), dual_lower_bound(A, b, y, xi))
        ok = res <= xi * (1.0 + opts.feasibility_tol) and gap <= opts.optimality_tol * (1.0 + l1)
        if ok:
            return RecoveryResult.from_point(A, b, cand, Status.OPTIMAL, iters, gap)
        if best is None and res <= xi * (1.0 + opts.feasibility_tol):
            best = (cand, gap)
    cand, gap = best if best is not None else (g, float("nan"))
    log.debug("denoising solve not certified: gap=%.3e", gap)
    return RecoveryResult.from_point(A, b, cand, Status.MAX_ITERATIONS, iters, gap)


def _barrier(A, b, xi, g, opts):
    n = A.shape[1]
    eps2 = xi * xi
    u = 0.95 * np.abs(g) + 0.10 * np.abs(g).max()
    m_constraints = 2 * n + 1
    tau = max(m_constraints / max(np.abs(g).sum(), 1e-300), 1.0)
    target = 0.1 * opts.optimality_tol * (1.0 + np.abs(g).sum())
    AtA = A.T @ A
    iters = 0
    y = np.zeros(A.shape[0])

    while True:
        for _ in range(_MAX_NEWTON):
            if iters >= opts.max_iter:
                break
            iters += 1
            r = A @ g - b
            f1, f2 = g - u, -g - u
            fe = 0.5 * (r @ r - eps2)
            atr = A.T @ r
            gg = -1.0 / f1 + 1.0 / f2 - atr / fe
            gu = tau + 1.0 / f1 + 1.0 / f2
            s11 = 1.0 / f1**2 + 1.0 / f2**2
            s12 = -1.0 / f1**2 + 1.0 / f2**2
            H = -AtA / fe + np.outer(atr, atr) / fe**2
            H[np.diag_indices(n)] += s11 - s12**2 / s11
            rhs = -gg + s12 / s11 * gu
            try:
                dg = scipy.linalg.solve(H, rhs, assume_a="pos")
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
                dg = np.linalg.lstsq(H, rhs, rcond=None)[0]
            du = (-gu - s12 * dg) / s11
            decrement = -(gg @ dg + gu @ du)
            if not np.isfinite(decrement) or decrement < 0:
                break

            smax = 1.0
            for fv, dv in ((f1, dg - du), (f2, -dg - du)):
                pos = dv > 0
                if pos.any():
                    smax = min(smax, float(np.min(-fv[pos] / dv[pos])))
            adg = A @ dg
            qa, qb, qc = adg @ adg, 2.0 * (r @ adg), r @ r - eps2
            if qa > 0:
                smax = min(smax, (-qb + np.sqrt(qb * qb - 4 * qa * qc)) / (2 * qa))
            step = 0.99 * smax

            phi0 = _phi(tau, u, f1, f2, fe)
            slope = gg @ dg + gu @ du
            while step > 1e-20:
                gn, un = g + step * dg, u + step * du
                rn = A @ gn - b
                f1n, f2n, fen = gn - un, -gn - un, 0.5 * (rn @ rn - eps2)
                if (f1n < 0).all() and (f2n < 0).all() and fen < 0 and \
                        _phi(tau, un, f1n, f2n, fen) <= phi0 + _ALPHA * step * slope:
                    break
                step *= _BETA
            else:
                break
            g, u = gn, un
            if decrement / 2 < 1e-12 * (1.0 + abs(phi0)):
                break

        r = A @ g - b
        fe = 0.5 * (r @ r - eps2)
        y = r / (tau * fe)  # = -lambda_e * r with lambda_e = -1/(tau fe)
        if m_constraints / tau < target or iters >= opts.max_iter:
            break
        tau *= _BARRIER_GROWTH
    return g, y, iters


def _phi(tau, u, f1, f2, fe):
    return tau * u.sum() - np.log(-f1).sum() - np.log(-f2).sum() - np.log(-fe)


def _kkt_polish(A, b, xi, g, y):
    """Solve the optimality conditions exactly on the support of ``g``.

    On support ``S`` with signs ``s`` the optimum satisfies
    ``s + nu A_S^T (A_S g_S - b) = 0`` with the ball constraint active,
    which is a closed-form one-parameter family in ``1/nu``.
    """
    slack = 1.0 - np.abs(A.T @ y)
    support = np.flatnonzero(np.abs(g) > np.maximum(slack, 0.0))
    if support.size == 0 or support.size > A.shape[0]:
        return None
    As = A[:, support]
    signs = np.sign(g[support])
    try:
        gram_inv_s = np.linalg.solve(As.T @ As, signs)
    except np.linalg.LinAlgError:
        return None
    g_ls = np.linalg.lstsq(As, b, rcond=None)[0]
    r_ls = As @ g_ls - b
    direction = As @ gram_inv_s
    room = xi * xi - r_ls @ r_ls
    dd = direction @ direction
    if room <= 0 or dd <= 0:
        return None
    inv_nu = np.sqrt(room / dd)
    gs = g_ls - inv_nu * gram_inv_s
    if np.any(np.sign(gs) != signs):
        return None
    out = np.zeros_like(g)
    out[support] = gs
    dual = -(As @ gs - b) / inv_nu
    return out, dual
