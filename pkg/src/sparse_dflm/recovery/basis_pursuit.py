"""Equality-constrained basis pursuit by a batched primal-dual interior-point method.

The problem ``min ||g||_1 s.t. A g = b`` is written as the standard-form LP

    min 1^T (u + v)   s.t.  A u - A v = b,   u, v >= 0,   g = u - v,

and solved with Mehrotra's predictor-corrector scheme.  All right-hand sides
sharing one ``A`` are iterated together: the normal matrix of row ``k`` is
``A diag(d_k) A^T`` with ``d_k = (u/z_u + v/z_v)_k`` so each step costs one
batch of small ``p x p`` solves.

After the interior-point phase the support is identified from
complementarity and the solution is polished by a restricted least-squares
solve.  Either candidate is accepted only if its duality gap, measured
against the interior-point dual, is below ``optimality_tol``.
"""

from __future__ import annotations

import logging

import numpy as np

from .problem import RecoveryProblem, RecoveryResult, SolverOptions, Status, dual_lower_bound

log = logging.getLogger(__name__)

_STEP_FRACTION = 0.995
_STALL_LIMIT = 8
_MU_FLOOR = 1e-12
_CERTIFY_MU = 1e-6


def bp_solve(prob: RecoveryProblem, opts: SolverOptions | None = None) -> RecoveryResult:
    """Solve one basis-pursuit problem (``prob.xi`` must be 0)."""
    if prob.xi != 0:
        raise ValueError("bp_solve is the equality-constrained solver; use bpdn_solve for xi > 0")
    return bp_solve_many(prob.A, prob.b[None, :], opts)[0]


def bp_solve_many(A, B, opts: SolverOptions | None = None) -> list[RecoveryResult]:
    """Solve ``min ||g||_1 s.t. A g = B[k]`` for every row ``k`` of ``B``."""
    opts = opts or SolverOptions()
    A = np.asarray(A, dtype=float)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    p, n = A.shape
    K = B.shape[0]
    if B.shape[1] != p:
        raise ValueError(f"right-hand sides have length {B.shape[1]}, expected {p}")

    results: list[RecoveryResult | None] = [None] * K
    bnorm = np.linalg.norm(B, axis=1)

    # Reduce to a full-row-rank system; rows of B outside range(A) are infeasible.
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    rank_tol = s[0] * max(p, n) * np.finfo(float).eps if s.size else 0.0
    r = int(np.sum(s > rank_tol))
    if r < p:
        coef = B @ U[:, :r]
        off_range = np.linalg.norm(B - coef @ U[:, :r].T, axis=1)
        A_red = s[:r, None] * Vt[:r]
        B_red = coef
    else:
        off_range = np.zeros(K)
        A_red, B_red = A, B

    todo = []
    for k in range(K):
        if off_range[k] > opts.feasibility_tol * (1.0 + bnorm[k]):
            ls = np.linalg.lstsq(A, B[k], rcond=None)[0]
            results[k] = RecoveryResult.from_point(A, B[k], ls, Status.INFEASIBLE)
        elif bnorm[k] == 0.0:
            results[k] = RecoveryResult.from_point(A, B[k], np.zeros(n), Status.OPTIMAL, gap=0.0)
        else:
            todo.append(k)
    if not todo or r == 0:
        for k in todo:
            results[k] = RecoveryResult.from_point(A, B[k], np.zeros(n), Status.INFEASIBLE)
        return results  # type: ignore[return-value]

    idx = np.array(todo)
    scale = np.linalg.norm(B_red[idx], axis=1)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        allowed = opts.feasibility_tol * (1.0 + bnorm[idx]) / scale
        G, Y, iters, converged = _mehrotra_batch(A_red, B_red[idx] / scale[:, None], opts, allowed)

    for j, k in enumerate(todo):
        b_unit = B_red[k] / scale[j]
        g, _, gap, ok = _finalize(A_red, b_unit, G[j], Y[j], allowed[j], opts)
        g = g * scale[j]
        res = np.linalg.norm(A @ g - B[k])
        feasible = res <= opts.feasibility_tol * (1.0 + bnorm[k])
        status = Status.OPTIMAL if (feasible and ok) else Status.MAX_ITERATIONS
        if status is not Status.OPTIMAL:
            log.debug("basis pursuit row %d not certified: residual=%.3e gap=%.3e", k, res, gap)
        results[k] = RecoveryResult.from_point(A, B[k], g, status, iterations=iters[j], gap=gap * scale[j])
    return results  # type: ignore[return-value]


def _finalize(A, b, g, y, tol_feas, opts):
    """Pick the best point among the IPM iterate and its polished versions.

    A certified point of least l1 norm wins.  Without one, the candidate
    with the smallest violation (residual and gap, each relative to its
    tolerance) is returned uncertified.  Returns ``(g, y, gap, ok)`` where
    ``y`` is the dual vector behind the bound.
    """

    def assess(x, dual):
        l1 = np.abs(x).sum()
        gap = l1 - dual_lower_bound(A, b, dual)
        score = max(np.linalg.norm(A @ x - b) / tol_feas, gap / (opts.optimality_tol * (1.0 + l1)))
        return score, gap

    candidates = [(g, y)]
    if opts.polish:
        for x, dual in _polish_candidates(A, b, g, y):
            candidates += [(x, dual), (x, y)]
    best = None
    for x, dual in candidates:
        score, gap = assess(x, dual)
        ok = score <= 1.0
        key = (not ok, np.abs(x).sum() if ok else score)
        if best is None or key < best[0]:
            best = (key, (x, dual, gap, ok))
    if opts.polish and not best[1][3]:
        vertex = _crossover(A, b, y)
        if vertex is not None:
            x, dual = vertex
            score, gap = assess(x, dual)
            if score <= 1.0 or score < best[0][1]:
                best = ((score > 1.0, 0.0), (x, dual, gap, score <= 1.0))
    return best[1]


def _initial_basis(A, order):
    """First ``p`` linearly independent columns of ``A`` in the given order."""
    p = A.shape[0]
    Q = np.zeros((p, 0))
    basis = []
    for j in order:
        a = A[:, j]
        r = a - Q @ (Q.T @ a)
        r = r - Q @ (Q.T @ r)
        nr = np.linalg.norm(r)
        if nr > 1e-8 * np.linalg.norm(a):
            Q = np.column_stack([Q, r / nr])
            basis.append(int(j))
            if len(basis) == p:
                break
    return basis


def _crossover(A, b, y, max_pivots=None):
    """Primal simplex on the split LP, started from the basis ``y`` points at.

    Any nonsingular set of ``p`` columns is a feasible basis once each
    column takes the sign of its coefficient, so no phase one is needed.
    Dantzig pricing with Bland's rule after repeated degenerate pivots.
    Returns ``(g, y)`` at an optimal vertex, or ``None`` if the pivot
    budget runs out or a basis becomes singular.
    """
    p, n = A.shape
    slack = 1.0 - np.abs(A.T @ y)
    S = _initial_basis(A, np.argsort(slack, kind="stable"))
    if len(S) < p:
        return None
    max_pivots = 10 * (p + n) if max_pivots is None else max_pivots
    try:
        xS = np.linalg.solve(A[:, S], b)
    except np.linalg.LinAlgError:
        return None
    aty0 = (A.T @ y)[S]
    sgn = np.where(xS > 0, 1.0, np.where(xS < 0, -1.0, np.where(aty0 >= 0, 1.0, -1.0)))
    degenerate = 0
    for _ in range(max_pivots):
        AS = A[:, S]
        try:
            xS = np.linalg.solve(AS, b)
            yk = np.linalg.solve(AS.T, sgn)
        except np.linalg.LinAlgError:
            return None
        r = A.T @ yk
        viol = np.abs(r) - 1.0
        viol[S] = -np.inf
        cand = np.flatnonzero(viol > 1e-11)
        if cand.size == 0:
            g = np.zeros(n)
            g[S] = xS
            return g, yk
        j = int(cand[0]) if degenerate > 2 * p else int(cand[np.argmax(viol[cand])])
        e = 1.0 if r[j] > 0 else -1.0
        w = e * np.linalg.solve(AS, A[:, j])
        drop = sgn * w
        level = np.maximum(sgn * xS, 0.0)
        rows = np.flatnonzero(drop > 1e-12)
        if rows.size == 0:
            return None
        ratios = level[rows] / drop[rows]
        t = ratios.min()
        leave = int(rows[np.flatnonzero(ratios <= t * (1 + 1e-12) + 1e-300)].min())
        degenerate = degenerate + 1 if t <= 1e-15 else 0
        S[leave] = j
        sgn[leave] = e
    return None


def _polish_candidates(A, b, g, y):
    """Least-squares solutions on candidate supports, each with a matching dual.

    Two supports are tried: entries where ``|g_j|`` exceeds the dual slack
    ``1 - |a_j^T y|``, and the ``p`` columns of smallest slack (the basis the
    dual points at).  Each dual is the smallest change to ``y`` making
    ``a_j^T y = sign(a_j^T y)`` on the support, which makes the bound tight
    whenever the support and signs are right.
    """
    p = A.shape[0]
    aty = A.T @ y
    slack = 1.0 - np.abs(aty)
    by_gap = np.flatnonzero(np.abs(g) > np.maximum(slack, 0.0))
    if by_gap.size > p:
        by_gap = by_gap[np.argsort(-np.abs(g[by_gap]))[:p]]
    by_dual = np.sort(np.argsort(slack, kind="stable")[:p])
    seen = []
    out = []
    for support in (by_gap, by_dual):
        key = tuple(support)
        if key in seen:
            continue
        seen.append(key)
        x = np.zeros_like(g)
        if support.size == 0:
            out.append((x, y))
            continue
        AS = A[:, support]
        sol, *_ = np.linalg.lstsq(AS, b, rcond=None)
        x[support] = sol
        signs = np.where(aty[support] >= 0, 1.0, -1.0)
        dy, *_ = np.linalg.lstsq(AS.T, signs - aty[support], rcond=None)
        out.append((x, y + dy))
    return out


def _mehrotra_batch(A, B, opts, allowed=None):
    """Run predictor-corrector iterations on all rows of ``B`` at once.

    Returns the primal ``g``, dual ``y``, per-row iteration counts and a
    convergence mask.  Rows that converge are frozen while the rest continue.
    With ``allowed`` (per-row residual limits) and polishing enabled, a row
    whose polished iterate is already certified is frozen at that point;
    on degenerate instances this avoids the late iterations where the
    normal matrix is too ill-conditioned to give useful directions.
    """
    p, n = A.shape
    K = B.shape[0]
    N = 2 * n
    tol = 0.1 * min(opts.feasibility_tol, opts.optimality_tol)
    At = A.T

    def abar(x):  # (k, 2n) -> (k, p)
        return (x[:, :n] - x[:, n:]) @ At

    def abar_t(y):  # (k, p) -> (k, 2n)
        w = y @ A
        return np.concatenate([w, -w], axis=1)

    # Mehrotra's starting point; A c = 0 because the cost is all ones on [u, v].
    w = np.linalg.solve(2.0 * (A @ At), B.T).T
    x = abar_t(w)
    y = np.zeros((K, p))
    z = np.ones((K, N))
    x += np.maximum(-1.5 * x.min(axis=1), 0.0)[:, None]
    xz = np.sum(x * z, axis=1)
    x += (0.5 * xz / z.sum(axis=1))[:, None]
    z += (0.5 * xz / x.sum(axis=1))[:, None]

    iters = np.zeros(K, dtype=int)
    done = np.zeros(K, dtype=bool)
    stall = np.zeros(K, dtype=int)
    cnorm = np.sqrt(N)

    for _ in range(opts.max_iter):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        xa, ya, za, ba = x[act], y[act], z[act], B[act]
        rp = ba - abar(xa)
        rd = 1.0 - abar_t(ya) - za
        cx = xa.sum(axis=1)
        by = np.sum(ba * ya, axis=1)
        mu = np.sum(xa * za, axis=1) / N
        dual_feas = np.linalg.norm(rd, axis=1) <= tol * (1.0 + cnorm)
        primal = np.linalg.norm(rp, axis=1)
        conv = (dual_feas & (primal <= tol * (1.0 + np.linalg.norm(ba, axis=1)))
                & (np.abs(cx - by) <= tol * (1.0 + np.abs(cx))))
        # Once complementarity has collapsed the normal matrix is too
        # ill-conditioned to shrink rp further; the support polish takes over.
        conv |= dual_feas & (mu <= _MU_FLOOR) & (primal <= 1e-6)
        conv |= ~np.isfinite(mu)
        if allowed is not None and opts.polish:
            for j in np.flatnonzero(~conv & (mu <= _CERTIFY_MU) & (primal <= 1e-6)):
                k = act[j]
                g = xa[j, :n] - xa[j, n:]
                g, yk, _, ok = _finalize(A, ba[j], g, ya[j], allowed[k], opts)
                if ok:
                    x[k] = np.concatenate([np.maximum(g, 0.0), np.maximum(-g, 0.0)])
                    y[k] = yk
                    conv[j] = True
        if conv.any():
            done[act[conv]] = True
            keep = ~conv
            act, xa, ya, za, rp, rd, mu = (act[keep], xa[keep], ya[keep], za[keep], rp[keep],
                                           rd[keep], mu[keep])
            if act.size == 0:
                break
        iters[act] += 1

        d = xa / za
        dsum = d[:, :n] + d[:, n:]
        M = np.einsum("ij,kj,lj->kil", A, dsum, A, optimize=True)

        def direction(rc):
            t = rc / za - d * rd
            rhs = rp - abar(t)
            dy = _solve_normal(M, rhs)
            aty = abar_t(dy)
            return t + d * aty, dy, rd - aty

        dxa, dya, dza = direction(-xa * za)
        ap = _max_step(xa, dxa)
        ad = _max_step(za, dza)
        mu_aff = np.sum((xa + ap[:, None] * dxa) * (za + ad[:, None] * dza), axis=1) / N
        sigma = (mu_aff / mu) ** 3
        dx, dy, dz = direction(-xa * za - dxa * dza + (sigma * mu)[:, None])
        ap = np.minimum(1.0, _STEP_FRACTION * _max_step(xa, dx, cap=np.inf))
        ad = np.minimum(1.0, _STEP_FRACTION * _max_step(za, dz, cap=np.inf))

        xn = xa + ap[:, None] * dx
        yn = ya + ad[:, None] * dy
        zn = za + ad[:, None] * dz
        finite = np.isfinite(xn).all(axis=1) & np.isfinite(yn).all(axis=1) & np.isfinite(zn).all(axis=1)
        x[act[finite]], y[act[finite]], z[act[finite]] = xn[finite], yn[finite], zn[finite]
        done[act[~finite]] = True

        tiny = (ap < 1e-10) & (ad < 1e-10)
        stall[act] = np.where(tiny, stall[act] + 1, 0)
        done[act[stall[act] >= _STALL_LIMIT]] = True

    # Rows frozen because of stalls are reported via their (failed) certificate.
    g = x[:, :n] - x[:, n:]
    return g, y, iters, done


def _solve_normal(M, rhs):
    """Batched solve; a singular row falls back to least squares on its own."""
    try:
        return np.linalg.solve(M, rhs[:, :, None])[:, :, 0]
    except np.linalg.LinAlgError:
        pass
    out = np.empty_like(rhs)
    for k in range(M.shape[0]):
        try:
            out[k] = np.linalg.solve(M[k], rhs[k])
        except np.linalg.LinAlgError:
            out[k] = np.linalg.lstsq(M[k], rhs[k], rcond=None)[0]
    return out


def _max_step(v, dv, cap=1.0):
    """Largest alpha <= cap with v + alpha dv >= 0, row-wise."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dv < 0, -v / dv, np.inf)
    return np.minimum(cap, ratio.min(axis=1))
