"""Dense convex QP solver (primal active set).

min 0.5 x'Qx + q'x  s.t.  A_eq x = b_eq, A_ie x <= b_ie.

Problems here are small (at most a few hundred variables), so determinism
and KKT-verified answers matter more than scalability.  A feasible start
comes from an LP; the working set then follows the textbook primal scheme
with lexicographic tie-breaking.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve, qr
from scipy.optimize import linprog, nnls

from .errors import MaxIterationsError, NumericalFailureError, QpInfeasibleError

KKT_TOL = 1e-6
REGULARIZATION = 1e-8
STALL_LIMIT = 100


@dataclass(frozen=True)
class QpProblem:
    Q: np.ndarray
    q: np.ndarray
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None
    A_ie: np.ndarray = None
    b_ie: np.ndarray = None

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        n = Q.shape[0]
        if Q.shape != (n, n):
            raise ValueError("Q must be square")
        if np.max(np.abs(Q - Q.T)) > 1e-9:
            raise ValueError("Q must be symmetric")
        q = np.asarray(self.q, dtype=float).reshape(n)
        A_eq = np.zeros((0, n)) if self.A_eq is None else np.atleast_2d(np.asarray(self.A_eq, dtype=float))
        b_eq = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, dtype=float).reshape(-1)
        A_ie = np.zeros((0, n)) if self.A_ie is None else np.atleast_2d(np.asarray(self.A_ie, dtype=float))
        b_ie = np.zeros(0) if self.b_ie is None else np.asarray(self.b_ie, dtype=float).reshape(-1)
        if A_eq.shape != (b_eq.shape[0], n) or A_ie.shape != (b_ie.shape[0], n):
            raise ValueError("constraint dimensions inconsistent with Q")
        for name, val in (("Q", Q), ("q", q), ("A_eq", A_eq), ("b_eq", b_eq), ("A_ie", A_ie), ("b_ie", b_ie)):
            object.__setattr__(self, name, val)

    @property
    def n(self):
        return self.Q.shape[0]

    def objective(self, x):
        return float(0.5 * x @ self.Q @ x + self.q @ x)


@dataclass(frozen=True)
class QpSolution:
    x: np.ndarray
    status: str
    iterations: int
    kkt_residual: float


def _feasible_start(p):
    """Most-interior feasible point via a max-slack LP.

    Maximizing the minimum Euclidean slack of the inequalities gives a
    point with an empty (or tiny) initial working set, which keeps the
    active-set iteration count close to the size of the optimal working
    set.  A negative optimal slack certifies infeasibility outright.
    """
    n = p.n
    m_ie = p.A_ie.shape[0]
    if m_ie == 0:
        res = linprog(
            np.zeros(n),
            A_eq=p.A_eq if p.A_eq.shape[0] else None,
            b_eq=p.b_eq if p.A_eq.shape[0] else None,
            bounds=[(None, None)] * n,
            method="highs",
        )
        if not res.success:
            raise QpInfeasibleError("no feasible point for the QP constraints")
        return res.x
    row_norms = np.linalg.norm(p.A_ie, axis=1)
    row_norms[row_norms == 0.0] = 1.0
    # variables (x, t): maximize t s.t. A_ie x + t*||a_i|| <= b_ie
    A_ub = np.hstack([p.A_ie, row_norms[:, None]])
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_eq = np.hstack([p.A_eq, np.zeros((p.A_eq.shape[0], 1))]) if p.A_eq.shape[0] else None
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=p.b_ie,
        A_eq=A_eq,
        b_eq=p.b_eq if p.A_eq.shape[0] else None,
        bounds=[(None, None)] * n + [(None, 1.0)],
        method="highs",
    )
    if not res.success or res.x[-1] < -1e-9:
        raise QpInfeasibleError("no feasible point for the QP constraints")
    return res.x[:n]


def _null_basis(A_act):
    """Orthonormal basis of ker(A_act) from a pivoted QR of its transpose."""
    Qf, R, _ = qr(A_act.T, mode="full", pivoting=True)
    diag = np.abs(np.diag(R)) if min(R.shape) else np.zeros(0)
    tol = max(A_act.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    return Qf[:, rank:]


def _kkt_step(Q, g, A_act):
    """Minimize 0.5 p'Qp + g'p subject to A_act p = 0.

    Fast path: one dense solve of the bordered KKT system, which also
    yields the multipliers.  Falls back to a null-space method (pivoted QR
    of A_act') when the working set is rank deficient; null-space steps are
    exactly feasible and the reduced Hessian is positive definite thanks to
    the regularization, which keeps the iteration stable even when Q itself
    is singular (the jerk Hessian has a polynomial null space).

    Returns (step, multipliers-or-None).
    """
    n = Q.shape[0]
    k = A_act.shape[0]
    if k == 0:
        return np.linalg.solve(Q, -g), np.zeros(0)
    K = np.zeros((n + k, n + k))
    K[:n, :n] = Q
    K[:n, n:] = A_act.T
    K[n:, :n] = A_act
    rhs = np.concatenate([-g, np.zeros(k)])
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # singular K falls back below
            lu = lu_factor(K)
            sol = lu_solve(lu, rhs)
            sol += lu_solve(lu, rhs - K @ sol)  # one refinement pass
    except (np.linalg.LinAlgError, ValueError):
        sol = None
    if sol is not None and not np.all(np.isfinite(sol)):
        sol = None
    if sol is not None:
        step, lam = sol[:n], sol[n:]
        feas = np.max(np.abs(A_act @ step)) if k else 0.0
        stat = np.max(np.abs(Q @ step + A_act.T @ lam + g))
        ref = max(1.0, float(np.max(np.abs(g))))
        if feas < 1e-9 * max(1.0, float(np.max(np.abs(step)))) and stat < 1e-7 * ref:
            return step, lam
    Z = _null_basis(A_act)
    if Z.shape[1] == 0:
        return np.zeros(n), None
    H = Z.T @ Q @ Z
    return Z @ np.linalg.solve(H, -(Z.T @ g)), None


def _multipliers(Q, g, A_act, step):
    """Least-squares multipliers of the stationarity condition."""
    lam, *_ = np.linalg.lstsq(A_act.T, -(g + Q @ step), rcond=None)
    return lam


def kkt_residuals(p, x, tol_active=1e-8):
    """(primal_eq, primal_ie, stationarity) residuals of a candidate x.

    Stationarity is checked by a nonnegative least-squares fit of the
    gradient onto active constraint normals.
    """
    r_eq = float(np.max(np.abs(p.A_eq @ x - p.b_eq))) if p.A_eq.shape[0] else 0.0
    slack = p.A_ie @ x - p.b_ie if p.A_ie.shape[0] else np.zeros(0)
    r_ie = float(np.max(slack)) if slack.size else 0.0
    g = p.Q @ x + p.q
    rows = [p.A_eq] if p.A_eq.shape[0] else []
    active = np.where(slack >= -1e-6)[0] if slack.size else np.zeros(0, dtype=int)
    if active.size:
        rows.append(p.A_ie[active])
    if rows:
        A = np.vstack(rows)
        n_eq = p.A_eq.shape[0]
        # sign-constrained fit: free equality multipliers (split into +/-
        # parts), nonnegative inequality multipliers
        cols = np.hstack([A[:n_eq].T, -A[:n_eq].T, A[n_eq:].T])
        coef, _ = nnls(cols, -g)
        lam = np.concatenate([coef[:n_eq] - coef[n_eq:2 * n_eq], coef[2 * n_eq:]])
        r_st = float(np.max(np.abs(g + A.T @ lam)))
    else:
        r_st = float(np.max(np.abs(g))) if g.size else 0.0
    return r_eq, r_ie, r_st


def solve_qp(problem, max_iterations=None):
    """Active-set solve; raises on infeasibility or iteration cap."""
    p = problem
    n = p.n
    m_total = p.A_eq.shape[0] + p.A_ie.shape[0]
    if max_iterations is None:
        max_iterations = max(200, 10 * (n + m_total))

    # normalize the objective so the regularization and tolerances are
    # meaningful regardless of the Hessian's scale
    scale = max(1.0, float(np.max(np.abs(p.Q))), float(np.max(np.abs(p.q), initial=0.0)))
    Q = p.Q / scale + REGULARIZATION * np.eye(n)
    q = p.q / scale
    x = _feasible_start(p)
    slack = p.A_ie @ x - p.b_ie if p.A_ie.shape[0] else np.zeros(0)
    working = sorted(np.where(slack > -1e-9)[0].tolist())
    ie_norms = np.linalg.norm(p.A_ie, axis=1) if p.A_ie.shape[0] else np.zeros(0)

    f_best = np.inf
    stall = 0
    for it in range(1, max_iterations + 1):
        A_act = np.vstack([p.A_eq, p.A_ie[working]]) if (p.A_eq.shape[0] or working) else np.zeros((0, n))
        g = Q @ x + q
        step, lam_kkt = _kkt_step(Q, g, A_act)
        f = 0.5 * x @ Q @ x + q @ x
        if f < f_best - 1e-14 * max(1.0, abs(f_best)):
            f_best = f
            stall = 0
        else:
            stall += 1
        if np.linalg.norm(step, ord=np.inf) < 1e-10 * max(1.0, np.linalg.norm(x, ord=np.inf)):
            lam = lam_kkt if lam_kkt is not None else _multipliers(Q, g, A_act, step)
            # weight by row norms: a multiplier's contribution to the
            # stationarity residual scales with its constraint row
            lam_ie = lam[p.A_eq.shape[0]:] * np.maximum(1.0, ie_norms[working])
            negative = np.where(lam_ie < -0.1 * KKT_TOL)[0]
            if negative.size == 0:
                r_eq, r_ie, r_st = kkt_residuals(p, x)
                if max(r_eq, r_ie) > KKT_TOL:
                    raise NumericalFailureError("active-set solution violates constraints")
                return QpSolution(x, "optimal", it, max(r_eq, r_ie, r_st / scale))
            # drop all strongly negative multipliers at once (degenerate
            # vertices shed dozens of rows); fall back to Bland's
            # single-drop lowest-index rule (guaranteed acyclic) on stall
            if stall > STALL_LIMIT:
                working.pop(int(negative[0]))
            else:
                lam_min = float(np.min(lam_ie))
                batch = np.where(lam_ie < 0.1 * lam_min)[0] if lam_min < -KKT_TOL else negative
                for j in sorted(batch.tolist(), reverse=True):
                    working.pop(j)
            continue
        # step length to the nearest blocking inequality; lowest index wins ties
        alpha = 1.0
        blocker = None
        if p.A_ie.shape[0]:
            in_working = np.zeros(p.A_ie.shape[0], dtype=bool)
            in_working[working] = True
            a_dot_p = p.A_ie @ step
            # relative threshold: rows (numerically) dependent on the
            # working set must not be re-added as blockers
            thresh = 1e-9 * ie_norms * max(1e-3, float(np.linalg.norm(step)))
            movable = ~in_working & (a_dot_p > thresh)
            if np.any(movable):
                dist = np.full(p.A_ie.shape[0], np.inf)
                dist[movable] = (p.b_ie[movable] - p.A_ie[movable] @ x) / a_dot_p[movable]
                i = int(np.argmin(dist))
                if dist[i] < alpha:
                    alpha = max(float(dist[i]), 0.0)
                    blocker = i
        x = x + alpha * step
        if blocker is not None:
            working.append(blocker)
            working.sort()
    raise MaxIterationsError(f"active set did not converge in {max_iterations} iterations")
