"""Weight-finding solvers: simplex least squares, affine least squares, simplex L1.

All three problems are small (tens of columns, at most a few thousand
rows) but are solved many times over inside bootstrap and placebo loops,
so they use direct dense active-set methods with deterministic pivoting
rather than iterative approximations.  Nothing in this module knows
about panels or periods; inputs are plain design matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LsProblem",
    "WeightVector",
    "SolverError",
    "solve_simplex_ls",
    "solve_affine_ls",
    "solve_simplex_l1",
]

# Weights in [-CLAMP_TOL, 0) are rounding noise from the active-set
# arithmetic and get snapped to exactly 0 before renormalization.
CLAMP_TOL = 1e-10
JITTER = 1e-10


@dataclass(frozen=True)
class LsProblem:
    """Fit ``design @ weights ~ target`` with weights summing to one.

    Attributes
    ----------
    design : ndarray, shape (rows, J)
        One column of grid values (quantiles or CDF) per control unit.
    target : ndarray, shape (rows,)
        Grid values of the treated unit.
    simplex : bool
        If true the weights are also constrained nonnegative.
    """

    design: np.ndarray
    target: np.ndarray
    simplex: bool = True

    def __post_init__(self):
        design = np.atleast_2d(np.asarray(self.design, dtype=float))
        target = np.asarray(self.target, dtype=float).reshape(-1)
        if design.shape[0] != target.shape[0]:
            raise ValueError("design and target row counts differ")
        if design.shape[1] < 1:
            raise ValueError("need at least one design column")
        if not np.all(np.isfinite(design)) or not np.all(np.isfinite(target)):
            raise ValueError("design and target must be finite")
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "target", target)


@dataclass(frozen=True)
class WeightVector:
    """Solver output: weights on the J columns plus diagnostics.

    Attributes
    ----------
    weights : ndarray, shape (J,)
        Sum to one within 1e-8; nonnegative when the simplex was imposed.
    objective : float
        Attained value of the unjittered objective.
    active_set : tuple of int
        Column indices pinned at zero by binding nonnegativity
        constraints (empty for the affine solver).
    """

    weights: np.ndarray
    objective: float
    active_set: tuple


class SolverError(RuntimeError):
    """Raised when a solver exceeds its iteration cap or loses feasibility.

    Carries the last iterate and the max-norm KKT residual so callers
    can decide whether to drop a replicate or abort.
    """

    def __init__(self, message: str, weights=None, kkt_residual: float = float("nan")):
        super().__init__(message)
        self.weights = weights
        self.kkt_residual = kkt_residual


def _gram(problem: LsProblem):
    """Jittered Gram matrix and linear term of the least squares objective.

    The ridge 1e-10 * trace/J keeps collinear designs positive definite
    while perturbing weights below reporting precision; a floor covers
    the all-zero design where the trace itself vanishes.
    """
    x = problem.design
    gram = x.T @ x
    j = gram.shape[0]
    tr = float(np.trace(gram))
    tau = JITTER * tr / j if tr > 0 else JITTER
    return gram + tau * np.eye(j), x.T @ problem.target


def _mean_sq_objective(problem: LsProblem, w: np.ndarray) -> float:
    r = problem.design @ w - problem.target
    return float(r @ r) / problem.target.size


def _clamp_simplex(w: np.ndarray) -> np.ndarray:
    if np.any(w < -CLAMP_TOL):
        raise SolverError(
            f"weight {w.min():.3e} below the clamping tolerance", weights=w
        )
    w = np.where((w < 0.0), 0.0, w)
    total = w.sum()
    if not np.isfinite(total) or total <= 0:
        raise SolverError("weights do not sum to a positive total", weights=w)
    return w / total


def _polish_support(problem: LsProblem, x: np.ndarray, active: list) -> np.ndarray:
    """Re-solve on the converged support without the ridge.

    The jitter that stabilizes the active-set sweep biases the optimum
    by O(tau) on ill-conditioned supports.  Solving the sum-constrained
    normal equations restricted to the free coordinates removes that
    bias; the polished point is kept only when it stays inside the
    simplex and does not worsen the true objective.
    """
    j = x.size
    pinned = set(active)
    free = np.array([i for i in range(j) if i not in pinned], dtype=int)
    if free.size == 0:
        return x
    xd = problem.design[:, free]
    gram = xd.T @ xd
    k = free.size
    # scale the quadratic block to O(1) so the bordered system stays
    # well conditioned for very small or very large outcomes
    s = float(np.trace(gram)) / k
    if not np.isfinite(s) or s <= 0.0:
        s = 1.0
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = gram / s
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.r_[(xd.T @ problem.target) / s, 1.0]
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    w = np.zeros(j)
    w[free] = sol[:k]
    if not np.all(np.isfinite(w)) or float(w.min()) < -CLAMP_TOL:
        return x
    # compare against the feasible projection of the iterate: x itself
    # can drift off the sum constraint under extreme conditioning
    base = np.where(x < 0.0, 0.0, x)
    total = float(base.sum())
    if np.isfinite(total) and total > 0.0:
        base = base / total
        if _mean_sq_objective(problem, w) > _mean_sq_objective(problem, base):
            return x
    return w


def _kkt_residual(q: np.ndarray, b: np.ndarray, x: np.ndarray,
                  active: list, duals: np.ndarray) -> float:
    """Max-norm violation of the KKT system at the current iterate."""
    j = x.size
    n_mat = np.ones((j, 1 + len(active)))
    for pos, col in enumerate(active, start=1):
        n_mat[:, pos] = 0.0
        n_mat[col, pos] = 1.0
    stat = q @ x - b - n_mat @ duals
    resid = float(np.max(np.abs(stat)))
    resid = max(resid, abs(float(x.sum()) - 1.0))
    resid = max(resid, max(0.0, -float(x.min())))
    if len(active) > 1:
        resid = max(resid, max(0.0, -float(duals[1:].min())))
    return resid


def solve_simplex_ls(problem: LsProblem) -> WeightVector:
    """Minimize the mean squared residual over the unit simplex.

    Runs the Goldfarb and Idnani dual active-set method on the jittered
    normal equations.  The iteration starts from the minimizer subject
    to the sum constraint alone (a valid dual-feasible state), then adds
    the most violated nonnegativity bound one at a time, taking partial
    dual steps when a previously pinned weight blocks the move.  A final
    unjittered re-solve on the converged support removes the ridge bias.

    Parameters
    ----------
    problem : LsProblem
        Must have ``simplex=True``.

    Returns
    -------
    WeightVector
        Global minimizer; ``objective`` is the unjittered mean squared
        residual and ``active_set`` lists the weights pinned at zero.

    Raises
    ------
    SolverError
        If the iteration cap is exceeded; carries the last iterate and
        its KKT residual.
    """
    if not problem.simplex:
        raise ValueError("solve_simplex_ls requires simplex=True")
    q, b = _gram(problem)
    j = b.size
    ones = np.ones(j)

    # State: x solves the subproblem with the sum constraint plus the
    # pinned coordinates in `active`; `duals` holds the sum multiplier
    # at position 0 followed by one multiplier per pinned coordinate.
    kkt = np.zeros((j + 1, j + 1))
    kkt[:j, :j] = q
    kkt[:j, j] = ones
    kkt[j, :j] = ones
    sol = np.linalg.solve(kkt, np.r_[b, 1.0])
    x = sol[:j]
    active: list = []
    duals = np.array([sol[j]])

    def directions(pin: int):
        n_mat = np.ones((j, 1 + len(active)))
        for pos, col in enumerate(active, start=1):
            n_mat[:, pos] = 0.0
            n_mat[col, pos] = 1.0
        w = np.linalg.solve(q, _unit(j, pin))
        qi_n = np.linalg.solve(q, n_mat)
        r = np.linalg.solve(n_mat.T @ qi_n, n_mat.T @ w)
        z = w - qi_n @ r
        return z, r, float(np.abs(w).max())

    viol_tol = 1e-11
    max_iter = 50 * (j + 2)
    for _ in range(max_iter):
        pin = int(np.argmin(x))
        if x[pin] >= -viol_tol:
            weights = _clamp_simplex(_polish_support(problem, x, active))
            return WeightVector(
                weights=weights,
                objective=_mean_sq_objective(problem, weights),
                active_set=tuple(sorted(active)),
            )
        s = x[pin]
        u_plus = 0.0
        while True:
            z, r, w_scale = directions(pin)
            ztn = z[pin]
            # ztn is scale-dependent (like 1/trace), so the zero test is
            # relative to the unprojected direction's magnitude.
            t_full = -s / ztn if ztn > 1e-13 * w_scale else np.inf
            t_dual = np.inf
            drop_pos = -1
            for pos in range(1, len(r)):
                if r[pos] > 1e-12:
                    cand = duals[pos] / r[pos]
                    if cand < t_dual:
                        t_dual = cand
                        drop_pos = pos
            t = min(t_full, t_dual)
            if not np.isfinite(t):
                raise SolverError(
                    "no feasible step for the nonnegativity bound",
                    weights=x.copy(),
                    kkt_residual=_kkt_residual(q, b, x, active, duals),
                )
            if np.isfinite(t_full):
                x = x + t * z
                s = x[pin]
            duals = duals - t * r
            u_plus += t
            if t == t_full:
                active.append(pin)
                duals = np.r_[duals, u_plus]
                break
            active.pop(drop_pos - 1)
            duals = np.delete(duals, drop_pos)
    raise SolverError(
        f"active-set iteration cap {max_iter} exceeded",
        weights=x.copy(),
        kkt_residual=_kkt_residual(q, b, x, active, duals),
    )


def _unit(j: int, idx: int) -> np.ndarray:
    e = np.zeros(j)
    e[idx] = 1.0
    return e


def solve_affine_ls(problem: LsProblem) -> WeightVector:
    """Minimize the mean squared residual subject only to sum-to-one.

    Solves the bordered KKT system of the jittered normal equations;
    if the system is nonetheless singular the minimum-norm solution is
    taken.  Weights may be negative.
    """
    q, b = _gram(problem)
    j = b.size
    kkt = np.zeros((j + 1, j + 1))
    kkt[:j, :j] = q
    kkt[:j, j] = 1.0
    kkt[j, :j] = 1.0
    rhs = np.r_[b, 1.0]
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    w = sol[:j]
    total = w.sum()
    if not np.isfinite(total) or abs(total - 1.0) > 1e-6:
        raise SolverError("bordered KKT solve lost the sum constraint", weights=w)
    w = w / total
    return WeightVector(
        weights=w,
        objective=_mean_sq_objective(problem, w),
        active_set=(),
    )


def solve_simplex_l1(problem: LsProblem, cell_width: float = 1.0) -> WeightVector:
    """Minimize the summed absolute residual over the unit simplex.

    The residual at each grid row splits into a nonnegative slack pair
    (u, v) with ``design @ w - target = u - v``, giving a standard-form
    LP minimizing ``sum(u + v)``.  A dense-tableau primal simplex with
    Bland's rule solves it; the fixed initial basis plus Bland pivoting
    makes the returned vertex deterministic, which settles ties between
    degenerate optima.

    Parameters
    ----------
    problem : LsProblem
        Must have ``simplex=True``; rows are CDF values on a common
        support grid.
    cell_width : float
        Support-grid cell width; scales the reported objective so it
        approximates the integral of the absolute CDF difference.

    Returns
    -------
    WeightVector
        ``objective`` is ``cell_width * sum |residual|``.
    """
    if not problem.simplex:
        raise ValueError("solve_simplex_l1 requires simplex=True")
    if not np.isfinite(cell_width) or cell_width <= 0.0:
        raise ValueError("cell_width must be positive")
    # Normalize so the pivot tolerances are scale-free; the objective is
    # rescaled on the way out.
    scale = max(float(np.abs(problem.design).max()),
                float(np.abs(problem.target).max()))
    if scale == 0.0:
        scale = 1.0
    x_mat = problem.design / scale
    y = problem.target / scale
    rows, j = x_mat.shape
    n_var = j + 2 * rows

    a_mat = np.zeros((rows + 1, n_var))
    a_mat[:rows, :j] = x_mat
    a_mat[:rows, j:j + rows] = -np.eye(rows)
    a_mat[:rows, j + rows:] = np.eye(rows)
    a_mat[rows, :j] = 1.0
    rhs = np.r_[y, 1.0]
    cost = np.r_[np.zeros(j), np.ones(2 * rows)]

    # Initial feasible basis: weight 0 carries the sum row; each grid row
    # is carried by whichever slack absorbs the residual of that vertex.
    resid0 = x_mat[:, 0] - y
    basis = np.where(resid0 >= 0, j + np.arange(rows), j + rows + np.arange(rows))
    basis = np.r_[basis, 0]

    b_mat = a_mat[:, basis]
    tab = np.linalg.solve(b_mat, a_mat)
    xb = np.linalg.solve(b_mat, rhs)

    tol = 1e-9
    max_iter = 200 + 30 * n_var
    for _ in range(max_iter):
        reduced = cost - cost[basis] @ tab
        candidates = np.flatnonzero(reduced < -tol)
        if candidates.size == 0:
            break
        enter = int(candidates[0])
        col = tab[:, enter]
        pos = col > 1e-10
        if not pos.any():
            raise SolverError("LP column unbounded", weights=None)
        ratios = np.full(col.shape, np.inf)
        ratios[pos] = xb[pos] / col[pos]
        theta = ratios.min()
        # the tie window must stay above theta even when degeneracy makes
        # the minimum ratio a tiny negative
        near = np.flatnonzero(ratios <= theta + abs(theta) * 1e-12 + 1e-30)
        leave = int(near[np.argmin(basis[near])])
        piv = tab[leave, enter]
        tab[leave] /= piv
        xb[leave] /= piv
        factor = tab[:, enter].copy()
        factor[leave] = 0.0
        tab -= np.outer(factor, tab[leave])
        xb -= factor * xb[leave]
        basis[leave] = enter
    else:
        w_last = np.zeros(j)
        in_w = basis < j
        w_last[basis[in_w]] = xb[in_w]
        raise SolverError(
            f"simplex pivot cap {max_iter} exceeded",
            weights=w_last,
            kkt_residual=max(0.0, -float(reduced.min())),
        )

    # Re-solve on the final basis so accumulated pivot drift never
    # reaches the reported solution.
    xb = np.linalg.solve(a_mat[:, basis], rhs)
    w = np.zeros(j)
    in_w = basis < j
    w[basis[in_w]] = xb[in_w]
    w = _clamp_simplex(w)
    resid = problem.design @ w - problem.target
    return WeightVector(
        weights=w,
        objective=float(cell_width) * float(np.abs(resid).sum()),
        active_set=tuple(int(i) for i in range(j) if w[i] == 0.0),
    )
