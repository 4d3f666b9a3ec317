"""LP relaxation oracles for the branch-and-bound engine.

Two interchangeable engines solve ``min c'x`` subject to
``row_lo <= A x <= row_hi`` and ``lb <= x <= ub``:

* ``HighsLpOracle`` keeps one HiGHS model alive across nodes and only edits
  row and column bounds, so each node warm-starts from the last basis;
* ``ReferenceLpOracle`` runs the dense bounded-variable simplex below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import Infeasible, Unbounded

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ERROR = "error"


@dataclass(frozen=True)
class LpData:
    c: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    row_lo: np.ndarray
    row_hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    @property
    def n_rows(self) -> int:
        return len(self.row_lo)

    @property
    def n_cols(self) -> int:
        return len(self.c)

    def dense(self, rows=None) -> np.ndarray:
        rows = range(self.n_rows) if rows is None else rows
        rows = list(rows)
        A = np.zeros((len(rows), self.n_cols))
        for r, k in enumerate(rows):
            s, e = self.indptr[k], self.indptr[k + 1]
            A[r, self.indices[s:e]] = self.data[s:e]
        return A


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None = None
    objective: float = math.nan
    iterations: int = 0


def lp_data_from_model(model) -> LpData:
    indptr, indices, data = model.csr()
    lo, hi = model.row_bounds()
    lb, ub = model.col_bounds()
    return LpData(np.asarray(model.cost, dtype=float), indptr, indices, data, lo, hi, lb, ub)


# ---- dense bounded-variable primal simplex -------------------------------

def bounded_simplex(c, A, row_lo, row_hi, lb, ub, max_iter=50_000, tol=1e-9, bland_after=50):
    """Two-phase revised simplex with variables kept at bounds while nonbasic.

    Rows become ``A x - s = 0`` with the slack ``s`` bounded by the row
    range; phase 1 drives one artificial per row to zero.  Pricing is
    Dantzig's rule with ties to the lowest index; after ``bland_after``
    consecutive degenerate pivots it switches to Bland's rule for good.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float).reshape(-1, len(c))
    m, n = A.shape
    row_lo = np.asarray(row_lo, dtype=float)
    row_hi = np.asarray(row_hi, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if np.any(lb > ub + tol) or np.any(row_lo > row_hi + tol):
        return LpResult(INFEASIBLE)

    # columns: x (n), slacks (m), artificials (m)
    N = n + 2 * m
    lo = np.concatenate([lb, row_lo, np.zeros(m)])
    hi = np.concatenate([ub, row_hi, np.full(m, math.inf)])
    val = np.zeros(N)
    for k in range(n):
        if math.isfinite(lo[k]):
            val[k] = lo[k]
        elif math.isfinite(hi[k]):
            val[k] = hi[k]
    ax = A @ val[:n]
    for i in range(m):
        k = n + i
        cands = [b for b in (lo[k], hi[k]) if math.isfinite(b)]
        val[k] = min(cands, key=lambda b: abs(b - ax[i])) if cands else ax[i]
    resid = val[n:n + m] - ax
    sigma = np.where(resid >= 0.0, 1.0, -1.0)
    val[n + m:] = np.abs(resid)
    full = np.hstack([A, -np.eye(m), np.diag(sigma)])

    basis = list(range(n + m, N))
    in_basis = np.zeros(N, dtype=bool)
    in_basis[basis] = True
    iters = 0

    def run(cost, allow):
        nonlocal iters
        degenerate = 0
        bland = False
        while True:
            if iters >= max_iter:
                return ERROR
            iters += 1
            B = full[:, basis]
            nb = ~in_basis
            rhs = -(full[:, nb] @ val[nb])
            xb = np.linalg.solve(B, rhs) if m else np.zeros(0)
            val[basis] = xb
            yv = np.linalg.solve(B.T, cost[basis]) if m else np.zeros(0)
            d = cost - full.T @ yv
            enter, direction, best = -1, 0, 0.0
            for k in range(N):
                if in_basis[k] or not allow[k] or hi[k] - lo[k] <= 0.0:
                    continue
                at_lo = math.isfinite(lo[k]) and val[k] <= lo[k] + tol
                at_hi = math.isfinite(hi[k]) and val[k] >= hi[k] - tol
                free = not at_lo and not at_hi
                if d[k] < -tol and (at_lo or free):
                    score, dirn = -d[k], 1
                elif d[k] > tol and (at_hi or free):
                    score, dirn = d[k], -1
                else:
                    continue
                if bland:
                    enter, direction = k, dirn
                    break
                if score > best:
                    enter, direction, best = k, dirn, score
            if enter < 0:
                return OPTIMAL
            alpha = np.linalg.solve(B, full[:, enter]) if m else np.zeros(0)
            step = hi[enter] - lo[enter]
            leave_pos, leave_bound, leave_rate = -1, None, 0.0
            # tiny pivots make the next basis near singular
            piv_tol = 1e-9 * max(1.0, float(np.abs(alpha).max(initial=0.0)))
            for pos, k in enumerate(basis):
                rate = direction * alpha[pos]
                if rate > piv_tol and math.isfinite(lo[k]):
                    t = max((val[k] - lo[k]) / rate, 0.0)
                    bound = lo[k]
                elif rate < -piv_tol and math.isfinite(hi[k]):
                    t = max((hi[k] - val[k]) / -rate, 0.0)
                    bound = hi[k]
                else:
                    continue
                if t < step - 1e-12:
                    better = True
                elif leave_pos >= 0 and t <= step + 1e-12:
                    # ties: lowest index under Bland's rule, else the largest pivot
                    better = k < basis[leave_pos] if bland else abs(rate) > leave_rate
                else:
                    better = False
                if better:
                    step, leave_pos, leave_bound, leave_rate = min(t, step), pos, bound, abs(rate)
            if not math.isfinite(step):
                return UNBOUNDED
            degenerate = degenerate + 1 if step <= 1e-12 else 0
            if degenerate >= bland_after:
                bland = True
            val[enter] += direction * step
            if leave_pos < 0:
                continue  # bound flip
            k_out = basis[leave_pos]
            val[k_out] = leave_bound
            in_basis[k_out] = False
            in_basis[enter] = True
            basis[leave_pos] = enter

    allow = np.ones(N, dtype=bool)
    phase1 = np.concatenate([np.zeros(n + m), np.ones(m)])
    status = run(phase1, allow)
    if status != OPTIMAL:
        return LpResult(ERROR if status == ERROR else INFEASIBLE, iterations=iters)
    # each artificial is judged against the magnitude of its own row's terms
    terms = np.abs(A * val[:n]).max(axis=1, initial=0.0) if m else np.zeros(0)
    row_scale = 1.0 + np.maximum(terms, np.abs(val[n:n + m]))
    if np.any(val[n + m:] > 1e-9 * row_scale):
        return LpResult(INFEASIBLE, iterations=iters)
    hi[n + m:] = 0.0
    allow[n + m:] = False
    val[n + m:] = np.where(in_basis[n + m:], val[n + m:], 0.0)
    cost2 = np.concatenate([c, np.zeros(2 * m)])
    status = run(cost2, allow)
    if status != OPTIMAL:
        return LpResult(status, iterations=iters)
    x = val[:n].copy()
    return LpResult(OPTIMAL, x, float(c @ x), iters)


def reference_lp_oracle(A, row_lo, row_hi, lb, ub, c) -> LpResult:
    """Solve an LP with the dense bounded simplex; raises on failure."""
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if not (np.isfinite(lb).all() and np.isfinite(ub).all()):
        raise ValueError("every variable needs finite bounds")
    res = bounded_simplex(c, A, row_lo, row_hi, lb, ub)
    if res.status == INFEASIBLE:
        raise Infeasible("LP has no feasible point")
    if res.status == UNBOUNDED:
        raise Unbounded("LP objective unbounded below")
    if res.status != OPTIMAL:
        raise RuntimeError("simplex iteration limit reached")
    return res


# ---- node oracles --------------------------------------------------------

class LpOracle:
    """Solves the LP restricted to ``active`` rows under column bounds."""

    name = "abstract"

    def __init__(self, data: LpData):
        self.data = data

    def solve(self, active, lb, ub) -> LpResult:
        raise NotImplementedError


class ReferenceLpOracle(LpOracle):
    name = "reference"

    def solve(self, active, lb, ub) -> LpResult:
        rows = np.flatnonzero(active)
        A = self.data.dense(rows)
        return bounded_simplex(self.data.c, A, self.data.row_lo[rows], self.data.row_hi[rows], lb, ub)


class HighsLpOracle(LpOracle):
    name = "highs"

    def __init__(self, data: LpData):
        super().__init__(data)
        import highspy

        self._hs = highspy
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("presolve", "off")
        h.setOptionValue("solver", "simplex")
        h.setOptionValue("threads", 1)
        h.setOptionValue("random_seed", 0)
        h.setOptionValue("primal_feasibility_tolerance", 1e-9)
        h.setOptionValue("dual_feasibility_tolerance", 1e-9)
        lp = highspy.HighsLp()
        lp.num_col_ = data.n_cols
        lp.num_row_ = data.n_rows
        lp.col_cost_ = np.asarray(data.c, dtype=float)
        lp.col_lower_ = np.asarray(data.lb, dtype=float)
        lp.col_upper_ = np.asarray(data.ub, dtype=float)
        inf = highspy.kHighsInf
        self._inf = inf
        lp.row_lower_ = np.full(data.n_rows, -inf)
        lp.row_upper_ = np.full(data.n_rows, inf)
        lp.a_matrix_.format_ = highspy.MatrixFormat.kRowwise
        lp.a_matrix_.start_ = np.asarray(data.indptr, dtype=np.int32)
        lp.a_matrix_.index_ = np.asarray(data.indices, dtype=np.int32)
        lp.a_matrix_.value_ = np.asarray(data.data, dtype=float)
        lp.a_matrix_.num_col_ = data.n_cols
        lp.a_matrix_.num_row_ = data.n_rows
        h.passModel(lp)
        self.h = h
        self._active = np.zeros(data.n_rows, dtype=bool)
        self._lb = np.asarray(data.lb, dtype=float).copy()
        self._ub = np.asarray(data.ub, dtype=float).copy()

    def _finite(self, arr):
        return np.clip(arr, -self._inf, self._inf)

    def solve(self, active, lb, ub) -> LpResult:
        active = np.asarray(active, dtype=bool)
        changed = np.flatnonzero(active != self._active)
        if changed.size:
            lo = np.where(active[changed], self._finite(self.data.row_lo[changed]), -self._inf)
            hi = np.where(active[changed], self._finite(self.data.row_hi[changed]), self._inf)
            self.h.changeRowsBounds(len(changed), changed.astype(np.int32), lo, hi)
            self._active = active.copy()
        lb = np.asarray(lb, dtype=float)
        ub = np.asarray(ub, dtype=float)
        cols = np.flatnonzero((lb != self._lb) | (ub != self._ub))
        if cols.size:
            self.h.changeColsBounds(len(cols), cols.astype(np.int32), lb[cols], ub[cols])
            self._lb = lb.copy()
            self._ub = ub.copy()
        res = self._run()
        if res.status == ERROR:
            # fall back to a cold start once
            self.h.clearSolver()
            res = self._run()
        return res

    def _run(self) -> LpResult:
        hs = self._hs
        self.h.run()
        status = self.h.getModelStatus()
        iters = int(self.h.getInfo().simplex_iteration_count)
        if status == hs.HighsModelStatus.kOptimal:
            x = np.array(self.h.getSolution().col_value, dtype=float)
            return LpResult(OPTIMAL, x, float(self.data.c @ x), iters)
        if status == hs.HighsModelStatus.kInfeasible:
            return LpResult(INFEASIBLE, iterations=iters)
        if status in (hs.HighsModelStatus.kUnbounded, hs.HighsModelStatus.kUnboundedOrInfeasible):
            return LpResult(UNBOUNDED, iterations=iters)
        return LpResult(ERROR, iterations=iters)


ORACLES = {"highs": HighsLpOracle, "reference": ReferenceLpOracle}
