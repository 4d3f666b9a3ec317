"""Branch-and-bound over LP relaxations with lazy rows and user cuts.

Modes:

* ``REFO``  every row of the formulation is in the LP from the start;
* ``OA``    Fortet rows and the McCormick rows of ``tau`` start in a lazy
  pool and are put back only when an integral LP point violates them;
* ``OA_BC`` as ``OA`` plus the optimality cuts ``gamma^1 + gamma^2 = x``
  in the lazy pool and the valid inequalities VI3/VI4 separated at
  fractional nodes.

Rows moved from a pool into the LP stay there for every later node.
"""
from __future__ import annotations

import heapq
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import Infeasible, NoFractionalVar, OracleFailure, RowInfeasible, UnstableQueue
from .lp import INFEASIBLE, OPTIMAL, ORACLES, lp_data_from_model
from .milp import INTEGRALITY_TOL, LinearizedModel, design_from_point
from .model import Design, check_feasible
from .queueing import average_response, service_moments

MODES = ("REFO", "OA", "OA_BC")


def normalize_mode(mode: str) -> str:
    key = str(mode).upper().replace("-", "_").replace("&", "")
    if key == "OABC":
        key = "OA_BC"
    if key not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    return key


@dataclass
class SolveParams:
    gap_tol: float = 1e-4
    time_limit: float | None = None
    node_limit: int | None = None
    lp: str = "highs"
    lazy_tol: float = 1e-7
    cut_tol: float = 1e-7
    verify_tol: float = 1e-6
    max_cut_rounds: int = 100
    trace: bool = False


@dataclass
class SolveReport:
    status: str
    mode: str
    design: Design | None
    objective: float
    lower_bound: float
    gap: float
    nodes: int
    lazy_reinstated: int
    user_cuts_applied: int
    lp_solves: int
    wall_time: float
    trace: list = field(default_factory=list)

    def to_dict(self, with_trace=False) -> dict:
        out = asdict(self)
        out["design"] = self.design.to_dict() if self.design is not None else None
        if not with_trace:
            out.pop("trace")
        for key in ("objective", "lower_bound", "gap"):
            if not math.isfinite(out[key]):
                out[key] = None
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=2, **kw)


def _violated(model: LinearizedModel, point, pool, tol, normalize=False):
    if len(pool) == 0:
        return []
    ids = np.fromiter(pool, dtype=np.int64)
    viol = model.violation(point, ids)
    if normalize:
        norms = np.array([max(1.0, max(abs(v) for v in model.rows[k].val)) for k in ids])
        viol = viol / norms
    return sorted(int(k) for k in ids[viol > tol])


def separate_lazy(model: LinearizedModel, point, lazy_pool, tol=1e-7) -> list:
    """Lazy rows violated by ``point`` beyond ``tol`` (absolute)."""
    return _violated(model, point, lazy_pool, tol)


def separate_usercuts(model: LinearizedModel, point, usercut_pool, tol=1e-7) -> list:
    """User cuts violated beyond ``tol`` once each row is divided by its
    largest coefficient (for VI3 this is ``U / Ubar`` against ``gamma``)."""
    return _violated(model, point, usercut_pool, tol, normalize=True)


def branch(point, binary_idx):
    """Most fractional binary (ties to the lowest index) and its two fixings."""
    point = np.asarray(point, dtype=float)
    best, best_score = -1, INTEGRALITY_TOL
    for k in binary_idx:
        f = point[k] - math.floor(point[k])
        score = min(f, 1.0 - f)
        if score > best_score:
            best, best_score = int(k), score
    if best < 0:
        raise NoFractionalVar("point is integral on every binary")
    return best, ((best, 0.0),), ((best, 1.0),)


def _is_integral(point, binary_idx) -> bool:
    vals = point[binary_idx]
    return bool(np.all(np.abs(vals - np.round(vals)) <= INTEGRALITY_TOL))


def solve(model: LinearizedModel, mode: str = "OA_BC", params: SolveParams | None = None, **overrides) -> SolveReport:
    """Minimize the linearized average response.

    Returns a report with status ``OPTIMAL``, ``TIME_LIMIT`` or
    ``NODE_LIMIT``; raises ``Infeasible`` when the tree is exhausted with
    no incumbent.
    """
    params = params or SolveParams()
    for k, v in overrides.items():
        setattr(params, k, v)
    mode = normalize_mode(mode)
    t0 = time.perf_counter()
    inst = model.instance
    moments = service_moments(inst)
    data = lp_data_from_model(model)
    oracle = ORACLES[params.lp](data)
    binaries = model.vars.binary_indices()

    active = np.zeros(model.n_rows, dtype=bool)
    active[list(model.core)] = True
    lazy: set = set()
    user: set = set()
    if mode in ("OA", "OA_BC"):
        active[list(model.lazy_pool)] = False
        lazy = set(model.lazy_pool)
    if mode == "OA_BC":
        lazy |= set(model.vi5_rows)
        user = set(model.usercut_pool)

    base_lb, base_ub = data.lb.copy(), data.ub.copy()
    heap = [(-math.inf, 0, 0, ())]
    seq = 1
    upper = math.inf
    incumbent = None
    pruned_bound = math.inf
    nodes = lp_solves = lazy_count = cut_count = 0
    trace = []
    status = "OPTIMAL"

    def prune_level(ub):
        return ub - params.gap_tol * abs(ub) if math.isfinite(ub) else math.inf

    while heap:
        if params.time_limit is not None and time.perf_counter() - t0 > params.time_limit:
            status = "TIME_LIMIT"
            break
        if params.node_limit is not None and nodes >= params.node_limit:
            status = "NODE_LIMIT"
            break
        bound, negdepth, _, fixes = heapq.heappop(heap)
        if bound >= upper:
            continue
        if bound >= prune_level(upper):
            pruned_bound = min(pruned_bound, bound)
            continue
        node_id = nodes
        nodes += 1
        lb = base_lb.copy()
        ub = base_ub.copy()
        for k, v in fixes:
            lb[k] = ub[k] = v
        rounds = 0
        while True:
            res = oracle.solve(active, lb, ub)
            lp_solves += 1
            if res.status == INFEASIBLE:
                action = "infeasible"
                break
            if res.status != OPTIMAL:
                raise OracleFailure(f"LP engine returned {res.status} at node {node_id}", {"node": node_id})
            x = res.x
            obj = max(res.objective, bound)
            if obj >= upper:
                action = "pruned"
                break
            if obj >= prune_level(upper):
                pruned_bound = min(pruned_bound, obj)
                action = "pruned_gap"
                break
            integral = _is_integral(x, binaries)
            if not integral and user and rounds < params.max_cut_rounds:
                cuts = separate_usercuts(model, x, user, params.cut_tol)
                if cuts:
                    active[cuts] = True
                    user.difference_update(cuts)
                    cut_count += len(cuts)
                    rounds += 1
                    continue
            if integral:
                viol = separate_lazy(model, x, lazy, params.lazy_tol)
                if viol:
                    active[viol] = True
                    lazy.difference_update(viol)
                    lazy_count += len(viol)
                    continue
                design, value = _verify(model, moments, x, params.verify_tol, node_id)
                if value < upper:
                    upper = value
                    incumbent = design
                    action = "incumbent"
                else:
                    action = "integral"
                break
            var, down, up = branch(x, binaries)
            for fix in (down, up):
                heapq.heappush(heap, (obj, negdepth - 1, seq, fixes + fix))
                seq += 1
            action = f"branch {model.vars.names[var]}={x[var]:.6g}"
            break
        if params.trace:
            trace.append(f"{node_id} {bound:.12g} {action} {upper:.12g}")

    open_bounds = [h[0] for h in heap if h[0] < upper]
    lower = min([upper, pruned_bound] + open_bounds)
    if incumbent is None:
        if status == "OPTIMAL":
            raise Infeasible("no feasible design")
        gap = math.inf
    else:
        gap = max(0.0, (upper - lower) / abs(upper)) if upper != 0 else 0.0
    return SolveReport(
        status=status,
        mode=mode,
        design=incumbent,
        objective=upper,
        lower_bound=lower,
        gap=gap,
        nodes=nodes,
        lazy_reinstated=lazy_count,
        user_cuts_applied=cut_count,
        lp_solves=lp_solves,
        wall_time=time.perf_counter() - t0,
        trace=trace,
    )


def _verify(model, moments, x, tol, node_id):
    """Design of an integral point, checked against the queueing evaluator."""
    inst = model.instance
    try:
        design = design_from_point(model, x)
    except RowInfeasible as exc:
        raise OracleFailure(f"integral point at node {node_id} breaks a row: {exc}", {"node": node_id}) from exc
    linear = model.objective(x)
    viol = check_feasible(inst, design)
    try:
        value = average_response(inst, moments, design).avg_resp
    except UnstableQueue as exc:
        value = math.inf
        viol = viol or [str(exc)]
    if viol or abs(linear - value) > tol * max(1.0, abs(value)):
        raise OracleFailure(
            f"linear objective {linear!r} disagrees with evaluator {value!r} at node {node_id}",
            {"node": node_id, "linear": linear, "evaluated": value, "design": design.to_dict(), "violations": [str(v) for v in viol]},
        )
    return design, value

