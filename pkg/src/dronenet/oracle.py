"""Exhaustive search for the optimal design of a small instance.

The outer loop walks every set of open bases and every split of the fleet
over them; the inner depth-first search (compiled when available) walks the
assignments with stability and bound pruning.  Winners are re-scored with
``queueing.average_response`` so the reported value comes from the
canonical evaluator.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import BudgetExceeded, NoFeasibleDesign
from .model import Design, Instance
from .queueing import average_response, service_moments

TIE_RTOL = 1e-12


@dataclass
class EnumerationBudget:
    max_designs: int = 50_000_000
    evaluated: int = 0
    pruned: int = 0
    fleet_splits: int = 0


@dataclass(frozen=True)
class OracleResult:
    design: Design
    avg_resp: float
    evaluated: int
    pruned: int
    fleet_splits: int


def fleet_splits(instance: Instance):
    """Every ``(open set, K)`` pair satisfying the base budget and fleet size."""
    nJ, M, p = instance.n_bases, instance.M, instance.p
    for size in range(1, min(instance.q, nJ) + 1):
        for open_set in itertools.combinations(range(nJ), size):
            for counts in itertools.product(range(1, M + 1), repeat=size):
                if sum(counts) != p:
                    continue
                K = [0] * nJ
                for j, k in zip(open_set, counts):
                    K[j] = k
                yield open_set, tuple(K)


def enumerate_optimum(instance: Instance, budget: EnumerationBudget | None = None) -> OracleResult:
    """Exact minimizer of the average response over all feasible designs.

    Among designs whose objectives agree to 1e-12 relative the one with the
    lexicographically smallest ``(y, K)`` is returned.
    """
    if budget is None:
        budget = EnumerationBudget()
    moments = service_moments(instance)
    lam = instance.lam
    travel = instance.d / instance.v
    best_val = math.inf
    best_key = None
    for open_set, K in fleet_splits(instance):
        budget.fleet_splits += 1
        opts = [[j for j in Ji if K[j] > 0] for Ji in instance.J]
        if any(not o for o in opts):
            continue
        ptr = np.cumsum([0] + [len(o) for o in opts])
        idx = np.array([j for o in opts for j in o], dtype=np.int64)
        cap = [instance.steady_cap(k) for k in K]
        remaining = budget.max_designs - budget.evaluated
        val, y, leaves, pruned, exhausted = kernels.search_assignments(
            ptr, idx, lam, moments.s_ij_mean, moments.s_ij_second, travel, K, cap, remaining
        )
        budget.evaluated += leaves
        budget.pruned += pruned
        if exhausted:
            raise BudgetExceeded(f"more than {budget.max_designs} assignments")
        if not math.isfinite(val):
            continue
        key = (tuple(y), K)
        if best_key is None or val < best_val - TIE_RTOL * abs(best_val):
            best_val, best_key = val, key
        elif val <= best_val + TIE_RTOL * abs(best_val) and key < best_key:
            best_val, best_key = min(val, best_val), key
    if best_key is None:
        raise NoFeasibleDesign("no design satisfies coverage, fleet and stability")
    y, K = best_key
    design = Design.from_counts(K, y, instance.M)
    metrics = average_response(instance, moments, design)
    return OracleResult(design, metrics.avg_resp, budget.evaluated, budget.pruned, budget.fleet_splits)
