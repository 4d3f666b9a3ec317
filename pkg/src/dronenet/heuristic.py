"""Greedy baseline: open the busiest bases, dispatch from the nearest."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidParam, UncoveredDemand
from .model import Design, Instance, check_feasible
from .queueing import evaluate


@dataclass(frozen=True)
class GreedyResult:
    design: Design
    avg_resp: float        # inf when some base is overloaded
    unstable_bases: tuple


def greedy_design(instance: Instance) -> Design:
    """Open the ``q`` bases covering the most requests and assign by distance.

    The top base gets two drones and every other open base one; drones left
    over after that go one at a time to the open bases in descending
    request-count order, cycling until the fleet is placed (never more than
    ``M`` per base).
    """
    nJ, q, p, M = instance.n_bases, instance.q, instance.p, instance.M
    if p > q * M:
        raise InvalidParam(f"cannot place {p} drones on {q} bases with at most {M} each")
    counts = [len(instance.I[j]) for j in range(nJ)]
    ranked = sorted(range(nJ), key=lambda j: (-counts[j], j))
    opened = ranked[:q]
    K = [0] * nJ
    for j in opened:
        K[j] = 1
    left = p - q
    while left > 0:
        for j in opened:
            if left == 0:
                break
            if K[j] < M:
                K[j] += 1
                left -= 1

    y = []
    missing = []
    for i in range(instance.n_demands):
        cands = [j for j in instance.J[i] if K[j] > 0]
        if not cands:
            missing.append(instance.demands[i].id)
            continue
        y.append(min(cands, key=lambda j: (instance.d[i, j], j)))
    if missing:
        raise UncoveredDemand(missing)
    return Design.from_counts(K, y, M)


def greedy(instance: Instance) -> GreedyResult:
    design = greedy_design(instance)
    unstable = tuple(v.where[0] for v in check_feasible(instance, design) if v.kind == "SteadyState")
    # a base above the steady-state cap counts as unstable, as in the optimizer
    value = float("inf") if unstable else evaluate(instance, design)
    return GreedyResult(design, value, unstable)
