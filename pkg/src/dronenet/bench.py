"""Mode-by-instance benchmark matrix and performance-profile output."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

from .errors import Infeasible
from .generators import scaling_instance
from .milp import linearize_M2
from .solver import MODES, SolveParams, normalize_mode, solve

PROFILE_FIELDS = ("mode", "instance", "status", "solved", "wall_time", "nodes", "objective", "cumulative_solved")


@dataclass
class BenchCell:
    mode: str
    instance: str
    status: str
    solved: bool
    wall_time: float
    nodes: int
    objective: float


def scaling_set(sizes=(20, 40, 60), per_size=None, seed=0, total=20):
    """Named scaling instances, spread as evenly as possible over ``sizes``."""
    if per_size is None:
        per_size = [total // len(sizes) + (k < total % len(sizes)) for k in range(len(sizes))]
    elif isinstance(per_size, int):
        per_size = [per_size] * len(sizes)
    out = []
    for n, count in zip(sizes, per_size):
        for k in range(count):
            s = seed * 100_003 + n * 1000 + k
            out.append((f"n{n}_s{k}", scaling_instance(s, n)))
    return out


def run_cell(name, instance, mode, time_limit=None, gap_tol=1e-4) -> BenchCell:
    model = linearize_M2(instance)
    try:
        rep = solve(model, mode, SolveParams(gap_tol=gap_tol, time_limit=time_limit))
    except Infeasible:
        return BenchCell(mode, name, "INFEASIBLE", True, math.nan, 0, math.inf)
    return BenchCell(mode, name, rep.status, rep.status == "OPTIMAL", rep.wall_time, rep.nodes, rep.objective)


def _run_star(args):
    return run_cell(*args)


def run_matrix(instances, modes=MODES, time_limit=None, gap_tol=1e-4, workers=1) -> list:
    """Solve every instance in every mode; cells are independent."""
    modes = [normalize_mode(m) for m in modes]
    jobs = [(name, inst, mode, time_limit, gap_tol) for mode in modes for name, inst in instances]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_star, jobs))
    return [_run_star(j) for j in jobs]


def performance_profile(cells) -> list:
    """One row per cell, with the mode's solved count up to that cell's time.

    Rows are ordered per mode by solve time, unsolved cells last, so the
    ``cumulative_solved`` column is a nondecreasing step curve.
    """
    rows = []
    for mode in dict.fromkeys(c.mode for c in cells):
        mine = [c for c in cells if c.mode == mode]
        mine.sort(key=lambda c: (not c.solved, c.wall_time if c.solved else math.inf, c.instance))
        count = 0
        for c in mine:
            count += int(c.solved)
            row = asdict(c)
            row["cumulative_solved"] = count
            rows.append(row)
    return rows


def write_profile_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=PROFILE_FIELDS)
        w.writeheader()
        for row in rows:
            w.writerow({k: row[k] for k in PROFILE_FIELDS})


def summary_text(cells) -> str:
    lines = [f"{'mode':<6} {'solved':>7} {'mean nodes':>11} {'mean time':>10}"]
    for mode in dict.fromkeys(c.mode for c in cells):
        mine = [c for c in cells if c.mode == mode]
        solved = sum(c.solved for c in mine)
        nodes = sum(c.nodes for c in mine) / len(mine)
        times = [c.wall_time for c in mine if c.solved and math.isfinite(c.wall_time)]
        mean_t = sum(times) / len(times) if times else math.nan
        lines.append(f"{mode:<6} {solved:>3}/{len(mine):<3} {nodes:>11.1f} {mean_t:>9.2f}s")
    return "\n".join(lines)
