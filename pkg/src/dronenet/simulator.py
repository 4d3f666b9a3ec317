"""Discrete-event simulation of drone dispatch for a fixed design.

Each open base ``j`` hosts ``K_j`` drones.  A request is served by the
nearest idle drone whose base lies within the catchment radius; otherwise
it waits in one network-wide FIFO queue.  When a drone frees up, the oldest
queued request that some idle drone can reach is dispatched.  A drone is
busy for ``takeoff + beta * d / v + landing + xi`` and the request's
response time is ``wait + takeoff + d / v + landing``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .model import Design, Instance, latlon_to_ecef
from .queueing import average_response, service_moments

NEAREST = "NEAREST"
STATIC_ASSIGNMENT = "STATIC_ASSIGNMENT"


@dataclass(frozen=True)
class Requests:
    """Time-ordered requests with their nearest demand point."""

    time: np.ndarray          # seconds from the start of the run
    ecef: np.ndarray          # (n, 3) meters
    demand: np.ndarray        # index of the demand point the request belongs to
    xi: np.ndarray            # non-travel busy time, seconds

    def __len__(self):
        return len(self.time)


@dataclass
class SimOutcome:
    wait: np.ndarray
    flight: np.ndarray
    response: np.ndarray
    base: np.ndarray          # serving base, -1 if unservable
    drone: np.ndarray
    arrival: np.ndarray
    served: int
    unservable: int
    queued_end: int
    queue_mean: float
    queue_max: int
    policy: str
    meta: dict = field(default_factory=dict)

    @property
    def served_mask(self) -> np.ndarray:
        return self.drone >= 0

    def summary(self) -> dict:
        r = self.response[self.served_mask]
        return {
            "policy": self.policy,
            "requests": int(len(self.arrival)),
            "served": self.served,
            "unservable": self.unservable,
            "queued_end": self.queued_end,
            "mean_response": float(r.mean()) if r.size else None,
            "median_response": float(np.median(r)) if r.size else None,
            "max_response": float(r.max()) if r.size else None,
            "mean_wait": float(self.wait[self.served_mask].mean()) if r.size else None,
            "queue_mean": self.queue_mean,
            "queue_max": self.queue_max,
            **self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["request", "arrival_s", "base", "drone", "wait_s", "flight_s", "response_s"])
            for k in range(len(self.arrival)):
                if self.drone[k] < 0:
                    w.writerow([k, f"{self.arrival[k]:.6f}", -1, -1, "", "", ""])
                else:
                    w.writerow([k, f"{self.arrival[k]:.6f}", int(self.base[k]), int(self.drone[k]),
                                f"{self.wait[k]:.6f}", f"{self.flight[k]:.6f}", f"{self.response[k]:.6f}"])


def _draw_xi(rng, mean, second, n, dist):
    mean = np.broadcast_to(np.asarray(mean, dtype=float), (n,))
    if dist == "deterministic":
        return mean.copy()
    if dist == "exponential":
        return rng.exponential(mean)
    if dist == "moments":
        # gamma law matching the first two moments; zero variance stays deterministic
        second = np.broadcast_to(np.asarray(second, dtype=float), (n,))
        scv = np.maximum(second / (mean * mean) - 1.0, 0.0)
        out = mean.copy()
        pos = scv > 1e-12
        if pos.any():
            shape = 1.0 / scv[pos]
            out[pos] = rng.gamma(shape, mean[pos] / shape)
        return out
    raise ValueError(f"unknown non-travel time law {dist!r}")


def poisson_requests(instance: Instance, horizon: float, seed=None, xi_dist="deterministic") -> Requests:
    """Independent Poisson streams at every demand point over ``[0, horizon)``."""
    rng = np.random.default_rng(seed)
    times, who = [], []
    for i, lam in enumerate(instance.lam):
        n = rng.poisson(lam * horizon)
        times.append(rng.uniform(0.0, horizon, size=n))
        who.append(np.full(n, i, dtype=np.int64))
    t = np.concatenate(times) if times else np.zeros(0)
    d = np.concatenate(who) if who else np.zeros(0, dtype=np.int64)
    order = np.lexsort((d, t))
    t, d = t[order], d[order]
    xi = _draw_xi(rng, instance.xi_mean[d], instance.xi_second[d], len(d), xi_dist)
    ecef = np.array([instance.demands[i].location.ecef for i in d], dtype=float).reshape(-1, 3)
    return Requests(t, ecef, d, xi)


def replay_requests(instance: Instance, times, latlons, xi=None, seed=None, xi_dist="deterministic") -> Requests:
    """Requests at explicit times and coordinates.

    Each request is tied to the nearest demand point, whose non-travel time
    moments it inherits unless ``xi`` is given.
    """
    times = np.asarray(times, dtype=float)
    order = np.argsort(times, kind="stable")
    times = times[order]
    ecef = np.array([latlon_to_ecef(la, lo) for la, lo in latlons], dtype=float).reshape(-1, 3)[order]
    dem = np.array([dp.location.ecef for dp in instance.demands], dtype=float)
    nearest = np.argmin(((ecef[:, None, :] - dem[None, :, :]) ** 2).sum(axis=2), axis=1) if len(ecef) else np.zeros(0, dtype=np.int64)
    if xi is None:
        rng = np.random.default_rng(seed)
        xi = _draw_xi(rng, instance.xi_mean[nearest], instance.xi_second[nearest], len(times), xi_dist)
    else:
        xi = np.asarray(xi, dtype=float)[order]
    return Requests(times, ecef, nearest.astype(np.int64), xi)


def drone_bases(design: Design) -> np.ndarray:
    """Home base of every drone, numbered base by base."""
    return np.array([j for j, k in enumerate(design.K) for _ in range(k)], dtype=np.int64)


def simulate(
    instance: Instance,
    design: Design,
    arrivals: Requests | None = None,
    rng_seed=None,
    horizon: float | None = None,
    policy: str = NEAREST,
    takeoff: float = 10.0,
    landing: float = 10.0,
    xi_dist: str = "deterministic",
) -> SimOutcome:
    """Run the dispatch simulation.

    With ``arrivals=None`` Poisson requests are drawn over ``horizon``
    seconds from ``rng_seed``.  Requests no open base can reach are counted
    as unservable and left out of every mean.
    """
    if arrivals is None:
        if horizon is None:
            raise ValueError("synthetic mode needs a horizon")
        arrivals = poisson_requests(instance, horizon, rng_seed, xi_dist)
    policy = policy.upper()
    if policy not in (NEAREST, STATIC_ASSIGNMENT):
        raise ValueError(f"unknown policy {policy!r}")
    homes = drone_bases(design)
    base_ecef = np.array([b.location.ecef for b in instance.bases], dtype=float)
    if len(homes):
        dist = np.sqrt(((arrivals.ecef[:, None, :] - base_ecef[homes][None, :, :]) ** 2).sum(axis=2))
    else:
        dist = np.zeros((len(arrivals), 0))
    dist = np.where(dist <= instance.r, dist, np.inf)
    if policy == STATIC_ASSIGNMENT:
        assigned = np.asarray(design.y, dtype=np.int64)[arrivals.demand]
        dist = np.where(homes[None, :] == assigned[:, None], dist, np.inf)
    dist = np.ascontiguousarray(dist)

    dispatch, drone, _, q_area, q_max, q_end = kernels.simulate_core(
        arrivals.time, dist, arrivals.xi, takeoff, landing, instance.v, instance.beta
    )
    served = drone >= 0
    n = len(arrivals)
    wait = np.full(n, np.nan)
    flight = np.full(n, np.nan)
    base = np.full(n, -1, dtype=np.int64)
    wait[served] = dispatch[served] - arrivals.time[served]
    flight[served] = dist[np.flatnonzero(served), drone[served]] / instance.v
    base[served] = homes[drone[served]]
    response = wait + takeoff + flight + landing
    end = float(arrivals.time[-1]) if n else 0.0
    return SimOutcome(
        wait=wait,
        flight=flight,
        response=response,
        base=base,
        drone=np.asarray(drone, dtype=np.int64),
        arrival=arrivals.time,
        served=int(served.sum()),
        unservable=int(n - served.sum() - q_end),
        queued_end=int(q_end),
        queue_mean=q_area / end if end > 0 else 0.0,
        queue_max=int(q_max),
        policy=policy,
        meta={"takeoff_s": takeoff, "landing_s": landing, "backend": kernels.BACKEND},
    )


def batch_means(values, n_batches=20, warmup=0.1):
    """Mean and batch-means standard error of a correlated output sequence."""
    values = np.asarray(values, dtype=float)
    values = values[int(len(values) * warmup):]
    if len(values) < 2 * n_batches:
        return float(values.mean()) if len(values) else math.nan, math.nan
    size = len(values) // n_batches
    means = values[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.mean()), float(means.std(ddof=1) / math.sqrt(n_batches))


@dataclass
class ValidationRecord:
    base: int
    served: int
    sim_wait: float
    sim_wait_se: float
    analytic_wait: float

    @property
    def z(self) -> float:
        if not self.sim_wait_se > 0:
            return math.inf if self.sim_wait != self.analytic_wait else 0.0
        return (self.sim_wait - self.analytic_wait) / self.sim_wait_se


@dataclass
class LongRunComparison:
    bases: list
    sim_response: float
    sim_response_se: float
    analytic_response: float
    served: int


def long_run_validate(instance: Instance, design: Design, horizon: float, seed=None, xi_dist="moments", n_batches=20) -> LongRunComparison:
    """Compare simulated waits with the closed-form delays.

    Requests go to their assigned base with no takeoff or landing time and
    non-travel times follow a gamma law matching each demand's two moments,
    so every base behaves as the M/G/K queue the formula describes.
    """
    out = simulate(instance, design, horizon=horizon, rng_seed=seed, policy=STATIC_ASSIGNMENT,
                   takeoff=0.0, landing=0.0, xi_dist=xi_dist)
    metrics = average_response(instance, service_moments(instance), design)
    records = []
    for j in design.open_bases:
        sel = (out.base == j)
        m, se = batch_means(out.wait[sel], n_batches)
        records.append(ValidationRecord(j, int(sel.sum()), m, se, float(metrics.wq[j])))
    served = out.served_mask
    m, se = batch_means(out.response[served], n_batches)
    return LongRunComparison(records, m, se, metrics.avg_resp, int(served.sum()))
