"""Closed-form M/G/K metrics for a fixed network design.

Each open base is an M/G/K queue whose arrival rate and service-time
moments depend on which demands are assigned to it.  The mean queueing
delay uses the Nozaki-Ross approximation, which is exact for exponential
service and reduces to Pollaczek-Khinchine for a single server.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyBase, InvalidCapacity, UnstableQueue
from .model import Design, Instance


@dataclass(frozen=True)
class ServiceMoments:
    s_ij_mean: np.ndarray    # seconds, |I| x |J|
    s_ij_second: np.ndarray  # seconds^2, |I| x |J|


@dataclass(frozen=True)
class QueueMetrics:
    eta: np.ndarray      # per-second arrival rate at each base
    s_mean: np.ndarray   # E[S_j]
    s_second: np.ndarray # E[S_j^2]
    wq: np.ndarray       # E[Q_j], seconds
    resp: np.ndarray     # E[R_i], seconds
    avg_resp: float      # demand-weighted average response

    @property
    def rho(self) -> np.ndarray:
        return self.eta * self.s_mean


def service_moments(instance: Instance) -> ServiceMoments:
    """Per-pair service moments with deterministic travel and independent non-travel time."""
    travel = instance.beta * instance.d / instance.v
    xi = instance.xi_mean[:, None]
    mean = travel + xi
    second = travel * travel + 2.0 * travel * xi + instance.xi_second[:, None]
    return ServiceMoments(mean, second)


def base_moments(instance: Instance, moments: ServiceMoments, design: Design, j: int):
    """Arrival rate and rate-weighted service moments of base ``j``."""
    members = [i for i, yi in enumerate(design.y) if yi == j]
    if not members:
        raise EmptyBase(f"base {j} has no assigned demand")
    lam = instance.lam[members]
    eta = float(lam.sum())
    s1 = float(lam @ moments.s_ij_mean[members, j]) / eta
    s2 = float(lam @ moments.s_ij_second[members, j]) / eta
    return eta, s1, s2


def delay_factor(rho: float, K: int) -> float:
    """Queueing delay per unit of ``eta * E[S^2]`` for offered load ``rho``.

    The series terms ``rho**n / n!`` are accumulated iteratively so that no
    factorial is ever formed.
    """
    term = 1.0  # rho**n / n!
    series = 0.0
    for n in range(K):
        series += term
        if n < K - 1:
            term = term * rho / (n + 1)
    # term == rho**(K-1) / (K-1)!
    gap = K - rho
    tail = term * rho / gap  # rho**K / ((K-1)! (K - rho))
    return term / (2.0 * gap * gap * (series + tail))


def mgk_delay(eta: float, s_mean: float, s_second: float, K: int) -> float:
    """Mean wait in queue of an M/G/K system (Nozaki-Ross form)."""
    if K < 1 or int(K) != K:
        raise InvalidCapacity(f"capacity must be a positive integer, got {K}")
    K = int(K)
    if eta == 0.0:
        return 0.0
    rho = eta * s_mean
    if rho >= K:
        raise UnstableQueue(rho, K)
    return eta * s_second * delay_factor(rho, K)


def average_response(instance: Instance, moments: ServiceMoments, design: Design) -> QueueMetrics:
    """Per-demand expected response and the network average for ``design``.

    Raises ``UnstableQueue`` when an open base is loaded at or above its
    capacity.
    """
    nJ = instance.n_bases
    eta = np.zeros(nJ)
    s1 = np.zeros(nJ)
    s2 = np.zeros(nJ)
    wq = np.zeros(nJ)
    for j in range(nJ):
        if not design.x[j]:
            continue
        try:
            eta[j], s1[j], s2[j] = base_moments(instance, moments, design, j)
        except EmptyBase:
            continue
        wq[j] = mgk_delay(eta[j], s1[j], s2[j], design.K[j])
    idx = np.arange(instance.n_demands)
    y = np.asarray(design.y, dtype=int)
    resp = wq[y] + instance.d[idx, y] / instance.v
    avg = float(instance.lam @ resp) / instance.total_rate
    return QueueMetrics(eta, s1, s2, wq, resp, avg)


def evaluate(instance: Instance, design: Design, moments: ServiceMoments | None = None) -> float:
    """Average response of ``design``; ``inf`` when some base is unstable."""
    if moments is None:
        moments = service_moments(instance)
    try:
        return average_response(instance, moments, design).avg_resp
    except UnstableQueue:
        return math.inf


def erlang_c_wait(lam: float, mean_service: float, K: int) -> float:
    """Exact M/M/K mean wait computed from the stationary distribution."""
    a = lam * mean_service
    if a >= K:
        raise UnstableQueue(a, K)
    head = sum(a**n / math.factorial(n) for n in range(K))
    last = a**K / math.factorial(K) * K / (K - a)
    p_wait = last / (head + last)
    return p_wait * mean_service / (K - a)
