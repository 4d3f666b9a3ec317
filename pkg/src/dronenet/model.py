"""Problem instance, geometry and design representation.

All quantities use one unit system: seconds, meters, arrivals per second.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidCoordinate, InvalidParam, UncoverableDemand

# WGS-84 reference ellipsoid
WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)


def latlon_to_ecef(lat: float, lon: float) -> tuple[float, float, float]:
    """Earth-centered earth-fixed coordinates (meters) of a point at zero height."""
    if not (-90.0 <= lat <= 90.0) or not math.isfinite(lat):
        raise InvalidCoordinate(f"latitude {lat} outside [-90, 90]")
    if not (-180.0 <= lon <= 180.0) or not math.isfinite(lon):
        raise InvalidCoordinate(f"longitude {lon} outside [-180, 180]")
    phi = math.radians(lat)
    lam = math.radians(lon)
    sin_phi = math.sin(phi)
    n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * sin_phi * sin_phi)
    return (
        n * math.cos(phi) * math.cos(lam),
        n * math.cos(phi) * math.sin(lam),
        n * (1.0 - WGS84_E2) * sin_phi,
    )


@dataclass(frozen=True)
class GeoPoint:
    latitude: float
    longitude: float
    ecef: tuple[float, float, float] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "ecef", latlon_to_ecef(self.latitude, self.longitude))


@dataclass(frozen=True)
class DemandPoint:
    id: str
    location: GeoPoint
    lam: float
    xi_mean: float
    xi_second_moment: float | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidParam(f"demand {self.id}: arrival rate must be positive")
        if not self.xi_mean > 0:
            raise InvalidParam(f"demand {self.id}: non-travel time mean must be positive")
        if self.xi_second_moment is None:
            # deterministic non-travel time unless told otherwise
            object.__setattr__(self, "xi_second_moment", self.xi_mean * self.xi_mean)
        elif self.xi_second_moment < self.xi_mean * self.xi_mean * (1.0 - 1e-12):
            raise InvalidParam(f"demand {self.id}: second moment below squared mean")


@dataclass(frozen=True)
class CandidateBase:
    id: str
    location: GeoPoint


DEFAULT_PARAMS = {
    "v": 27.8,
    "beta": 2.0,
    "r": 5000.0,
    "p": 11,
    "q": 10,
    "M": 2,
    "epsilon_ss": 1e-4,
    "rho_cap": 0.95,
}


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Instance:
    """Immutable network design instance.

    ``d[i, j]`` is the ECEF distance between demand ``i`` and base ``j``;
    ``J[i]`` lists the bases within radius ``r`` of demand ``i`` and ``I[j]``
    the demands within radius of base ``j``.
    """

    demands: tuple[DemandPoint, ...]
    bases: tuple[CandidateBase, ...]
    v: float
    beta: float
    r: float
    p: int
    q: int
    M: int
    epsilon_ss: float
    rho_cap: float
    d: np.ndarray
    J: tuple[tuple[int, ...], ...]
    I: tuple[tuple[int, ...], ...]
    lam: np.ndarray
    xi_mean: np.ndarray
    xi_second: np.ndarray

    @property
    def n_demands(self) -> int:
        return len(self.demands)

    @property
    def n_bases(self) -> int:
        return len(self.bases)

    @property
    def total_rate(self) -> float:
        return float(self.lam.sum())

    def steady_cap(self, K: int) -> float:
        """Largest offered load a base with ``K`` drones may carry."""
        if K <= 0:
            return 0.0
        return min(K - self.epsilon_ss, self.rho_cap * K)

    def replace(self, **changes) -> "Instance":
        params = {k: getattr(self, k) for k in DEFAULT_PARAMS}
        params.update({k: v for k, v in changes.items() if k in DEFAULT_PARAMS})
        demands = changes.get("demands", self.demands)
        bases = changes.get("bases", self.bases)
        return build_instance(demands, bases, params)


def distance_matrix(demands: Sequence[DemandPoint], bases: Sequence[CandidateBase]) -> np.ndarray:
    a = np.array([dp.location.ecef for dp in demands], dtype=float).reshape(-1, 3)
    b = np.array([cb.location.ecef for cb in bases], dtype=float).reshape(-1, 3)
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def build_instance(
    demands: Iterable[DemandPoint],
    bases: Iterable[CandidateBase],
    params: Mapping | None = None,
    **overrides,
) -> Instance:
    demands = tuple(demands)
    bases = tuple(bases)
    if not demands:
        raise InvalidParam("at least one demand point is required")
    if not bases:
        raise InvalidParam("at least one candidate base is required")
    ids = [b.id for b in bases]
    if len(set(ids)) != len(ids):
        raise InvalidParam("candidate base ids must be distinct")

    merged = dict(DEFAULT_PARAMS)
    merged.update(params or {})
    merged.update(overrides)
    unknown = set(merged) - set(DEFAULT_PARAMS)
    if unknown:
        raise InvalidParam(f"unknown parameters {sorted(unknown)}")
    for key in ("v", "beta", "r", "epsilon_ss", "rho_cap"):
        if not merged[key] > 0:
            raise InvalidParam(f"{key} must be positive, got {merged[key]}")
    for key in ("p", "q", "M"):
        val = merged[key]
        if int(val) != val or val < 1:
            raise InvalidParam(f"{key} must be a positive integer, got {val}")
        merged[key] = int(val)
    if merged["q"] > len(bases):
        raise InvalidParam(f"q={merged['q']} exceeds the number of candidate bases")
    if merged["p"] < merged["q"]:
        raise InvalidParam("p must be at least q")
    if merged["rho_cap"] > 1.0:
        raise InvalidParam("rho_cap must not exceed 1")

    d = distance_matrix(demands, bases)
    within = d <= merged["r"]
    J = tuple(tuple(int(j) for j in np.flatnonzero(within[i])) for i in range(len(demands)))
    for i, Ji in enumerate(J):
        if not Ji:
            raise UncoverableDemand(demands[i].id)
    I = tuple(tuple(int(i) for i in np.flatnonzero(within[:, j])) for j in range(len(bases)))

    return Instance(
        demands=demands,
        bases=bases,
        d=_readonly(d),
        J=J,
        I=I,
        lam=_readonly(np.array([dp.lam for dp in demands], dtype=float)),
        xi_mean=_readonly(np.array([dp.xi_mean for dp in demands], dtype=float)),
        xi_second=_readonly(np.array([dp.xi_second_moment for dp in demands], dtype=float)),
        **merged,
    )


@dataclass(frozen=True)
class Design:
    """Open bases ``x``, drone counts ``K`` and the assignment ``y[i] = j``.

    ``gamma[j][m-1]`` is the one-hot encoding of ``K[j] == m``.
    """

    x: tuple[bool, ...]
    K: tuple[int, ...]
    y: tuple[int, ...]
    gamma: tuple[tuple[bool, ...], ...]

    @classmethod
    def from_counts(cls, K: Sequence[int], y: Sequence[int], M: int) -> "Design":
        K = tuple(int(k) for k in K)
        gamma = tuple(tuple(k == m for m in range(1, M + 1)) for k in K)
        return cls(x=tuple(k > 0 for k in K), K=K, y=tuple(int(j) for j in y), gamma=gamma)

    @property
    def open_bases(self) -> list[int]:
        return [j for j, xj in enumerate(self.x) if xj]

    def to_dict(self) -> dict:
        return {
            "x": [int(v) for v in self.x],
            "K": list(self.K),
            "y": list(self.y),
            "gamma": [[int(g) for g in row] for row in self.gamma],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Design":
        return cls(
            x=tuple(bool(v) for v in data["x"]),
            K=tuple(int(v) for v in data["K"]),
            y=tuple(int(v) for v in data["y"]),
            gamma=tuple(tuple(bool(g) for g in row) for row in data["gamma"]),
        )


@dataclass(frozen=True)
class Violation:
    kind: str
    where: tuple = ()

    def __str__(self):
        return f"{self.kind}{self.where}"


def base_load(instance: Instance, y: Sequence[int], j: int) -> float:
    """Offered load (rate times mean service time) routed to base ``j``."""
    s = instance.beta * instance.d[:, j] / instance.v + instance.xi_mean
    return float(sum(instance.lam[i] * s[i] for i in range(instance.n_demands) if y[i] == j))


def check_feasible(instance: Instance, design: Design) -> list[Violation]:
    """Return every violated structural or steady-state condition of ``design``."""
    nJ, nI, M = instance.n_bases, instance.n_demands, instance.M
    if len(design.x) != nJ or len(design.K) != nJ or len(design.y) != nI or len(design.gamma) != nJ:
        return [Violation("DimensionMismatch")]
    out: list[Violation] = []
    for i, j in enumerate(design.y):
        if j not in instance.J[i]:
            out.append(Violation("AssignmentOutOfRange", (i, j)))
        elif not design.x[j]:
            out.append(Violation("AssignedToClosedBase", (i, j)))
    if sum(design.x) > instance.q:
        out.append(Violation("TooManyBases", (sum(design.x), instance.q)))
    for j in range(nJ):
        k = design.K[j]
        lo, hi = (1, M) if design.x[j] else (0, 0)
        if not lo <= k <= hi:
            out.append(Violation("DroneCountRange", (j, k)))
        g = design.gamma[j]
        if len(g) != M or sum(g) > 1 or sum((m + 1) * int(b) for m, b in enumerate(g)) != k:
            out.append(Violation("GammaInconsistent", (j,)))
    total = sum(design.K)
    if total != instance.p:
        if total < instance.p:
            out.append(Violation("FleetNotFullyDeployed", (total, instance.p)))
        else:
            out.append(Violation("FleetOverDeployed", (total, instance.p)))
    for j in range(nJ):
        if not design.x[j]:
            continue
        load = base_load(instance, design.y, j)
        if load > instance.steady_cap(design.K[j]) + 1e-12:
            out.append(Violation("SteadyState", (j,)))
    return out
