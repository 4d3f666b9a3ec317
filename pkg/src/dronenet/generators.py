"""Random instance generators used by tests, benchmarks and the CLI."""
from __future__ import annotations

import math

import numpy as np

from .model import CandidateBase, DemandPoint, GeoPoint, build_instance

CENTER = (36.85, -76.0)
M_PER_DEG_LAT = 111_000.0


def _offset(center, dx, dy):
    lat = center[0] + dy / M_PER_DEG_LAT
    lon = center[1] + dx / (M_PER_DEG_LAT * math.cos(math.radians(center[0])))
    return GeoPoint(lat, lon)


def random_instance(
    rng,
    n_demands,
    n_bases,
    p,
    q,
    M=2,
    extent=4000.0,
    r=3000.0,
    load_per_drone=0.35,
    xi_mean=1500.0,
    xi_scv=(0.0, 1.0),
    max_tries=200,
    **params,
):
    """Demands and bases scattered uniformly over an ``extent``-meter square.

    Arrival rates are scaled so the total offered load is about
    ``load_per_drone * p``.  Non-travel times have squared coefficient of
    variation drawn from ``xi_scv``.  Placements leaving a demand without a
    base in range are redrawn.
    """
    rng = np.random.default_rng(rng)
    for _ in range(max_tries):
        bxy = rng.uniform(0.0, extent, size=(n_bases, 2))
        dxy = rng.uniform(0.0, extent, size=(n_demands, 2))
        dist = np.linalg.norm(dxy[:, None, :] - bxy[None, :, :], axis=2)
        if (dist.min(axis=1) < 0.97 * r).all():
            break
    else:
        raise RuntimeError("could not place a coverable instance")
    return _assemble(rng, bxy, dxy, dist, p, q, M, r, load_per_drone, xi_mean, xi_scv, params)


def _assemble(rng, bxy, dxy, dist, p, q, M, r, load_per_drone, xi_mean, xi_scv, params):
    n_demands, n_bases = len(dxy), len(bxy)
    bases = [CandidateBase(f"B{j}", _offset(CENTER, *bxy[j])) for j in range(n_bases)]
    weights = rng.uniform(0.5, 1.5, size=n_demands)
    v = params.get("v", 27.8)
    beta = params.get("beta", 2.0)
    mean_service = xi_mean + beta * dist.min(axis=1) / v
    lam = weights / weights.sum() * load_per_drone * p / mean_service
    scv = rng.uniform(*xi_scv, size=n_demands)
    demands = [
        DemandPoint(f"D{i}", _offset(CENTER, *dxy[i]), float(lam[i]), xi_mean, xi_mean * xi_mean * (1.0 + scv[i]))
        for i in range(n_demands)
    ]
    return build_instance(demands, bases, p=p, q=q, M=M, r=r, **params)


def tiny_instance(rng, M=2):
    """Desk-check instance: 4-8 demands, 2-4 bases, at most 4 drones and 3 bases."""
    rng = np.random.default_rng(rng)
    nJ = int(rng.integers(2, 5))
    nI = int(rng.integers(4, 9))
    q = int(rng.integers(1, min(3, nJ) + 1))
    p = int(rng.integers(q, min(4, q * M) + 1))
    load = float(rng.uniform(0.2, 0.6))
    return random_instance(rng, nI, nJ, p, q, M=M, load_per_drone=load)


def scaling_instance(rng, n_demands, n_bases=None, M=2, r=1650.0, cell=2000.0, jitter=100.0):
    """Larger instance with sparse catchments for solver comparisons.

    Bases sit one per grid cell of side ``cell``, jittered by up to
    ``jitter`` per axis; catchments only overlap near cell borders.
    """
    rng = np.random.default_rng(rng)
    if n_bases is None:
        n_bases = max(4, n_demands // 8)
    q = n_bases
    p = q + 2
    if cell / math.sqrt(2.0) + jitter * math.sqrt(2.0) >= r:
        raise ValueError("catchment radius too small to cover each cell")
    cols = math.ceil(math.sqrt(n_bases))
    # one base per grid cell, jittered; every demand lies in some base's cell,
    # so it is within cell/sqrt(2) + jitter < r of that base
    centers = np.array([((k % cols + 0.5) * cell, (k // cols + 0.5) * cell) for k in range(n_bases)])
    bxy = centers + rng.uniform(-jitter, jitter, size=(n_bases, 2))
    home = rng.integers(0, n_bases, size=n_demands)
    dxy = centers[home] + rng.uniform(-cell / 2, cell / 2, size=(n_demands, 2))
    dist = np.linalg.norm(dxy[:, None, :] - bxy[None, :, :], axis=2)
    return _assemble(rng, bxy, dxy, dist, p, q, M, r, 0.3, 1500.0, (0.0, 1.0), {})
