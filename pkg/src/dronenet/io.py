"""Configuration, CSV ingestion and JSON serialization.

Everything read from disk is converted to seconds, meters and arrivals per
second here; the rest of the package never sees other units.
"""
from __future__ import annotations

import copy
import csv
import json
import math
import os
from dataclasses import dataclass
from datetime import datetime, timezone

from .errors import ConfigError, DataError, DronenetError
from .model import DEFAULT_PARAMS, CandidateBase, DemandPoint, Design, GeoPoint, build_instance
from .solver import MODES, normalize_mode

ENV_PREFIX = "DRONENET_"

# Full default template.  Every key the loader accepts appears here.
DEFAULT_CONFIG = {
    "instance": {
        "instance_json": None,        # bundled-style JSON instance; wins over the CSV paths
        "demands_csv": None,          # incidents: timestamp, latitude, longitude[, response_time_seconds]
        "bases_csv": None,            # candidate bases: id, latitude, longitude
        "merge_duplicates": False,    # fold incidents at identical coordinates into one demand
        "horizon_seconds": 365.0 * 86400.0,
        "xi_mean": 1500.0,            # non-travel busy time per request, seconds
        "xi_second_moment": None,     # None means deterministic
        **DEFAULT_PARAMS,
    },
    "solver": {
        "mode": "OA_BC",
        "gap_tol": 1e-4,
        "time_limit": None,
        "node_limit": None,
        "lp": "highs",
        "seed": 0,
    },
    "simulator": {
        "policy": "NEAREST",
        "replications": 1,
        "horizon_seconds": 30.0 * 86400.0,
        "takeoff": 10.0,
        "landing": 10.0,
        "xi_dist": "deterministic",
        "arrivals_csv": None,         # replay these instead of drawing Poisson requests
    },
    "analytics": {
        "drone_response_minutes": None,
        "ems_response_minutes": None,
        "overdoses_per_year": 560.0,
        "ohca_rate": 0.15,
        "kinds": ["BANDARA", "DEMAIO", "CHANTA"],
        "T": 11.4,
        "alpha_q": 0.85,
        "c": 0.03,
        "qaly_reference": 8.47,
        "n_drones": 11,
        "unit_price": 15000.0,
        "annual_maintenance": 3000.0,
        "lifespan_years": 4,
    },
}

_POSITIVE = ("v", "beta", "r", "epsilon_ss", "rho_cap", "horizon_seconds", "xi_mean")


@dataclass
class RunConfig:
    instance: dict
    solver: dict
    simulator: dict
    analytics: dict
    source: str | None = None
    explicit: frozenset = frozenset()   # instance keys set by file, environment or overrides

    def to_dict(self) -> dict:
        return {k: copy.deepcopy(getattr(self, k)) for k in DEFAULT_CONFIG}

    def instance_params(self) -> dict:
        return {k: self.instance[k] for k in DEFAULT_PARAMS}


def _parse_env_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _merge(base: dict, override: dict, where: str):
    for key, val in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {where}{key}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config key {where}{key} must be an object")
            _merge(base[key], val, f"{where}{key}.")
        else:
            base[key] = val


def env_overrides(environ=None) -> dict:
    """Config overrides from ``DRONENET_<SECTION>__<KEY>`` variables.

    Values are read as JSON when they parse, else as plain strings.
    """
    environ = os.environ if environ is None else environ
    out: dict = {}
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX) or "__" not in name:
            continue
        section, _, key = name[len(ENV_PREFIX):].partition("__")
        section, key = section.lower(), key.lower()
        if key == "m":
            key = "M"
        out.setdefault(section, {})[key] = _parse_env_value(raw)
    return out


def validate_config(cfg: dict):
    inst = cfg["instance"]
    for key in _POSITIVE:
        val = inst.get(key)
        if not isinstance(val, (int, float)) or isinstance(val, bool) or not val > 0:
            raise ConfigError(f"instance.{key} must be a positive number, got {val!r}")
    for key in ("p", "q", "M"):
        val = inst[key]
        if isinstance(val, bool) or not isinstance(val, int) or val < 1:
            raise ConfigError(f"instance.{key} must be a positive integer, got {val!r}")
    if inst["rho_cap"] > 1:
        raise ConfigError("instance.rho_cap must not exceed 1")
    try:
        cfg["solver"]["mode"] = normalize_mode(str(cfg["solver"]["mode"]))
    except ValueError as exc:
        raise ConfigError(f"solver.mode must be one of {MODES}") from exc
    tl = cfg["solver"]["time_limit"]
    if tl is not None and (not isinstance(tl, (int, float)) or not tl > 0):
        raise ConfigError("solver.time_limit must be positive or null")
    if str(cfg["simulator"]["policy"]).upper() not in ("NEAREST", "STATIC_ASSIGNMENT"):
        raise ConfigError("simulator.policy must be NEAREST or STATIC_ASSIGNMENT")
    for key in ("takeoff", "landing"):
        if not cfg["simulator"][key] >= 0:
            raise ConfigError(f"simulator.{key} must be nonnegative")
    if not 0 <= cfg["analytics"]["ohca_rate"] <= 1:
        raise ConfigError("analytics.ohca_rate must lie in [0, 1]")


def load_config(path=None, environ=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the JSON file, then environment variables, then ``overrides``."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config root must be an object")
        _merge(cfg, user, "")
        layers = [user]
    else:
        layers = []
    env = env_overrides(environ)
    _merge(cfg, env, "")
    layers.append(env)
    if overrides:
        _merge(cfg, overrides, "")
        layers.append(overrides)
    explicit = frozenset(k for layer in layers for k in layer.get("instance", {}))
    validate_config(cfg)
    base_dir = os.path.dirname(os.path.abspath(path)) if path else os.getcwd()
    for section, key in (("instance", "instance_json"), ("instance", "demands_csv"),
                         ("instance", "bases_csv"), ("simulator", "arrivals_csv")):
        val = cfg[section][key]
        if val and not os.path.isabs(val):
            cfg[section][key] = os.path.join(base_dir, val)
    return RunConfig(**cfg, source=str(path) if path else None, explicit=explicit)


def parse_timestamp(text: str) -> float:
    """Seconds since the epoch from an ISO 8601 string or a bare number."""
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _read_rows(path, required):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path} is empty", line=1)
        fields = [f.strip() for f in reader.fieldnames]
        missing = [c for c in required if c not in fields]
        if missing:
            raise DataError(f"{path} lacks columns {missing}", line=1)
        rows = []
        for row in reader:
            if None in row:
                raise DataError("too many fields", line=reader.line_num)
            row = {k.strip(): (v.strip() if isinstance(v, str) else v) for k, v in row.items()}
            if any(row[c] is None or row[c] == "" for c in required):
                raise DataError("missing field", line=reader.line_num)
            rows.append((reader.line_num, row))
    if not rows:
        raise DataError(f"{path} has no data rows", line=2)
    return rows


def _coord(row, line):
    try:
        return GeoPoint(float(row["latitude"]), float(row["longitude"]))
    except (ValueError, DronenetError) as exc:
        raise DataError(f"bad coordinate: {exc}", line=line) from exc


@dataclass
class OtrData:
    demands: list
    times: list                # incident time in seconds from the first incident
    latlons: list
    response_times: list | None  # historical response seconds, when present

    @property
    def total_rate(self) -> float:
        return sum(d.lam for d in self.demands)


def load_otr_csv(path, horizon, merge=False, xi_mean=1500.0, xi_second_moment=None) -> OtrData:
    """Demand points from an incident log.

    Each incident becomes a demand with rate ``1 / horizon``; with ``merge``
    incidents at identical coordinates collapse into one point whose rate is
    the sum.
    """
    if not horizon > 0:
        raise DataError("horizon must be positive")
    rows = _read_rows(path, ("timestamp", "latitude", "longitude"))
    has_resp = "response_time_seconds" in rows[0][1]
    stamps, latlons, resp = [], [], []
    for line, row in rows:
        try:
            stamps.append(parse_timestamp(row["timestamp"]))
        except ValueError as exc:
            raise DataError(f"bad timestamp {row['timestamp']!r}", line=line) from exc
        pt = _coord(row, line)
        latlons.append((pt.latitude, pt.longitude))
        if has_resp:
            raw = row.get("response_time_seconds") or ""
            try:
                val = float(raw) if raw else math.nan
            except ValueError as exc:
                raise DataError(f"bad response time {raw!r}", line=line) from exc
            if val < 0:
                raise DataError("negative response time", line=line)
            resp.append(val)
    t0 = min(stamps)
    rate = 1.0 / float(horizon)
    demands = []
    if merge:
        order, counts = [], {}
        for ll in latlons:
            if ll not in counts:
                order.append(ll)
                counts[ll] = 0
            counts[ll] += 1
        for n, ll in enumerate(order):
            demands.append(DemandPoint(f"D{n}", GeoPoint(*ll), counts[ll] * rate, xi_mean, xi_second_moment))
    else:
        for n, ll in enumerate(latlons):
            demands.append(DemandPoint(f"D{n}", GeoPoint(*ll), rate, xi_mean, xi_second_moment))
    return OtrData(demands, [s - t0 for s in stamps], latlons, resp if has_resp else None)


def load_bases_csv(path) -> list:
    rows = _read_rows(path, ("id", "latitude", "longitude"))
    bases, seen = [], set()
    for line, row in rows:
        if row["id"] in seen:
            raise DataError(f"duplicate base id {row['id']!r}", line=line)
        seen.add(row["id"])
        bases.append(CandidateBase(row["id"], _coord(row, line)))
    return bases


def load_arrivals_csv(path):
    """Replay times (seconds from the first request) and coordinates."""
    rows = _read_rows(path, ("timestamp_iso8601", "latitude", "longitude"))
    stamps, latlons = [], []
    for line, row in rows:
        try:
            stamps.append(parse_timestamp(row["timestamp_iso8601"]))
        except ValueError as exc:
            raise DataError(f"bad timestamp {row['timestamp_iso8601']!r}", line=line) from exc
        pt = _coord(row, line)
        latlons.append((pt.latitude, pt.longitude))
    t0 = min(stamps)
    return [s - t0 for s in stamps], latlons


def instance_to_dict(instance) -> dict:
    return {
        "params": {k: getattr(instance, k) for k in DEFAULT_PARAMS},
        "demands": [
            {"id": d.id, "latitude": d.location.latitude, "longitude": d.location.longitude,
             "lam": d.lam, "xi_mean": d.xi_mean, "xi_second_moment": d.xi_second_moment}
            for d in instance.demands
        ],
        "bases": [
            {"id": b.id, "latitude": b.location.latitude, "longitude": b.location.longitude}
            for b in instance.bases
        ],
    }


def instance_from_dict(data: dict, **overrides):
    try:
        demands = [
            DemandPoint(d["id"], GeoPoint(d["latitude"], d["longitude"]), d["lam"], d["xi_mean"],
                        d.get("xi_second_moment"))
            for d in data["demands"]
        ]
        bases = [CandidateBase(b["id"], GeoPoint(b["latitude"], b["longitude"])) for b in data["bases"]]
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed instance record: {exc}") from exc
    params = dict(data.get("params", {}))
    params.update(overrides)
    return build_instance(demands, bases, params)


def load_instance_json(path, **overrides):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc.msg}", line=exc.lineno) from exc
    return instance_from_dict(data.get("instance", data), **overrides)


def write_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, default=_json_default)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


def _json_default(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_design(design: Design, path):
    write_json({"design": design.to_dict()}, path)


def read_design(path) -> Design:
    try:
        with open(path) as fh:
            data = json.load(fh)
        return Design.from_dict(data.get("design", data))
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"cannot read design from {path}: {exc}") from exc
