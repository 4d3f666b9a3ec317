"""Survival, lives saved, QALY and cost figures for a response-time scenario.

Times are in minutes at this boundary because the survival curves are
fitted in minutes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class SurvivalKind(str, Enum):
    BANDARA = "BANDARA"
    DEMAIO = "DEMAIO"
    CHANTA = "CHANTA"


def survival(kind, response_minutes) -> float:
    """Probability of surviving a cardiac arrest reached after ``response_minutes``."""
    kind = SurvivalKind(str(kind.value if isinstance(kind, SurvivalKind) else kind).upper())
    x = float(response_minutes)
    if x < 0:
        raise ValueError("response time must be nonnegative")
    if kind is SurvivalKind.BANDARA:
        return max(0.594 - 0.055 * x, 0.0)
    if kind is SurvivalKind.DEMAIO:
        return 1.0 / (1.0 + math.exp(0.679 + 0.262 * x))
    return 1.0 / (1.0 + math.exp(-0.015 + 0.245 * x))


def mean_survival(kind, response_minutes) -> float:
    """Survival averaged over a sample of response times."""
    vals = [survival(kind, x) for x in np.asarray(response_minutes, dtype=float).ravel()]
    return float(np.mean(vals)) if vals else math.nan


def expected_survivors(overdose_count, ohca_rate, kind, response_minutes) -> float:
    if not 0.0 <= ohca_rate <= 1.0:
        raise ValueError("ohca_rate must lie in [0, 1]")
    return float(overdose_count) * ohca_rate * survival(kind, response_minutes)


@dataclass(frozen=True)
class QalyParams:
    T: float = 11.4          # remaining life expectancy, years
    alpha_q: float = 0.85    # quality weight
    c: float = 0.03          # annual discount rate

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.c < 0:
            raise ValueError("discount rate must be nonnegative")
        if not 0.0 <= self.alpha_q <= 1.0:
            raise ValueError("alpha_q must lie in [0, 1]")


def annuity(years: int, c: float) -> float:
    """Present value of one unit paid at the end of each of ``years`` years."""
    return sum((1.0 + c) ** -t for t in range(1, int(years) + 1))


def t_qaly(params: QalyParams) -> float:
    """Discounted quality-adjusted years per survivor.

    Whole years are discounted as an end-of-year annuity and the final
    partial year is credited pro rata at the next year's discount factor.
    """
    whole = math.floor(params.T)
    frac = params.T - whole
    total = annuity(whole, params.c)
    if frac > 0:
        total += frac * (1.0 + params.c) ** -math.ceil(params.T)
    return params.alpha_q * total


def network_cost(n_drones, unit_price, annual_maintenance, lifespan_years, c) -> float:
    if min(n_drones, unit_price, annual_maintenance, lifespan_years, c) < 0:
        raise ValueError("cost inputs must be nonnegative")
    return n_drones * unit_price + n_drones * annual_maintenance * annuity(lifespan_years, c)


def cost_per_qaly(net_cost, additional_survivors_per_year, tq, lifespan_years) -> float:
    """Network cost per QALY gained; ``inf`` when nothing is gained."""
    denom = additional_survivors_per_year * lifespan_years * tq
    if denom <= 0:
        return math.inf
    return net_cost / denom


@dataclass
class AnalysisParams:
    overdoses_per_year: float = 560.0
    ohca_rate: float = 0.15
    kinds: tuple = ("BANDARA", "DEMAIO", "CHANTA")
    qaly: QalyParams = QalyParams()
    qaly_reference: float | None = 8.47   # published T-QALY used for the cost ratio when set
    n_drones: int = 11
    unit_price: float = 15000.0
    annual_maintenance: float = 3000.0
    lifespan_years: int = 4


def analyze(drone_minutes, ems_minutes, params: AnalysisParams | None = None, drone_samples=None, ems_samples=None) -> dict:
    """Survivor, QALY and cost tables comparing drone and ambulance response.

    Survival is evaluated at the mean response time; when response samples
    are given, a per-incident average is reported alongside.
    """
    params = params or AnalysisParams()
    tq_model = t_qaly(params.qaly)
    tq = params.qaly_reference if params.qaly_reference is not None else tq_model
    cost = network_cost(params.n_drones, params.unit_price, params.annual_maintenance, params.lifespan_years, params.qaly.c)
    ohca = params.overdoses_per_year * params.ohca_rate
    survivors, qalys, costs = [], [], []
    for kind in params.kinds:
        p_d = survival(kind, drone_minutes)
        p_e = survival(kind, ems_minutes)
        s_d = ohca * p_d
        s_e = ohca * p_e
        row = {
            "survival_function": kind,
            "drone_probability": p_d,
            "ems_probability": p_e,
            "drone_survivors": s_d,
            "ems_survivors": s_e,
            "ratio": s_d / s_e if s_e > 0 else math.inf,
        }
        if drone_samples is not None and ems_samples is not None:
            pd_i = mean_survival(kind, drone_samples)
            pe_i = mean_survival(kind, ems_samples)
            row["per_incident_drone_probability"] = pd_i
            row["per_incident_ems_probability"] = pe_i
            row["per_incident_ratio"] = pd_i / pe_i if pe_i > 0 else math.inf
        survivors.append(row)
        # survivor tables count whole people, so partial expected survivors are dropped
        extra = math.floor(s_d) - math.floor(s_e)
        qalys.append({
            "survival_function": kind,
            "drone_survivors": math.floor(s_d),
            "ems_survivors": math.floor(s_e),
            "additional_survivors_per_year": extra,
            "additional_survivors_expected": s_d - s_e,
            "qaly_per_year": extra * tq,
            "qaly_lifespan": extra * tq * params.lifespan_years,
        })
        costs.append({
            "survival_function": kind,
            "network_cost": cost,
            "cost_per_qaly": cost_per_qaly(cost, extra, tq, params.lifespan_years),
        })
    return {
        "inputs": {
            "drone_response_minutes": drone_minutes,
            "ems_response_minutes": ems_minutes,
            "ohca_per_year": ohca,
        },
        "survivors": survivors,
        "qaly": qalys,
        "cost": costs,
        "t_qaly": {
            "used": tq,
            "annuity_model": tq_model,
            "note": "annuity reading of the discounted QALY sum; the published 8.47 is used when qaly_reference is set",
        },
    }
