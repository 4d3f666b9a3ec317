"""Binary reformulation and MILP linearization of the network design problem.

The drone count at each base is expanded into one-hot binaries ``gamma``.
For each base and drone level ``m`` an auxiliary ``U[j,m]`` carries twice
the queueing delay the base would have with ``m`` drones; it is pinned by a
linear row once every product of a binary and a bounded continuous (or of
two binaries) is replaced by an exact McCormick/Fortet encoding.

``linearize_generalM`` handles any number of drone levels through the
multilinear expansion of the delay's denominator polynomial.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ComplexityWarning, DegenerateBound, NonIntegral, RowInfeasible
from .model import Design, Instance
from .queueing import ServiceMoments, delay_factor, service_moments

INTEGRALITY_TOL = 1e-6
ROW_TOL = 1e-6

CORE_FAMILIES_M2 = (
    "assign", "open", "budget", "steady", "link_lo", "link_hi", "fleet", "onelevel",
    "udef1", "udef2", "gate_hi", "gate_lo",
    "fortet", "mc_mu", "mc_tau", "mc_omega",
)
CORE_FAMILIES_GENERAL = (
    "assign", "open", "budget", "steady", "link_lo", "link_hi", "fleet", "onelevel",
    "vdef", "prod_bin", "prod_cont",
)
STRUCTURAL = ("assign", "open", "budget", "steady", "link_lo", "link_hi", "fleet", "onelevel")


@dataclass
class VarSpace:
    """Dense, disjoint column indices for every model variable."""

    names: list = field(default_factory=list)
    lb: list = field(default_factory=list)
    ub: list = field(default_factory=list)
    binary: list = field(default_factory=list)
    x: dict = field(default_factory=dict)       # j
    y: dict = field(default_factory=dict)       # (i, j)
    gamma: dict = field(default_factory=dict)   # (j, m)
    U: dict = field(default_factory=dict)       # (j, m)
    slack: dict = field(default_factory=dict)   # j, gated U^1 rows only
    mu: dict = field(default_factory=dict)      # (i, j, m)
    z: dict = field(default_factory=dict)       # (j, l, t)
    tau: dict = field(default_factory=dict)     # (j, l, t)
    omega: dict = field(default_factory=dict)   # (i, j, m)
    V: dict = field(default_factory=dict)       # (j, m)
    w: dict = field(default_factory=dict)       # (j, m, S)  V * prod y
    g: dict = field(default_factory=dict)       # (j, m, T)  gamma * prod y

    def add(self, name, lb, ub, binary=False) -> int:
        self.names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.binary.append(bool(binary))
        return len(self.names) - 1

    @property
    def n(self) -> int:
        return len(self.names)

    def binary_indices(self) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.binary, dtype=bool))


@dataclass(frozen=True)
class Row:
    family: str
    name: str
    idx: tuple
    val: tuple
    lo: float
    hi: float


class RowBuffer:
    def __init__(self):
        self.rows: list[Row] = []

    def add(self, family, name, terms, lo=-math.inf, hi=math.inf):
        # merge repeated columns so every row is a clean sparse vector
        acc = {}
        for col, coef in terms:
            acc[col] = acc.get(col, 0.0) + float(coef)
        items = sorted((c, v) for c, v in acc.items() if v != 0.0)
        self.rows.append(Row(family, name, tuple(c for c, _ in items), tuple(v for _, v in items), float(lo), float(hi)))


@dataclass
class LinearizedModel:
    instance: Instance
    kind: str                 # "M2" or "general"
    M: int
    vars: VarSpace
    cost: np.ndarray
    rows: list
    families: dict
    core: tuple               # every row of the full formulation
    lazy_pool: tuple          # rows held out by outer approximation
    vi5_rows: tuple           # optimality cuts, joined to the lazy pool by OA_BC
    usercut_pool: tuple       # valid inequalities separated at fractional nodes
    Ubar: dict                # (j, m) -> bound on U (M2) or V (general)
    cap: tuple                # steady-state load limit per drone count 0..M
    gated: frozenset = frozenset()
    _csr: tuple | None = None
    _bounds: tuple | None = None

    @property
    def n_vars(self) -> int:
        return self.vars.n

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def csr(self):
        if self._csr is None:
            indptr = [0]
            indices = []
            data = []
            for r in self.rows:
                indices.extend(r.idx)
                data.extend(r.val)
                indptr.append(len(indices))
            self._csr = (
                np.asarray(indptr, dtype=np.int64),
                np.asarray(indices, dtype=np.int64),
                np.asarray(data, dtype=float),
            )
        return self._csr

    def row_bounds(self):
        if self._bounds is None:
            self._bounds = (np.array([r.lo for r in self.rows]), np.array([r.hi for r in self.rows]))
        return self._bounds

    def col_bounds(self):
        return np.array(self.vars.lb), np.array(self.vars.ub)

    def _row_terms(self, point):
        indptr, indices, data = self.csr()
        prod = data * np.asarray(point, dtype=float)[indices]
        starts = indptr[:-1]
        empty = indptr[1:] == starts
        safe = np.minimum(starts, max(len(prod) - 1, 0))
        if len(prod):
            act = np.add.reduceat(prod, safe)
            mag = np.maximum.reduceat(np.abs(prod), safe)
        else:
            act = np.zeros(len(starts))
            mag = np.zeros(len(starts))
        act[empty] = 0.0
        mag[empty] = 0.0
        return act, mag

    def activity(self, point, rows=None) -> np.ndarray:
        act, _ = self._row_terms(point)
        return act if rows is None else act[list(rows)]

    def violation(self, point, rows=None) -> np.ndarray:
        """Amount by which each row is violated (0 when satisfied)."""
        act, _ = self._row_terms(point)
        lo, hi = self.row_bounds()
        viol = np.maximum(np.maximum(lo - act, act - hi), 0.0)
        return viol if rows is None else viol[list(rows)]

    def scaled_violation(self, point, rows=None) -> np.ndarray:
        """Violation divided by ``1 +`` the largest term magnitude of the row."""
        act, mag = self._row_terms(point)
        lo, hi = self.row_bounds()
        viol = np.maximum(np.maximum(lo - act, act - hi), 0.0)
        rhs = np.maximum(np.where(np.isfinite(lo), np.abs(lo), 0.0), np.where(np.isfinite(hi), np.abs(hi), 0.0))
        out = viol / (1.0 + np.maximum(mag, rhs))
        return out if rows is None else out[list(rows)]

    def objective(self, point) -> float:
        return float(self.cost @ np.asarray(point, dtype=float))

    def tallies(self) -> dict:
        out = {f: len(ids) for f, ids in self.families.items()}
        out["rows"] = self.n_rows
        out["vars"] = self.n_vars
        out["binaries"] = int(sum(self.vars.binary))
        return out

    def to_lp(self) -> str:
        """The full model in LP text format (one row per line)."""
        names = self.vars.names

        def expr(idx, val):
            parts = []
            for c, v in zip(idx, val):
                sign = "-" if v < 0 else "+"
                parts.append(f"{sign} {abs(v):.17g} {names[c]}")
            text = " ".join(parts) if parts else "0 " + names[0]
            return text[2:] if text.startswith("+ ") else text

        nz = np.flatnonzero(self.cost)
        lines = ["Minimize", " obj: " + expr(nz.tolist(), self.cost[nz].tolist()), "Subject To"]
        for k, r in enumerate(self.rows):
            body = expr(r.idx, r.val)
            if r.lo == r.hi:
                lines.append(f" {r.name}: {body} = {r.lo:.17g}")
                continue
            if math.isfinite(r.hi):
                lines.append(f" {r.name}: {body} <= {r.hi:.17g}")
            if math.isfinite(r.lo):
                suffix = "_lo" if math.isfinite(r.hi) else ""
                lines.append(f" {r.name}{suffix}: {body} >= {r.lo:.17g}")
        lines.append("Bounds")
        for c, name in enumerate(names):
            lines.append(f" {self.vars.lb[c]:.17g} <= {name} <= {self.vars.ub[c]:.17g}")
        lines.append("Binaries")
        lines.extend(" " + names[c] for c in self.vars.binary_indices())
        lines.append("End")
        return "\n".join(lines) + "\n"


def _loads(instance: Instance, moments: ServiceMoments):
    lam = instance.lam[:, None]
    return lam * moments.s_ij_mean, lam * moments.s_ij_second


def _pairs(members):
    return list(itertools.combinations(members, 2))


def steady_caps(instance: Instance, M: int) -> tuple:
    return tuple(instance.steady_cap(m) for m in range(M + 1))


def _core_vars(instance: Instance, M: int, vs: VarSpace):
    for j in range(instance.n_bases):
        vs.x[j] = vs.add(f"x_{j}", 0, 1, True)
    for i in range(instance.n_demands):
        for j in instance.J[i]:
            vs.y[(i, j)] = vs.add(f"y_{i}_{j}", 0, 1, True)
    for j in range(instance.n_bases):
        for m in range(1, M + 1):
            vs.gamma[(j, m)] = vs.add(f"gamma_{j}_{m}", 0, 1, True)


def gamma_expand(instance: Instance, moments: ServiceMoments | None = None, vs: VarSpace | None = None, M: int | None = None):
    """Structural rows of the binary reformulation.

    Returns ``(vs, rows)``; ``vs`` is created with ``x``, ``y`` and ``gamma``
    columns when not supplied.
    """
    M = instance.M if M is None else M
    if moments is None:
        moments = service_moments(instance)
    if vs is None:
        vs = VarSpace()
        _core_vars(instance, M, vs)
    a, _ = _loads(instance, moments)
    cap = steady_caps(instance, M)
    buf = RowBuffer()
    nI, nJ = instance.n_demands, instance.n_bases
    for i in range(nI):
        buf.add("assign", f"assign_{i}", [(vs.y[(i, j)], 1.0) for j in instance.J[i]], 1.0, 1.0)
    for i in range(nI):
        for j in instance.J[i]:
            buf.add("open", f"open_{i}_{j}", [(vs.y[(i, j)], 1.0), (vs.x[j], -1.0)], hi=0.0)
    buf.add("budget", "budget", [(vs.x[j], 1.0) for j in range(nJ)], hi=float(instance.q))
    for j in range(nJ):
        terms = [(vs.y[(l, j)], a[l, j]) for l in instance.I[j]]
        terms += [(vs.gamma[(j, m)], -cap[m]) for m in range(1, M + 1)]
        buf.add("steady", f"steady_{j}", terms, hi=0.0)
    for j in range(nJ):
        lvl = [(vs.gamma[(j, m)], float(m)) for m in range(1, M + 1)]
        buf.add("link_lo", f"link_lo_{j}", [(vs.x[j], 1.0)] + [(c, -v) for c, v in lvl], hi=0.0)
        buf.add("link_hi", f"link_hi_{j}", lvl + [(vs.x[j], -float(M))], hi=0.0)
    buf.add("fleet", "fleet", [(vs.gamma[(j, m)], float(m)) for j in range(nJ) for m in range(1, M + 1)], float(instance.p), float(instance.p))
    for j in range(nJ):
        buf.add("onelevel", f"onelevel_{j}", [(vs.gamma[(j, m)], 1.0) for m in range(1, M + 1)], hi=1.0)
    return vs, buf.rows


def _knapsack(values, weights, capacity):
    """Fractional knapsack optimum; items ordered by ratio then index."""
    order = sorted(range(len(values)), key=lambda k: (-values[k] / weights[k], k))
    total = 0.0
    room = capacity
    for k in order:
        if room <= 0.0:
            break
        take = min(1.0, room / weights[k])
        total += take * values[k]
        room -= take * weights[k]
    return total


def compute_U_bounds(instance: Instance, moments: ServiceMoments | None = None, rho_cap: float | None = None, M: int | None = None) -> dict:
    """Upper bounds on twice the queueing delay of each base for each drone level.

    With ``cap_m`` the largest admissible load for ``m`` drones and
    ``rho_max = min(cap_m, total catchment load)``, the bound is
    ``2 * Nbar * f_m(rho_max)``: ``Nbar`` is the fractional-knapsack maximum
    of ``sum lam_l E[S_lj^2]`` under load ``rho_max`` and ``f_m`` the delay
    per unit of that numerator, which increases with load.
    """
    M = instance.M if M is None else M
    if moments is None:
        moments = service_moments(instance)
    if rho_cap is None:
        cap = steady_caps(instance, M)
    else:
        if not 0.0 < rho_cap < 1.0:
            raise DegenerateBound(f"rho_cap must lie in (0, 1), got {rho_cap}")
        cap = (0.0,) + tuple(min(m - instance.epsilon_ss, rho_cap * m) for m in range(1, M + 1))
    a, b = _loads(instance, moments)
    out = {}
    for j in range(instance.n_bases):
        members = instance.I[j]
        for m in range(1, M + 1):
            if not members:
                out[(j, m)] = 0.0
                continue
            if cap[m] >= m:
                raise DegenerateBound(f"load cap {cap[m]} leaves no slack below {m}")
            wts = [a[l, j] for l in members]
            rho_max = min(cap[m], float(sum(wts)))
            nbar = _knapsack([b[l, j] for l in members], wts, rho_max)
            out[(j, m)] = 2.0 * nbar * delay_factor(rho_max, m)
    return out


def _mccormick(buf, family, name, prod, cont, binv, ubar):
    """Rows for prod = cont * binv with cont in [0, ubar]."""
    buf.add(family, f"{name}_a", [(prod, 1.0), (binv, -ubar)], hi=0.0)
    buf.add(family, f"{name}_b", [(prod, 1.0), (cont, -1.0)], hi=0.0)
    buf.add(family, f"{name}_c", [(prod, 1.0), (cont, -1.0), (binv, -ubar)], lo=-ubar)


def linearize_M2(instance: Instance, moments: ServiceMoments | None = None, gate_u1: bool = True) -> LinearizedModel:
    """MILP for bases holding one or two drones.

    ``gate_u1`` relaxes the ``U^1`` definition row of a base whenever it
    does not hold exactly one drone, for bases whose catchment can carry a
    load above the single-drone capacity (the row has no nonnegative
    solution there).  ``gate_u1=False`` keeps the plain row.
    """
    if instance.M != 2:
        raise ValueError("linearize_M2 requires M = 2")
    M = 2
    if moments is None:
        moments = service_moments(instance)
    a, b = _loads(instance, moments)
    Ubar = compute_U_bounds(instance, moments)
    cap = steady_caps(instance, M)
    nI, nJ = instance.n_demands, instance.n_bases

    gated = set()
    if gate_u1:
        for j in range(nJ):
            if sum(a[l, j] for l in instance.I[j]) > cap[1]:
                gated.add(j)
                # U^1 is free on such bases when K != 1; keep VI4 valid
                Ubar[(j, 1)] = max(Ubar[(j, 1)], Ubar[(j, 2)])

    vs = VarSpace()
    _core_vars(instance, M, vs)
    for j in range(nJ):
        for m in (1, 2):
            vs.U[(j, m)] = vs.add(f"U_{j}_{m}", 0, Ubar[(j, m)])
    slack_lo = {}
    for j in sorted(gated):
        members = instance.I[j]
        slack_lo[j] = Ubar[(j, 1)] * sum(a[l, j] for l in members) + sum(b[l, j] for l in members)
        vs.slack[j] = vs.add(f"s_{j}", -slack_lo[j], Ubar[(j, 1)])
    for j in range(nJ):
        for i in instance.I[j]:
            for m in (1, 2):
                vs.mu[(i, j, m)] = vs.add(f"mu_{i}_{j}_{m}", 0, Ubar[(j, m)])
    for j in range(nJ):
        for l, t in _pairs(instance.I[j]):
            vs.z[(j, l, t)] = vs.add(f"z_{j}_{l}_{t}", 0, 1)
    for j in range(nJ):
        for l, t in _pairs(instance.I[j]):
            vs.tau[(j, l, t)] = vs.add(f"tau_{j}_{l}_{t}", 0, Ubar[(j, 2)])
    for j in range(nJ):
        for i in instance.I[j]:
            for m in (1, 2):
                vs.omega[(i, j, m)] = vs.add(f"omega_{i}_{j}_{m}", 0, Ubar[(j, m)])

    _, rows = gamma_expand(instance, moments, vs, M)
    buf = RowBuffer()
    buf.rows = list(rows)

    for j in range(nJ):
        members = instance.I[j]
        terms = [(vs.U[(j, 1)], 1.0)]
        terms += [(vs.mu[(l, j, 1)], -a[l, j]) for l in members]
        terms += [(vs.y[(l, j)], -b[l, j]) for l in members]
        if j in gated:
            terms.append((vs.slack[j], -1.0))
        buf.add("udef1", f"udef1_{j}", terms, 0.0, 0.0)
    for j in range(nJ):
        members = instance.I[j]
        terms = [(vs.U[(j, 2)], 4.0)]
        terms += [(vs.mu[(l, j, 2)], -a[l, j] ** 2) for l in members]
        terms += [(vs.y[(l, j)], -b[l, j] * a[l, j]) for l in members]
        for l, t in _pairs(members):
            terms.append((vs.tau[(j, l, t)], -2.0 * a[l, j] * a[t, j]))
            terms.append((vs.z[(j, l, t)], -(b[l, j] * a[t, j] + b[t, j] * a[l, j])))
        buf.add("udef2", f"udef2_{j}", terms, 0.0, 0.0)
    for j in sorted(gated):
        g1 = vs.gamma[(j, 1)]
        buf.add("gate_hi", f"gate_hi_{j}", [(vs.slack[j], 1.0), (g1, Ubar[(j, 1)])], hi=Ubar[(j, 1)])
        buf.add("gate_lo", f"gate_lo_{j}", [(vs.slack[j], -1.0), (g1, slack_lo[j])], hi=slack_lo[j])

    for j in range(nJ):
        for l, t in _pairs(instance.I[j]):
            zc, yl, yt = vs.z[(j, l, t)], vs.y[(l, j)], vs.y[(t, j)]
            buf.add("fortet", f"fortet_{j}_{l}_{t}_a", [(zc, 1.0), (yl, -1.0)], hi=0.0)
            buf.add("fortet", f"fortet_{j}_{l}_{t}_b", [(zc, 1.0), (yt, -1.0)], hi=0.0)
            buf.add("fortet", f"fortet_{j}_{l}_{t}_c", [(zc, 1.0), (yl, -1.0), (yt, -1.0)], lo=-1.0)
    for j in range(nJ):
        for i in instance.I[j]:
            for m in (1, 2):
                _mccormick(buf, "mc_mu", f"mc_mu_{i}_{j}_{m}", vs.mu[(i, j, m)], vs.U[(j, m)], vs.y[(i, j)], Ubar[(j, m)])
    for j in range(nJ):
        for l, t in _pairs(instance.I[j]):
            _mccormick(buf, "mc_tau", f"mc_tau_{j}_{l}_{t}", vs.tau[(j, l, t)], vs.U[(j, 2)], vs.z[(j, l, t)], Ubar[(j, 2)])
    for j in range(nJ):
        for i in instance.I[j]:
            for m in (1, 2):
                _mccormick(buf, "mc_omega", f"mc_omega_{i}_{j}_{m}", vs.omega[(i, j, m)], vs.mu[(i, j, m)], vs.gamma[(j, m)], Ubar[(j, m)])

    for j in range(nJ):
        buf.add("vi5", f"vi5_{j}", [(vs.gamma[(j, 1)], 1.0), (vs.gamma[(j, 2)], 1.0), (vs.x[j], -1.0)], 0.0, 0.0)
    for j in range(nJ):
        for m in (1, 2):
            if Ubar[(j, m)] > 0.0:
                buf.add("vi3", f"vi3_{j}_{m}", [(vs.U[(j, m)], 1.0), (vs.gamma[(j, 1)], -Ubar[(j, m)]), (vs.gamma[(j, 2)], -Ubar[(j, m)])], hi=0.0)
    for j in range(nJ):
        buf.add("vi4", f"vi4_{j}", [(vs.U[(j, 2)], 1.0), (vs.U[(j, 1)], -1.0)], hi=0.0)

    lam_share = instance.lam / instance.total_rate
    cost = np.zeros(vs.n)
    for (i, j), c in vs.y.items():
        cost[c] = lam_share[i] * instance.d[i, j] / instance.v
    for (i, j, m), c in vs.omega.items():
        cost[c] = 0.5 * lam_share[i]

    return _assemble(instance, "M2", M, vs, cost, buf.rows, CORE_FAMILIES_M2, ("fortet", "mc_tau"), ("vi3", "vi4"), Ubar, cap, gated)


def _assemble(instance, kind, M, vs, cost, rows, core_families, lazy_families, user_families, Ubar, cap, gated):
    families = {}
    for k, r in enumerate(rows):
        families.setdefault(r.family, []).append(k)
    # fixed family order regardless of emission order
    order = list(core_families) + ["vi5"] + list(user_families)
    perm = [k for f in order for k in families.get(f, [])]
    assert len(perm) == len(rows)
    rows = [rows[k] for k in perm]
    families = {}
    for k, r in enumerate(rows):
        families.setdefault(r.family, []).append(k)
    families = {f: tuple(families.get(f, ())) for f in order}
    core = tuple(k for f in core_families for k in families[f])
    lazy = tuple(k for f in lazy_families for k in families[f])
    user = tuple(k for f in user_families for k in families[f])
    return LinearizedModel(
        instance=instance,
        kind=kind,
        M=M,
        vars=vs,
        cost=cost,
        rows=rows,
        families=families,
        core=core,
        lazy_pool=lazy,
        vi5_rows=families["vi5"],
        usercut_pool=user,
        Ubar=dict(Ubar),
        cap=tuple(cap),
        gated=frozenset(gated),
    )


# ---- general number of drone levels -------------------------------------

def denominator_poly(m: int) -> list:
    """Coefficients (ascending powers of rho) of
    ``(m-1)! (m-rho)^2 sum_{n<m} rho^n/n! + (m-rho) rho^m``."""
    fact = math.factorial(m - 1)
    series = [fact / math.factorial(n) for n in range(m)]
    sq = [m * m, -2.0 * m, 1.0]
    out = [0.0] * (m + 2)
    for a_, ca in enumerate(sq):
        for b_, cb in enumerate(series):
            out[a_ + b_] += ca * cb
    out[m] += m
    out[m + 1] -= 1.0
    # the rho^(m+1) terms cancel exactly
    assert abs(out[m + 1]) < 1e-12
    return out[: m + 1]


def _times_rho(poly: dict, coef: dict) -> dict:
    """Multiply a multilinear polynomial in binaries by ``sum_l coef[l] y_l``."""
    out = {}
    for S, c in poly.items():
        for l, al in coef.items():
            T = S if l in S else tuple(sorted(S + (l,)))
            out[T] = out.get(T, 0.0) + c * al
    return out


def multilinear_terms(m: int, a: dict, b: dict):
    """Monomials of ``P_m(rho(y))`` and ``N(y) rho(y)^(m-1)`` over a base.

    ``a[l]`` and ``b[l]`` are the per-demand load and second-moment weights.
    Returns two dicts keyed by sorted tuples of demand ids.
    """
    coeffs = denominator_poly(m)
    lhs = {(): coeffs[0]}
    power = {(): 1.0}
    for k in range(1, m + 1):
        power = _times_rho(power, a)
        for S, c in power.items():
            lhs[S] = lhs.get(S, 0.0) + coeffs[k] * c
    rhs = {(l,): bl for l, bl in b.items()}
    for _ in range(m - 1):
        rhs = _times_rho(rhs, a)
    return lhs, rhs


def estimated_rows_generalM(instance: Instance, M: int) -> int:
    total = 0
    for j in range(instance.n_bases):
        n = len(instance.I[j])
        for m in range(1, M + 1):
            k = min(m, n)
            for s in range(1, k + 1):
                total += math.comb(n, s) * (2 * (s + 2))
    return total


def linearize_generalM(instance: Instance, moments: ServiceMoments | None = None, M: int | None = None) -> LinearizedModel:
    """MILP for an arbitrary maximum number of drones per base.

    ``V[j,m]`` equals the queueing delay of base ``j`` when it holds ``m``
    drones and zero otherwise.  Its defining identity
    ``V * P_m(rho) = gamma * N * rho^(m-1) / 2`` is expanded into monomials
    of the assignment binaries; ``w`` replaces ``V`` times a product of
    binaries and ``g`` replaces ``gamma`` times a product of binaries.
    """
    M = instance.M if M is None else M
    if M < 1:
        raise ValueError("M must be at least 1")
    if M > 4:
        warnings.warn(
            f"M={M}: about {estimated_rows_generalM(instance, M)} product rows",
            ComplexityWarning,
            stacklevel=2,
        )
    if moments is None:
        moments = service_moments(instance)
    inst = instance if instance.M == M else instance.replace(M=M)
    a, b = _loads(inst, moments)
    Ubar = compute_U_bounds(inst, moments, M=M)
    Vbar = {k: 0.5 * v for k, v in Ubar.items()}
    cap = steady_caps(inst, M)
    nI, nJ = inst.n_demands, inst.n_bases

    vs = VarSpace()
    _core_vars(inst, M, vs)
    expansions = {}
    for j in range(nJ):
        members = inst.I[j]
        aj = {l: a[l, j] for l in members}
        bj = {l: b[l, j] for l in members}
        for m in range(1, M + 1):
            lhs, rhs = multilinear_terms(m, aj, bj) if members else ({(): denominator_poly(m)[0]}, {})
            expansions[(j, m)] = (lhs, rhs)
    for j in range(nJ):
        for m in range(1, M + 1):
            vs.V[(j, m)] = vs.add(f"V_{j}_{m}", 0, Vbar[(j, m)])
    for j in range(nJ):
        for m in range(1, M + 1):
            lhs, _ = expansions[(j, m)]
            subsets = set(S for S in lhs if S) | {(i,) for i in inst.I[j]}
            for S in sorted(subsets, key=lambda S: (len(S), S)):
                vs.w[(j, m, S)] = vs.add(f"w_{j}_{m}_" + "_".join(map(str, S)), 0, Vbar[(j, m)])
    for j in range(nJ):
        for m in range(1, M + 1):
            _, rhs = expansions[(j, m)]
            for T in sorted(rhs, key=lambda T: (len(T), T)):
                vs.g[(j, m, T)] = vs.add(f"g_{j}_{m}_" + "_".join(map(str, T)), 0, 1)

    _, rows = gamma_expand(inst, moments, vs, M)
    buf = RowBuffer()
    buf.rows = list(rows)
    for j in range(nJ):
        for m in range(1, M + 1):
            lhs, rhs = expansions[(j, m)]
            terms = [(vs.V[(j, m)], lhs[()])]
            terms += [(vs.w[(j, m, S)], c) for S, c in sorted(lhs.items()) if S]
            terms += [(vs.g[(j, m, T)], -0.5 * c) for T, c in sorted(rhs.items())]
            buf.add("vdef", f"vdef_{j}_{m}", terms, 0.0, 0.0)
    for (j, m, T), c in vs.g.items():
        gm = vs.gamma[(j, m)]
        buf.add("prod_bin", f"prod_bin_{c}_g", [(c, 1.0), (gm, -1.0)], hi=0.0)
        for l in T:
            buf.add("prod_bin", f"prod_bin_{c}_{l}", [(c, 1.0), (vs.y[(l, j)], -1.0)], hi=0.0)
        buf.add("prod_bin", f"prod_bin_{c}_lo", [(c, 1.0), (gm, -1.0)] + [(vs.y[(l, j)], -1.0) for l in T], lo=-float(len(T)))
    for (j, m, S), c in vs.w.items():
        Vc = vs.V[(j, m)]
        vb = Vbar[(j, m)]
        buf.add("prod_cont", f"prod_cont_{c}_v", [(c, 1.0), (Vc, -1.0)], hi=0.0)
        for l in S:
            buf.add("prod_cont", f"prod_cont_{c}_{l}", [(c, 1.0), (vs.y[(l, j)], -vb)], hi=0.0)
        buf.add("prod_cont", f"prod_cont_{c}_lo", [(c, 1.0), (Vc, -1.0)] + [(vs.y[(l, j)], -vb) for l in S], lo=-vb * len(S))
    for j in range(nJ):
        buf.add("vi5", f"vi5_{j}", [(vs.gamma[(j, m)], 1.0) for m in range(1, M + 1)] + [(vs.x[j], -1.0)], 0.0, 0.0)

    lam_share = inst.lam / inst.total_rate
    cost = np.zeros(vs.n)
    for (i, j), c in vs.y.items():
        cost[c] = lam_share[i] * inst.d[i, j] / inst.v
    for (j, m, S), c in vs.w.items():
        if len(S) == 1:
            cost[c] = lam_share[S[0]]

    return _assemble(inst, "general", M, vs, cost, buf.rows, CORE_FAMILIES_GENERAL, ("prod_bin",), (), Vbar, cap, ())


# ---- conversions between designs and model points -----------------------

def design_from_point(model: LinearizedModel, point, check_rows: bool = True) -> Design:
    """Recover ``(x, K, y, gamma)`` from an integral point of ``model``."""
    point = np.asarray(point, dtype=float)
    vs = model.vars
    bins = vs.binary_indices()
    frac = np.abs(point[bins] - np.round(point[bins]))
    if frac.size and frac.max() > INTEGRALITY_TOL:
        k = int(bins[int(np.argmax(frac))])
        raise NonIntegral(f"{vs.names[k]} = {point[k]!r} is not integral")
    if check_rows:
        viol = model.scaled_violation(point, model.core)
        if viol.size and viol.max() > ROW_TOL:
            k = model.core[int(np.argmax(viol))]
            raise RowInfeasible(f"row {model.rows[k].name} violated by {viol.max():.3g}")
    inst = model.instance
    M = model.M
    K = []
    for j in range(inst.n_bases):
        K.append(sum(m for m in range(1, M + 1) if round(point[vs.gamma[(j, m)]]) == 1))
    y = []
    for i in range(inst.n_demands):
        chosen = [j for j in inst.J[i] if round(point[vs.y[(i, j)]]) == 1]
        if len(chosen) != 1:
            raise RowInfeasible(f"demand {i} assigned to {len(chosen)} bases")
        y.append(chosen[0])
    gamma = tuple(tuple(bool(round(point[vs.gamma[(j, m)]])) for m in range(1, M + 1)) for j in range(inst.n_bases))
    x = tuple(bool(round(point[vs.x[j]])) for j in range(inst.n_bases))
    return Design(x=x, K=tuple(K), y=tuple(y), gamma=gamma)


def _base_stats(inst, a, b, y, j):
    members = [i for i, yi in enumerate(y) if yi == j]
    rho = float(sum(a[i, j] for i in members))
    N = float(sum(b[i, j] for i in members))
    return rho, N


def encode_design(model: LinearizedModel, design: Design, moments: ServiceMoments | None = None) -> np.ndarray:
    """Full model point whose binaries match ``design``."""
    inst = model.instance
    if moments is None:
        moments = service_moments(inst)
    a, b = _loads(inst, moments)
    vs = model.vars
    pt = np.zeros(vs.n)
    for j, c in vs.x.items():
        pt[c] = float(design.x[j])
    for (i, j), c in vs.y.items():
        pt[c] = float(design.y[i] == j)
    for (j, m), c in vs.gamma.items():
        pt[c] = float(design.K[j] == m)
    yv = lambda i, j: float(design.y[i] == j)  # noqa: E731

    if model.kind == "M2":
        for j in range(inst.n_bases):
            rho, N = _base_stats(inst, a, b, design.y, j)
            U = {}
            for m in (1, 2):
                U[m] = 2.0 * N * delay_factor(rho, m) if N > 0.0 and rho < m else 0.0
            if j in model.gated and design.K[j] != 1:
                U[1] = U[2]
            for m in (1, 2):
                pt[vs.U[(j, m)]] = U[m]
            if j in vs.slack:
                members = inst.I[j]
                pt[vs.slack[j]] = U[1] - sum(a[l, j] * yv(l, j) * U[1] for l in members) - sum(b[l, j] * yv(l, j) for l in members)
        for (i, j, m), c in vs.mu.items():
            pt[c] = yv(i, j) * pt[vs.U[(j, m)]]
        for (j, l, t), c in vs.z.items():
            pt[c] = yv(l, j) * yv(t, j)
        for (j, l, t), c in vs.tau.items():
            pt[c] = pt[vs.z[(j, l, t)]] * pt[vs.U[(j, 2)]]
        for (i, j, m), c in vs.omega.items():
            pt[c] = pt[vs.gamma[(j, m)]] * pt[vs.mu[(i, j, m)]]
    else:
        for j in range(inst.n_bases):
            rho, N = _base_stats(inst, a, b, design.y, j)
            for m in range(1, model.M + 1):
                on = design.K[j] == m and N > 0.0
                pt[vs.V[(j, m)]] = N * delay_factor(rho, m) if on else 0.0
        for (j, m, S), c in vs.w.items():
            pt[c] = pt[vs.V[(j, m)]] * math.prod(yv(l, j) for l in S)
        for (j, m, T), c in vs.g.items():
            pt[c] = pt[vs.gamma[(j, m)]] * math.prod(yv(l, j) for l in T)
    return pt
