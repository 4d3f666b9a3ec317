"""Small hand-built instances shared by the tests."""
from dronenet.generators import _offset, CENTER
from dronenet.model import CandidateBase, DemandPoint, GeoPoint, build_instance


def line_instance(demand_offsets, base_offsets, lam, xi_mean=1500.0, xi_second=None, **params):
    """Demands and bases placed at east-west offsets (meters) from one center."""
    if not isinstance(lam, (list, tuple)):
        lam = [lam] * len(demand_offsets)
    demands = [
        DemandPoint(f"D{i}", _offset(CENTER, dx, 0.0), lam[i], xi_mean, xi_second)
        for i, dx in enumerate(demand_offsets)
    ]
    bases = [CandidateBase(f"B{j}", _offset(CENTER, dx, 0.0)) for j, dx in enumerate(base_offsets)]
    return build_instance(demands, bases, **params)


def colocated(lam, xi_mean, xi_second=None, n=1, **params):
    """``n`` demands sitting on a single base."""
    p = GeoPoint(*CENTER)
    demands = [DemandPoint(f"D{i}", p, lam, xi_mean, xi_second) for i in range(n)]
    return build_instance(demands, [CandidateBase("B0", p)], **params)


def feasible_designs(instance):
    """Every design passing ``check_feasible``, by plain product enumeration."""
    import itertools

    from dronenet.model import Design, check_feasible

    out = []
    for K in itertools.product(range(instance.M + 1), repeat=instance.n_bases):
        if sum(K) != instance.p or sum(k > 0 for k in K) > instance.q:
            continue
        for y in itertools.product(*instance.J):
            if any(K[j] == 0 for j in y):
                continue
            d = Design.from_counts(K, y, instance.M)
            if not check_feasible(instance, d):
                out.append(d)
    return out
