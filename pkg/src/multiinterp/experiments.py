"""Check families runnable from configuration files.

Each block of a configuration names a runner below.  A runner receives the
block's options, a generator seeded from the run seed and the block label,
and the tolerance scale, and returns one ``Report``.  Random instances are
drawn only from that generator, so a block's output depends on nothing but
the seed, its label and its options.
"""

from __future__ import annotations

import math
import zlib

import numpy as np

from . import boyd, interpnorm, lorentz, sobolev_besov
from .errors import PreconditionError
from .ktuple import BanachTuple, NormSpec, TupleOperator, brute_force_k, k_functional
from .phifunc import refine_until
from .report import Report

# option keys multiplied by the tolerance scale
SCALED_KEYS = ("tol", "gap", "slack", "stability", "drift")


def block_rng(seed: int, label: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(label.encode("utf-8"))])


def _merge(rep: Report, sub: Report, prefix) -> Report:
    for row in sub.rows:
        row.instance_id = f"{prefix}-{row.instance_id}"
        rep.rows.append(row)
    rep.informational |= sub.informational
    for k, v in sub.notes.items():
        rep.notes[f"{prefix}.{k}"] = v
    return rep


def _power_params(rng, n, lo=0.1, hi=0.5, budget=0.85):
    """n exponents in (lo, hi) summing below ``budget``, rounded to 3 digits."""
    while True:
        th = np.round(rng.uniform(lo, hi, n), 3)
        if th.sum() < budget:
            return [boyd.atom(float(x)) for x in th]


def _weights(rng, m, d, lo=0.3, hi=3.0):
    return np.round(rng.uniform(lo, hi, (m, d)), 4)


# ---------------------------------------------------------------------------
# boyd-indices


def run_indices(opt, rng, name):
    rep = Report(name)
    t_lo, t_hi = opt["theta_range"]
    g_lo, g_hi = opt["gamma_range"]
    for i in range(opt["count"]):
        theta = round(float(rng.uniform(t_lo, t_hi)), 3)
        gamma = round(float(rng.uniform(g_lo, g_hi)), 3)
        est = boyd.boyd_indices(boyd.atom(theta, gamma), method="numeric")
        for side, val in (("lower", est.lower), ("upper", est.upper)):
            dev = abs(val - theta)
            rep.add(f"{i}-{side}", val, theta, dev, opt["tol"], dev <= opt["tol"])
    return rep


def run_dilation(opt, rng, name):
    rep = Report(name)
    t_lo, t_hi = opt["theta_range"]
    g_lo, g_hi = opt["gamma_range"]
    if g_lo < 0:
        raise PreconditionError("dilation equality needs gamma >= 0")
    e = opt["span_log2"]
    ts = 2.0 ** np.linspace(-e, e, opt["points"])
    for i in range(opt["count"]):
        theta = round(float(rng.uniform(t_lo, t_hi)), 3)
        gamma = round(float(rng.uniform(g_lo, g_hi)), 3)
        phi = boyd.atom(theta, gamma)
        num = boyd.dilation(phi, ts, method="numeric")
        ref = boyd.evaluate(phi, ts)
        dev = float(np.max(np.abs(num / ref - 1.0)))
        rep.add(i, float(np.max(num)), float(np.max(ref)), dev, opt["tol"], dev <= opt["tol"])
    return rep


# ---------------------------------------------------------------------------
# k-functional


def run_k_oracle(opt, rng, name):
    rep = Report(name)
    exps = opt["exponents"]
    for i in range(opt["count"]):
        while True:
            d = int(rng.integers(1, opt["max_dim"] + 1))
            n = int(rng.integers(1, opt["max_n"] + 1))
            if n * d <= 6:
                break
        ps = [exps[j] for j in rng.integers(0, len(exps), n + 1)]
        tup = BanachTuple.from_weights(ps, _weights(rng, n + 1, d))
        t = np.round(np.exp(rng.normal(0.0, 1.0, n + 1)), 4)
        a = np.round(rng.normal(size=d), 4)
        res = k_functional(tup, t, a, tol=0.5 * opt["gap"])
        ref = brute_force_k(tup, t, a, points=opt["points"], levels=opt["levels"])
        ratio = res.value / ref
        gap = res.gap / res.upper if res.upper > 0 else 0.0
        ok = abs(ratio - 1.0) <= opt["tol"] and gap <= opt["gap"]
        rep.add(i, res.value, ref, ratio, opt["tol"], ok)
        rep.add(i, res.upper, res.lower, gap, opt["gap"], gap <= opt["gap"], check_name=f"{name}_gap")
    return rep


# ---------------------------------------------------------------------------
# interp-norm


def _min1(t):
    return np.minimum(1.0, t)


PHI_CASES = (
    ("min-p1", lambda ts: _min1(ts[0]), 1.0, ["atom(0.5,0)"], 4.0),
    ("min-pinf", lambda ts: _min1(ts[0]), math.inf, ["atom(0.5,0)"], 1.0),
    ("product-p1", lambda ts: _min1(ts[0]) * _min1(ts[1]), 1.0, ["atom(0.3,0)", "atom(0.4,0)"],
     1.0 / (0.3 * 0.7) / (0.4 * 0.6)),
)


def run_phi_analytic(opt, rng, name):
    rep = Report(name)
    for label, provider, p, phis, exact in PHI_CASES:
        res = refine_until(provider, boyd.make_params(p, phis, check=False), rel_tol=opt["rel_tol"])
        dev = abs(res.value / exact - 1.0)
        rep.add(label, res.value, exact, res.value / exact, opt["tol"], dev <= opt["tol"])
    return rep


def run_k_norm_analytic(opt, rng, name):
    rep = Report(name)
    rt = opt["rel_tol"]
    one = BanachTuple.from_weights([1, 1], [[1.0], [4.0]])
    v = interpnorm.k_norm(one, (1.0, [boyd.atom(0.5)]), [1.0], rel_tol=rt).value
    cases = [("couple", v, 8.0)]
    tri = BanachTuple.from_weights([1, 1, 1], [[1.0], [1.0], [1.0]])
    v = interpnorm.k_norm(tri, (1.0, [boyd.atom(1 / 3), boyd.atom(1 / 3)]), [1.0], rel_tol=rt).value
    cases.append(("triple", v, 27.0))
    unit = BanachTuple.from_weights([1, 1], [[1.0], [1.0]])
    cases.append(("sigma", interpnorm.sigma_integral(unit, [1.0], rel_tol=rt), 2.0))
    for label, val, exact in cases:
        rep.add(label, val, exact, val / exact, opt["tol"], abs(val / exact - 1.0) <= opt["tol"])
    return rep


# ---------------------------------------------------------------------------
# verify-structural


def _l1_tuple(rng, n, d):
    return BanachTuple.from_weights([1.0] * (n + 1), _weights(rng, n + 1, d))


def run_permutation(opt, rng, name):
    rep = Report(name)
    n, d = opt["n"], opt["dim"]
    ident = tuple(range(n + 1))
    for i in range(opt["count"]):
        tup = _l1_tuple(rng, n, d)
        phis = _power_params(rng, n)
        while True:
            perm = tuple(int(x) for x in rng.permutation(n + 1))
            if perm != ident:
                break
        a = np.round(rng.normal(size=d), 4)
        sub = interpnorm.permutation_check(tup, (opt["p"], phis), [perm], [a], tol=opt["tol"],
                                           rel_tol=opt["rel_tol"], name=name)
        _merge(rep, sub, i)
    return rep


def run_reduction(opt, rng, name):
    rep = Report(name)
    n, d = opt["n"], opt["dim"]
    for i in range(opt["count"]):
        W = _weights(rng, n, d)
        tup = BanachTuple.from_weights([1.0] * (n + 1), np.vstack([W, W[-1:]]))
        phis = _power_params(rng, n)
        a = np.round(rng.normal(size=d), 4)
        sub = interpnorm.reduction_check(tup, (opt["p"], phis), [a], tol=opt["tol"],
                                         rel_tol=opt["rel_tol"], name=name)
        _merge(rep, sub, i)
    return rep


def run_power(opt, rng, name):
    rep = Report(name)
    ns, qs = opt["ns"], opt["qs"]
    for i in range(opt["count"]):
        n = ns[i % len(ns)]
        q = qs[i % len(qs)]
        tup = BanachTuple.from_weights([1.0] * (n + 1), _weights(rng, n + 1, 1))
        phis = _power_params(rng, n)
        a = [round(float(rng.uniform(0.2, 3.0)), 4)]
        sub = interpnorm.power_check(tup, (opt["p"], phis), q, [a], tol=opt["tol"],
                                     rel_tol=opt["rel_tol"], name=name)
        _merge(rep, sub, i)
    return rep


def _mixed_tuple(rng, n, d):
    """l1 spaces with an l-infinity space last."""
    ps = [1.0] * n + [math.inf]
    return BanachTuple.from_weights(ps, _weights(rng, n + 1, d, 0.2, 5.0))


def run_p_monotone(opt, rng, name):
    rep = Report(name)
    for i in range(opt["count"]):
        tup = _mixed_tuple(rng, 2, opt["dim"])
        phis = _power_params(rng, 2)
        samples = [np.round(rng.normal(size=opt["dim"]), 4) for _ in range(opt["samples"])]
        for q in opt["qs"]:
            sub = interpnorm.p_monotone_check(tup, phis, opt["p"], q, samples, stability=opt["stability"],
                                              tol=opt["tol"], name=name)
            _merge(rep, sub, f"{i}-q{boyd._fmt(q)}")
    return rep


def run_j_into_k(opt, rng, name):
    rep = Report(name)
    for i in range(opt["count"]):
        tup = _mixed_tuple(rng, 2, opt["dim"])
        phis = _power_params(rng, 2)
        samples = [np.round(rng.normal(size=opt["dim"]), 4) for _ in range(opt["samples"])]
        for p in opt["ps"]:
            sub = interpnorm.j_into_k_check(tup, (p, phis), samples, window=opt["window"], name=name)
            _merge(rep, sub, f"{i}-p{boyd._fmt(p)}")
    # couples, where the two methods are known to agree up to a constant
    for i in range(opt["count"]):
        tup = _l1_tuple(rng, 1, opt["dim"])
        phis = _power_params(rng, 1, 0.2, 0.8, 1.0)
        samples = [np.round(rng.normal(size=opt["dim"]), 4) for _ in range(opt["samples"])]
        for p in opt["ps"]:
            sub = interpnorm.j_into_k_check(tup, (p, phis), samples, window=opt["window"], name=name)
            _merge(rep, sub, f"couple{i}-p{boyd._fmt(p)}")
    return rep


def run_operator(opt, rng, name):
    rep = Report(name)
    ns, d = opt["ns"], opt["dim"]
    for i in range(opt["count"]):
        n = ns[i % len(ns)]
        src = _l1_tuple(rng, n, d)
        if i == 0:
            dst, diag = src, np.ones(d)
        elif i == 1:
            dst, diag = src, np.full(d, round(float(rng.uniform(0.2, 5.0)), 4))
        else:
            dst = _l1_tuple(rng, n, d)
            diag = np.round(rng.normal(size=d), 4)
        T = TupleOperator.diagonal(diag, src, dst)
        phis = _power_params(rng, n)
        a = np.round(rng.normal(size=d), 4)
        sub = interpnorm.operator_bound_check(src, dst, T, (opt["p"], phis), [a], slack=opt["slack"], name=name)
        _merge(rep, sub, i)
    return rep


def run_pointwise(opt, rng, name):
    rep = Report(name)
    for i in range(opt["count"]):
        tup = _mixed_tuple(rng, 2, opt["dim"])
        phis = _power_params(rng, 2)
        samples = [np.round(rng.normal(size=opt["dim"]), 4) for _ in range(opt["samples"])]
        sub = interpnorm.pointwise_k_bound_check(tup, (opt["p"], phis), samples, stability=opt["stability"],
                                                 name=name)
        _merge(rep, sub, i)
    return rep


def run_classes(opt, rng, name):
    rep = Report(name)
    for i in range(opt["count"]):
        d = opt["dim"]
        tup = _mixed_tuple(rng, 2, d)
        phis = _power_params(rng, 2)
        space = NormSpec(2.0, _weights(rng, 1, d)[0])
        samples = [np.round(rng.normal(size=d), 4) for _ in range(opt["samples"])]
        for kind in ("class_CK", "class_CJ"):
            sub = interpnorm.class_check(kind, tup, (opt["p"], phis), space, samples,
                                         stability=opt["stability"], name=name)
            _merge(rep, sub, f"{i}-{kind}")
    return rep


def run_reiteration(opt, rng, name):
    points = np.asarray(opt["points"], dtype=float)
    lambdas = np.asarray(opt["lambdas"], dtype=float)
    n = points.shape[1] if points.ndim == 2 else 0
    tup = _l1_tuple(rng, n, opt["dim"])
    samples = [np.round(rng.normal(size=opt["dim"]), 4) for _ in range(opt["samples"])]
    return interpnorm.reiteration_check(tup, points, lambdas, samples, window=opt["window"],
                                        stability=opt["stability"], name=name)


# ---------------------------------------------------------------------------
# sobolev-besov


def run_interp_besov(opt, rng, name):
    seeds = [int(s) for s in rng.integers(0, 2**31, len(opt["families"]))]
    per = opt["per_family"]

    def family(N):
        out = []
        for kind, s in zip(opt["families"], seeds):
            out.extend(sobolev_besov.signal_family(kind, N, per, s))
        return out

    return sobolev_besov.interp_equals_besov_check(opt["descs"], opt["gammas"], opt["q"], family, opt["sizes"],
                                                   window=opt["window"], drift=opt["drift"], name=name)


def run_sobolev_embedding(opt, rng, name):
    d0 = sobolev_besov.SobolevDescriptor(opt["phi0"])
    d1 = sobolev_besov.SobolevDescriptor(opt["phi1"])
    seed = int(rng.integers(0, 2**31))
    samples = {N: sobolev_besov.signal_family("random-band-limited", N, opt["per_size"], seed)
               for N in opt["sizes"]}
    return sobolev_besov.sobolev_embedding_check(d0, d1, samples, drift=opt["drift"], name=name)


# ---------------------------------------------------------------------------
# lorentz


def lorentz_oracle(q, p, a, masses) -> float:
    """``||a||_{L^{q,p}}`` from the distribution function.

    ``||a||^p = q int_0^inf (alpha mu(|a| > alpha)^(1/q))^p dalpha/alpha``; the
    distribution function of a finite sample is a step function, so the
    integral is a finite sum over the distinct values of ``|a|``.
    """
    v = np.abs(np.asarray(a, dtype=float))
    masses = np.asarray(masses, dtype=float)
    levels = np.unique(v[v > 0])[::-1]
    if levels.size == 0:
        return 0.0
    S = np.array([masses[v >= x].sum() for x in levels])
    if math.isinf(p):
        return float(np.max(levels * S ** (1.0 / q)))
    nxt = np.append(levels[1:], 0.0)
    total = q / p * np.sum(S ** (p / q) * (levels**p - nxt**p))
    return float(total ** (1.0 / p))


def run_lambda_oracle(opt, rng, name):
    rep = Report(name)
    for i in range(opt["count"]):
        size = int(rng.integers(1, opt["max_atoms"] + 1))
        masses = rng.uniform(0.05, 2.0, size)
        a = rng.normal(size=size)
        if size > 2 and i % 3 == 0:
            a[1] = a[0]  # a tie in |a|
        q = float(rng.uniform(1.0, 5.0))
        p = math.inf if i % 7 == 6 else float(rng.uniform(1.0, 5.0))
        space = lorentz.MeasureSpace(masses)
        val = lorentz.lambda_norm(boyd.atom(1.0 / q), p, a, space)
        ref = lorentz_oracle(q, p, a, masses)
        dev = abs(val / ref - 1.0)
        rep.add(i, val, ref, val / ref, opt["tol"], dev <= opt["tol"])
    return rep


def run_stein_weiss(opt, rng, name):
    rep = Report(name)
    pairs = opt["exponents"]
    k = opt["atoms"]
    for i in range(opt["count"]):
        p0, p1 = pairs[i % len(pairs)]
        space = lorentz.MeasureSpace(rng.uniform(0.1, 1.0, k), w0=np.exp(rng.normal(size=k)),
                                     w1=np.exp(rng.normal(size=k)))
        samples = [rng.normal(size=k) for _ in range(opt["samples"])]
        sub = lorentz.stein_weiss_check(p0, p1, opt["theta"], space, samples, window=opt["window"],
                                        stability=opt["stability"], name=name)
        _merge(rep, sub, f"{i}-p{boyd._fmt(p0)}_{boyd._fmt(p1)}")
    return rep


def run_three_space(opt, rng, name):
    rep = Report(name)
    k = opt["atoms"]
    ps = opt["ps"]
    for i in range(opt["count"]):
        alphas = [float(x) for x in np.round(rng.uniform(-1.0, 1.5, 3), 3)]
        pts = [(al, 0.0 if math.isinf(pj) else 1.0 / pj) for al, pj in zip(alphas, ps)]
        if lorentz.collinear(pts, tol=1e-2):
            alphas[1] = alphas[0] + 1.0
        space = lorentz.MeasureSpace(rng.uniform(0.1, 1.0, k), w=2.0 ** rng.uniform(-4, 4, k))
        samples = [rng.normal(size=k) for _ in range(opt["samples"])]
        sub = lorentz.three_space_block_check(alphas, ps, opt["thetas"], opt["q"], space, samples,
                                              window=opt["window"], stability=opt["stability"], name=name)
        _merge(rep, sub, i)
    # collinear parameter points must be refused
    for i in range(opt["collinear_count"]):
        space = lorentz.MeasureSpace(rng.uniform(0.1, 1.0, k), w=2.0 ** rng.uniform(-4, 4, k))
        base = float(np.round(rng.uniform(-1.0, 1.0), 3))
        step = float(np.round(rng.uniform(0.2, 1.0), 3))
        alphas = [base, base + step, base + 2 * step]
        try:
            lorentz.three_space_block_check(alphas, [2.0, 2.0, 2.0], opt["thetas"], opt["q"], space,
                                            [rng.normal(size=k)], name=name)
            refused = False
        except PreconditionError:
            refused = True
        rep.add(f"collinear{i}", float(refused), 1.0, float(refused), 0.0, refused,
                check_name=f"{name}_collinear")
    return rep


def run_two_space(opt, rng, name):
    inst = [lorentz.multilevel_instance(opt["levels"], opt["atoms_per_level"], opt["theta"], opt["p0"],
                                        opt["p1"], rng, stride=opt["stride"]) for _ in range(opt["count"])]
    return lorentz.weighted_two_space_check(opt["theta"], opt["p0"], opt["p1"], opt["q"], inst,
                                            window=opt["window"], name=name)


# ---------------------------------------------------------------------------
# schemas: {experiment: {block kind: (runner, {key: (type, default)})}}

_STRUCT = {"count": ("int", 20), "dim": ("int", 2), "n": ("int", 2), "p": ("float", 2.0),
           "tol": ("float", 1e-3), "rel_tol": ("float", 5e-4)}

EXPERIMENTS = {
    "boyd-indices": {
        "indices": (run_indices, {"count": ("int", 20), "theta_range": ("floats", [-1.0, 2.0]),
                                  "gamma_range": ("floats", [-2.0, 3.0]), "tol": ("float", 1e-2)}),
        "dilation": (run_dilation, {"count": ("int", 20), "theta_range": ("floats", [-1.0, 2.0]),
                                    "gamma_range": ("floats", [0.0, 3.0]), "span_log2": ("float", 10.0),
                                    "points": ("int", 41), "tol": ("float", 1e-6)}),
    },
    "k-functional": {
        "oracle": (run_k_oracle, {"count": ("int", 50), "max_dim": ("int", 3), "max_n": ("int", 2),
                                  "exponents": ("floats", [1.0, 2.0, math.inf]), "tol": ("float", 1e-3),
                                  "gap": ("float", 1e-6), "points": ("int", 5), "levels": ("int", 40)}),
    },
    "interp-norm": {
        "phi_analytic": (run_phi_analytic, {"tol": ("float", 1e-6), "rel_tol": ("float", 1e-8)}),
        "k_norm_analytic": (run_k_norm_analytic, {"tol": ("float", 1e-6), "rel_tol": ("float", 1e-6)}),
    },
    "verify-structural": {
        "permutation": (run_permutation, dict(_STRUCT)),
        "reduction": (run_reduction, dict(_STRUCT)),
        "power": (run_power, {"count": ("int", 20), "ns": ("ints", [1, 2]), "qs": ("floats", [2.0, 1.5, 3.0]),
                              "p": ("float", 2.0), "tol": ("float", 1e-3), "rel_tol": ("float", 1e-5)}),
        "p_monotone": (run_p_monotone, {"count": ("int", 3), "dim": ("int", 3), "samples": ("int", 2),
                                        "p": ("float", 1.0), "qs": ("floats", [2.0, math.inf]),
                                        "stability": ("float", 0.05), "tol": ("float", 1e-3)}),
        "j_into_k": (run_j_into_k, {"count": ("int", 3), "dim": ("int", 3), "samples": ("int", 2),
                                    "ps": ("floats", [1.0, 2.0]), "window": ("float", 10.0)}),
        "operator": (run_operator, {"count": ("int", 50), "dim": ("int", 3), "ns": ("ints", [1, 2]),
                                    "p": ("float", 2.0), "slack": ("float", 1e-3)}),
        "pointwise": (run_pointwise, {"count": ("int", 3), "dim": ("int", 3), "samples": ("int", 2),
                                      "p": ("float", 2.0), "stability": ("float", 0.05)}),
        "classes": (run_classes, {"count": ("int", 2), "dim": ("int", 3), "samples": ("int", 3),
                                  "p": ("float", 2.0), "stability": ("float", 0.05)}),
        "reiteration": (run_reiteration, {"points": ("matrix", [[0.3], [0.6]]), "lambdas": ("floats", [0.5]),
                                          "dim": ("int", 4), "samples": ("int", 3), "window": ("float", 10.0),
                                          "stability": ("float", 0.05)}),
    },
    "sobolev-besov": {
        "interp_besov": (run_interp_besov, {
            "descs": ("strs", ["atom(0,0)", "atom(1,0)"]), "gammas": ("strs", ["atom(0.5,0)"]),
            "q": ("float", 2.0), "sizes": ("ints", [256, 1024, 4096]),
            "families": ("strs", ["pure-frequency", "dyadic-lacunary", "random-band-limited"]),
            "per_family": ("int", 8), "window": ("float", 10.0), "drift": ("float", 0.2)}),
        "embedding": (run_sobolev_embedding, {
            "phi0": ("str", "atom(1,0)"), "phi1": ("str", "atom(0,0)"), "sizes": ("ints", [256, 1024, 4096]),
            "per_size": ("int", 8), "drift": ("float", 0.2)}),
    },
    "lorentz": {
        "lambda_oracle": (run_lambda_oracle, {"count": ("int", 100), "max_atoms": ("int", 12),
                                              "tol": ("float", 1e-9)}),
        "stein_weiss": (run_stein_weiss, {"count": ("int", 20), "atoms": ("int", 20), "samples": ("int", 2),
                                          "exponents": ("matrix", [[1.0, math.inf], [math.inf, 1.0],
                                                                   [2.0, 2.0], [1.0, 1.0]]),
                                          "theta": ("float", 0.4), "window": ("float", 10.0),
                                          "stability": ("float", 1e-3)}),
        "three_space": (run_three_space, {"count": ("int", 10), "atoms": ("int", 16), "samples": ("int", 2),
                                          "ps": ("floats", [1.0, 1.0, math.inf]), "thetas": ("floats", [0.3, 0.3]),
                                          "q": ("float", 2.0), "window": ("float", 10.0),
                                          "stability": ("float", 0.05), "collinear_count": ("int", 3)}),
        "two_space": (run_two_space, {"count": ("int", 10), "levels": ("int", 128),
                                      "atoms_per_level": ("int", 2), "stride": ("int", 4),
                                      "theta": ("float", 0.4), "p0": ("float", 1.0), "p1": ("float", 2.0),
                                      "q": ("float", math.inf), "window": ("float", 10.0)}),
    },
}

SCHEMAS = {kind: {b: spec for b, (_, spec) in blocks.items()} for kind, blocks in EXPERIMENTS.items()}


def run_block(experiment: str, kind: str, name: str, values: dict, seed: int, tolerance_scale: float = 1.0) -> Report:
    runner = EXPERIMENTS[experiment][kind][0]
    opt = dict(values)
    for key in SCALED_KEYS:
        if key in opt:
            opt[key] = opt[key] * tolerance_scale
    return runner(opt, block_rng(seed, name), name)
