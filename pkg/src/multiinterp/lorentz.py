"""Lorentz-type norms on finite atomic measure spaces and their interpolation.

A measure space is a list of atoms with positive masses.  Functions are value
vectors indexed by atoms.  Two readings of a weight occur:

* as a multiplier, ``a -> w a``, inside a rearrangement or a lattice norm;
* as a density, ``mu -> w mu``, which changes the masses.

``lambda_norm``, ``lphi_norm`` and ``block_lorentz_norm`` take a multiplier
``weight``; ``MeasureSpace.with_density`` builds the space for a density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import boyd
from .boyd import Atom, BoydFunction
from .errors import InputError, PreconditionError
from .interpnorm import WINDOW_C0, k_norm
from .ktuple import BanachTuple, NormSpec
from .phifunc import LogGrid, default_grid
from .report import Report

PIECE_RTOL = 1e-9
SUP_SAMPLES = 65


@dataclass(frozen=True)
class MeasureSpace:
    masses: np.ndarray
    w: np.ndarray | None = None
    w0: np.ndarray | None = None
    w1: np.ndarray | None = None

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float).reshape(-1)
        if m.size == 0 or not np.all((m > 0) & np.isfinite(m)):
            raise InputError("masses must be positive and finite")
        object.__setattr__(self, "masses", m)
        for name in ("w", "w0", "w1"):
            val = getattr(self, name)
            if val is not None:
                val = np.asarray(val, dtype=float).reshape(-1)
                if val.shape != m.shape or not np.all((val > 0) & np.isfinite(val)):
                    raise InputError(f"weight {name} must be positive with one entry per atom")
                object.__setattr__(self, name, val)

    @property
    def size(self) -> int:
        return self.masses.size

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    def with_density(self, density) -> "MeasureSpace":
        return MeasureSpace(self.masses * np.asarray(density, dtype=float))

    def restrict(self, mask) -> "MeasureSpace":
        mask = np.asarray(mask, dtype=bool)
        pick = lambda x: None if x is None else x[mask]
        return MeasureSpace(self.masses[mask], pick(self.w), pick(self.w0), pick(self.w1))

    def _vec(self, a):
        a = np.asarray(a, dtype=float).reshape(-1)
        if a.shape != self.masses.shape:
            raise InputError(f"{a.size} values for {self.size} atoms")
        return a


@dataclass(frozen=True)
class Rearrangement:
    """Non-increasing step function: ``values[k]`` on ``[breaks[k], breaks[k+1])``."""

    breaks: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.breaks, t, side="right") - 1
        inside = (idx >= 0) & (idx < self.values.size)
        return np.where(inside, self.values[np.clip(idx, 0, max(self.values.size - 1, 0))], 0.0)

    def distribution(self, alpha) -> np.ndarray:
        """``mu(|a| > alpha)``."""
        alpha = np.asarray(alpha, dtype=float)
        lengths = np.diff(self.breaks)
        return (lengths[None, :] * (self.values[None, :] > alpha.reshape(-1, 1))).sum(axis=1).reshape(alpha.shape)


def rearrange(a, space: MeasureSpace, weight=None) -> Rearrangement:
    """Decreasing rearrangement of ``|weight * a|`` with respect to the masses.

    Ties keep atom order (stable sort), and equal neighbouring values are merged
    so the result does not depend on the order of the atoms.
    """
    v = np.abs(space._vec(a))
    if weight is not None:
        v = v * np.asarray(weight, dtype=float)
    order = np.argsort(-v, kind="stable")
    vals = v[order]
    masses = space.masses[order]
    # merge equal values into one piece
    keep = np.concatenate([[True], vals[1:] != vals[:-1]])
    groups = np.cumsum(keep) - 1
    merged_mass = np.bincount(groups, weights=masses)
    merged_vals = vals[keep]
    breaks = np.concatenate([[0.0], np.cumsum(merged_mass)])
    return Rearrangement(breaks, merged_vals)


def _piece_power_integral(phi: BoydFunction, p, lo, hi):
    """``int_lo^hi phi(t)^p dt/t`` (lo may be 0)."""
    if isinstance(phi, Atom) and phi.gamma == 0.0:
        e = phi.theta * p
        if lo == 0.0:
            return math.inf if e <= 0 else hi**e / e
        if e == 0.0:
            return math.log(hi / lo)
        return (hi**e - lo**e) / e
    f = lambda u: math.exp(p * float(phi.log_value(np.array(u))))
    a = -math.inf if lo == 0.0 else math.log(lo)
    val, err = integrate.quad(f, a, math.log(hi), epsrel=PIECE_RTOL, epsabs=0.0, limit=200)
    return val if math.isfinite(val) and val < 1e300 else math.inf


def _piece_sup(phi: BoydFunction, lo, hi):
    if isinstance(phi, Atom) and phi.gamma == 0.0:
        if phi.theta > 0:
            return hi**phi.theta
        if lo == 0.0:
            return math.inf if phi.theta < 0 else 1.0
        return lo**phi.theta
    ulo = math.log(hi) - 60.0 if lo == 0.0 else math.log(lo)
    u = np.linspace(ulo, math.log(hi), SUP_SAMPLES)
    return float(np.exp(np.max(phi.log_value(u))))


def lambda_norm(phi: BoydFunction, p, a, space: MeasureSpace, weight=None) -> float:
    """``|| phi (weight a)^* ||_{L^p(dt/t)}`` computed piece by piece.

    Pure powers use the closed form per piece, other parameters a 1-d
    quadrature in ``log t``.  A divergent first piece returns ``inf``.
    """
    p = float(p)
    r = rearrange(a, space, weight)
    total = 0.0
    for k, v in enumerate(r.values):
        if v == 0.0:
            break
        lo, hi = r.breaks[k], r.breaks[k + 1]
        if math.isinf(p):
            total = max(total, v * _piece_sup(phi, lo, hi))
        else:
            total += v**p * _piece_power_integral(phi, p, lo, hi)
        if math.isinf(total):
            return math.inf
    return total if math.isinf(p) else total ** (1.0 / p)


def lphi_norm(phi: BoydFunction, p, a, space: MeasureSpace, weight=None) -> float:
    """``(sum_i phi(|a_i| w_i)^p mu_i)^(1/p)``; atoms with ``a_i = 0`` contribute 0."""
    v = np.abs(space._vec(a))
    if weight is not None:
        v = v * np.asarray(weight, dtype=float)
    nz = v > 0
    vals = np.zeros_like(v)
    vals[nz] = boyd.evaluate(phi, v[nz])
    if math.isinf(p):
        return float(vals.max(initial=0.0))
    return float((vals[nz] ** p * space.masses[nz]).sum() ** (1.0 / p))


def dyadic_levels(level_weight) -> np.ndarray:
    """``k`` with ``2^k <= w < 2^(k+1)`` for every atom."""
    return np.floor(np.log2(np.asarray(level_weight, dtype=float))).astype(int)


def block_lorentz_norm(phi: BoydFunction, p, q, a, space: MeasureSpace, weight=None, levels=None,
                       level_factor=None) -> float:
    """l^q sum over dyadic levels of ``lambda_norm(phi, p, a chi_k)``.

    Parameters
    ----------
    weight : array_like, optional
        Multiplier inside each Lambda norm.
    levels : array_like, optional
        Weight whose dyadic levels define the blocks; defaults to ``weight``.
    level_factor : BoydFunction, optional
        Multiplies the block of level k by ``level_factor(2^k)``.
    """
    a = space._vec(a)
    lw = levels if levels is not None else weight
    if lw is None:
        raise InputError("block norm needs a level weight")
    ks = dyadic_levels(lw)
    parts = []
    for k in np.unique(ks):
        mask = ks == k
        val = lambda_norm(phi, p, np.where(mask, a, 0.0), space, weight)
        if level_factor is not None:
            val *= float(boyd.evaluate(level_factor, 2.0**k))
        parts.append(val)
    parts = np.array(parts)
    q = float(q)
    if math.isinf(q):
        return float(parts.max(initial=0.0))
    return float((parts**q).sum() ** (1.0 / q))


# ---------------------------------------------------------------------------
# interpolation checks


def lp_spec(p, space: MeasureSpace, multiplier=None) -> NormSpec:
    """``||multiplier a||_{L^p(mu)}`` as a weighted p-norm on the atoms."""
    mult = np.ones(space.size) if multiplier is None else np.asarray(multiplier, dtype=float)
    if math.isinf(p):
        return NormSpec(p, mult)
    return NormSpec(p, mult * space.masses ** (1.0 / p))


def _interp(tup, thetas, q, a, grid=None, adaptive=True):
    params = (q, [boyd.atom(th) for th in thetas])
    # a sup over a kinked profile converges only linearly in the grid step
    rel_tol = 1e-3 if math.isinf(q) else 1e-4
    return k_norm(tup, params, a, normalize=True, rel_tol=rel_tol, grid=grid, adaptive=adaptive).value


def grid_for_tuple(tup: BanachTuple) -> LogGrid:
    """Log grid wide enough to contain every weight ratio of a two-space tuple.

    The default grid covers ``2^(+-30)``; weights spread over many dyadic levels
    move the kinks of ``K(1, t)`` further out, so the span grows with the
    spread while the step stays that of the default grid.
    """
    g = default_grid(1)
    spread = np.max(np.abs(np.log2(tup.spaces[0].w / tup.spaces[1].w)))
    span_log2 = max(g.span / math.log(2), spread + 16.0)
    step_log2 = g.step / math.log(2)
    points = int(math.ceil(2 * span_log2 / step_log2 / 4)) * 4 + 1
    return LogGrid(1, span_log2 * math.log(2), points)


def _window_ok(ratio, window):
    return 1.0 / window <= ratio <= window


def stein_weiss_weight(p0, p1, theta, w0, w1):
    inv_p = (1.0 - theta) / p0 + theta / p1
    p = 1.0 / inv_p
    e0 = 0.0 if math.isinf(p0) else (1.0 - theta) * p / p0
    e1 = 0.0 if math.isinf(p1) else theta * p / p1
    return p, np.asarray(w0) ** e0 * np.asarray(w1) ** e1


def stein_weiss_check(p0, p1, theta, space: MeasureSpace, samples, window=WINDOW_C0, stability=1e-3,
                      name="stein_weiss") -> Report:
    """K^theta_p of ``L^p0(w0 dmu)`` and ``L^p1(w1 dmu)`` against ``L^p(w dmu)``.

    Weights are densities.  The K side is normalized by the kernel constant
    and evaluated on the default grid and on one refinement; rows pass when
    the ratio lies in the window and moves by less than ``stability``.
    """
    if not 0.0 < theta < 1.0:
        raise PreconditionError("theta must lie in (0, 1)")
    p, w = stein_weiss_weight(p0, p1, theta, space.w0, space.w1)
    tup = BanachTuple((lp_spec(p0, space.with_density(space.w0)), lp_spec(p1, space.with_density(space.w1))))
    target = space.with_density(w)
    rep = Report(name)
    g0 = default_grid(1)
    for i, a in enumerate(samples):
        lhs = _interp(tup, [theta], p, a)
        rhs = float(lp_spec(p, target).norm(space._vec(a)))
        ratio = lhs / rhs if rhs > 0 else (1.0 if lhs == 0 else math.inf)
        coarse = _interp(tup, [theta], p, a, grid=g0, adaptive=False)
        moved = abs(coarse / rhs - ratio) / ratio if rhs > 0 else 0.0
        rep.add(i, lhs, rhs, ratio, window, _window_ok(ratio, window) and moved <= stability)
    rep.notes["p"] = p
    return rep


def collinear(points, tol=1e-12) -> bool:
    (x0, y0), (x1, y1), (x2, y2) = points
    return abs((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)) <= tol


def three_space_block_check(alphas, ps, thetas, q, space: MeasureSpace, samples, window=WINDOW_C0,
                            stability=0.05, name="three_space_block") -> Report:
    """Three weighted lattices with power parameters against the block-Lorentz norm.

    Space j has the norm ``||w^alpha_j a||_{L^p_j(mu)}`` (the lattice with
    parameter ``t^alpha_j`` read as a multiplier on the weight).  The points
    ``(alpha_j, 1/p_j)`` must not be collinear.  The target is the l^q sum over
    dyadic levels of w of ``|| t^(1/p) (psi(w) a chi_k)^* ||_{L^q(dt/t)}`` with
    ``psi = t^(sum theta_j alpha_j)``.
    """
    th1, th2 = thetas
    th0 = 1.0 - th1 - th2
    if not (0 < th1 < 1 and 0 < th2 < 1 and th0 > 0):
        raise PreconditionError("need theta_1, theta_2 in (0, 1) with theta_1 + theta_2 < 1")
    pts = [(al, 0.0 if math.isinf(pj) else 1.0 / pj) for al, pj in zip(alphas, ps)]
    if collinear(pts):
        raise PreconditionError(f"parameter points {pts} are collinear")
    th = (th0, th1, th2)
    inv_p = sum(t / pj for t, pj in zip(th, ps) if not math.isinf(pj))
    p = 1.0 / inv_p
    s = sum(t * al for t, al in zip(th, alphas))
    w = space.w
    tup = BanachTuple(tuple(lp_spec(pj, space, w**al) for al, pj in zip(alphas, ps)))
    g0 = default_grid(2)
    g1 = g0.refined()
    rep = Report(name)
    for i, a in enumerate(samples):
        rhs = block_lorentz_norm(boyd.atom(1.0 / p), q, q, a, space, weight=w**s, levels=w)
        lhs0 = _interp(tup, [th1, th2], q, a, grid=g0, adaptive=False)
        lhs1 = _interp(tup, [th1, th2], q, a, grid=g1, adaptive=False)
        if rhs == 0.0:
            rep.add(i, lhs1, rhs, 1.0, window, lhs1 == 0.0)
            continue
        r0, r1 = lhs0 / rhs, lhs1 / rhs
        moved = abs(r1 - r0) / r1
        rep.add(i, lhs1, rhs, r1, window, _window_ok(r1, window) and moved <= stability)
    rep.notes["p"] = p
    rep.notes["psi_exponent"] = s
    return rep


def weighted_two_space_norms(theta, p0, p1, q, space: MeasureSpace, a, grid: LogGrid | None = None):
    """(K-side, block side, naive single-block side) for one sample.

    ``Lambda^{t^(1/p_j)}_{p_j}(w_j dmu) = L^{p_j}(w_j dmu)``; the weights are
    densities.  The blocks are the dyadic levels of ``w0 / w1`` and each block
    is measured in ``Lambda^psi_q(w dmu)`` with ``psi = t^(1/p)`` and ``w``
    given by the weight relation of the theorem, which for these parameters is
    the Stein-Weiss weight.
    """
    p, w = stein_weiss_weight(p0, p1, theta, space.w0, space.w1)
    tup = BanachTuple((lp_spec(p0, space.with_density(space.w0)), lp_spec(p1, space.with_density(space.w1))))
    a = space._vec(a)
    lhs = _interp(tup, [theta], q, a, grid=grid or grid_for_tuple(tup))
    psi = boyd.atom(1.0 / p)
    dens = space.with_density(w)
    block = block_lorentz_norm(psi, q, q, a, dens, levels=space.w0 / space.w1)
    naive = lambda_norm(psi, q, a, dens)
    return lhs, block, naive


def weighted_two_space_check(theta, p0, p1, q, instances, window=WINDOW_C0, grid: LogGrid | None = None,
                             name="weighted_two_space") -> Report:
    """Two weighted Lorentz spaces against the block formula, with a negative control.

    ``instances`` is a list of ``(space, a)``.  Rows named ``name`` hold
    K-side / block ratios and must lie in the window.  Rows named
    ``name + "_naive"`` hold K-side / single-block ratios; their ``pass``
    column records whether the naive guess stays in the window, and the
    control row passes when the naive guess fails on at least 80% of the
    multi-level instances.
    """
    if not 0.0 < theta < 1.0:
        raise PreconditionError("theta must lie in (0, 1)")
    if p0 == p1:
        raise PreconditionError("the ratio of the two parameters must have a nonzero index")
    rep = Report(name, informational={f"{name}_naive"})
    naive_fail = 0
    multi = 0
    for i, (space, a) in enumerate(instances):
        lhs, block, naive = weighted_two_space_norms(theta, p0, p1, q, space, a, grid)
        if block == 0.0:
            rep.add(i, lhs, block, 1.0, window, lhs == 0.0)
            continue
        r = lhs / block
        rn = lhs / naive
        rep.add(i, lhs, block, r, window, _window_ok(r, window))
        naive_ok = _window_ok(rn, window)
        rep.add(i, lhs, naive, rn, window, naive_ok, check_name=f"{name}_naive")
        if np.unique(dyadic_levels(space.w0 / space.w1)).size > 1:
            multi += 1
            naive_fail += not naive_ok
    frac = naive_fail / multi if multi else 0.0
    rep.add("control", naive_fail, multi, frac, 0.8, multi > 0 and frac >= 0.8, check_name=f"{name}_control")
    return rep


def multilevel_instance(levels: int, atoms_per_level: int, theta, p0, p1, rng, stride=4):
    """Space and sample with ``levels`` occupied dyadic levels of ``w0 / w1``.

    The ratio ``r = w0 / w1`` sweeps the levels while ``w1`` is chosen so that
    the interpolated density ``w`` stays of order one; with equal masses and
    values of comparable size every level then carries a block of the same
    size.  This is where a single Lorentz norm over all levels deviates most
    from the l^q sum of blocks.
    """
    n = levels * atoms_per_level
    k = np.repeat(np.arange(levels) * stride - (levels * stride) // 2, atoms_per_level)
    r = 2.0 ** (k + rng.uniform(0.05, 0.95, n))
    # w = r^e0 * w1^(e0 + e1) with the Stein-Weiss exponents
    p, _ = stein_weiss_weight(p0, p1, theta, 1.0, 1.0)
    e0 = 0.0 if math.isinf(p0) else (1.0 - theta) * p / p0
    e1 = 0.0 if math.isinf(p1) else theta * p / p1
    if e0 + e1 == 0.0:
        raise PreconditionError("the interpolated density does not depend on the weights")
    target = np.exp(rng.uniform(-0.25, 0.25, n))
    w1 = (target / r**e0) ** (1.0 / (e0 + e1))
    w0 = r * w1
    space = MeasureSpace(np.full(n, 1.0 / n), w0=w0, w1=w1)
    a = np.repeat(rng.uniform(0.8, 1.25, levels), atoms_per_level) * rng.choice([-1.0, 1.0], n)
    return space, a
