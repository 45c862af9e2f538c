"""Interpolation norms of Banach tuples and numerical checks of their structure.

``k_norm`` evaluates ``Phi_p(K(1, t_1, ..., t_n, a))`` by quadrature on a
log grid; the J side is bounded from above by explicit representations
``a = sum_m u_m dw_m``.  The check functions compare norms computed along
independent code paths and return ``Report`` objects.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import boyd
from .boyd import Atom, Flag, InterpParams, check_conditions, conjugate_exponent
from .errors import InputError, PreconditionError
from .ktuple import (DEFAULT_TOL, BanachTuple, NormSpec, TupleOperator, delta_norm, j_batch,
                     k_batch, k_inf_batch, sigma_norm)
from .phifunc import LogGrid, default_grid, phi_p_log, refine_until
from .report import Report

CHUNK = 1 << 15
WINDOW_C0 = 10.0
# refinement stops before a tensor grid exceeds this many nodes
MAX_NODES = 1 << 22


@dataclass
class KNormResult:
    value: float
    grid: dict
    max_gap: float
    flags: dict
    trace: list = field(default_factory=list)
    normalized: bool = False


def _as_params(params) -> InterpParams:
    if isinstance(params, InterpParams):
        if params.h1 is Flag.UNSET:
            return check_conditions(params)
        return params
    p, phis = params
    return boyd.make_params(p, phis)


def _flags(params):
    return {"h1": params.h1.value, "h2": params.h2.value, "h2bar": params.h2bar.value, "h3": params.h3.value}


def require_k_conditions(params: InterpParams):
    ok = params.h1 is Flag.TRUE or (math.isinf(params.outer_p) and params.h2bar is Flag.TRUE)
    if not ok:
        raise PreconditionError(f"K-space is not an interpolation space for these parameters: {_flags(params)}")


def kernel_constant(params) -> float:
    """``Phi_p(min(1, t_1, ..., t_n))``, the norm of the unit scalar kernel.

    Closed form ``(p / prod_k (p theta_k))^(1/p)`` for power parameters
    (``theta_0 = 1 - sum theta``), quadrature otherwise.
    """
    params = _as_params(params)
    p, phis = params.outer_p, params.phis
    if all(isinstance(f, Atom) and f.gamma == 0.0 for f in phis):
        thetas = [1.0 - sum(f.theta for f in phis)] + [f.theta for f in phis]
        if all(th > 0 for th in thetas):
            if math.isinf(p):
                return 1.0
            return (p / math.prod(p * th for th in thetas)) ** (1.0 / p)
    res = refine_until(lambda u: np.minimum(0.0, np.minimum.reduce(np.broadcast_arrays(*u))),
                       params, rel_tol=1e-8, log_provider=True)
    return res.value


def _node_matrix(log_mesh, shape):
    cols = [np.ones(int(np.prod(shape)))]
    for uk in log_mesh:
        cols.append(np.exp(np.broadcast_to(uk, shape).ravel()))
    return np.column_stack(cols)


def k_provider(tup: BanachTuple, a, functional="sum", tol=DEFAULT_TOL, power=1.0, stats=None):
    """Log-provider of ``K(1, t, a)`` (or ``K_inf``) on sparse log meshes."""
    a = np.asarray(a, dtype=float)

    def provider(log_mesh):
        shape = np.broadcast_shapes(*(u.shape for u in log_mesh))
        T = _node_matrix(log_mesh, shape)
        out = np.empty(T.shape[0])
        for lo in range(0, T.shape[0], CHUNK):
            Tc = T[lo:lo + CHUNK]
            if functional == "max":
                out[lo:lo + CHUNK] = k_inf_batch(tup, Tc, a, power=power)
            else:
                up, low, _ = k_batch(tup, Tc, a, tol=tol)
                out[lo:lo + CHUNK] = up
                if stats is not None:
                    gap = np.max((up - low) / np.maximum(up, 1e-300))
                    stats["max_gap"] = max(stats.get("max_gap", 0.0), float(gap))
        with np.errstate(divide="ignore"):
            return np.log(out).reshape(shape)

    return provider


def k_norm(tup: BanachTuple, params, a, functional="sum", rel_tol=1e-6, normalize=False,
           grid: LogGrid | None = None, max_levels=6, adaptive=True, tol=DEFAULT_TOL,
           power=1.0) -> KNormResult:
    """The K-method norm ``Phi_p(K(1, t_1, ..., t_n, a))``.

    Parameters
    ----------
    tup : BanachTuple
    params : InterpParams or (p, phis)
    a : array_like
    functional : {"sum", "max"}
        ``"max"`` uses K_inf (one-coordinate tuples only).
    rel_tol : float
        Agreement required between successive grid refinements.
    normalize : bool
        Divide by ``kernel_constant(params)``.
    adaptive : bool
        When False, evaluate once on ``grid`` (with Richardson extrapolation).

    Raises
    ------
    PreconditionError
        If neither h1 nor (p = inf and h2bar) holds.
    """
    params = _as_params(params)
    require_k_conditions(params)
    if params.n != tup.n:
        raise InputError(f"{params.n} parameter functions for a tuple with n = {tup.n}")
    a = tup._vec(a)
    grid = grid or default_grid(params.n)
    if not np.any(a):
        return KNormResult(0.0, grid.descriptor(), 0.0, _flags(params), [], normalize)
    stats = {}
    provider = k_provider(tup, a, functional, tol, power, stats)
    if adaptive and math.isinf(params.outer_p):
        value, trace, used = _sup_with_zoom(provider, params, grid)
    elif adaptive:
        levels, g = 0, grid
        while levels < max_levels and g.refined().points ** g.n <= MAX_NODES:
            g = g.refined()
            levels += 1
        max_levels = levels
        res = refine_until(provider, params, rel_tol=rel_tol, grid=grid, max_levels=max_levels, log_provider=True)
        value, trace, used = res.value, res.trace, res.grid
    else:
        from .phifunc import _richardson

        r = _richardson(provider, grid, params.phis, params.outer_p, True)
        value, trace, used = r.value, [(grid.level, r.value, r.tail_bound)], grid
    if normalize:
        value /= kernel_constant(params)
    return KNormResult(value, used.descriptor(), stats.get("max_gap", 0.0), _flags(params), trace, normalize)


def _sup_with_zoom(log_provider, params, grid: LogGrid, zooms=6, points=17):
    """``sup_t f(t) / prod phi(t)``: grid maximum, then local zooms around it.

    The maximum of a piecewise profile usually sits at a kink, where grid
    sampling converges only linearly; each zoom samples a box of +-2 steps
    around the current maximizer with ``points`` nodes per axis.
    """
    from .errors import NonConvergenceError

    phis = params.phis
    res = phi_p_log(log_provider(grid.log_mesh()), grid, phis, math.inf)
    trace = [(grid.level, res.value, res.tail_bound)]
    if not math.isfinite(res.tail_bound):
        raise NonConvergenceError("the supremum lies beyond the grid", trace)
    logg = log_provider(grid.log_mesh()) - sum(
        phi.log_value(u) for phi, u in zip(phis, grid.log_mesh()))
    logg = np.broadcast_to(logg, grid.shape)
    idx = np.unravel_index(int(np.argmax(logg)), grid.shape)
    centre = grid.u[list(idx)]
    best = float(logg[idx])
    h = grid.step
    for z in range(zooms):
        axes = [np.linspace(c - 2 * h, c + 2 * h, points) for c in centre]
        mesh = np.meshgrid(*axes, indexing="ij", sparse=True)
        vals = np.broadcast_to(log_provider(mesh) - sum(phi.log_value(u) for phi, u in zip(phis, mesh)),
                               (points,) * grid.n)
        j = np.unravel_index(int(np.argmax(vals)), vals.shape)
        if vals[j] > best:
            best = float(vals[j])
            centre = np.array([axes[k][j[k]] for k in range(grid.n)])
        h = 4 * h / (points - 1)
        trace.append((grid.level + z + 1, math.exp(best), 0.0))
    return math.exp(best), trace, grid


def k_norm_value(*args, **kwargs) -> float:
    return k_norm(*args, **kwargs).value


# ---------------------------------------------------------------------------
# J side


@dataclass
class JRepresentation:
    nodes: np.ndarray  # (M, n) values of t_1..t_n
    elements: np.ndarray  # (M, d)
    measures: np.ndarray  # (M,)
    defect: float

    @property
    def size(self) -> int:
        return len(self.measures)


@dataclass
class JResult:
    value: float
    representation: JRepresentation
    method: str
    constant: float = math.nan


def require_j_conditions(params: InterpParams):
    if not (params.h2 is Flag.TRUE or params.h3 is Flag.TRUE):
        raise PreconditionError(f"J-space representation needs h2 or h3: {_flags(params)}")


def _grid_nodes(grid):
    mesh = grid.log_mesh()
    shape = grid.shape
    U = np.column_stack([np.broadcast_to(u, shape).ravel() for u in mesh])
    w1 = grid.weights
    W = np.ones(shape)
    for k in range(grid.n):
        sh = [1] * grid.n
        sh[k] = grid.points
        W = W * w1.reshape(sh)
    return U, W.ravel()


def _ray_bound(tup, phis, p, a, U, dW):
    """Best representation ``u = a c(t)`` on the grid (Hoelder closed form)."""
    T = np.column_stack([np.ones(len(U)), np.exp(U)])
    J = j_batch(tup, T, a)
    logg = np.log(J)
    for k, phi in enumerate(phis):
        logg = logg - phi.log_value(U[:, k])
    if p == 1.0:
        m = int(np.argmin(logg))
        c = np.zeros(len(U))
        c[m] = 1.0 / dW[m]
        return math.exp(logg[m]), c
    pc = conjugate_exponent(p)
    # c_m proportional to g_m^(-p'), normalized so that sum c dW = 1
    e = -pc * logg
    shift = e.max()
    s = np.sum(np.exp(e - shift) * dW)
    value = math.exp(-(math.log(s) + shift) / pc)
    c = np.exp(e - shift) / s
    return value, c


def j_norm_upper(tup: BanachTuple, params, a, grid: LogGrid | None = None) -> JResult:
    """Upper bound for the J-method norm from explicit representations.

    Two families are tried and the smaller value is returned: a single ray
    ``u(t) = a c(t)`` and a sum of rays over the coordinates of ``a``.  For a
    ray the optimal profile is ``c ~ (J(t, a) / phi(t))^(-p')`` on the grid,
    which makes the discrete minimization exact.
    """
    params = _as_params(params)
    require_j_conditions(params)
    a = tup._vec(a)
    n = params.n
    grid = grid or LogGrid(n, 30 * boyd.LN2, {1: 1025, 2: 129}.get(n, 33))
    if not np.any(a):
        rep = JRepresentation(np.zeros((0, n)), np.zeros((0, tup.dim)), np.zeros(0), 0.0)
        return JResult(0.0, rep, "zero")
    U, dW = _grid_nodes(grid)
    p, phis = params.outer_p, params.phis
    v_ray, c = _ray_bound(tup, phis, p, a, U, dW)
    best = ("ray", v_ray, [(a, c)])
    if tup.dim > 1:
        parts = []
        total = 0.0
        for i in np.flatnonzero(a):
            e = np.zeros(tup.dim)
            e[i] = a[i]
            v, ci = _ray_bound(tup, phis, p, e, U, dW)
            total += v
            parts.append((e, ci))
        if total < v_ray:
            best = ("coordinate-rays", total, parts)
    method, value, parts = best
    keep = np.zeros(len(U), dtype=bool)
    for _, ci in parts:
        keep |= ci > 0
    elems = sum(np.outer(ci[keep], vec) for vec, ci in parts)
    nodes = np.exp(U[keep])
    meas = dW[keep]
    recon = (elems * meas[:, None]).sum(axis=0)
    defect = sigma_norm(tup, a - recon) if np.any(a - recon) else 0.0
    rep = JRepresentation(nodes, elems, meas, float(defect))
    if defect > 1e-8 * max(sigma_norm(tup, a), 1e-300):
        raise PreconditionError(f"representation defect {defect:.3e} above tolerance")
    return JResult(value, rep, method)


def single_cell_bound(tup: BanachTuple, params, a, points=65) -> JResult:
    """J-norm of ``u = a chi_{(1,2)^n} / (log 2)^n`` with its explicit constant.

    Returns the value together with ``C`` such that value <= C * delta_norm(a):
    on the cell ``J(t, a) <= 2 delta_norm(a)``, hence
    ``C = 2 (log 2)^(n/p - n) sup_cell 1/prod phi``.
    """
    params = _as_params(params)
    a = tup._vec(a)
    n, p, phis = params.n, params.outer_p, params.phis
    ln2 = boyd.LN2
    u = np.linspace(0.0, ln2, points)
    mesh = np.meshgrid(*([u] * n), indexing="ij")
    U = np.column_stack([m.ravel() for m in mesh])
    T = np.column_stack([np.ones(len(U)), np.exp(U)])
    logphi = sum(phi.log_value(U[:, k]) for k, phi in enumerate(phis))
    J = j_batch(tup, T, a) / ln2**n
    g = J * np.exp(-logphi)
    h = ln2 / (points - 1)
    w1 = np.full(points, h)
    w1[0] = w1[-1] = h / 2
    W = np.ones([points] * n)
    for k in range(n):
        sh = [1] * n
        sh[k] = points
        W = W * w1.reshape(sh)
    if math.isinf(p):
        value = float(g.max())
        C = 2.0 / ln2**n * float(np.exp(-logphi).max())
    else:
        value = float((g**p * W.ravel()).sum() ** (1.0 / p))
        C = 2.0 * ln2 ** (n / p - n) * float(np.exp(-logphi).max())
    elems = np.broadcast_to(a / ln2**n, (len(U), tup.dim))
    rep = JRepresentation(np.exp(U), elems, W.ravel(), 0.0)
    recon = (elems * W.ravel()[:, None]).sum(axis=0)
    rep.defect = float(sigma_norm(tup, a - recon)) if np.any(np.abs(a - recon) > 0) else 0.0
    return JResult(value, rep, "single-cell", C)


def sigma_integral(tup: BanachTuple, a, rel_tol=1e-6) -> float:
    """``int K(1, t, a) / max(1, t_1, ..., t_n) dt/t``; infinite when it diverges."""
    a = tup._vec(a)
    if not np.any(a):
        return 0.0
    n = tup.n
    base = k_provider(tup, a)

    def provider(u):
        return base(u) - np.maximum(0.0, np.maximum.reduce(np.broadcast_arrays(*u)))

    from .errors import NonConvergenceError

    try:
        return refine_until(provider, (1.0, [boyd.ONE] * n), rel_tol=rel_tol, log_provider=True).value
    except NonConvergenceError:
        return math.inf


# ---------------------------------------------------------------------------
# checks


def functor_type(params, norms) -> float:
    """``f(M_0, ..., M_n) = M_0 prod_k phibar_k(M_k / M_0)``."""
    M = np.asarray(norms, dtype=float)
    val = M[0]
    for k, phi in enumerate(params.phis, start=1):
        val *= boyd.dilation(phi, M[k] / M[0])
    return float(val)


def operator_bound_check(tupA, tupB, T: TupleOperator, params, samples, slack=1e-3, rel_tol=5e-4,
                         name="operator_bound") -> Report:
    params = _as_params(params)
    f = functor_type(params, T.norms)
    rep = Report(name)
    for i, a in enumerate(samples):
        lhs = k_norm_value(tupB, params, T.apply(a), rel_tol=rel_tol)
        rhs = f * k_norm_value(tupA, params, a, rel_tol=rel_tol)
        ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
        rep.add(i, lhs, rhs, ratio, slack, ratio <= 1.0 + slack)
    return rep


def pointwise_k_bound(tup, params, a, grid: LogGrid, rel_tol=5e-4) -> float:
    """``sup_t K(1, t, a) / (prod phi(t) ||a||_K)`` over the grid nodes."""
    params = _as_params(params)
    a = tup._vec(a)
    if not np.any(a):
        return 0.0
    norm = k_norm_value(tup, params, a, rel_tol=rel_tol)
    logk = k_provider(tup, a)(grid.log_mesh())
    logphi = sum(phi.log_value(u) for phi, u in zip(params.phis, grid.log_mesh()))
    return float(np.exp(np.max(logk - logphi))) / norm


def pointwise_k_bound_check(tup, params, samples, grid: LogGrid | None = None, stability=0.05,
                            name="pointwise_k_bound") -> Report:
    params = _as_params(params)
    grid = grid or default_grid(params.n)
    rep = Report(name)
    for i, a in enumerate(samples):
        c0 = pointwise_k_bound(tup, params, a, grid)
        c1 = pointwise_k_bound(tup, params, a, grid.refined())
        drift = abs(c1 - c0) / c1 if c1 > 0 else 0.0
        rep.add(i, c1, c0, drift, stability, math.isfinite(c1) and drift <= stability)
    return rep


def p_monotone_check(tup, phis, p, q, samples, stability=0.05, tol=1e-3, rel_tol=5e-4,
                     name="p_monotone") -> Report:
    """Normalized ``||a||_{K_q} <= C ||a||_{K_p}`` for p <= q.

    The normalized norms divide by the norm of the scalar kernel, which makes
    ``C <= 1`` for ``q = inf``.  For finite q the empirical constant is
    reported and must be stable under one grid refinement.
    """
    if not p <= q:
        raise PreconditionError("p_monotone needs p <= q")
    pp = _as_params((p, phis))
    qq = _as_params((q, phis))
    # a sup over a kinked profile converges only linearly in the grid step
    q_tol = max(rel_tol, 1e-3) if math.isinf(q) else rel_tol
    rep = Report(name)
    for i, a in enumerate(samples):
        lo = k_norm(tup, qq, a, normalize=True, rel_tol=q_tol).value
        hi = k_norm(tup, pp, a, normalize=True, rel_tol=rel_tol).value
        c = lo / hi
        if math.isinf(q):
            rep.add(i, lo, hi, c, tol, c <= 1.0 + tol)
        else:
            g = default_grid(len(phis)).refined()
            lo2 = k_norm(tup, qq, a, normalize=True, grid=g, rel_tol=q_tol).value
            hi2 = k_norm(tup, pp, a, normalize=True, grid=g, rel_tol=rel_tol).value
            drift = abs(lo2 / hi2 - c) / c
            rep.add(i, lo, hi, c, stability, drift <= stability)
    return rep


def j_into_k_check(tup, params, samples, window=WINDOW_C0, rel_tol=5e-4, name="j_into_k") -> Report:
    """Normalized K-norm against the upper bound for the J-norm.

    The K-norm is divided by the kernel constant so that both sides give 1 on
    the unit scalar example.  The ratio J_upper / K must lie in the window.
    """
    params = _as_params(params)
    rep = Report(name)
    for i, a in enumerate(samples):
        k = k_norm_value(tup, params, a, rel_tol=rel_tol, normalize=True)
        j = j_norm_upper(tup, params, a).value
        ratio = j / k
        rep.add(i, k, j, ratio, window, 1.0 / window <= ratio <= window)
    return rep


def phi_zero(phis):
    """``t / prod_k phi_k(t)``, the parameter attached to A_0."""
    return boyd.ratio(boyd.IDENTITY, boyd.product(*phis))


def permuted_params(phis, perm):
    """Parameters for the tuple ``(A_perm[0], ..., A_perm[n])``."""
    full = [phi_zero(phis)] + list(phis)
    return [full[j] for j in perm[1:]]


def permutation_check(tup, params, perms, samples, tol=1e-3, rel_tol=5e-4, name="permutation") -> Report:
    params = _as_params(params)
    rep = Report(name)
    for pi, perm in enumerate(perms):
        newp = _as_params((params.outer_p, permuted_params(params.phis, perm)))
        ptup = tup.permuted(perm)
        for i, a in enumerate(samples):
            lhs = k_norm_value(tup, params, a, rel_tol=rel_tol)
            rhs = k_norm_value(ptup, newp, a, rel_tol=rel_tol)
            ratio = lhs / rhs
            rep.add(f"{pi}-{i}", lhs, rhs, ratio, tol, abs(ratio - 1.0) <= tol)
    return rep


def reduction_constant(p, alpha, beta) -> float:
    """Exact factor between the n-space and merged (n-1)-space power norms."""
    if math.isinf(p):
        return 1.0
    return (1.0 / (p * alpha) + 1.0 / (p * beta)) ** (1.0 / p)


def reduction_check(tup, params, samples, tol=1e-3, rel_tol=5e-4, name="reduction") -> Report:
    """A_{n-1} = A_n: compare with the (n-1)-space norm for phi_{n-1} phi_n.

    For power parameters the two norms differ by the explicit factor
    ``reduction_constant``; it is divided out before comparing.
    """
    params = _as_params(params)
    n = params.n
    if n < 2:
        raise PreconditionError("reduction needs n >= 2")
    if tup.spaces[n - 1] != tup.spaces[n]:
        raise PreconditionError("reduction needs A_{n-1} = A_n")
    phis = params.phis
    merged = list(phis[:-2]) + [boyd.product(phis[-2], phis[-1])]
    small = BanachTuple(tup.spaces[:-1])
    mp = _as_params((params.outer_p, merged))
    if all(isinstance(f, Atom) and f.gamma == 0.0 for f in phis[-2:]):
        C = reduction_constant(params.outer_p, phis[-2].theta, phis[-1].theta)
    else:
        raise PreconditionError("reduction identity with explicit constant needs power parameters")
    rep = Report(name)
    for i, a in enumerate(samples):
        lhs = k_norm_value(tup, params, a, rel_tol=rel_tol)
        rhs = C * k_norm_value(small, mp, a, rel_tol=rel_tol)
        ratio = lhs / rhs
        rep.add(i, lhs, rhs, ratio, tol, abs(ratio - 1.0) <= tol)
    return rep


def power_check(tup, params, q, samples, tol=1e-3, rel_tol=1e-5, name="power") -> Report:
    """Power theorem on a one-coordinate tuple with the K_inf functional.

    Left: ``Phi_p^phi`` of K_inf for the quasi-normed tuple ``||.||^q``.
    Right: ``q^(n/p) (Phi_{pq}^{phi_q} of K_inf for the tuple)^q`` with
    ``phi_q(t) = phi(t^q)^(1/q)``.  The factor ``q^(n/p)`` is the Jacobian of
    ``t -> t^q`` in each of the n variables.
    """
    params = _as_params(params)
    if tup.dim != 1:
        raise InputError("power check is implemented for one-coordinate tuples")
    p, n = params.outer_p, params.n
    rp = _as_params((p * q, [boyd.rescale(phi, q) for phi in params.phis]))
    factor = 1.0 if math.isinf(p) else q ** (n / p)
    rep = Report(name)
    for i, a in enumerate(samples):
        lhs = k_norm_value(tup, params, a, functional="max", power=q, rel_tol=rel_tol)
        rhs = factor * k_norm_value(tup, rp, a, functional="max", rel_tol=rel_tol) ** q
        ratio = lhs / rhs
        rep.add(i, lhs, rhs, ratio, tol, abs(ratio - 1.0) <= tol)
    return rep


def class_check(kind, tup, params, space: NormSpec, samples, stability=0.05, name=None) -> Report:
    """Empirical embedding constants for the stability classes.

    ``class_CK``: X embeds into the K_inf space, ``||a||_{K_inf} <= C ||a||_X``.
    ``class_CJ``: the K_1 space embeds into X, ``||a||_X <= C ||a||_{K_1}``.
    Both constants are evaluated on two grids; the row passes when the
    constant is finite and stable.
    """
    params = _as_params(params)
    phis = params.phis
    rep = Report(name or kind)
    if kind == "class_CK":
        kp = _as_params((math.inf, phis))
    elif kind == "class_CJ":
        kp = _as_params((1.0, phis))
    else:
        raise InputError(f"unknown class {kind!r}")
    g0 = default_grid(len(phis))
    g1 = g0.refined()
    consts = []
    for g in (g0, g1):
        cs = []
        for a in samples:
            kv = k_norm(tup, kp, a, grid=g, adaptive=False).value
            xv = float(space.norm(a))
            cs.append(kv / xv if kind == "class_CK" else xv / kv)
        consts.append(max(cs))
    drift = abs(consts[1] - consts[0]) / consts[1]
    rep.add("constant", consts[1], consts[0], drift, stability, math.isfinite(consts[1]) and drift <= stability)
    return rep


def embedding_check(kind, instance) -> Report:
    """Dispatch on the check kind; ``instance`` is a dict of keyword arguments."""
    table = {
        "p_monotone": p_monotone_check,
        "j_into_k": j_into_k_check,
        "permutation": permutation_check,
        "reduction": reduction_check,
        "power": power_check,
    }
    if kind in table:
        return table[kind](**instance)
    if kind in ("class_CK", "class_CJ"):
        return class_check(kind, **instance)
    raise InputError(f"unknown embedding check {kind!r}")


# ---------------------------------------------------------------------------
# reiteration


def reiteration_check(tup: BanachTuple, points, lambdas, samples, window=WINDOW_C0, stability=0.05,
                      name="reiteration") -> Report:
    """Reiteration through intermediate K_1 spaces of an l1 tuple.

    ``points`` are m+1 parameter vectors theta^(j) in R^n (power parameters)
    and ``lambdas`` the m weights of the outer interpolation, with
    ``lambda_0 = 1 - sum(lambdas)``.  Each ``X_j = K_1^{theta^(j)}(A)`` of an l1
    tuple is again a weighted l1 space, so the outer interpolation is a K-norm
    of another l1 tuple.  Both sides use normalized norms and are compared
    against the direct space at ``sum_j lambda_j theta^(j)`` on three grids
    (each a refinement of the previous one); the ratio must lie in the window
    and move by at most ``stability`` across the grids.
    """
    points = np.asarray(points, dtype=float)
    lambdas = np.asarray(lambdas, dtype=float)
    m = len(lambdas)
    if points.shape[0] != m + 1:
        raise PreconditionError(f"need {m + 1} parameter points for {m} weights")
    if not (np.all(lambdas > 0) and 0.0 < lambdas.sum() < 1.0):
        raise PreconditionError("reiteration needs lambda_j > 0 and 0 < sum(lambda) < 1")
    if set(tup.exponents) != {1.0}:
        raise PreconditionError("reiteration check is implemented for l1 tuples")
    n = points.shape[1]
    if n != tup.n:
        raise PreconditionError("parameter points must have n coordinates")
    if np.any(points <= 0) or np.any(points.sum(axis=1) >= 1):
        raise PreconditionError("parameter points must lie inside the open simplex")
    if np.linalg.matrix_rank(points[1:] - points[0], tol=1e-10) < n:
        raise PreconditionError("parameter points do not generate R^n")
    lam_full = np.concatenate([[1.0 - lambdas.sum()], lambdas])
    target = lam_full @ points
    d = tup.dim
    outer_phis = [boyd.atom(l) for l in lambdas]
    grids = [default_grid(n)]
    grids.append(grids[0].refined())
    grids.append(grids[1].refined())
    outer_grids = [default_grid(m)]
    outer_grids.append(outer_grids[0].refined())
    # a third refinement of a 3-d tensor grid does not fit in memory
    outer_grids.append(outer_grids[1].refined() if m < 3 else outer_grids[1])
    ratios = []
    rows = []
    for g, og in zip(grids, outer_grids):
        # X_j as weighted l1: weight of coordinate i is the norm of e_i
        W = np.empty((m + 1, d))
        for j in range(m + 1):
            pj = (1.0, [boyd.atom(x) for x in points[j]])
            for i in range(d):
                e = np.zeros(d)
                e[i] = 1.0
                W[j, i] = k_norm(tup, pj, e, normalize=True, grid=g, adaptive=False).value
        X = BanachTuple.from_weights([1.0] * (m + 1), W)
        direct = (1.0, [boyd.atom(x) for x in target])
        per = []
        for a in samples:
            lhs = k_norm(X, (1.0, outer_phis), a, normalize=True, grid=og, adaptive=False).value
            rhs = k_norm(tup, direct, a, normalize=True, grid=g, adaptive=False).value
            per.append((lhs, rhs, lhs / rhs))
        rows.append(per)
        ratios.append([r[2] for r in per])
    rep = Report(name)
    final = rows[-1]
    for i, (lhs, rhs, ratio) in enumerate(final):
        series = [ratios[k][i] for k in range(len(grids))]
        drift = (max(series) - min(series)) / min(series)
        ok = 1.0 / window <= ratio <= window and drift <= stability
        rep.add(i, lhs, rhs, ratio, window, ok)
    rep.notes["target"] = target.tolist()
    return rep
