"""Finite-dimensional Banach tuples and their K, K_inf and J functionals.

Every space of a tuple is ``R^d`` with a weighted p-norm ``||w * x||_p``.
``K(t, a)`` is the infimal convolution of the scaled norms ``t_j ||.||_j``
evaluated at ``a``.  It is computed exactly where structure allows (one
coordinate, all spaces l1, all spaces l2) and otherwise by a batched
Douglas-Rachford splitting whose iterates give a feasible decomposition
(upper bound) and a dual point (certified lower bound).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, SolverError

DEFAULT_TOL = 1e-6


def conjugate(p: float) -> float:
    if p == 1.0:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def _pnorm(x, p, axis=-1):
    x = np.abs(x)
    if math.isinf(p):
        return np.max(x, axis=axis)
    if p == 1.0:
        return np.sum(x, axis=axis)
    if p == 2.0:
        return np.sqrt(np.sum(x * x, axis=axis))
    scale = np.max(x, axis=axis, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    return np.squeeze(safe, axis=axis) * np.sum((x / safe) ** p, axis=axis) ** (1.0 / p)


@dataclass(frozen=True)
class NormSpec:
    """The norm ``x -> ||w * x||_p`` on R^d."""

    p: float
    weights: tuple

    def __post_init__(self):
        p = float(self.p)
        if not (p >= 1.0):
            raise InputError(f"norm exponent {p} is not in [1, inf]")
        w = tuple(float(x) for x in np.atleast_1d(self.weights))
        if not w or not all(x > 0 and math.isfinite(x) for x in w):
            raise InputError("weights must be positive and finite")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "weights", w)

    @property
    def w(self) -> np.ndarray:
        return np.asarray(self.weights)

    @property
    def dim(self) -> int:
        return len(self.weights)

    def norm(self, x, axis=-1):
        return _pnorm(np.asarray(x, dtype=float) * self.w, self.p, axis=axis)

    def dual_norm(self, y, axis=-1):
        return _pnorm(np.asarray(y, dtype=float) / self.w, conjugate(self.p), axis=axis)

    def prox(self, v, c):
        """Proximal map of ``c * ||w * .||_p`` for a batch ``v`` of shape (B, d)."""
        c = np.asarray(c, dtype=float)[:, None]
        w = self.w[None, :]
        if self.p == 1.0:
            return np.sign(v) * np.maximum(np.abs(v) - c * w, 0.0)
        if math.isinf(self.p):
            return v - _project_weighted_l1_ball(v, 1.0 / self.w, c[:, 0])
        if self.p == 2.0:
            return _prox_weighted_l2(v, self.w, c[:, 0])
        return _prox_weighted_lp(v, self.w, self.p, c[:, 0])

    def describe(self) -> str:
        p = "inf" if math.isinf(self.p) else f"{self.p:g}"
        return f"space {{ p = {p}, weights = [{', '.join(repr(x) for x in self.weights)}] }}"


def _project_weighted_l1_ball(v, s, radius):
    """Project rows of v onto ``{y : sum_i s_i |y_i| <= radius}`` (s > 0)."""
    B, d = v.shape
    a = np.abs(v)
    inside = (a * s).sum(axis=1) <= radius
    # y_i = sign(v_i) max(|v_i| - tau s_i, 0); breakpoints tau_i = |v_i|/s_i
    bp = a / s
    order = np.argsort(-bp, axis=1)
    bps = np.take_along_axis(bp, order, axis=1)
    ss = np.take_along_axis(np.broadcast_to(s, (B, d)), order, axis=1)
    as_ = np.take_along_axis(a, order, axis=1)
    # with the k largest active: sum s_i |v_i| - tau sum s_i^2 = radius
    cs_a = np.cumsum(ss * as_, axis=1)
    cs_s = np.cumsum(ss * ss, axis=1)
    tau_k = (cs_a - radius[:, None]) / cs_s
    # valid k: tau_k < bps[k] (k-th still active) and tau_k >= bps[k+1]
    nxt = np.concatenate([bps[:, 1:], np.zeros((B, 1))], axis=1)
    ok = (tau_k <= bps) & (tau_k >= nxt)
    k = np.argmax(ok, axis=1)
    tau = np.maximum(tau_k[np.arange(B), k], 0.0)
    y = np.sign(v) * np.maximum(a - tau[:, None] * s, 0.0)
    return np.where(inside[:, None], v, y)


def _prox_weighted_l2(v, w, c):
    """Prox of ``c ||w * x||_2``.

    Away from zero, ``x_i = v_i r / (r + c w_i^2)`` where ``r = ||w x||_2``
    solves ``F(r) = sum_i w_i^2 v_i^2 / (r + c w_i^2)^2 = 1``.  F is convex and
    decreasing, so Newton started at r = 0 increases monotonically to the root.
    """
    w2 = w * w
    cc = c[:, None]
    zero = np.sqrt(((v / w) ** 2).sum(axis=1)) <= c
    wv2 = w2 * v * v
    r = np.zeros_like(c)
    for _ in range(60):
        den = r[:, None] + cc * w2
        F = (wv2 / den**2).sum(axis=1)
        dF = (-2.0 * wv2 / den**3).sum(axis=1)
        step = np.where(zero | (dF == 0), 0.0, (F - 1.0) / dF)
        r = r - step
        if np.all(np.abs(step) <= 1e-15 * np.maximum(r, 1e-300)):
            break
    x = v * (r[:, None] / (r[:, None] + cc * w2))
    return np.where(zero[:, None], 0.0, x)


def _illinois(fun, lo, hi, iters=100, rtol=1e-14):
    """Vectorized regula falsi (Illinois variant) for increasing ``fun`` with a sign change on [lo, hi]."""
    flo, fhi = fun(lo), fun(hi)
    side = np.zeros(lo.shape, dtype=int)
    x = lo.copy()
    for _ in range(iters):
        denom = fhi - flo
        x = np.where(denom > 0, (lo * fhi - hi * flo) / np.where(denom > 0, denom, 1.0), 0.5 * (lo + hi))
        x = np.clip(x, lo, hi)
        fx = fun(x)
        right = fx > 0
        hi, lo = np.where(right, x, hi), np.where(right, lo, x)
        fhi = np.where(right, fx, np.where(side == -1, 0.5 * fhi, fhi))
        flo = np.where(right, np.where(side == 1, 0.5 * flo, flo), fx)
        side = np.where(right, 1, -1)
        if np.all(hi - lo <= rtol * np.abs(hi)):
            break
    return x


def _convex_root(a, b, g, e, iters=60):
    """Solve ``b s + g s ** e = a`` for s >= 0 (e >= 1, a >= 0) by Newton from the right.

    The left side is convex and increasing in s, so Newton iterates started
    above the root decrease monotonically onto it.
    """
    tiny = 1e-300
    s = np.minimum(a / np.maximum(b, tiny), (a / np.maximum(g, tiny)) ** (1.0 / e))
    for _ in range(iters):
        f = b * s + g * s**e - a
        step = np.where(s > 0, f / (b + e * g * s ** (e - 1.0)), 0.0)
        s = np.maximum(s - step, 0.0)
        if np.all(step <= 1e-15 * np.maximum(s, tiny)):
            break
    return s


def _prox_weighted_lp(v, w, p, c):
    """Prox of ``c ||w * x||_p`` for 1 < p < inf by nested one-dimensional solves.

    With ``r = ||w x||_p`` each coordinate satisfies
    ``|x_i| + c w_i^p |x_i|^(p-1) / r^(p-1) = |v_i|``; the outer solve matches r.
    The coordinate equation is convex in ``|x_i|`` for p >= 2 and in
    ``|x_i|^(p-1)`` for p < 2, which makes Newton's method monotone.
    """
    a = np.abs(v)
    zero = _pnorm(a / w, conjugate(p)) <= c
    cc = c[:, None]

    def coords(r):
        k = cc * w**p / r[:, None] ** (p - 1)
        if p >= 2.0:
            return _convex_root(a, 1.0, k, p - 1.0)
        # x = s^(1/(p-1)) turns the equation into k s + s^(1/(p-1)) = a
        s = _convex_root(a, k, 1.0, 1.0 / (p - 1.0))
        return s ** (1.0 / (p - 1.0))

    def excess(r):
        # relative form keeps the bracket well scaled near r = 0
        return 1.0 - _pnorm(w * coords(r), p) / r

    r_hi = _pnorm(w * a, p) + 1e-300
    r = _illinois(excess, r_hi * 1e-12, r_hi)
    x = np.sign(v) * coords(r)
    return np.where(zero[:, None], 0.0, x)


@dataclass(frozen=True)
class BanachTuple:
    """n+1 weighted p-norms on a shared coordinate space R^d."""

    spaces: tuple

    def __post_init__(self):
        spaces = tuple(s if isinstance(s, NormSpec) else NormSpec(*s) for s in self.spaces)
        if len(spaces) < 2:
            raise InputError("a tuple needs at least two spaces")
        dims = {s.dim for s in spaces}
        if len(dims) != 1:
            raise InputError("all spaces must share the coordinate dimension")
        object.__setattr__(self, "spaces", spaces)

    @classmethod
    def from_weights(cls, ps, weights):
        return cls(tuple(NormSpec(p, w) for p, w in zip(ps, weights)))

    @property
    def dim(self) -> int:
        return self.spaces[0].dim

    @property
    def n(self) -> int:
        return len(self.spaces) - 1

    @property
    def m(self) -> int:
        return len(self.spaces)

    @property
    def weight_matrix(self) -> np.ndarray:
        return np.array([s.w for s in self.spaces])

    @property
    def exponents(self) -> tuple:
        return tuple(s.p for s in self.spaces)

    def norms(self, a) -> np.ndarray:
        a = self._vec(a)
        return np.array([s.norm(a) for s in self.spaces])

    def permuted(self, perm) -> "BanachTuple":
        return BanachTuple(tuple(self.spaces[j] for j in perm))

    def _vec(self, a):
        a = np.asarray(a, dtype=float).reshape(-1)
        if a.shape[0] != self.dim:
            raise InputError(f"vector of length {a.shape[0]} for a {self.dim}-dimensional tuple")
        return a


@dataclass(frozen=True)
class KResult:
    value: float
    upper: float
    lower: float
    method: str
    decomposition: np.ndarray | None = field(default=None, compare=False, repr=False)

    @property
    def gap(self) -> float:
        return self.upper - self.lower


# ---------------------------------------------------------------------------
# simple functionals


def delta_norm(tup: BanachTuple, a) -> float:
    return float(np.max(tup.norms(a)))


def j_functional(tup: BanachTuple, t, a) -> float:
    t = _check_t(tup, t)
    return float(np.max(t * tup.norms(a)))


def j_batch(tup: BanachTuple, T, a) -> np.ndarray:
    """J at each row of T (shape (B, n+1))."""
    return np.max(np.asarray(T, dtype=float) * tup.norms(a)[None, :], axis=1)


def _check_t(tup, t):
    t = np.asarray(t, dtype=float).reshape(-1)
    if t.shape[0] != tup.m:
        raise InputError(f"expected {tup.m} parameters, got {t.shape[0]}")
    if not np.all(t > 0):
        raise InputError("all t_j must be positive")
    return t


# ---------------------------------------------------------------------------
# K functional


def k_functional(tup: BanachTuple, t, a, tol=DEFAULT_TOL, method="auto", max_iter=200000) -> KResult:
    """K(t, a) with a certified bound pair.

    Parameters
    ----------
    tup : BanachTuple
    t : array_like, shape (n+1,)
    a : array_like, shape (d,)
    tol : float
        Required relative gap between upper and lower bound.
    method : {"auto", "splitting"}
        ``"splitting"`` forces the general solver even when a closed form exists.

    Raises
    ------
    SolverError
        If the gap does not close within ``max_iter`` iterations.
    """
    t = _check_t(tup, t)
    a = tup._vec(a)
    up, lo, meth, X = k_batch(tup, t[None, :], a, tol=tol, method=method, max_iter=max_iter,
                              return_decomposition=True)
    return KResult(float(up[0]), float(up[0]), float(lo[0]), meth, X[0])


def sigma_norm(tup: BanachTuple, a, tol=DEFAULT_TOL) -> float:
    return k_functional(tup, np.ones(tup.m), a, tol=tol).value


def structure(tup: BanachTuple) -> str:
    if tup.dim == 1:
        return "scalar"
    ps = set(tup.exponents)
    if ps == {1.0}:
        return "l1"
    if ps == {2.0}:
        return "l2"
    if ps == {1.0, math.inf} and tup.exponents.count(math.inf) == 1:
        return "l1-linf"
    if ps == {1.0, 2.0} and tup.exponents.count(2.0) == 1:
        return "l1-l2"
    return "general"


def k_batch(tup: BanachTuple, T, a, tol=DEFAULT_TOL, method="auto", max_iter=200000,
            return_decomposition=False):
    """K(t, a) for every row t of T.

    Returns ``(upper, lower, method)`` (plus decompositions of shape
    (B, n+1, d) when requested).
    """
    T = np.asarray(T, dtype=float)
    a = tup._vec(a)
    kind = structure(tup) if method == "auto" else "splitting"
    W = tup.weight_matrix
    if not np.any(a):
        B = T.shape[0]
        out = (np.zeros(B), np.zeros(B), "zero")
        return out + (np.zeros((B, tup.m, tup.dim)),) if return_decomposition else out
    if kind in ("scalar", "l1"):
        # coordinate-wise cheapest space, ties to the lowest index
        cost = T[:, :, None] * W[None, :, :]  # (B, m, d)
        jbest = np.argmin(cost, axis=1)  # (B, d)
        val = (np.abs(a)[None, :] * np.min(cost, axis=1)).sum(axis=1)
        out = (val, val.copy(), kind)
        if return_decomposition:
            X = np.zeros((T.shape[0], tup.m, tup.dim))
            np.put_along_axis(X, jbest[:, None, :], np.broadcast_to(a, jbest.shape)[:, None, :], axis=1)
            out = out + (X,)
        return out
    if kind == "l1-linf":
        up, X = _k_l1_linf(tup, T, a, return_decomposition)
        out = (up, up.copy(), kind)
        return out + (X,) if return_decomposition else out
    if kind == "l1-l2":
        up, lo, X = _k_l1_l2(tup, T, a, return_decomposition)
        _raise_if_gap(up, lo, tol)
        return (up, lo, kind, X) if return_decomposition else (up, lo, kind)
    if kind == "l2":
        up, lo, X = _k_l2_dual(W, T, a, tol)
        _raise_if_gap(up, lo, tol)
        return (up, lo, "l2-dual", X) if return_decomposition else (up, lo, "l2-dual")
    up, lo, X = _k_splitting(tup, T, a, tol, max_iter)
    _raise_if_gap(up, lo, tol)
    return (up, lo, "splitting", X) if return_decomposition else (up, lo, "splitting")


def _k_l1_linf(tup, T, a, return_decomposition=False, chunk=4096):
    """Several weighted l1 spaces and one weighted l-inf space.

    The l1 parts merge into one l1 space with weights ``min_j t_j w_ji``.  For
    the remaining pair, truncating ``|a_i|`` at ``lam / v_i`` gives
    ``K = min_{lam >= 0} sum_i u_i (|a_i| - lam / v_i)_+ + s lam`` (u the merged
    l1 weights, v and s the l-inf weights and parameter), a convex piecewise
    linear function of lam whose minimum sits at 0 or a breakpoint
    ``lam = v_i |a_i|``.
    """
    ps = tup.exponents
    jinf = ps.index(math.inf)
    l1 = [j for j in range(tup.m) if j != jinf]
    W = tup.weight_matrix
    v = W[jinf]
    absa = np.abs(a)
    bp = np.concatenate([[0.0], v * absa])  # candidate lam values (d+1,)
    B = T.shape[0]
    up = np.empty(B)
    X = np.zeros((B, tup.m, tup.dim)) if return_decomposition else None
    for lo in range(0, B, chunk):
        Tc = T[lo:lo + chunk]
        cost = Tc[:, l1, None] * W[None, l1, :]  # (b, m-1, d)
        u = cost.min(axis=1)  # (b, d)
        excess = np.maximum(absa[None, None, :] - bp[None, :, None] / v[None, None, :], 0.0)  # (1, d+1, d)
        vals = (u[:, None, :] * excess).sum(axis=2) + Tc[:, jinf, None] * bp[None, :]
        k = np.argmin(vals, axis=1)
        up[lo:lo + chunk] = vals[np.arange(len(k)), k]
        if return_decomposition:
            lam = bp[k]
            xinf = np.sign(a)[None, :] * np.minimum(absa[None, :], lam[:, None] / v[None, :])
            rest = a[None, :] - xinf
            jl1 = np.asarray(l1)[np.argmin(cost, axis=1)]  # (b, d)
            Xc = np.zeros((len(k), tup.m, tup.dim))
            Xc[:, jinf, :] = xinf
            np.put_along_axis(Xc, jl1[:, None, :], rest[:, None, :], axis=1)
            X[lo:lo + chunk] = Xc
    return up, X


def _k_l1_l2(tup, T, a, return_decomposition=False, chunk=8192):
    """Several weighted l1 spaces and one weighted l2 space.

    The l1 parts merge into one l1 space with weights ``u = min_j t_j w_ji``.
    The dual problem maximizes ``sum |a_i| z_i`` over ``0 <= z_i <= u_i`` and
    ``sum (z_i / v_i)^2 <= s^2``; its solution is ``z_i = min(u_i, lam |a_i| v_i^2)``
    with lam fixed by the ellipsoid constraint, found exactly by sorting the
    breakpoints ``u_i / (|a_i| v_i^2)``.  The matching primal decomposition puts
    ``z_i / (lam v_i^2)`` into the l2 space, which gives a certified pair.
    """
    ps = tup.exponents
    j2 = ps.index(2.0)
    l1 = [j for j in range(tup.m) if j != j2]
    W = tup.weight_matrix
    v = W[j2]
    absa = np.abs(a)
    nz = absa > 0
    B = T.shape[0]
    up = np.empty(B)
    lo = np.empty(B)
    X = np.zeros((B, tup.m, tup.dim)) if return_decomposition else None
    av2 = absa[nz] ** 2 * v[nz] ** 2
    for start in range(0, B, chunk):
        Tc = T[start:start + chunk]
        b = Tc.shape[0]
        cost = Tc[:, l1, None] * W[None, l1, :]
        u = cost.min(axis=1)  # (b, d)
        s = Tc[:, j2]
        un = u[:, nz]
        bp = un / (absa[nz] * v[nz] ** 2)[None, :]
        order = np.argsort(bp, axis=1)
        bp_s = np.take_along_axis(bp, order, axis=1)
        sat = np.take_along_axis(un**2 / v[nz][None, :] ** 2, order, axis=1)
        free = np.take_along_axis(np.broadcast_to(av2, un.shape), order, axis=1)
        # g at lam in (bp_s[k-1], bp_s[k]): sum of first k saturated + lam^2 * remaining free
        sat_c = np.concatenate([np.zeros((b, 1)), np.cumsum(sat, axis=1)], axis=1)
        free_c = np.concatenate([np.cumsum(free[:, ::-1], axis=1)[:, ::-1], np.zeros((b, 1))], axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            lam_k = np.sqrt(np.maximum(s[:, None] ** 2 - sat_c, 0.0) / free_c)
        lower_ok = np.concatenate([np.ones((b, 1), dtype=bool), lam_k[:, 1:] >= bp_s], axis=1)
        upper_ok = np.concatenate([lam_k[:, :-1] <= bp_s, np.zeros((b, 1), dtype=bool)], axis=1)
        valid = lower_ok & upper_ok & np.isfinite(lam_k)
        k = np.argmax(valid, axis=1)
        has = valid.any(axis=1)
        lam = np.where(has, lam_k[np.arange(b), np.minimum(k, lam_k.shape[1] - 1)], np.inf)
        z = np.minimum(un, lam[:, None] * (absa[nz] * v[nz] ** 2)[None, :])
        dual = (absa[nz][None, :] * z).sum(axis=1)
        # primal: l2 part x_i = z_i / (lam v_i^2), the rest to the cheapest l1 space
        x2 = np.where(np.isfinite(lam)[:, None], z / (lam[:, None] * v[nz][None, :] ** 2), 0.0)
        x2 = np.minimum(x2, absa[nz][None, :])
        primal = (un * (absa[nz][None, :] - x2)).sum(axis=1) + s * np.sqrt(((v[nz][None, :] * x2) ** 2).sum(axis=1))
        # the primal sum cancels when x2 ~ |a|; below the rounding scale the
        # dual value (computed without cancellation) is the answer
        rounding = 1e-12 * (un * absa[nz][None, :]).sum(axis=1)
        close = np.abs(primal - dual) <= rounding
        up[start:start + b] = np.where(close, dual, primal)
        lo[start:start + b] = np.where(close, dual, np.minimum(dual, primal))
        if return_decomposition:
            Xc = np.zeros((b, tup.m, tup.dim))
            sg = np.sign(a[nz])
            full_x2 = np.zeros((b, tup.dim))
            full_x2[:, nz] = sg[None, :] * x2
            Xc[:, j2, :] = full_x2
            rest = a[None, :] - full_x2
            jl1 = np.asarray(l1)[np.argmin(cost, axis=1)]
            np.put_along_axis(Xc, jl1[:, None, :], rest[:, None, :], axis=1)
            X[start:start + b] = Xc
    return up, lo, X


def _raise_if_gap(up, lo, tol):
    bad = up - lo > tol * np.maximum(up, 1e-300)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SolverError(f"gap {up[i] - lo[i]:.3e} above tolerance at row {i}", float(up[i]), float(lo[i]))


def _k_l2_dual(W, T, a, tol, max_iter=300):
    """All spaces weighted l2: minimize a smooth dual over the part costs.

    Writing each cost ``t_j ||w_j x_j||`` variationally and eliminating x gives
    ``K = min_{nu >= 0} 1/2 sum_i a_i^2 / D_i + 1/2 sum_j nu_j`` with
    ``D_i = sum_j nu_j / (t_j w_ji)^2``; at the optimum ``nu_j`` is the cost of
    part j.  Projected Newton with Levenberg-Marquardt damping (the Hessian has
    rank at most d), batched over the rows of T.
    """
    B, m = T.shape
    Cb = 1.0 / (T[:, :, None] * W[None, :, :]) ** 2  # (B, m, d)
    a2 = a * a
    nu = T * np.sqrt((a2[None, :] * W * W).sum(axis=1))[None, :] / m

    f = fval_rows(nu, Cb, a2)
    active_rows = np.arange(B)
    up = np.full(B, np.inf)
    lo = np.zeros(B)
    X = np.zeros((B, m, a.size))
    for _ in range(max_iter):
        nu_a, C, fa = nu[active_rows], Cb[active_rows], f[active_rows]
        D = np.einsum("bj,bji->bi", nu_a, C)
        r = a2 / D**2
        g = -0.5 * np.einsum("bi,bji->bj", r, C) + 0.5
        H = np.einsum("bi,bji,bki->bjk", r / D, C, C)
        scale = nu_a.sum(axis=1, keepdims=True)
        pg = np.where((nu_a > 0) | (g < 0), g, 0.0)
        eps = np.minimum(1e-12 * scale, np.abs(pg).max(axis=1, keepdims=True) * scale)
        active = (nu_a <= eps) & (g > 0)
        gr = np.where(active, 0.0, g)
        mu = np.sqrt((pg * pg).sum(axis=1)) / scale[:, 0]
        Hr = np.where(active[:, :, None] | active[:, None, :], 0.0, H)
        diag = np.where(active, 1.0, mu[:, None] + 1e-14 * np.abs(np.diagonal(H, axis1=1, axis2=2)))
        Hr = Hr + diag[:, :, None] * np.eye(m)[None]
        step = -np.linalg.solve(Hr, gr[:, :, None])[:, :, 0]
        alpha = np.ones(len(active_rows))
        done = np.zeros(len(active_rows), dtype=bool)
        new, newf = nu_a, fa
        for _ls in range(60):
            cand = np.maximum(nu_a + alpha[:, None] * step, 0.0)
            cf = fval_rows(cand, C, a2)
            dec = cf <= fa + 1e-4 * (g * (cand - nu_a)).sum(axis=1)
            take = dec & ~done
            new = np.where(take[:, None], cand, new)
            newf = np.where(take, cf, newf)
            done |= dec
            if done.all():
                break
            alpha = np.where(done, alpha, 0.5 * alpha)
        nu[active_rows], f[active_rows] = new, newf
        u, l, x = _l2_bounds(W, T[active_rows], a, new, C)
        up[active_rows], lo[active_rows], X[active_rows] = u, l, x
        stalled = ~done | (np.abs(newf - fa) <= 1e-15 * np.abs(fa))
        finished = (u - l <= 0.1 * tol * u) | stalled
        active_rows = active_rows[~finished]
        if active_rows.size == 0:
            break
    return up, lo, X


def fval_rows(nu, C, a2):
    D = np.einsum("bj,bji->bi", nu, C)
    with np.errstate(divide="ignore"):
        return 0.5 * (a2 / D).sum(axis=1) + 0.5 * nu.sum(axis=1)


def _l2_bounds(W, T, a, nu, C):
    D = np.einsum("bj,bji->bi", nu, C)
    y = a / D  # dual candidate
    Xs = nu[:, :, None] * C * y[:, None, :]  # (B, m, d); sums to a
    up = (T * np.sqrt(((W[None] * Xs) ** 2).sum(axis=2))).sum(axis=1)
    dual = np.sqrt(((y[:, None, :] / W[None]) ** 2).sum(axis=2))  # (B, m)
    ratio = np.max(dual / T, axis=1)
    lo = np.maximum((y * a).sum(axis=1), 0.0) / ratio
    return up, lo, Xs


def _objective(tup, T, X):
    return sum(T[:, j] * s.norm(X[:, j, :]) for j, s in enumerate(tup.spaces))


def _dual_lower(tup, T, a, y):
    ratio = np.max(np.stack([s.dual_norm(y) for s in tup.spaces], axis=1) / T, axis=1)
    val = (y * a[None, :]).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = np.where(ratio > 0, np.maximum(val, 0.0) / ratio, 0.0)
    return lo


def _k_splitting(tup, T, a, tol, max_iter, relax=1.5, check_every=50):
    """Douglas-Rachford on sum_j t_j ||x_j||_j subject to sum_j x_j = a.

    The constraint set is handled by projection, the separable objective by
    per-space proximal maps.  Each row is scaled so that the cheapest space
    has unit cost, which keeps the step size in a sensible range.
    """
    B = T.shape[0]
    m, d = tup.m, tup.dim
    scale_a = np.max(np.abs(a))
    an = a / scale_a
    # per-row normalization of t: K(t,a) = s K(t/s, a)
    unit = np.array([[s.norm(np.eye(d)[i]) for i in range(d)] for s in tup.spaces])  # (m, d)
    cheapest = np.min(T[:, :, None] * unit[None], axis=(1, 2))
    Tn = T / cheapest[:, None]
    gamma = 1.0
    Z = np.broadcast_to(an / m, (B, m, d)).copy()
    best_up = np.full(B, np.inf)
    best_lo = np.zeros(B)
    best_X = np.zeros((B, m, d))
    active = np.arange(B)
    for it in range(1, max_iter + 1):
        Za = Z[active]
        Ta = Tn[active]
        resid = (Za.sum(axis=1) - an[None, :]) / m
        Xh = Za - resid[:, None, :]
        V = 2.0 * Xh - Za
        Xf = np.empty_like(V)
        for j, s in enumerate(tup.spaces):
            Xf[:, j, :] = s.prox(V[:, j, :], gamma * Ta[:, j])
        Z[active] = Za + relax * (Xf - Xh)
        if it % check_every == 0 or it == max_iter:
            up = _objective(tup, Ta, Xh)
            y = -resid / gamma
            lo = _dual_lower(tup, Ta, an, y)
            better = up < best_up[active]
            best_up[active] = np.where(better, up, best_up[active])
            best_X[active] = np.where(better[:, None, None], Xh, best_X[active])
            best_lo[active] = np.maximum(best_lo[active], lo)
            gap = best_up[active] - best_lo[active]
            done = gap <= 0.5 * tol * best_up[active]
            active = active[~done]
            if active.size == 0:
                break
    factor = cheapest * scale_a
    return best_up * factor, best_lo * factor, best_X * scale_a


def k_inf_functional(tup: BanachTuple, t, a, tol=DEFAULT_TOL) -> KResult:
    """K_inf(t, a) = inf over decompositions of max_j t_j ||a_j||_j.

    Uses the minimax identity K_inf(t, a) = max over the simplex of
    K(lam * t, a); the concave maximization is done by shrinking lattice
    search on the simplex.  One coordinate has the closed form
    |a| / sum_j 1/(t_j w_j).
    """
    t = _check_t(tup, t)
    a = tup._vec(a)
    if not np.any(a):
        return KResult(0.0, 0.0, 0.0, "zero")
    if tup.dim == 1:
        v = abs(a[0]) / np.sum(1.0 / (t * tup.weight_matrix[:, 0]))
        return KResult(v, v, v, "scalar")
    m = tup.m
    center = np.full(m - 1, 1.0 / m)
    radius = 1.0
    best = -np.inf
    best_lo = -np.inf
    pts = {1: 33, 2: 13}.get(m - 1, 7)
    for _ in range(60):
        axes = [np.linspace(c - radius, c + radius, pts) for c in center]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m - 1)
        last = 1.0 - grid.sum(axis=1)
        lam = np.concatenate([grid, last[:, None]], axis=1)
        ok = np.all(lam >= 0, axis=1)
        lam = lam[ok]
        up, lo, _ = k_batch(tup, np.maximum(lam, 1e-9) * t[None, :], a, tol=tol * 0.1)
        k = int(np.argmax(lo))
        prev = best
        if lo[k] > best_lo:
            best_lo = float(lo[k])
            best = float(up[k])
            center = lam[k, :-1]
        radius *= 0.5
        if radius < 1e-9 or (prev > -np.inf and abs(best - prev) <= 0.01 * tol * best and radius < 1e-4):
            break
    # any simplex point gives a lower bound; the upper bound comes from the
    # concavity gap of the final lattice, bounded by the solver tolerance
    return KResult(best, best, best_lo, "simplex")


def brute_force_k(tup: BanachTuple, t, a, points=5, levels=30, inf_norm=False) -> float:
    """Lattice search over decompositions with a shrinking window.

    Test oracle only (d <= 3, n <= 2).  The first n parts range over a box
    lattice; the last part is the remainder.  After each level the window is
    recentred on the best point and halved.
    """
    t = _check_t(tup, t)
    a = tup._vec(a)
    n, d = tup.n, tup.dim
    dims = n * d
    if dims > 6:
        raise InputError("brute force is limited to n*d <= 6")
    center = np.zeros(dims)
    half = float(np.max(np.abs(a))) * 1.5 + 1e-300
    best = np.inf
    offsets = np.linspace(-1.0, 1.0, points)
    mesh = np.stack(np.meshgrid(*([offsets] * dims), indexing="ij"), axis=-1).reshape(-1, dims)
    for _ in range(levels):
        cand = center[None, :] + half * mesh
        parts = cand.reshape(-1, n, d)
        last = a[None, :] - parts.sum(axis=1)
        full = np.concatenate([parts, last[:, None, :]], axis=1)
        costs = np.stack([t[j] * s.norm(full[:, j, :]) for j, s in enumerate(tup.spaces)], axis=1)
        obj = costs.max(axis=1) if inf_norm else costs.sum(axis=1)
        k = int(np.argmin(obj))
        if obj[k] <= best:
            best = float(obj[k])
            center = cand[k]
        half *= 0.6
    return best


# ---------------------------------------------------------------------------
# operators


@dataclass(frozen=True)
class TupleOperator:
    """A linear map acting identically on every space of a tuple.

    ``norms`` holds the per-space operator norms ``||T||_{A_j -> B_j}``.
    """

    matrix: np.ndarray = field(compare=False)
    norms: tuple

    @classmethod
    def diagonal(cls, diag, source: BanachTuple, target: BanachTuple) -> "TupleOperator":
        """Diagonal map; norms are exact when each pair of spaces shares p."""
        diag = np.asarray(diag, dtype=float)
        norms = []
        for sa, sb in zip(source.spaces, target.spaces):
            if sa.p != sb.p:
                raise InputError("diagonal operator norms need matching exponents")
            norms.append(float(np.max(np.abs(diag) * sb.w / sa.w)))
        return cls(np.diag(diag), tuple(norms))

    @classmethod
    def from_matrix(cls, matrix, source: BanachTuple, target: BanachTuple, iters=500):
        """General matrix; operator norms by power iteration (l2 spaces only)."""
        M = np.asarray(matrix, dtype=float)
        norms = []
        for sa, sb in zip(source.spaces, target.spaces):
            if sa.p != 2.0 or sb.p != 2.0:
                raise InputError("non-diagonal operator norms are supported for l2 spaces only")
            A = (sb.w[:, None] * M) / sa.w[None, :]
            norms.append(float(np.linalg.norm(A, 2)))
        return cls(M, tuple(norms))

    def apply(self, a):
        return self.matrix @ np.asarray(a, dtype=float)


def k_inf_batch(tup: BanachTuple, T, a, power=1.0) -> np.ndarray:
    """K_inf at every row of T for a one-coordinate tuple.

    With ``power = q`` the spaces carry the quasi-norms ``||x||_j ** q``; the
    optimal split equalizes ``t_j (w_j |x_j|)^q`` across j, which gives
    ``(|a| / sum_j t_j^(-1/q) / w_j) ** q``.
    """
    if tup.dim != 1:
        raise InputError("batched K_inf is available for one-coordinate tuples only")
    a = tup._vec(a)
    T = np.asarray(T, dtype=float)
    w = tup.weight_matrix[:, 0]
    q = float(power)
    s = (T ** (-1.0 / q) / w[None, :]).sum(axis=1)
    return (abs(a[0]) / s) ** q
