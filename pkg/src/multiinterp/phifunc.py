"""Weighted L^p functionals over (0, inf)^n with the Haar measure dt/t.

The integrals are evaluated on a tensor grid that is uniform in ``u = log t``,
so the Haar measure becomes Lebesgue measure and the trapezoid rule applies
directly.  Tails beyond the grid are accounted for with a geometric
continuation fitted to the outermost nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boyd import LN2, BoydFunction, InterpParams
from .errors import InputError, NonConvergenceError

DEFAULT_SPAN_LOG2 = 30.0
DEFAULT_POINTS = 513
TAIL_WARN_RTOL = 1e-4
# growth at a grid edge only matters for a supremum when the edge value is
# within this factor of the maximum
SUP_EDGE_RTOL = 1e-3
# nodes between the two samples used to fit the tail slope
TAIL_FIT_STRIDE = 4


@dataclass(frozen=True)
class LogGrid:
    """Uniform grid in ``u = log t`` on ``[-span, span]^n``.

    ``points`` is odd with ``points - 1`` divisible by 4, so that ``u = 0`` is
    a node and so is every node of the grid with half the points.
    """

    n: int
    span: float = DEFAULT_SPAN_LOG2 * LN2
    points: int = DEFAULT_POINTS
    level: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise InputError("grid dimension must be positive")
        if self.points < 5 or (self.points - 1) % 4:
            raise InputError("points must be 4k+1 with k >= 1")
        if not (self.span > 0):
            raise InputError("span must be positive")

    @property
    def u(self) -> np.ndarray:
        return np.linspace(-self.span, self.span, self.points)

    @property
    def t(self) -> np.ndarray:
        return np.exp(self.u)

    @property
    def step(self) -> float:
        return 2.0 * self.span / (self.points - 1)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.points, self.step)
        w[0] = w[-1] = 0.5 * self.step
        return w

    @property
    def shape(self):
        return (self.points,) * self.n

    def mesh(self, sparse=True):
        """Per-axis node arrays in t, broadcastable to ``shape``."""
        return np.meshgrid(*([self.t] * self.n), indexing="ij", sparse=sparse)

    def log_mesh(self, sparse=True):
        return np.meshgrid(*([self.u] * self.n), indexing="ij", sparse=sparse)

    def coarse(self) -> "LogGrid":
        """The same span with every other node."""
        return LogGrid(self.n, self.span, (self.points - 1) // 2 + 1, self.level)

    def refined(self, span_growth=0.25) -> "LogGrid":
        """Half the step on a span widened by ``span_growth`` of the base span."""
        factor = (1.0 + span_growth * (self.level + 1)) / (1.0 + span_growth * self.level)
        m = int(math.ceil(2 * (self.points - 1) * factor / 4.0)) * 4 + 1
        return LogGrid(self.n, self.span * factor, m, self.level + 1)

    def descriptor(self) -> dict:
        return {"n": self.n, "span_log2": self.span / LN2, "points": self.points, "level": self.level}


def default_grid(n: int) -> LogGrid:
    """Starting grid for refinement; coarser for n > 1 to bound tensor cost."""
    return LogGrid(n, DEFAULT_SPAN_LOG2 * LN2, {1: DEFAULT_POINTS, 2: 129}.get(n, 33))


@dataclass(frozen=True)
class PhiResult:
    value: float
    tail_bound: float
    truncation_warning: bool = False


def _log_weight(phis, grid):
    """``-sum_k log phi_k(t_k)`` on the sparse log mesh."""
    out = 0.0
    for phi, uk in zip(phis, grid.log_mesh()):
        out = out - phi.log_value(uk)
    return out


def _validate(values, grid):
    values = np.broadcast_to(np.asarray(values, dtype=float), grid.shape)
    if np.isnan(values).any():
        raise InputError("NaN sample")
    if (values < 0).any():
        raise InputError("negative sample")
    return values


def _trapezoid_with_tails(logF, h, axis):
    """Integrate ``exp(logF)`` along ``axis``; returns (value, tail) arrays.

    The tails continue ``exp(logF)`` geometrically beyond each endpoint with the
    slope fitted between the endpoint and the node ``TAIL_FIT_STRIDE`` inside.
    A non-decaying tail has infinite mass.
    """
    F = np.exp(logF)
    m = logF.shape[axis]
    w = np.full(m, h)
    w[0] = w[-1] = 0.5 * h
    body = np.tensordot(F, w, axes=([axis], [0]))
    k = TAIL_FIT_STRIDE
    other = tuple(a for a in range(F.ndim) if a != axis)
    marginal = F.sum(axis=other) if other else F
    tails = []
    for end, inner in ((0, k), (m - 1, m - 1 - k)):
        le = np.take(logF, end, axis=axis)
        li = np.take(logF, inner, axis=axis)
        fe = np.exp(le)
        with np.errstate(invalid="ignore", divide="ignore"):
            slope = (li - le) / (k * h)
            # slices at the edge of another axis may carry a kink right at the
            # boundary; borrow the slope of the slice 2k nodes inside instead
            for b in range(slope.ndim):
                size = slope.shape[b]
                if size > 4 * k + 1:
                    slope = np.take(slope, np.clip(np.arange(size), 2 * k, size - 1 - 2 * k), axis=b)
            # slices whose kink sits at the edge fall back to the marginal decay
            m_slope = (math.log(marginal[inner]) - math.log(marginal[end])) / (k * h) \
                if marginal[end] > 0 and marginal[inner] > 0 else math.nan
            slope = np.where(np.isfinite(slope) & (slope > 0), slope, m_slope)
            tail = np.where(fe > 0, np.where(slope > 0, fe / slope, np.inf), 0.0)
        tails.append(tail)
    return body, tails[0] + tails[1]


def _integrate(logF, h, n):
    """Iterated trapezoid with geometric tails over all n axes.

    Returns (value, tail_mass) where tail_mass is the total added by the
    continuations.  Working in a log-shifted frame keeps exp() finite.
    """
    shift = float(np.max(logF))
    if not math.isfinite(shift):
        return (0.0, 0.0) if shift == -math.inf else (math.inf, math.inf)
    arr = logF - shift
    tail_total = None
    # integrate the last axis first; carry the tail mass alongside
    for axis in range(n - 1, -1, -1):
        body, tail = _trapezoid_with_tails(arr, h, axis)
        full = body + tail
        if tail_total is None:
            tail_acc = tail
        else:
            # tail from earlier axes is integrated along this one without extra tails
            w = np.full(tail_total.shape[axis], h)
            w[0] = w[-1] = 0.5 * h
            tail_acc = np.tensordot(tail_total, w, axes=([axis], [0])) + tail
        tail_total = tail_acc
        with np.errstate(divide="ignore"):
            arr = np.log(full)
    value = float(np.exp(arr)) * math.exp(shift)
    tail = float(tail_total) * math.exp(shift)
    return value, tail


def phi_p_log(log_values, grid: LogGrid, phis, p) -> PhiResult:
    """Core of ``phi_p`` taking ``log f`` (``-inf`` where ``f = 0``)."""
    logg = np.broadcast_to(log_values + _log_weight(phis, grid), grid.shape)
    if math.isinf(p):
        top = float(np.max(logg))
        value = float(np.exp(top))
        # the sup may sit outside the grid if the kernel grows towards an edge;
        # growth far below the maximum cannot reach it within the tail
        relevant = top + math.log(SUP_EDGE_RTOL)
        tail = 0.0
        for axis in range(grid.n):
            for end, inner in ((0, TAIL_FIT_STRIDE), (grid.points - 1, grid.points - 1 - TAIL_FIT_STRIDE)):
                le = np.take(logg, end, axis=axis)
                li = np.take(logg, inner, axis=axis)
                growing = (le > li) & np.isfinite(le) & (le > relevant)
                if growing.any():
                    tail = math.inf
        return PhiResult(value, tail, tail > TAIL_WARN_RTOL * value)
    value, tail = _integrate(p * logg, grid.step, grid.n)
    if value == 0.0:
        return PhiResult(0.0, 0.0, False)
    root = value ** (1.0 / p)
    # the tail enters the p-th power; translate to the root scale
    tail_root = root * (1.0 - max(0.0, 1.0 - tail / value) ** (1.0 / p)) if math.isfinite(tail) else math.inf
    return PhiResult(root, tail_root, tail_root > TAIL_WARN_RTOL * root)


def phi_p(values, grid: LogGrid, params) -> PhiResult:
    """Weighted L^p norm of sampled values against ``dt/t`` on the grid.

    Parameters
    ----------
    values : array_like
        Nonnegative samples broadcastable to ``grid.shape``.
    grid : LogGrid
    params : InterpParams or tuple (p, phis)

    Returns
    -------
    PhiResult
        ``value`` includes the geometric tail continuation; ``tail_bound`` is the
        size of that continuation on the scale of the result.
    """
    p, phis = _unpack(params)
    if len(phis) != grid.n:
        raise InputError(f"{len(phis)} parameter functions for a {grid.n}-dimensional grid")
    values = _validate(values, grid)
    with np.errstate(divide="ignore"):
        logv = np.log(values)
    return phi_p_log(logv, grid, phis, p)


def _unpack(params):
    if isinstance(params, InterpParams):
        return params.outer_p, params.phis
    p, phis = params
    return float(p), tuple(phis)


@dataclass
class RefineResult:
    value: float
    tail_bound: float
    grid: LogGrid
    trace: list = field(default_factory=list)

    def trace_csv(self) -> str:
        lines = ["level,value,tail_bound"]
        for level, value, tail in self.trace:
            lines.append(f"{level},{value:.12g},{tail:.6g}")
        return "\n".join(lines) + "\n"


def _richardson(provider, grid, phis, p, log_provider):
    fine_log = _eval_provider(provider, grid, log_provider)
    fine = phi_p_log(fine_log, grid, phis, p)
    if math.isinf(p):
        return fine
    sl = (slice(None, None, 2),) * grid.n
    coarse = phi_p_log(np.broadcast_to(fine_log, grid.shape)[sl], grid.coarse(), phis, p)
    if fine.value == 0.0:
        return fine
    # extrapolate the p-th powers, which are the actual quadrature sums
    s_f, s_c = fine.value**p, coarse.value**p
    s = (4.0 * s_f - s_c) / 3.0
    value = max(s, 0.0) ** (1.0 / p)
    return PhiResult(value, fine.tail_bound, fine.truncation_warning)


def _eval_provider(provider, grid, log_provider):
    if log_provider:
        out = provider(grid.log_mesh())
        return np.broadcast_to(np.asarray(out, dtype=float), grid.shape)
    vals = _validate(provider(grid.mesh()), grid)
    with np.errstate(divide="ignore"):
        return np.log(vals)


def refine_until(provider, params, rel_tol=1e-6, grid: LogGrid | None = None,
                 max_levels=6, log_provider=False) -> RefineResult:
    """Refine the grid until two successive Phi_p values agree.

    Parameters
    ----------
    provider : callable
        Receives the list of sparse per-axis node arrays (t values, or u
        values when ``log_provider``) and returns samples of f (or log f).
    params : InterpParams or (p, phis)
    rel_tol : float
        Relative agreement required between successive levels.
    grid : LogGrid, optional
        Starting grid; defaults to the standard span and point count.
    max_levels : int
        Number of refinements allowed after the first grid.

    Raises
    ------
    NonConvergenceError
        If the budget runs out; the exception carries the trace.
    """
    if rel_tol <= 0:
        raise InputError("rel_tol must be positive")
    p, phis = _unpack(params)
    if grid is None:
        grid = default_grid(len(phis))
    trace = []
    prev = None
    for _ in range(max_levels + 1):
        res = _richardson(provider, grid, phis, p, log_provider)
        trace.append((grid.level, res.value, res.tail_bound))
        if res.value == 0.0 and res.tail_bound == 0.0:
            return RefineResult(0.0, 0.0, grid, trace)
        finite = math.isfinite(res.value) and math.isfinite(res.tail_bound)
        if prev is not None and finite and abs(res.value - prev) <= rel_tol * abs(res.value):
            return RefineResult(res.value, res.tail_bound, grid, trace)
        prev = res.value if finite else None
        grid = grid.refined()
    raise NonConvergenceError(f"no agreement to {rel_tol:g} after {max_levels} refinements", trace)
