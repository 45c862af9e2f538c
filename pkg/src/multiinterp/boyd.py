"""Boyd functions as symbolic expression trees.

A Boyd function is a positive continuous function on (0, inf) with value 1
at t = 1 whose dilation function ``sup_s phi(t s) / phi(s)`` is finite.  The
family handled here is generated by power-log atoms

    t -> t**theta * (1 + |log t|)**gamma

under products, real powers, composition and inversion.  All evaluation is
done in logarithmic coordinates (``u = log t``) so that indices can be
estimated at scales far beyond the floating point range of ``t`` itself.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import ConsistencyError, DomainError, PreconditionError, StructureError

LN2 = math.log(2.0)

# dilation sup grid: s in [2**-40, 2**40], doubled until two levels agree
DILATION_SPAN_LOG2 = 40.0
DILATION_POINTS = 4096
DILATION_RTOL = 1e-6
DILATION_MAX_DOUBLINGS = 4

# index estimator: t = 2**(+-E); E large enough that the log factor of the
# power-log family is below the tolerance band for |gamma| <= 3
INDEX_LOG2_SCALE = 2.0**17
INDEX_TOLERANCE = 1e-2


class Provenance(str, enum.Enum):
    CLOSED_FORM = "closed-form"
    ESTIMATED = "estimated"


class BoydFunction:
    """Base class of the expression tree.

    Subclasses implement ``log_value(u)`` returning ``log phi(exp(u))`` for an
    array ``u``.  Everything else is derived from it.
    """

    def log_value(self, u):
        raise NotImplementedError

    def __call__(self, t):
        return evaluate(self, t)

    # closed-form hooks, overridden where available
    def _exact_indices(self):
        return None

    def _monotone_sign(self):
        return _sampled_monotone_sign(self)

    @property
    def smooth_tail(self) -> bool:
        """Membership in the class with ``t^m |D^m phi| <= C_m phi`` on [1, inf)."""
        return False

    @cached_property
    def indices(self) -> "IndexEstimate":
        return boyd_indices(self)

    @property
    def lower_index(self) -> float:
        return self.indices.lower

    @property
    def upper_index(self) -> float:
        return self.indices.upper

    @property
    def index_provenance(self) -> Provenance:
        return self.indices.provenance

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True, eq=True)
class Atom(BoydFunction):
    theta: float
    gamma: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.gamma)):
            raise StructureError("atom exponents must be finite")

    def log_value(self, u):
        u = np.asarray(u, dtype=float)
        out = self.theta * u
        if self.gamma != 0.0:
            out = out + self.gamma * np.log1p(np.abs(u))
        return out

    def _exact_indices(self):
        return (self.theta, self.theta)

    def _monotone_sign(self):
        # d/du log phi = theta + gamma*sign(u)/(1+|u|) never changes sign
        # iff |theta| >= |gamma|
        if self.theta == 0.0:
            return 0
        if abs(self.theta) >= abs(self.gamma):
            return 1 if self.theta > 0 else -1
        return 0

    @property
    def smooth_tail(self):
        return True

    @property
    def is_power(self):
        return self.gamma == 0.0


@dataclass(frozen=True, eq=True)
class Product(BoydFunction):
    factors: tuple

    def log_value(self, u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for f in self.factors:
            out = out + f.log_value(u)
        return out

    def _exact_indices(self):
        # exact only when every factor has coinciding indices
        total = 0.0
        for f in self.factors:
            idx = f._exact_indices()
            if idx is None or idx[0] != idx[1]:
                return None
            total += idx[0]
        return (total, total)

    @property
    def smooth_tail(self):
        return all(f.smooth_tail for f in self.factors)


@dataclass(frozen=True, eq=True)
class Power(BoydFunction):
    base: BoydFunction
    lam: float

    def __post_init__(self):
        if self.lam == 0.0 or not math.isfinite(self.lam):
            raise StructureError("power exponent must be finite and nonzero")

    def log_value(self, u):
        return self.lam * self.base.log_value(u)

    def _exact_indices(self):
        idx = self.base._exact_indices()
        if idx is None:
            return None
        lo, hi = self.lam * idx[0], self.lam * idx[1]
        return (min(lo, hi), max(lo, hi))

    def _monotone_sign(self):
        s = self.base._monotone_sign()
        return s if self.lam > 0 else -s

    @property
    def smooth_tail(self):
        return self.base.smooth_tail


@dataclass(frozen=True, eq=True)
class Compose(BoydFunction):
    outer: BoydFunction
    inner: BoydFunction

    def log_value(self, u):
        return self.outer.log_value(self.inner.log_value(u))

    def _exact_indices(self):
        o = self.outer._exact_indices()
        i = self.inner._exact_indices()
        if o is None or i is None or o[0] != o[1] or i[0] != i[1]:
            return None
        return (o[0] * i[0], o[0] * i[0])

    def _monotone_sign(self):
        return self.outer._monotone_sign() * self.inner._monotone_sign()

    @property
    def smooth_tail(self):
        return self.outer.smooth_tail and self.inner.smooth_tail


@dataclass(frozen=True, eq=True)
class Inverse(BoydFunction):
    base: BoydFunction
    _sign: int = field(default=0, compare=False, repr=False)

    def __post_init__(self):
        sign = monotone_sign(self.base)
        if sign == 0:
            raise StructureError(f"inverse of non-monotone function {to_string(self.base)}")
        object.__setattr__(self, "_sign", sign)

    def log_value(self, u):
        u = np.asarray(u, dtype=float)
        return _invert_log(self.base, u, self._sign)

    def _exact_indices(self):
        idx = self.base._exact_indices()
        if idx is None or idx[0] != idx[1] or idx[0] == 0.0:
            return None
        return (1.0 / idx[0], 1.0 / idx[0])

    def _monotone_sign(self):
        return self._sign


def _invert_log(base, u, sign, iters=200):
    """Solve ``base.log_value(v) = u`` for v by bracketed bisection."""
    shape = u.shape
    target = u.ravel()
    lo = -np.ones_like(target)
    hi = np.ones_like(target)
    g = lambda v: sign * base.log_value(v)
    tgt = sign * target
    for _ in range(2000):
        bad = g(lo) > tgt
        if not bad.any():
            break
        lo = np.where(bad, lo * 2.0, lo)
    for _ in range(2000):
        bad = g(hi) < tgt
        if not bad.any():
            break
        hi = np.where(bad, hi * 2.0, hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = g(mid) < tgt
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(1.0, np.abs(hi))):
            break
    v = 0.5 * (lo + hi)
    v = np.where(target == 0.0, 0.0, v)
    return v.reshape(shape)


def _sampled_monotone_sign(phi, span=60.0, points=4001):
    u = np.linspace(-span, span, points)
    d = np.diff(phi.log_value(u))
    if np.all(d > 0):
        return 1
    if np.all(d < 0):
        return -1
    return 0


def monotone_sign(phi: BoydFunction) -> int:
    """+1 strictly increasing, -1 strictly decreasing, 0 otherwise.

    The structural answer is confirmed by sampling ``log phi`` on a dense
    log grid; disagreement counts as non-monotone.
    """
    s = phi._monotone_sign()
    if s == 0:
        return 0
    return s if _sampled_monotone_sign(phi) == s else 0


# ---------------------------------------------------------------------------
# construction


ONE = Atom(0.0, 0.0)
IDENTITY = Atom(1.0, 0.0)


def atom(theta, gamma=0.0) -> Atom:
    return Atom(float(theta), float(gamma))


def product(*factors) -> BoydFunction:
    flat = []
    for f in factors:
        flat.extend(f.factors if isinstance(f, Product) else [f])
    atoms = [f for f in flat if isinstance(f, Atom)]
    others = [f for f in flat if not isinstance(f, Atom)]
    merged = []
    if atoms:
        a = Atom(sum(f.theta for f in atoms), sum(f.gamma for f in atoms))
        if a != ONE or not others:
            merged.append(a)
    merged.extend(others)
    if len(merged) == 1:
        return merged[0]
    return Product(tuple(merged))


def power(phi: BoydFunction, lam) -> BoydFunction:
    lam = float(lam)
    if lam == 1.0:
        return phi
    if isinstance(phi, Atom):
        if lam == 0.0:
            raise StructureError("power exponent must be nonzero")
        return Atom(lam * phi.theta, lam * phi.gamma)
    if isinstance(phi, Power):
        return power(phi.base, lam * phi.lam)
    if isinstance(phi, Product):
        return product(*(power(f, lam) for f in phi.factors))
    return Power(phi, lam)


def compose(outer: BoydFunction, inner: BoydFunction) -> BoydFunction:
    if inner == IDENTITY:
        return outer
    if outer == IDENTITY:
        return inner
    if isinstance(outer, Atom) and outer.theta == 0.0 and outer.gamma == 0.0:
        return ONE
    if isinstance(outer, Atom) and isinstance(inner, Atom) and inner.gamma == 0.0:
        if outer.gamma == 0.0 or abs(inner.theta) == 1.0:
            # (t^q)^theta (1+|q log t|)^gamma is an atom when gamma = 0 or |q| = 1
            return Atom(outer.theta * inner.theta, outer.gamma)
    if isinstance(outer, Atom) and outer.gamma == 0.0:
        return power(inner, outer.theta)
    return Compose(outer, inner)


def inverse(phi: BoydFunction) -> BoydFunction:
    if isinstance(phi, Atom) and phi.gamma == 0.0:
        if phi.theta == 0.0:
            raise StructureError("inverse of a constant function")
        return Atom(1.0 / phi.theta, 0.0)
    if isinstance(phi, Inverse):
        return phi.base
    return Inverse(phi)


def rescale(phi: BoydFunction, q) -> BoydFunction:
    """``t -> phi(t**q)**(1/q)``; power functions are fixed points."""
    q = float(q)
    if q <= 0 or not math.isfinite(q):
        raise DomainError("rescale exponent must be a positive finite number")
    if isinstance(phi, Atom) and phi.gamma == 0.0:
        return phi
    return power(compose(phi, Atom(q, 0.0)), 1.0 / q)


def reciprocal(phi: BoydFunction) -> BoydFunction:
    return power(phi, -1.0)


def ratio(num: BoydFunction, den: BoydFunction) -> BoydFunction:
    return product(num, reciprocal(den))


def reflect(phi: BoydFunction) -> BoydFunction:
    """``t -> 1 / phi(1/t)``."""
    return reciprocal(compose(phi, Atom(-1.0, 0.0)))


def combine(op: str, *args) -> BoydFunction:
    """Dispatch on the combinator name: product, power, compose, inverse."""
    if op == "product":
        return product(*args)
    if op == "power":
        phi, lam = args
        return power(phi, lam)
    if op == "compose":
        outer, inner = args
        return compose(outer, inner)
    if op == "inverse":
        (phi,) = args
        return inverse(phi)
    if op == "rescale":
        phi, q = args
        return rescale(phi, q)
    raise StructureError(f"unknown combinator {op!r}")


# ---------------------------------------------------------------------------
# evaluation


def evaluate(phi: BoydFunction, t):
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr > 0)):
        raise DomainError("Boyd functions are defined on (0, inf) only")
    out = np.exp(phi.log_value(np.log(t_arr)))
    out = np.where(t_arr == 1.0, 1.0, out)
    return float(out) if np.ndim(t) == 0 else out


def log_derivative(phi: BoydFunction, t, h=1e-5):
    """``t phi'(t) / phi(t)`` by central differences in log coordinates."""
    u = np.log(np.asarray(t, dtype=float))
    return (phi.log_value(u + h) - phi.log_value(u - h)) / (2 * h)


def _atomic_form(phi):
    """The single atom a tree reduces to, or None."""
    if isinstance(phi, Atom):
        return phi
    return None


def log_dilation(phi: BoydFunction, u, *, span_log2=DILATION_SPAN_LOG2,
                 points=DILATION_POINTS, rtol=DILATION_RTOL, method="auto"):
    """``log phibar(exp(u))`` for scalar u.

    Closed form for atoms (``phibar = t^theta (1+|log t|)^|gamma|``); otherwise
    the sup over a log-uniform grid in s, doubled until two levels agree.
    The grid always contains the kink candidates s = 1 and s = 1/t.
    """
    u = float(u)
    a = _atomic_form(phi)
    if method == "auto" and a is not None:
        return a.theta * u + abs(a.gamma) * math.log1p(abs(u))
    span = span_log2 * LN2 + 2.0 * abs(u)
    base = phi.log_value
    n = points
    prev = None
    for _ in range(DILATION_MAX_DOUBLINGS + 1):
        v = np.concatenate([np.linspace(-span, span, n), [0.0, -u]])
        vals = base(u + v) - base(v)
        best = float(np.max(vals))
        if prev is not None and abs(best - prev) <= rtol * max(1.0, abs(best)):
            break
        prev = best
        n *= 2
    direct = float(phi.log_value(np.array(u)))
    if best < direct - 1e-9 * max(1.0, abs(direct)):
        raise ConsistencyError("grid sup fell below phi(t)")
    return best


def dilation(phi: BoydFunction, t, **kwargs):
    """phibar(t) = sup_s phi(t s)/phi(s)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr > 0)):
        raise DomainError("dilation is defined for t > 0 only")
    flat = [math.exp(log_dilation(phi, math.log(x), **kwargs)) for x in t_arr.ravel()]
    out = np.array(flat).reshape(t_arr.shape)
    return float(out) if np.ndim(t) == 0 else out


@dataclass(frozen=True)
class IndexEstimate:
    lower: float
    upper: float
    provenance: Provenance
    tolerance: float = 0.0

    def __iter__(self):
        return iter((self.lower, self.upper))


def boyd_indices(phi: BoydFunction, method="auto", log2_scale=INDEX_LOG2_SCALE) -> IndexEstimate:
    """Lower and upper Boyd indices.

    ``method="auto"`` uses the closed form when the tree admits one,
    ``"numeric"`` always estimates ``log phibar(t)/log t`` at ``t = 2**(+-E)``.
    """
    if method not in ("auto", "numeric"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        exact = phi._exact_indices()
        if exact is not None:
            return IndexEstimate(exact[0], exact[1], Provenance.CLOSED_FORM)
    u = log2_scale * LN2
    kw = {} if method == "auto" else {"method": "numeric"}
    lower = log_dilation(phi, -u, **kw) / (-u)
    upper = log_dilation(phi, u, **kw) / u
    if lower > upper:
        # estimation noise only; the exact indices are ordered
        lower = upper = 0.5 * (lower + upper)
    return IndexEstimate(lower, upper, Provenance.ESTIMATED, INDEX_TOLERANCE)


# ---------------------------------------------------------------------------
# text form

_TOKEN = re.compile(r"\s*(?:(?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?(?:/\d+(?:\.\d*)?)?)|(?P<name>[a-z]+)|(?P<sym>[(),]))")


def _fmt(x):
    return repr(float(x))


def to_string(phi: BoydFunction) -> str:
    if isinstance(phi, Atom):
        return f"atom({_fmt(phi.theta)},{_fmt(phi.gamma)})"
    if isinstance(phi, Product):
        return "prod(" + ",".join(to_string(f) for f in phi.factors) + ")"
    if isinstance(phi, Power):
        return f"pow({to_string(phi.base)},{_fmt(phi.lam)})"
    if isinstance(phi, Compose):
        return f"comp({to_string(phi.outer)},{to_string(phi.inner)})"
    if isinstance(phi, Inverse):
        return f"inv({to_string(phi.base)})"
    raise StructureError(f"cannot serialize {phi!r}")


def parse(text: str) -> BoydFunction:
    """Parse the prefix form, e.g. ``prod(atom(0.3,0),pow(atom(0.2,0),2))``.

    Numbers may be written as fractions (``atom(1/3)``).  The parser builds
    raw nodes without simplification so that round trips are exact.
    """
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise StructureError(f"unexpected character at {pos} in {text!r}")
        pos = m.end()
        if m.group("num") is not None:
            tokens.append(("num", m.group("num")))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name")))
        elif m.group("sym") is not None:
            tokens.append(("sym", m.group("sym")))
    tokens.append(("end", ""))
    idx = 0

    def peek():
        return tokens[idx]

    def take(kind, value=None):
        nonlocal idx
        k, v = tokens[idx]
        if k != kind or (value is not None and v != value):
            raise StructureError(f"expected {value or kind}, got {v!r} in {text!r}")
        idx += 1
        return v

    def number():
        v = take("num")
        if "/" in v:
            a, b = v.split("/")
            return float(a) / float(b)
        return float(v)

    def expr():
        name = take("name")
        if name == "one":
            return ONE
        take("sym", "(")
        if name == "atom":
            theta = number()
            gamma = 0.0
            if peek() == ("sym", ","):
                take("sym", ",")
                gamma = number()
            node = Atom(theta, gamma)
        elif name == "prod":
            items = [expr()]
            while peek() == ("sym", ","):
                take("sym", ",")
                items.append(expr())
            node = Product(tuple(items)) if len(items) > 1 else items[0]
        elif name == "pow":
            base = expr()
            take("sym", ",")
            node = Power(base, number())
        elif name == "comp":
            outer = expr()
            take("sym", ",")
            node = Compose(outer, expr())
        elif name == "inv":
            node = Inverse(expr())
        elif name == "rescale":
            base = expr()
            take("sym", ",")
            node = rescale(base, number())
        else:
            raise StructureError(f"unknown node {name!r}")
        take("sym", ")")
        return node

    node = expr()
    take("end")
    return node


# ---------------------------------------------------------------------------
# interpolation parameters and conditions H1, H2, H2bar, H3


class Flag(str, enum.Enum):
    TRUE = "true"
    FALSE = "false"
    INDETERMINATE = "indeterminate"
    UNSET = "unset"

    def __bool__(self):
        return self is Flag.TRUE

    @classmethod
    def of(cls, value: bool) -> "Flag":
        return cls.TRUE if value else cls.FALSE


@dataclass(frozen=True)
class InterpParams:
    outer_p: float
    phis: tuple
    h1: Flag = Flag.UNSET
    h2: Flag = Flag.UNSET
    h2bar: Flag = Flag.UNSET
    h3: Flag = Flag.UNSET
    provenance: tuple = ()

    def __post_init__(self):
        p = float(self.outer_p)
        if not (p >= 1.0):
            raise DomainError("outer exponent must lie in [1, inf]")
        object.__setattr__(self, "outer_p", p)
        object.__setattr__(self, "phis", tuple(self.phis))
        if len(self.phis) < 1:
            raise PreconditionError("at least one parameter function is required")

    @property
    def n(self) -> int:
        return len(self.phis)

    def flag_provenance(self, name) -> str:
        return dict(self.provenance).get(name, "")


def conjugate_exponent(p: float) -> float:
    if p == 1.0:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def _three_way(value, threshold, strict_above, tol):
    """Compare an index against a boundary, honouring the estimator band."""
    if tol > 0 and abs(value - threshold) <= tol:
        return None
    return value > threshold if strict_above else value < threshold


def _index_conditions(params):
    lowers = [phi.indices for phi in params.phis]
    tol = max(ix.tolerance for ix in lowers)
    lo = min(ix.lower for ix in lowers)
    hi = max(ix.upper for ix in lowers)

    def decide(*parts):
        if any(p is False for p in parts):
            return Flag.FALSE
        if any(p is None for p in parts):
            return Flag.INDETERMINATE
        return Flag.TRUE

    h2 = decide(_three_way(lo, 0.0, True, tol), _three_way(hi, 1.0, False, tol))
    # H2bar: lo >= 0 and hi <= 1; equality is inside, estimator band is not
    h2bar = decide(
        None if tol > 0 and abs(lo) <= tol else lo >= 0.0,
        None if tol > 0 and abs(hi - 1.0) <= tol else hi <= 1.0,
    )
    prov = "analytic" if tol == 0 else "estimated"
    return h2, h2bar, prov


def _atom_exponents(phis):
    if all(isinstance(p, Atom) for p in phis):
        thetas = [p.theta for p in phis]
        return [1.0 - sum(thetas)] + thetas
    return None


def _kernel_integral(log_phis, p, span, points):
    """Trapezoid value of the H1 kernel on a tensor log grid of half-width span."""
    n = len(log_phis)
    u = np.linspace(-span, span, points)
    h = u[1] - u[0]
    w = np.full(points, h)
    w[0] = w[-1] = h / 2
    grids = np.meshgrid(*([u] * n), indexing="ij")
    expo = np.minimum(0.0, np.min(np.stack(grids), axis=0))
    for k, lp in enumerate(log_phis):
        expo = expo - lp(grids[k])
    if math.isinf(p):
        return float(np.exp(np.max(expo)))
    vals = np.exp(p * expo)
    for _ in range(n):
        vals = np.tensordot(vals, w, axes=([0], [0]))
    return float(vals) ** (1.0 / p)


def _h1_quadrature(phis, p, cap):
    """Decide H1 by quadrature over three nested spans with divergence detection."""
    n = len(phis)
    log_phis = [phi.log_value for phi in phis]
    base = 30 * LN2
    pts = {1: 2049, 2: 513}.get(n, 97)
    vals = [_kernel_integral(log_phis, p, base * 2**k, pts) for k in range(3)]
    if not all(math.isfinite(v) for v in vals):
        return Flag.FALSE
    if vals[1] > cap and vals[2] > cap:
        return Flag.FALSE
    d1 = vals[1] - vals[0]
    d2 = vals[2] - vals[1]
    scale = max(vals[2], 1e-300)
    if d2 <= 1e-6 * scale:
        return Flag.TRUE
    if d1 > 0 and d2 >= 0.9 * d1:
        return Flag.FALSE
    return Flag.INDETERMINATE


def _h1(phis, p, cap):
    expo = _atom_exponents(phis)
    if expo is not None and all(e != 0.0 for e in expo):
        return Flag.of(all(e > 0 for e in expo)), "analytic"
    return _h1_quadrature(phis, p, cap), "quadrature"


def check_conditions(params: InterpParams, cap: float = 1e12) -> InterpParams:
    """Fill the H1, H2, H2bar and H3 flags.

    H2 and H2bar come straight from the Boyd indices.  H1 and H3 use the
    implications H2 => H1, H2 => H3, (p = inf and H2bar) => H1 and
    (p = 1 and H2bar) => H3 when they apply, the exact exponent criterion for
    pure atoms, and quadrature of the defining integral otherwise.  H3 is the
    H1 integral for the reflected functions ``1/phi(1/t)`` at the conjugate
    exponent.
    """
    p = params.outer_p
    h2, h2bar, prov = _index_conditions(params)
    provenance = {"h2": prov, "h2bar": prov}

    if h2 is Flag.TRUE or (math.isinf(p) and h2bar is Flag.TRUE):
        h1, provenance["h1"] = Flag.TRUE, "analytic"
    else:
        h1, provenance["h1"] = _h1(params.phis, p, cap)

    if h2 is Flag.TRUE or (p == 1.0 and h2bar is Flag.TRUE):
        h3, provenance["h3"] = Flag.TRUE, "analytic"
    else:
        reflected = [reflect(phi) for phi in params.phis]
        h3, provenance["h3"] = _h1(reflected, conjugate_exponent(p), cap)

    return replace(params, h1=h1, h2=h2, h2bar=h2bar, h3=h3,
                   provenance=tuple(sorted(provenance.items())))


def make_params(p, phis, check=True) -> InterpParams:
    phis = [parse(x) if isinstance(x, str) else x for x in phis]
    params = InterpParams(float(p), tuple(phis))
    return check_conditions(params) if check else params
