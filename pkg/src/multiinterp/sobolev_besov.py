"""Periodic generalized Sobolev and Besov norms on the lattice Z / N.

Signals live on ``N = 2^m`` equispaced points of the circle.  The Fourier
coefficients are ``c = fft(f) / N`` so that the mean-normalized L^2 norm of
the samples equals the l^2 norm of ``c`` (Parseval).  Frequencies are the
integers ``-N/2 .. N/2 - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import boyd
from .boyd import BoydFunction
from .errors import ConfigError, InputError, PreconditionError
from .ktuple import BanachTuple
from .interpnorm import k_norm
from .report import Report

PARTITION_TOL = 1e-12
ROUNDTRIP_RTOL = 1e-10
WINDOW_C0 = 10.0
N_DRIFT = 0.2


def _is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Signal:
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex).reshape(-1)
        if not _is_power_of_two(len(s)):
            raise InputError(f"signal length {len(s)} is not a power of two")
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_spectrum(cls, spectrum) -> "Signal":
        spectrum = np.asarray(spectrum, dtype=complex)
        sig = cls(np.fft.ifft(spectrum) * len(spectrum))
        sig.__dict__["spectrum"] = spectrum.copy()
        return sig

    @property
    def N(self) -> int:
        return len(self.samples)

    @cached_property
    def spectrum(self) -> np.ndarray:
        return np.fft.fft(self.samples) / self.N

    @property
    def frequencies(self) -> np.ndarray:
        return lattice_frequencies(self.N)

    def roundtrip_error(self) -> float:
        back = np.fft.ifft(self.spectrum) * self.N
        scale = max(np.max(np.abs(self.samples)), 1e-300)
        return float(np.max(np.abs(back - self.samples)) / scale)


def lattice_frequencies(N: int) -> np.ndarray:
    return np.rint(np.fft.fftfreq(N) * N)


def _smooth_step(x):
    """``exp(-1/x)`` for x > 0, 0 otherwise."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def bump(x):
    """Smooth profile equal to 1 on [-1, 1] and 0 outside (-2, 2)."""
    r = np.abs(np.asarray(x, dtype=float))
    up = _smooth_step(2.0 - r)
    down = _smooth_step(r - 1.0)
    return up / (up + down)


@dataclass(frozen=True)
class TestSystem:
    """Dyadic partition of unity on the frequency lattice.

    ``windows[0] = bump(xi)`` and ``windows[j] = bump(xi / 2^j) - bump(xi / 2^(j-1))``
    for ``j = 1..J``; the sum telescopes to ``bump(xi / 2^J)``, which is 1 on
    the whole lattice when ``2^J >= N / 2``.
    """

    __test__ = False

    N: int
    windows: np.ndarray
    residual: float

    @property
    def J(self) -> int:
        return self.windows.shape[0] - 1


def test_system(N: int, levels: int | None = None) -> TestSystem:
    if not _is_power_of_two(N):
        raise InputError(f"lattice size {N} is not a power of two")
    J = int(round(math.log2(N))) - 1 if levels is None else int(levels)
    xi = lattice_frequencies(N)
    rows = [bump(xi)]
    for j in range(1, J + 1):
        rows.append(bump(xi / 2.0**j) - bump(xi / 2.0 ** (j - 1)))
    W = np.array(rows)
    residual = float(np.max(np.abs(W.sum(axis=0) - 1.0)))
    return TestSystem(N, W, residual)


test_system.__test__ = False


@dataclass(frozen=True)
class SobolevDescriptor:
    phi: BoydFunction
    p: float = 2.0

    def __post_init__(self):
        if isinstance(self.phi, str):
            object.__setattr__(self, "phi", boyd.parse(self.phi))
        p = float(self.p)
        if not p >= 1.0:
            raise InputError(f"exponent {p} is not in [1, inf]")
        object.__setattr__(self, "p", p)

    def multiplier(self, N: int) -> np.ndarray:
        xi = lattice_frequencies(N)
        return boyd.evaluate(self.phi, np.sqrt(1.0 + xi * xi))


def bessel_apply(desc: SobolevDescriptor, f: Signal) -> Signal:
    """Spectral multiplication by ``phi(sqrt(1 + xi^2))``."""
    return Signal.from_spectrum(desc.multiplier(f.N) * f.spectrum)


def lattice_lp(values, p) -> float:
    """Mean-normalized L^p norm of lattice samples."""
    v = np.abs(np.asarray(values))
    if math.isinf(p):
        return float(v.max(initial=0.0))
    return float(np.mean(v**p) ** (1.0 / p))


def sobolev_norm(desc: SobolevDescriptor, f: Signal) -> float:
    if desc.p == 2.0:
        return float(np.sqrt(np.sum(np.abs(desc.multiplier(f.N) * f.spectrum) ** 2)))
    return lattice_lp(bessel_apply(desc, f).samples, desc.p)


def besov_blocks(f: Signal, system: TestSystem, p) -> np.ndarray:
    """L^p norms of the Littlewood-Paley pieces of f."""
    if system.N != f.N:
        raise ConfigError(f"test system built for N = {system.N}, signal has N = {f.N}")
    if system.residual > PARTITION_TOL:
        raise ConfigError(f"test system does not cover the lattice (residual {system.residual:.2e})")
    pieces = np.fft.ifft(system.windows * f.spectrum[None, :], axis=1) * f.N
    return np.array([lattice_lp(piece, p) for piece in pieces])


def besov_norm(psi: BoydFunction, p, q, f: Signal, system: TestSystem) -> float:
    """``|| (psi(2^k) ||phi_k * f||_p)_k ||_{l^q}``."""
    blocks = besov_blocks(f, system, float(p))
    scales = boyd.evaluate(psi, 2.0 ** np.arange(len(blocks)))
    seq = scales * blocks
    q = float(q)
    if math.isinf(q):
        return float(seq.max(initial=0.0))
    return float(np.sum(seq**q) ** (1.0 / q))


def sobolev_embedding_check(desc0: SobolevDescriptor, desc1: SobolevDescriptor, samples, drift=N_DRIFT,
                            name="sobolev_embedding") -> Report:
    """Empirical ``||f||_{H^phi1} <= C ||f||_{H^phi0}`` per lattice size.

    ``samples`` maps N to a list of signals.  One row per N with the largest
    ratio; at p = 2 the right-hand column holds the exact constant
    ``sup_xi phi1 / phi0`` on the lattice, which the empirical constant may
    not exceed.  A failed embedding shows up as a constant that grows with N,
    so a row also fails when its constant exceeds the one at the smallest N
    by more than ``drift``.  Shrinking constants are expected when the signal
    frequencies scale with N.
    """
    if desc0.p != desc1.p:
        raise InputError("embedding check needs a common exponent")
    rep = Report(name)
    consts = {}
    for N, sigs in sorted(samples.items()):
        ratios = [sobolev_norm(desc1, f) / sobolev_norm(desc0, f) for f in sigs if np.any(f.samples)]
        consts[N] = max(ratios)
    base = consts[min(consts)]
    for N, c in sorted(consts.items()):
        oracle = float(np.max(desc1.multiplier(N) / desc0.multiplier(N))) if desc0.p == 2.0 else math.nan
        ok = c <= base * (1.0 + drift)
        if desc0.p == 2.0:
            ok = ok and c <= oracle * (1.0 + 1e-12)
        rep.add(N, c, oracle, c / base, drift, ok)
    return rep


# ---------------------------------------------------------------------------
# interpolation of Sobolev tuples


def besov_parameter(phis, gammas) -> BoydFunction:
    """``phi_0 / prod_k (phi_0 / phi_k) o gamma_k``."""
    den = [boyd.compose(boyd.ratio(phis[0], phis[k + 1]), g) for k, g in enumerate(gammas)]
    return boyd.ratio(phis[0], boyd.product(*den))


def check_theorem_hypotheses(phis, gammas):
    for l1 in range(len(phis)):
        for l2 in range(l1 + 1, len(phis)):
            est = boyd.boyd_indices(boyd.ratio(phis[l1], phis[l2]))
            if not (est.lower > 0 or est.upper < 0):
                raise PreconditionError(f"ratio of parameters {l1} and {l2} has indices "
                                        f"[{est.lower:.4g}, {est.upper:.4g}] containing 0")
    for k, g in enumerate(gammas):
        est = boyd.boyd_indices(g)
        if not (0.0 < est.lower and est.upper < 1.0):
            raise PreconditionError(f"interpolation parameter {k} has indices outside (0, 1)")


def spectral_tuple(descs, f: Signal):
    """Compressed l^2 tuple for p = 2 Sobolev norms of ``f``.

    Coordinates are the distinct |xi| carrying energy; the amplitude of a
    coordinate is the l^2 norm of the coefficients at +xi and -xi.  All norms
    depend on |xi| only, so the K-functional of the compressed problem is
    exact.
    """
    xi = np.abs(lattice_frequencies(f.N))
    energy = np.bincount(xi.astype(int), weights=np.abs(f.spectrum) ** 2)
    keep = np.flatnonzero(energy > 0)
    amp = np.sqrt(energy[keep])
    lam = np.sqrt(1.0 + keep.astype(float) ** 2)
    W = np.array([boyd.evaluate(d.phi, lam) for d in descs])
    return BanachTuple.from_weights([2.0] * len(descs), W), amp


def interp_norm(descs, gammas, q, f: Signal, normalize=True, rel_tol=1e-4, adaptive=None) -> float:
    """Normalized K_q norm of ``f`` for the tuple of p = 2 Sobolev spaces.

    With more than one parameter the tensor grid is evaluated once (with
    Richardson extrapolation) unless ``adaptive`` is set; the quadrature error
    there is about 1e-3, far below the tolerance of the window checks.
    """
    if adaptive is None:
        adaptive = len(gammas) == 1
    if any(d.p != 2.0 for d in descs):
        raise PreconditionError("Sobolev tuples are realized for p = 2 only")
    if not np.any(f.samples):
        return 0.0
    tup, amp = spectral_tuple(descs, f)
    return k_norm(tup, (q, list(gammas)), amp, normalize=normalize, rel_tol=rel_tol,
                  adaptive=adaptive).value


def signal_family(kind: str, N: int, count: int, seed: int) -> list:
    """Deterministic test signals whose shape does not depend on N.

    Frequencies are placed relative to the top of the lattice,
    ``xi = N / 2^(1 + v)``, with ``v`` drawn once from ``seed``; the same seed
    therefore gives the same relative positions for every N.

    kind: ``pure-frequency``, ``random-band-limited`` or ``dyadic-lacunary``.
    """
    rng = np.random.default_rng(seed)
    top = int(round(math.log2(N))) - 1
    out = []
    for i in range(count):
        spec = np.zeros(N, dtype=complex)
        if kind == "pure-frequency":
            v = rng.uniform(0.0, 6.0)
            xi = max(1, int(round(2.0 ** (top - v))))
            spec[xi] = 1.0
        elif kind == "random-band-limited":
            v = rng.uniform(1.0, 6.0)
            centre = max(4, int(round(2.0 ** (top - v))))
            width = max(1, centre // 8)
            coef = rng.normal(size=8) + 1j * rng.normal(size=8)
            for j, c in enumerate(coef):
                spec[min(N // 2 - 1, centre + (j - 4) * width // 4 + j)] += c
        elif kind == "dyadic-lacunary":
            shift = rng.uniform(0.0, 1.0)
            amps = rng.normal(size=6) * 2.0 ** (-0.5 * np.arange(6) * rng.uniform(0, 1))
            for k, a in enumerate(amps):
                xi = max(1, int(round(2.0 ** (top - k - shift))))
                spec[xi] += a
        else:
            raise ConfigError(f"unknown signal family {kind!r}")
        if i % 2:
            spec = spec + np.conj(np.roll(spec[::-1], 1))
        out.append(Signal.from_spectrum(spec))
    return out


def interp_equals_besov_check(descs, gammas, q, family, Ns, window=WINDOW_C0, drift=N_DRIFT,
                              name="interp_equals_besov", rows_out=None) -> Report:
    """Interpolation of a Sobolev tuple against the Besov norm with the theorem's parameter.

    ``family`` is a callable ``N -> list of Signal``.  Every ratio of the
    normalized interpolation norm to the Besov norm must lie in
    ``[1/window, window]``; the width ``max / min`` of the ratios per N must
    vary by at most ``drift`` across N.  ``rows_out`` collects
    ``(N, signal_id, interp_norm, besov_norm, ratio)``.
    """
    descs = [d if isinstance(d, SobolevDescriptor) else SobolevDescriptor(d) for d in descs]
    gammas = [boyd.parse(g) if isinstance(g, str) else g for g in gammas]
    if len(gammas) != len(descs) - 1:
        raise InputError("need one interpolation parameter per Sobolev space beyond the first")
    p = descs[0].p
    if any(d.p != p for d in descs):
        raise InputError("Sobolev spaces must share the exponent")
    check_theorem_hypotheses([d.phi for d in descs], gammas)
    psi = besov_parameter([d.phi for d in descs], gammas)
    rep = Report(name)
    widths = {}
    for N in Ns:
        system = test_system(N)
        ratios = []
        for i, f in enumerate(family(N)):
            a = interp_norm(descs, gammas, q, f)
            b = besov_norm(psi, p, q, f, system)
            if a == 0.0 and b == 0.0:
                continue
            r = a / b
            ratios.append(r)
            if rows_out is not None:
                rows_out.append((N, i, a, b, r))
            rep.add(f"{N}-{i}", a, b, r, window, 1.0 / window <= r <= window)
        widths[N] = max(ratios) / min(ratios)
    spread = max(widths.values()) / min(widths.values())
    for N, w in widths.items():
        rep.add(f"{N}-width", w, min(widths.values()), spread, drift, spread <= 1.0 + drift, check_name=f"{name}_width")
    rep.notes["psi"] = boyd.to_string(psi)
    rep.notes["widths"] = widths
    return rep
