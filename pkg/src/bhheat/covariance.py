"""Exact second-order calculus of the white-noise bilaplacian heat field.

Everything here rests on one identity: the field's covariance is a time
integral of the heat kernel,

    Cov(u(t,x), u(s,y)) = (1/2) * int_{t-s}^{t+s} G(tau; x - y) dtau,   s <= t,

which follows from the Wiener isometry and the semigroup property.  With the
kernel factorized over coordinates (see :mod:`bhheat.spectral`), variances and
squared increments reduce to 1-D quadratures that carry no mode-truncation
error.  The squared canonical pseudo-distance between two space-time points is
evaluated through the equivalent, cancellation-free regrouping

    d^2 = 2 V(h/2) - 2 V(s + h/2) + V(s) + V(t)
          + int_h^{s+t} [G(tau; 0) - G(tau; x-y)] dtau,     h = t - s,

where V is the variance function.  ``modal_increment_norm_sq`` implements the
same quantity as a direct truncated mode sum (three-term identity) and is kept
as a certified bracket: exact and modal values must differ by no more than the
truncation's tail bound.

An independent cross-check, ``wiener_isometry_oracle``, never touches the
identity: it quadratures the isometry integrand over physical time,

    int_0^s [G(2(t-r); 0) + G(2(s-r); 0) - 2 G(t+s-2r; x-y)] dr
        + int_s^t G(2(t-r); 0) dr.

Its accuracy degrades when |t-s| and |x-y| are simultaneously tiny (the
integrand is then a small difference of large kernel values); the exact
evaluator owns that regime.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from scipy.integrate import quad

from . import spectral
from .errors import ConfigError, DomainError
from .spectral import TWO_PI, Truncation, check_dimension

_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-11, limit=300)


class IllConditionedFit(UserWarning):
    """Log-log fit over too narrow a range of scales."""


# ---------------------------------------------------------------------------
# points and engine
# ---------------------------------------------------------------------------


def wrap_coords(x: Sequence[float]) -> tuple[float, ...]:
    """Reduce coordinates to the fundamental cube [0, 2pi)."""
    return tuple(float(xj) % TWO_PI for xj in x)


def periodic_delta(x: Sequence[float], y: Sequence[float]) -> np.ndarray:
    """Componentwise signed differences reduced to [-pi, pi]."""
    dz = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return (dz + math.pi) % TWO_PI - math.pi


def periodic_distance(x: Sequence[float], y: Sequence[float]) -> float:
    return float(np.linalg.norm(periodic_delta(x, y)))


@dataclass(frozen=True)
class SpaceTimePoint:
    """A point (t, x) with t >= 0 and x reduced mod 2pi per coordinate."""

    t: float
    x: tuple[float, ...]

    def __post_init__(self):
        if self.t < 0:
            raise DomainError("time must be nonnegative")
        check_dimension(len(self.x))
        object.__setattr__(self, "x", wrap_coords(self.x))

    @property
    def d(self) -> int:
        return len(self.x)


def stp(t: float, *x: float) -> SpaceTimePoint:
    """Shorthand constructor."""
    return SpaceTimePoint(t=t, x=tuple(x))


def _default_log_c(d: int) -> float:
    # Large enough that log(C/z) >= log 4 >= 1 for every achievable periodic
    # distance z <= pi sqrt(d).
    return 4.0 * math.pi * math.sqrt(d)


@dataclass(frozen=True)
class SecondOrderEngine:
    """Dimension, horizon, truncation and envelope constant for one field."""

    d: int
    horizon: float = 1.0
    tr: Truncation = None
    log_c: float = None

    def __post_init__(self):
        check_dimension(self.d)
        if self.horizon <= 0:
            raise DomainError("horizon must be positive")
        if self.tr is None:
            object.__setattr__(self, "tr", spectral.default_truncation(self.d))
        if self.log_c is None:
            object.__setattr__(self, "log_c", _default_log_c(self.d))
        if math.log(self.log_c / (math.pi * math.sqrt(self.d))) < 1.0:
            raise DomainError(
                "log_c too small: log(log_c/z) must stay >= 1 up to the torus diameter"
            )

    def _check_point(self, p: SpaceTimePoint):
        if p.d != self.d:
            raise DomainError(f"point dimension {p.d} != engine dimension {self.d}")
        if p.t > self.horizon + 1e-12:
            raise DomainError(f"time {p.t} beyond horizon {self.horizon}")


def engine(d: int, horizon: float = 1.0, **kw) -> SecondOrderEngine:
    return SecondOrderEngine(d=d, horizon=horizon, **kw)


# ---------------------------------------------------------------------------
# exact evaluators
# ---------------------------------------------------------------------------


@lru_cache(maxsize=65536)
def _sigma_sq(d: int, t: float) -> float:
    """E[u(t,x)^2] = (1/2) int_0^{2t} G(tau; 0) dtau, exact quadrature.

    The substitution tau = w^(4/(4-d)) removes the tau^(-d/4) endpoint
    singularity of the kernel diagonal.
    """
    if t == 0.0:
        return 0.0
    p = 4.0 / (4 - d)
    b = (2.0 * t) ** (1.0 / p)

    def f(w):
        return spectral.kernel_diag(w**p, d) * p * w ** (p - 1.0)

    val, _ = quad(f, 0.0, b, **_QUAD_OPTS)
    return 0.5 * val


def _coupling(d: int, a: float, b: float, dz: np.ndarray) -> float:
    """int_a^b [G(tau; 0) - G(tau; dz)] dtau for 0 <= a < b."""
    if not np.any(dz):
        return 0.0
    dz_t = tuple(dz)
    if a == 0.0:
        p = 4.0 / (4 - d)

        def f(w):
            return spectral.kernel_gap(w**p, dz_t) * p * w ** (p - 1.0)

        val, _ = quad(f, 0.0, b ** (1.0 / p), **_QUAD_OPTS)
    else:
        val, _ = quad(lambda tau: spectral.kernel_gap(tau, dz_t), a, b, **_QUAD_OPTS)
    return val


def variance(p: SpaceTimePoint, eng: SecondOrderEngine) -> float:
    """E[u(t,x)^2]; independent of x, zero at t = 0, increasing in t."""
    eng._check_point(p)
    return _sigma_sq(eng.d, p.t)


def _ordered(p: SpaceTimePoint, q: SpaceTimePoint):
    if q.t > p.t:
        p, q = q, p
    return p, q


def increment_norm_sq(p: SpaceTimePoint, q: SpaceTimePoint, eng: SecondOrderEngine) -> float:
    """Squared canonical pseudo-distance E[(u(p) - u(q))^2], exact.

    Equals the value of the three-term mode-sum identity (see module
    docstring for the regrouping actually evaluated).
    """
    eng._check_point(p)
    eng._check_point(q)
    p, q = _ordered(p, q)
    t, s = p.t, q.t
    h = t - s
    dz = periodic_delta(p.x, q.x)
    if h == 0.0 and not np.any(dz):
        return 0.0
    base = (
        2.0 * _sigma_sq(eng.d, 0.5 * h)
        - 2.0 * _sigma_sq(eng.d, s + 0.5 * h)
        + _sigma_sq(eng.d, s)
        + _sigma_sq(eng.d, t)
    )
    return base + _coupling(eng.d, h, s + t, dz)


def canonical_distance(p, q, eng) -> float:
    return math.sqrt(max(increment_norm_sq(p, q, eng), 0.0))


def covariance(p: SpaceTimePoint, q: SpaceTimePoint, eng: SecondOrderEngine) -> float:
    """Cov(u(p), u(q)) by polarization of the squared increment."""
    return 0.5 * (variance(p, eng) + variance(q, eng) - increment_norm_sq(p, q, eng))


def correlation(p: SpaceTimePoint, q: SpaceTimePoint, eng: SecondOrderEngine) -> float:
    """Corr(u(p), u(q)); requires both times positive, strictly < 1 for p != q."""
    sp = variance(p, eng)
    sq = variance(q, eng)
    if sp <= 0.0 or sq <= 0.0:
        raise DomainError("correlation undefined at a zero-variance point (t = 0)")
    return covariance(p, q, eng) / math.sqrt(sp * sq)


def wiener_isometry_oracle(
    p: SpaceTimePoint, q: SpaceTimePoint, eng: SecondOrderEngine, quad_order: int = 8
) -> float:
    """Squared increment by direct time quadrature of the isometry integrand.

    Independent of :func:`increment_norm_sq` (shares only the 1-D kernel
    evaluation).  ``quad_order`` scales the adaptive subdivision budget.
    """
    if quad_order < 2:
        raise ConfigError("quad_order must be >= 2")
    eng._check_point(p)
    eng._check_point(q)
    p, q = _ordered(p, q)
    t, s = p.t, q.t
    h = t - s
    dz = tuple(periodic_delta(p.x, q.x))
    if h == 0.0 and not any(dz):
        return 0.0
    d = eng.d
    pw = 4.0 / (4 - d)
    opts = dict(epsabs=1e-13, epsrel=1e-11, limit=max(60, 40 * quad_order))

    total = 0.0
    if s > 0.0:
        # u = s - r, then u = w^pw to flatten the u^(-d/4) endpoint behavior
        def f1(w):
            u = w**pw
            val = (
                spectral.kernel_diag(2.0 * (h + u), d)
                + spectral.kernel_diag(2.0 * u, d)
                - 2.0 * spectral.kernel_at(h + 2.0 * u, dz)
            )
            return val * pw * w ** (pw - 1.0)

        i1, _ = quad(f1, 0.0, s ** (1.0 / pw), **opts)
        total += i1
    if h > 0.0:
        def f2(w):
            return spectral.kernel_diag(w**pw, d) * pw * w ** (pw - 1.0)

        i2, _ = quad(f2, 0.0, (2.0 * h) ** (1.0 / pw), **opts)
        total += 0.5 * i2
    return total


# ---------------------------------------------------------------------------
# truncated mode sums (the literal eigen-expansion, kept as certified bracket)
# ---------------------------------------------------------------------------


def modal_variance(p: SpaceTimePoint, eng: SecondOrderEngine) -> float:
    """Variance as the truncated mode sum t/(2pi)^d + sum (1-e^{-2 lam t})/(2^{n+1} pi^d lam).

    Underestimates the exact variance by at most ``eng.tr.tail_estimate``.
    """
    eng._check_point(p)
    _, lam, nulls = spectral.wavevector_table(eng.d, eng.tr.k_max)
    keep = lam > 0
    lam, nulls = lam[keep], nulls[keep]
    w = 1.0 / (2.0 ** (nulls + 1) * math.pi**eng.d)
    series = float((w * (-np.expm1(-2.0 * lam * p.t)) / lam).sum())
    return p.t / TWO_PI**eng.d + series


def modal_increment_norm_sq(
    p: SpaceTimePoint, q: SpaceTimePoint, eng: SecondOrderEngine
) -> tuple[float, float]:
    """Three-term identity as a truncated lattice sum, with its tail bound.

    Returns (value, tail_bound); the exact squared increment lies in
    [value, value + tail_bound].  Modes are accumulated in decreasing
    eigenvalue order (smallest terms first).
    """
    eng._check_point(p)
    eng._check_point(q)
    p, q = _ordered(p, q)
    t, s = p.t, q.t
    h = t - s
    dz = periodic_delta(p.x, q.x)
    k, lam, nulls = spectral.wavevector_table(eng.d, eng.tr.k_max)
    keep = lam > 0
    k, lam, nulls = k[keep], lam[keep], nulls[keep]
    w = 1.0 / (2.0 ** (nulls + 1) * math.pi**eng.d)
    prod_cos = np.cos(k * dz).prod(axis=1)
    mixed = (
        w
        * (-np.expm1(-2.0 * lam * s))
        / lam
        * (np.exp(-2.0 * lam * h) + 1.0 - 2.0 * np.exp(-lam * h) * prod_cos)
    ).sum()
    pure = (w * (-np.expm1(-2.0 * lam * h)) / lam).sum()
    value = float(mixed) + float(pure) + h / TWO_PI**eng.d
    # tail: mixed-term summand <= 4/lam, pure-term summand <= 1/lam
    return value, 5.0 * eng.tr.tail_estimate


# ---------------------------------------------------------------------------
# envelope and scans
# ---------------------------------------------------------------------------


def anisotropy_envelope(
    p: SpaceTimePoint, q: SpaceTimePoint, eng: SecondOrderEngine
) -> float:
    """|t-s|^(1-d/4) + (log(C/|x-y|))^beta |x-y|^(2 ^ (4-d)), beta = 1 iff d = 2.

    The comparison envelope for the squared canonical distance; uses the
    periodic distance and the engine's log constant.
    """
    if p == q:
        raise DomainError("envelope requires p != q")
    d = eng.d
    dt = abs(p.t - q.t)
    dz = periodic_distance(p.x, q.x)
    time_term = dt ** (1.0 - d / 4.0)
    if dz == 0.0:
        return time_term
    space_term = dz ** min(2.0, 4.0 - d)
    if d == 2:
        space_term *= math.log(eng.log_c / dz)
    return time_term + space_term


@dataclass(frozen=True)
class ScanRegion:
    """Scan box [t0, t1] x prod_j [lo_j, hi_j], away from the torus seam."""

    t0: float
    t1: float
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if not 0 < self.t0 <= self.t1:
            raise ConfigError("need 0 < t0 <= t1")
        if len(self.lo) != len(self.hi):
            raise ConfigError("lo/hi dimension mismatch")
        for lo_j, hi_j in zip(self.lo, self.hi):
            if not (0.0 < lo_j <= hi_j < TWO_PI):
                raise ConfigError("spatial box must satisfy 0 < lo <= hi < 2pi")

    @property
    def degenerate(self) -> bool:
        return self.t0 == self.t1 and all(l == h for l, h in zip(self.lo, self.hi))


@dataclass
class EnvelopeReport:
    """Extremes of the ratio squared-increment / envelope over a random scan."""

    ratio_min: float
    ratio_max: float
    argmin: tuple[SpaceTimePoint, SpaceTimePoint]
    argmax: tuple[SpaceTimePoint, SpaceTimePoint]
    sample_count: int
    seed: int
    k_max: int

    @staticmethod
    def _fmt_pair_t(pair):
        return f"{pair[0].t!r};{pair[1].t!r}"

    @staticmethod
    def _fmt_pair_x(pair):
        return ";".join(",".join(repr(c) for c in pt.x) for pt in pair)

    def to_record(self) -> dict:
        return {
            "ratio_min": self.ratio_min,
            "ratio_max": self.ratio_max,
            "t_min": self._fmt_pair_t(self.argmin),
            "x_min": self._fmt_pair_x(self.argmin),
            "t_max": self._fmt_pair_t(self.argmax),
            "x_max": self._fmt_pair_x(self.argmax),
            "n_samples": self.sample_count,
            "seed": self.seed,
            "k_max": self.k_max,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)

    def write_csv(self, path):
        rec = self.to_record()
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rec))
            writer.writeheader()
            writer.writerow(rec)


def _sample_region(region: ScanRegion, n: int, rng) -> list[SpaceTimePoint]:
    ts = rng.uniform(region.t0, region.t1, size=n)
    lo = np.asarray(region.lo)
    hi = np.asarray(region.hi)
    xs = rng.uniform(lo, hi, size=(n, len(lo)))
    return [SpaceTimePoint(t=float(t), x=tuple(x)) for t, x in zip(ts, xs)]


def ratio_scan(
    region: ScanRegion,
    n: int,
    eng: SecondOrderEngine,
    rng_seed: int,
    workers: int = 1,
) -> EnvelopeReport:
    """Extremes of increment/envelope over ``n`` random pairs in the region.

    Pairs are drawn up front from the seeded generator, so the result does
    not depend on the worker count.
    """
    if n < 2:
        raise ConfigError("need at least 2 sample pairs")
    if region.degenerate:
        raise ConfigError("degenerate scan region: single point")
    rng = np.random.default_rng(rng_seed)
    ps = _sample_region(region, n, rng)
    qs = _sample_region(region, n, rng)

    def ratio(pair):
        p, q = pair
        return increment_norm_sq(p, q, eng) / anisotropy_envelope(p, q, eng)

    pairs = list(zip(ps, qs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            ratios = list(pool.map(ratio, pairs))
    else:
        ratios = [ratio(pair) for pair in pairs]
    ratios = np.asarray(ratios)
    i_min = int(np.argmin(ratios))
    i_max = int(np.argmax(ratios))
    return EnvelopeReport(
        ratio_min=float(ratios[i_min]),
        ratio_max=float(ratios[i_max]),
        argmin=pairs[i_min],
        argmax=pairs[i_max],
        sample_count=n,
        seed=rng_seed,
        k_max=eng.tr.k_max,
    )


# ---------------------------------------------------------------------------
# exponent fits
# ---------------------------------------------------------------------------


class SlopeFit(NamedTuple):
    slope: float
    stderr: float


def _loglog_slope(xs, ys) -> SlopeFit:
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    n = len(lx)
    A = np.vstack([lx, np.ones(n)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    if n > 2:
        rss = float(res[0]) if len(res) else float(((A @ coef - ly) ** 2).sum())
        var = rss / (n - 2) / float(((lx - lx.mean()) ** 2).sum())
        stderr = math.sqrt(max(var, 0.0))
    else:
        stderr = float("nan")
    return SlopeFit(slope=float(coef[0]), stderr=stderr)


def time_exponent_fit(
    x: Sequence[float],
    t: float,
    h_grid: Sequence[float],
    eng: SecondOrderEngine,
) -> SlopeFit:
    """OLS slope of log d^2((t+h, x), (t, x)) against log h."""
    hs = np.asarray(sorted(h_grid, reverse=True), dtype=float)
    if hs.min() <= 0:
        raise DomainError("h grid must be positive")
    if t + hs.max() > eng.horizon + 1e-12:
        raise DomainError("t + h exceeds the horizon")
    if hs.max() / hs.min() < 10.0:
        warnings.warn("h grid spans less than one decade", IllConditionedFit)
    base = SpaceTimePoint(t=t, x=tuple(x))
    vals = [
        increment_norm_sq(SpaceTimePoint(t=t + h, x=tuple(x)), base, eng) for h in hs
    ]
    return _loglog_slope(hs, vals)


@dataclass
class SpaceFit:
    """Slope for d = 1, 3; log-corrected ratio table for d = 2."""

    slope: float | None
    stderr: float | None
    ratios: list[tuple[float, float]] | None


def space_exponent_fit(
    t: float,
    x: Sequence[float],
    z_grid: Sequence[float],
    eng: SecondOrderEngine,
) -> SpaceFit:
    """Spatial regularity scan at fixed time along the diagonal direction.

    For d = 1, 3 returns the log-log slope of the squared increment against
    the offset; for d = 2 returns the table d^2 / (z^2 log(C/z)), which must
    stay within a bounded window.
    """
    if t <= 0:
        raise DomainError("spatial lower bound is non-informative at t = 0")
    d = eng.d
    zs = np.asarray(sorted(z_grid, reverse=True), dtype=float)
    if zs.min() <= 0:
        raise DomainError("offsets must be positive")
    if zs.max() > math.pi / (5.0 * math.sqrt(d)) + 1e-12:
        raise DomainError("offsets beyond the small-separation regime pi/(5 sqrt(d))")
    base = SpaceTimePoint(t=t, x=tuple(x))
    vals = []
    for z in zs:
        shifted = tuple(xj + z / math.sqrt(d) for xj in x)
        vals.append(increment_norm_sq(SpaceTimePoint(t=t, x=shifted), base, eng))
    if d == 2:
        table = [
            (float(z), v / (z**2 * math.log(eng.log_c / z))) for z, v in zip(zs, vals)
        ]
        return SpaceFit(slope=None, stderr=None, ratios=table)
    if zs.max() / zs.min() < 10.0:
        warnings.warn("offset grid spans less than one decade", IllConditionedFit)
    fit = _loglog_slope(zs, vals)
    return SpaceFit(slope=fit.slope, stderr=fit.stderr, ratios=None)


# ---------------------------------------------------------------------------
# appendix machinery
# ---------------------------------------------------------------------------


def green_increment_energy_ratio(h: float, eng: SecondOrderEngine) -> float:
    """Whole-line energy of a kernel time-shift, normalized by h^(1-d/4).

    The closed form of int_0^inf int (G(r+h) - G(r))^2 collapses to
    2 V(h/2) - V(h) in terms of the variance function; the ratio against
    h^(1-d/4) stays bounded over all h > 0.
    """
    if h <= 0:
        raise DomainError("h must be positive")
    num = 2.0 * _sigma_sq(eng.d, 0.5 * h) - _sigma_sq(eng.d, h)
    return num / h ** (1.0 - eng.d / 4.0)


def inclusion_exclusion(p: Sequence[float]) -> float:
    """1 - prod(1 - p_j) via the alternating symmetric-sum expansion."""
    probs = np.asarray(p, dtype=float)
    if probs.ndim != 1 or probs.size < 1:
        raise DomainError("need a vector of at least one probability")
    if np.any(probs < 0) or np.any(probs > 1):
        raise DomainError("components must lie in [0, 1]")
    # elementary symmetric sums via polynomial product prod(1 + p_j y)
    coeffs = np.array([1.0])
    for pj in probs:
        coeffs = np.convolve(coeffs, np.array([1.0, pj]))
    signs = (-1.0) ** np.arange(len(coeffs))
    # coeffs[k] = e_k; value = sum_{k>=1} (-1)^(k-1) e_k
    return float(-(signs[1:] * coeffs[1:]).sum())
