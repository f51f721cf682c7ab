"""Fourier-mode machinery for the bilaplacian heat semigroup on the torus.

The eigenbasis on [0, 2pi)^d is the tensor product of 1-D sine/cosine
branches; a mode is a pair (i, k) of branch flags and wavenumbers with
(i_j, k_j) != (0, 0) per coordinate.  The eigenvalue of (i, k) under the
squared Laplacian is sum_j k_j^4, independent of the branch flags.

Two evaluation routes for the heat kernel coexist:

* ``green`` sums the eigen-expansion directly over all wavevectors with
  |k| <= k_max and returns a certified bound on the discarded tail;
* ``kernel_diag`` / ``kernel_gap`` exploit the tensor structure: the
  d-dimensional kernel is the product of 1-D kernels, each a rapidly
  converging exponential-quartic cosine series.  This route has no
  truncation error beyond machine precision and backs the exact
  second-order calculus in :mod:`bhheat.covariance`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError, ResourceLimit, UnsupportedDimension

TWO_PI = 2.0 * math.pi

# Series cutoff: terms e^{-tau m^4} below e^{-LOG_CUT} are dropped.
_LOG_CUT = 42.0
_MAX_TERMS = 2_000_000

# Angular mass of w -> 1/sum_j w_j^4 over the unit-sphere octant.
# d=2 value is pi/sqrt(2) in closed form; d=3 by high-accuracy quadrature.
_ANGULAR_INV_QUARTIC = {
    1: 1.0,
    2: math.pi / math.sqrt(2.0),
    3: 2.8392852355024885,
}


def check_dimension(d: int) -> int:
    if d not in (1, 2, 3):
        raise UnsupportedDimension(d)
    return d


# ---------------------------------------------------------------------------
# modes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Mode:
    """One Fourier mode (i, k): branch flags i (0=sine, 1=cosine), wavenumbers k."""

    k: tuple[int, ...]
    i: tuple[int, ...]

    def __post_init__(self):
        if len(self.k) != len(self.i):
            raise DomainError("k and i must have the same length")
        if not self.k:
            raise DomainError("empty mode")
        for ij, kj in zip(self.i, self.k):
            if ij not in (0, 1):
                raise DomainError(f"branch flag {ij} not in {{0, 1}}")
            if kj < 0 or kj != int(kj):
                raise DomainError(f"wavenumber {kj} not a natural number")
            if (ij, kj) == (0, 0):
                raise DomainError("(i_j, k_j) = (0, 0) is not a valid branch")

    @property
    def d(self) -> int:
        return len(self.k)

    @property
    def null_count(self) -> int:
        return sum(1 for kj in self.k if kj == 0)

    @property
    def eigenvalue(self) -> float:
        return float(sum(kj**4 for kj in self.k))


def eigenvalue(k: Sequence[int]) -> float:
    """Eigenvalue sum_j k_j^4 of the squared Laplacian for wavevector k."""
    return float(sum(int(kj) ** 4 for kj in k))


def enumerate_modes(d: int, k_max: int) -> tuple[Mode, ...]:
    """All valid modes (i, k) with |k| <= k_max, lexicographic in (k, i).

    Each wavevector k carries 2^(d - null_count(k)) branch combinations:
    coordinates with k_j = 0 admit only the cosine (constant) branch.
    """
    check_dimension(d)
    if k_max < 0:
        raise DomainError("k_max must be >= 0")
    out: list[Mode] = []
    for k in itertools.product(range(k_max + 1), repeat=d):
        if sum(kj * kj for kj in k) > k_max * k_max:
            continue
        branch_choices = [(0, 1) if kj > 0 else (1,) for kj in k]
        for i in itertools.product(*branch_choices):
            out.append(Mode(k=k, i=i))
    return tuple(out)


def basis_eval(m: Mode, x: Sequence[float]) -> float:
    """Value of the tensor eigenfunction of mode m at x in [0, 2pi)^d."""
    if len(x) != m.d:
        raise DomainError("point dimension does not match the mode")
    val = 1.0
    for ij, kj, xj in zip(m.i, m.k, x):
        if kj == 0:
            val *= 1.0 / math.sqrt(TWO_PI)
        elif ij == 1:
            val *= math.cos(kj * xj) / math.sqrt(math.pi)
        else:
            val *= math.sin(kj * xj) / math.sqrt(math.pi)
    return val


def wavevector_table(d: int, k_max: int):
    """Per-wavevector arrays (k, eigenvalue, null count), k != 0 included.

    One record per k in N^d with |k| <= k_max, sorted by decreasing
    eigenvalue (ties broken lexicographically) so that accumulating sums
    visit small terms first.  Branch multiplicity for second-order sums is
    carried implicitly through the null count.
    """
    check_dimension(d)
    rng = np.arange(0, k_max + 1)
    grids = np.meshgrid(*([rng] * d), indexing="ij")
    k = np.stack([g.ravel() for g in grids], axis=1)
    k = k[(k * k).sum(axis=1) <= k_max * k_max]
    lam = (k.astype(np.float64) ** 4).sum(axis=1)
    nulls = (k == 0).sum(axis=1)
    order = np.lexsort(tuple(k[:, j] for j in range(d - 1, -1, -1)) + (-lam,))
    return k[order], lam[order], nulls[order]


# ---------------------------------------------------------------------------
# truncation with certified tails
# ---------------------------------------------------------------------------


def mode_count(d: int, k_max: int) -> int:
    """Number of wavevectors k in N^d with |k| <= k_max (k = 0 included)."""
    check_dimension(d)
    if d == 1:
        return k_max + 1
    rng = np.arange(0, k_max + 1, dtype=np.int64)
    if d == 2:
        return int(np.sum(np.floor(np.sqrt(np.maximum(k_max**2 - rng**2, 0))) + 1))
    total = 0
    for k1 in range(k_max + 1):
        r2 = k_max**2 - k1 * k1
        total += int(np.sum(np.floor(np.sqrt(np.maximum(r2 - rng * rng, 0))) + 1)) if r2 >= 0 else 0
    return total


def inv_lambda_tail(d: int, k_max: int) -> float:
    """Certified upper bound for sum_{|k| > k_max} 2^-(n(k)+1) pi^-d / lambda_k.

    Cell-by-cell comparison with the integral of 1/sum_j w_j^4 over the
    positive orthant, stratified by the support pattern of k.  Requires
    k_max >= 2 sqrt(d).
    """
    check_dimension(d)
    if k_max < 2.0 * math.sqrt(d):
        raise DomainError("tail bound requires k_max >= 2 sqrt(d)")
    total = 0.0
    for d_eff in range(1, d + 1):
        shift = k_max - math.sqrt(d_eff)
        total += (
            math.comb(d, d_eff)
            * 2.0 ** (d_eff - d - 1)
            * _ANGULAR_INV_QUARTIC[d_eff]
            * shift ** (d_eff - 4)
            / (4 - d_eff)
        )
    return total / math.pi**d


def green_tail(d: int, t: float, k_max: int) -> float:
    """Certified bound on the discarded heat-kernel mass sum_{|k|>k_max} e^{-lambda_k t} 2^-n(k) pi^-d."""
    if t <= 0:
        raise DomainError("t must be positive")
    total = 0.0
    m = max(int(math.floor(k_max)), 1)
    while True:
        term = (m + 2.0) ** d * math.exp(-(m**4) * t / d)
        total += term
        m += 1
        if term < 1e-300 or term < 1e-18 * total:
            break
    return total / math.pi**d


@dataclass(frozen=True)
class Truncation:
    """Retain modes with |k| <= k_max; tail_estimate certifies the discarded
    mass of the 1/lambda-weighted mode series."""

    k_max: int
    tail_estimate: float

    @classmethod
    def with_k_max(cls, d: int, k_max: int) -> "Truncation":
        return cls(k_max=k_max, tail_estimate=inv_lambda_tail(d, k_max))

    @classmethod
    def for_tolerance(cls, d: int, tol: float, max_modes: int = 4_000_000) -> "Truncation":
        """Smallest k_max whose certified tail is below ``tol``.

        Raises ResourceLimit when the required lattice would exceed
        ``max_modes`` wavevectors.
        """
        check_dimension(d)
        if tol <= 0:
            raise DomainError("tolerance must be positive")
        lo = int(math.ceil(2.0 * math.sqrt(d)))
        k = lo
        while inv_lambda_tail(d, k) > tol:
            k = max(k + 1, int(k * 1.3))
            if mode_count(d, k) > max_modes:
                raise ResourceLimit(
                    f"tolerance {tol:g} needs k_max > {k} in d={d}: "
                    f"{mode_count(d, k):,} wavevectors exceed the budget of {max_modes:,}"
                )
        while k > lo and inv_lambda_tail(d, k - 1) <= tol:
            k -= 1
        return cls(k_max=k, tail_estimate=inv_lambda_tail(d, k))


# Default engine truncation tolerances.  d=2,3 cannot reach 1e-8 within any
# sane mode budget (the tail decays like k_max^(d-4)); the exact kernel route
# is used wherever those tolerances would matter.
DEFAULT_TRUNCATION_TOL = {1: 1e-8, 2: 1e-7, 3: 5e-4}


def default_truncation(d: int) -> Truncation:
    return Truncation.for_tolerance(d, DEFAULT_TRUNCATION_TOL[check_dimension(d)])


# ---------------------------------------------------------------------------
# heat kernel: lattice sum and factorized exact route
# ---------------------------------------------------------------------------


class GreenValue(NamedTuple):
    value: float
    tail_bound: float


def green(t: float, x: Sequence[float], y: Sequence[float], tr: Truncation) -> GreenValue:
    """Truncated heat kernel G(t; x, y) with a certified tail bound.

    The eigen-expansion sums e^{-lambda_k t} 2^-n(k) pi^-d prod_j cos(k_j (x_j - y_j))
    over |k| <= tr.k_max.  Divergent at t = 0, hence the strict positivity
    requirement.
    """
    if t <= 0:
        raise DomainError("the heat kernel series diverges at t <= 0")
    d = len(x)
    check_dimension(d)
    if len(y) != d:
        raise DomainError("x and y must have the same dimension")
    k, lam, nulls = wavevector_table(d, tr.k_max)
    dz = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    terms = np.exp(-lam * t) / (2.0**nulls * math.pi**d) * np.cos(k * dz).prod(axis=1)
    return GreenValue(value=float(terms.sum()), tail_bound=green_tail(d, t, tr.k_max))


def _series_length(tau: float) -> int:
    n = int(math.ceil((_LOG_CUT / tau) ** 0.25)) + 2
    if n > _MAX_TERMS:
        raise DomainError(f"kernel series at tau={tau:g} would need {n} terms")
    return n


def line_kernel(t: float, z: float) -> float:
    """1-D heat kernel on the circle: (1/pi)(1/2 + sum_m e^{-t m^4} cos(m z))."""
    if t <= 0:
        raise DomainError("t must be positive")
    m = np.arange(1, _series_length(t), dtype=np.float64)
    return (0.5 + float((np.exp(-t * m**4) * np.cos(m * z)).sum())) / math.pi


def kernel_diag(t: float, d: int) -> float:
    """d-dimensional kernel on the diagonal, G(t; x, x) = line_kernel(t, 0)^d."""
    check_dimension(d)
    m = np.arange(1, _series_length(t), dtype=np.float64)
    return ((0.5 + float(np.exp(-t * m**4).sum())) / math.pi) ** d


def kernel_at(t: float, dz: Sequence[float]) -> float:
    """d-dimensional kernel at displacement dz via the coordinate product."""
    check_dimension(len(dz))
    out = 1.0
    for z in dz:
        out *= line_kernel(t, z)
    return out


def kernel_gap(t: float, dz: Sequence[float]) -> float:
    """G(t; 0) - G(t; dz), assembled without cancellation.

    Telescopes the product difference; each 1-D factor difference is the
    series sum_m e^{-t m^4} * 2 sin^2(m z / 2) of nonnegative terms.
    """
    d = check_dimension(len(dz))
    m = np.arange(1, _series_length(t), dtype=np.float64)
    w = np.exp(-t * m**4)
    diag = 0.5 + float(w.sum())
    factors = []
    gaps = []
    for z in dz:
        gap_z = float((w * 2.0 * np.sin(0.5 * m * z) ** 2).sum())
        gaps.append(gap_z)
        factors.append(diag - gap_z)
    total = 0.0
    for j in range(d):
        suffix = 1.0
        for l in range(j + 1, d):
            suffix *= factors[l]
        total += diag**j * gaps[j] * suffix
    return total / math.pi**d
