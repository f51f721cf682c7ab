"""Gauge family, capacity by energy minimization, covering estimators.

The anisotropy of the field induces the gauge pair q1(tau) = tau^((4-d)/8),
q2(tau) = (log(C/tau))^(beta/2) tau^(1 ^ (4-d)/2) and the composite gauge

    gbar(tau) = tau^D / (q1^{-1}(tau) * q2^{-1}(tau)^d),

whose behaviour at 0 flips at the critical copy count D0 = 8/(4-d) + d/(1 ^ (4-d)/2):
gbar(0+) = 0 for D > D0 and +infinity for D < D0.  Hitting probabilities are
bounded above by gbar-covering sums (Hausdorff) and below by the reciprocal
of minimal 1/gbar-energies (capacity); this module provides desk-scale
estimators for both, plus box counting as the implementable surrogate for
Hausdorff dimension.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DomainError
from .spectral import check_dimension


# ---------------------------------------------------------------------------
# critical dimension and gauges
# ---------------------------------------------------------------------------


def critical_dimension(d: int) -> Fraction:
    """Critical number of independent copies: 11/3, 6, 14 for d = 1, 2, 3."""
    check_dimension(d)
    alpha1 = Fraction(4 - d, 8)
    alpha2 = min(Fraction(1), Fraction(4 - d, 2))
    return 1 / alpha1 + d / alpha2


@dataclass(frozen=True)
class GaugeSpec:
    """Gauge pair and composite gauge for field dimension d, copy count D."""

    d: int
    D: float
    log_c: float = None

    def __post_init__(self):
        check_dimension(self.d)
        if self.log_c is None:
            object.__setattr__(self, "log_c", 4.0 * math.pi * math.sqrt(self.d))
        if self.log_c <= 0:
            raise DomainError("log constant must be positive")

    @property
    def beta(self) -> int:
        return 1 if self.d == 2 else 0

    @property
    def alpha1(self) -> float:
        return (4 - self.d) / 8.0

    @property
    def alpha2(self) -> float:
        return min(1.0, (4 - self.d) / 2.0)

    @property
    def tau_star(self) -> float:
        """Upper end of the working domain; q2 is strictly increasing below it."""
        return self.log_c * math.exp(-self.beta / 2.0)

    def _check_tau(self, tau: float):
        if not 0.0 < tau < self.tau_star:
            raise DomainError(f"tau={tau:g} outside the working domain (0, {self.tau_star:g})")

    def q1(self, tau: float) -> float:
        self._check_tau(tau)
        return tau**self.alpha1

    def q2(self, tau: float) -> float:
        self._check_tau(tau)
        val = tau**self.alpha2
        if self.beta:
            val *= math.sqrt(math.log(self.log_c / tau))
        return val

    def q1_inv(self, tau: float) -> float:
        self._check_tau(tau)
        return tau ** (1.0 / self.alpha1)

    def q2_inv(self, tau: float) -> float:
        """Numerical inverse of q2 for d = 2; closed form otherwise."""
        self._check_tau(tau)
        if not self.beta:
            return tau ** (1.0 / self.alpha2)
        # bisection bracket: sqrt(log) >= sqrt(1/2) on the domain
        lo, hi = 1e-320, min(self.tau_star * (1 - 1e-12), tau * math.sqrt(2.0))
        if self.q2(hi) < tau:
            raise DomainError(f"tau={tau:g} above the range of q2 on its domain")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid * math.sqrt(math.log(self.log_c / mid)) < tau:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * hi:
                break
        sigma = 0.5 * (lo + hi)
        for _ in range(4):  # Newton polish
            L = math.log(self.log_c / sigma)
            f = sigma * math.sqrt(L) - tau
            fp = math.sqrt(L) - 0.5 / math.sqrt(L)
            step = f / fp
            if sigma - step <= 0:
                break
            sigma -= step
        return sigma

    def composite(self, tau: float) -> float:
        """gbar(tau) = tau^D (q1_inv)^-1 (q2_inv)^-d, with closed-form fast paths."""
        self._check_tau(tau)
        if self.d == 1:
            return tau ** (self.D - 11.0 / 3.0)
        if self.d == 3:
            return tau ** (self.D - 14.0)
        return tau**self.D / (self.q1_inv(tau) * self.q2_inv(tau) ** self.d)

    @property
    def zero_limit(self) -> float:
        """Limit of the composite gauge at 0: 0 above D0, +inf below.

        At the critical count the d = 2 log factor still diverges; for
        d = 1, 3 the limit is 1.
        """
        d0 = float(critical_dimension(self.d))
        if self.D > d0:
            return 0.0
        if self.D < d0:
            return math.inf
        return math.inf if self.d == 2 else 1.0


def gauge_eval(spec: GaugeSpec, tau: float) -> tuple[float, float, float]:
    """(q1, q2, gbar) at tau; domain errors outside the working range."""
    return spec.q1(tau), spec.q2(tau), spec.composite(tau)


class PowerGauge:
    """Classical gauge tau^gamma (gamma-dimensional Hausdorff measure)."""

    def __init__(self, gamma: float):
        self.gamma = gamma

    def __call__(self, tau: float) -> float:
        return tau**self.gamma

    @property
    def zero_limit(self) -> float:
        if self.gamma > 0:
            return 0.0
        return 1.0 if self.gamma == 0 else math.inf

    def describe(self) -> str:
        return f"tau^{self.gamma:g}"


class CompositeGauge:
    """The composite gauge of a GaugeSpec as a plain gauge function."""

    def __init__(self, spec: GaugeSpec):
        self.spec = spec

    def __call__(self, tau: float) -> float:
        return self.spec.composite(tau)

    @property
    def zero_limit(self) -> float:
        return self.spec.zero_limit

    def describe(self) -> str:
        return f"gbar(d={self.spec.d}, D={self.spec.D:g})"


class LogPowerGauge:
    """Scale-family member tau^nu sqrt(log(C/tau)) for the generalized dimension."""

    def __init__(self, nu: float, log_c: float):
        if log_c <= 0:
            raise DomainError("log constant must be positive")
        self.nu = nu
        self.log_c = log_c

    def __call__(self, tau: float) -> float:
        return tau**self.nu * math.sqrt(math.log(self.log_c / tau))

    @property
    def zero_limit(self) -> float:
        return 0.0 if self.nu > 0 else math.inf

    def describe(self) -> str:
        return f"tau^{self.nu:g} sqrt(log({self.log_c:g}/tau))"


# ---------------------------------------------------------------------------
# target sets
# ---------------------------------------------------------------------------


class TargetSet:
    """Bounded Borel target in R^D; subclasses implement distance and bounds."""

    def distance(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def bounding_box(self):
        raise NotImplementedError

    @property
    def is_empty(self) -> bool:
        return False

    @property
    def ambient_dim(self) -> int:
        raise NotImplementedError


@dataclass(frozen=True)
class PointTarget(TargetSet):
    z: tuple[float, ...]

    def distance(self, pts):
        return np.linalg.norm(np.asarray(pts, dtype=float) - np.asarray(self.z), axis=-1)

    def bounding_box(self):
        z = np.asarray(self.z, dtype=float)
        return z.copy(), z.copy()

    @property
    def ambient_dim(self):
        return len(self.z)


@dataclass(frozen=True)
class BallTarget(TargetSet):
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise DomainError("ball radius must be positive and finite")

    def distance(self, pts):
        r = np.linalg.norm(np.asarray(pts, dtype=float) - np.asarray(self.center), axis=-1)
        return np.maximum(r - self.radius, 0.0)

    def bounding_box(self):
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius

    @property
    def ambient_dim(self):
        return len(self.center)


@dataclass(frozen=True)
class BoxTarget(TargetSet):
    corner: tuple[float, ...]
    sides: tuple[float, ...]

    def __post_init__(self):
        if len(self.corner) != len(self.sides):
            raise DomainError("corner/sides dimension mismatch")
        if any(not (s > 0 and math.isfinite(s)) for s in self.sides):
            raise DomainError("box sides must be positive and finite")

    def distance(self, pts):
        lo = np.asarray(self.corner, dtype=float)
        hi = lo + np.asarray(self.sides, dtype=float)
        p = np.asarray(pts, dtype=float)
        gap = np.maximum(np.maximum(lo - p, p - hi), 0.0)
        return np.linalg.norm(gap, axis=-1)

    def bounding_box(self):
        lo = np.asarray(self.corner, dtype=float)
        return lo, lo + np.asarray(self.sides, dtype=float)

    @property
    def ambient_dim(self):
        return len(self.corner)


@dataclass(frozen=True)
class UnionTarget(TargetSet):
    parts: tuple[TargetSet, ...]

    def distance(self, pts):
        p = np.asarray(pts, dtype=float)
        if not self.parts:
            return np.full(p.shape[:-1], np.inf)
        return np.minimum.reduce([part.distance(p) for part in self.parts])

    def bounding_box(self):
        if not self.parts:
            raise DomainError("empty union has no bounding box")
        los, his = zip(*(part.bounding_box() for part in self.parts))
        return np.minimum.reduce(los), np.maximum.reduce(his)

    @property
    def is_empty(self):
        return not self.parts

    @property
    def ambient_dim(self):
        if not self.parts:
            raise DomainError("empty union has no ambient dimension")
        return self.parts[0].ambient_dim


def describe_target(target: TargetSet) -> str:
    if isinstance(target, PointTarget):
        return f"point{tuple(round(v, 6) for v in target.z)}"
    if isinstance(target, BallTarget):
        return f"ball(r={target.radius:g})"
    if isinstance(target, BoxTarget):
        return f"box(sides={tuple(round(s, 6) for s in target.sides)})"
    if isinstance(target, UnionTarget):
        return f"union[{len(target.parts)}]"
    return type(target).__name__


# ---------------------------------------------------------------------------
# discretization
# ---------------------------------------------------------------------------


@dataclass
class DiscretizedSet:
    """Cubical cells covering a target: centers, common side, resolution bound."""

    centers: np.ndarray
    side: float
    resolution: float

    @property
    def n_cells(self) -> int:
        return self.centers.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.centers.shape[1]

    @property
    def diameter(self) -> float:
        return self.side * math.sqrt(self.ambient_dim)


def discretize(target: TargetSet, resolution: float) -> DiscretizedSet:
    """Lattice cells of diameter <= resolution covering the target.

    Point-like targets keep zero-size cells (the points themselves); atomic
    measures on them correctly produce infinite energy under singular
    kernels.
    """
    if resolution <= 0:
        raise DomainError("resolution must be positive")
    if target.is_empty:
        raise DomainError("cannot discretize an empty target")
    if isinstance(target, PointTarget):
        return DiscretizedSet(
            centers=np.asarray([target.z], dtype=float), side=0.0, resolution=resolution
        )
    if isinstance(target, UnionTarget) and all(
        isinstance(p, PointTarget) for p in target.parts
    ):
        centers = np.asarray([p.z for p in target.parts], dtype=float)
        return DiscretizedSet(centers=centers, side=0.0, resolution=resolution)
    D = target.ambient_dim
    side = resolution / math.sqrt(D)
    lo, hi = target.bounding_box()
    first = np.floor(lo / side).astype(int) - 1
    last = np.ceil(hi / side).astype(int) + 1
    axes = [np.arange(first[j], last[j] + 1) * side + 0.5 * side for j in range(D)]
    grids = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([g.ravel() for g in grids], axis=1)
    # strict inequality drops cells that only kiss the target at a null set
    keep = target.distance(centers) < 0.5 * side * math.sqrt(D) * (1.0 - 1e-9)
    centers = centers[keep]
    if centers.shape[0] == 0:
        raise DomainError("discretization produced no cells")
    return DiscretizedSet(centers=centers, side=side, resolution=resolution)


# ---------------------------------------------------------------------------
# potential kernels
# ---------------------------------------------------------------------------


def _subcell_offsets(D: int, side: float) -> np.ndarray:
    # 4 midpoints per axis -> 4^D subcell centers
    q = np.array([-0.375, -0.125, 0.125, 0.375]) * side
    grids = np.meshgrid(*([q] * D), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


class RieszKernel:
    """Power potential |z|^-gamma with exact or subdivided cell-pair means."""

    def __init__(self, gamma: float):
        if gamma <= 0:
            raise DomainError("exponent must be positive")
        self.gamma = gamma
        self.value_at_zero = math.inf

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            out = r ** (-self.gamma)
        return out if out.shape else float(out)

    def integrable_over_cell(self, D: int) -> bool:
        return self.gamma < D

    def describe(self) -> str:
        return f"|z|^-{self.gamma:g}"

    # -- exact 1-D means: second difference of the double antiderivative
    def _antideriv(self, z: float) -> float:
        a = abs(z)
        if self.gamma == 1.0:
            return a * math.log(a) - a if a > 0 else 0.0
        return a ** (2.0 - self.gamma) / ((1.0 - self.gamma) * (2.0 - self.gamma))

    def _pair_mean_1d(self, delta: float, side: float) -> float:
        if side == 0.0:
            return self(delta) if delta > 0 else math.inf
        F = self._antideriv
        return (F(delta + side) - 2.0 * F(delta) + F(delta - side)) / side**2

    @lru_cache(maxsize=None)
    def _self_mean_unit(self, D: int) -> float:
        """Mean of |U - V|^-gamma over a unit-cube pair via homogeneity.

        Splits the cube 4-fold per axis; coincident subcell pairs rescale by
        4^gamma, which closes the recursion.
        """
        if not self.integrable_over_cell(D):
            return math.inf
        offs = _subcell_offsets(D, 1.0)
        nsub = offs.shape[0]
        rel = offs[:, None, :] - offs[None, :, :]
        dist = np.linalg.norm(rel, axis=2)
        mask = dist > 0
        s_distinct = 0.0
        for a in range(nsub):
            for b in range(nsub):
                if not mask[a, b]:
                    continue
                s_distinct += self._pair_mean_subdiv(rel[a, b], 0.25, D, levels=1)
        return s_distinct / nsub**2 / (1.0 - 4.0 ** (self.gamma - D))

    def _pair_mean_subdiv(self, dz: np.ndarray, side: float, D: int, levels: int) -> float:
        dist = float(np.linalg.norm(dz))
        if levels == 0 or dist >= 4.0 * side * math.sqrt(D):
            return float(self(dist)) if dist > 0 else side**-self.gamma * self._self_mean_unit(D)
        offs = _subcell_offsets(D, side)
        rel = dz[None, None, :] + offs[:, None, :] - offs[None, :, :]
        dists = np.linalg.norm(rel, axis=2)
        coincident = dists < 1e-14 * max(side, 1.0)
        vals = np.where(coincident, 0.0, self(np.maximum(dists, 1e-300)))
        total = float(vals.sum())
        sub_side = side / 4.0
        n_co = int(coincident.sum())
        if n_co:
            total += n_co * (
                sub_side**-self.gamma * self._self_mean_unit(D)
                if levels == 1
                else self._pair_mean_subdiv(np.zeros(D), sub_side, D, levels - 1)
            )
        return total / offs.shape[0] ** 2

    def pair_mean(self, ci: np.ndarray, cj: np.ndarray, side: float) -> float:
        """Mean of the kernel over the cell pair centred at ci, cj."""
        D = len(ci)
        dz = np.asarray(ci, dtype=float) - np.asarray(cj, dtype=float)
        dist = float(np.linalg.norm(dz))
        if side == 0.0:
            return float(self(dist)) if dist > 0 else math.inf
        if D == 1:
            return self._pair_mean_1d(dist, side)
        if dist == 0.0:
            if not self.integrable_over_cell(D):
                return math.inf
            return side**-self.gamma * self._self_mean_unit(D)
        return self._pair_mean_subdiv(dz, side, D, levels=2)


class GaugeReciprocalKernel:
    """Potential 1/g(|z|) for a gauge g; the capacity kernel of the theory."""

    def __init__(self, gauge):
        self.gauge = gauge
        limit = gauge.zero_limit
        self.value_at_zero = math.inf if limit == 0.0 else (0.0 if math.isinf(limit) else 1.0 / limit)

    def __call__(self, r):
        scalar = np.ndim(r) == 0
        rs = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.array([1.0 / self.gauge(v) if v > 0 else self.value_at_zero for v in rs])
        return float(out[0]) if scalar else out

    def integrable_over_cell(self, D: int) -> bool:
        # local exponent of the kernel near 0 must exceed -D
        r1, r2 = 1e-7, 1e-6
        with np.errstate(all="ignore"):
            expo = (math.log(self(r2)) - math.log(self(r1))) / (math.log(r2) - math.log(r1))
        return expo > -D

    def describe(self) -> str:
        return f"1/{self.gauge.describe()}"

    def pair_mean(self, ci, cj, side: float) -> float:
        D = len(ci)
        dz = np.asarray(ci, dtype=float) - np.asarray(cj, dtype=float)
        dist = float(np.linalg.norm(dz))
        if side == 0.0:
            return float(self(dist)) if dist > 0 else self.value_at_zero
        if dist == 0.0 and not self.integrable_over_cell(D):
            return math.inf
        return self._subdiv(dz, side, D, levels=2)

    def _subdiv(self, dz, side, D, levels):
        dist = float(np.linalg.norm(dz))
        if levels == 0 or dist >= 4.0 * side * math.sqrt(D):
            if dist > 0:
                return float(self(dist))
            # deepest coincident block: kernel at the rms pair distance
            return float(self(side * math.sqrt(D / 6.0)))
        offs = _subcell_offsets(D, side)
        rel = dz[None, None, :] + offs[:, None, :] - offs[None, :, :]
        dists = np.linalg.norm(rel, axis=2)
        coincident = dists < 1e-14 * max(side, 1.0)
        vals = np.where(coincident, 0.0, self(np.maximum(dists, 1e-300)))
        total = float(vals.sum())
        n_co = int(coincident.sum())
        if n_co:
            total += n_co * self._subdiv(np.zeros(D), side / 4.0, D, levels - 1)
        return total / offs.shape[0] ** 2


# ---------------------------------------------------------------------------
# energy and capacity
# ---------------------------------------------------------------------------


class EnergyResult(NamedTuple):
    value: float
    finite: bool


def _interaction_matrix(ds: DiscretizedSet, kernel) -> np.ndarray:
    centers = ds.centers
    n, D = centers.shape
    side = ds.side
    if side == 0.0:
        dist = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=2)
        K = np.where(dist > 0, kernel(np.maximum(dist, 1e-300)), kernel.value_at_zero)
        return K
    # 1-D equispaced lattice: the matrix is a function of the lag
    if D == 1:
        c = centers[:, 0]
        if n == 1:
            return np.array([[kernel.pair_mean(centers[0], centers[0], side)]])
        gaps = np.diff(np.sort(c))
        if np.allclose(gaps, gaps[0], rtol=1e-9, atol=1e-12):
            order = np.argsort(c)
            lag_vals = np.array(
                [
                    kernel.pair_mean(np.array([0.0]), np.array([m * gaps[0]]), side)
                    for m in range(n)
                ]
            )
            idx = np.abs(np.argsort(order)[:, None] - np.argsort(order)[None, :])
            return lag_vals[idx]
    dist = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=2)
    near_cut = 4.0 * side * math.sqrt(D)
    with np.errstate(all="ignore"):
        K = kernel(np.maximum(dist, 1e-300))
    near = np.argwhere(dist < near_cut)
    for a, b in near:
        if a <= b:
            val = kernel.pair_mean(centers[a], centers[b], side)
            K[a, b] = K[b, a] = val
    return K


def energy(weights: Sequence[float], ds: DiscretizedSet, kernel) -> EnergyResult:
    """Quadratic energy of a cell-weighted probability measure.

    Pair interactions are cell-averaged kernel means (subdivided quadrature
    near the diagonal, closed forms where the kernel admits them); the
    energy is +inf when the kernel is not integrable over a loaded cell.
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (ds.n_cells,):
        raise DomainError("weight vector does not match the discretization")
    if np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-9:
        raise DomainError("weights must be a probability vector")
    K = _interaction_matrix(ds, kernel)
    loaded = w > 0
    if np.any(~np.isfinite(K[np.ix_(loaded, loaded)])):
        return EnergyResult(value=math.inf, finite=False)
    return EnergyResult(value=float(w @ K @ w), finite=True)


def _frank_wolfe(K: np.ndarray, iters: int, gap_rel: float = 1e-5):
    n = K.shape[0]
    w = np.full(n, 1.0 / n)
    Kw = K @ w
    E = float(w @ Kw)
    gap = math.inf
    done = 0
    for it in range(iters):
        j = int(np.argmin(Kw))
        gap = 2.0 * (E - Kw[j])
        done = it + 1
        if gap <= gap_rel * E:
            break
        denom = E - 2.0 * Kw[j] + K[j, j]
        step = 1.0 if denom <= 0 else min(max((E - Kw[j]) / denom, 0.0), 1.0)
        E = (1.0 - step) ** 2 * E + 2.0 * step * (1.0 - step) * Kw[j] + step**2 * K[j, j]
        w *= 1.0 - step
        w[j] += step
        Kw = (1.0 - step) * Kw + step * K[:, j]
        if (it & 255) == 255:
            E = float(w @ Kw)
    return w, E, gap, done


@dataclass
class CapacityReport:
    capacity: float
    energy: float
    gap: float
    iterations: int
    n_cells: int
    resolution: float
    target: str
    kernel: str

    def to_json_dict(self, seed=None) -> dict:
        return {
            "set": self.target,
            "kernel": self.kernel,
            "resolution": self.resolution,
            "iterations": self.iterations,
            "energy": self.energy,
            "gap": self.gap,
            "capacity": self.capacity,
            "seed": seed,
        }


def capacity_estimate(
    target: TargetSet, kernel, resolution: float, iters: int = 20000
) -> CapacityReport:
    """Inverse minimal energy over the probability simplex, by Frank-Wolfe.

    Starts from the uniform weighting, moves mass toward the cell of lowest
    potential each step (exact line search, so the energy never increases),
    and reports the final duality gap.  Degenerate conventions: a kernel
    finite at 0 yields capacity 1; an atomic-only support under a singular
    kernel has infinite energy, hence capacity 0.
    """
    if iters < 1:
        raise ConfigError("need at least one iteration")
    if kernel.value_at_zero < math.inf:
        return CapacityReport(
            capacity=1.0,
            energy=math.nan,
            gap=0.0,
            iterations=0,
            n_cells=0,
            resolution=resolution,
            target=describe_target(target),
            kernel=kernel.describe(),
        )
    ds = discretize(target, resolution)
    K = _interaction_matrix(ds, kernel)
    if not np.all(np.isfinite(K)):
        # no measure with finite energy at this discretization
        return CapacityReport(
            capacity=0.0,
            energy=math.inf,
            gap=0.0,
            iterations=0,
            n_cells=ds.n_cells,
            resolution=resolution,
            target=describe_target(target),
            kernel=kernel.describe(),
        )
    _, E, gap, done = _frank_wolfe(K, iters)
    return CapacityReport(
        capacity=1.0 / E,
        energy=E,
        gap=gap,
        iterations=done,
        n_cells=ds.n_cells,
        resolution=resolution,
        target=describe_target(target),
        kernel=kernel.describe(),
    )


# ---------------------------------------------------------------------------
# covering estimators
# ---------------------------------------------------------------------------


def hausdorff_estimate(target: TargetSet, gauge, eps: float) -> float:
    """Greedy lattice-cover upper proxy for the gauge-Hausdorff measure at scale eps.

    Covers the target by balls of radius eps circumscribing lattice cubes
    and returns N(eps) * g(2 eps).  Returns +inf immediately when the gauge
    diverges at 0 (measure convention) and 0 for an empty target.
    """
    if eps <= 0:
        raise DomainError("scale must be positive")
    if math.isinf(gauge.zero_limit):
        return math.inf
    if target.is_empty:
        return 0.0
    D = target.ambient_dim
    side = 2.0 * eps / math.sqrt(D)
    lo, hi = target.bounding_box()
    first = np.floor(lo / side).astype(int) - 1
    last = np.ceil(hi / side).astype(int) + 1
    shape = last - first + 1
    if np.prod(shape.astype(float)) > 5e7:
        raise DomainError("cover lattice too large at this scale")
    axes = [np.arange(first[j], last[j] + 1) * side + 0.5 * side for j in range(D)]
    grids = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([g.ravel() for g in grids], axis=1)
    occupied = int((target.distance(centers) <= 0.5 * side * math.sqrt(D) + 1e-12).sum())
    return occupied * gauge(2.0 * eps)


class BoxCountFit(NamedTuple):
    slope: float
    stderr: float
    scales: tuple[float, ...]
    counts: tuple[int, ...]


def _occupied_boxes(points: np.ndarray, eps: float) -> int:
    idx = np.floor((points - points.min(axis=0)) / eps).astype(np.int64)
    extents = idx.max(axis=0) + 1
    key = np.zeros(idx.shape[0], dtype=np.int64)
    stride = 1
    for j in range(idx.shape[1]):
        key += idx[:, j] * stride
        stride *= int(extents[j])
        if stride < 0:
            return int(np.unique(idx, axis=0).shape[0])
    return int(np.unique(key).size)


def box_counting_dimension(points: np.ndarray, scales: Sequence[float]) -> BoxCountFit:
    """Log-log slope of occupied-box counts against inverse scale.

    Requires at least 10^3 points and scales spanning >= 1.5 decades; a
    degenerate cloud yields dimension 0 with a warning.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 1000:
        raise ConfigError("need a cloud of at least 1000 points")
    sc = np.asarray(sorted(scales, reverse=True), dtype=float)
    if sc.size < 3 or sc.min() <= 0:
        raise ConfigError("need at least 3 positive scales")
    if sc.max() / sc.min() < 10.0**1.5:
        raise ConfigError("scales must span at least 1.5 decades")
    if np.allclose(pts, pts[0], atol=1e-300):
        warnings.warn("degenerate point cloud: all points coincide", UserWarning)
        return BoxCountFit(0.0, 0.0, tuple(sc), tuple([1] * sc.size))
    counts = np.array([_occupied_boxes(pts, e) for e in sc], dtype=float)
    lx = np.log(1.0 / sc)
    ly = np.log(counts)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    rss = float(res[0]) if len(res) else float(((A @ coef - ly) ** 2).sum())
    dof = max(len(lx) - 2, 1)
    stderr = math.sqrt(rss / dof / float(((lx - lx.mean()) ** 2).sum()))
    return BoxCountFit(float(coef[0]), stderr, tuple(sc), tuple(int(c) for c in counts))


def generalized_dimension_scan(
    points: np.ndarray,
    nu_grid: Sequence[float],
    log_c: float,
    scales: Sequence[float] | None = None,
):
    """Covering-sum behaviour across the scale family tau^nu sqrt(log(C/tau)).

    For each nu, fits the log-log trend of N(eps) * f_nu(2 eps) in 1/eps;
    positive trend means the sums blow up (nu below the transition).
    Reports rows (nu, trend slope) plus the interpolated zero crossing.
    Experimental output only.
    """
    rows: list[tuple[float, float]] = []
    nus = list(nu_grid)
    if not nus:
        return rows, None
    pts = np.asarray(points, dtype=float)
    if scales is None:
        span = float(np.max(pts.max(axis=0) - pts.min(axis=0)))
        scales = np.geomspace(span / 4.0, span / 400.0, 8)
    sc = np.asarray(sorted(scales, reverse=True), dtype=float)
    counts = np.array([_occupied_boxes(pts, e) for e in sc], dtype=float)
    lx = np.log(1.0 / sc)
    for nu in nus:
        gauge = LogPowerGauge(nu, log_c)
        sums = counts * np.array([gauge(2.0 * e) for e in sc])
        slope = float(np.polyfit(lx, np.log(sums), 1)[0])
        rows.append((float(nu), slope))
    transition = None
    for (nu1, s1), (nu2, s2) in zip(rows, rows[1:]):
        if s1 > 0 >= s2 or s1 >= 0 > s2:
            transition = nu1 + (nu2 - nu1) * s1 / (s1 - s2)
            break
    return rows, transition
