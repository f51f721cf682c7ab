"""Monte Carlo hitting probabilities and dimension experiments for the D-copy field.

A replicate is a fresh D-copy field sample on a space-time grid over
[t0, T] x J; the target is hit when some grid point's copy vector comes
within ``dilation`` of the set.  The dilation compensates for motion between
grid points: eta = L (dt^eta1 + dx^eta2) with the path-regularity exponents
taken at 80% of their suprema, eta1 = 0.8 (4-d)/8 and eta2 = 0.8 (1 ^ (4-d)/2),
and L fitted from simulated increment moduli.

Replicates are processed in fixed-size chunks with per-chunk counter-based
substreams, so estimates are deterministic given the master seed and do not
depend on worker scheduling.  A polarity scan reuses one set of replicates
for its whole radius grid (equivalent to same-seed runs per radius, since the
hit indicator only needs each replicate's minimal distance to the centre).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import geometry, simulate as sim
from .covariance import SecondOrderEngine
from .errors import ConfigError, DomainError
from .geometry import GaugeSpec, PointTarget, TargetSet, box_counting_dimension
from .simulate import FieldSample, SimGrid

_CHUNK = 128  # replicates per simulation batch; fixed for determinism
_WILSON_Z = 1.959963984540054  # two-sided 95%


def holder_exponents(d: int) -> tuple[float, float]:
    """Dilation exponents: 80% of the path-regularity suprema in time and space."""
    return 0.8 * (4 - d) / 8.0, 0.8 * min(1.0, (4 - d) / 2.0)


@dataclass(frozen=True)
class HitExperiment:
    """One hitting-probability configuration on [t0, t1] x prod_j [lo_j, hi_j]."""

    t0: float
    t1: float
    j_lo: tuple[float, ...]
    j_hi: tuple[float, ...]
    copies: int
    target: TargetSet
    n_times: int
    n_sites_per_axis: int
    replicates: int
    seed: int
    dilation: float | None = None  # None: fitted from simulated moduli

    def __post_init__(self):
        if self.t0 <= 0 or self.t1 < self.t0:
            raise ConfigError("need 0 < t0 <= t1")
        if self.copies < 1:
            raise ConfigError("need at least one copy")
        if self.dilation is not None and self.dilation < 0:
            raise ConfigError("dilation must be nonnegative")

    def grid(self, d: int) -> SimGrid:
        return SimGrid.regular(
            d, self.t0, self.t1, self.n_times, self.j_lo, self.j_hi, self.n_sites_per_axis
        )


@dataclass(frozen=True)
class HitResult:
    estimate: float
    ci_halfwidth: float
    hits: int
    replicates: int
    dilation: float


def wilson_halfwidth(hits: int, n: int) -> float:
    z = _WILSON_Z
    p = hits / n
    denom = 1.0 + z * z / n
    return z * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom


def hit_indicator(sample: FieldSample, target: TargetSet, dilation: float) -> bool:
    """True when some grid point's copy vector lies within ``dilation`` of the target."""
    if target.is_empty:
        return False
    if sample.copies != target.ambient_dim:
        raise DomainError(
            f"sample has {sample.copies} copies but the target lives in "
            f"R^{target.ambient_dim}"
        )
    pts = np.moveaxis(sample.values, 0, -1).reshape(-1, sample.copies)
    return bool(target.distance(pts).min() <= dilation)


def _chunk_seed(seed: int, chunk: int) -> int:
    # chunk 0 is reserved for the dilation pilot; replicate chunks start at 1
    return int(np.random.SeedSequence(entropy=(seed, chunk)).generate_state(1, np.uint64)[0])


def fit_dilation(
    exp: HitExperiment,
    eng: SecondOrderEngine,
    probes: int = 8,
    quantile: float = 0.75,
) -> float:
    """Compensator eta = L (dt^eta1 + dx^eta2) with L from simulated moduli.

    L is a quantile of the adjacent-grid increments of ``probes`` pilot
    copies, normalized by the grid-spacing power and maximized over
    directions.  The default quantile tracks the typical within-cell
    oscillation around the path's minimizer; the global maximum would be a
    far coarser (and much larger) bound.
    """
    grid = exp.grid(eng.d)
    eta1, eta2 = holder_exponents(eng.d)
    dt = grid.times[1] - grid.times[0] if grid.n_times > 1 else 0.0
    sites = np.asarray(grid.sites)
    pilot = sim.simulate(eng, grid, probes, _chunk_seed(exp.seed, 0))
    ratios = [1e-12]
    dx = 0.0
    if grid.n_times > 1 and dt > 0:
        m_t = float(np.quantile(np.abs(np.diff(pilot.values, axis=1)), quantile))
        ratios.append(m_t / dt**eta1)
    if eng.d == 1 and grid.n_sites > 1:
        order = np.argsort(sites[:, 0])
        dx = float(np.diff(sites[order, 0]).max())
        m_x = float(np.quantile(np.abs(np.diff(pilot.values[:, :, order], axis=2)), quantile))
        if dx > 0:
            ratios.append(m_x / dx**eta2)
    L = max(ratios)
    return L * (dt**eta1 + (dx**eta2 if dx > 0 else 0.0))


def _min_distances(exp: HitExperiment, eng: SecondOrderEngine, target: TargetSet) -> np.ndarray:
    """Per-replicate minimal distance of the copy vector path to the target."""
    grid = exp.grid(eng.d)
    D = exp.copies
    out = np.empty(exp.replicates)
    done = 0
    chunk_idx = 1
    while done < exp.replicates:
        n_rep = min(_CHUNK, exp.replicates - done)
        fs = sim.simulate(eng, grid, n_rep * D, _chunk_seed(exp.seed, chunk_idx))
        vals = fs.values.reshape(n_rep, D, grid.n_times, grid.n_sites)
        pts = np.moveaxis(vals, 1, -1).reshape(n_rep, -1, D)
        out[done : done + n_rep] = target.distance(pts).min(axis=1)
        done += n_rep
        chunk_idx += 1
    return out


def estimate_hit_prob(exp: HitExperiment, eng: SecondOrderEngine) -> HitResult:
    """Monte Carlo hit frequency with a 95% Wilson interval.

    Empty targets short-circuit to zero; otherwise each replicate contributes
    the indicator that its minimal distance to the target is at most the
    dilation.
    """
    if exp.replicates < 100:
        raise ConfigError("need at least 100 replicates")
    dilation = exp.dilation if exp.dilation is not None else fit_dilation(exp, eng)
    if exp.target.is_empty:
        return HitResult(0.0, wilson_halfwidth(0, exp.replicates), 0, exp.replicates, dilation)
    if exp.target.ambient_dim != exp.copies:
        raise DomainError("target ambient dimension must equal the copy count")
    dists = _min_distances(exp, eng, exp.target)
    hits = int((dists <= dilation).sum())
    return HitResult(
        estimate=hits / exp.replicates,
        ci_halfwidth=wilson_halfwidth(hits, exp.replicates),
        hits=hits,
        replicates=exp.replicates,
        dilation=dilation,
    )


@dataclass(frozen=True)
class PolarityRow:
    eps: float
    estimate: float
    ci_halfwidth: float
    normalized: float  # estimate / gbar(2 eps)


def polarity_scan(
    z: Sequence[float],
    eps_grid: Sequence[float],
    base: HitExperiment,
    eng: SecondOrderEngine,
) -> list[PolarityRow]:
    """Hit estimates for shrinking balls around z, normalized by the composite gauge.

    One replicate set serves all radii (same-seed coupling), so the
    normalized column is monotonicity-consistent by construction.  Above the
    critical copy count the normalized ratios stay bounded; below it the raw
    estimates stay bounded away from zero.
    """
    eps = list(eps_grid)
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("radius grid must be strictly decreasing")
    if len(z) != base.copies:
        raise DomainError("centre dimension must equal the copy count")
    if base.replicates < 100:
        raise ConfigError("need at least 100 replicates")
    dilation = base.dilation if base.dilation is not None else fit_dilation(base, eng)
    dists = _min_distances(base, eng, PointTarget(z=tuple(z)))
    gauge = GaugeSpec(d=eng.d, D=base.copies, log_c=eng.log_c)
    rows = []
    for e in eps:
        hits = int((dists <= e + dilation).sum())
        est = hits / base.replicates
        rows.append(
            PolarityRow(
                eps=float(e),
                estimate=est,
                ci_halfwidth=wilson_halfwidth(hits, base.replicates),
                normalized=est / gauge.composite(2.0 * e),
            )
        )
    return rows


@dataclass(frozen=True)
class DimensionEstimate:
    slope: float
    stderr: float
    n_points: int
    scales: tuple[float, ...]
    counts: tuple[int, ...]


def image_dimension_experiment(
    D: int,
    eng: SecondOrderEngine,
    t0: float = 0.5,
    t1: float = 1.0,
    j_lo: float = 1.0,
    j_hi: float = 5.0,
    n_times: int = 8192,
    n_sites: int = 384,
    seed: int = 0,
    scales: Sequence[float] | None = None,
) -> DimensionEstimate:
    """Box-counting dimension of the sampled image cloud V(grid) in R^D.

    Valid in the supercritical regime D > D0 where the image dimension
    equals the critical copy count; desk scale restricts the experiment to
    d = 1.
    """
    if eng.d != 1:
        raise DomainError("image-dimension experiment is desk-scale only for d = 1")
    d0 = float(geometry.critical_dimension(eng.d))
    if D <= d0:
        raise DomainError(f"need D > D0 = {d0:g}; got D = {D}")
    grid = SimGrid.regular(1, t0, t1, n_times, (j_lo,), (j_hi,), n_sites)
    fs = sim.simulate(eng, grid, D, seed)
    cloud = np.moveaxis(fs.values, 0, -1).reshape(-1, D)
    if cloud.shape[0] < 1000 or np.allclose(cloud, cloud[0], atol=1e-300):
        warnings.warn("degenerate image cloud: dimension reported as 0", UserWarning)
        return DimensionEstimate(0.0, 0.0, cloud.shape[0], (), ())
    if scales is None:
        span = float(np.max(cloud.max(axis=0) - cloud.min(axis=0)))
        scales = np.geomspace(span / 2.0, span / 2.0 / 10**1.6, 12)
    fit = box_counting_dimension(cloud, scales)
    return DimensionEstimate(
        slope=fit.slope,
        stderr=fit.stderr,
        n_points=cloud.shape[0],
        scales=fit.scales,
        counts=fit.counts,
    )


def refine(exp: HitExperiment, factor: int = 2) -> HitExperiment:
    """Same experiment on a grid refined by ``factor`` (dilation refitted)."""
    return replace(
        exp,
        n_times=exp.n_times * factor,
        n_sites_per_axis=exp.n_sites_per_axis * factor,
        dilation=None,
    )


def fit_order_constants(rows: Sequence[tuple[HitResult, float, float]]):
    """Empirical stand-ins (c, C) for the capacity/Hausdorff sandwich.

    Chooses the largest c with c * capacity <= estimate + ci and the smallest
    C with estimate - ci <= C * hausdorff over the given configurations.
    These are consistency-harness constants, not canonical ones.
    """
    cs, Cs = [], []
    for res, cap_value, haus_value in rows:
        if cap_value > 0:
            cs.append((res.estimate + res.ci_halfwidth) / cap_value)
        if haus_value > 0 and math.isfinite(haus_value):
            Cs.append(max(res.estimate - res.ci_halfwidth, 0.0) / haus_value)
    c = min(cs) if cs else math.inf
    C = max(Cs) if Cs else 0.0
    return c, C
