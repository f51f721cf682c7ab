"""Configuration-driven command line for reproducible experiments.

One flat key-value config drives one run; every run emits its data files
plus a manifest with the full config echo, seed, version, timestamps and
output digests.  Numeric CSV rows carry the seed and truncation k_max that
produced them.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 64 unknown
command.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, covariance as cov, geometry, hitprob, simulate as sim
from .covariance import ScanRegion, SecondOrderEngine, SpaceTimePoint
from .errors import ConfigError, DomainError, NumericalFailure, ResourceLimit
from .geometry import (
    BallTarget,
    BoxTarget,
    CompositeGauge,
    GaugeReciprocalKernel,
    GaugeSpec,
    PowerGauge,
    RieszKernel,
)
from .hitprob import HitExperiment
from .simulate import SimGrid
from .spectral import Truncation

USAGE = """\
usage: bhheat COMMAND [--config PATH] [--seed N] [--workers N] [--out DIR] [--dry-run]

commands:
  cov             variance table and time/space exponent scan files
  verify-bounds   random-pair envelope ratio scan (EnvelopeReport)
  simulate        exact field sample to a binary container + sidecar
  hitprob         Monte Carlo hitting probability, appended to a CSV ledger
  polarity        shrinking-ball hit scan with gauge-normalized ratios
  capacity        energy-minimization capacity estimate (JSON report)
  hausdorff       lattice-cover gauge-measure scan
  dim             box-counting dimension of the sampled image cloud
  appendix-check  kernel-shift energy ratio table and product-form identity check
"""

# Defaults reproduce the acceptance configuration: d=1, T=1, t0=0.5, J=[1,5].
DEFAULTS = {
    "engine.d": 1,
    "engine.T": 1.0,
    "engine.t0": 0.5,
    "engine.k_max": 0,  # 0: derive from tolerance
    "engine.tol": 0.0,  # 0: per-dimension default
    "engine.log_c": 0.0,  # 0: 4 pi sqrt(d)
    "region.lo": 1.0,
    "region.hi": 5.0,
    "scan.pairs": 2000,
    "scan.seed": 20260801,
    "fit.h_lo": 1e-6,
    "fit.h_hi": 1e-2,
    "fit.points": 9,
    "fit.z_lo": 1e-4,
    "fit.z_hi": 1e-2,
    "sim.copies": 4,
    "sim.n_times": 8,
    "sim.n_sites": 8,
    "sim.seed": 20260801,
    "hit.copies": 2,
    "hit.shape": "ball",
    "hit.radius": 0.1,
    "hit.center": 0.0,
    "hit.n_times": 40,
    "hit.n_sites": 40,
    "hit.replicates": 10000,
    "hit.dilation": -1.0,  # negative: fit from moduli
    "hit.seed": 20260801,
    "polarity.copies": 4,
    "polarity.eps": [0.2, 0.1, 0.05],
    "capacity.gamma": 0.5,
    "capacity.resolution": 0.0025,
    "capacity.iters": 20000,
    "capacity.length": 1.0,
    "hausdorff.exponent": 1.0,
    "hausdorff.eps": [0.1, 0.05, 0.025, 0.0125],
    "hausdorff.side": 1.0,
    "hausdorff.dim": 2,
    "dim.copies": 4,
    "dim.n_times": 8192,
    "dim.n_sites": 384,
    "dim.seed": 20260801,
    "appendix.h_lo": 1e-6,
    "appendix.h_hi": 1.0,
    "appendix.h_n": 13,
    "appendix.vectors": 200,
    "appendix.seed": 20260801,
}


def _parse_value(raw: str):
    raw = raw.strip()
    if "," in raw:
        return [float(tok) for tok in raw.split(",") if tok.strip()]
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            continue
    return raw


def load_config(path: str | None) -> dict:
    """Defaults overlaid with `key = value` lines; anchors errors to lines."""
    cfg = dict(DEFAULTS)
    if path is None:
        return cfg
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            cfg[key] = _parse_value(raw)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return cfg


def validate_config(cfg: dict):
    d = cfg["engine.d"]
    if d not in (1, 2, 3):
        raise ConfigError(
            f"engine.d = {d}: the white-noise field is well-defined only for d in {{1, 2, 3}}"
        )
    if cfg["engine.T"] <= 0:
        raise ConfigError("engine.T must be positive")
    if not 0 < cfg["engine.t0"] <= cfg["engine.T"]:
        raise ConfigError("need 0 < engine.t0 <= engine.T")
    if cfg["engine.tol"] < 0:
        raise ConfigError("engine.tol must be positive (or 0 for the default)")
    if not 0 < cfg["region.lo"] <= cfg["region.hi"] < 2 * math.pi:
        raise ConfigError("region must satisfy 0 < lo <= hi < 2 pi")


def build_engine(cfg: dict) -> SecondOrderEngine:
    d = cfg["engine.d"]
    if cfg["engine.k_max"]:
        tr = Truncation.with_k_max(d, int(cfg["engine.k_max"]))
    elif cfg["engine.tol"]:
        tr = Truncation.for_tolerance(d, cfg["engine.tol"])
    else:
        tr = None
    log_c = cfg["engine.log_c"] or None
    return SecondOrderEngine(d=d, horizon=cfg["engine.T"], tr=tr, log_c=log_c)


def _seed(cfg: dict, key: str, override) -> int:
    return int(override) if override is not None else int(cfg[key])


def _write_csv(path: Path, fieldnames, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _write_json(path: Path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_cov(cfg, opts, out):
    eng = build_engine(cfg)
    seed = _seed(cfg, "scan.seed", opts.seed)
    rng = np.random.default_rng(seed)
    d = eng.d
    rows = []
    for _ in range(12):
        t = float(rng.uniform(cfg["engine.t0"], cfg["engine.T"]))
        x = tuple(rng.uniform(cfg["region.lo"], cfg["region.hi"], size=d))
        rows.append(
            {
                "t": t,
                "x": ";".join(repr(c) for c in x),
                "variance": cov.variance(SpaceTimePoint(t=t, x=x), eng),
                "seed": seed,
                "k_max": eng.tr.k_max,
            }
        )
    table = out / "cov_table.csv"
    _write_csv(table, ["t", "x", "variance", "seed", "k_max"], rows)

    x0 = tuple([cfg["region.lo"]] * d)
    hs = np.geomspace(cfg["fit.h_lo"], cfg["fit.h_hi"], int(cfg["fit.points"]))
    base = SpaceTimePoint(t=cfg["engine.t0"], x=x0)
    tfit_path = out / "time_fit.dat"
    with open(tfit_path, "w") as fh:
        for h in hs:
            val = cov.increment_norm_sq(
                SpaceTimePoint(t=cfg["engine.t0"] + h, x=x0), base, eng
            )
            fh.write(f"{h!r} {val!r}\n")
    zmax = min(cfg["fit.z_hi"], math.pi / (5 * math.sqrt(d)))
    zs = np.geomspace(cfg["fit.z_lo"], zmax, int(cfg["fit.points"]))
    sfit_path = out / "space_fit.dat"
    with open(sfit_path, "w") as fh:
        for z in zs:
            shifted = tuple(c + z / math.sqrt(d) for c in x0)
            val = cov.increment_norm_sq(
                SpaceTimePoint(t=cfg["engine.t0"], x=shifted), base, eng
            )
            fh.write(f"{z!r} {val!r}\n")
    tfit = cov.time_exponent_fit(x0, cfg["engine.t0"], hs, eng)
    summary = {
        "time_slope": tfit.slope,
        "time_slope_stderr": tfit.stderr,
        "seed": seed,
        "k_max": eng.tr.k_max,
    }
    sfit = cov.space_exponent_fit(cfg["engine.t0"], x0, zs, eng)
    if sfit.slope is not None:
        summary["space_slope"] = sfit.slope
        summary["space_slope_stderr"] = sfit.stderr
    else:
        summary["space_ratio_window"] = [list(row) for row in sfit.ratios]
    summary_path = out / "cov_summary.json"
    _write_json(summary_path, summary)
    return [table, tfit_path, sfit_path, summary_path]


def cmd_verify_bounds(cfg, opts, out):
    eng = build_engine(cfg)
    seed = _seed(cfg, "scan.seed", opts.seed)
    region = ScanRegion(
        t0=cfg["engine.t0"],
        t1=cfg["engine.T"],
        lo=tuple([cfg["region.lo"]] * eng.d),
        hi=tuple([cfg["region.hi"]] * eng.d),
    )
    report = cov.ratio_scan(region, int(cfg["scan.pairs"]), eng, seed, workers=opts.workers)
    csv_path = out / "envelope_report.csv"
    report.write_csv(csv_path)
    json_path = out / "envelope_report.json"
    _write_json(json_path, report.to_record())
    return [csv_path, json_path]


def cmd_simulate(cfg, opts, out):
    eng = build_engine(cfg)
    seed = _seed(cfg, "sim.seed", opts.seed)
    grid = SimGrid.regular(
        eng.d,
        cfg["engine.t0"],
        cfg["engine.T"],
        int(cfg["sim.n_times"]),
        tuple([cfg["region.lo"]] * eng.d),
        tuple([cfg["region.hi"]] * eng.d),
        int(cfg["sim.n_sites"]),
    )
    fs = sim.simulate(eng, grid, int(cfg["sim.copies"]), seed)
    path = out / "field.bhhf"
    fs.save(str(path))
    return [path, Path(str(path) + ".json")]


def _hit_experiment(cfg, opts, d) -> tuple[HitExperiment, str]:
    copies = int(cfg["hit.copies"])
    center = cfg["hit.center"]
    center = tuple(center) if isinstance(center, list) else tuple([float(center)] * copies)
    shape = cfg["hit.shape"]
    if shape == "ball":
        target = BallTarget(center=center, radius=cfg["hit.radius"])
    elif shape == "point":
        target = PointTargetFromCenter(center)
    else:
        raise ConfigError(f"hit.shape = {shape!r}: expected 'ball' or 'point'")
    dilation = cfg["hit.dilation"]
    exp = HitExperiment(
        t0=cfg["engine.t0"],
        t1=cfg["engine.T"],
        j_lo=tuple([cfg["region.lo"]] * d),
        j_hi=tuple([cfg["region.hi"]] * d),
        copies=copies,
        target=target,
        n_times=int(cfg["hit.n_times"]),
        n_sites_per_axis=int(cfg["hit.n_sites"]),
        replicates=int(cfg["hit.replicates"]),
        seed=_seed(cfg, "hit.seed", opts.seed),
        dilation=None if dilation < 0 else float(dilation),
    )
    return exp, geometry.describe_target(target)


def PointTargetFromCenter(center):
    return geometry.PointTarget(z=center)


def cmd_hitprob(cfg, opts, out):
    eng = build_engine(cfg)
    exp, target_desc = _hit_experiment(cfg, opts, eng.d)
    t_start = time.perf_counter()
    res = hitprob.estimate_hit_prob(exp, eng)
    wall = time.perf_counter() - t_start
    ledger = out / "hitprob.csv"
    row = {
        "experiment_id": f"hit-{exp.seed}-{exp.copies}",
        "d": eng.d,
        "D": exp.copies,
        "set": target_desc,
        "eps": cfg["hit.radius"] if cfg["hit.shape"] == "ball" else "",
        "estimate": res.estimate,
        "ci": res.ci_halfwidth,
        "dilation": res.dilation,
        "replicates": res.replicates,
        "seed": exp.seed,
        "wall_time_s": round(wall, 3),
    }
    fields = list(row)
    exists = ledger.exists()
    with open(ledger, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        if not exists:
            writer.writeheader()
        writer.writerow(row)
    return [ledger]


def cmd_polarity(cfg, opts, out):
    eng = build_engine(cfg)
    copies = int(cfg["polarity.copies"])
    eps = cfg["polarity.eps"]
    eps = eps if isinstance(eps, list) else [float(eps)]
    base = HitExperiment(
        t0=cfg["engine.t0"],
        t1=cfg["engine.T"],
        j_lo=tuple([cfg["region.lo"]] * eng.d),
        j_hi=tuple([cfg["region.hi"]] * eng.d),
        copies=copies,
        target=geometry.PointTarget(z=tuple([0.0] * copies)),
        n_times=int(cfg["hit.n_times"]),
        n_sites_per_axis=int(cfg["hit.n_sites"]),
        replicates=int(cfg["hit.replicates"]),
        seed=_seed(cfg, "hit.seed", opts.seed),
        dilation=None if cfg["hit.dilation"] < 0 else float(cfg["hit.dilation"]),
    )
    rows = hitprob.polarity_scan([0.0] * copies, eps, base, eng)
    path = out / "polarity.csv"
    _write_csv(
        path,
        ["eps", "estimate", "ci", "normalized", "d", "D", "replicates", "seed", "k_max"],
        [
            {
                "eps": r.eps,
                "estimate": r.estimate,
                "ci": r.ci_halfwidth,
                "normalized": r.normalized,
                "d": eng.d,
                "D": copies,
                "replicates": base.replicates,
                "seed": base.seed,
                "k_max": eng.tr.k_max,
            }
            for r in rows
        ],
    )
    return [path]


def cmd_capacity(cfg, opts, out):
    eng = build_engine(cfg)
    target = BoxTarget(corner=(0.0,), sides=(float(cfg["capacity.length"]),))
    kernel = RieszKernel(float(cfg["capacity.gamma"]))
    report = geometry.capacity_estimate(
        target, kernel, float(cfg["capacity.resolution"]), int(cfg["capacity.iters"])
    )
    path = out / "capacity.json"
    _write_json(path, report.to_json_dict(seed=_seed(cfg, "scan.seed", opts.seed)))
    return [path]


def cmd_hausdorff(cfg, opts, out):
    seed = _seed(cfg, "scan.seed", opts.seed)
    D = int(cfg["hausdorff.dim"])
    target = BoxTarget(corner=tuple([0.0] * D), sides=tuple([float(cfg["hausdorff.side"])] * D))
    gauge = PowerGauge(float(cfg["hausdorff.exponent"]))
    eps = cfg["hausdorff.eps"]
    eps = eps if isinstance(eps, list) else [float(eps)]
    rows = [
        {
            "eps": e,
            "estimate": geometry.hausdorff_estimate(target, gauge, e),
            "seed": seed,
            "k_max": 0,
        }
        for e in eps
    ]
    path = out / "hausdorff.csv"
    _write_csv(path, ["eps", "estimate", "seed", "k_max"], rows)
    json_path = out / "hausdorff.json"
    _write_json(
        json_path,
        {
            "set": geometry.describe_target(target),
            "gauge": gauge.describe(),
            "rows": [[r["eps"], r["estimate"]] for r in rows],
            "seed": seed,
        },
    )
    return [path, json_path]


def cmd_dim(cfg, opts, out):
    eng = build_engine(cfg)
    seed = _seed(cfg, "dim.seed", opts.seed)
    est = hitprob.image_dimension_experiment(
        D=int(cfg["dim.copies"]),
        eng=eng,
        t0=cfg["engine.t0"],
        t1=cfg["engine.T"],
        j_lo=cfg["region.lo"],
        j_hi=cfg["region.hi"],
        n_times=int(cfg["dim.n_times"]),
        n_sites=int(cfg["dim.n_sites"]),
        seed=seed,
    )
    json_path = out / "dim.json"
    _write_json(
        json_path,
        {
            "slope": est.slope,
            "stderr": est.stderr,
            "n_points": est.n_points,
            "critical": float(geometry.critical_dimension(eng.d)),
            "seed": seed,
            "k_max": eng.tr.k_max,
        },
    )
    counts_path = out / "dim_counts.csv"
    _write_csv(
        counts_path,
        ["scale", "count", "seed", "k_max"],
        [
            {"scale": s, "count": c, "seed": seed, "k_max": eng.tr.k_max}
            for s, c in zip(est.scales, est.counts)
        ],
    )
    return [json_path, counts_path]


def cmd_appendix_check(cfg, opts, out):
    eng = build_engine(cfg)
    seed = _seed(cfg, "appendix.seed", opts.seed)
    hs = np.geomspace(cfg["appendix.h_lo"], cfg["appendix.h_hi"], int(cfg["appendix.h_n"]))
    rows = [
        {
            "h": float(h),
            "ratio": cov.green_increment_energy_ratio(float(h), eng),
            "seed": seed,
            "k_max": eng.tr.k_max,
        }
        for h in hs
    ]
    csv_path = out / "appendix.csv"
    _write_csv(csv_path, ["h", "ratio", "seed", "k_max"], rows)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(int(cfg["appendix.vectors"])):
        m = int(rng.integers(1, 6))
        p = rng.uniform(0.0, 1.0, size=m)
        direct = 1.0 - np.prod(1.0 - p)
        worst = max(worst, abs(cov.inclusion_exclusion(p) - direct))
    ratios = [r["ratio"] for r in rows]
    json_path = out / "appendix.json"
    _write_json(
        json_path,
        {
            "ratio_max": max(ratios),
            "ratio_min": min(ratios),
            "product_identity_max_error": worst,
            "seed": seed,
            "k_max": eng.tr.k_max,
        },
    )
    return [csv_path, json_path]


COMMANDS = {
    "cov": cmd_cov,
    "verify-bounds": cmd_verify_bounds,
    "simulate": cmd_simulate,
    "hitprob": cmd_hitprob,
    "polarity": cmd_polarity,
    "capacity": cmd_capacity,
    "hausdorff": cmd_hausdorff,
    "dim": cmd_dim,
    "appendix-check": cmd_appendix_check,
}


class _Opts:
    config = None
    seed = None
    workers = 1
    out = "."
    dry_run = False


def _parse_flags(args) -> _Opts:
    opts = _Opts()
    it = iter(args)
    for arg in it:
        if arg == "--config":
            opts.config = next(it, None)
        elif arg == "--seed":
            opts.seed = int(next(it, "0"))
        elif arg == "--workers":
            opts.workers = int(next(it, "1"))
        elif arg == "--out":
            opts.out = next(it, ".")
        elif arg == "--dry-run":
            opts.dry_run = True
        else:
            raise ConfigError(f"unknown flag {arg!r}")
    return opts


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        sys.stderr.write(USAGE)
        return 64
    if argv[0] in ("-h", "--help"):
        sys.stdout.write(USAGE)
        return 0
    command = argv[0]
    if command not in COMMANDS:
        sys.stderr.write(f"unknown command {command!r}\n{USAGE}")
        return 64
    try:
        opts = _parse_flags(argv[1:])
        cfg = load_config(opts.config)
        validate_config(cfg)
    except (ConfigError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    if opts.dry_run:
        sys.stdout.write("config ok\n")
        return 0
    out = Path(opts.out)
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()
    try:
        outputs = COMMANDS[command](cfg, opts, out)
    except (ConfigError, DomainError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except (NumericalFailure, ResourceLimit) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 2
    finished = datetime.now(timezone.utc).isoformat()
    manifest = {
        "command": command,
        "config": {k: cfg[k] for k in sorted(cfg)},
        "seed": opts.seed,
        "code_version": __version__,
        "started_utc": started,
        "finished_utc": finished,
        "outputs": {p.name: _sha256(p) for p in outputs},
    }
    _write_json(out / "manifest.json", manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
