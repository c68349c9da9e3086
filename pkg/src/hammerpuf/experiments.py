"""Replication experiments and the calibration harness.

Each ``run_*`` function returns an :class:`ExperimentReport`. Reports embed
the model parameters and every seed that was used, and all pass/fail checks
come from the targets file, never from constants in this module.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import itertools
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .dram import (
    FORMAT_VERSION,
    MASK64,
    DramDevice,
    Geometry,
    ModelParams,
    derive_device,
    splitmix64,
)
from .engine import PufConfig, simulate_decay_only, simulate_query
from .errors import ConfigurationError, FormatError
from .metrics import (
    entropy_bits,
    extract_flip_set,
    j_inter,
    j_intra,
    jaccard,
    key_material_size,
)
from .pattern import DSRH, SSRH, build_row_pattern

log = logging.getLogger(__name__)

IVS = (0x00, 0x55, 0xAA, 0xFF)
KB = 1024
MIN_PUF_SIZE = 4 * KB
FULL_CONFIG = PufConfig()


def derive_seed(master_seed: int, *parts) -> int:
    """Deterministic 64-bit sub-seed for a labelled job."""
    h = splitmix64(master_seed & MASK64)
    for part in parts:
        if isinstance(part, str):
            part = int.from_bytes(hashlib.sha256(part.encode()).digest()[:8], "little")
        h = splitmix64(h ^ (int(part) & MASK64))
    return h


# -- targets ----------------------------------------------------------------

@dataclass(frozen=True)
class Target:
    id: str
    description: str
    value: float | None
    low: float | None
    high: float | None
    weight: float = 0.0
    acceptance: bool = False
    error: str = "log"

    def passes(self, measured: float) -> bool:
        if measured is None or (isinstance(measured, float) and math.isnan(measured)):
            return False
        if self.low is not None and measured < self.low:
            return False
        if self.high is not None and measured > self.high:
            return False
        return True

    def residual(self, measured: float) -> float:
        """Signed error used by calibration."""
        if self.value is None:
            return 0.0
        if self.error == "complement":
            return math.log(max(1.0 - measured, 1e-9) / (1.0 - self.value))
        if self.error == "absolute":
            return measured - self.value
        return math.log(max(measured, 1e-12) / self.value)


def load_targets(path=None) -> dict[str, Target]:
    if path is None:
        text = (resources.files("hammerpuf") / "data" / "targets.json").read_text()
    else:
        text = Path(path).read_text()
    data = json.loads(text)
    if data.get("format_version") != FORMAT_VERSION:
        raise FormatError("unsupported targets format_version")
    return {t["id"]: Target(**t) for t in data["targets"]}


# -- reports ----------------------------------------------------------------

@dataclass
class ExperimentReport:
    experiment_id: str
    grid: dict
    results: list[dict]
    model_params: dict
    seeds: dict
    checks: list[dict] = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    runtime: dict = field(default_factory=dict)
    pairs: tuple = field(default=(), repr=False)

    def check(self, target: Target, measured) -> bool:
        ok = target.passes(measured)
        self.checks.append({
            "target": target.id,
            "description": target.description,
            "measured": measured,
            "reference_value": target.value,
            "low": target.low,
            "high": target.high,
            "passed": ok,
        })
        return ok

    def add_check(self, name: str, passed: bool, measured=None, description: str = ""):
        self.checks.append({"target": name, "description": description,
                            "measured": measured, "passed": bool(passed)})

    def lookup(self, name: str) -> dict:
        for c in self.checks:
            if c["target"] == name:
                return c
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def content(self) -> dict:
        """Report body without wall-clock metadata."""
        return {
            "format_version": FORMAT_VERSION,
            "experiment_id": self.experiment_id,
            "grid": self.grid,
            "seeds": self.seeds,
            "model_params": self.model_params,
            "results": self.results,
            "checks": self.checks,
            "extra": self.extra,
        }

    def to_json(self, include_runtime: bool = True) -> str:
        body = self.content()
        if include_runtime:
            body["runtime"] = self.runtime
        return json.dumps(_plain(body), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        if not self.results:
            return ""
        keys = list(self.results[0].keys())
        writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        for row in self.results:
            writer.writerow({k: _csv_value(row.get(k)) for k in keys})
        return buf.getvalue()


def _csv_value(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return v


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _timed(report: ExperimentReport, start: float) -> ExperimentReport:
    report.runtime = {"wall_seconds": round(time.perf_counter() - start, 3)}
    return report


def _map(fn, jobs, workers: int):
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _measure(device, config, seeds, decay_only=False, workers=1):
    sim = simulate_decay_only if decay_only else simulate_query
    return _map(lambda s: sim(device, config, s), seeds, workers)


def _flip_stats(ms) -> dict:
    counts = [m.flip_count for m in ms]
    return {"mean_flips": float(np.mean(counts)), "min_flips": int(min(counts)),
            "max_flips": int(max(counts))}


def scaled(config: PufConfig, repetitions: int, scale: float) -> tuple[PufConfig, int]:
    """Shrink PUF size (never below 4 KB) and repetitions for quick runs."""
    if not 0 < scale <= 1:
        raise ConfigurationError("scale must lie in (0, 1]")
    if scale == 1:
        return config, repetitions
    size = max(MIN_PUF_SIZE, int(config.puf_size * scale) // MIN_PUF_SIZE * MIN_PUF_SIZE)
    return config.replace(puf_size=size), max(2, round(repetitions * scale))


def _seeds(master_seed, label, n):
    return [derive_seed(master_seed, label, i) for i in range(n)]


# -- experiments --------------------------------------------------------------

def run_iv_matrix(device: DramDevice, base_config: PufConfig = FULL_CONFIG,
                  repetitions: int = 20, master_seed: int = 0,
                  rh_types=(SSRH, DSRH), targets=None, workers: int = 1) -> ExperimentReport:
    """Mean flips for every (hammer IV, PUF IV) pair, for each RH type."""
    if repetitions < 1:
        raise ConfigurationError("repetitions must be >= 1")
    start = time.perf_counter()
    targets = targets or load_targets()
    seeds = _seeds(master_seed, "iv-matrix", repetitions)
    jobs = list(itertools.product(rh_types, IVS, IVS))

    def cell(job):
        rh_type, puf_iv, hammer_iv = job
        cfg = base_config.replace(rh_type=rh_type, puf_row_iv=puf_iv, hammer_row_iv=hammer_iv)
        stats = _flip_stats(_measure(device, cfg, seeds))
        return {"rh_type": rh_type, "puf_row_iv": f"0x{puf_iv:02X}",
                "hammer_row_iv": f"0x{hammer_iv:02X}", **stats}

    results = _map(cell, jobs, workers)
    report = ExperimentReport(
        "iv-matrix",
        {"rh_types": list(rh_types), "ivs": [f"0x{v:02X}" for v in IVS],
         "config": base_config.to_dict(), "repetitions": repetitions},
        results, device.model_params.to_dict(),
        {"master_seed": master_seed, "device_seed": device.device_seed,
         "measurement_seeds": seeds})

    for rh_type in rh_types:
        grid = {(r["puf_row_iv"], r["hammer_row_iv"]): r["mean_flips"]
                for r in results if r["rh_type"] == rh_type}
        zero_row = all(grid[("0x55", f"0x{h:02X}")] == 0 for h in IVS)
        report.add_check(f"{rh_type}:zero_row_puf_0x55", zero_row,
                         description="PUF IV 0x55 yields no flips for every hammer IV")
        best = max(grid, key=grid.get)
        report.add_check(f"{rh_type}:max_cell", best == ("0xAA", "0x55"),
                         measured=f"puf {best[0]} / hammer {best[1]}",
                         description="largest mean at hammer 0x55, PUF 0xAA")
        row = {h: grid[("0xAA", h)] for h in ("0x00", "0x55", "0xAA", "0xFF")}
        ordered = (row["0x55"] > row["0xFF"] and row["0x55"] > row["0x00"]
                   and row["0x00"] > row["0xAA"] and row["0xFF"] > row["0xAA"])
        report.add_check(f"{rh_type}:ordering_puf_0xAA", ordered, measured=row,
                         description="0x55 > 0xFF, 0x00 > 0xAA for PUF IV 0xAA")
    if SSRH in rh_types and base_config.puf_size == 128 * KB and base_config.rh_time == 120:
        reference_cell = next(r for r in results if r["rh_type"] == SSRH
                          and r["puf_row_iv"] == "0xAA" and r["hammer_row_iv"] == "0x55")
        report.check(targets["flips_ssrh_128k_120s"], reference_cell["mean_flips"])
    return _timed(report, start)


def run_temperature_sweep(device: DramDevice, config: PufConfig = FULL_CONFIG,
                          temps=(40.0, 50.0, 60.0), repetitions: int = 20,
                          master_seed: int = 0, targets=None,
                          workers: int = 1) -> ExperimentReport:
    """Mean flips and minimum J_intra at each temperature."""
    start = time.perf_counter()
    targets = targets or load_targets()
    seeds = _seeds(master_seed, "temperature", repetitions)

    def cell(t):
        ms = _measure(device, config.replace(temperature_C=float(t)), seeds)
        row = {"temperature_C": float(t), **_flip_stats(ms)}
        if len(ms) >= 2:
            stats = j_intra(ms)
            row.update(min_jintra=stats.min, mean_jintra=stats.mean)
        return row

    results = _map(cell, list(temps), workers)
    report = ExperimentReport(
        "temperature", {"temps": list(temps), "config": config.to_dict(),
                        "repetitions": repetitions},
        results, device.model_params.to_dict(),
        {"master_seed": master_seed, "device_seed": device.device_seed,
         "measurement_seeds": seeds})
    by_t = {r["temperature_C"]: r for r in results}
    if 40.0 in by_t and 50.0 in by_t:
        report.check(targets["temp_ratio_50_40"],
                     by_t[50.0]["mean_flips"] / by_t[40.0]["mean_flips"])
    if 50.0 in by_t and 60.0 in by_t:
        report.check(targets["temp_ratio_60_50"],
                     by_t[60.0]["mean_flips"] / by_t[50.0]["mean_flips"])
    if all("min_jintra" in r for r in results):
        report.check(targets["min_jintra_temperature"], min(r["min_jintra"] for r in results))
    return _timed(report, start)


def run_rh_type_comparison(device: DramDevice, sizes=(4 * KB, 32 * KB, 128 * KB),
                           times=(60.0, 120.0), repetitions: int = 20,
                           base_config: PufConfig = FULL_CONFIG, master_seed: int = 0,
                           targets=None, workers: int = 1) -> ExperimentReport:
    """Fractional flips per (size, time, RH type) and the DSRH uplift."""
    start = time.perf_counter()
    targets = targets or load_targets()
    seeds = _seeds(master_seed, "rh-type", repetitions)
    jobs = list(itertools.product(sizes, times, (SSRH, DSRH)))

    def cell(job):
        size, t, rh_type = job
        cfg = base_config.replace(puf_size=int(size), rh_time=float(t), rh_type=rh_type)
        stats = _flip_stats(_measure(device, cfg, seeds))
        pattern = build_row_pattern(rh_type, int(size), device.geometry, cfg.puf_address)
        return {"puf_size": int(size), "rh_time": float(t), "rh_type": rh_type,
                "hammer_rows": len(pattern.hammer_rows),
                "fractional_flips_pct": 100.0 * stats["mean_flips"] / (size * 8), **stats}

    results = _map(cell, jobs, workers)
    report = ExperimentReport(
        "rh-type", {"sizes": list(sizes), "times": list(times),
                    "config": base_config.to_dict(), "repetitions": repetitions},
        results, device.model_params.to_dict(),
        {"master_seed": master_seed, "device_seed": device.device_seed,
         "measurement_seeds": seeds})

    flips = {(r["puf_size"], r["rh_time"], r["rh_type"]): r["mean_flips"] for r in results}
    frac = {k: v / (k[0] * 8) for k, v in flips.items()}
    uplift = {}
    for size, t in itertools.product(sizes, times):
        uplift[f"{size // KB}KB/{t:g}s"] = flips[(size, t, DSRH)] / flips[(size, t, SSRH)] - 1
    report.extra["dsrh_uplift"] = uplift

    largest = max(sizes)
    if 120.0 in times:
        report.check(targets["dsrh_uplift_120s"], uplift[f"{largest // KB}KB/120s"])
    if 60.0 in times:
        report.check(targets["dsrh_uplift_60s"], uplift[f"{largest // KB}KB/60s"])
    if 60.0 in times and 120.0 in times:
        report.check(targets["ratio_120s_60s"],
                     flips[(largest, 120.0, SSRH)] / flips[(largest, 60.0, SSRH)])
    if len(sizes) > 1:
        spread = {}
        for t, rh_type in itertools.product(times, (SSRH, DSRH)):
            vals = [frac[(s, t, rh_type)] for s in sizes]
            spread[f"{rh_type}/{t:g}s"] = (max(vals) - min(vals)) / float(np.mean(vals))
        report.extra["size_spread"] = spread
        report.check(targets["size_spread"], max(spread.values()))
    pat = {rh: build_row_pattern(rh, largest, device.geometry) for rh in (SSRH, DSRH)}
    report.extra["memory"] = {
        "hammer_rows": {rh: len(p.hammer_rows) for rh, p in pat.items()},
        "hammer_row_saving": 1 - len(pat[SSRH].hammer_rows) / len(pat[DSRH].hammer_rows),
        "footprint_saving": 1 - pat[SSRH].footprint_bytes / pat[DSRH].footprint_bytes,
    }
    return _timed(report, start)


def run_decay_comparison(device: DramDevice, config: PufConfig = FULL_CONFIG,
                         repetitions: int = 20, times=(60.0, 120.0), master_seed: int = 0,
                         targets=None, workers: int = 1) -> ExperimentReport:
    """Hammer versus decay-only flips, counts and overlap."""
    start = time.perf_counter()
    targets = targets or load_targets()
    seeds = _seeds(master_seed, "decay", repetitions)

    def cell(t):
        cfg = config.replace(rh_time=float(t))
        hammer = _measure(device, cfg, seeds)
        decay = _measure(device, cfg, seeds, decay_only=True)
        overlap = [jaccard(extract_flip_set(h), extract_flip_set(d))
                   for h, d in zip(hammer, decay)]
        h, d = _flip_stats(hammer), _flip_stats(decay)
        return {"rh_time": float(t), "hammer_mean_flips": h["mean_flips"],
                "decay_mean_flips": d["mean_flips"],
                "ratio": h["mean_flips"] / d["mean_flips"] if d["mean_flips"] else math.inf,
                "jaccard_hammer_decay": float(np.mean(overlap))}

    results = _map(cell, list(times), workers)
    report = ExperimentReport(
        "decay", {"times": list(times), "config": config.to_dict(),
                  "repetitions": repetitions},
        results, device.model_params.to_dict(),
        {"master_seed": master_seed, "device_seed": device.device_seed,
         "measurement_seeds": seeds})
    by_t = {r["rh_time"]: r for r in results}
    if 60.0 in by_t:
        report.check(targets["hammer_decay_ratio_60s"], by_t[60.0]["ratio"])
    if 120.0 in by_t:
        report.check(targets["hammer_decay_ratio_120s"], by_t[120.0]["ratio"])
    report.check(targets["jaccard_hammer_decay"],
                 max(r["jaccard_hammer_decay"] for r in results))
    return _timed(report, start)


def run_uniqueness(device_seeds, config: PufConfig = FULL_CONFIG, repetitions: int = 20,
                   geometry: Geometry | None = None, params: ModelParams | None = None,
                   master_seed: int = 0, targets=None, workers: int = 1,
                   key_bits: int = 128) -> ExperimentReport:
    """J_intra / J_inter histograms over several devices, plus entropy sizing."""
    device_seeds = list(device_seeds)
    if len(device_seeds) < 3:
        raise ConfigurationError("run_uniqueness needs at least three devices")
    start = time.perf_counter()
    targets = targets or load_targets()
    devices = [derive_device(s, geometry, params) for s in device_seeds]
    seeds = {d.device_seed: _seeds(master_seed, f"uniqueness/{d.device_seed}", repetitions)
             for d in devices}
    groups = _map(lambda d: _measure(d, config, seeds[d.device_seed]), devices, workers)

    intra = [j_intra(g) for g in groups]
    inter = j_inter(groups)
    all_intra = [v for s in intra for v in s.values]
    min_intra = min(all_intra)
    results = [{"device_id": d.device_id, "device_seed": d.device_seed,
                "min_jintra": s.min, "mean_jintra": s.mean, "max_jintra": s.max,
                **_flip_stats(g)}
               for d, s, g in zip(devices, intra, groups)]
    k = min(r["min_flips"] for r in results)
    n = config.puf_size * 8
    h, frac = entropy_bits(n, k)

    report = ExperimentReport(
        "uniqueness", {"device_seeds": device_seeds, "config": config.to_dict(),
                       "repetitions": repetitions},
        results, devices[0].model_params.to_dict(),
        {"master_seed": master_seed, "measurement_seeds": {str(k_): v for k_, v in seeds.items()}})
    intra_all = dataclasses.replace(intra[0], values=all_intra,
                                    labels=[lab for s in intra for lab in s.labels])
    report.extra = {
        "j_intra": intra_all.summary(),
        "j_inter": inter.summary(),
        "separated": inter.max < min_intra,
        "entropy": {"n": n, "k": k, "bits": h, "fractional": frac,
                    "key_bits": key_bits,
                    "key_material_bytes": key_material_size(key_bits, frac) if frac > 0 else None},
    }
    report.pairs = (intra_all, inter)
    report.check(targets["min_jintra"], min_intra)
    report.add_check("separation", inter.max < min_intra,
                     measured={"max_jinter": inter.max, "min_jintra": min_intra},
                     description="max J_inter < min J_intra")
    return _timed(report, start)


# -- calibration ----------------------------------------------------------------

CALIBRATION_KNOBS = (
    # name, step, lower, upper
    ("retention_log_mean", 0.2, 0.0, 20.0),
    ("retention_log_sd", 0.1, 0.05, 5.0),
    ("susceptibility_log_mean", 0.2, -40.0, 0.0),
    ("susceptibility_log_sd", 0.1, 0.0, 5.0),
    ("susceptible_fraction", 0.004, 0.0, 1.0),
    ("temp_doubling_degC", 1.0, 3.0, 40.0),
)


def calibration_metrics(params: ModelParams, device_seed: int = 1, puf_size: int = 128 * KB,
                        jintra_reps: int = 0, master_seed: int = 0) -> dict:
    """Simulated values for every calibration target under ``params``."""
    device = derive_device(device_seed, Geometry(), params)
    base = FULL_CONFIG.replace(puf_size=puf_size)
    seed = derive_seed(master_seed, "calibrate")

    def flips(cfg, decay=False):
        sim = simulate_decay_only if decay else simulate_query
        return sim(device, cfg, seed).flip_count

    f120 = flips(base)
    f60 = flips(base.replace(rh_time=60.0))
    d120 = flips(base, decay=True)
    d60 = flips(base.replace(rh_time=60.0), decay=True)
    ds120 = flips(base.replace(rh_type=DSRH))
    ds60 = flips(base.replace(rh_type=DSRH, rh_time=60.0))
    t50 = flips(base.replace(temperature_C=50.0))
    t60 = flips(base.replace(temperature_C=60.0))
    faa = flips(base.replace(hammer_row_iv=0xAA))
    fracs = [flips(base.replace(puf_size=s)) / (s * 8)
             for s in (4 * KB, 32 * KB) if s < puf_size] + [f120 / (puf_size * 8)]
    scale = 128 * KB / puf_size
    out = {
        "flips_ssrh_128k_120s": f120 * scale,
        "flips_hammer_aa": faa * scale,
        "ratio_120s_60s": f120 / max(f60, 1),
        "hammer_decay_ratio_60s": f60 / max(d60, 1),
        "hammer_decay_ratio_120s": f120 / max(d120, 1),
        "dsrh_uplift_120s": ds120 / max(f120, 1) - 1,
        "dsrh_uplift_60s": ds60 / max(f60, 1) - 1,
        "temp_ratio_50_40": t50 / max(f120, 1),
        "temp_ratio_60_50": t60 / max(t50, 1),
        "size_spread": (max(fracs) - min(fracs)) / float(np.mean(fracs)) if len(fracs) > 1 else 0.0,
    }
    if jintra_reps >= 2:
        ms = [simulate_query(device, base, derive_seed(master_seed, "calibrate-jintra", i))
              for i in range(jintra_reps)]
        out["min_jintra"] = j_intra(ms).min
    return out


def _objective(metrics: dict, targets: dict[str, Target]) -> float:
    total = 0.0
    for tid, value in metrics.items():
        t = targets.get(tid)
        if t is None or not t.weight or t.value is None:
            continue
        total += t.weight * t.residual(value) ** 2
    return total


@dataclass
class CalibrationResult:
    params: ModelParams
    objective: float
    metrics: dict
    evaluations: int
    converged: bool
    residuals: dict

    def report(self, targets: dict[str, Target]) -> ExperimentReport:
        rep = ExperimentReport(
            "calibrate", {"knobs": [k[0] for k in CALIBRATION_KNOBS]},
            [{"target": tid, "simulated": v,
              "reference_value": targets[tid].value if tid in targets else None,
              "residual": self.residuals.get(tid)} for tid, v in self.metrics.items()],
            self.params.to_dict(), {},
            extra={"objective": self.objective, "evaluations": self.evaluations,
                   "converged": self.converged})
        for tid, v in self.metrics.items():
            if tid in targets and (targets[tid].low is not None or targets[tid].high is not None):
                rep.check(targets[tid], v)
        return rep

    def calibration_file(self) -> str:
        return json.dumps({"format_version": FORMAT_VERSION,
                           "model_params": self.params.to_dict()}, indent=2, sort_keys=True)


def calibrate(targets: dict[str, Target] | None = None, start: ModelParams | None = None,
              search_budget: int = 150, jintra_reps: int = 20, puf_size: int = 128 * KB,
              device_seed: int = 1, master_seed: int = 0,
              knobs=CALIBRATION_KNOBS) -> CalibrationResult:
    """Fit model parameters to the declared targets.

    Coordinate descent over ``knobs`` (step halving) for the count and ratio
    targets, followed by a bisection on the measurement noise for the
    minimum J_intra target. Running out of budget returns the best point so
    far with ``converged=False``.
    """
    targets = targets or load_targets()
    params = start or ModelParams.default()
    evaluations = 0

    def evaluate(p):
        nonlocal evaluations
        evaluations += 1
        return _objective(calibration_metrics(p, device_seed, puf_size,
                                              master_seed=master_seed), targets)

    best = evaluate(params)
    steps = {name: step for name, step, _, _ in knobs}
    converged = False
    while evaluations < search_budget:
        improved = False
        for name, _, lo, hi in knobs:
            for direction in (1, -1):
                if evaluations >= search_budget:
                    break
                value = min(max(getattr(params, name) + direction * steps[name], lo), hi)
                if value == getattr(params, name):
                    continue
                cand = params.replace(**{name: value})
                score = evaluate(cand)
                if score < best:
                    best, params, improved = score, cand, True
                    break
        if not improved:
            for name in steps:
                steps[name] /= 2
            if all(steps[n] < 1e-3 * max(abs(s), 1e-3) for n, s, _, _ in knobs):
                converged = True
                break
        log.info("calibrate: %d evaluations, objective %.5f", evaluations, best)

    if jintra_reps >= 2 and "min_jintra" in targets and targets["min_jintra"].value is not None:
        params = _fit_noise(params, targets["min_jintra"].value, jintra_reps, device_seed,
                            puf_size, master_seed)
    final = calibration_metrics(params, device_seed, puf_size, jintra_reps, master_seed)
    residuals = {tid: targets[tid].residual(v) for tid, v in final.items()
                 if tid in targets and targets[tid].value is not None}
    return CalibrationResult(params, _objective(final, targets), final, evaluations,
                             converged, residuals)


def _fit_noise(params, target_jintra, reps, device_seed, puf_size, master_seed, iters=12):
    lo, hi = 0.0, max(4 * params.noise_log_sd, 0.2)
    for _ in range(iters):
        mid = (lo + hi) / 2
        m = calibration_metrics(params.replace(noise_log_sd=mid), device_seed, puf_size,
                                reps, master_seed)
        if m["min_jintra"] > target_jintra:
            lo = mid
        else:
            hi = mid
    return params.replace(noise_log_sd=round((lo + hi) / 2, 6))


# -- rendering ------------------------------------------------------------------

def histogram_svg(*stats, width: int = 480, height: int = 200) -> str:
    """Minimal SVG bar chart of one or more Jaccard histograms on [0, 1]."""
    colours = ("#1f77b4", "#d62728", "#2ca02c")
    peak = max(max(s.histogram()[1]) for s in stats) or 1
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">']
    for s, colour in zip(stats, colours):
        edges, counts = s.histogram()
        bw = width / len(counts)
        for i, c in enumerate(counts):
            if c:
                h = (height - 20) * c / peak
                parts.append(f'<rect x="{i * bw:.1f}" y="{height - 20 - h:.1f}" '
                             f'width="{bw:.1f}" height="{h:.1f}" fill="{colour}" '
                             f'fill-opacity="0.6"><title>{s.kind} [{edges[i]:.2f},'
                             f'{edges[i + 1]:.2f}): {c}</title></rect>')
    parts.append(f'<line x1="0" y1="{height - 20}" x2="{width}" y2="{height - 20}" stroke="black"/>')
    parts.append(f'<text x="0" y="{height - 5}" font-size="10">0</text>')
    parts.append(f'<text x="{width - 10}" y="{height - 5}" font-size="10">1</text>')
    parts.append("</svg>")
    return "\n".join(parts)
