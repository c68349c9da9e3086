"""Command-line front end.

Exit codes: 0 success, 1 domain failure (e.g. key reconstruction mismatch),
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from . import experiments as ex
from .dram import DramDevice, Geometry, ModelParams, derive_device, load_calibration
from .engine import Measurement, PufConfig, parse_iv, simulate_decay_only, simulate_query
from .errors import (
    ConfigurationError,
    FormatError,
    HammerPufError,
    ReconstructionFailure,
    UsageError,
)
from .fuzzy import FeParams, HelperData, enroll, reconstruct
from .metrics import (
    entropy_bits,
    extract_flip_set,
    j_inter,
    j_intra,
    key_material_size,
    pairs_csv,
)

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
WORKSPACE_ENV = "HAMMERPUF_WORKSPACE"
EXPERIMENTS = ("iv-matrix", "temperature", "rh-type", "decay", "uniqueness", "calibrate")


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


def workspace() -> Path:
    return Path(os.environ.get(WORKSPACE_ENV) or Path.cwd() / "hammerpuf-workspace")


def write_atomic(path: Path, text: str, force: bool = False) -> Path:
    path = Path(path)
    if path.exists() and not force:
        raise CliError(f"{path} exists; pass --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CliError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: not valid JSON ({exc})") from None


def load_device(path) -> DramDevice:
    return DramDevice.from_descriptor(read_json(path))


def load_measurement(path) -> Measurement:
    return Measurement.from_dict(read_json(path))


def resolve_params(params_file):
    """Return (params, source) with --params > workspace calibration > shipped."""
    if params_file:
        if not Path(params_file).exists():
            print(f"note: params file {params_file} not found; using shipped calibration",
                  file=sys.stderr)
        else:
            return load_calibration(params_file), str(params_file)
    ws_cal = workspace() / "calibration.json"
    if ws_cal.exists():
        return load_calibration(ws_cal), str(ws_cal)
    return ModelParams.default(), "shipped"


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- device ---------------------------------------------------------------------

def cmd_device_gen(args) -> int:
    params, source = resolve_params(args.params)
    if source == "shipped" and not args.params:
        print("note: using shipped calibration", file=sys.stderr)
    geometry = Geometry(banks=args.banks, rows_per_bank=args.rows_per_bank,
                        row_size_bytes=args.row_size)
    device = derive_device(args.seed, geometry, params)
    out = Path(args.out) if args.out else workspace() / "devices" / f"device-{args.seed}.json"
    write_atomic(out, dumps(device.descriptor()), args.force)
    print(device.device_id)
    print(f"wrote {out}", file=sys.stderr)
    return EXIT_OK


# -- query ----------------------------------------------------------------------

def config_from_args(args) -> PufConfig:
    return PufConfig(
        rh_type=args.rh_type.upper(),
        puf_address=args.puf_address,
        puf_size=args.puf_size,
        hammer_row_iv=parse_iv(args.hammer_iv),
        puf_row_iv=parse_iv(args.puf_iv),
        rh_time=args.rh_time,
        temperature_C=args.temperature,
    )


def cmd_query(args) -> int:
    device = load_device(args.device)
    config = config_from_args(args)
    sim = simulate_decay_only if args.decay_only else simulate_query
    m = sim(device, config, args.measurement_seed)
    suffix = "-decay" if args.decay_only else ""
    out = (Path(args.out) if args.out else
           workspace() / "measurements" / f"{device.device_id}-{args.measurement_seed}{suffix}.json")
    write_atomic(out, dumps(m.to_dict()), args.force)
    print(m.flip_count)
    print(f"wrote {out}", file=sys.stderr)
    return EXIT_OK


# -- metrics --------------------------------------------------------------------

def cmd_metrics(args) -> int:
    ms = [load_measurement(p) for p in args.files]
    if args.mode == "entropy":
        rows = []
        for path, m in zip(args.files, ms):
            n, k = m.config.puf_size * 8, len(extract_flip_set(m))
            h, frac = entropy_bits(n, k)
            rows.append({"file": str(path), "n": n, "k": k, "entropy_bits": h,
                         "fractional_entropy": frac,
                         "key_material_bytes": key_material_size(args.key_bits, frac)
                         if frac > 0 else None})
        text = dumps(rows)
    else:
        if args.mode == "intra":
            stats = j_intra(ms)
        else:
            groups = {}
            for m in ms:
                groups.setdefault(m.device_id, []).append(m)
            stats = j_inter(list(groups.values()))
        summary = {k: v for k, v in stats.summary().items() if k != "histogram"}
        text = dumps(summary) if args.format == "json" else pairs_csv(stats)
    if args.out:
        write_atomic(Path(args.out), text, args.force)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- fuzzy extractor --------------------------------------------------------------

def cmd_fe_enroll(args) -> int:
    ms = [load_measurement(p) for p in args.files]
    params = FeParams(key_bits=args.key_bits, repetition=args.repetition,
                      enroll_count=len(ms), fe_seed=args.fe_seed)
    key, helper = enroll(ms, params, args.rng_seed)
    out = (Path(args.out) if args.out else
           workspace() / "helpers" / f"{ms[0].device_id}-{helper.config_fingerprint}.json")
    write_atomic(out, dumps(helper.to_dict()), args.force)
    print(f"wrote {out}", file=sys.stderr)
    if args.reveal_key:
        print(key.hex())
    return EXIT_OK


def cmd_fe_reconstruct(args) -> int:
    ms = [load_measurement(p) for p in args.files]
    helper = HelperData.from_dict(read_json(args.helper))
    try:
        key = reconstruct(ms, helper)
    except ReconstructionFailure as exc:
        print(f"reconstruction failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print("key reconstructed", file=sys.stderr)
    if args.reveal_key:
        print(key.hex())
    return EXIT_OK


# -- experiments ------------------------------------------------------------------

def cmd_experiment(args) -> int:
    name = args.name
    reps = args.repetitions
    config, reps = ex.scaled(ex.FULL_CONFIG, reps, args.scale)
    if args.device:
        device = load_device(args.device)
    else:
        params, _ = resolve_params(args.params)
        device = derive_device(args.device_seed, Geometry(), params)
    common = {"master_seed": args.master_seed, "workers": args.workers}
    out_dir = Path(args.out_dir) if args.out_dir else workspace() / "reports"
    stem = f"{name}-{args.master_seed}"
    files = {}

    if name == "iv-matrix":
        report = ex.run_iv_matrix(device, config, reps, **common)
    elif name == "temperature":
        report = ex.run_temperature_sweep(device, config, repetitions=reps, **common)
    elif name == "rh-type":
        sizes = sorted({ex.scaled(config.replace(puf_size=s * ex.KB), 1, args.scale)[0].puf_size
                        for s in (4, 32, 128)})
        report = ex.run_rh_type_comparison(device, sizes, repetitions=reps,
                                           base_config=config, **common)
    elif name == "decay":
        report = ex.run_decay_comparison(device, config, reps, **common)
    elif name == "uniqueness":
        seeds = args.device_seeds or [args.device_seed + i for i in range(3)]
        report = ex.run_uniqueness(seeds, config, reps, params=device.model_params,
                                   **common)
        intra, inter = report.pairs
        files[f"{stem}-pairs.csv"] = pairs_csv(intra, inter)
        files[f"{stem}-histogram.svg"] = ex.histogram_svg(intra, inter)
    else:
        result = ex.calibrate(start=device.model_params, search_budget=args.budget,
                              jintra_reps=max(2, reps), puf_size=config.puf_size,
                              master_seed=args.master_seed)
        targets = ex.load_targets()
        report = result.report(targets)
        files[f"calibration-candidate-{args.master_seed}.json"] = result.calibration_file()

    files[f"{stem}.json"] = report.to_json() + "\n"
    files[f"{stem}.csv"] = report.to_csv()
    for fname, text in files.items():
        write_atomic(out_dir / fname, text, args.force)
    for c in report.checks:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status} {c['target']}: {c.get('measured')}")
    print(f"wrote {len(files)} files to {out_dir}", file=sys.stderr)
    return EXIT_OK


# -- parser -----------------------------------------------------------------------

def _add_config_flags(p):
    d = PufConfig()
    p.add_argument("--rh-type", default=d.rh_type, choices=["SSRH", "DSRH", "ssrh", "dsrh"])
    p.add_argument("--puf-address", type=int, default=d.puf_address, help="first row of the pattern")
    p.add_argument("--puf-size", type=int, default=d.puf_size, help="bytes")
    p.add_argument("--hammer-iv", default="0x55")
    p.add_argument("--puf-iv", default="0xAA")
    p.add_argument("--rh-time", type=float, default=d.rh_time, help="seconds")
    p.add_argument("--temperature", type=float, default=d.temperature_C, help="degrees C")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hammerpuf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    dev = sub.add_parser("device").add_subparsers(dest="action", required=True)
    gen = dev.add_parser("gen", help="write a device descriptor")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--banks", type=int, default=Geometry().banks)
    gen.add_argument("--rows-per-bank", type=int, default=Geometry().rows_per_bank)
    gen.add_argument("--row-size", type=int, default=Geometry().row_size_bytes)
    gen.add_argument("--params", help="calibration file with model_params")
    gen.add_argument("--out")
    gen.add_argument("--force", action="store_true")
    gen.set_defaults(func=cmd_device_gen)

    puf = sub.add_parser("puf").add_subparsers(dest="action", required=True)
    q = puf.add_parser("query", help="simulate one PUF query")
    q.add_argument("--device", required=True)
    _add_config_flags(q)
    q.add_argument("--measurement-seed", type=int, required=True)
    q.add_argument("--decay-only", action="store_true")
    q.add_argument("--out")
    q.add_argument("--force", action="store_true")
    q.set_defaults(func=cmd_query)

    m = sub.add_parser("metrics", help="Jaccard statistics and entropy")
    m.add_argument("files", nargs="+")
    m.add_argument("--mode", choices=["intra", "inter", "entropy"], required=True)
    m.add_argument("--format", choices=["csv", "json"], default="csv")
    m.add_argument("--key-bits", type=int, default=128)
    m.add_argument("--out")
    m.add_argument("--force", action="store_true")
    m.set_defaults(func=cmd_metrics)

    fe = sub.add_parser("fe").add_subparsers(dest="action", required=True)
    en = fe.add_parser("enroll")
    en.add_argument("files", nargs="+")
    en.add_argument("--key-bits", type=int, default=128)
    en.add_argument("--repetition", type=int, default=7)
    en.add_argument("--fe-seed", type=int, default=0)
    en.add_argument("--rng-seed", type=int)
    en.add_argument("--reveal-key", action="store_true")
    en.add_argument("--out")
    en.add_argument("--force", action="store_true")
    en.set_defaults(func=cmd_fe_enroll)
    rc = fe.add_parser("reconstruct")
    rc.add_argument("files", nargs="+")
    rc.add_argument("--helper", required=True)
    rc.add_argument("--reveal-key", action="store_true")
    rc.set_defaults(func=cmd_fe_reconstruct)

    e = sub.add_parser("experiment", help="replicate an evaluation")
    e.add_argument("name", choices=EXPERIMENTS)
    e.add_argument("--scale", type=float, default=1.0)
    e.add_argument("--master-seed", type=int, default=0)
    e.add_argument("--repetitions", type=int, default=20)
    e.add_argument("--device", help="device descriptor (default: derive from --device-seed)")
    e.add_argument("--device-seed", type=int, default=1)
    e.add_argument("--device-seeds", type=int, nargs="+")
    e.add_argument("--params")
    e.add_argument("--budget", type=int, default=150, help="calibration evaluations")
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--out-dir")
    e.add_argument("--force", action="store_true")
    e.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ReconstructionFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (ConfigurationError, UsageError, FormatError, HammerPufError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
