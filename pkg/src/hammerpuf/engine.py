"""PUF query simulation.

Rates are constant for the whole query, so instead of stepping time the
engine evaluates each PUF cell's flip condition once:

    decay_rate + hammer_rate >= 1 / rh_time

with ``decay_rate = 1 / (retention * jitter)`` and ``hammer_rate`` the cell's
susceptibility times the summed access rate of its aggressor rows.
"""

from __future__ import annotations

import dataclasses
import datetime as _dt
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dram import (
    FORMAT_VERSION,
    PID_JITTER,
    DramDevice,
    cell_polarity,
    charged_mask,
    is_charged,
    iv_bits,
    row_keys,
    temperature_factor,
)
from .errors import ConfigurationError, FormatError
from .pattern import (
    RH_TYPES,
    SSRH,
    RowPattern,
    build_row_pattern,
    hammer_interval,
    interval_extrapolated,
)


@dataclass(frozen=True)
class PufConfig:
    rh_type: str = SSRH
    puf_address: int = 0
    puf_size: int = 128 * 1024
    hammer_row_iv: int = 0x55
    puf_row_iv: int = 0xAA
    rh_time: float = 120.0
    temperature_C: float = 40.0

    def __post_init__(self):
        if self.rh_type not in RH_TYPES:
            raise ConfigurationError(f"rh_type must be one of {RH_TYPES}")
        for name in ("hammer_row_iv", "puf_row_iv"):
            value = getattr(self, name)
            if not isinstance(value, int) or not 0 <= value <= 0xFF:
                raise ConfigurationError(f"{name} must be a single byte, got {value!r}")
        if not self.rh_time > 0:
            raise ConfigurationError("rh_time must be > 0")
        if self.puf_size <= 0:
            raise ConfigurationError("puf_size must be > 0")

    def replace(self, **changes) -> "PufConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hammer_row_iv"] = f"0x{self.hammer_row_iv:02X}"
        d["puf_row_iv"] = f"0x{self.puf_row_iv:02X}"
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "PufConfig":
        d = dict(data)
        for name in ("hammer_row_iv", "puf_row_iv"):
            if isinstance(d.get(name), str):
                d[name] = parse_iv(d[name])
        return cls(
            rh_type=d["rh_type"], puf_address=int(d["puf_address"]),
            puf_size=int(d["puf_size"]), hammer_row_iv=d["hammer_row_iv"],
            puf_row_iv=d["puf_row_iv"], rh_time=float(d["rh_time"]),
            temperature_C=float(d["temperature_C"]))

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def parse_iv(text: str) -> int:
    """Parse an IV written as a byte literal such as ``0xAA``."""
    try:
        value = int(text, 0)
    except (TypeError, ValueError):
        raise ConfigurationError(f"cannot parse IV {text!r}") from None
    if not 0 <= value <= 0xFF:
        raise ConfigurationError(f"IV {text!r} is not a single byte")
    return value


@dataclass(frozen=True)
class Measurement:
    readout: bytes
    config: PufConfig
    device_id: str
    measurement_seed: int
    decay_only: bool = False
    created_at: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def readout_bits(self) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.readout, dtype=np.uint8))

    @property
    def flip_count(self) -> int:
        initial = np.full(len(self.readout), self.config.puf_row_iv, dtype=np.uint8)
        diff = np.frombuffer(self.readout, dtype=np.uint8) ^ initial
        return int(np.unpackbits(diff).sum())

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "device_id": self.device_id,
            "config": self.config.to_dict(),
            "measurement_seed": self.measurement_seed,
            "decay_only": self.decay_only,
            "flip_count": self.flip_count,
            "meta": self.meta,
            "created_at": self.created_at,
            "readout_hex": self.readout.hex(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Measurement":
        if data.get("format_version") != FORMAT_VERSION:
            raise FormatError(
                f"unsupported measurement format_version {data.get('format_version')!r}")
        try:
            m = cls(
                readout=bytes.fromhex(data["readout_hex"]),
                config=PufConfig.from_dict(data["config"]),
                device_id=data["device_id"],
                measurement_seed=int(data["measurement_seed"]),
                decay_only=bool(data.get("decay_only", False)),
                created_at=data.get("created_at", ""),
                meta=data.get("meta", {}),
            )
        except (KeyError, ValueError) as exc:
            raise FormatError(f"malformed measurement: {exc}") from None
        if len(m.readout) != m.config.puf_size:
            raise FormatError("readout length does not match puf_size")
        if "flip_count" in data and data["flip_count"] != m.flip_count:
            raise FormatError("flip_count header disagrees with readout")
        return m


def initial_bit(iv: int, global_bit_index: int) -> int:
    """Bit stored at ``global_bit_index`` when memory is filled with byte ``iv``."""
    return (iv >> (7 - global_bit_index % 8)) & 1


def flip_decision(device: DramDevice, cell: int, config: PufConfig, aggressors,
                  jitter: float = 1.0, stored_bit: int | None = None) -> bool:
    """Scalar flip rule for one cell.

    ``aggressors`` is a sequence of ``(access_rate, aggressor_charged)`` pairs.
    ``stored_bit`` defaults to the PUF IV bit at ``cell``.
    """
    if jitter <= 0:
        raise ConfigurationError("jitter must be > 0")
    if stored_bit is None:
        stored_bit = initial_bit(config.puf_row_iv, cell)
    if not is_charged(cell_polarity(cell, device.geometry), stored_bit):
        return False
    p = device.model_params
    retention = float(np.exp(device.cell_retention_log(cell))) / temperature_factor(
        p, config.temperature_C)
    base = 1.0 / (retention * jitter)
    kappa_sum = sum(rate * (p.alpha if charged else 1.0) for rate, charged in aggressors)
    return base + device.cell_susceptibility(cell) * kappa_sum >= 1.0 / config.rh_time


def query_pattern(device: DramDevice, config: PufConfig) -> RowPattern:
    return build_row_pattern(config.rh_type, config.puf_size, device.geometry,
                             config.puf_address)


def hammer_rates(device: DramDevice, config: PufConfig, pattern: RowPattern) -> np.ndarray:
    """Hammer-induced leakage rate for every PUF cell, in PUF-row order."""
    row_bits = device.geometry.row_bits
    access_rate = 1.0 / hammer_interval(len(pattern.hammer_rows))
    agg_charged = charged_mask(config.hammer_row_iv, row_bits)
    kappa = np.where(agg_charged, device.model_params.alpha, 1.0)
    n_adj = np.repeat([len(pattern.aggressors(r)) for r in pattern.puf_rows], row_bits)
    per_cell_drive = n_adj * access_rate * np.tile(kappa, len(pattern.puf_rows))
    return device.susceptibility(pattern.puf_rows) * per_cell_drive


def _run(device: DramDevice, config: PufConfig, measurement_seed: int,
         decay_only: bool) -> Measurement:
    # reserve: the pattern must fit the bank
    pattern = query_pattern(device, config)
    row_bits = device.geometry.row_bits
    n_cells = len(pattern.puf_rows) * row_bits

    # initialise PUF rows; hammer rows only matter through their charge state
    initial = iv_bits(config.puf_row_iv, n_cells)
    charged = np.tile(charged_mask(config.puf_row_iv, row_bits),
                      len(pattern.puf_rows)).astype(np.uint8)

    # refresh off for rh_time, hammer rows accessed at a constant rate
    if decay_only:
        rates = np.zeros(n_cells)
    else:
        rates = hammer_rates(device, config, pattern)
    p = device.model_params
    keys = row_keys(measurement_seed, PID_JITTER, 0, pattern.puf_rows)
    flips = kernels.flip_kernel(
        keys, row_bits, device.retention_log(pattern.puf_rows), rates, charged,
        p.noise_log_sd, temperature_factor(p, config.temperature_C), 1.0 / config.rh_time)

    # refresh on, read the PUF rows
    readout = np.packbits(initial ^ flips).tobytes()
    n_hammer = len(pattern.hammer_rows)
    meta = {
        "pattern": pattern.as_string() if len(pattern.roles) <= 80 else None,
        "hammer_rows": n_hammer,
        "hammer_interval_us": round(hammer_interval(n_hammer) * 1e6, 6),
        "interval_extrapolated": interval_extrapolated(n_hammer),
    }
    return Measurement(
        readout=readout,
        config=config,
        device_id=device.device_id,
        measurement_seed=int(measurement_seed),
        decay_only=decay_only,
        created_at=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        meta=meta,
    )


def simulate_query(device: DramDevice, config: PufConfig,
                   measurement_seed: int) -> Measurement:
    """Run one Rowhammer PUF query and return the PUF-row readout."""
    return _run(device, config, measurement_seed, decay_only=False)


def simulate_decay_only(device: DramDevice, config: PufConfig,
                        measurement_seed: int) -> Measurement:
    """Same as :func:`simulate_query` with refresh off but no row accesses."""
    return _run(device, config, measurement_seed, decay_only=True)
