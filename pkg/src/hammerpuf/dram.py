"""Simulated DRAM device: geometry, cell polarity and per-cell physics.

Every per-cell quantity is a pure function of ``(device_seed, bank, row,
column, parameter id)``. Values are produced lazily, row by row, by chaining
splitmix64 over those coordinates and feeding the result through an inverse
normal CDF, so nothing has to be stored or serialized.
"""

from __future__ import annotations

import dataclasses
import enum
import functools
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ConfigurationError, FormatError

FORMAT_VERSION = 1
MASK64 = (1 << 64) - 1
REFERENCE_TEMP_C = 40.0
MIN_TEMP_C = 0.0
MAX_TEMP_C = 100.0

# parameter ids fed into the per-cell hash chain
PID_RETENTION = 1
PID_SUSCEPTIBLE = 2
PID_SUSCEPTIBILITY = 3
PID_JITTER = 4


def splitmix64(x: int) -> int:
    """One splitmix64 step: add the golden gamma, then the standard finalizer."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def row_key(seed: int, pid: int, bank: int, row: int) -> int:
    """Hash prefix shared by all cells of one row for one parameter.

    The cell value is ``splitmix64(row_key ^ column)``.
    """
    k = splitmix64(seed & MASK64)
    k = splitmix64(k ^ pid)
    k = splitmix64(k ^ bank)
    return splitmix64(k ^ row)


def row_keys(seed: int, pid: int, bank: int, rows) -> np.ndarray:
    return np.array([row_key(seed, pid, bank, int(r)) for r in rows], dtype=np.uint64)


@dataclass(frozen=True)
class Geometry:
    banks: int = 1
    rows_per_bank: int = 128
    row_size_bytes: int = 4096

    def __post_init__(self):
        if not isinstance(self.banks, int) or self.banks < 1:
            raise ConfigurationError(f"banks must be >= 1, got {self.banks!r}")
        if not isinstance(self.rows_per_bank, int) or self.rows_per_bank < 3:
            raise ConfigurationError(
                f"rows_per_bank must be >= 3, got {self.rows_per_bank!r}")
        size = self.row_size_bytes
        if not isinstance(size, int) or size < 64 or size & (size - 1):
            raise ConfigurationError(
                f"row_size_bytes must be a power of two >= 64, got {size!r}")

    @property
    def row_bits(self) -> int:
        return self.row_size_bytes * 8

    @property
    def total_cells(self) -> int:
        return self.banks * self.rows_per_bank * self.row_bits

    def locate(self, index: int) -> tuple[int, int, int]:
        """Split a global bit index into ``(bank, row, column)``."""
        if not 0 <= index < self.total_cells:
            raise IndexError(f"cell index {index} out of range [0, {self.total_cells})")
        bank, rest = divmod(index, self.rows_per_bank * self.row_bits)
        row, col = divmod(rest, self.row_bits)
        return bank, row, col

    def global_index(self, bank: int, row: int, col: int) -> int:
        return (bank * self.rows_per_bank + row) * self.row_bits + col


class CellPolarity(enum.Enum):
    TRUE_CELL = "true"
    ANTI_CELL = "anti"


def cell_polarity(index: int, geometry: Geometry | None = None) -> CellPolarity:
    """Polarity of a cell: even bit positions (MSB-first) are true-cells."""
    geometry = geometry or Geometry()
    if not 0 <= index < geometry.total_cells:
        raise IndexError(f"cell index {index} out of range [0, {geometry.total_cells})")
    return CellPolarity.TRUE_CELL if (index % 8) % 2 == 0 else CellPolarity.ANTI_CELL


def is_charged(polarity: CellPolarity, stored_bit: int) -> bool:
    if polarity is CellPolarity.TRUE_CELL:
        return stored_bit == 1
    return stored_bit == 0


def iv_bits(iv: int, n_bits: int) -> np.ndarray:
    """The byte ``iv`` tiled over ``n_bits`` bits, MSB-first (uint8 0/1)."""
    byte = np.unpackbits(np.array([iv & 0xFF], dtype=np.uint8))
    return np.tile(byte, n_bits // 8)


def charged_mask(iv: int, n_bits: int) -> np.ndarray:
    """Which cells of an ``iv``-initialised span hold charge."""
    bits = iv_bits(iv, n_bits).astype(bool)
    true_cell = (np.arange(n_bits) % 2) == 0
    return np.where(true_cell, bits, ~bits)


@dataclass(frozen=True)
class ModelParams:
    """Calibration knobs of the cell model.

    Retention at the reference temperature is lognormal in seconds;
    susceptibility is zero with probability ``1 - susceptible_fraction`` and
    lognormal otherwise. ``alpha`` scales the disturbance from an aggressor
    cell that is itself charged.
    """

    retention_log_mean: float
    retention_log_sd: float
    susceptibility_log_mean: float
    susceptibility_log_sd: float
    susceptible_fraction: float
    alpha: float
    noise_log_sd: float
    temp_doubling_degC: float = 10.0

    def __post_init__(self):
        for name in ("retention_log_sd", "susceptibility_log_sd", "noise_log_sd"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0")
        if not 0.0 <= self.susceptible_fraction <= 1.0:
            raise ConfigurationError("susceptible_fraction must lie in [0, 1]")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigurationError("alpha must lie in (0, 1]")
        if self.temp_doubling_degC <= 0:
            raise ConfigurationError("temp_doubling_degC must be > 0")

    @classmethod
    def default(cls) -> "ModelParams":
        """Parameters from the calibration file shipped with the package."""
        return _shipped_params()

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigurationError(f"unknown model parameters: {sorted(unknown)}")
        try:
            return cls(**{k: float(v) for k, v in data.items()})
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)


def load_calibration(path) -> ModelParams:
    data = json.loads(Path(path).read_text())
    if data.get("format_version") != FORMAT_VERSION:
        raise FormatError(
            f"{path}: unsupported calibration format_version {data.get('format_version')!r}")
    return ModelParams.from_dict(data["model_params"])


@functools.lru_cache(maxsize=1)
def _shipped_params() -> ModelParams:
    with resources.as_file(resources.files("hammerpuf") / "data" / "calibration.json") as p:
        return load_calibration(p)


def temperature_factor(params: ModelParams, temperature_C: float) -> float:
    """Decay-rate multiplier relative to the reference temperature."""
    if not MIN_TEMP_C <= temperature_C <= MAX_TEMP_C:
        raise ConfigurationError(
            f"temperature {temperature_C} C outside [{MIN_TEMP_C}, {MAX_TEMP_C}]")
    return 2.0 ** ((temperature_C - REFERENCE_TEMP_C) / params.temp_doubling_degC)


@dataclass(frozen=True)
class DramDevice:
    device_seed: int
    geometry: Geometry
    model_params: ModelParams

    def descriptor(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "device_seed": self.device_seed,
            "geometry": dataclasses.asdict(self.geometry),
            "model_params": self.model_params.to_dict(),
        }

    @functools.cached_property
    def device_id(self) -> str:
        blob = json.dumps(self.descriptor(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_descriptor(cls, data: dict) -> "DramDevice":
        if data.get("format_version") != FORMAT_VERSION:
            raise FormatError(
                f"unsupported device format_version {data.get('format_version')!r}")
        try:
            geometry = Geometry(**data["geometry"])
            params = ModelParams.from_dict(data["model_params"])
            seed = int(data["device_seed"])
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed device descriptor: {exc}") from None
        return derive_device(seed, geometry, params)

    def retention_log(self, rows, bank: int = 0) -> np.ndarray:
        """Log retention (seconds, reference temperature) of every cell in ``rows``."""
        return _row_field(self, "retention", bank, tuple(int(r) for r in rows))

    def susceptibility(self, rows, bank: int = 0) -> np.ndarray:
        return _row_field(self, "susceptibility", bank, tuple(int(r) for r in rows))

    def cell_retention_log(self, index: int) -> float:
        bank, row, col = self.geometry.locate(index)
        return float(self.retention_log([row], bank)[col])

    def cell_susceptibility(self, index: int) -> float:
        bank, row, col = self.geometry.locate(index)
        return float(self.susceptibility([row], bank)[col])


def derive_device(device_seed: int, geometry: Geometry | None = None,
                  params: ModelParams | None = None) -> DramDevice:
    """Build a device; identical arguments always give identical cells."""
    if geometry is None:
        geometry = Geometry()
    if not isinstance(geometry, Geometry):
        raise ConfigurationError("geometry must be a Geometry")
    if params is None:
        params = ModelParams.default()
    if not 0 <= int(device_seed) <= MASK64:
        raise ConfigurationError("device_seed must be an unsigned 64-bit integer")
    return DramDevice(int(device_seed), geometry, params)


@functools.lru_cache(maxsize=32)
def _row_field(device: DramDevice, kind: str, bank: int, rows: tuple) -> np.ndarray:
    g, p = device.geometry, device.model_params
    if not 0 <= bank < g.banks:
        raise IndexError(f"bank {bank} out of range")
    if any(not 0 <= r < g.rows_per_bank for r in rows):
        raise IndexError("row out of range")
    seed = device.device_seed
    if kind == "retention":
        out = kernels.normal_field(row_keys(seed, PID_RETENTION, bank, rows), g.row_bits,
                                   p.retention_log_mean, p.retention_log_sd)
    else:
        gate = kernels.uniform_field(row_keys(seed, PID_SUSCEPTIBLE, bank, rows), g.row_bits)
        mag = kernels.normal_field(row_keys(seed, PID_SUSCEPTIBILITY, bank, rows), g.row_bits,
                                   p.susceptibility_log_mean, p.susceptibility_log_sd)
        out = np.where(gate < p.susceptible_fraction, np.exp(mag), 0.0)
    out.setflags(write=False)
    return out


def retention_time(device: DramDevice, cell: int, temperature_C: float) -> float:
    """Seconds until ``cell`` loses its charge at ``temperature_C`` (no jitter)."""
    factor = temperature_factor(device.model_params, temperature_C)
    return float(np.exp(device.cell_retention_log(cell))) / factor
