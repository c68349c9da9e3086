"""Hammer/victim row layouts and the per-row hammer access interval."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .dram import Geometry
from .errors import ConfigurationError

SSRH = "SSRH"
DSRH = "DSRH"
RH_TYPES = (SSRH, DSRH)

HAMMER = "H"
PUF = "V"

# Measured access intervals: 6 us with 2 hammer rows, 8 us with 17.
_FIT_POINTS = ((2, Fraction(6)), (17, Fraction(8)))
_SLOPE_US = (_FIT_POINTS[1][1] - _FIT_POINTS[0][1]) / (_FIT_POINTS[1][0] - _FIT_POINTS[0][0])
_INTERCEPT_US = _FIT_POINTS[0][1] - _SLOPE_US * _FIT_POINTS[0][0]


@dataclass(frozen=True)
class RowPattern:
    rh_type: str
    start_row: int
    roles: tuple[str, ...]
    row_size_bytes: int

    @property
    def hammer_rows(self) -> tuple[int, ...]:
        return tuple(self.start_row + i for i, r in enumerate(self.roles) if r == HAMMER)

    @property
    def puf_rows(self) -> tuple[int, ...]:
        return tuple(self.start_row + i for i, r in enumerate(self.roles) if r == PUF)

    @property
    def end_row(self) -> int:
        return self.start_row + len(self.roles)

    def aggressors(self, row: int) -> tuple[int, ...]:
        """Hammer rows at +/-1 of ``row``."""
        hammer = set(self.hammer_rows)
        return tuple(r for r in (row - 1, row + 1) if r in hammer)

    def as_string(self) -> str:
        return "".join(self.roles)

    @property
    def puf_size(self) -> int:
        return len(self.puf_rows) * self.row_size_bytes

    @property
    def footprint_bytes(self) -> int:
        return len(self.roles) * self.row_size_bytes

    def to_dict(self) -> dict:
        return {
            "rh_type": self.rh_type,
            "pattern": self.as_string(),
            "start_row": self.start_row,
            "hammer_rows": list(self.hammer_rows),
            "puf_rows": list(self.puf_rows),
            "hammer_bytes": len(self.hammer_rows) * self.row_size_bytes,
            "footprint_bytes": self.footprint_bytes,
        }


def build_row_pattern(rh_type: str, puf_size: int, geometry: Geometry,
                      puf_address: int = 0) -> RowPattern:
    """Interleave hammer (H) and PUF (V) rows starting at row ``puf_address``.

    DSRH is ``(H V)*`` closed by ``H``. SSRH is ``(H V V)*`` closed by ``H``;
    an odd victim count ends with a single ``H V`` unit, so a one-row PUF is
    ``H V H``.
    """
    if rh_type not in RH_TYPES:
        raise ConfigurationError(f"rh_type must be one of {RH_TYPES}, got {rh_type!r}")
    row_size = geometry.row_size_bytes
    if puf_size <= 0 or puf_size % row_size:
        raise ConfigurationError(
            f"puf_size {puf_size} is not a positive multiple of the row size {row_size}")
    victims = puf_size // row_size
    if rh_type == DSRH:
        roles = [HAMMER, PUF] * victims
    else:
        roles = [HAMMER, PUF, PUF] * (victims // 2) + [HAMMER, PUF] * (victims % 2)
    roles.append(HAMMER)
    if puf_address < 0 or puf_address + len(roles) > geometry.rows_per_bank:
        raise ConfigurationError(
            f"{rh_type} pattern for {puf_size} bytes needs rows "
            f"[{puf_address}, {puf_address + len(roles)}) but the bank has "
            f"{geometry.rows_per_bank} rows")
    return RowPattern(rh_type, puf_address, tuple(roles), row_size)


def hammer_interval(num_hammer_rows: int) -> float:
    """Seconds between two accesses of the same hammer row.

    Linear in the number of hammer rows, through 6 us at 2 rows and 8 us at
    17 rows.
    """
    if num_hammer_rows < 1:
        raise ConfigurationError("need at least one hammer row")
    return float(_INTERCEPT_US + _SLOPE_US * num_hammer_rows) * 1e-6


def interval_extrapolated(num_hammer_rows: int) -> bool:
    """True when the interval lies outside the measured 2..17 row range."""
    return not _FIT_POINTS[0][0] <= num_hammer_rows <= _FIT_POINTS[1][0]
