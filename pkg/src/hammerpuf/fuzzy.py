"""Code-offset fuzzy extractor over a repetition code.

Enrollment turns a few noisy measurements into a random key plus public
helper data; reproduction recovers the key from a fresh measurement.

Selected cells are half stable flip cells and half stable non-flip cells of
the enrolled instance. Reference bits at those positions are therefore
balanced, so another device (whose flips are elsewhere) cannot reproduce
them from the IV alone.
"""

from __future__ import annotations

import hashlib
import json
import secrets
from dataclasses import asdict, dataclass

import numpy as np

from .dram import FORMAT_VERSION
from .engine import Measurement, iv_bits
from .errors import ConfigurationError, FormatError, ReconstructionFailure, UsageError
from .metrics import extract_flip_set


@dataclass(frozen=True)
class FeParams:
    key_bits: int = 128
    repetition: int = 7
    enroll_count: int = 5
    fe_seed: int = 0

    def __post_init__(self):
        if self.repetition < 3 or self.repetition % 2 == 0:
            raise ConfigurationError("repetition must be odd and >= 3")
        if self.key_bits <= 0 or self.key_bits % 8:
            raise ConfigurationError("key_bits must be a positive multiple of 8")
        if self.enroll_count < 1:
            raise ConfigurationError("enroll_count must be >= 1")

    @property
    def code_bits(self) -> int:
        return self.key_bits * self.repetition


@dataclass(frozen=True)
class HelperData:
    positions: np.ndarray
    mask: np.ndarray
    key_check: bytes
    fe_params: FeParams
    config_fingerprint: str
    n_cells: int

    def to_dict(self) -> dict:
        pos = self.positions.astype(np.int64)
        return {
            "version": FORMAT_VERSION,
            "fe_params": asdict(self.fe_params),
            "n_cells": self.n_cells,
            "positions": np.diff(pos, prepend=0).tolist(),
            "mask_hex": np.packbits(self.mask).tobytes().hex(),
            "key_check_hex": self.key_check.hex(),
            "config_fingerprint": self.config_fingerprint,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HelperData":
        if data.get("version") != FORMAT_VERSION:
            raise FormatError(f"unsupported helper data version {data.get('version')!r}")
        try:
            params = FeParams(**data["fe_params"])
            positions = np.cumsum(np.asarray(data["positions"], dtype=np.int64))
            mask = np.unpackbits(np.frombuffer(bytes.fromhex(data["mask_hex"]), dtype=np.uint8))
            helper = cls(positions, mask[: params.code_bits],
                         bytes.fromhex(data["key_check_hex"]), params,
                         data["config_fingerprint"], int(data["n_cells"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed helper data: {exc}") from None
        n = params.code_bits
        pos = helper.positions
        if (pos.size != n or helper.mask.size != n or np.any(np.diff(pos) <= 0)
                or pos[0] < 0 or pos[-1] >= helper.n_cells):
            raise FormatError("helper positions/mask inconsistent with fe_params")
        return helper


def _check_same_source(measurements):
    first = measurements[0]
    for m in measurements[1:]:
        if m.device_id != first.device_id or m.config != first.config:
            raise UsageError("measurements must share device and config")


def majority_vector(measurements) -> np.ndarray:
    """Per-bit majority of the readouts; a tie keeps the IV bit."""
    measurements = list(measurements)
    if not measurements:
        raise ConfigurationError("need at least one measurement")
    _check_same_source(measurements)
    bits = np.stack([m.readout_bits for m in measurements]).astype(np.int32)
    ones = bits.sum(axis=0)
    n = len(measurements)
    out = (2 * ones > n).astype(np.uint8)
    tie = 2 * ones == n
    if tie.any():
        iv = iv_bits(measurements[0].config.puf_row_iv, bits.shape[1])
        out[tie] = iv[tie]
    return out


def majority_decode(blocks: np.ndarray) -> np.ndarray:
    """Decode each row of ``blocks`` (shape ``(k, rho)``) to its majority bit."""
    blocks = np.asarray(blocks)
    return (2 * blocks.sum(axis=1) > blocks.shape[1]).astype(np.uint8)


def _block_order(params: FeParams) -> np.ndarray:
    return np.random.default_rng([params.fe_seed, 1]).permutation(params.code_bits)


def _select_positions(measurements, params: FeParams) -> np.ndarray:
    n_cells = measurements[0].config.puf_size * 8
    if params.code_bits > n_cells:
        raise ConfigurationError(
            f"{params.code_bits} code bits exceed the {n_cells} PUF cells")
    sets = [extract_flip_set(m).indices for m in measurements]
    ever = sets[0]
    always = sets[0]
    for s in sets[1:]:
        ever = np.union1d(ever, s)
        always = np.intersect1d(always, s, assume_unique=True)
    n_flip = params.code_bits // 2
    n_stable = params.code_bits - n_flip
    if always.size < n_flip:
        raise ConfigurationError(
            f"only {always.size} stable flip cells, need {n_flip}; "
            "use a configuration that produces more flips")
    if n_cells - ever.size < n_stable:
        raise ConfigurationError("not enough stable non-flip cells")
    rng = np.random.default_rng([params.fe_seed, 0])
    chosen_flip = rng.choice(always, size=n_flip, replace=False)
    chosen_stable = np.empty(0, dtype=np.int64)
    while chosen_stable.size < n_stable:
        draw = rng.integers(0, n_cells, size=2 * n_stable)
        draw = draw[~np.isin(draw, ever)]
        chosen_stable = np.union1d(chosen_stable, draw)
    chosen_stable = rng.permutation(chosen_stable)[:n_stable]
    return np.sort(np.concatenate([chosen_flip, chosen_stable]).astype(np.int64))


def enroll(measurements, params: FeParams | None = None,
           rng_seed: int | None = None) -> tuple[bytes, HelperData]:
    """Generate a key and the helper data that binds it to this PUF instance."""
    measurements = list(measurements)
    params = params or FeParams()
    if not measurements:
        raise ConfigurationError("enroll needs at least one measurement")
    _check_same_source(measurements)
    reference = majority_vector(measurements)
    positions = _select_positions(measurements, params)

    rng = np.random.default_rng(rng_seed) if rng_seed is not None else None
    if rng is None:
        key = secrets.token_bytes(params.key_bits // 8)
    else:
        key = rng.integers(0, 256, size=params.key_bits // 8, dtype=np.uint8).tobytes()
    key_bits = np.unpackbits(np.frombuffer(key, dtype=np.uint8))
    codeword = np.repeat(key_bits, params.repetition)

    order = _block_order(params)
    mask = np.empty(params.code_bits, dtype=np.uint8)
    mask[order] = codeword ^ reference[positions[order]]

    helper = HelperData(
        positions=positions,
        mask=mask,
        key_check=hashlib.sha256(key).digest(),
        fe_params=params,
        config_fingerprint=measurements[0].config.fingerprint(),
        n_cells=reference.size,
    )
    return key, helper


def reconstruct(measurements, helper: HelperData) -> bytes:
    """Recover the enrolled key, or raise :class:`ReconstructionFailure`."""
    if isinstance(measurements, Measurement):
        measurements = [measurements]
    measurements = list(measurements)
    for m in measurements:
        if m.config.fingerprint() != helper.config_fingerprint:
            raise UsageError("helper data was enrolled under a different PUF configuration")
        if m.config.puf_size * 8 != helper.n_cells:
            raise UsageError("measurement size does not match helper data")
    reading = majority_vector(measurements)
    noisy = reading[helper.positions] ^ helper.mask
    p = helper.fe_params
    blocks = noisy[_block_order(p)].reshape(p.key_bits, p.repetition)
    key = np.packbits(majority_decode(blocks)).tobytes()
    if hashlib.sha256(key).digest() != helper.key_check:
        raise ReconstructionFailure("reconstructed key does not match the enrolled commitment")
    return key


def save_helper(helper: HelperData) -> str:
    return json.dumps(helper.to_dict(), sort_keys=True)
