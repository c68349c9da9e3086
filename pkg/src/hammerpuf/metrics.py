"""Flip sets, Jaccard robustness/uniqueness statistics and entropy sizing."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .engine import Measurement
from .errors import ConfigurationError, UsageError

HISTOGRAM_BINS = 50


@dataclass(frozen=True)
class FlipSet:
    """Sorted indices (into the PUF readout) of bits that differ from the IV."""

    indices: np.ndarray
    n_cells: int
    source: str = ""

    def __len__(self):
        return int(self.indices.size)

    def __iter__(self):
        return iter(self.indices.tolist())

    @classmethod
    def from_indices(cls, indices, n_cells: int, source: str = "") -> "FlipSet":
        idx = np.unique(np.asarray(list(indices), dtype=np.int64))
        if idx.size and (idx[0] < 0 or idx[-1] >= n_cells):
            raise ConfigurationError("flip index out of range")
        return cls(idx, n_cells, source)


def measurement_label(m: Measurement) -> str:
    return f"{m.device_id}:{m.measurement_seed}"


def extract_flip_set(m: Measurement) -> FlipSet:
    readout = np.frombuffer(m.readout, dtype=np.uint8)
    diff = np.unpackbits(readout ^ np.uint8(m.config.puf_row_iv))
    return FlipSet(np.flatnonzero(diff).astype(np.int64), diff.size, measurement_label(m))


def jaccard(s1: FlipSet, s2: FlipSet) -> float:
    """``|s1 & s2| / |s1 | s2|``; two empty sets score 1."""
    a = s1.indices if isinstance(s1, FlipSet) else np.unique(np.asarray(list(s1)))
    b = s2.indices if isinstance(s2, FlipSet) else np.unique(np.asarray(list(s2)))
    inter = np.intersect1d(a, b, assume_unique=True).size
    union = a.size + b.size - inter
    if union == 0:
        return 1.0
    return inter / union


@dataclass
class JaccardStats:
    values: list[float]
    labels: list[tuple[str, str]] = field(default_factory=list)
    kind: str = "intra"
    bins: int = HISTOGRAM_BINS

    @property
    def count(self) -> int:
        return len(self.values)

    @property
    def min(self) -> float:
        return float(min(self.values))

    @property
    def max(self) -> float:
        return float(max(self.values))

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    def histogram(self) -> tuple[list[float], list[int]]:
        counts, edges = np.histogram(self.values, bins=self.bins, range=(0.0, 1.0))
        return edges.tolist(), counts.tolist()

    def summary(self) -> dict:
        edges, counts = self.histogram()
        return {
            "kind": self.kind,
            "count": self.count,
            "min": self.min,
            "max": self.max,
            "mean": self.mean,
            "histogram": {"edges": edges, "counts": counts},
        }

    def pair_rows(self):
        for (a, b), v in zip(self.labels, self.values):
            yield a, b, v, self.kind


def _pairwise(pairs, kind):
    values, labels = [], []
    for (la, sa), (lb, sb) in pairs:
        values.append(jaccard(sa, sb))
        labels.append((la, lb))
    return JaccardStats(values, labels, kind)


def _labelled_sets(measurements):
    return [(measurement_label(m), extract_flip_set(m)) for m in measurements]


def j_intra(measurements) -> JaccardStats:
    """Jaccard over all unordered pairs of measurements of one PUF instance."""
    measurements = list(measurements)
    if len(measurements) < 2:
        raise ConfigurationError("j_intra needs at least two measurements")
    first = measurements[0]
    for m in measurements[1:]:
        if m.device_id != first.device_id or m.config != first.config:
            raise UsageError("j_intra measurements must share device and config")
    return _pairwise(itertools.combinations(_labelled_sets(measurements), 2), "intra")


def j_inter(groups) -> JaccardStats:
    """Jaccard over every pair of measurements taken from different devices."""
    groups = [list(g) for g in groups]
    if len(groups) < 2:
        raise ConfigurationError("j_inter needs at least two devices")
    labelled = [_labelled_sets(g) for g in groups]
    pairs = []
    for ga, gb in itertools.combinations(labelled, 2):
        pairs.extend(itertools.product(ga, gb))
    return _pairwise(pairs, "inter")


def entropy_bits(n: int, k: int) -> tuple[float, float]:
    """``log2(C(n, k))`` via log-gamma, and the same value per cell."""
    if n < 0 or not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got n={n}, k={k}")
    if k == 0 or k == n:
        return 0.0, 0.0
    h = (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)) / math.log(2)
    return h, h / n


def entropy_bits_exact(n: int, k: int) -> float:
    """Big-integer reference for :func:`entropy_bits` (small ``n``)."""
    c = math.comb(n, k)
    shift = max(c.bit_length() - 60, 0)
    return shift + math.log2(c >> shift)


def key_material_size(target_key_bits: int, fractional_entropy: float) -> int:
    """Bytes of PUF cells needed to carry ``target_key_bits`` bits of entropy."""
    if fractional_entropy <= 0:
        raise ValueError("fractional_entropy must be > 0")
    if target_key_bits <= 0:
        return 0
    return math.ceil(target_key_bits / fractional_entropy / 8)


def pairs_csv(*stats: JaccardStats) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id_a", "id_b", "jaccard", "kind"])
    for s in stats:
        for a, b, v, kind in s.pair_rows():
            writer.writerow([a, b, f"{v:.6f}", kind])
    return buf.getvalue()
