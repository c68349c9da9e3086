import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hammerpuf.engine import PufConfig, simulate_query
from hammerpuf.dram import derive_device
from hammerpuf.errors import ConfigurationError, UsageError
from hammerpuf.metrics import (
    FlipSet,
    entropy_bits,
    entropy_bits_exact,
    extract_flip_set,
    j_inter,
    j_intra,
    jaccard,
    key_material_size,
    pairs_csv,
)

sets = st.sets(st.integers(0, 200), max_size=60)


def fs(xs, n=256):
    return FlipSet.from_indices(xs, n)


def test_jaccard_examples():
    assert jaccard(fs([1, 2, 3]), fs([2, 3, 4])) == pytest.approx(0.5)
    assert jaccard(fs([]), fs([])) == 1.0
    assert jaccard(fs([1]), fs([])) == 0.0
    assert jaccard(fs([5, 6]), fs([5, 6])) == 1.0


@given(sets, sets)
def test_jaccard_properties(a, b):
    j = jaccard(fs(a), fs(b))
    assert 0.0 <= j <= 1.0
    assert j == jaccard(fs(b), fs(a))
    expected = 1.0 if not (a | b) else len(a & b) / len(a | b)
    assert j == pytest.approx(expected)
    assert (j == 1.0) == (a == b)


def test_flipset_rejects_out_of_range():
    with pytest.raises(ConfigurationError):
        FlipSet.from_indices([300], 256)


def test_extract_flip_set_relative_to_iv(device, small_config):
    m = simulate_query(device, small_config, 1)
    s = extract_flip_set(m)
    bits = m.readout_bits
    iv = np.unpackbits(np.full(small_config.puf_size, small_config.puf_row_iv, np.uint8))
    np.testing.assert_array_equal(s.indices, np.flatnonzero(bits != iv))
    assert s.n_cells == small_config.puf_size * 8


def test_j_intra_pairs_and_mismatch(device, small_config):
    ms = [simulate_query(device, small_config, s) for s in range(5)]
    stats = j_intra(ms)
    assert stats.count == 10
    assert 0.5 < stats.min <= stats.mean <= stats.max <= 1.0
    edges, counts = stats.histogram()
    assert len(edges) == 51 and sum(counts) == 10
    other = simulate_query(device, small_config.replace(rh_time=60.0), 0)
    with pytest.raises(UsageError):
        j_intra(ms[:2] + [other])
    with pytest.raises(ConfigurationError):
        j_intra(ms[:1])


def test_j_inter_counts_cross_pairs(params, small_config):
    groups = [[simulate_query(derive_device(s, params=params), small_config, r) for r in range(3)]
              for s in (1, 2, 3)]
    stats = j_inter(groups)
    assert stats.count == 27
    assert stats.max < 0.1
    csv_text = pairs_csv(stats)
    assert csv_text.splitlines()[0] == "id_a,id_b,jaccard,kind"
    assert len(csv_text.splitlines()) == 28


def test_j_inter_matches_random_set_expectation(params):
    """Independent devices overlap like random k-subsets: J ~ k / (2N - k)."""
    cfg = PufConfig(puf_size=32 * 1024)
    groups = [[simulate_query(derive_device(s, params=params), cfg, 0)] for s in range(6)]
    stats = j_inter(groups)
    k = np.mean([len(extract_flip_set(g[0])) for g in groups])
    n = cfg.puf_size * 8  # 0xAA charges every cell
    assert stats.mean == pytest.approx(k / (2 * n - k), rel=0.25)


@pytest.mark.parametrize("n", range(0, 65))
def test_entropy_matches_big_integer(n):
    for k in range(n + 1):
        h, frac = entropy_bits(n, k)
        exact = entropy_bits_exact(n, k)
        assert h == pytest.approx(exact, rel=1e-9, abs=1e-12)
        if n:
            assert frac == pytest.approx(h / n)


def test_entropy_reference_numbers():
    h, frac = entropy_bits(1048576, 30994)
    assert frac == pytest.approx(0.192, abs=1e-3)
    assert key_material_size(128, 0.192) == 84
    assert key_material_size(0, 0.5) == 0
    with pytest.raises(ValueError):
        entropy_bits(10, 11)
    with pytest.raises(ValueError):
        key_material_size(128, 0)


def test_entropy_large_exact():
    assert entropy_bits(100000, 3000)[0] == pytest.approx(entropy_bits_exact(100000, 3000), rel=1e-9)
    assert math.isfinite(entropy_bits(2**30, 2**20)[0])
