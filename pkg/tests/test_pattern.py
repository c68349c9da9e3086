import pytest
from hypothesis import given
from hypothesis import strategies as st

from hammerpuf.dram import Geometry
from hammerpuf.errors import ConfigurationError
from hammerpuf.pattern import (
    DSRH,
    SSRH,
    build_row_pattern,
    hammer_interval,
    interval_extrapolated,
)

KB = 1024
G = Geometry(rows_per_bank=512)


def test_fig2_double_sided_12kb():
    p = build_row_pattern(DSRH, 12 * KB, G)
    assert p.as_string() == "HVHVHVH"
    assert len(p.puf_rows) == 3 and len(p.hammer_rows) == 4


def test_fig2_single_sided_16kb():
    p = build_row_pattern(SSRH, 16 * KB, G)
    assert p.as_string() == "HVVHVVH"
    assert len(p.puf_rows) == 4 and len(p.hammer_rows) == 3


def test_ssrh_128kb_uses_17_hammer_rows():
    p = build_row_pattern(SSRH, 128 * KB, G)
    assert len(p.puf_rows) == 32
    assert len(p.hammer_rows) == 17


def test_ssrh_single_row_puf():
    # 4 KB single-sided PUF hammers 2 rows
    p = build_row_pattern(SSRH, 4 * KB, G)
    assert p.as_string() == "HVH"


def test_start_row_offsets_pattern():
    p = build_row_pattern(DSRH, 8 * KB, G, puf_address=10)
    assert p.hammer_rows == (10, 12, 14)
    assert p.puf_rows == (11, 13)


@given(st.integers(1, 100), st.sampled_from([SSRH, DSRH]), st.integers(0, 100))
def test_pattern_invariants(victims, rh_type, start):
    p = build_row_pattern(rh_type, victims * 4 * KB, G, start)
    assert p.puf_size == victims * 4 * KB
    if rh_type == DSRH:
        assert len(p.hammer_rows) == victims + 1
        assert all(len(p.aggressors(r)) == 2 for r in p.puf_rows)
    else:
        assert len(p.hammer_rows) == victims // 2 + 1 + victims % 2
        single = [r for r in p.puf_rows if len(p.aggressors(r)) == 1]
        assert len(single) == victims - victims % 2
    for r in p.puf_rows:
        assert all(abs(a - r) == 1 for a in p.aggressors(r))
    assert p.roles[0] == "H" and p.roles[-1] == "H"


@pytest.mark.parametrize("size", [0, 1000, 4 * KB + 1])
def test_rejects_unaligned_size(size):
    with pytest.raises(ConfigurationError):
        build_row_pattern(SSRH, size, G)


def test_rejects_overflow():
    with pytest.raises(ConfigurationError, match="rows"):
        build_row_pattern(DSRH, 128 * KB, Geometry(rows_per_bank=64))
    with pytest.raises(ConfigurationError):
        build_row_pattern(DSRH, 8 * KB, Geometry(rows_per_bank=64), puf_address=60)


def test_rejects_unknown_type():
    with pytest.raises(ConfigurationError):
        build_row_pattern("TRRH", 4 * KB, G)


def test_hammer_interval_fit_points():
    assert hammer_interval(2) == pytest.approx(6e-6, abs=1e-12)
    assert hammer_interval(17) == pytest.approx(8e-6, abs=1e-8)
    assert hammer_interval(32) == pytest.approx(10e-6, abs=1e-12)


def test_hammer_interval_extrapolation_flag():
    assert not interval_extrapolated(2)
    assert not interval_extrapolated(17)
    assert interval_extrapolated(33)
    assert interval_extrapolated(1)


@given(st.integers(1, 500))
def test_hammer_interval_increasing(n):
    assert hammer_interval(n + 1) > hammer_interval(n)


def test_memory_report_figures():
    s = build_row_pattern(SSRH, 128 * KB, G).to_dict()
    d = build_row_pattern(DSRH, 128 * KB, G).to_dict()
    assert s["hammer_rows"] and d["pattern"].startswith("HVHV")
    assert 1 - len(s["hammer_rows"]) / len(d["hammer_rows"]) == pytest.approx(16 / 33)
    assert 1 - s["footprint_bytes"] / d["footprint_bytes"] == pytest.approx(16 / 65)
