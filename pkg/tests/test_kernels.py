import numpy as np
import pytest

from hammerpuf import kernels
from hammerpuf.engine import PufConfig, simulate_query

compiled = pytest.mark.skipif("compiled" not in kernels.BACKENDS,
                              reason="compiled extension not built")


def _inputs(n_rows=4, row_bits=4096):
    keys = np.arange(1, n_rows + 1, dtype=np.uint64) * np.uint64(0x1234567)
    rng = np.random.default_rng(5)
    lr = rng.normal(5.0, 1.2, n_rows * row_bits)
    hr = np.where(rng.random(n_rows * row_bits) < 0.05, rng.lognormal(-5, 0.5, n_rows * row_bits), 0)
    ch = (rng.random(n_rows * row_bits) < 0.7).astype(np.uint8)
    return keys, row_bits, lr, hr, ch


def test_active_backend_is_known():
    assert kernels.BACKEND in kernels.BACKENDS
    assert kernels.get_backend() is kernels.BACKENDS[kernels.BACKEND]
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@compiled
def test_fields_identical_across_backends():
    c, p = kernels.get_backend("compiled"), kernels.get_backend("python")
    keys, row_bits, *_ = _inputs()
    np.testing.assert_array_equal(c.uniform_field(keys, row_bits), p.uniform_field(keys, row_bits))
    np.testing.assert_array_equal(c.normal_field(keys, row_bits, 1.5, 0.7),
                                  p.normal_field(keys, row_bits, 1.5, 0.7))


@compiled
@pytest.mark.parametrize("noise", [0.0, 0.05])
def test_flip_kernel_identical_across_backends(noise):
    c, p = kernels.get_backend("compiled"), kernels.get_backend("python")
    args = _inputs()
    a = c.flip_kernel(*args, noise, 1.3, 1 / 120)
    b = p.flip_kernel(*args, noise, 1.3, 1 / 120)
    assert a.sum() > 0
    np.testing.assert_array_equal(a, b)


@compiled
def test_query_identical_across_backends(device, monkeypatch):
    cfg = PufConfig(puf_size=32 * 1024)
    ref = simulate_query(device, cfg, 99)
    monkeypatch.setattr(kernels, "_impl", kernels.get_backend("python"))
    assert simulate_query(device, cfg, 99).readout == ref.readout


def test_uniform_field_open_interval():
    u = kernels.uniform_field(np.arange(8, dtype=np.uint64), 8192)
    assert u.min() > 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.01
