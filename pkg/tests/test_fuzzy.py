import itertools
import json

import numpy as np
import pytest

from hammerpuf.dram import derive_device
from hammerpuf.engine import PufConfig, simulate_query
from hammerpuf.errors import ConfigurationError, FormatError, ReconstructionFailure, UsageError
from hammerpuf.fuzzy import (
    FeParams,
    HelperData,
    enroll,
    majority_decode,
    majority_vector,
    reconstruct,
    save_helper,
)

CFG = PufConfig(puf_size=32 * 1024)


@pytest.fixture(scope="module")
def enrolled(request):
    from hammerpuf.dram import ModelParams
    dev = derive_device(1, params=ModelParams.default())
    ms = [simulate_query(dev, CFG, s) for s in range(5)]
    key, helper = enroll(ms, rng_seed=7)
    return dev, ms, key, helper


def test_majority_vector_tie_keeps_iv(device, small_config):
    ms = [simulate_query(device, small_config, s) for s in range(4)]
    maj = majority_vector(ms)
    bits = np.stack([m.readout_bits for m in ms]).sum(axis=0)
    iv = np.unpackbits(np.full(small_config.puf_size, small_config.puf_row_iv, np.uint8))
    np.testing.assert_array_equal(maj[bits == 2], iv[bits == 2])
    np.testing.assert_array_equal(maj[bits > 2], 1)
    np.testing.assert_array_equal(maj[bits < 2], 0)


@pytest.mark.parametrize("rho", [3, 5, 7])
def test_majority_decode_is_nearest_codeword(rho):
    patterns = np.array(list(itertools.product([0, 1], repeat=rho)), dtype=np.uint8)
    decoded = majority_decode(patterns)
    for p, d in zip(patterns, decoded):
        dist = [np.count_nonzero(p != b) for b in (0, 1)]
        assert d == int(np.argmin(dist))


@pytest.mark.parametrize("key_bits", [8])
@pytest.mark.parametrize("rho", [3, 5, 7])
def test_decoding_radius(enrolled, key_bits, rho):
    """Any noise of weight <= (rho-1)/2 per block is corrected; one more is not."""
    dev, ms, _, _ = enrolled
    params = FeParams(key_bits=key_bits, repetition=rho)
    key, helper = enroll(ms, params, rng_seed=1)
    assert reconstruct(ms, helper) == key
    order = np.random.default_rng([params.fe_seed, 1]).permutation(params.code_bits)
    t = (rho - 1) // 2
    for noise in itertools.product([0, 1], repeat=rho):
        w = sum(noise)
        flipped = helper.mask.copy()
        flipped[order[:rho]] ^= np.array(noise, dtype=np.uint8)  # block 0
        h2 = HelperData(helper.positions, flipped, helper.key_check, params,
                        helper.config_fingerprint, helper.n_cells)
        if w <= t:
            assert reconstruct(ms, h2) == key
        else:
            with pytest.raises(ReconstructionFailure):
                reconstruct(ms, h2)


def test_round_trip_zero_noise(enrolled):
    dev, ms, key, helper = enrolled
    assert len(key) == 16
    assert reconstruct(ms, helper) == key
    assert reconstruct(ms[0], helper) == key


def test_enroll_deterministic_with_seed(enrolled):
    _, ms, key, helper = enrolled
    key2, helper2 = enroll(ms, rng_seed=7)
    assert key2 == key and save_helper(helper2) == save_helper(helper)
    key3, _ = enroll(ms)
    assert len(key3) == 16


def test_helper_does_not_contain_key_or_positions_bias(enrolled):
    _, ms, key, helper = enrolled
    ref = majority_vector(ms)[helper.positions]
    assert 0.4 < ref.mean() < 0.6  # balanced reference bits
    assert key.hex() not in save_helper(helper)


def test_helper_serialisation(enrolled):
    _, ms, key, helper = enrolled
    again = HelperData.from_dict(json.loads(save_helper(helper)))
    np.testing.assert_array_equal(again.positions, helper.positions)
    np.testing.assert_array_equal(again.mask, helper.mask)
    assert reconstruct(ms, again) == key
    bad = json.loads(save_helper(helper))
    bad["version"] = 9
    with pytest.raises(FormatError):
        HelperData.from_dict(bad)
    bad = json.loads(save_helper(helper))
    bad["positions"] = bad["positions"][:-1]
    with pytest.raises(FormatError):
        HelperData.from_dict(bad)


def test_fresh_measurements_reconstruct(enrolled):
    dev, _, key, helper = enrolled
    ok = sum(reconstruct(simulate_query(dev, CFG, 1000 + s), helper) == key for s in range(10))
    assert ok == 10


def test_config_mismatch_is_usage_error(enrolled):
    dev, _, _, helper = enrolled
    with pytest.raises(UsageError):
        reconstruct(simulate_query(dev, CFG.replace(rh_time=60.0), 1), helper)


def test_other_device_rejected(enrolled, params):
    _, _, _, helper = enrolled
    for seed in range(2, 7):
        m = simulate_query(derive_device(seed, params=params), CFG, 0)
        with pytest.raises(ReconstructionFailure):
            reconstruct(m, helper)


def test_synthetic_bit_error_rate():
    """Independent bit errors at p = 0.002 almost never break a 7x repetition."""
    rng = np.random.default_rng(3)
    p, rho, k = 0.002, 7, 128
    failures = 0
    for _ in range(1000):
        noise = (rng.random((k, rho)) < p).astype(np.uint8)
        failures += bool(majority_decode(noise).any())
    assert failures == 0


def test_not_enough_cells():
    with pytest.raises(ConfigurationError):
        FeParams(repetition=4)
    dev = derive_device(1)
    m = simulate_query(dev, PufConfig(puf_size=4096, rh_time=5.0), 0)
    with pytest.raises(ConfigurationError):
        enroll([m], FeParams())
