"""Polar encode/decode: exact round trips, failure signalling, and an AWGN
Monte-Carlo sanity point."""

import numpy as np
import pytest

from slsim.coding.crc import crc24_attach
from slsim.coding.polar import PolarConfig, polar_decode, polar_encode

BROADCAST_CFG = PolarConfig(k=56, e=1782)   # 32 info + 24 crc
CONTROL_CFG = PolarConfig(k=59, e=600)      # 35 info + 24 crc


def clean_llrs(coded: np.ndarray, scale: float = 10.0) -> np.ndarray:
    return scale * (1.0 - 2.0 * coded.astype(np.float64))


class TestConfig:
    def test_mother_code_capped(self):
        assert BROADCAST_CFG.n == 512
        assert CONTROL_CFG.n == 512

    def test_k_exceeding_e_rejected(self):
        with pytest.raises(ValueError):
            PolarConfig(k=59, e=40)

    def test_e_too_small_for_repetition(self):
        with pytest.raises(ValueError):
            PolarConfig(k=59, e=60)  # needs N=64 > E

    def test_non_power_of_two_list(self):
        with pytest.raises(ValueError):
            PolarConfig(k=59, e=600, list_size=6)

    def test_wrong_input_sizes(self):
        with pytest.raises(ValueError):
            polar_encode(np.zeros(58, dtype=np.int8), CONTROL_CFG)
        with pytest.raises(ValueError):
            polar_decode(np.zeros(599), CONTROL_CFG)


class TestRoundTrip:
    def test_noiseless_control_payloads(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            payload = crc24_attach(rng.integers(0, 2, 35).astype(np.int8))
            bits, ok = polar_decode(clean_llrs(polar_encode(payload, CONTROL_CFG)),
                                    CONTROL_CFG)
            assert ok
            assert np.array_equal(bits, payload)

    def test_broadcast_geometry_encodes(self):
        rng = np.random.default_rng(1)
        payload = crc24_attach(rng.integers(0, 2, 32).astype(np.int8))
        coded = polar_encode(payload, BROADCAST_CFG)
        assert coded.size == 1782
        bits, ok = polar_decode(clean_llrs(coded), BROADCAST_CFG)
        assert ok and np.array_equal(bits, payload)

    def test_distinct_inputs_distinct_codewords(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            a = crc24_attach(rng.integers(0, 2, 35).astype(np.int8))
            b = crc24_attach(rng.integers(0, 2, 35).astype(np.int8))
            if np.array_equal(a, b):
                continue
            assert not np.array_equal(polar_encode(a, CONTROL_CFG),
                                      polar_encode(b, CONTROL_CFG))


class TestFailureSignalling:
    def test_erasure_input_fails_crc(self):
        # all-zero LLRs carry no information; the decoder must say so
        failures = 0
        trials = 1000
        for _ in range(trials):
            _, ok = polar_decode(np.zeros(CONTROL_CFG.e), CONTROL_CFG)
            failures += not ok
        assert failures >= 0.99 * trials

    def test_high_snr_awgn_block_errors_rare(self):
        # Es/N0 = 10 dB on BPSK'd coded bits at rate 56/1782
        rng = np.random.default_rng(3)
        sigma = 10 ** (-10 / 20)
        errors = 0
        blocks = 10_000
        payload = crc24_attach(rng.integers(0, 2, 32).astype(np.int8))
        coded = polar_encode(payload, BROADCAST_CFG)
        symbols = 1.0 - 2.0 * coded.astype(np.float64)
        for _ in range(blocks):
            rx = symbols + sigma * rng.standard_normal(symbols.size)
            bits, ok = polar_decode(2.0 * rx / sigma ** 2, BROADCAST_CFG)
            errors += not (ok and np.array_equal(bits, payload))
        assert errors / blocks < 1e-3
