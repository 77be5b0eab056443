"""CRC attachment/checking against an independent integer long-division oracle."""

import numpy as np
import pytest

from slsim.coding.crc import CRC24_LEN, CRC24_POLY, crc24_attach, crc24_check


def oracle_remainder(bits) -> list[int]:
    """Polynomial long division done on plain integers, bit by bit."""
    reg = 0
    for b in list(bits) + [0] * CRC24_LEN:
        reg = (reg << 1) | int(b)
        if reg >> CRC24_LEN:
            reg ^= (1 << CRC24_LEN) | CRC24_POLY
    return [(reg >> (CRC24_LEN - 1 - i)) & 1 for i in range(CRC24_LEN)]


class TestRoundTrip:
    def test_random_32bit_inputs(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            bits = rng.integers(0, 2, 32).astype(np.int8)
            out = crc24_attach(bits)
            assert out.size == 56
            assert crc24_check(out)

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            crc24_attach(np.array([], dtype=np.int8))

    def test_too_short_to_check(self):
        assert not crc24_check(np.zeros(24, dtype=np.int8))


class TestAgainstOracle:
    def test_all_zero_input(self):
        out = crc24_attach(np.zeros(32, dtype=np.int8))
        assert list(out[-24:]) == oracle_remainder([0] * 32)
        assert not out.any()  # zero-input remainder of this generator is zero

    def test_random_inputs_match_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            n = int(rng.integers(1, 200))
            bits = rng.integers(0, 2, n).astype(np.int8)
            assert list(crc24_attach(bits)[-24:]) == oracle_remainder(bits)


class TestErrorDetection:
    def test_every_single_bit_flip_detected(self):
        rng = np.random.default_rng(2)
        block = crc24_attach(rng.integers(0, 2, 32).astype(np.int8))
        for pos in range(56):
            corrupted = block.copy()
            corrupted[pos] ^= 1
            assert not crc24_check(corrupted), f"missed flip at {pos}"

    def test_sampled_double_bit_flips_detected(self):
        rng = np.random.default_rng(3)
        block = crc24_attach(rng.integers(0, 2, 32).astype(np.int8))
        for _ in range(10_000):
            i, j = rng.choice(56, size=2, replace=False)
            corrupted = block.copy()
            corrupted[i] ^= 1
            corrupted[j] ^= 1
            assert not crc24_check(corrupted)
