"""MCS table lookups and transport block sizing."""

import pytest

from slsim.coding.mcs import mcs_lookup, tbs_compute


class TestLookup:
    @pytest.mark.parametrize("index", [0, 5, 9])
    def test_paper_indices_are_qpsk(self, index):
        assert mcs_lookup(index).modulation_order == 2

    def test_rate_strictly_increases_within_modulation(self):
        by_order = {}
        for index in range(29):
            entry = mcs_lookup(index)
            by_order.setdefault(entry.modulation_order, []).append(entry.code_rate)
        for rates in by_order.values():
            assert all(a < b for a, b in zip(rates, rates[1:]))

    @pytest.mark.parametrize("index", [-1, 32])
    def test_out_of_range(self, index):
        with pytest.raises(ValueError):
            mcs_lookup(index)

    @pytest.mark.parametrize("index", [29, 30, 31])
    def test_reserved_indices(self, index):
        with pytest.raises(ValueError):
            mcs_lookup(index)


class TestTbs:
    def test_monotone_in_data_res(self):
        entry = mcs_lookup(5)
        sizes = [tbs_compute(n, entry) for n in range(500, 6000, 250)]
        assert all(a <= b for a, b in zip(sizes, sizes[1:]))

    def test_ordering_across_paper_mcs(self):
        n = 5000
        t0 = tbs_compute(n, mcs_lookup(0))
        t5 = tbs_compute(n, mcs_lookup(5))
        t9 = tbs_compute(n, mcs_lookup(9))
        assert t0 < t5 < t9

    def test_byte_aligned_and_positive(self):
        for index in (0, 5, 9, 16, 28):
            tbs = tbs_compute(5940, mcs_lookup(index))
            assert tbs > 0
            assert tbs % 8 == 0

    def test_rejects_empty_allocation(self):
        with pytest.raises(ValueError):
            tbs_compute(0, mcs_lookup(0))
