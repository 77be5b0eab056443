"""Metrics arithmetic, sessions over both transports, and sweep determinism."""

import numpy as np
import pytest

from slsim.config import SimConfig
from slsim.harness import (
    LinkStats,
    atten_csv,
    bler_csv,
    compute_bler,
    run_atten_point,
    run_bler_point,
    run_session,
    sweep_bler,
    unit_sim,
    wilson_interval,
)
from slsim.numerology import SlotAddress
from slsim.psbch import PsbchPayload, build_ssb_slot, decode_ssb_slot
from slsim.rfsim import ChannelModel

# the nine (received, decoded, bler) rows of the attenuator bench table
BENCH_ROWS = [
    (0, 1105, 4, 1.00),
    (5, 1111, 0, 1.00),
    (10, 1068, 47, 0.96),
    (15, 673, 668, 0.01),
    (20, 668, 668, 0.00),
    (25, 679, 671, 0.01),
    (30, 633, 604, 0.05),
    (35, 798, 665, 0.17),
    (39, 359, 161, 0.55),
]


class TestComputeBler:
    @pytest.mark.parametrize("atten,received,decoded,expected", BENCH_ROWS)
    def test_bench_rows(self, atten, received, decoded, expected):
        assert compute_bler(received, decoded) == pytest.approx(expected, abs=0.005)

    def test_perfect_decoding(self):
        assert compute_bler(500, 500) == 0.0

    def test_zero_received_rejected(self):
        with pytest.raises(ValueError):
            compute_bler(0, 0)

    def test_decoded_beyond_received_rejected(self):
        with pytest.raises(ValueError):
            compute_bler(10, 11)


class TestWilson:
    def test_contains_point_estimate(self):
        lo, hi = wilson_interval(30, 100)
        assert lo < 0.3 < hi

    def test_degenerate_extremes_stay_in_unit_interval(self):
        lo, hi = wilson_interval(0, 50)
        assert lo == pytest.approx(0.0, abs=1e-12) and hi < 0.12
        lo, hi = wilson_interval(50, 50)
        assert lo > 0.88 and hi == pytest.approx(1.0, abs=1e-12)

    def test_shrinks_with_samples(self):
        w100 = np.subtract(*reversed(wilson_interval(50, 100)))
        w1000 = np.subtract(*reversed(wilson_interval(500, 1000)))
        assert w1000 < w100


class TestLinkStats:
    def test_bler_property(self):
        stats = LinkStats(received_count=200, decoded_count=150)
        assert stats.bler == pytest.approx(0.25)

    def test_rsrp_nan_when_empty(self):
        assert np.isnan(LinkStats().ssb_rsrp_dbfs)


class TestSessions:
    @pytest.mark.parametrize("transport", ["inproc", "socket"])
    def test_identity_channel_session(self, transport):
        config = SimConfig(data_slots=8)
        report = run_session(config, ChannelModel(seed=1), transport=transport)
        assert report.synchronized
        assert report.slss_ok
        assert report.current == SlotAddress(dfn=2, slot=4)
        assert report.stats.received_count == 8
        assert report.stats.bler == 0.0
        assert report.stats.ssb_count >= 1
        assert report.stats.pssch_rsrp_dbfs == pytest.approx(0.0, abs=0.1)

    def test_noisy_session_still_synchronizes(self):
        config = SimConfig(data_slots=4, seed=7)
        report = run_session(config, ChannelModel(noise_floor_dbfs=-10.0, seed=7))
        assert report.synchronized
        assert report.current == SlotAddress(dfn=2, slot=4)

    def test_hundred_sync_blocks_decode_on_identity_link(self):
        config = SimConfig()
        slss_id = config.slss_id()
        layout = config.ssb_layout()
        decoded = 0
        for k in range(100):
            payload = PsbchPayload(in_coverage=0, tdd_config=0,
                                   dfn=(2 + k // 2) % 1024, slot_index=4)
            grid = build_ssb_slot(payload, slss_id, layout)
            out, ok = decode_ssb_slot(grid, slss_id, layout)
            decoded += ok and out == payload
        assert decoded >= 99


class TestSweeps:
    def test_bler_point_perfect_at_high_snr(self):
        point = run_bler_point(SimConfig(), mcs=0, snr_db=30.0, slots=25)
        assert point.decoded == point.received == 25
        assert point.bler == 0.0

    def test_atten_point_39db_lands_in_bench_band(self):
        point = run_atten_point(SimConfig(), 39.0, slots=120)
        assert 0.3 < point.bler < 0.8

    def test_csv_replay_determinism(self):
        config = SimConfig(seed=33)
        runs = [
            bler_csv(sweep_bler(config, [0], [2.0, 6.0], slots_per_point=15))
            for _ in range(2)
        ]
        assert runs[0] == runs[1]

    def test_csv_transport_equivalence(self):
        config = SimConfig(seed=33)
        inproc = bler_csv(sweep_bler(config, [0], [4.0], 10, transport="inproc"))
        sock = bler_csv(sweep_bler(config, [0], [4.0], 10, transport="socket"))
        assert inproc == sock

    def test_jobs_do_not_change_results(self):
        config = SimConfig(seed=5)
        serial = bler_csv(sweep_bler(config, [0], [3.0, 8.0], 10, jobs=1))
        parallel = bler_csv(sweep_bler(config, [0], [3.0, 8.0], 10, jobs=2))
        assert serial == parallel

    def test_atten_csv_shape(self):
        points = [run_atten_point(SimConfig(), a, slots=10) for a in (15.0, 25.0)]
        text = atten_csv(points)
        lines = text.strip().splitlines()
        assert lines[0] == "atten_db,ssb_rsrp_dbfs,pssch_rsrp_dbfs,received,decoded,bler"
        assert len(lines) == 3


class TestUnitSim:
    def test_all_channels_pass(self):
        results = unit_sim(SimConfig(data_slots=2))
        assert all(results.values()), results
