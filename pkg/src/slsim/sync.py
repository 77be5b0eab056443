"""Receiver acquisition chain: time-domain primary-sync search, identity
detection, carrier-frequency-offset estimation, broadcast decode, and the
synchronization state machine.

Detection correlates the stream against the time-domain waveforms of both
primary-sync candidates and takes the weaker of the two repeated sync
symbols' normalized correlations, which suppresses single-symbol ghost
peaks while staying noncoherent, so moderate frequency offsets do not
defeat the search.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache

import numpy as np

from slsim.numerology import ResourceGrid, SlotAddress
from slsim.ofdm import OfdmConfig, demodulate
from slsim.psbch import (
    PsbchPayload,
    SPSS_SYMBOLS,
    SSSS_SYMBOLS,
    SsbLayout,
    decode_ssb_slot,
)
from slsim.sequences import NID1_RANGE, SlssId, gen_spss, gen_ssss

CFO_METRIC_GAIN = 4.3 / np.pi  # estimator output scale; slope calibrated in tests


class SyncPhase(Enum):
    SEARCHING = "searching"
    SLSS_DETECTED = "slss_detected"
    SYNCHRONIZED = "synchronized"


@dataclass(frozen=True)
class CorrelationResult:
    best_lag: int          # start of the first sync symbol's data portion
    peak_metric: float     # normalized correlation magnitude in [0, 1]
    nid2: int


@dataclass(frozen=True)
class SyncState:
    phase: SyncPhase = SyncPhase.SEARCHING
    slss_id: SlssId | None = None
    timing_offset: int = 0          # sample index of the sync slot start
    cfo_metric: float = 0.0         # raw estimator output
    cfo_hz: float = 0.0
    peak_metric: float = 0.0
    current: SlotAddress | None = None
    payload: PsbchPayload | None = None


@dataclass(frozen=True)
class SyncConfig:
    detection_threshold: float = 0.5
    psbch_retry_budget: int = 4
    apply_cfo_correction: bool = True


def _spss_time_template(cfg: OfdmConfig, layout: SsbLayout, nid2: int) -> np.ndarray:
    """Time waveform of one primary-sync symbol (no cyclic prefix)."""
    freq = np.zeros(cfg.fft_size, dtype=np.complex128)
    bins = cfg.subcarrier_bins()[layout.sync_subcarriers()]
    freq[bins] = gen_spss(nid2)
    return np.fft.ifft(freq, norm="ortho")


@lru_cache(maxsize=8)
def _templates_cached(cfg: OfdmConfig,
                      layout: SsbLayout) -> tuple[np.ndarray, np.ndarray]:
    return (_spss_time_template(cfg, layout, 0),
            _spss_time_template(cfg, layout, 1))


def _fft_correlate(x: np.ndarray, template: np.ndarray) -> np.ndarray:
    """Complex valid-mode cross-correlation of ``x`` with ``template``."""
    n = x.size
    m = template.size
    size = 1 << int(np.ceil(np.log2(n + m)))
    fx = np.fft.fft(x, size)
    ft = np.fft.fft(np.conj(template[::-1]), size)
    full = np.fft.ifft(fx * ft)
    return full[m - 1:n]


def _sync_symbol_stride(cfg: OfdmConfig) -> int:
    """Samples between the data portions of the two repeated sync symbols."""
    return cfg.cp_lengths[SPSS_SYMBOLS[1]] + cfg.fft_size


def slot_start_from_peak(lag: int, cfg: OfdmConfig) -> int:
    """Slot start sample given a correlation peak on the first sync symbol."""
    cps = cfg.cp_lengths
    lead = sum(cps[s] + cfg.fft_size for s in range(SPSS_SYMBOLS[0]))
    return lag - lead - cps[SPSS_SYMBOLS[0]]


def detect_spss(samples: np.ndarray, cfg: OfdmConfig,
                layout: SsbLayout | None = None,
                threshold: float = 0.5) -> CorrelationResult | None:
    """Search the stream for either primary-sync candidate.

    The two sync symbols a slot apart are combined noncoherently; the
    normalized peak must clear ``threshold`` or no detection is declared.
    """
    samples = np.asarray(samples, dtype=np.complex128)
    layout = layout or SsbLayout(carrier_n_sc=cfg.n_subcarriers)
    stride = _sync_symbol_stride(cfg)
    nfft = cfg.fft_size
    if samples.size < stride + nfft:
        return None
    templates = _templates_cached(cfg, layout)
    energy = np.concatenate([[0.0], np.cumsum(np.abs(samples) ** 2)])
    win_energy = energy[nfft:] - energy[:-nfft]  # energy of each length-nfft window
    best: CorrelationResult | None = None
    for nid2, template in enumerate(templates):
        tnorm = np.linalg.norm(template)
        corr = np.abs(_fft_correlate(samples, template))
        norm = tnorm * np.sqrt(np.maximum(win_energy[:corr.size], 1e-30))
        single = corr / np.maximum(norm, 1e-30)
        n_lags = single.size - stride
        if n_lags <= 0:
            continue
        # both repetitions must match: taking the weaker window suppresses
        # the one-symbol-shifted ghosts where only one window aligns
        combined = np.minimum(single[:n_lags], single[stride:stride + n_lags])
        lag = int(np.argmax(combined))
        metric = float(combined[lag])
        if metric >= threshold and (best is None or metric > best.peak_metric):
            best = CorrelationResult(best_lag=lag, peak_metric=metric, nid2=nid2)
    return best


def detect_ssss(grid: ResourceGrid, nid2: int,
                layout: SsbLayout | None = None) -> tuple[int, float]:
    """Identify nid1 by correlating the secondary-sync REs of an aligned slot
    against all 336 candidates for the detected nid2."""
    layout = layout or SsbLayout(carrier_n_sc=grid.n_subcarriers)
    sync_sc = layout.sync_subcarriers()
    rx = grid.data[SSSS_SYMBOLS[0], sync_sc] + grid.data[SSSS_SYMBOLS[1], sync_sc]
    candidates = _ssss_bank(nid2)
    scores = np.abs(candidates @ np.conj(rx))
    nid1 = int(np.argmax(scores))
    denom = np.linalg.norm(rx) * np.sqrt(candidates.shape[1])
    return nid1, float(scores[nid1] / max(denom, 1e-30))


@lru_cache(maxsize=2)
def _ssss_bank(nid2: int) -> np.ndarray:
    return np.stack([gen_ssss(SlssId(nid1, nid2)) for nid1 in range(NID1_RANGE)])


def estimate_cfo(sss0: np.ndarray, sss1: np.ndarray, ref: np.ndarray) -> float:
    """Frequency-offset metric from the two received secondary-sync symbols.

    With d the receiver-side reference sequence,
    ``y = sum d(n) Im(sss0(n)) + d(n) Im(sss1(n))``,
    ``x`` likewise over real parts, and the metric is
    ``(4.3 / pi) * atan2(y, x)``.
    """
    sss0 = np.asarray(sss0)
    sss1 = np.asarray(sss1)
    ref = np.asarray(ref)
    y = float(np.sum(ref * sss0.imag) + np.sum(ref * sss1.imag))
    x = float(np.sum(ref * sss0.real) + np.sum(ref * sss1.real))
    if x == 0.0 and y == 0.0:
        raise ValueError("frequency-offset angle undefined: zero correlation")
    return CFO_METRIC_GAIN * float(np.arctan2(y, x))


def estimate_cfo_from_slot(grid: ResourceGrid, slss_id: SlssId,
                           layout: SsbLayout | None = None) -> float:
    """Offset metric from an aligned slot: the first secondary-sync symbol's
    correlation phase derotates both symbols, so the metric depends only on
    the symbol-to-symbol phase progression."""
    layout = layout or SsbLayout(carrier_n_sc=grid.n_subcarriers)
    sync_sc = layout.sync_subcarriers()
    ref = gen_ssss(slss_id)
    r0 = grid.data[SSSS_SYMBOLS[0], sync_sc]
    r1 = grid.data[SSSS_SYMBOLS[1], sync_sc]
    phase = np.angle(np.sum(ref * r0))
    rot = np.exp(-1j * phase)
    return estimate_cfo(r0 * rot, r1 * rot, ref)


def cfo_metric_to_hz(metric: float, cfg: OfdmConfig) -> float:
    """Convert the estimator metric to Hz using its calibrated linear slope."""
    stride_s = _sync_symbol_stride(cfg) / cfg.numerology.sample_rate
    return metric / (4.3 * stride_s)


def apply_cfo_correction(samples: np.ndarray, cfo_hz: float, sample_rate: float,
                         start_index: int = 0) -> np.ndarray:
    """Derotate the stream by ``cfo_hz`` (continuous phase from start_index)."""
    if not np.isfinite(cfo_hz):
        raise ValueError("frequency offset must be finite")
    n = np.arange(start_index, start_index + samples.size)
    return samples * np.exp(-2j * np.pi * cfo_hz * n / sample_rate)


def apply_timing(samples: np.ndarray, offset: int) -> np.ndarray:
    """Re-index the stream to start at ``offset``."""
    if offset < 0 or offset > samples.size:
        raise ValueError(f"timing offset {offset} outside the {samples.size}-sample buffer")
    return samples[offset:]


class Synchronizer:
    """Single-owner receiver context driving the acquisition state machine.

    Feed samples with :meth:`step`; the state moves Searching ->
    SlssDetected on a sync-sequence hit and on to Synchronized once the
    broadcast payload decodes, after which ``current`` carries the
    transmitter's frame/slot and ``timing_offset`` the slot boundary.
    """

    def __init__(self, ofdm_cfg: OfdmConfig, layout: SsbLayout | None = None,
                 config: SyncConfig | None = None):
        self.ofdm_cfg = ofdm_cfg
        self.layout = layout or SsbLayout(carrier_n_sc=ofdm_cfg.n_subcarriers)
        self.config = config or SyncConfig()
        self.state = SyncState()
        self._buffer = np.zeros(0, dtype=np.complex128)
        self._buffer_start = 0  # absolute index of _buffer[0]
        self._retries = 0

    def step(self, samples: np.ndarray) -> SyncState:
        """Ingest a sample chunk and advance the state machine."""
        samples = np.asarray(samples, dtype=np.complex128)
        self._buffer = np.concatenate([self._buffer, samples])
        if self.state.phase is not SyncPhase.SYNCHRONIZED:
            self._search()
        return self.state

    def buffer_view(self) -> tuple[np.ndarray, int]:
        """Remaining buffered samples and the absolute index of their start."""
        return self._buffer, self._buffer_start

    def _discard(self, n: int) -> None:
        n = min(n, self._buffer.size)
        self._buffer = self._buffer[n:]
        self._buffer_start += n

    def _search(self) -> None:
        cfg = self.ofdm_cfg
        slot_len = cfg.samples_per_slot
        while True:
            result = detect_spss(self._buffer, cfg, self.layout,
                                 self.config.detection_threshold)
            if result is None:
                # keep an overlap tail so a block boundary cannot hide a peak
                keep = 2 * slot_len
                if self._buffer.size > 3 * slot_len:
                    self._discard(self._buffer.size - keep)
                return
            windows_end = result.best_lag + _sync_symbol_stride(cfg) + cfg.fft_size
            if windows_end > self._buffer.size:
                return  # wait until both correlation windows are complete
            slot_start = slot_start_from_peak(result.best_lag, cfg)
            if slot_start < 0:
                self._discard(result.best_lag + 1)
                continue
            if slot_start + slot_len > self._buffer.size:
                return  # wait for the rest of the slot
            if self._attempt_decode(result, slot_start):
                return
            # stay on the detected identity for a few occasions, then give up
            self._retries += 1
            if self._retries > self.config.psbch_retry_budget:
                self._retries = 0
                self.state = replace(self.state, phase=SyncPhase.SEARCHING)
            self._discard(result.best_lag + 1)

    def _attempt_decode(self, result: CorrelationResult, slot_start: int) -> bool:
        cfg = self.ofdm_cfg
        slot = self._buffer[slot_start:slot_start + cfg.samples_per_slot]
        grid = demodulate(slot, cfg)
        nid1, _ = detect_ssss(grid, result.nid2, self.layout)
        slss_id = SlssId(nid1=nid1, nid2=result.nid2)
        cfo_metric = estimate_cfo_from_slot(grid, slss_id, self.layout)
        cfo_hz = cfo_metric_to_hz(cfo_metric, cfg)
        self.state = replace(
            self.state, phase=SyncPhase.SLSS_DETECTED, slss_id=slss_id,
            cfo_metric=cfo_metric, cfo_hz=cfo_hz, peak_metric=result.peak_metric,
        )
        if self.config.apply_cfo_correction and abs(cfo_hz) > 1.0:
            corrected = apply_cfo_correction(slot, cfo_hz,
                                             cfg.numerology.sample_rate)
            grid = demodulate(corrected, cfg)
        payload, crc_ok = decode_ssb_slot(grid, slss_id, self.layout)
        if not crc_ok:
            return False
        self._retries = 0
        self.state = SyncState(
            phase=SyncPhase.SYNCHRONIZED,
            slss_id=slss_id,
            timing_offset=self._buffer_start + slot_start,
            cfo_metric=cfo_metric,
            cfo_hz=cfo_hz,
            peak_metric=result.peak_metric,
            current=SlotAddress(dfn=payload.dfn, slot=payload.slot_index),
            payload=payload,
        )
        self._discard(slot_start)
        return True


def sync_step(synchronizer: Synchronizer, samples: np.ndarray) -> SyncState:
    """Functional wrapper over :meth:`Synchronizer.step`."""
    return synchronizer.step(samples)


def correlation_trace(samples: np.ndarray, cfg: OfdmConfig,
                      layout: SsbLayout | None = None) -> np.ndarray:
    """(lag, metric) rows of the combined search metric over one window,
    taking the stronger primary-sync candidate per lag."""
    samples = np.asarray(samples, dtype=np.complex128)
    layout = layout or SsbLayout(carrier_n_sc=cfg.n_subcarriers)
    stride = _sync_symbol_stride(cfg)
    nfft = cfg.fft_size
    templates = _templates_cached(cfg, layout)
    energy = np.concatenate([[0.0], np.cumsum(np.abs(samples) ** 2)])
    win_energy = energy[nfft:] - energy[:-nfft]
    best = None
    for template in templates:
        corr = np.abs(_fft_correlate(samples, template))
        norm = np.linalg.norm(template) * np.sqrt(
            np.maximum(win_energy[:corr.size], 1e-30))
        single = corr / np.maximum(norm, 1e-30)
        n_lags = single.size - stride
        if n_lags <= 0:
            raise ValueError("window shorter than the two-symbol search span")
        combined = np.minimum(single[:n_lags], single[stride:stride + n_lags])
        best = combined if best is None else np.maximum(best, combined)
    return np.column_stack([np.arange(best.size), best])


def write_correlation_trace(path, samples: np.ndarray, cfg: OfdmConfig,
                            layout: SsbLayout | None = None) -> None:
    """Dump the search metric as ``lag,metric`` CSV rows for plotting."""
    trace = correlation_trace(samples, cfg, layout)
    with open(path, "w") as fh:
        fh.write("lag,metric\n")
        for lag, metric in trace:
            fh.write(f"{int(lag)},{metric:.6f}\n")
