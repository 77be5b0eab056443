"""CP-OFDM modulation of resource grids to baseband samples and back.

Transforms are unitary (1/sqrt(N) scaling), so grid-domain power equals
sample-domain power and the round trip has exactly unit gain.  Active
subcarriers sit centered around DC; the DC bin is used.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from slsim.numerology import ConfigError, Numerology, ResourceGrid, SYMBOLS_PER_SLOT

_REF_RATE = 30.72e6  # rate at which the base CP pattern is 144/16 samples


@dataclass(frozen=True)
class OfdmConfig:
    """Sampling geometry of one carrier at a fixed numerology.

    The DC bin carries a subcarrier by default; set ``null_dc`` to skip it
    and spread the active subcarriers around it instead.
    """

    numerology: Numerology
    n_subcarriers: int
    null_dc: bool = False

    def __post_init__(self):
        num = self.numerology
        if num.mu not in (0, 1):
            raise ConfigError(
                f"waveform generation supports mu 0 and 1 only, got {num.mu}"
            )
        if self.n_subcarriers > num.fft_size:
            raise ConfigError(
                f"{self.n_subcarriers} subcarriers exceed FFT size {num.fft_size}"
            )
        expected_rate = num.fft_size * num.scs_khz * 1e3
        if abs(expected_rate - num.sample_rate) > 1.0:
            raise ConfigError(
                f"sample rate {num.sample_rate} inconsistent with "
                f"FFT {num.fft_size} x {num.scs_khz} kHz"
            )
        if sum(self.cp_lengths) + SYMBOLS_PER_SLOT * num.fft_size != num.samples_per_slot:
            raise ConfigError("cyclic prefixes do not close the slot sample budget")

    @property
    def fft_size(self) -> int:
        return self.numerology.fft_size

    @property
    def cp_lengths(self) -> tuple[int, ...]:
        """Per-symbol CP lengths; the first symbol of each half-subframe is longer."""
        num = self.numerology
        scale = num.sample_rate / _REF_RATE
        base = 144 * scale / (2 ** num.mu)
        extra = 16 * scale
        if base != int(base) or extra != int(extra):
            raise ConfigError("sample rate does not give integer CP lengths")
        cps = [int(base)] * SYMBOLS_PER_SLOT
        half_subframe_symbols = 7 * (2 ** num.mu)
        for sym in range(0, SYMBOLS_PER_SLOT, half_subframe_symbols):
            cps[sym] += int(extra)
        return tuple(cps)

    @property
    def samples_per_slot(self) -> int:
        return self.numerology.samples_per_slot

    def symbol_sample_offsets(self) -> np.ndarray:
        """Start sample of each symbol's CP within the slot."""
        cps = self.cp_lengths
        sizes = [cp + self.fft_size for cp in cps]
        return np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)

    def subcarrier_bins(self) -> np.ndarray:
        """FFT bin index of each active subcarrier, centered around DC."""
        k = np.arange(self.n_subcarriers) - self.n_subcarriers // 2
        if self.null_dc:
            k = np.where(k >= 0, k + 1, k)
        return np.mod(k, self.fft_size)


def modulate(grid: ResourceGrid, cfg: OfdmConfig) -> np.ndarray:
    """One slot of complex baseband samples from a resource grid."""
    if grid.n_subcarriers > cfg.fft_size:
        raise ConfigError(
            f"grid of {grid.n_subcarriers} subcarriers exceeds FFT size {cfg.fft_size}"
        )
    if grid.n_subcarriers != cfg.n_subcarriers:
        raise ConfigError(
            f"grid has {grid.n_subcarriers} subcarriers, config expects {cfg.n_subcarriers}"
        )
    nfft = cfg.fft_size
    bins = cfg.subcarrier_bins()
    freq = np.zeros((grid.n_symbols, nfft), dtype=np.complex128)
    freq[:, bins] = grid.data
    time = np.fft.ifft(freq, axis=1, norm="ortho")
    out = np.empty(cfg.samples_per_slot, dtype=np.complex128)
    pos = 0
    for sym, cp in enumerate(cfg.cp_lengths):
        out[pos:pos + cp] = time[sym, nfft - cp:]
        out[pos + cp:pos + cp + nfft] = time[sym]
        pos += cp + nfft
    return out


def demodulate(samples: np.ndarray, cfg: OfdmConfig, timing_offset: int = 0) -> ResourceGrid:
    """Recover one slot's resource grid from samples starting at ``timing_offset``."""
    samples = np.asarray(samples)
    if timing_offset < 0 or timing_offset + cfg.samples_per_slot > samples.size:
        raise ValueError(
            f"need {cfg.samples_per_slot} samples at offset {timing_offset}, "
            f"stream has {samples.size}"
        )
    nfft = cfg.fft_size
    bins = cfg.subcarrier_bins()
    grid = ResourceGrid(cfg.n_subcarriers // 12)
    pos = timing_offset
    windows = np.empty((SYMBOLS_PER_SLOT, nfft), dtype=np.complex128)
    for sym, cp in enumerate(cfg.cp_lengths):
        windows[sym] = samples[pos + cp:pos + cp + nfft]
        pos += cp + nfft
    freq = np.fft.fft(windows, axis=1, norm="ortho")
    grid.data[:] = freq[:, bins]
    return grid


def write_iq_file(path: str | Path, samples: np.ndarray) -> None:
    """Dump samples as interleaved little-endian float32 I/Q pairs."""
    samples = np.asarray(samples, dtype=np.complex128)
    interleaved = np.empty(2 * samples.size, dtype="<f4")
    interleaved[0::2] = samples.real
    interleaved[1::2] = samples.imag
    interleaved.tofile(str(path))


def read_iq_file(path: str | Path) -> np.ndarray:
    raw = np.fromfile(str(path), dtype="<f4")
    return (raw[0::2] + 1j * raw[1::2]).astype(np.complex128)
