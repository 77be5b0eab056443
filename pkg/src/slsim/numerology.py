"""Numerology, frame/slot timing, the resource grid, and the sync-block schedule.

All timing is expressed against a monotonically increasing sample counter that
starts at zero when a simulation begins; frame and slot boundaries are derived
from it.  Only normal cyclic prefix is supported.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

SYMBOLS_PER_SLOT = 14
SUBCARRIERS_PER_RB = 12
DFN_RANGE = 1024  # 10-bit direct frame number
SSB_PERIOD_FRAMES = 16  # 160 ms at 10 ms per frame


class ConfigError(ValueError):
    """Raised for inconsistent or unsupported radio configurations."""


class FrequencyRange(Enum):
    FR1 = "FR1"
    FR2 = "FR2"


# Legal S-SSB counts per period, keyed by (frequency range, SCS in kHz).
_NUM_SSB_TABLE = {
    (FrequencyRange.FR1, 15): (1,),
    (FrequencyRange.FR1, 30): (1, 2),
    (FrequencyRange.FR1, 60): (1, 2, 4),
    (FrequencyRange.FR2, 60): (1, 2, 4, 8, 16, 32),
    (FrequencyRange.FR2, 120): (1, 2, 4, 8, 16, 32, 64),
}


def scs_from_mu(mu: int) -> int:
    """Subcarrier spacing in kHz for numerology index ``mu`` (0..3)."""
    if not 0 <= mu <= 3:
        raise ConfigError(f"numerology index must be in 0..3, got {mu}")
    return 15 * (2 ** mu)


@dataclass(frozen=True)
class Numerology:
    """Scalable OFDM numerology plus the sampling geometry used on top of it."""

    mu: int
    fft_size: int = 1024
    sample_rate_msps: float = 30.72
    cyclic_prefix: str = "normal"

    def __post_init__(self):
        scs_from_mu(self.mu)  # range check
        if self.cyclic_prefix != "normal":
            raise ConfigError(
                f"only normal cyclic prefix is supported, got {self.cyclic_prefix!r}"
            )

    @property
    def scs_khz(self) -> int:
        return scs_from_mu(self.mu)

    @property
    def slots_per_frame(self) -> int:
        return 10 * (2 ** self.mu)

    @property
    def slot_duration_ms(self) -> float:
        return 1.0 / (2 ** self.mu)

    @property
    def sample_rate(self) -> float:
        return self.sample_rate_msps * 1e6

    @property
    def samples_per_slot(self) -> int:
        n = self.sample_rate * self.slot_duration_ms * 1e-3
        n_int = int(round(n))
        if abs(n - n_int) > 1e-6:
            raise ConfigError(
                f"sample rate {self.sample_rate_msps} MS/s does not give an "
                f"integer number of samples per slot at mu={self.mu}"
            )
        return n_int


@dataclass(frozen=True)
class SlotAddress:
    """Position of one slot inside the 1024-frame direct-frame-number space."""

    dfn: int
    slot: int

    def validate(self, num: Numerology) -> "SlotAddress":
        if not 0 <= self.dfn < DFN_RANGE:
            raise ConfigError(f"dfn must be in 0..{DFN_RANGE - 1}, got {self.dfn}")
        if not 0 <= self.slot < num.slots_per_frame:
            raise ConfigError(
                f"slot must be in 0..{num.slots_per_frame - 1}, got {self.slot}"
            )
        return self

    def to_absolute_slot(self, num: Numerology) -> int:
        return self.dfn * num.slots_per_frame + self.slot

    def advance(self, n_slots: int, num: Numerology) -> "SlotAddress":
        """Slot address ``n_slots`` later, wrapping at the 1024-frame space."""
        total = self.to_absolute_slot(num) + n_slots
        total %= DFN_RANGE * num.slots_per_frame
        return SlotAddress(dfn=total // num.slots_per_frame,
                           slot=total % num.slots_per_frame)


class ResourceGrid:
    """One slot of resource elements: 14 symbols by ``12 * n_prb`` subcarriers.

    Amplitudes are dimensionless full-scale units; anything not explicitly
    mapped stays exactly zero.
    """

    def __init__(self, n_prb: int, n_symbols: int = SYMBOLS_PER_SLOT):
        if n_prb <= 0:
            raise ConfigError(f"n_prb must be positive, got {n_prb}")
        self.n_prb = n_prb
        self.n_symbols = n_symbols
        self.n_subcarriers = SUBCARRIERS_PER_RB * n_prb
        self.data = np.zeros((n_symbols, self.n_subcarriers), dtype=np.complex128)

    def __getitem__(self, key):
        return self.data[key]

    def __setitem__(self, key, value):
        self.data[key] = value

    def copy(self) -> "ResourceGrid":
        out = ResourceGrid(self.n_prb, self.n_symbols)
        out.data[:] = self.data
        return out

    def nonzero_count(self, symbol: int) -> int:
        return int(np.count_nonzero(self.data[symbol]))


@dataclass(frozen=True)
class SsbSchedule:
    """Placement of sync-block occasions inside one 16-frame period.

    ``offset_slot`` is the absolute slot offset of the first occasion from the
    period start; subsequent occasions follow every ``interval_slots``.
    """

    num_ssb_per_period: int
    offset_slot: int = 2
    interval_slots: int = 20
    period_frames: int = SSB_PERIOD_FRAMES
    freq_range: FrequencyRange = FrequencyRange.FR1

    def validate(self, num: Numerology) -> "SsbSchedule":
        if not validate_num_ssb(self.freq_range, num.scs_khz, self.num_ssb_per_period):
            raise ConfigError(
                f"{self.num_ssb_per_period} S-SSBs per period is not legal for "
                f"{self.freq_range.value} at {num.scs_khz} kHz"
            )
        period_slots = self.period_frames * num.slots_per_frame
        last = self.offset_slot + (self.num_ssb_per_period - 1) * self.interval_slots
        if self.offset_slot < 0 or last >= period_slots:
            raise ConfigError(
                f"occasion at slot {last} falls outside the "
                f"{self.period_frames}-frame period ({period_slots} slots)"
            )
        return self


def validate_num_ssb(freq_range: FrequencyRange, scs_khz: int, count: int) -> bool:
    """True iff ``count`` sync blocks per period is listed for (range, SCS)."""
    key = (freq_range, scs_khz)
    if key not in _NUM_SSB_TABLE:
        raise ConfigError(f"no S-SSB count table entry for {freq_range.value}/{scs_khz} kHz")
    return count in _NUM_SSB_TABLE[key]


def ssb_occasions(schedule: SsbSchedule, num: Numerology) -> list[SlotAddress]:
    """Slot addresses of every sync-block occasion within one period.

    Occasion ``k`` sits at absolute slot ``offset_slot + k * interval_slots``
    from the period start; addresses are relative to that start (frame 0).
    """
    schedule.validate(num)
    occasions = []
    for k in range(schedule.num_ssb_per_period):
        abs_slot = schedule.offset_slot + k * schedule.interval_slots
        occasions.append(
            SlotAddress(dfn=abs_slot // num.slots_per_frame,
                        slot=abs_slot % num.slots_per_frame)
        )
    return occasions


def is_ssb_occasion(addr: SlotAddress, schedule: SsbSchedule, num: Numerology) -> bool:
    """True iff ``addr`` (reduced modulo the 16-frame period) is an occasion."""
    addr.validate(num)
    rel_frame = addr.dfn % schedule.period_frames
    return any(o.dfn == rel_frame and o.slot == addr.slot
               for o in ssb_occasions(schedule, num))
