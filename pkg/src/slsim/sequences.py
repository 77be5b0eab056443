"""Sidelink reference-sequence generators and the SLSS identity.

SPSS comes from a length-127 m-sequence, SSSS from a Gold construction over
two m-sequences, and DMRS/scrambling from the shared length-31 Gold generator.
All generators are pure functions of their arguments.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

SYNC_SEQ_LEN = 127
NID1_RANGE = 336
NID2_RANGE = 2

_GOLD_NC = 1600  # warm-up offset of the length-31 Gold generator


class DmrsChannel(Enum):
    PSBCH = "psbch"
    PSSCH = "pssch"


# Seed salts keep reference sequences of different channels apart even when
# the configured identities collide.
_DMRS_SALT = {DmrsChannel.PSBCH: 1 << 20, DmrsChannel.PSSCH: 1 << 21}


@dataclass(frozen=True)
class SlssId:
    """Sidelink synchronization identity: nid1 selects SSSS, nid2 selects SPSS."""

    nid1: int
    nid2: int

    def __post_init__(self):
        if not 0 <= self.nid1 < NID1_RANGE:
            raise ValueError(f"nid1 must be in 0..{NID1_RANGE - 1}, got {self.nid1}")
        if not 0 <= self.nid2 < NID2_RANGE:
            raise ValueError(f"nid2 must be in 0..{NID2_RANGE - 1}, got {self.nid2}")

    @property
    def combined(self) -> int:
        return self.nid1 + NID1_RANGE * self.nid2


def compose_slss_id(nid1: int, nid2: int) -> SlssId:
    return SlssId(nid1=nid1, nid2=nid2)


def decompose_slss_id(combined: int) -> SlssId:
    if not 0 <= combined < NID1_RANGE * NID2_RANGE:
        raise ValueError(f"combined id must be in 0..671, got {combined}")
    return SlssId(nid1=combined % NID1_RANGE, nid2=combined // NID1_RANGE)


def _m_sequence(taps: tuple[int, ...], init: tuple[int, ...], length: int) -> np.ndarray:
    """Binary m-sequence x(i+7) = sum_t x(i+t) mod 2 with x(0..6) = init."""
    x = np.zeros(length + 7, dtype=np.int8)
    x[:7] = init
    for i in range(length):
        x[i + 7] = sum(x[i + t] for t in taps) % 2
    return x[:length]


@lru_cache(maxsize=None)
def _spss_base() -> np.ndarray:
    # x(i+7) = (x(i+4) + x(i)) mod 2, x(0..6) = 0,1,1,0,1,1,1
    return _m_sequence((4, 0), (0, 1, 1, 0, 1, 1, 1), SYNC_SEQ_LEN)


@lru_cache(maxsize=None)
def _ssss_bases() -> tuple[np.ndarray, np.ndarray]:
    # x0(i+7) = (x0(i+4) + x0(i)) mod 2 ; x1(i+7) = (x1(i+1) + x1(i)) mod 2
    init = (1, 0, 0, 0, 0, 0, 0)
    return (_m_sequence((4, 0), init, SYNC_SEQ_LEN),
            _m_sequence((1, 0), init, SYNC_SEQ_LEN))


def gen_spss(nid2: int) -> np.ndarray:
    """Length-127 BPSK primary sync sequence for ``nid2`` in {0, 1}."""
    if not 0 <= nid2 < NID2_RANGE:
        raise ValueError(f"nid2 must be in 0..{NID2_RANGE - 1}, got {nid2}")
    x = _spss_base()
    m = (np.arange(SYNC_SEQ_LEN) + 22 + 43 * nid2) % SYNC_SEQ_LEN
    return (1.0 - 2.0 * x[m]).astype(np.float64)


def gen_ssss(slss_id: SlssId) -> np.ndarray:
    """Length-127 BPSK secondary sync sequence for the given identity.

    Product of two cyclically shifted m-sequences; the shift pair
    (m0, m1) is injective over the 672 identities.
    """
    x0, x1 = _ssss_bases()
    m0 = 15 * (slss_id.nid1 // 112) + 5 * slss_id.nid2
    m1 = slss_id.nid1 % 112
    n = np.arange(SYNC_SEQ_LEN)
    s0 = 1.0 - 2.0 * x0[(n + m0) % SYNC_SEQ_LEN]
    s1 = 1.0 - 2.0 * x1[(n + m1) % SYNC_SEQ_LEN]
    return (s0 * s1).astype(np.float64)


@lru_cache(maxsize=512)
def _gold_cached(c_init: int, length: int) -> np.ndarray:
    total = length + _GOLD_NC
    x1 = np.zeros(total + 31, dtype=np.int8)
    x2 = np.zeros(total + 31, dtype=np.int8)
    x1[0] = 1
    for i in range(31):
        x2[i] = (c_init >> i) & 1
    for i in range(total):
        x1[i + 31] = (x1[i + 3] + x1[i]) % 2
        x2[i + 31] = (x2[i + 3] + x2[i + 2] + x2[i + 1] + x2[i]) % 2
    out = ((x1[_GOLD_NC:_GOLD_NC + length]
            + x2[_GOLD_NC:_GOLD_NC + length]) % 2).astype(np.int8)
    out.setflags(write=False)
    return out


def gold_sequence(c_init: int, length: int) -> np.ndarray:
    """Length-31 Gold pseudo-random bit sequence c(n), n = 0..length-1.

    Returns a cached read-only array; copy before mutating.
    """
    if length <= 0:
        raise ValueError(f"sequence length must be positive, got {length}")
    return _gold_cached(int(c_init) & 0x7FFFFFFF, length)


def gen_scrambling(seed: int, length: int) -> np.ndarray:
    """Deterministic scrambling bits; XOR-applying the same sequence twice
    restores the input."""
    return gold_sequence(seed, length)


@lru_cache(maxsize=256)
def _dmrs_cached(c_init: int, length: int) -> np.ndarray:
    c = gold_sequence(c_init, 2 * length)
    re = 1.0 - 2.0 * c[0::2]
    im = 1.0 - 2.0 * c[1::2]
    out = ((re + 1j * im) / np.sqrt(2.0)).astype(np.complex128)
    out.setflags(write=False)
    return out


def gen_dmrs(channel: DmrsChannel, seed: int, length: int) -> np.ndarray:
    """``length`` unit-magnitude QPSK reference symbols for channel estimation.

    PSBCH reference symbols are seeded by the combined SLSS id so a receiver
    can regenerate them right after SLSS detection.  Returns a cached
    read-only array; copy before mutating.
    """
    if length <= 0:
        raise ValueError(f"sequence length must be positive, got {length}")
    return _dmrs_cached(_DMRS_SALT[channel] + int(seed), length)
