"""Modulation-and-coding-scheme table and transport block sizing."""

from __future__ import annotations

from dataclasses import dataclass

from slsim.coding.crc import CRC24_LEN


@dataclass(frozen=True)
class McsEntry:
    index: int
    modulation_order: int  # bits per symbol: 2 QPSK, 4 16QAM, 6 64QAM
    code_rate: float       # information bits per coded bit


# (modulation order, rate * 1024) for indices 0..28; 29..31 are reserved
# for retransmission signalling and carry no rate of their own.
_MCS_TABLE = [
    (2, 120), (2, 157), (2, 193), (2, 251), (2, 308),
    (2, 379), (2, 449), (2, 526), (2, 602), (2, 679),
    (4, 340), (4, 378), (4, 434), (4, 490), (4, 553),
    (4, 616), (4, 658),
    (6, 438), (6, 466), (6, 517), (6, 567), (6, 616),
    (6, 666), (6, 719), (6, 772), (6, 822), (6, 873),
    (6, 910), (6, 948),
]


def mcs_lookup(index: int) -> McsEntry:
    """Resolve an MCS index (0..31) to modulation order and code rate."""
    if not 0 <= index <= 31:
        raise ValueError(f"MCS index must be in 0..31, got {index}")
    if index >= len(_MCS_TABLE):
        raise ValueError(f"MCS index {index} is reserved and carries no rate")
    qm, rate_x1024 = _MCS_TABLE[index]
    return McsEntry(index=index, modulation_order=qm, code_rate=rate_x1024 / 1024.0)


def tbs_compute(n_data_re: int, mcs: McsEntry) -> int:
    """Transport block size in bits for ``n_data_re`` data resource elements.

    Byte-aligned floor of the raw capacity, minus the 24-bit TB CRC.
    """
    if n_data_re <= 0:
        raise ValueError(f"n_data_re must be positive, got {n_data_re}")
    raw = n_data_re * mcs.modulation_order * mcs.code_rate
    tbs = (int(raw) // 8) * 8 - CRC24_LEN
    if tbs <= 0:
        raise ValueError(
            f"configuration yields non-positive TB size ({tbs}) for "
            f"{n_data_re} REs at MCS {mcs.index}"
        )
    return tbs
