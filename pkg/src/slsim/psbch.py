"""S-SSB slot construction and parsing: broadcast payload, sync signals,
reference symbols, and block power measurement.

Slot layout over 14 symbols and 11 RBs (132 subcarriers): symbol 0 carries
broadcast data for receiver gain settling, symbols 1-2 the primary sync
sequence, 3-4 the secondary, 5-12 broadcast data, 13 is a guard.  Sync
sequences occupy the 127 centered subcarriers of the block.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from slsim.coding.crc import crc24_attach, crc24_check
from slsim.coding.polar import PolarConfig, polar_decode, polar_encode
from slsim.modulation import demap_llrs, map_bits
from slsim.numerology import ResourceGrid
from slsim.sequences import DmrsChannel, SlssId, gen_dmrs, gen_spss, gen_ssss

SSB_N_PRB = 11
SSB_N_SC = 132
SYNC_LEN = 127
SYNC_SC_OFFSET = (SSB_N_SC - SYNC_LEN) // 2  # 127 carriers centered in the block

PSBCH_SYMBOLS = (0, 5, 6, 7, 8, 9, 10, 11, 12)
SPSS_SYMBOLS = (1, 2)
SSSS_SYMBOLS = (3, 4)
GUARD_SYMBOL = 13

PSBCH_PAYLOAD_BITS = 56
_FIELD_WIDTHS = (("in_coverage", 1), ("tdd_config", 12), ("dfn", 10),
                 ("slot_index", 7), ("reserved", 2))


class RsrpMode(Enum):
    DMRS_ONLY = "dmrs"
    DMRS_AND_SSSS = "dmrs+ssss"


@dataclass(frozen=True)
class SsbLayout:
    """Resource-element geometry of the sync block within a carrier grid.

    ``sc_offset`` places the 132-subcarrier block; by default it is centered
    in the carrier.  ``dmrs_comb_offset`` sets the phase of the every-4th
    subcarrier reference comb.
    """

    carrier_n_sc: int = SSB_N_SC
    sc_offset: int | None = None
    dmrs_comb_offset: int = 0

    def __post_init__(self):
        if self.carrier_n_sc < SSB_N_SC:
            raise ValueError(f"carrier of {self.carrier_n_sc} subcarriers cannot hold the sync block")
        if not 0 <= self.dmrs_comb_offset < 4:
            raise ValueError("reference comb offset must be in 0..3")

    @property
    def start(self) -> int:
        if self.sc_offset is not None:
            return self.sc_offset
        return (self.carrier_n_sc - SSB_N_SC) // 2

    def block_subcarriers(self) -> np.ndarray:
        return self.start + np.arange(SSB_N_SC)

    def sync_subcarriers(self) -> np.ndarray:
        return self.start + SYNC_SC_OFFSET + np.arange(SYNC_LEN)

    def dmrs_subcarriers(self) -> np.ndarray:
        return self.start + np.arange(self.dmrs_comb_offset, SSB_N_SC, 4)

    def data_subcarriers(self) -> np.ndarray:
        local = np.arange(SSB_N_SC)
        mask = (local - self.dmrs_comb_offset) % 4 != 0
        return self.start + local[mask]

    @property
    def n_dmrs_per_symbol(self) -> int:
        return len(self.dmrs_subcarriers())

    @property
    def n_data_per_symbol(self) -> int:
        return SSB_N_SC - self.n_dmrs_per_symbol

    @property
    def coded_bits(self) -> int:
        """QPSK bits across all broadcast data REs of the slot."""
        return 2 * len(PSBCH_SYMBOLS) * self.n_data_per_symbol

    @property
    def agc_coded_bits(self) -> int:
        """Leading coded bits carried only on the gain-settling symbol 0."""
        return 2 * self.n_data_per_symbol

    @property
    def n_dmrs_total(self) -> int:
        """Reference symbols across all broadcast symbols of one slot."""
        return len(PSBCH_SYMBOLS) * self.n_dmrs_per_symbol


@dataclass(frozen=True)
class PsbchPayload:
    """56-bit broadcast payload: 32 information bits plus a 24-bit CRC."""

    in_coverage: int
    tdd_config: int
    dfn: int
    slot_index: int
    reserved: int = 0

    def __post_init__(self):
        for name, width in _FIELD_WIDTHS:
            value = getattr(self, name)
            if not 0 <= value < (1 << width):
                raise ValueError(f"{name}={value} does not fit in {width} bits")


def pack_psbch(payload: PsbchPayload) -> np.ndarray:
    """Serialize the payload fields MSB-first and append the CRC."""
    bits = []
    for name, width in _FIELD_WIDTHS:
        value = getattr(payload, name)
        bits.extend((value >> (width - 1 - i)) & 1 for i in range(width))
    return crc24_attach(np.array(bits, dtype=np.int8))


def unpack_psbch(bits: np.ndarray) -> tuple[PsbchPayload, bool]:
    """Parse 56 bits back into fields; the flag reports the CRC verdict."""
    bits = np.asarray(bits, dtype=np.int8)
    if bits.size != PSBCH_PAYLOAD_BITS:
        raise ValueError(f"expected {PSBCH_PAYLOAD_BITS} bits, got {bits.size}")
    values = {}
    pos = 0
    for name, width in _FIELD_WIDTHS:
        value = 0
        for _ in range(width):
            value = (value << 1) | int(bits[pos])
            pos += 1
        values[name] = value
    return PsbchPayload(**values), crc24_check(bits)


def psbch_polar_config(layout: SsbLayout) -> PolarConfig:
    return PolarConfig(k=PSBCH_PAYLOAD_BITS, e=layout.coded_bits)


def build_ssb_slot(payload: PsbchPayload, slss_id: SlssId,
                   layout: SsbLayout | None = None) -> ResourceGrid:
    """Populate one slot grid with sync sequences, broadcast data, and DMRS."""
    layout = layout or SsbLayout()
    if layout.carrier_n_sc % 12:
        raise ValueError("carrier width must be a whole number of resource blocks")
    grid = ResourceGrid(layout.carrier_n_sc // 12)

    sync_sc = layout.sync_subcarriers()
    spss = gen_spss(slss_id.nid2)
    ssss = gen_ssss(slss_id)
    for sym in SPSS_SYMBOLS:
        grid.data[sym, sync_sc] = spss
    for sym in SSSS_SYMBOLS:
        grid.data[sym, sync_sc] = ssss

    coded = polar_encode(pack_psbch(payload), psbch_polar_config(layout))
    symbols = map_bits(coded, qm=2)
    dmrs = gen_dmrs(DmrsChannel.PSBCH, slss_id.combined, layout.n_dmrs_total)
    data_sc = layout.data_subcarriers()
    dmrs_sc = layout.dmrs_subcarriers()
    n_data = layout.n_data_per_symbol
    n_dmrs = layout.n_dmrs_per_symbol
    for i, sym in enumerate(PSBCH_SYMBOLS):
        grid.data[sym, data_sc] = symbols[i * n_data:(i + 1) * n_data]
        grid.data[sym, dmrs_sc] = dmrs[i * n_dmrs:(i + 1) * n_dmrs]
    return grid


def _estimate_channel(rx_symbol: np.ndarray, layout: SsbLayout,
                      dmrs_ref: np.ndarray) -> np.ndarray:
    """Least-squares estimate on the comb, linearly interpolated across the block."""
    dmrs_local = layout.dmrs_subcarriers() - layout.start
    h_ls = rx_symbol[dmrs_local] / dmrs_ref
    local = np.arange(SSB_N_SC)
    h_re = np.interp(local, dmrs_local, h_ls.real)
    h_im = np.interp(local, dmrs_local, h_ls.imag)
    return h_re + 1j * h_im


def decode_ssb_slot(grid: ResourceGrid, slss_id: SlssId,
                    layout: SsbLayout | None = None) -> tuple[PsbchPayload, bool]:
    """Equalize, demap, and polar-decode the broadcast payload of one slot.

    Symbol 0 exists for receiver gain settling and is excluded from
    decoding: its coded-bit positions enter the decoder as erasures.
    """
    layout = layout or SsbLayout()
    cfg = psbch_polar_config(layout)
    dmrs = gen_dmrs(DmrsChannel.PSBCH, slss_id.combined, layout.n_dmrs_total)
    block = grid.data[:, layout.block_subcarriers()]
    data_local = layout.data_subcarriers() - layout.start
    n_data = layout.n_data_per_symbol
    n_dmrs = layout.n_dmrs_per_symbol

    llrs = np.zeros(cfg.e)
    for i, sym in enumerate(PSBCH_SYMBOLS):
        if sym == 0:
            continue  # gain-settling symbol: its bit positions stay erased
        h = _estimate_channel(block[sym], layout, dmrs[i * n_dmrs:(i + 1) * n_dmrs])
        # matched filtering is exact for QPSK up to a common LLR scale
        eq = block[sym, data_local] * np.conj(h[data_local])
        llrs[2 * i * n_data:2 * (i + 1) * n_data] = demap_llrs(eq, qm=2)
    bits, crc_ok = polar_decode(llrs, cfg)
    payload, field_crc_ok = unpack_psbch(bits)
    return payload, crc_ok and field_crc_ok


def measure_ssb_rsrp(grid: ResourceGrid, mode: RsrpMode = RsrpMode.DMRS_ONLY,
                     layout: SsbLayout | None = None) -> float:
    """Mean reference-RE power in dB relative to full scale."""
    layout = layout or SsbLayout()
    dmrs_sc = layout.dmrs_subcarriers()
    res = [grid.data[sym, dmrs_sc] for sym in PSBCH_SYMBOLS]
    if mode is RsrpMode.DMRS_AND_SSSS:
        sync_sc = layout.sync_subcarriers()
        res.extend(grid.data[sym, sync_sc] for sym in SSSS_SYMBOLS)
    values = np.concatenate(res)
    power = np.mean(np.abs(values) ** 2)
    return 10.0 * np.log10(max(power, 1e-30))
