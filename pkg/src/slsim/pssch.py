"""Data-slot construction and parsing: second-stage control plus the
LDPC-coded transport block, multiplexed onto one slot.

Mapping order is reference symbols, then control, then data.  Symbol 0 is a
verbatim copy of symbol 1 for receiver gain settling; the first-stage
control region carries a fixed placeholder that is never decoded.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from slsim.coding.crc import crc24_attach, crc24_check
from slsim.coding.ldpc import LdpcConfig, ldpc_decode, ldpc_encode
from slsim.coding.mcs import McsEntry, mcs_lookup, tbs_compute
from slsim.coding.polar import PolarConfig, polar_decode, polar_encode
from slsim.coding.rate_match import rate_dematch, rate_match
from slsim.modulation import demap_llrs, map_bits
from slsim.numerology import ResourceGrid, SUBCARRIERS_PER_RB
from slsim.sequences import DmrsChannel, gen_dmrs, gen_scrambling

SCI2_BITS = 35
_SCI2_FIELDS = (("harq_process_id", 4), ("ndi", 1), ("redundancy_version", 2),
                ("source_id", 8), ("destination_id", 16),
                ("harq_feedback_enabled", 1), ("cast_type", 2), ("csi_request", 1))

_PSCCH_PLACEHOLDER_SEED = 0x5C1C
_DATA_SCRAMBLE_SALT = 1 << 22


@dataclass(frozen=True)
class Sci2:
    """35-bit second-stage control block."""

    harq_process_id: int = 0
    ndi: int = 0
    redundancy_version: int = 0
    source_id: int = 0
    destination_id: int = 0
    harq_feedback_enabled: int = 0
    cast_type: int = 0
    csi_request: int = 0

    def __post_init__(self):
        for name, width in _SCI2_FIELDS:
            value = getattr(self, name)
            if not 0 <= value < (1 << width):
                raise ValueError(f"{name}={value} does not fit in {width} bits")


def pack_sci2(sci2: Sci2) -> np.ndarray:
    bits = []
    for name, width in _SCI2_FIELDS:
        value = getattr(sci2, name)
        bits.extend((value >> (width - 1 - i)) & 1 for i in range(width))
    return np.array(bits, dtype=np.int8)


def unpack_sci2(bits: np.ndarray) -> Sci2:
    bits = np.asarray(bits, dtype=np.int8)
    if bits.size != SCI2_BITS:
        raise ValueError(f"expected {SCI2_BITS} bits, got {bits.size}")
    values = {}
    pos = 0
    for name, width in _SCI2_FIELDS:
        value = 0
        for _ in range(width):
            value = (value << 1) | int(bits[pos])
            pos += 1
        values[name] = value
    return Sci2(**values)


def data_scrambling_seed(source_id: int, destination_id: int) -> int:
    return _DATA_SCRAMBLE_SALT ^ ((source_id << 16) | destination_id)


@dataclass(frozen=True)
class PsschConfig:
    """Slot geometry and coding parameters for the data channel."""

    n_prb: int = 50
    mcs_index: int = 0
    pscch_n_rb: int = 10
    pscch_symbols: tuple[int, ...] = (1, 2, 3)
    dmrs_symbols: tuple[int, ...] = (4, 10)
    agc_symbol: int = 0
    guard_symbol: int | None = 13
    sci2_e: int | None = None            # default: odd REs of the first DMRS symbol
    sci2_list_size: int = 8
    dmrs_seed: int = 0                   # combined SLSS id by convention

    def __post_init__(self):
        if self.n_prb <= 0:
            raise ValueError("n_prb must be positive")
        if self.pscch_n_rb < 0 or self.pscch_n_rb > self.n_prb:
            raise ValueError("control region wider than the carrier")
        if self.agc_symbol != 0 or 0 in self.dmrs_symbols:
            raise ValueError("symbol 0 is reserved for the gain-settling copy")

    @property
    def n_sc(self) -> int:
        return SUBCARRIERS_PER_RB * self.n_prb

    @property
    def mcs(self) -> McsEntry:
        return mcs_lookup(self.mcs_index)


@lru_cache(maxsize=64)
def build_re_map(cfg: PsschConfig) -> dict[str, np.ndarray]:
    """Ordered (symbol, subcarrier) index arrays for every RE category.

    Categories partition the full 14-symbol grid: agc, pscch, dmrs, sci2,
    data, guard.  Mapping order within dmrs/sci2/data is the fill order.
    The result is cached per configuration; treat the arrays as read-only.
    """
    n_sc = cfg.n_sc
    taken = np.zeros((14, n_sc), dtype=bool)
    out: dict[str, np.ndarray] = {}

    def claim(name: str, pairs: list[tuple[int, int]]):
        arr = np.array(pairs, dtype=np.int64).reshape(-1, 2)
        if taken[arr[:, 0], arr[:, 1]].any():
            raise ValueError(f"overlapping RE assignment for {name}")
        taken[arr[:, 0], arr[:, 1]] = True
        arr.setflags(write=False)
        out[name] = arr

    claim("agc", [(cfg.agc_symbol, sc) for sc in range(n_sc)])
    if cfg.guard_symbol is not None:
        claim("guard", [(cfg.guard_symbol, sc) for sc in range(n_sc)])
    else:
        out["guard"] = np.empty((0, 2), dtype=np.int64)
    claim("pscch", [(sym, sc) for sym in cfg.pscch_symbols
                    for sc in range(SUBCARRIERS_PER_RB * cfg.pscch_n_rb)])
    claim("dmrs", [(sym, sc) for sym in cfg.dmrs_symbols
                   for sc in range(0, n_sc, 2)])

    sci2_e = cfg.sci2_e if cfg.sci2_e is not None else n_sc // 2 * 2
    n_sci2_re = sci2_e // 2
    sci2_pairs: list[tuple[int, int]] = []
    for sym in range(cfg.dmrs_symbols[0], 14):
        if len(sci2_pairs) >= n_sci2_re:
            break
        for sc in range(n_sc):
            if len(sci2_pairs) >= n_sci2_re:
                break
            if not taken[sym, sc]:
                sci2_pairs.append((sym, sc))
    if len(sci2_pairs) < n_sci2_re:
        raise ValueError("slot cannot hold the configured control payload")
    claim("sci2", sci2_pairs)

    data_pairs = [(sym, sc) for sym in range(1, 14)
                  for sc in range(n_sc) if not taken[sym, sc]]
    claim("data", data_pairs)
    return out


def n_data_re(cfg: PsschConfig) -> int:
    return len(build_re_map(cfg)["data"])


def transport_block_size(cfg: PsschConfig) -> int:
    return tbs_compute(n_data_re(cfg), cfg.mcs)


def sci2_polar_config(cfg: PsschConfig) -> PolarConfig:
    e = cfg.sci2_e if cfg.sci2_e is not None else cfg.n_sc // 2 * 2
    return PolarConfig(k=SCI2_BITS + 24, e=e, list_size=cfg.sci2_list_size)


def ldpc_config(cfg: PsschConfig) -> LdpcConfig:
    return LdpcConfig.for_payload(transport_block_size(cfg) + 24, cfg.mcs.code_rate)


def build_pssch_slot(tb: bytes, sci2: Sci2, cfg: PsschConfig) -> ResourceGrid:
    """Assemble one data slot from a transport block and its control part."""
    tbs = transport_block_size(cfg)
    if len(tb) * 8 != tbs:
        raise ValueError(f"transport block must be {tbs // 8} bytes, got {len(tb)}")
    re_map = build_re_map(cfg)
    grid = ResourceGrid(cfg.n_prb)

    dmrs_idx = re_map["dmrs"]
    dmrs = gen_dmrs(DmrsChannel.PSSCH, cfg.dmrs_seed, len(dmrs_idx))
    grid.data[dmrs_idx[:, 0], dmrs_idx[:, 1]] = dmrs

    sci2_cfg = sci2_polar_config(cfg)
    sci2_coded = polar_encode(crc24_attach(pack_sci2(sci2)), sci2_cfg)
    sci2_idx = re_map["sci2"]
    grid.data[sci2_idx[:, 0], sci2_idx[:, 1]] = map_bits(sci2_coded, qm=2)

    pscch_idx = re_map["pscch"]
    if len(pscch_idx):
        placeholder = gen_scrambling(_PSCCH_PLACEHOLDER_SEED, 2 * len(pscch_idx))
        grid.data[pscch_idx[:, 0], pscch_idx[:, 1]] = map_bits(placeholder, qm=2)

    tb_bits = np.unpackbits(np.frombuffer(tb, dtype=np.uint8)).astype(np.int8)
    payload = crc24_attach(tb_bits)
    ldpc_cfg = ldpc_config(cfg)
    buffer = ldpc_encode(payload, ldpc_cfg)
    data_idx = re_map["data"]
    e_data = len(data_idx) * cfg.mcs.modulation_order
    coded = rate_match(buffer, e_data, sci2.redundancy_version,
                       base_graph=ldpc_cfg.base_graph, z=ldpc_cfg.lifting_size)
    scramble = gen_scrambling(
        data_scrambling_seed(sci2.source_id, sci2.destination_id), e_data
    )
    grid.data[data_idx[:, 0], data_idx[:, 1]] = map_bits(coded ^ scramble,
                                                         qm=cfg.mcs.modulation_order)

    grid.data[cfg.agc_symbol] = grid.data[cfg.agc_symbol + 1]
    return grid


def _channel_estimate(grid: ResourceGrid, cfg: PsschConfig,
                      re_map: dict[str, np.ndarray]) -> np.ndarray:
    """Per-RE channel estimate: least squares on the reference comb,
    linear interpolation in frequency, nearest reference symbol in time."""
    n_sc = cfg.n_sc
    dmrs_idx = re_map["dmrs"]
    dmrs = gen_dmrs(DmrsChannel.PSSCH, cfg.dmrs_seed, len(dmrs_idx))
    h = np.ones((14, n_sc), dtype=np.complex128)
    per_symbol = {}
    n_per = len(dmrs_idx) // len(cfg.dmrs_symbols)
    for i, sym in enumerate(cfg.dmrs_symbols):
        idx = dmrs_idx[i * n_per:(i + 1) * n_per]
        ls = grid.data[idx[:, 0], idx[:, 1]] / dmrs[i * n_per:(i + 1) * n_per]
        sc = idx[:, 1]
        full = np.interp(np.arange(n_sc), sc, ls.real) + \
            1j * np.interp(np.arange(n_sc), sc, ls.imag)
        per_symbol[sym] = full
    ref_syms = np.array(cfg.dmrs_symbols)
    for sym in range(14):
        nearest = ref_syms[np.argmin(np.abs(ref_syms - sym))]
        h[sym] = per_symbol[int(nearest)]
    return h


def decode_pssch_slot(grid: ResourceGrid, cfg: PsschConfig
                      ) -> tuple[Sci2 | None, bytes, bool, bool]:
    """Two-stage decode: control first, then the transport block it gates.

    Returns (sci2, tb, sci2_ok, tb_ok).  A failed control decode aborts
    data decoding.
    """
    re_map = build_re_map(cfg)
    h = _channel_estimate(grid, cfg, re_map)

    sci2_idx = re_map["sci2"]
    rx = grid.data[sci2_idx[:, 0], sci2_idx[:, 1]]
    eq = rx * np.conj(h[sci2_idx[:, 0], sci2_idx[:, 1]])
    sci2_llrs = demap_llrs(eq, qm=2)
    sci2_bits, sci2_ok = polar_decode(sci2_llrs, sci2_polar_config(cfg))
    sci2 = unpack_sci2(sci2_bits[:SCI2_BITS]) if sci2_ok else None
    if not sci2_ok:
        return None, b"", False, False

    data_idx = re_map["data"]
    rx = grid.data[data_idx[:, 0], data_idx[:, 1]]
    h_data = h[data_idx[:, 0], data_idx[:, 1]]
    qm = cfg.mcs.modulation_order
    if qm == 2:
        eq = rx * np.conj(h_data)
        llrs = demap_llrs(eq, qm=2)
    else:
        mag2 = np.abs(h_data) ** 2
        eq = rx * np.conj(h_data) / np.maximum(mag2, 1e-12)
        llrs = (demap_llrs(eq, qm=qm).reshape(-1, qm) * mag2[:, None]).reshape(-1)
    scramble = gen_scrambling(
        data_scrambling_seed(sci2.source_id, sci2.destination_id), llrs.size
    )
    llrs = llrs * (1.0 - 2.0 * scramble)

    ldpc_cfg = ldpc_config(cfg)
    soft = rate_dematch(llrs, ldpc_cfg.ncb, sci2.redundancy_version,
                        base_graph=ldpc_cfg.base_graph, z=ldpc_cfg.lifting_size)
    payload, parity_ok = ldpc_decode(soft, ldpc_cfg)
    tb_ok = parity_ok and crc24_check(payload)
    tb = np.packbits(payload[:transport_block_size(cfg)].astype(np.uint8)).tobytes()
    return sci2, tb, True, tb_ok


def measure_pssch_rsrp(grid: ResourceGrid, cfg: PsschConfig) -> float:
    """Mean reference-RE power of the data slot in dB relative to full scale."""
    re_map = build_re_map(cfg)
    idx = re_map["dmrs"]
    power = np.mean(np.abs(grid.data[idx[:, 0], idx[:, 1]]) ** 2)
    return 10.0 * np.log10(max(power, 1e-30))
