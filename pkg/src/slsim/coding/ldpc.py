"""Quasi-cyclic LDPC coding with a normalized min-sum decoder.

Two rate-compatible base graphs in the usual shape: a dense four-row core
with a double-diagonal parity block, degree-one extension rows, and the
first two systematic block-columns never transmitted.  The circular shift
values are generated once from a fixed seed, so codes are identical across
runs and processes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from slsim.coding import _kernels

MAX_LIFTING = 384
_SHIFT_TABLE_SEED = 0x53AC9D

# valid lifting sizes: a * 2^j for a in {2,3,5,7,9,11,13,15}
LIFTING_SIZES = sorted(
    {a * (1 << j) for a in (2, 3, 5, 7, 9, 11, 13, 15) for j in range(8)
     if a * (1 << j) <= MAX_LIFTING}
)

# (info block-columns, total rows) per base graph; columns = info + rows
_BG_GEOMETRY = {1: (22, 46), 2: (10, 42)}


def _extension_degree(bg: int, row: int) -> int:
    if bg == 1:
        if row < 8:
            return 5
        if row < 20:
            return 4
        return 3
    if row < 10:
        return 4
    return 3


@lru_cache(maxsize=None)
def base_graph(bg: int) -> np.ndarray:
    """Shift matrix of base graph ``bg``; -1 marks an absent block."""
    if bg not in _BG_GEOMETRY:
        raise ValueError(f"base graph must be 1 or 2, got {bg}")
    n_info, n_rows = _BG_GEOMETRY[bg]
    n_cols = n_info + n_rows
    rng = np.random.default_rng(_SHIFT_TABLE_SEED + bg)
    shifts = np.full((n_rows, n_cols), -1, dtype=np.int32)

    # dense core rows over all systematic columns
    for r in range(4):
        shifts[r, :n_info] = rng.integers(0, MAX_LIFTING, n_info)

    # double-diagonal parity block on columns n_info .. n_info+3:
    # p0 in rows {0, 1, 3} with shifts {1, 0, 0} so the row sum isolates it
    p = n_info
    shifts[0, p] = 1
    shifts[1, p] = 0
    shifts[3, p] = 0
    shifts[0, p + 1] = 0
    shifts[1, p + 1] = 0
    shifts[1, p + 2] = 0
    shifts[2, p + 2] = 0
    shifts[2, p + 3] = 0
    shifts[3, p + 3] = 0

    # extension rows: identity on their own column plus a handful of edges;
    # the never-transmitted columns 0/1 get extra degree for recoverability
    for r in range(4, n_rows):
        shifts[r, n_info + r] = 0
        degree = _extension_degree(bg, r)
        cols = {r % 2}
        while len(cols) < degree:
            cols.add(int(rng.integers(2, n_info + 4)))
        for c in cols:
            shifts[r, c] = rng.integers(0, MAX_LIFTING)
    return shifts


@dataclass(frozen=True)
class LdpcConfig:
    """Code geometry for one transport block size."""

    base_graph: int
    lifting_size: int
    k_prime: int            # payload bits including the TB CRC
    max_iterations: int = 20
    normalization: float = 0.75

    def __post_init__(self):
        if self.base_graph not in _BG_GEOMETRY:
            raise ValueError(f"base graph must be 1 or 2, got {self.base_graph}")
        if self.lifting_size not in LIFTING_SIZES:
            raise ValueError(f"illegal lifting size {self.lifting_size}")
        if self.k_prime <= 0:
            raise ValueError(f"payload size must be positive, got {self.k_prime}")
        if self.k_prime > self.k:
            raise ValueError(
                f"payload of {self.k_prime} bits exceeds K={self.k} for this lifting"
            )

    @property
    def n_info_cols(self) -> int:
        return _BG_GEOMETRY[self.base_graph][0]

    @property
    def n_rows(self) -> int:
        return _BG_GEOMETRY[self.base_graph][1]

    @property
    def k(self) -> int:
        """Systematic bits of the mother code (payload plus filler zeros)."""
        return self.n_info_cols * self.lifting_size

    @property
    def n(self) -> int:
        """Full mother codeword length."""
        return (self.n_info_cols + self.n_rows) * self.lifting_size

    @property
    def ncb(self) -> int:
        """Circular-buffer length: codeword minus the two untransmitted columns."""
        return self.n - 2 * self.lifting_size

    @classmethod
    def for_payload(cls, k_prime: int, target_rate: float, **kwargs) -> "LdpcConfig":
        """Pick base graph and lifting size for a payload of ``k_prime`` bits."""
        if k_prime <= 0:
            raise ValueError(f"payload size must be positive, got {k_prime}")
        if k_prime <= 292 or (k_prime <= 3824 and target_rate <= 0.67) or target_rate <= 0.25:
            bg = 2
        else:
            bg = 1
        kb = _BG_GEOMETRY[bg][0]
        for z in LIFTING_SIZES:
            if kb * z >= k_prime:
                return cls(base_graph=bg, lifting_size=z, k_prime=k_prime, **kwargs)
        raise ValueError(
            f"transport block of {k_prime} bits exceeds the single-code-block limit"
        )


def _roll_left(blocks: np.ndarray, shift: int) -> np.ndarray:
    return np.roll(blocks, -shift, axis=-1)


def ldpc_encode(payload: np.ndarray, cfg: LdpcConfig) -> np.ndarray:
    """Encode ``k_prime`` payload bits into the ``ncb``-bit circular buffer.

    Filler zeros pad the systematic part up to K; the first two systematic
    block-columns are dropped from the output, as on the receive side they
    are rebuilt by the decoder.
    """
    payload = np.asarray(payload, dtype=np.int8)
    if payload.size != cfg.k_prime:
        raise ValueError(f"expected {cfg.k_prime} payload bits, got {payload.size}")
    z = cfg.lifting_size
    shifts = base_graph(cfg.base_graph)
    n_info = cfg.n_info_cols

    sys = np.zeros((n_info, z), dtype=np.int8)
    sys.reshape(-1)[:cfg.k_prime] = payload

    lam = np.zeros((cfg.n_rows, z), dtype=np.int8)
    for r in range(cfg.n_rows):
        for c in np.nonzero(shifts[r, :n_info] >= 0)[0]:
            lam[r] ^= _roll_left(sys[c], int(shifts[r, c]))

    # core parity via the double-diagonal structure
    p = np.zeros((4, z), dtype=np.int8)
    p[0] = np.roll(lam[0] ^ lam[1] ^ lam[2] ^ lam[3], 1)  # undo the shift-by-1
    p[1] = lam[0] ^ _roll_left(p[0], 1)
    p[2] = lam[1] ^ p[0] ^ p[1]
    p[3] = lam[2] ^ p[2]

    # extension parity: remaining row equations solved directly
    ext = np.zeros((cfg.n_rows - 4, z), dtype=np.int8)
    for r in range(4, cfg.n_rows):
        acc = lam[r].copy()
        for j in range(4):
            s = shifts[r, n_info + j]
            if s >= 0:
                acc ^= _roll_left(p[j], int(s))
        ext[r - 4] = acc

    codeword = np.concatenate([sys.reshape(-1), p.reshape(-1), ext.reshape(-1)])
    return codeword[2 * z:]


def parity_check(codeword_buffer: np.ndarray, cfg: LdpcConfig,
                 leading_sys: np.ndarray | None = None) -> bool:
    """Verify every parity equation on a circular-buffer codeword.

    ``leading_sys`` supplies the two untransmitted systematic blocks
    (zeros if omitted, which matches an all-zero payload only); decoders
    pass their recovered values.
    """
    z = cfg.lifting_size
    if leading_sys is None:
        leading_sys = np.zeros(2 * z, dtype=np.int8)
    full = np.concatenate([np.asarray(leading_sys, dtype=np.int8),
                           np.asarray(codeword_buffer, dtype=np.int8)])
    blocks = full.reshape(-1, z)
    shifts = base_graph(cfg.base_graph)
    for r in range(cfg.n_rows):
        acc = np.zeros(z, dtype=np.int8)
        for c in np.nonzero(shifts[r] >= 0)[0]:
            acc ^= _roll_left(blocks[c], int(shifts[r, c]))
        if acc.any():
            return False
    return True


@lru_cache(maxsize=None)
def _decoder_tables(bg: int, z: int):
    """Padded check-row tables for the lifted graph.

    Returns (edge_cols, check_degrees, pad_mask, n_vars): edge_cols is
    (n_checks, max_deg) of variable indices with an out-of-range sentinel
    on padding slots.
    """
    shifts = base_graph(bg)
    n_rows, n_cols = shifts.shape
    n_checks = n_rows * z
    n_vars = n_cols * z
    block_deg = (shifts >= 0).sum(axis=1)
    max_deg = int(block_deg.max())
    edge_cols = np.full((n_checks, max_deg), n_vars, dtype=np.int64)
    for r in range(n_rows):
        cols = np.nonzero(shifts[r] >= 0)[0]
        for slot, c in enumerate(cols):
            i = np.arange(z)
            edge_cols[r * z + i, slot] = c * z + (i + shifts[r, c]) % z
    degrees = np.repeat(block_deg, z).astype(np.int64)
    pad = edge_cols == n_vars
    return edge_cols, degrees, pad, n_vars


def ldpc_decode(llrs: np.ndarray, cfg: LdpcConfig) -> tuple[np.ndarray, bool]:
    """Normalized min-sum decoding of a de-rate-matched circular buffer.

    ``llrs`` has length ``ncb`` (positive means bit 0).  Returns the
    ``k_prime`` payload bits and a parity-satisfied flag; CRC checking is
    the caller's business.  Uses a layered schedule when the accelerated
    kernel is available and flooding otherwise.
    """
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.size != cfg.ncb:
        raise ValueError(f"expected {cfg.ncb} soft values, got {llrs.size}")
    z = cfg.lifting_size
    edge_cols, degrees, pad, n_vars = _decoder_tables(cfg.base_graph, z)

    channel = np.zeros(n_vars + 1)  # sentinel var at the end stays pinned
    channel[2 * z:n_vars] = llrs
    big = np.float64(1e30)
    channel[cfg.k_prime:cfg.k] = big  # filler bits are known zeros
    channel[n_vars] = big

    if _kernels.HAVE_NUMBA:
        total, _, ok = _kernels.nms_layered(
            edge_cols, degrees, channel, cfg.max_iterations, cfg.normalization
        )
        bits = (total[:cfg.k_prime] < 0).astype(np.int8)
        return bits, bool(ok)

    total = channel.copy()
    c2v = np.zeros(edge_cols.shape)
    flat_cols = edge_cols.reshape(-1)
    ok = False
    for _ in range(cfg.max_iterations):
        v2c = total[edge_cols] - c2v
        mag = np.abs(v2c)
        mag[pad] = np.inf
        sgn = np.where(v2c < 0, -1.0, 1.0)
        sgn[pad] = 1.0
        row_sign = np.prod(sgn, axis=1, keepdims=True)
        part = np.partition(mag, 1, axis=1)
        min1 = part[:, 0][:, None]
        min2 = part[:, 1][:, None]
        # the argmin edge gets the second minimum; ties make min2 == min1
        out_mag = np.where(mag == min1, min2, min1)
        c2v = cfg.normalization * row_sign * sgn * out_mag
        c2v[pad] = 0.0
        total = channel + np.bincount(
            flat_cols, weights=c2v.reshape(-1), minlength=n_vars + 1
        )
        hard = total < 0
        syndrome = np.bitwise_xor.reduce(hard[edge_cols], axis=1)
        if not syndrome.any():
            ok = True
            break
    bits = (total[:cfg.k_prime] < 0).astype(np.int8)
    return bits, ok
