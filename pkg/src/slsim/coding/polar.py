"""Polar coding with CRC-aided successive-cancellation list decoding.

The information set is chosen by polarization-weight ordering (beta
expansion with beta = 2**0.25).  Rate matching is repetition of the
sub-block-interleaved mother codeword, which requires the rate-matched
length E to be at least the mother code length N.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from slsim.coding import _kernels
from slsim.coding.crc import CRC24_LEN, crc24_check
from slsim.sequences import gen_scrambling

MAX_LOG2_N = 9  # mother code capped at N = 512
_DEAD_PATH = 1e30

# 32-block sub-block interleaver pattern applied before the circular buffer.
_SUBBLOCK_PATTERN = np.array(
    [0, 1, 2, 4, 3, 5, 6, 7, 8, 16, 9, 17, 10, 18, 11, 19,
     12, 20, 13, 21, 14, 22, 15, 23, 24, 25, 26, 28, 27, 29, 30, 31]
)


@dataclass(frozen=True)
class PolarConfig:
    """Geometry of one polar-coded channel: K info bits (CRC included) into E.

    ``scramble_seed`` whitens the payload before encoding so that degenerate
    decoder outputs (all zeros under erasure) cannot pass the CRC.
    """

    k: int
    e: int
    list_size: int = 8
    crc_bits: int = CRC24_LEN
    scramble_seed: int = 0x1F13

    def __post_init__(self):
        if self.k <= self.crc_bits:
            raise ValueError(f"K={self.k} leaves no information bits after the CRC")
        if self.k > self.e:
            raise ValueError(f"K={self.k} exceeds rate-matched length E={self.e}")
        if self.list_size & (self.list_size - 1):
            raise ValueError(f"list size must be a power of two, got {self.list_size}")
        if self.n > self.e:
            raise ValueError(
                f"E={self.e} too small: mother code N={self.n} needed for K={self.k} "
                "does not fit under repetition rate matching"
            )

    @property
    def n(self) -> int:
        """Mother code length: largest power of two <= E, capped at 512."""
        n = 1 << min(MAX_LOG2_N, self.e.bit_length() - 1)
        # grow if K does not fit (only reachable for tiny E close to K)
        while n < self.k:
            n <<= 1
        return n


@lru_cache(maxsize=None)
def _reliability_order(n: int) -> np.ndarray:
    """Bit-channel indices of an N-length code, least reliable first."""
    idx = np.arange(n)
    weights = np.zeros(n)
    for j in range(int(np.log2(n))):
        weights += ((idx >> j) & 1) * 2.0 ** (j / 4.0)
    return np.argsort(weights, kind="stable")


@lru_cache(maxsize=None)
def _info_positions(n: int, k: int) -> np.ndarray:
    return np.sort(_reliability_order(n)[n - k:])


@lru_cache(maxsize=None)
def _subblock_perm(n: int) -> np.ndarray:
    """y[j] = x[perm[j]] after sub-block interleaving."""
    if n < 32:
        return np.arange(n)
    seg = n // 32
    j = np.arange(n)
    return _SUBBLOCK_PATTERN[j // seg] * seg + (j % seg)


def _transform(u: np.ndarray) -> np.ndarray:
    """In-place-style polar transform x = u * F^(x log2 N) in natural order."""
    x = u.copy()
    n = x.size
    s = 1
    while s < n:
        low = np.where((np.arange(n) & s) == 0)[0]
        x[low] ^= x[low + s]
        s <<= 1
    return x


def polar_encode(bits: np.ndarray, cfg: PolarConfig) -> np.ndarray:
    """Encode K information bits (CRC included) to E rate-matched bits."""
    bits = np.asarray(bits, dtype=np.int8)
    if bits.size != cfg.k:
        raise ValueError(f"expected {cfg.k} input bits, got {bits.size}")
    n = cfg.n
    u = np.zeros(n, dtype=np.int8)
    u[_info_positions(n, cfg.k)] = bits ^ gen_scrambling(cfg.scramble_seed, cfg.k)
    x = _transform(u)
    y = x[_subblock_perm(n)]
    return y[np.arange(cfg.e) % n]


def _bit_reversed(value: int, width: int) -> int:
    return int(bin(value)[2:].zfill(width)[::-1], 2)


@lru_cache(maxsize=None)
def _bit_rev_table(n: int) -> np.ndarray:
    width = int(np.log2(n))
    return np.array([_bit_reversed(i, width) for i in range(n)], dtype=np.int64)


class _ListDecoder:
    """Successive-cancellation list decoder over a flat LLR/bit tree.

    All arrays carry a leading path axis of fixed size L; unused paths
    start with a prohibitive path metric and die off naturally.
    """

    def __init__(self, n: int, list_size: int):
        self.n = n
        self.stages = int(np.log2(n))
        self.L = list_size

    def decode(self, channel_llrs: np.ndarray, info_pos: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n, L, stages = self.n, self.L, self.stages
        llrs = np.zeros((L, 2 * n - 1))
        bits = np.zeros((L, 2, n - 1), dtype=np.int8)
        u_hat = np.zeros((L, n), dtype=np.int8)
        pm = np.full(L, _DEAD_PATH)
        pm[0] = 0.0
        llrs[:, n - 1:] = channel_llrs
        is_info = np.zeros(n, dtype=bool)
        is_info[info_pos] = True

        for phase in range(n):
            pos = _bit_reversed(phase, stages)
            self._update_llrs(llrs, bits, pos)
            leaf = llrs[:, 0]
            if is_info[phase]:
                # fork every path on bit value; keep the L best metrics
                pm0 = pm + np.where(leaf < 0, -leaf, 0.0)
                pm1 = pm + np.where(leaf > 0, leaf, 0.0)
                cand = np.concatenate([pm0, pm1])
                keep = np.argpartition(cand, L - 1)[:L]
                parent = keep % L
                value = (keep // L).astype(np.int8)
                llrs = llrs[parent]
                bits = bits[parent]
                u_hat = u_hat[parent]
                pm = cand[keep]
                u_hat[:, phase] = value
            else:
                u_hat[:, phase] = 0
                pm = pm + np.where(leaf < 0, -leaf, 0.0)
            self._update_bits(bits, u_hat[:, phase], pos)
        return u_hat, pm

    def _update_llrs(self, llrs: np.ndarray, bits: np.ndarray, pos: int) -> None:
        stages = self.stages
        if pos == 0:
            next_level = stages
        else:
            last_level = bin(pos)[2:].zfill(stages).find("1") + 1
            start = (1 << (last_level - 1)) - 1
            end = (1 << last_level) - 2
            size = end - start + 1
            upper = llrs[:, end + 1:end + 1 + size]
            lower = llrs[:, end + 1 + size:end + 1 + 2 * size]
            sign = 1.0 - 2.0 * bits[:, 0, start:end + 1]
            llrs[:, start:end + 1] = lower + sign * upper
            next_level = last_level - 1
        for level in range(next_level, 0, -1):
            start = (1 << (level - 1)) - 1
            end = (1 << level) - 2
            size = end - start + 1
            upper = llrs[:, end + 1:end + 1 + size]
            lower = llrs[:, end + 1 + size:end + 1 + 2 * size]
            llrs[:, start:end + 1] = (
                np.sign(upper) * np.sign(lower) * np.minimum(np.abs(upper), np.abs(lower))
            )

    def _update_bits(self, bits: np.ndarray, latest: np.ndarray, pos: int) -> None:
        n, stages = self.n, self.stages
        if pos == n - 1:
            return
        if pos < n // 2:
            bits[:, 0, 0] = latest
            return
        last_level = bin(pos)[2:].zfill(stages).find("0") + 1
        bits[:, 1, 0] = latest
        for level in range(1, last_level - 1):
            start = (1 << (level - 1)) - 1
            end = (1 << level) - 2
            size = end - start + 1
            seg0 = bits[:, 0, start:end + 1]
            seg1 = bits[:, 1, start:end + 1]
            bits[:, 1, end + 1:end + 1 + size] = seg0 ^ seg1
            bits[:, 1, end + 1 + size:end + 1 + 2 * size] = seg1
        level = last_level - 1
        start = (1 << (level - 1)) - 1
        end = (1 << level) - 2
        size = end - start + 1
        seg0 = bits[:, 0, start:end + 1]
        seg1 = bits[:, 1, start:end + 1]
        bits[:, 0, end + 1:end + 1 + size] = seg0 ^ seg1
        bits[:, 0, end + 1 + size:end + 1 + 2 * size] = seg1


def polar_decode(llrs: np.ndarray, cfg: PolarConfig) -> tuple[np.ndarray, bool]:
    """List-decode E soft values back to K bits with CRC selection.

    Returns ``(bits, crc_ok)``; on CRC failure the maximum-likelihood path
    is returned with ``crc_ok`` False.
    """
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.size != cfg.e:
        raise ValueError(f"expected {cfg.e} soft values, got {llrs.size}")
    n = cfg.n
    # undo repetition, then the sub-block interleaver
    acc = np.bincount(np.arange(cfg.e) % n, weights=llrs, minlength=n)
    channel = np.empty(n)
    channel[_subblock_perm(n)] = acc
    info_pos = _info_positions(n, cfg.k)

    if _kernels.HAVE_NUMBA:
        is_info = np.zeros(n, dtype=np.bool_)
        is_info[info_pos] = True
        u_hat, pm = _kernels.scl_decode(channel, is_info, _bit_rev_table(n), cfg.list_size)
    else:
        decoder = _ListDecoder(n, cfg.list_size)
        u_hat, pm = decoder.decode(channel, info_pos)
    whitening = gen_scrambling(cfg.scramble_seed, cfg.k)
    candidates = u_hat[:, info_pos] ^ whitening
    order = np.argsort(pm, kind="stable")
    for rank in order:
        if pm[rank] >= _DEAD_PATH:
            break
        if crc24_check(candidates[rank]):
            return candidates[rank].astype(np.int8), True
    return candidates[order[0]].astype(np.int8), False
