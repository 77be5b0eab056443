"""Bit-to-symbol mapping and soft demapping for QPSK/16QAM/64QAM.

LLR sign convention throughout: positive means bit 0.
"""

from __future__ import annotations

import numpy as np

# Gray-coded per-axis amplitude levels, unit average symbol power.
_AXIS_LEVELS = {
    2: np.array([1.0, -1.0]) / np.sqrt(2.0),
    4: np.array([1.0, 3.0, -1.0, -3.0]) / np.sqrt(10.0),
    6: np.array([3.0, 1.0, 5.0, 7.0, -3.0, -1.0, -5.0, -7.0]) / np.sqrt(42.0),
}


def _axis_bits(qm: int) -> int:
    return qm // 2


def map_bits(bits: np.ndarray, qm: int) -> np.ndarray:
    """Map a bit sequence to complex symbols of modulation order ``qm``.

    Even-position bits drive the in-phase axis, odd-position bits the
    quadrature axis; per-axis bit groups index Gray-coded levels.
    """
    if qm not in _AXIS_LEVELS:
        raise ValueError(f"unsupported modulation order {qm}")
    bits = np.asarray(bits, dtype=np.int8)
    if bits.size % qm:
        raise ValueError(f"bit count {bits.size} not divisible by Qm={qm}")
    k = _axis_bits(qm)
    groups = bits.reshape(-1, qm)
    i_idx = np.zeros(len(groups), dtype=np.int64)
    q_idx = np.zeros(len(groups), dtype=np.int64)
    for j in range(k):
        i_idx = (i_idx << 1) | groups[:, 2 * j]
        q_idx = (q_idx << 1) | groups[:, 2 * j + 1]
    levels = _AXIS_LEVELS[qm]
    return levels[i_idx] + 1j * levels[q_idx]


def demap_llrs(symbols: np.ndarray, qm: int, noise_var: float = 1.0) -> np.ndarray:
    """Max-log LLRs for each transmitted bit given equalized symbols."""
    if qm not in _AXIS_LEVELS:
        raise ValueError(f"unsupported modulation order {qm}")
    symbols = np.asarray(symbols, dtype=np.complex128)
    k = _axis_bits(qm)
    levels = _AXIS_LEVELS[qm]
    llrs = np.empty((symbols.size, qm), dtype=np.float64)
    for axis, values in ((0, symbols.real), (1, symbols.imag)):
        # distance of every received axis value to every axis level
        d2 = (values[:, None] - levels[None, :]) ** 2
        for j in range(k):
            bit_of_level = (np.arange(len(levels)) >> (k - 1 - j)) & 1
            d0 = d2[:, bit_of_level == 0].min(axis=1)
            d1 = d2[:, bit_of_level == 1].min(axis=1)
            llrs[:, 2 * j + axis] = (d1 - d0) / noise_var
    return llrs.reshape(-1)


def hard_bits(llrs: np.ndarray) -> np.ndarray:
    """Hard decisions from LLRs (positive means bit 0)."""
    return (np.asarray(llrs) < 0).astype(np.int8)
