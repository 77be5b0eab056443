"""24-bit CRC attachment and checking for payloads and transport blocks."""

from __future__ import annotations

import numpy as np

# x^24 + x^23 + x^18 + x^17 + x^14 + x^11 + x^10 + x^7 + x^6 + x^5 + x^4 + x^3 + x + 1
CRC24_POLY = 0x864CFB
CRC24_LEN = 24

_POLY_BITS = np.array(
    [(CRC24_POLY >> (CRC24_LEN - 1 - i)) & 1 for i in range(CRC24_LEN)], dtype=np.int8
)
_DIVISOR = np.concatenate(([np.int8(1)], _POLY_BITS))  # x^24 term made explicit


def crc_remainder(bits: np.ndarray) -> np.ndarray:
    """24-bit remainder of ``bits * x^24`` modulo the generator polynomial."""
    bits = np.asarray(bits, dtype=np.int8)
    work = np.concatenate([bits, np.zeros(CRC24_LEN, dtype=np.int8)])
    for i in range(len(bits)):
        if work[i]:
            work[i:i + CRC24_LEN + 1] ^= _DIVISOR
    return work[-CRC24_LEN:]


def crc24_attach(bits: np.ndarray) -> np.ndarray:
    """Append the 24 CRC parity bits to ``bits``."""
    bits = np.asarray(bits, dtype=np.int8)
    if bits.size == 0:
        raise ValueError("cannot attach a CRC to an empty bit sequence")
    return np.concatenate([bits, crc_remainder(bits)])


def crc24_check(bits: np.ndarray) -> bool:
    """True iff the trailing 24 bits are the CRC of the preceding bits."""
    bits = np.asarray(bits, dtype=np.int8)
    if bits.size <= CRC24_LEN:
        return False
    return bool(np.array_equal(crc_remainder(bits[:-CRC24_LEN]), bits[-CRC24_LEN:]))
