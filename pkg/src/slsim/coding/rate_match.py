"""Circular-buffer rate matching with redundancy versions for the data chain."""

from __future__ import annotations

import numpy as np

# Redundancy-version start positions as fractions of the circular buffer,
# numerator per rv over the base-graph column count (minus the two
# never-transmitted systematic columns).
_RV_NUM = {1: (0, 17, 33, 56), 2: (0, 13, 25, 43)}
_RV_DEN = {1: 66, 2: 50}


def rv_start_offset(rv: int, ncb: int, base_graph: int, z: int) -> int:
    """Bit offset into the circular buffer where redundancy version ``rv`` starts."""
    if rv not in (0, 1, 2, 3):
        raise ValueError(f"redundancy version must be in 0..3, got {rv}")
    num = _RV_NUM[base_graph][rv]
    den = _RV_DEN[base_graph]
    return (num * ncb // (den * z)) * z


def rate_match(coded: np.ndarray, e: int, rv: int = 0, *,
               base_graph: int = 1, z: int | None = None) -> np.ndarray:
    """Select ``e`` bits from the circular buffer starting at the rv offset."""
    coded = np.asarray(coded)
    if e <= 0:
        raise ValueError(f"rate-matched length must be positive, got {e}")
    z = z if z is not None else len(coded)
    k0 = rv_start_offset(rv, len(coded), base_graph, z)
    idx = (k0 + np.arange(e)) % len(coded)
    return coded[idx]


def rate_dematch(llrs: np.ndarray, ncb: int, rv: int = 0, *,
                 base_graph: int = 1, z: int | None = None) -> np.ndarray:
    """Accumulate soft values back into their circular-buffer positions."""
    llrs = np.asarray(llrs, dtype=np.float64)
    z = z if z is not None else ncb
    k0 = rv_start_offset(rv, ncb, base_graph, z)
    idx = (k0 + np.arange(len(llrs))) % ncb
    return np.bincount(idx, weights=llrs, minlength=ncb)
