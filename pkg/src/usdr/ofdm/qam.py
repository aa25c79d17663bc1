"""Gray-labelled square QAM with unit average energy.

Each symbol takes ``log2(M)`` bits: the first half label the in-phase level,
the second half the quadrature level.  Per axis, level index ``i`` (0 is the
most positive amplitude) carries the label ``i ^ (i >> 1)``; amplitude is
``(L - 1 - 2 i) / sqrt(2 (M - 1) / 3)`` with ``L = sqrt(M)``.
For 4-QAM, bits ``00`` map to ``(1 + 1j) / sqrt(2)``.
"""

from __future__ import annotations

import math

import numpy as np

SUPPORTED_ORDERS = (4, 16, 64, 256)


def _check_order(order: int) -> int:
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported QAM order {order}")
    return int(math.log2(order))


def bits_per_symbol(order: int) -> int:
    return _check_order(order)


def _scale(order: int) -> float:
    return math.sqrt(2 * (order - 1) / 3)


def _axis_levels(half: int) -> np.ndarray:
    """Amplitude (unnormalised) for each per-axis Gray label."""
    L = 1 << half
    idx = np.arange(L)
    labels = idx ^ (idx >> 1)
    levels = np.empty(L)
    levels[labels] = (L - 1) - 2 * idx
    return levels


def constellation(order: int) -> np.ndarray:
    """Point for every label ``0 .. M-1``."""
    k = _check_order(order)
    half = k // 2
    levels = _axis_levels(half)
    labels = np.arange(order)
    i_lab, q_lab = labels >> half, labels & ((1 << half) - 1)
    return (levels[i_lab] + 1j * levels[q_lab]) / _scale(order)


def qam_map(bits, order: int) -> np.ndarray:
    k = _check_order(order)
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % k:
        raise ValueError(f"bit count {bits.size} not divisible by {k}")
    labels = (bits.reshape(-1, k) << np.arange(k - 1, -1, -1)).sum(axis=1)
    return constellation(order)[labels]


def qam_decide_labels(symbols, order: int) -> np.ndarray:
    """Minimum-distance label per symbol (square grid, decided per axis)."""
    k = _check_order(order)
    half = k // 2
    L = 1 << half
    y = np.asarray(symbols, dtype=complex).ravel() * _scale(order)

    def axis(v):
        idx = np.clip(np.rint(((L - 1) - v) / 2), 0, L - 1).astype(np.int64)
        return idx ^ (idx >> 1)

    return (axis(y.real) << half) | axis(y.imag)


def qam_demap(symbols, order: int) -> np.ndarray:
    k = _check_order(order)
    labels = qam_decide_labels(symbols, order)
    return ((labels[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8).ravel()


def qam_decide(symbols, order: int) -> np.ndarray:
    """Nearest constellation point for each symbol."""
    return constellation(order)[qam_decide_labels(symbols, order)]
