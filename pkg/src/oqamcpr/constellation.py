"""Offset-QAM constellations: square QAM grids shifted by a common I/Q offset.

The grid spans ``a_oma`` peak-to-peak on each axis and its center sits at
``(a0, a0)`` instead of the origin.  Relative levels on each axis are
``(2k - 1 - sqrt(n)) * a_oma / (2 * (sqrt(n) - 1))`` for ``k = 1..sqrt(n)``,
e.g. ``{-a_oma/2, +a_oma/2}`` for order 4 and
``{-a_oma/2, -a_oma/6, +a_oma/6, +a_oma/2}`` for order 16.

Bit mapping is per-axis reflected Gray code, in-phase sub-word first, so
adjacent levels along either axis differ in exactly one bit.  Decision
thresholds are midpoints between adjacent levels shifted by ``a0``; a value
landing exactly on a threshold resolves to the lower level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SUPPORTED_ORDERS = (4, 16, 64, 256)


def _gray(k: int) -> int:
    return k ^ (k >> 1)


def _gray_to_index(g: int) -> int:
    k = g
    while g:
        g >>= 1
        k ^= g
    return k


def _int_to_bits(value: int, width: int) -> list[int]:
    return [(value >> (width - 1 - i)) & 1 for i in range(width)]


@dataclass(frozen=True, eq=False)
class OffsetQamConstellation:
    """Immutable offset-QAM symbol grid with Gray bit map and thresholds.

    points has shape (order, 2) holding absolute (i, q) coordinates,
    bit_map has shape (order, log2(order)) with the I sub-word first,
    thresholds holds the sqrt(order)-1 per-axis decision boundaries
    (identical for both axes), and level_indices has shape (order, 2)
    with the (i, q) level index of every point.
    """

    order: int
    a_oma: float
    a0: float
    levels: np.ndarray
    points: np.ndarray
    bit_map: np.ndarray
    thresholds: np.ndarray
    level_indices: np.ndarray

    @property
    def side(self) -> int:
        return int(round(math.sqrt(self.order)))

    @property
    def bits_per_symbol(self) -> int:
        return int(round(math.log2(self.order)))

    @property
    def m_ratio(self) -> float:
        return self.a0 / self.a_oma


def build_constellation(order: int, a_oma: float, a0: float) -> OffsetQamConstellation:
    """Construct an offset-QAM constellation.

    Args:
        order: symbol count, one of 4, 16, 64, 256 (square QAM only).
        a_oma: full outer amplitude per axis, > 0 (arbitrary linear units).
        a0: center offset applied equally to I and Q, >= 0.

    Raises:
        ValueError: unsupported order, non-positive a_oma, or negative a0.
    """
    if order not in SUPPORTED_ORDERS:
        raise ValueError(
            f"unsupported order {order}: must be one of {SUPPORTED_ORDERS}"
        )
    if not a_oma > 0:
        raise ValueError(f"a_oma must be > 0, got {a_oma}")
    if a0 < 0:
        raise ValueError(f"a0 must be >= 0, got {a0}")

    m = int(round(math.sqrt(order)))
    k = np.arange(1, m + 1)
    levels = (2 * k - 1 - m) * a_oma / (2 * (m - 1))

    ki = np.repeat(np.arange(m), m)
    kq = np.tile(np.arange(m), m)
    points = np.column_stack((levels[ki] + a0, levels[kq] + a0))

    nb = int(round(math.log2(m)))
    bit_map = np.empty((order, 2 * nb), dtype=np.uint8)
    for p in range(order):
        bit_map[p, :nb] = _int_to_bits(_gray(int(ki[p])), nb)
        bit_map[p, nb:] = _int_to_bits(_gray(int(kq[p])), nb)

    thresholds = (levels[1:] + levels[:-1]) / 2 + a0

    c = OffsetQamConstellation(
        order=order,
        a_oma=float(a_oma),
        a0=float(a0),
        levels=levels,
        points=points,
        bit_map=bit_map,
        thresholds=thresholds,
        level_indices=np.column_stack((ki, kq)),
    )
    for arr in (c.levels, c.points, c.bit_map, c.thresholds, c.level_indices):
        arr.setflags(write=False)
    return c


def average_symbol_energy(c: OffsetQamConstellation) -> float:
    """Arithmetic mean of (I - a0)^2 + (Q - a0)^2 over all symbols.

    Energy is measured about the constellation center, so it is invariant
    under the offset a0: order 4 gives a_oma^2 / 2, order 16 gives
    5 a_oma^2 / 18.
    """
    return float(np.mean(np.sum((c.points - c.a0) ** 2, axis=1)))


def map_bits(c: OffsetQamConstellation, bits) -> tuple[float, float]:
    """Map a bit vector (I sub-word first) to its absolute (i, q) point."""
    bits = np.asarray(bits, dtype=np.uint8)
    nb = c.bits_per_symbol // 2
    if bits.shape != (2 * nb,):
        raise ValueError(
            f"expected {2 * nb} bits for order {c.order}, got shape {bits.shape}"
        )
    gi = int("".join(str(int(b)) for b in bits[:nb]), 2)
    gq = int("".join(str(int(b)) for b in bits[nb:]), 2)
    ki = _gray_to_index(gi)
    kq = _gray_to_index(gq)
    point = c.points[ki * c.side + kq]
    return float(point[0]), float(point[1])


def decide_levels(c: OffsetQamConstellation, values) -> np.ndarray:
    """Per-axis hard decision: level index for each value.

    Values exactly on a threshold resolve to the lower level.
    """
    return np.searchsorted(c.thresholds, values, side="left")


def decide_indices(c: OffsetQamConstellation, i_values, q_values) -> np.ndarray:
    """Vectorized nearest-region decision returning point indices."""
    ki = decide_levels(c, i_values)
    kq = decide_levels(c, q_values)
    return ki * c.side + kq


def demap_point(c: OffsetQamConstellation, i: float, q: float) -> np.ndarray:
    """Hard-decide an (i, q) sample to the bits of its decision region."""
    return c.bit_map[int(decide_indices(c, i, q))].copy()
