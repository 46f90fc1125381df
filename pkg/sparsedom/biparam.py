"""
Dyadic rectangles Q1 x Q2 on a product of two dyadic grids.

Cells are indexed (n1, n2) row-major. Rectangle averages for a level pair
(k1, k2) come from one separable block reduction of the weighted cell array,
so the strong maximal function and the rectangle percentile maximal function
are linear passes over the (N1+1)(N2+1) level pairs. The greedy extraction
feeds rectangles to the shared greedy engine as slice pairs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

import numpy as np
from django.conf import settings

from .dyadic import Cube, DyadicGrid, as_ratio, row_percentiles
from .extraction import GreedyEntry, extract_greedy, family_maximal
from .reports import DominationReport, check_domination
from .sparse import SparseFamily, verify_sparsity

logger = logging.getLogger(__name__)

DEFAULT_PRODUCT_DEPTH_CAP = 16


@dataclass(frozen=True, order=True)
class Rectangle:
    first: Cube
    second: Cube

    def region(self, pg: "ProductGrid") -> Tuple[slice, slice]:
        return self.first.leaf_slice(pg.first.depth), self.second.leaf_slice(pg.second.depth)

    def as_row(self) -> List[int]:
        return [self.first.level, self.first.index, self.second.level, self.second.index]


class ProductGrid:
    """Tensor product of two dyadic grids; the cell measure is the outer product."""

    def __init__(self, first: DyadicGrid, second: DyadicGrid):
        cap = int(getattr(settings, "SPARSEDOM_PRODUCT_DEPTH_CAP", DEFAULT_PRODUCT_DEPTH_CAP))
        if first.depth + second.depth > cap:
            raise ValueError(f"product depth {first.depth} + {second.depth} exceeds the cap {cap}")
        if first.exact or second.exact:
            raise ValueError("product grids use float arithmetic")
        self.first = first
        self.second = second
        self.shape = (first.leaf_count, second.leaf_count)
        self.cell_measure = np.outer(
            np.asarray(first.leaf_measure, dtype=float), np.asarray(second.leaf_measure, dtype=float)
        )
        self.cell_measure.setflags(write=False)

    def __repr__(self) -> str:
        return f"ProductGrid({self.first.depth}, {self.second.depth})"

    def level_pairs(self, max_levels: Optional[Tuple[int, int]] = None) -> Iterator[Tuple[int, int]]:
        top1, top2 = (self.first.depth, self.second.depth) if max_levels is None else max_levels
        top1, top2 = min(top1, self.first.depth), min(top2, self.second.depth)
        for k1 in range(top1 + 1):
            for k2 in range(top2 + 1):
                yield k1, k2

    def rectangle_count(self, max_levels: Optional[Tuple[int, int]] = None) -> int:
        return sum((1 << k1) * (1 << k2) for k1, k2 in self.level_pairs(max_levels))

    def check(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != self.shape:
            raise ValueError(f"product function needs shape {self.shape}, got {values.shape}")
        return values

    def blocks(self, values: np.ndarray, k1: int, k2: int) -> np.ndarray:
        """View of a cell array as (2^k1, 2^k2, cells per block) rows."""
        a = self.shape[0] >> k1
        b = self.shape[1] >> k2
        grouped = values.reshape(1 << k1, a, 1 << k2, b).transpose(0, 2, 1, 3)
        return grouped.reshape(1 << k1, 1 << k2, a * b)

    def block_averages(self, values: np.ndarray, k1: int, k2: int) -> np.ndarray:
        weighted = self.blocks(values * self.cell_measure, k1, k2).sum(axis=2)
        return weighted / self.blocks(self.cell_measure, k1, k2).sum(axis=2)

    def expand(self, per_block: np.ndarray, k1: int, k2: int) -> np.ndarray:
        return np.repeat(np.repeat(per_block, self.shape[0] >> k1, axis=0), self.shape[1] >> k2, axis=1)


@dataclass(frozen=True)
class RectangleAverage:
    rectangle: Rectangle
    average: float


def enumerate_rectangles(values, pg: ProductGrid, max_levels: Optional[Tuple[int, int]] = None) -> List[RectangleAverage]:
    """Every rectangle within the level caps with <f>_R, ordered by (k1, k2, i1, i2)."""
    values = pg.check(values)
    found = []
    for k1, k2 in pg.level_pairs(max_levels):
        averages = pg.block_averages(values, k1, k2)
        for i1 in range(1 << k1):
            for i2 in range(1 << k2):
                found.append(RectangleAverage(Rectangle(Cube(k1, i1), Cube(k2, i2)), float(averages[i1, i2])))
    return found


def strong_maximal(values, pg: ProductGrid) -> np.ndarray:
    values = pg.check(values)
    out = np.zeros(pg.shape)
    for k1, k2 in pg.level_pairs():
        out = np.maximum(out, pg.expand(np.abs(pg.block_averages(values, k1, k2)), k1, k2))
    return out


def rect_percentile_maximal(values, pg: ProductGrid, r) -> np.ndarray:
    """sup over rectangles R containing the cell of P_R^r(|f|)."""
    ratio = float(as_ratio(r))
    values = np.abs(pg.check(values))
    out = np.zeros(pg.shape)
    for k1, k2 in pg.level_pairs():
        rows = pg.blocks(values, k1, k2).reshape((1 << k1) * (1 << k2), -1)
        masses = pg.blocks(pg.cell_measure, k1, k2).reshape(rows.shape)
        percentiles = row_percentiles(rows, masses, ratio).reshape(1 << k1, 1 << k2)
        out = np.maximum(out, pg.expand(percentiles, k1, k2))
    return out


def axis_maximal(values, pg: ProductGrid, axis: int) -> np.ndarray:
    """One-parameter dyadic maximal function along one axis (the other fixed per cell)."""
    values = pg.check(values)
    out = np.zeros(pg.shape)
    depth = pg.first.depth if axis == 0 else pg.second.depth
    for k in range(depth + 1):
        pair = (k, pg.second.depth) if axis == 0 else (pg.first.depth, k)
        out = np.maximum(out, pg.expand(np.abs(pg.block_averages(values, *pair)), *pair))
    return out


@dataclass(frozen=True, eq=False)
class BiparamExtraction:
    family: SparseFamily
    sparsity: DominationReport
    domination: DominationReport


def biparam_greedy(values, pg: ProductGrid) -> BiparamExtraction:
    """
    Greedy selection over all rectangles by descending |<f>_R|, audited as
    M_{DxD} f <= P^{1/2}_{DxD}(M_S f) with constant 1 and flat 1/2-sparsity.
    """
    values = pg.check(values)
    rectangles = enumerate_rectangles(values, pg)
    entries = [GreedyEntry(item.rectangle.region(pg), abs(item.average), item.rectangle) for item in rectangles]
    family = extract_greedy(entries, pg.cell_measure)
    sparsity = verify_sparsity(family)

    chosen = {rectangle for rectangle in family.labels}
    sparse_maximal = family_maximal([entry for entry in entries if entry.label in chosen], pg.shape)
    lhs = strong_maximal(values, pg)
    rhs = rect_percentile_maximal(sparse_maximal, pg, 0.5)
    domination = check_domination(
        lhs, rhs, 1.0, "biparam-strong-max",
        {"N1": pg.first.depth, "N2": pg.second.depth, "rectangles": len(rectangles), "members": len(family)},
    )
    logger.info(
        "Biparameter greedy on %r kept %d of %d rectangles, constant %.6g",
        pg, len(family), len(rectangles), domination.best_constant,
    )
    return BiparamExtraction(family, sparsity, domination)
