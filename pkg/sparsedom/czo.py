"""
Calderon-Zygmund machinery on the line bench.

* whitney_decomposition: Whitney intervals of an open union of cells, in
  integer sub-cell units so every distance bound is an exact integer check;
* smooth_cz_decomposition: the smooth CZ decomposition f = g + sum b_j over
  Omega = {M^s_3Q f > m_Q} with the cutoff partition of unity;
* grand_sharp_maximal: the oscillation maximal function of f_Q = T(f psi_2Q);
* czo_extract_sparse: the stopping construction behind the sparse bound for
  an s-smooth CZ operator, audited against brute-force Tf;
* estontf_audit and hilbert_sharpness_experiment.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad

from .dyadic import Cube, build_grid, row_percentiles
from .euclid import (
    CZKernelSpec,
    LineFunction,
    LineGrid,
    SmoothBumpDictionary,
    alternating_function,
    alternating_indicator,
    apply_kernel,
    interval_cutoff,
    moments,
    smooth_maximal,
)
from .haar import local_dyadic_maximal, maximal_subcubes
from .reports import DominationReport, check_domination, check_ratio, merge_reports
from .slopes import fit_loglog_slope
from .sparse import SparseFamily, verify_sparsity
from .weights import Weight, power_aq

logger = logging.getLogger(__name__)

#Constants to be applied
UNITS_PER_CELL = 16
OVERLAP_BOUND = 12
CZO_RATIO = 1.0 / 32.0  #2^-(d+4) at d = 1
CZO_ENLARGEMENT = 0.25
DOUBLING_TOLERANCE = 0.2
HILBERT_SLOPE_FLOOR = 0.8
MS_SPREAD_LIMIT = 1.5
SHARPNESS_HALF_WIDTH = 64.0
SHARPNESS_CELLS_PER_UNIT = 64


@dataclass(frozen=True, order=True)
class CellInterval:
    """[start, start + length) in cells (or sub-cell units for Whitney intervals)."""

    start: int
    length: int

    def __post_init__(self):
        if self.length < 1:
            raise ValueError(f"interval length must be positive, got {self.length}")

    @property
    def stop(self) -> int:
        return self.start + self.length

    def tripled(self) -> "CellInterval":
        return CellInterval(self.start - self.length, 3 * self.length)

    def contains(self, other: "CellInterval") -> bool:
        return self.start <= other.start and other.stop <= self.stop

    def center(self, grid: LineGrid) -> float:
        return grid.a + grid.h * (self.start + self.length / 2.0)

    def check_inside(self, grid: LineGrid) -> None:
        if self.start < 0 or self.stop > grid.cells:
            raise ValueError(f"interval [{self.start}, {self.stop}) leaves the grid of {grid.cells} cells")

    def as_row(self) -> List[int]:
        return [self.start, self.length]


def _as_interval(Q) -> CellInterval:
    return Q if isinstance(Q, CellInterval) else CellInterval(*Q)


def _percentile(values: np.ndarray, r: float) -> float:
    values = np.asarray(values, dtype=float)
    return float(row_percentiles(values[None, :], np.ones((1, values.size)), r)[0])


def mesh_doubling(f: LineFunction) -> LineFunction:
    """The same function on the grid with every cell split in two."""
    return LineFunction(f.grid.refined(2), np.repeat(f.values, 2))


#Whitney

def _runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    padded = np.concatenate([[False], np.asarray(mask, dtype=bool), [False]])
    changes = np.flatnonzero(np.diff(padded.astype(np.int8)))
    return list(zip(changes[0::2].tolist(), changes[1::2].tolist()))


def whitney_decomposition(mask: np.ndarray, units_per_cell: int = UNITS_PER_CELL) -> List[CellInterval]:
    """
    Maximal dyadic unit intervals R with l(R) <= dist(R, complement) inside each
    component of the cell mask, refined down to single units at the boundary so
    the intervals tile every component. Apart from the unit touching each end of
    a component, l(R) <= dist(R, complement) < 3 l(R).
    """
    found: List[CellInterval] = []
    for cell_start, cell_stop in _runs(mask):
        a, b = cell_start * units_per_cell, cell_stop * units_per_cell
        size = 1 << (b - a - 1).bit_length()
        pending = [CellInterval(start, size) for start in range((a // size) * size, b, size)]
        while pending:
            interval = pending.pop()
            if interval.stop <= a or interval.start >= b:
                continue
            distance = min(interval.start - a, b - interval.stop)
            if distance >= 0 and (interval.length == 1 or interval.length <= distance):
                found.append(interval)
                continue
            half = interval.length // 2
            pending.extend([CellInterval(interval.start, half), CellInterval(interval.start + half, half)])
    return sorted(found)


def whitney_bounds(intervals: Sequence[CellInterval], mask: np.ndarray, units_per_cell: int = UNITS_PER_CELL) -> Dict[str, float]:
    """
    Extreme values of dist(R, complement)/l(R) over the intervals clear of the
    complement, the number of boundary units, the overlap of the (9/8)R and the
    covered share of the mask.
    """
    if not intervals:
        return {"min_ratio": math.inf, "max_ratio": 0.0, "overlap": 0, "coverage": 0.0, "boundary_units": 0}
    runs = [(a * units_per_cell, b * units_per_cell) for a, b in _runs(mask)]
    ratios = []
    boundary_units = 0
    for interval in intervals:
        a, b = next((a, b) for a, b in runs if a <= interval.start and interval.stop <= b)
        distance = min(interval.start - a, b - interval.stop)
        if distance == 0:
            boundary_units += 1
        else:
            ratios.append(distance / interval.length)
    #(9/8)R in sixteenths of a unit: centre 16 start + 8 l, half-width 9 l
    events = []
    for interval in intervals:
        centre = 16 * interval.start + 8 * interval.length
        events.append((centre - 9 * interval.length, 1))
        events.append((centre + 9 * interval.length, -1))
    depth, overlap = 0, 0
    for _, step in sorted(events, key=lambda event: (event[0], event[1])):
        depth += step
        overlap = max(overlap, depth)
    covered = sum(interval.length for interval in intervals)
    total = sum(b - a for a, b in runs)
    return {
        "min_ratio": min(ratios, default=math.inf),
        "max_ratio": max(ratios, default=0.0),
        "overlap": overlap,
        "coverage": covered / total,
        "boundary_units": boundary_units,
    }


#Smooth CZ decomposition

@dataclass(frozen=True, eq=False)
class BadPart:
    interval: CellInterval
    coefficient: float
    start: int
    values: np.ndarray

    def integral(self, h: float) -> float:
        return float(self.values.sum() * h)


@dataclass(frozen=True, eq=False)
class CZDecomposition:
    """f = g + sum_j b_j on 3Q, all on the sub-cell unit grid."""

    f: LineFunction
    g: LineFunction
    parts: List[BadPart]
    omega: np.ndarray
    whitney: List[CellInterval]
    threshold: float
    report: DominationReport

    def reconstruction(self) -> np.ndarray:
        total = self.g.values.copy()
        for part in self.parts:
            total[part.start:part.start + part.values.size] += part.values
        return total


def smooth_cz_decomposition(
    f: LineFunction,
    Q,
    threshold: float,
    s: float = 1.0,
    dictionary: Optional[SmoothBumpDictionary] = None,
    units_per_cell: int = UNITS_PER_CELL,
) -> CZDecomposition:
    """Smooth CZ decomposition of f restricted to 3Q at height m_Q = ``threshold``."""
    Q = _as_interval(Q)
    triple = Q.tripled()
    triple.check_inside(f.grid)
    maximal = smooth_maximal(f, s, dictionary, localize=(triple.start, triple.stop)).values[triple.start:triple.stop]
    omega = maximal > threshold
    if omega.all():
        raise ValueError(f"Omega fills 3Q at m_Q = {threshold:.6g}: increase the threshold m_Q")

    local = f.restrict(triple.start, triple.stop)
    units = LineGrid(local.grid.a, local.grid.b, local.grid.cells * units_per_cell)
    fine = np.repeat(local.values, units_per_cell)
    whitney = whitney_decomposition(omega, units_per_cell)
    inside = np.repeat(omega, units_per_cell)

    mids = units.midpoints
    windows, bumps = [], []
    total = np.zeros(units.cells)
    for interval in whitney:
        lo = max(interval.start - interval.length, 0)
        hi = min(interval.stop + interval.length, units.cells)
        bump = interval_cutoff(mids[lo:hi], units.a + units.h * (interval.start + interval.length / 2.0), units.h * interval.length)
        total[lo:hi] += bump
        windows.append((lo, hi))
        bumps.append(bump)

    normaliser = np.maximum(total, 1.0)
    parts = []
    g = fine.copy()
    for interval, (lo, hi), bump in zip(whitney, windows, bumps):
        eta = bump / normaliser[lo:hi] * inside[lo:hi]
        coefficient = float((fine[lo:hi] * eta).sum() / eta.sum())
        values = (fine[lo:hi] - coefficient) * eta
        g[lo:hi] -= values
        parts.append(BadPart(interval, coefficient, lo, values))

    decomposition_g = LineFunction(units, g)
    reconstructed = g.copy()
    for part in parts:
        reconstructed[part.start:part.start + part.values.size] += part.values
    bounds = whitney_bounds(whitney, omega, units_per_cell)
    measured = {
        "threshold": threshold, "s": s, "bad_parts": len(parts), "omega_cells": int(omega.sum()),
        "reconstruction_error": float(np.abs(reconstructed - fine).max()),
        "max_bad_mean": max((abs(part.integral(units.h)) for part in parts), default=0.0),
        "c_ratio": max((abs(part.coefficient) for part in parts), default=0.0) / threshold,
        "whitney": bounds,
    }
    report = check_ratio(float(np.abs(g).max()), threshold, None, "cz-decomposition", measured)
    logger.info("CZ decomposition over %d Whitney intervals, ||g||/m_Q = %.4g", len(parts), report.best_constant)
    return CZDecomposition(LineFunction(units, fine), decomposition_g, parts, omega, whitney, threshold, report)


#Grand sharp maximal function

def _transform_on(f: LineFunction, kernel: CZKernelSpec, source: Tuple[int, int], weights: np.ndarray, targets: np.ndarray) -> np.ndarray:
    lo, hi = source
    piece = f.restrict(lo, hi).with_values(f.values[lo:hi] * weights)
    return apply_kernel(piece, kernel, targets)


def localized_transform(f: LineFunction, kernel: CZKernelSpec, Q, targets: Optional[np.ndarray] = None) -> np.ndarray:
    """f_Q = T(f psi_2Q) at the midpoints of Q (or at ``targets``)."""
    Q = _as_interval(Q)
    grid = f.grid
    lo, hi = max(Q.start - Q.length, 0), min(Q.stop + Q.length, grid.cells)
    mids = grid.midpoints
    weights = interval_cutoff(mids[lo:hi], Q.center(grid), 2.0 * Q.length * grid.h)
    targets = mids[Q.start:Q.stop] if targets is None else targets
    return _transform_on(f, kernel, (lo, hi), weights, targets)


def grand_sharp_maximal(f: LineFunction, Q, kernel: CZKernelSpec) -> LineFunction:
    """
    sup over dyadic R in D(Q) containing x of the oscillation over R of
    T(f psi_2Q) - T(f psi_2R).
    """
    Q = _as_interval(Q)
    if Q.length & (Q.length - 1):
        raise ValueError(f"Q needs 2^N cells, got {Q.length}")
    Q.tripled().check_inside(f.grid)
    f_q = localized_transform(f, kernel, Q)
    out = np.zeros(Q.length)
    size = Q.length
    while size >= 1:
        for offset in range(0, Q.length, size):
            R = CellInterval(Q.start + offset, size)
            difference = f_q[offset:offset + size] - localized_transform(f, kernel, R)
            out[offset:offset + size] = np.maximum(out[offset:offset + size], difference.max() - difference.min())
        size //= 2
    return f.restrict(Q.start, Q.stop).with_values(out)


def sharp_audit(f: LineFunction, Q, kernel: CZKernelSpec, s: float = 1.0, dictionary: Optional[SmoothBumpDictionary] = None) -> DominationReport:
    """M^#_Q f against M^s_3Q f on Q, constant reported."""
    Q = _as_interval(Q)
    triple = Q.tripled()
    sharp = grand_sharp_maximal(f, Q, kernel).values
    maximal = smooth_maximal(f, s, dictionary, localize=(triple.start, triple.stop)).values[Q.start:Q.stop]
    return check_domination(sharp, maximal, None, "sharp-vs-smooth", {"s": s, "cells": Q.length, "kernel": kernel.kind})


#Percentile estimate for Tf

def estontf_audit(
    f: LineFunction, Q, kernel: CZKernelSpec, r: float = CZO_RATIO, s: float = 1.0,
    dictionary: Optional[SmoothBumpDictionary] = None,
) -> DominationReport:
    """P_Q^{2r}(|Tf|) <= C (1/r) P_Q^r(M^s_3Q f) for f supported on 3Q; C is reported."""
    if not 0 < r <= 0.5:
        raise ValueError(f"r must lie in (0, 1/2], got {r}")
    Q = _as_interval(Q)
    triple = Q.tripled()
    triple.check_inside(f.grid)
    outside = np.ones(f.grid.cells, dtype=bool)
    outside[triple.start:triple.stop] = False
    if np.any(f.values[outside] != 0):
        raise ValueError("f must be supported on 3Q")
    transform = apply_kernel(f, kernel, f.grid.midpoints[Q.start:Q.stop])
    maximal = smooth_maximal(f, s, dictionary, localize=(triple.start, triple.stop)).values[Q.start:Q.stop]
    lhs = _percentile(np.abs(transform), 2 * r)
    rhs = _percentile(maximal, r) / r
    return check_ratio(lhs, rhs, None, "estontf", {"r": r, "s": s, "cells": Q.length, "kernel": kernel.kind})


def doubling_audit(audit, f: LineFunction, Q, tolerance: float = DOUBLING_TOLERANCE, **options) -> DominationReport:
    """Relative change of an audit's constant when every cell is split in two."""
    Q = _as_interval(Q)
    coarse = audit(f, Q, **options)
    fine = audit(mesh_doubling(f), CellInterval(2 * Q.start, 2 * Q.length), **options)
    base = coarse.best_constant
    change = abs(fine.best_constant - base) / base if base else abs(fine.best_constant)
    return check_ratio(change, tolerance, 1.0, f"{coarse.inequality_id}-doubling", {
        "coarse": coarse.best_constant, "fine": fine.best_constant, "tolerance": tolerance,
    })


#Sparse extraction for CZ operators

@dataclass(frozen=True, eq=False)
class CZOExtraction:
    family: SparseFamily
    sparsity: DominationReport
    domination: DominationReport
    bounds: Dict[Cube, float]


def _cube_cells(Q0: CellInterval, depth: int, cube: Cube) -> CellInterval:
    width = 1 << (depth - cube.level)
    return CellInterval(Q0.start + cube.index * width, width)


def czo_extract_sparse(
    f: LineFunction, kernel: CZKernelSpec, Q0, s: Optional[float] = None, r: float = CZO_RATIO,
    dictionary: Optional[SmoothBumpDictionary] = None,
) -> CZOExtraction:
    """
    Stopping construction on D(Q0): each Q stops where |T(f psi_2Q)| or
    M^#_Q f exceeds max(P_Q^r(M^s_3Q f), P_Q^r(|f_Q|), P_Q^r(M^#_Q f)), the
    stopping set is enlarged at dyadic density 1/4, and its maximal subcubes
    are the next generation. The family is then audited for 1/2-sparsity and
    |Tf| <= C sum_Q P_Q^r(M^s_3Q f) 1_Q on Q0 with C reported.
    """
    Q0 = _as_interval(Q0)
    grid = f.grid
    depth = Q0.length.bit_length() - 1
    if Q0.length != 1 << depth:
        raise ValueError(f"Q0 needs 2^N cells, got {Q0.length}")
    Q0.tripled().check_inside(grid)
    outside = np.ones(grid.cells, dtype=bool)
    outside[Q0.start:Q0.stop] = False
    if np.any(f.values[outside] != 0):
        raise ValueError("f must be supported in Q0")
    s = kernel.s if s is None else s
    dictionary = SmoothBumpDictionary(s) if dictionary is None else dictionary
    dyadic = build_grid(depth)

    bounds: Dict[Cube, float] = {}
    if np.any(f.values != 0):
        pending = [Cube(0, 0)]
        while pending:
            cube = pending.pop()
            Q = _cube_cells(Q0, depth, cube)
            triple = Q.tripled()
            maximal = smooth_maximal(f, s, dictionary, localize=(triple.start, triple.stop)).values[Q.start:Q.stop]
            bounds[cube] = _percentile(maximal, r)
            if Q.length == 1:
                continue
            local = np.abs(localized_transform(f, kernel, Q))
            sharp = grand_sharp_maximal(f, Q, kernel).values
            level = max(bounds[cube], _percentile(local, r), _percentile(sharp, r))
            stopped = (local > level) | (sharp > level)
            enlarged = local_dyadic_maximal(stopped) > CZO_ENLARGEMENT
            pending.extend(maximal_subcubes(enlarged, cube))
            logger.debug("CZO extraction at %s: %d stopped cells", cube, int(stopped.sum()))

    family = SparseFamily.from_cubes(dyadic, sorted(bounds), eta=0.5)
    sparsity = verify_sparsity(family)
    rhs = np.zeros(Q0.length)
    for cube, value in bounds.items():
        rhs[cube.leaf_slice(depth)] += value
    lhs = np.abs(apply_kernel(f, kernel, grid.midpoints[Q0.start:Q0.stop]))
    domination = check_domination(lhs, rhs, None, "czo-pipeline", {
        "r": r, "s": s, "kernel": kernel.kind, "members": len(bounds), "depth": depth,
        "dictionary_size": len(dictionary),
    })
    logger.info("CZO extraction kept %d intervals, C_dom %.6g", len(bounds), domination.best_constant)
    return CZOExtraction(family, sparsity, domination, bounds)


#Hilbert sharpness

def _alternating_hilbert(coefficients: np.ndarray):
    jumps = np.diff(np.concatenate([[0.0], coefficients, [0.0]]))
    points = np.arange(jumps.size, dtype=float)

    def transform(x: float, log_x: Optional[float] = None) -> float:
        logs = np.log(np.abs(x - points))
        if log_x is not None:
            logs[0] = log_x
        return float(logs @ jumps)

    return transform


def hilbert_weighted_norm(m: int, p: float, eps: float) -> float:
    """||Hf||_{L^p(w_eps)} for the alternating indicator, w_eps = eps x^(eps-1) on (0,1), 1 elsewhere."""
    transform = _alternating_hilbert(alternating_indicator(m))
    top = m + 2

    #x = exp(-v/eps) turns the weighted piece on (0,1) into an integral against e^-v
    def near_origin(v: float) -> float:
        x = math.exp(-v / eps)
        return abs(transform(x, -v / eps)) ** p * math.exp(-v)

    total, _ = quad(near_origin, 0.0, np.inf, limit=200)
    pieces = [(-np.inf, -1.0), (-1.0, 0.0)] + [(k, k + 1.0) for k in range(1, top + 1)] + [(top + 1.0, np.inf)]
    for lo, hi in pieces:
        value, _ = quad(lambda x: abs(transform(x)) ** p, lo, hi, limit=200)
        total += value
    return total ** (1.0 / p)


def _sharpness_weight_masses(grid: LineGrid, eps: float) -> np.ndarray:
    edges = grid.edges
    masses = np.full(grid.cells, grid.h)
    inside = (edges[:-1] >= 0.0) & (edges[1:] <= 1.0)
    weight = Weight.power(eps)
    masses[inside] = weight.primitive(edges[1:][inside]) - weight.primitive(edges[:-1][inside])
    return masses


def hilbert_sharpness_experiment(
    p: float, s: float, eps_list: Sequence[float], q: float = 2.0, dictionary_size: int = 16,
    cells_per_unit: int = SHARPNESS_CELLS_PER_UNIT,
) -> DominationReport:
    """
    ||Hf||_{L^p(w_eps)} / ||M^s f||_{L^p(w_eps)} along the power family: the
    fitted exponent in [w_eps]_{A_q} stays >= 0.8 and ||M^s f|| stays bounded.
    """
    if not s > 1.0 / p - 1.0:
        raise ValueError(f"need s > 1/p - 1, got s = {s}, p = {p}")
    m = max(int(math.ceil(s)) - 1, 0)
    vanishing = max(abs(value) for value in moments(m))
    half = SHARPNESS_HALF_WIDTH
    grid = LineGrid(-half, half, int(2 * half * cells_per_unit))
    f = alternating_function(grid, m)
    maximal = smooth_maximal(f, s, SmoothBumpDictionary(s, dictionary_size)).values

    aqs, lhs, rhs = [], [], []
    for eps in eps_list:
        aqs.append(power_aq(eps, q))
        lhs.append(hilbert_weighted_norm(m, p, eps))
        rhs.append(float(((maximal ** p) * _sharpness_weight_masses(grid, eps)).sum() ** (1.0 / p)))
    ratios = np.asarray(lhs) / np.asarray(rhs)
    fit = fit_loglog_slope(aqs, ratios)
    spread = max(rhs) / min(rhs)
    report = check_ratio(HILBERT_SLOPE_FLOOR, max(fit.slope, 0.0), 1.0, "hilbert-sharpness", {
        "p": p, "s": s, "q": q, "m": m, "slope": fit.slope, "floor": HILBERT_SLOPE_FLOOR,
        "vanishing_moments": vanishing, "ms_spread": spread,
        "points": [
            {"eps": eps, "Aq": aq, "lhs": left, "rhs": right}
            for eps, aq, left, right in zip(eps_list, aqs, lhs, rhs)
        ],
    })
    if spread > MS_SPREAD_LIMIT or vanishing > 1e-10:
        logger.warning("hilbert-sharpness: M^s norm spread %.4g, moments %.3g", spread, vanishing)
        report.passed = False
    return report


def estontf_batch(fs: Sequence[Tuple[LineFunction, CellInterval]], kernel: CZKernelSpec, r: float = CZO_RATIO, s: float = 1.0) -> DominationReport:
    """One global constant over many (f, Q) pairs."""
    dictionary = SmoothBumpDictionary(s)
    return merge_reports("estontf", [estontf_audit(f, Q, kernel, r, s, dictionary) for f, Q in fs])
