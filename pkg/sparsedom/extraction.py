"""
The four sparse extractors and their domination audits.

* extract_layered: dyadic layers of the range of M f, kept where their
  conditional overlap with coarser layers is at most 1/2.
* extract_greedy: sets in descending order of |average|, accepted while at
  most half of each lies in the shadow of the accepted ones.
* extract_stopping: the stopping-time recursion for martingale transforms
  and the square function.
* extract_haar_shift: the cube recursion for Haar shifts, with the enlarged
  stopping set split into maximal dyadic cubes.

Extractors are deterministic and single-threaded; every returned family is
immutable and can be audited concurrently.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, List, Optional, Sequence

import numpy as np

from . import haar
from .dyadic import (
    NEVER,
    Cube,
    GridFunction,
    StoppingTime,
    as_ratio,
    cube_percentiles,
    doob_maximal,
    expectation_stack,
    localized_doob_stack,
    percentile_maximal,
    row_percentiles,
    take_at,
)
from .martingale import SQUARE, TRANSFORM, PredictableSigns, square_function, square_partials, transform_max_trunc, transform_partials
from .reports import DominationReport, check_domination
from .sparse import (
    MAX,
    SparseFamily,
    StoppingSequence,
    apply_sparse,
    family_from_stopping,
    stopping_sequence_overlap,
    verify_sparsity,
)

logger = logging.getLogger(__name__)

#Layer loop guard: below 2^-1100 every float64 is already zero
MAX_LAYERS = 1100
OVERLAP_LIMIT = 0.5


#Layered extraction

def extract_layered(f: GridFunction) -> SparseFamily:
    """
    Layers Omega_k^l = {M^k f > 2^-l >= M^(k-1) f} of the normalized f;
    S_k^(l+1) keeps the part of Omega_k^(l+1) where E_k[1_{S^l}] <= 1/2.
    """
    grid = f.grid
    expectations = np.abs(expectation_stack(f).astype(float))
    scale = float(np.abs(f.as_float()).max(initial=0.0))
    if scale == 0.0:
        return SparseFamily.empty(grid)

    running = np.maximum.accumulate(expectations / scale, axis=0)
    previous = np.vstack([np.zeros((1, grid.leaf_count)), running[:-1]])
    positive = running[running > 0]
    smallest = float(positive.min())

    members = np.zeros_like(running, dtype=bool)
    union = np.zeros(grid.leaf_count, dtype=bool)
    for ell in range(1, MAX_LAYERS + 1):
        threshold = 2.0 ** -ell
        layer = (running > threshold) & (previous <= threshold)
        if ell > 1:
            light = np.vstack([
                grid.expand(grid.average(union.astype(float), k), k) for k in range(grid.depth + 1)
            ]).astype(float) <= OVERLAP_LIMIT
            layer &= light
        fresh = layer & ~members
        members |= layer
        union |= layer.any(axis=0)
        if threshold < smallest and not fresh.any():
            logger.debug("Layered extraction settled after %d layers", ell)
            break
    else:
        logger.warning("Layered extraction hit the layer cap %d", MAX_LAYERS)

    return SparseFamily.from_leaf_sets(grid, members, eta=0.5)


def layered_domination_audit(f: GridFunction, family: Optional[SparseFamily] = None, r=0.5) -> DominationReport:
    """M f <= 2 P_r(M_S f) pointwise, for r <= 1/2."""
    ratio = float(as_ratio(r))
    if ratio > 0.5:
        raise ValueError(f"layered domination needs r <= 1/2, got {ratio}")
    family = extract_layered(f) if family is None else family
    sparse_maximal = apply_sparse(f, family, MAX)
    lhs = doob_maximal(f).as_float()
    rhs = percentile_maximal(sparse_maximal, ratio).as_float()
    return check_domination(lhs, rhs, 2.0, "layered-domination", {"r": ratio, "members": len(family)})


#Greedy extraction

@dataclass(frozen=True, eq=False)
class GreedyEntry:
    """
    A candidate set with its attached value |<f>_R|. ``region`` indexes the
    cell array: a boolean mask, or a tuple of slices for box-shaped sets.
    """

    region: Any
    value: float
    label: Any = None


def _region(entry: GreedyEntry):
    region = entry.region
    return region if isinstance(region, tuple) else np.asarray(region, dtype=bool)


def region_mask(region, shape) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    mask[region if isinstance(region, tuple) else np.asarray(region, dtype=bool)] = True
    return mask


def _greedy_order(entries: Sequence[GreedyEntry]) -> List[int]:
    #Stable: equal values keep their input order
    return sorted(range(len(entries)), key=lambda i: -abs(entries[i].value))


def greedy_select(entries: Sequence[GreedyEntry], cell_measure):
    """Indices of the accepted entries and their witnesses R minus the shadow at acceptance."""
    measure = np.asarray(cell_measure, dtype=float)
    shadow = np.zeros(measure.shape, dtype=bool)
    accepted, witnesses = [], []
    for i in _greedy_order(entries):
        region = _region(entries[i])
        if not isinstance(region, tuple) and region.shape != measure.shape:
            raise ValueError(f"greedy entry {i} does not match the cell grid")
        local_measure = measure[region]
        mass = local_measure.sum()
        if mass <= 0:
            raise ValueError(f"greedy entry {i} has no positive measure")
        covered = shadow[region]
        gamma = local_measure[covered].sum() / mass
        if gamma > OVERLAP_LIMIT:
            continue
        witness = np.zeros(measure.shape, dtype=bool)
        witness[region] = ~covered
        accepted.append(i)
        witnesses.append(witness)
        shadow[region] = True
    logger.debug("Greedy extraction kept %d of %d sets", len(accepted), len(entries))
    return accepted, witnesses


def extract_greedy(entries: Sequence[GreedyEntry], cell_measure) -> SparseFamily:
    measure = np.asarray(cell_measure, dtype=float)
    accepted, witnesses = greedy_select(entries, measure)
    labels = [i if entries[i].label is None else entries[i].label for i in accepted]
    members = [region_mask(entries[i].region, measure.shape) for i in accepted]
    return SparseFamily.flat(measure, members, witnesses, eta=0.5, labels=labels)


def family_maximal(entries: Sequence[GreedyEntry], shape) -> np.ndarray:
    """M_E f: pointwise sup of the attached values over the entries."""
    out = np.zeros(shape)
    for entry in entries:
        region = _region(entry)
        out[region] = np.maximum(out[region], abs(entry.value))
    return out


def family_percentile_maximal(entries: Sequence[GreedyEntry], g: np.ndarray, cell_measure, r) -> np.ndarray:
    """P_E^r g: pointwise sup over entries of the percentile of |g| on the entry."""
    measure = np.asarray(cell_measure, dtype=float)
    g = np.abs(np.asarray(g, dtype=float))
    out = np.zeros(measure.shape)
    for entry in entries:
        region = _region(entry)
        value = row_percentiles(g[region].ravel(), measure[region].ravel(), r)[0]
        out[region] = np.maximum(out[region], value)
    return out


def greedy_domination_audit(entries: Sequence[GreedyEntry], cell_measure) -> DominationReport:
    """M_E f <= P_E^{1/2}(M_S f) with constant exactly 1."""
    measure = np.asarray(cell_measure, dtype=float)
    accepted, _ = greedy_select(entries, measure)
    sparse_maximal = family_maximal([entries[i] for i in accepted], measure.shape)
    lhs = family_maximal(entries, measure.shape)
    rhs = family_percentile_maximal(entries, sparse_maximal, measure, 0.5)
    return check_domination(
        lhs, rhs, 1.0, "greedy-domination",
        {"candidates": len(entries), "members": len(accepted)},
    )


#Stopping-time extraction

@dataclass(frozen=True, eq=False)
class StoppingExtraction:
    sequence: StoppingSequence
    family: SparseFamily
    overlap: DominationReport
    domination: DominationReport
    r: float


def _running_operator(f: GridFunction, sigma: Optional[PredictableSigns], nu: StoppingTime, operator: str) -> np.ndarray:
    if operator == TRANSFORM:
        return np.maximum.accumulate(np.abs(transform_partials(f, sigma, nu)), axis=0)
    return square_partials(f, nu)


def extract_stopping(
    f: GridFunction,
    sigma: Optional[PredictableSigns] = None,
    operator: str = TRANSFORM,
    r=None,
) -> StoppingExtraction:
    """
    nu_0 = 0 and nu_(j+1)(x) is the first level after nu_j(x) where the
    operator started at nu_j, or |E_m f|, exceeds r^(-1/2) P_{nu_j}^r(M_(nu_j) f).
    """
    if operator not in (TRANSFORM, SQUARE):
        raise ValueError(f"unknown operator {operator!r}")
    if operator == TRANSFORM and sigma is None:
        raise ValueError("the transform operator needs predictable signs")
    grid = f.grid
    regularity = float(grid.regularity)
    r = 1.0 / (2.0 * (regularity + 3.0)) if r is None else float(as_ratio(r))
    factor = 1.0 / math.sqrt(r)

    local_maximal = localized_doob_stack(f).astype(float)
    percentiles = np.vstack([
        grid.expand(cube_percentiles(local_maximal[k], grid, k, r), k) for k in range(grid.depth + 1)
    ])
    expectations = np.abs(expectation_stack(f).astype(float))
    levels = np.arange(grid.depth + 1)[:, None]

    nu = StoppingTime.constant(grid, 0)
    times = [nu]
    while True:
        running = _running_operator(f, sigma, nu, operator)
        threshold = factor * take_at(percentiles, nu)
        trigger = (np.maximum(running, expectations) > threshold) & (levels > nu.levels[None, :])
        trigger &= nu.finite[None, :]
        following = np.where(trigger.any(axis=0), np.argmax(trigger, axis=0), NEVER)
        if np.all(following == NEVER):
            break
        nu = StoppingTime(grid, following)
        times.append(nu)
    sequence = StoppingSequence(grid, tuple(times))
    logger.debug("Stopping extraction (%s) built %d stopping times", operator, len(sequence))

    overlap = stopping_sequence_overlap(sequence, OVERLAP_LIMIT)
    overlap.measured.update({"r": r, "R": regularity, "operator": operator})

    layers = np.vstack([np.where(t.finite, take_at(percentiles, t), 0.0) for t in times])
    if operator == TRANSFORM:
        lhs = transform_max_trunc(f, sigma).as_float()
        rhs = layers.sum(axis=0)
    else:
        lhs = square_function(f).as_float() ** 2
        rhs = (layers ** 2).sum(axis=0)
    domination = check_domination(
        lhs, rhs, None, f"stopping-{operator}",
        {"r": r, "R": regularity, "threshold_factor": factor, "times": len(sequence),
         "form": "l1" if operator == TRANSFORM else "l2-squared"},
    )
    return StoppingExtraction(sequence, family_from_stopping(sequence), overlap, domination, r)


#Haar shift extraction

@dataclass(frozen=True, eq=False)
class HaarExtraction:
    family: SparseFamily
    sparsity: DominationReport
    domination: DominationReport
    r: float
    removed_mean: float


def haar_extraction_ratio(spec: haar.HaarShiftSpec) -> float:
    """r = 1/(2(C0+1)^2)."""
    return 1.0 / (2.0 * (haar.complexity_constant(spec) + 1) ** 2)


def extract_haar_shift(f: GridFunction, spec: haar.HaarShiftSpec, root: Optional[Cube] = None, r=None) -> HaarExtraction:
    grid = f.grid
    root = Cube(0, 0) if root is None else root
    grid.check_level(root.level)
    window = root.leaf_slice(grid.depth)
    outside = np.ones(grid.leaf_count, dtype=bool)
    outside[window] = False
    if np.any(f.as_float()[outside] != 0):
        raise ValueError("function is not supported in the root cube")

    r = haar_extraction_ratio(spec) if r is None else float(as_ratio(r))
    local = f.as_float().copy()
    mean = float(local[window].mean())
    local[window] -= mean
    f = f.with_values(local)

    spec = spec.restricted(root)
    norms = haar.measure_shift_norms(spec, grid)
    operator_norm = haar.norm_safety() * norms["sup_maximal"]
    factor = operator_norm ** 2 / math.sqrt(r)
    rounds = spec.t + spec.s + 1

    shift_stack = haar.localized_max_trunc_stack(f, spec)
    doob_stack = localized_doob_stack(f).astype(float)
    members: List[Cube] = []
    rhs = np.zeros(grid.leaf_count)
    pending = [root]
    while pending:
        cube = pending.pop()
        members.append(cube)
        span = cube.leaf_slice(grid.depth)
        maximal = doob_stack[cube.level][span]
        percentile = row_percentiles(maximal, np.ones(maximal.shape[0]), r)[0]
        rhs[span] += percentile
        threshold = factor * percentile
        stopped = np.zeros(grid.leaf_count, dtype=bool)
        stopped[span] = (shift_stack[cube.level][span] > threshold) | (maximal > percentile)
        enlarged = haar.enlarge(stopped, cube, rounds, grid)
        pending.extend(haar.maximal_subcubes(enlarged[span], cube))
    logger.debug("Haar shift extraction selected %d cubes below %s", len(members), root)

    family = SparseFamily.from_cubes(grid, members, eta=0.5)
    sparsity = verify_sparsity(family)
    lhs = haar.shift_max_trunc(f, spec).as_float()
    domination = check_domination(
        lhs, rhs, None, "haar-shift-domination",
        {"r": r, "C0": haar.complexity_constant(spec), "t": spec.t, "s": spec.s,
         "operator_norm": operator_norm, "enlargements": rounds, "removed_mean": mean,
         "members": len(members)},
    )
    return HaarExtraction(family, sparsity, domination, r, mean)
