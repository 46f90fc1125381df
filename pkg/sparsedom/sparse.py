"""
Sparse families, their audits and the sparse operators A_S, M_S and C_S.

Two representations
* adapted: one boolean vector per level k over the level-k cubes (S_k is a
  union of level-k cubes), used by every martingale-side extractor;
* flat: arbitrary cell masks with optional disjoint witnesses, used by the
  greedy engine where members (intervals, rectangles) are not nested.

Sparsity is audited the way the definitions read: conditional overlap
E_k[1_{S_{>=k+1}}] <= 1 - eta on S_k for the adapted form, and disjoint
witnesses of relative mass >= eta for the flat form.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .dyadic import (
    NEVER,
    Cube,
    DyadicGrid,
    GridFunction,
    StoppingTime,
    _check_same_grid,
    as_ratio,
    doob_maximal,
    expectation_stack,
    percentile_stack,
    row_percentiles,
    take_at,
)
from .reports import DominationReport, check_domination, check_ratio

logger = logging.getLogger(__name__)

ADAPTED = "adapted"
FLAT = "flat"

#Operator modes
SUM = "sum-A"
MAX = "max-M"
CANCELLATIVE = "cancellative-C"
MODES = (SUM, MAX, CANCELLATIVE)


@dataclass(frozen=True, eq=False)
class SparseFamily:
    """
    A family of sets with a claimed sparsity ratio eta.

    Adapted families fill ``grid`` and ``levels``; flat families fill
    ``cell_measure`` and ``sets`` (plus optional ``witnesses`` and ``labels``).
    """

    kind: str
    eta: float
    grid: Optional[DyadicGrid] = None
    levels: Tuple[np.ndarray, ...] = ()
    cell_measure: Optional[np.ndarray] = None
    sets: Tuple[np.ndarray, ...] = ()
    witnesses: Optional[Tuple[np.ndarray, ...]] = None
    labels: Tuple[Any, ...] = ()

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError(f"sparsity ratio must lie in (0,1], got {self.eta}")
        if self.kind == ADAPTED:
            self._validate_adapted()
        elif self.kind == FLAT:
            self._validate_flat()
        else:
            raise ValueError(f"malformed family: unknown kind {self.kind!r}")

    def _validate_adapted(self) -> None:
        if self.grid is None or len(self.levels) != self.grid.depth + 1:
            raise ValueError("malformed family: adapted form needs one level vector per grid level")
        frozen = []
        for k, level in enumerate(self.levels):
            level = np.array(level, dtype=bool).ravel()
            if level.shape != (1 << k,):
                raise ValueError(f"malformed family: level {k} needs {1 << k} cube flags")
            level.setflags(write=False)
            frozen.append(level)
        object.__setattr__(self, "levels", tuple(frozen))

    def _validate_flat(self) -> None:
        if self.cell_measure is None:
            raise ValueError("malformed family: flat form needs a cell measure")
        measure = np.asarray(self.cell_measure, dtype=float)
        if np.any(measure <= 0):
            raise ValueError("malformed family: cell measures must be positive")
        sets = tuple(np.asarray(mask, dtype=bool) for mask in self.sets)
        for mask in sets:
            if mask.shape != measure.shape:
                raise ValueError("malformed family: set mask does not match the cell grid")
            if not mask.any():
                raise ValueError("malformed family: members must have positive measure")
        if self.witnesses is not None:
            witnesses = tuple(np.asarray(mask, dtype=bool) for mask in self.witnesses)
            if len(witnesses) != len(sets):
                raise ValueError("malformed family: one witness per member is required")
            for member, witness in zip(sets, witnesses):
                if witness.shape != measure.shape or np.any(witness & ~member):
                    raise ValueError("malformed family: a witness leaves its member")
            object.__setattr__(self, "witnesses", witnesses)
        object.__setattr__(self, "cell_measure", measure)
        object.__setattr__(self, "sets", sets)

    #Constructors

    @classmethod
    def adapted(cls, grid: DyadicGrid, levels: Sequence, eta: float = 0.5) -> "SparseFamily":
        return cls(kind=ADAPTED, eta=eta, grid=grid, levels=tuple(levels))

    @classmethod
    def empty(cls, grid: DyadicGrid, eta: float = 0.5) -> "SparseFamily":
        return cls.adapted(grid, [np.zeros(1 << k, dtype=bool) for k in range(grid.depth + 1)], eta)

    @classmethod
    def from_cubes(cls, grid: DyadicGrid, cubes: Iterable[Cube], eta: float = 0.5) -> "SparseFamily":
        levels = [np.zeros(1 << k, dtype=bool) for k in range(grid.depth + 1)]
        for cube in cubes:
            grid.check_level(cube.level)
            levels[cube.level][cube.index] = True
        return cls.adapted(grid, levels, eta)

    @classmethod
    def from_leaf_sets(cls, grid: DyadicGrid, leaf_masks: np.ndarray, eta: float = 0.5) -> "SparseFamily":
        """Rows are leaf masks of S_0..S_N; each must be a union of cubes of its level."""
        masks = np.asarray(leaf_masks, dtype=bool)
        if masks.shape != (grid.depth + 1, grid.leaf_count):
            raise ValueError("malformed family: need one leaf mask per level")
        levels = []
        for k in range(grid.depth + 1):
            blocks = masks[k].reshape(1 << k, -1)
            if np.any(blocks.any(axis=1) & ~blocks.all(axis=1)):
                raise ValueError(f"non-adapted input: S_{k} is not a union of level-{k} cubes")
            levels.append(blocks.all(axis=1))
        return cls.adapted(grid, levels, eta)

    @classmethod
    def flat(cls, cell_measure, sets, witnesses=None, eta: float = 0.5, labels=()) -> "SparseFamily":
        return cls(
            kind=FLAT, eta=eta, cell_measure=np.asarray(cell_measure, dtype=float),
            sets=tuple(sets), witnesses=None if witnesses is None else tuple(witnesses),
            labels=tuple(labels),
        )

    #Views

    def __len__(self) -> int:
        if self.kind == ADAPTED:
            return int(sum(level.sum() for level in self.levels))
        return len(self.sets)

    def leaf_masks(self) -> np.ndarray:
        self._require(ADAPTED)
        return np.vstack([self.grid.expand(level, k) for k, level in enumerate(self.levels)])

    def cubes(self) -> List[Cube]:
        self._require(ADAPTED)
        return [Cube(k, int(i)) for k, level in enumerate(self.levels) for i in np.flatnonzero(level)]

    def _require(self, kind: str) -> None:
        if self.kind != kind:
            raise ValueError(f"operation needs the {kind} form, family is {self.kind}")


#Sparsity audits

def verify_sparsity(family: SparseFamily, eta: Optional[float] = None) -> DominationReport:
    """
    Adapted form: per-atom overlap E_k[1_{S_{>=k+1}}] on S_k against 1 - eta.
    Flat form: certify disjoint witnesses (stored ones, or greedily in insertion
    order) and compare the achieved ratio against eta.
    """
    eta = family.eta if eta is None else eta
    if family.kind == ADAPTED:
        report = _adapted_overlap(family, eta)
    else:
        report = _flat_witness_audit(family, eta)
    logger.debug("Sparsity audit of %d members: achieved eta %.6g", len(family), report.measured["achieved_eta"])
    return report


def _adapted_overlap(family: SparseFamily, eta: float) -> DominationReport:
    grid = family.grid
    masks = family.leaf_masks()
    overlap = np.zeros(grid.leaf_count)
    later = np.zeros(grid.leaf_count, dtype=bool)
    for k in range(grid.depth, -1, -1):
        if masks[k].any():
            fraction = grid.expand(grid.average(later.astype(float), k), k)
            fraction = np.asarray(fraction, dtype=float)
            overlap = np.where(masks[k], np.maximum(overlap, fraction), overlap)
        later |= masks[k]
    report = check_domination(
        overlap, np.ones(grid.leaf_count), 1.0 - eta, "sparsity-adapted",
        {"eta": eta, "members": len(family)},
    )
    report.measured["achieved_eta"] = 1.0 - report.best_constant
    return report


def certify_witnesses(family: SparseFamily) -> Tuple[np.ndarray, ...]:
    """Witnesses E_i = S_i minus the witnesses certified before it."""
    family._require(FLAT)
    claimed = np.zeros(family.cell_measure.shape, dtype=bool)
    witnesses = []
    for mask in family.sets:
        witness = mask & ~claimed
        claimed |= witness
        witnesses.append(witness)
    return tuple(witnesses)


def _flat_witness_audit(family: SparseFamily, eta: float) -> DominationReport:
    measure = family.cell_measure
    witnesses = family.witnesses if family.witnesses is not None else certify_witnesses(family)
    claimed = np.zeros(measure.shape, dtype=bool)
    for witness in witnesses:
        if np.any(claimed & witness):
            raise ValueError("malformed family: stored witnesses are not disjoint")
        claimed |= witness
    fractions = np.array([
        measure[witness].sum() / measure[member].sum()
        for member, witness in zip(family.sets, witnesses)
    ])
    report = check_domination(
        1.0 - fractions, np.ones(len(fractions)), 1.0 - eta, "sparsity-flat",
        {"eta": eta, "members": len(family)},
    )
    report.measured["achieved_eta"] = float(fractions.min()) if fractions.size else 1.0
    report.measured["worst_member"] = report.witness_leaf
    if report.witness_leaf is not None:
        report.witness_leaf = int(np.argmax(family.sets[report.witness_leaf].ravel()))
    return report


#Stopping-time representation

@dataclass(frozen=True, eq=False)
class StoppingSequence:
    """Increasing stopping times nu_0 < nu_1 < ... (strict where finite)."""

    grid: DyadicGrid
    times: Tuple[StoppingTime, ...]

    def __post_init__(self):
        for earlier, later in zip(self.times, self.times[1:]):
            _check_same_grid(earlier, later)
            finite = earlier.finite
            if np.any(later.finite & ~finite):
                raise ValueError("stopping sequence restarts after an infinite time")
            if np.any(later.levels[finite & later.finite] <= earlier.levels[finite & later.finite]):
                raise ValueError("stopping sequence is not strictly increasing")
        object.__setattr__(self, "times", tuple(self.times))

    def __len__(self) -> int:
        return len(self.times)

    def stack(self) -> np.ndarray:
        if not self.times:
            return np.zeros((0, self.grid.leaf_count), dtype=np.int64)
        return np.vstack([nu.levels for nu in self.times])


def convert_representation(family: SparseFamily) -> StoppingSequence:
    """nu_j(x) is the level of the (j+1)-th member containing x."""
    family._require(ADAPTED)
    grid = family.grid
    masks = family.leaf_masks()
    counts = np.cumsum(masks, axis=0)
    times = []
    for j in range(int(counts[-1].max()) if masks.size else 0):
        hit = masks & (counts == j + 1)
        levels = np.where(hit.any(axis=0), np.argmax(hit, axis=0), NEVER)
        times.append(StoppingTime(grid, levels))
    return StoppingSequence(grid, tuple(times))


def family_from_stopping(sequence: StoppingSequence, eta: float = 0.5) -> SparseFamily:
    """S_m is the union over j of {nu_j = m}."""
    grid = sequence.grid
    levels = []
    for m in range(grid.depth + 1):
        hit = np.zeros(grid.leaf_count, dtype=bool)
        for nu in sequence.times:
            hit |= nu.levels == m
        levels.append(hit.reshape(1 << m, -1).any(axis=1))
    return SparseFamily.adapted(grid, levels, eta)


def stopping_sequence_overlap(sequence: StoppingSequence, bound: float = 0.5) -> DominationReport:
    """E[1_{E_{j+1}} | F_{nu_j}] <= bound on E_j = {nu_j < infinity}, for every j."""
    grid = sequence.grid
    overlap = np.zeros(grid.leaf_count)
    for current, following in zip(sequence.times, sequence.times[1:]):
        indicator = GridFunction(grid, following.finite.astype(float))
        conditional = np.asarray(take_at(expectation_stack(indicator), current), dtype=float)
        overlap = np.where(current.finite, np.maximum(overlap, conditional), overlap)
    return check_domination(
        overlap, np.ones(grid.leaf_count), bound, "sparse-stopping-sequence",
        {"times": len(sequence), "bound": bound},
    )


#Sparse operators

def apply_sparse(f, family: SparseFamily, mode: str, r=None):
    if mode not in MODES:
        raise ValueError(f"unknown sparse operator mode {mode!r}")
    if mode == CANCELLATIVE and r is None:
        raise ValueError("the cancellative operator needs a ratio r")
    if family.kind == ADAPTED:
        return _apply_adapted(f, family, mode, r)
    return _apply_flat(f, family, mode, r)


def _apply_adapted(f: GridFunction, family: SparseFamily, mode: str, r) -> GridFunction:
    _check_same_grid(f, family)
    masks = family.leaf_masks()
    if mode == CANCELLATIVE:
        stack = percentile_stack(np.abs(f.values), f.grid, r)
    else:
        stack = np.abs(expectation_stack(f))
    selected = np.where(masks, stack, 0)
    return f.with_values(selected.max(axis=0) if mode == MAX else selected.sum(axis=0))


def _apply_flat(f, family: SparseFamily, mode: str, r):
    values = np.asarray(getattr(f, "values", f), dtype=float)
    measure = family.cell_measure
    if values.shape != measure.shape:
        raise ValueError("function and family live on different cell grids")
    ratio = None if r is None else float(as_ratio(r))
    out = np.zeros(measure.shape)
    for mask in family.sets:
        cells, weights = values[mask], measure[mask]
        if mode == CANCELLATIVE:
            term = row_percentiles(np.abs(cells), weights, ratio)[0]
        else:
            term = abs((cells * weights).sum()) / weights.sum()
        if mode == MAX:
            out[mask] = np.maximum(out[mask], term)
        else:
            out[mask] += term
    return f.with_values(out) if isinstance(f, GridFunction) else out


#Norm audits

def _integral(values, grid: DyadicGrid) -> float:
    return float((np.asarray(values, dtype=float) * np.asarray(grid.leaf_measure, dtype=float)).sum())


def sparse_h1_upper_audit(f: GridFunction, family: SparseFamily) -> DominationReport:
    """||A_S f||_1 <= 2 ||M f||_1 for a 1/2-sparse family."""
    lhs = _integral(apply_sparse(f, family, SUM).values, f.grid)
    rhs = _integral(doob_maximal(f).values, f.grid)
    return check_ratio(lhs, rhs, 2.0, "theoremB-upper", {"members": len(family)})


def sparse_h1_lower_audit(f: GridFunction, family: SparseFamily) -> DominationReport:
    """||M f||_1 <= 4 ||A_S f||_1 for the layered family."""
    lhs = _integral(doob_maximal(f).values, f.grid)
    rhs = _integral(apply_sparse(f, family, SUM).values, f.grid)
    return check_ratio(lhs, rhs, 4.0, "theoremB-lower", {"members": len(family)})


def cs_lp_audit(f: GridFunction, family: SparseFamily, r, p: float) -> DominationReport:
    """||C_S f||_p^p <= 8 r^-2 ||f||_p^p."""
    if p <= 0:
        raise ValueError(f"exponent must be positive, got {p}")
    ratio = float(as_ratio(r))
    cancellative = apply_sparse(f, family, CANCELLATIVE, ratio)
    lhs = _integral(np.abs(cancellative.as_float()) ** p, f.grid)
    rhs = _integral(np.abs(f.as_float()) ** p, f.grid)
    return check_ratio(lhs, rhs, 8.0 / ratio ** 2, "cs-lp-bound", {"r": ratio, "p": p, "members": len(family)})


#Generators and Carleson packing

def random_sparse_family(grid: DyadicGrid, rng: np.random.Generator, eta: float = 0.5) -> SparseFamily:
    """
    Tree-shaped eta-sparse family: every member picks disjoint descendants at
    one random deeper level with total mass at most (1 - eta) of its own.
    """
    levels = [np.zeros(1 << k, dtype=bool) for k in range(grid.depth + 1)]
    pending = [Cube(0, 0)]
    while pending:
        cube = pending.pop()
        levels[cube.level][cube.index] = True
        if cube.level == grid.depth:
            continue
        target = int(rng.integers(cube.level + 1, grid.depth + 1))
        gap = target - cube.level
        budget = (1.0 - eta) * float(grid.cube_measure(cube))
        used = 0.0
        take = int(rng.integers(0, (1 << gap) + 1))
        for offset in rng.permutation(1 << gap)[:take]:
            child = Cube(target, (cube.index << gap) + int(offset))
            mass = float(grid.cube_measure(child))
            if used + mass > budget:
                continue
            used += mass
            pending.append(child)
    return SparseFamily.adapted(grid, levels, eta)


def carleson_constant(cubes: Iterable[Cube]) -> float:
    """max over members Q of sum_{R member, R inside Q} |R| / |Q| (Lebesgue)."""
    members = sorted(set(cubes))
    worst = 0.0
    for outer in members:
        packed = sum(2.0 ** (outer.level - inner.level) for inner in members if outer.contains(inner))
        worst = max(worst, packed)
    return worst


def best_sparsity_ratio(cubes: Iterable[Cube]) -> float:
    """Largest eta for which the dyadic family is eta-sparse: the inverse Carleson constant."""
    constant = carleson_constant(cubes)
    return 1.0 if constant == 0.0 else 1.0 / constant
