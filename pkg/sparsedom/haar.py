"""
Haar expansion and Haar shifts of complexity (t, s) on the uniform dyadic grid.

Layers
A shift is a sum over cube levels k of layers L_k, where L_k collects the
terms whose outer cube Q sits at level k. Each layer is one scatter of
Haar coefficients from level k+t to level k+s followed by synthesis, so a
(N, 2^N) layer array drives the shift, its localizations and Sh*: the
windowed sums over [l, m] are differences of prefix sums of the layers, and
their supremum is max - min of those prefix sums.

Norms
Operator norms entering proof constants are measured by power iteration and
cached in the Django cache under the coefficient fingerprint, so repeated
audits on one operator pay for the iteration once.
"""

from __future__ import annotations

import hashlib
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
from django.conf import settings
from django.core.cache import cache

from .dyadic import (
    Cube,
    DyadicGrid,
    GridFunction,
    as_ratio,
    cube_percentiles,
    localized_doob_stack,
)
from .reports import DominationReport, check_domination

logger = logging.getLogger(__name__)

#Constants to be applied
NORM_CACHE_PREFIX = "haar_norms"
DEFAULT_POWER_ITERATIONS = 50
DEFAULT_NORM_SAFETY = 1.01
ENLARGEMENT_THRESHOLD = 1.0 / 3.0   #1/(2^d + 1) at d = 1

CoefficientKey = Tuple[Cube, Cube, Cube]


def _require_uniform(grid: DyadicGrid) -> None:
    if not grid.is_uniform or grid.exact:
        raise ValueError("the Haar basis is fixed for the uniform float grid only")


#Expansion

def haar_coefficients(f: GridFunction) -> List[np.ndarray]:
    """<f, h_Q> for every cube of level < N, one array per level."""
    grid = f.grid
    _require_uniform(grid)
    weighted = f.as_float() * np.asarray(grid.leaf_measure, dtype=float)
    coefficients = []
    for k in range(grid.depth):
        halves = grid.reduce(weighted, k + 1).reshape(1 << k, 2)
        coefficients.append((halves[:, 0] - halves[:, 1]) * 2.0 ** (k / 2.0))
    return coefficients


def haar_expand(f: GridFunction) -> Dict[Cube, float]:
    expansion = {}
    for k, level in enumerate(haar_coefficients(f)):
        for index, value in enumerate(level):
            expansion[Cube(k, index)] = float(value)
    return expansion


def _synthesize_level(grid: DyadicGrid, coefficients: np.ndarray, k: int) -> np.ndarray:
    #Sum of c_Q h_Q over level-k cubes, on the leaves
    signed = np.stack([coefficients, -coefficients], axis=1).ravel() * 2.0 ** (k / 2.0)
    return grid.expand(signed, k + 1)


def haar_synthesize(grid: DyadicGrid, coefficients: List[np.ndarray], mean: float = 0.0) -> GridFunction:
    _require_uniform(grid)
    if len(coefficients) != grid.depth:
        raise ValueError(f"need {grid.depth} coefficient levels, got {len(coefficients)}")
    values = np.full(grid.leaf_count, float(mean))
    for k, level in enumerate(coefficients):
        level = np.asarray(level, dtype=float)
        if level.shape != (1 << k,):
            raise ValueError(f"coefficient level {k} needs {1 << k} entries")
        values += _synthesize_level(grid, level, k)
    return GridFunction(grid, values)


def haar_function(grid: DyadicGrid, cube: Cube) -> GridFunction:
    """L2-normalized h_Q."""
    _require_uniform(grid)
    if cube.level >= grid.depth:
        raise ValueError(f"cube {cube} has no Haar function at depth {grid.depth}")
    values = np.zeros(grid.leaf_count)
    left, right = cube.children()
    height = 2.0 ** (cube.level / 2.0)
    values[left.leaf_slice(grid.depth)] = height
    values[right.leaf_slice(grid.depth)] = -height
    return GridFunction(grid, values)


#Shift coefficients

@dataclass(frozen=True, eq=False)
class HaarShiftSpec:
    """
    Coefficients alpha^Q_{TS} with T in D_t(Q) and S in D_s(Q), stored sparsely.
    """

    t: int
    s: int
    alpha: Mapping[CoefficientKey, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.t < 0 or self.s < 0:
            raise ValueError(f"complexity must be nonnegative, got ({self.t}, {self.s})")
        checked = {}
        for (outer, source, target), value in dict(self.alpha).items():
            if source.level != outer.level + self.t or not outer.contains(source):
                raise ValueError(f"{source} is not in generation {self.t} below {outer}")
            if target.level != outer.level + self.s or not outer.contains(target):
                raise ValueError(f"{target} is not in generation {self.s} below {outer}")
            value = float(value)
            if not math.isfinite(value):
                raise ValueError(f"coefficient at {outer} is not finite")
            checked[(outer, source, target)] = value
        object.__setattr__(self, "alpha", checked)

    @property
    def norm_bound(self) -> float:
        return max((abs(v) for v in self.alpha.values()), default=0.0)

    @cached_property
    def _entries(self) -> Dict[int, Tuple[np.ndarray, np.ndarray, np.ndarray]]:
        grouped = defaultdict(list)
        for (outer, source, target), value in self.alpha.items():
            if value != 0.0:
                grouped[outer.level].append((source.index, target.index, value))
        return {
            level: tuple(np.array(column) for column in zip(*rows))
            for level, rows in sorted(grouped.items())
        }

    @cached_property
    def fingerprint(self) -> str:
        digest = hashlib.sha1(f"{self.t}:{self.s}".encode())
        for (outer, source, target), value in sorted(self.alpha.items()):
            digest.update(f"|{outer.level},{outer.index},{source.index},{target.index},{value!r}".encode())
        return digest.hexdigest()

    def check_grid(self, grid: DyadicGrid) -> None:
        deepest = max((level + max(self.t, self.s) for level in self._entries), default=-1)
        if deepest >= grid.depth:
            raise ValueError(
                f"coefficient key outside grid: level {deepest} has no Haar functions at depth {grid.depth}"
            )

    def transpose(self) -> "HaarShiftSpec":
        return HaarShiftSpec(
            self.s, self.t, {(outer, target, source): v for (outer, source, target), v in self.alpha.items()}
        )

    def restricted(self, root: Cube) -> "HaarShiftSpec":
        """Terms with outer cube inside root (the localized shift Sh_root)."""
        return HaarShiftSpec(
            self.t, self.s, {key: v for key, v in self.alpha.items() if root.contains(key[0])}
        )

    def from_level(self, level: int) -> "HaarShiftSpec":
        return HaarShiftSpec(self.t, self.s, {key: v for key, v in self.alpha.items() if key[0].level >= level})

    @classmethod
    def identity(cls, depth: int) -> "HaarShiftSpec":
        """t = s = 0 with alpha^Q_{QQ} = 1: the identity on mean-zero functions."""
        alpha = {}
        for k in range(depth):
            for index in range(1 << k):
                cube = Cube(k, index)
                alpha[(cube, cube, cube)] = 1.0
        return cls(0, 0, alpha)

    @classmethod
    def random(cls, depth: int, t: int, s: int, seed: int, bound: float = 1.0) -> "HaarShiftSpec":
        """Uniform coefficients in [-bound, bound] on every admissible triple."""
        rng = np.random.default_rng(seed)
        alpha = {}
        for k in range(max(depth - max(t, s), 0)):
            for index in range(1 << k):
                outer = Cube(k, index)
                sources = range(index << t, (index + 1) << t)
                targets = range(index << s, (index + 1) << s)
                values = rng.uniform(-bound, bound, size=(len(sources), len(targets)))
                for a, source in enumerate(sources):
                    for b, target in enumerate(targets):
                        alpha[(outer, Cube(k + t, source), Cube(k + s, target))] = float(values[a, b])
        return cls(t, s, alpha)

    def block_norm(self) -> float:
        """
        Exact L2 operator norm: Sh is block diagonal over outer cubes, each
        block the 2^s x 2^t coefficient matrix.
        """
        blocks = defaultdict(lambda: np.zeros((1 << self.s, 1 << self.t)))
        for (outer, source, target), value in self.alpha.items():
            local_source = source.index - (outer.index << self.t)
            local_target = target.index - (outer.index << self.s)
            blocks[outer][local_target, local_source] = value
        return max((float(np.linalg.norm(block, 2)) for block in blocks.values()), default=0.0)


#Application

def shift_layers(f: GridFunction, spec: HaarShiftSpec) -> np.ndarray:
    """Row k is the contribution of outer cubes at level k; shape (N, 2^N)."""
    grid = f.grid
    spec.check_grid(grid)
    coefficients = haar_coefficients(f)
    layers = np.zeros((grid.depth, grid.leaf_count))
    for level, (sources, targets, values) in spec._entries.items():
        scattered = np.zeros(1 << (level + spec.s))
        np.add.at(scattered, targets, values * coefficients[level + spec.t][sources])
        layers[level] = _synthesize_level(grid, scattered, level + spec.s)
    return layers


def apply_shift(f: GridFunction, spec: HaarShiftSpec, root: Optional[Cube] = None) -> GridFunction:
    if root is not None:
        spec = spec.restricted(root)
    return f.with_values(shift_layers(f, spec).sum(axis=0))


def _window_supremum(layers: np.ndarray) -> np.ndarray:
    #sup over windows l <= m of |sum_{k=l}^m layer_k| = max - min of prefix sums (with 0)
    if layers.shape[0] == 0:
        return np.zeros(layers.shape[1])
    prefix = np.vstack([np.zeros((1, layers.shape[1])), np.cumsum(layers, axis=0)])
    return prefix.max(axis=0) - prefix.min(axis=0)


def shift_max_trunc(f: GridFunction, spec: HaarShiftSpec, root: Optional[Cube] = None) -> GridFunction:
    if root is not None:
        spec = spec.restricted(root)
    return f.with_values(_window_supremum(shift_layers(f, spec)))


def localized_max_trunc_stack(f: GridFunction, spec: HaarShiftSpec) -> np.ndarray:
    """
    Row k holds Sh*_Q f on every level-k cube Q at once (windows use layers >= k).
    """
    layers = shift_layers(f, spec)
    depth = f.grid.depth
    stack = np.zeros((depth + 1, f.grid.leaf_count))
    for k in range(depth):
        stack[k] = _window_supremum(layers[k:])
    return stack


#Norms

def _power_iteration(grid: DyadicGrid, spec: HaarShiftSpec, iterations: int) -> Tuple[float, float]:
    #Returns (linear norm estimate, largest Sh*/identity ratio seen along the iterates)
    adjoint = spec.transpose()
    rng = np.random.default_rng(0)
    vector = rng.standard_normal(grid.leaf_count)
    vector /= np.linalg.norm(vector)
    estimate, maximal_ratio = 0.0, 0.0
    for _ in range(iterations):
        f = GridFunction(grid, vector)
        image = shift_layers(f, spec)
        estimate = max(estimate, float(np.linalg.norm(image.sum(axis=0))))
        maximal_ratio = max(maximal_ratio, float(np.linalg.norm(_window_supremum(image))))
        back = apply_shift(GridFunction(grid, image.sum(axis=0)), adjoint).values
        size = np.linalg.norm(back)
        if size == 0.0:
            break
        vector = back / size
    return estimate, maximal_ratio


def measure_shift_norms(spec: HaarShiftSpec, grid: DyadicGrid, iterations: Optional[int] = None) -> Dict[str, object]:
    """
    Measured ||Sh_(k)|| and ||Sh*_(k)|| on L2 for every level k, where Sh_(k)
    keeps the outer cubes at level >= k. Cached by coefficient fingerprint.
    """
    _require_uniform(grid)
    spec.check_grid(grid)
    iterations = iterations or getattr(settings, "SPARSEDOM_POWER_ITERATIONS", DEFAULT_POWER_ITERATIONS)
    cache_key = f"{NORM_CACHE_PREFIX}:{spec.fingerprint}:{grid.depth}:{iterations}"
    cached = cache.get(cache_key)
    if cached is not None:
        logger.debug("Shift norms served from cache for %s", spec.fingerprint[:12])
        return cached

    linear, maximal = [], []
    for k in range(grid.depth + 1):
        estimate, ratio = _power_iteration(grid, spec.from_level(k), iterations)
        linear.append(estimate)
        maximal.append(max(estimate, ratio))
    measured = {
        "linear": linear,
        "maximal": maximal,
        "block_norm": spec.block_norm(),
        "norm_bound": spec.norm_bound,
        "iterations": iterations,
        "sup_maximal": max(maximal),
        "sup_over": "represented cubes",
    }
    cache.set(cache_key, measured, getattr(settings, "SPARSEDOM_NORM_CACHE_TTL", None))
    logger.debug("Measured shift norms for %s: sup %.6g", spec.fingerprint[:12], measured["sup_maximal"])
    return measured


def norm_safety() -> float:
    return float(getattr(settings, "SPARSEDOM_NORM_SAFETY", DEFAULT_NORM_SAFETY))


def complexity_constant(spec: HaarShiftSpec) -> int:
    """C_0 = 3^(s+t+1) + 1 at d = 1."""
    return 3 ** (spec.s + spec.t + 1) + 1


def local_median_audit(f: GridFunction, spec: HaarShiftSpec, r=None) -> DominationReport:
    """
    P_Q^{C0 r}(Sh*_Q f) <= (||Sh*||^2 / sqrt r) P_Q^r(M_Q f) on every cube Q,
    with the measured norm times the safety factor.
    """
    grid = f.grid
    c0 = complexity_constant(spec)
    r = 1.0 / (2.0 * c0) if r is None else float(as_ratio(r))
    if r >= 1.0 / c0:
        raise ValueError(f"local median estimate needs r < 1/C0 = {1.0 / c0:.6g}, got {r}")
    norms = measure_shift_norms(spec, grid)
    operator_norm = norm_safety() * norms["sup_maximal"]

    maximal_stack = localized_max_trunc_stack(f, spec)
    doob_stack = localized_doob_stack(f).astype(float)
    lhs_rows, rhs_rows = [], []
    for k in range(grid.depth + 1):
        lhs_rows.append(grid.expand(cube_percentiles(maximal_stack[k], grid, k, c0 * r), k))
        rhs_rows.append(
            operator_norm ** 2 / math.sqrt(r) * grid.expand(cube_percentiles(doob_stack[k], grid, k, r), k)
        )
    return check_domination(
        np.vstack(lhs_rows), np.vstack(rhs_rows), 1.0, "haar-local-median",
        {"r": r, "C0": c0, "t": spec.t, "s": spec.s, "operator_norm": operator_norm,
         "norms": norms, "witness_kind": "level*leaves+leaf"},
    )


#Enlargement

def local_dyadic_maximal(mask: np.ndarray) -> np.ndarray:
    """Dyadic maximal function of a local indicator over the subcubes of its block."""
    values = np.asarray(mask, dtype=float)
    size = values.shape[0]
    depth = size.bit_length() - 1
    best = np.zeros(size)
    for j in range(depth + 1):
        means = values.reshape(1 << j, -1).mean(axis=1)
        best = np.maximum(best, np.repeat(means, size >> j))
    return best


def enlarge(mask: np.ndarray, root: Cube, n: int, grid: DyadicGrid, threshold: float = ENLARGEMENT_THRESHOLD) -> np.ndarray:
    """
    A^(0) = A within root, A^(j) = {x in root : M_root 1_{A^(j-1)} > threshold}.
    Returns a leaf mask on the whole grid.
    """
    _require_uniform(grid)
    window = root.leaf_slice(grid.depth)
    local = np.asarray(mask, dtype=bool)[window].copy()
    for _ in range(n):
        local = local_dyadic_maximal(local) > threshold
    out = np.zeros(grid.leaf_count, dtype=bool)
    out[window] = local
    return out


def maximal_subcubes(local_mask: np.ndarray, root: Cube) -> List[Cube]:
    """Maximal dyadic cubes strictly inside root contained in a local leaf mask."""
    mask = np.asarray(local_mask, dtype=bool)
    depth = mask.shape[0].bit_length() - 1
    found = []
    parent_full = np.zeros(1, dtype=bool)
    for j in range(1, depth + 1):
        full = mask.reshape(1 << j, -1).all(axis=1)
        fresh = full & ~np.repeat(parent_full, 2)
        for index in np.flatnonzero(fresh):
            found.append(Cube(root.level + j, (root.index << j) + int(index)))
        parent_full = full
    return found
