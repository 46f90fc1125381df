"""
The T_N construction and the forced-set audit showing that M f cannot be
dominated by a sparse sum of plain averages with a fixed constant.

T_N f lives N levels below f: it places alternating copies +-A f_J on the
level-N intervals J_2, ..., J_(2^N - 1) and one dilated copy 2^(N-1) f on
the last level-(N-1) interval, so the averages over [0, 2^-k) vanish while
those over the remaining level-N intervals are large.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Tuple

import numpy as np

from .dyadic import Cube, GridFunction, build_grid, to_fraction
from .reports import DominationReport, check_domination
from .sparse import best_sparsity_ratio

logger = logging.getLogger(__name__)

MIN_LAYER_N = 3
MIN_AMPLIFICATION = 8


def _child_grid(f: GridFunction, n: int):
    try:
        return build_grid(f.grid.depth + n, exact=f.grid.exact)
    except ValueError as exc:
        raise ValueError(f"depth overflow: {f.grid.depth} + {n} levels ({exc})") from exc


def _check_uniform(f: GridFunction) -> None:
    if not f.grid.is_uniform:
        raise ValueError("rescaled copies need the uniform grid")


def replicate(f: GridFunction, n: int) -> GridFunction:
    """R_N f: 2^N concatenated copies of f at scale 2^-N."""
    _check_uniform(f)
    if n < 0:
        raise ValueError(f"copy level must be nonnegative, got {n}")
    grid = _child_grid(f, n)
    return GridFunction(grid, np.tile(f.values, 1 << n))


def excluded_indices(n: int) -> Tuple[int, ...]:
    """Indices of D_N removed to form D'_N: the pairs at 0, at 1/2 and at the right end."""
    half = 1 << (n - 1)
    last = (1 << n) - 2
    return (0, 1, half, half + 1, last, last + 1)


def reduced_indices(n: int) -> List[int]:
    excluded = set(excluded_indices(n))
    return [i for i in range(1 << n) if i not in excluded]


def build_TN(f: GridFunction, n: int, amplification) -> GridFunction:
    _check_uniform(f)
    if n < MIN_LAYER_N:
        raise ValueError(f"T_N needs N >= {MIN_LAYER_N}, got {n}")
    grid = _child_grid(f, n)
    exact = grid.exact
    amplification = to_fraction(amplification) if exact else float(amplification)
    if amplification <= 0:
        raise ValueError(f"amplification must be positive, got {amplification}")

    size = f.grid.leaf_count
    values = np.zeros(grid.leaf_count, dtype=object if exact else float)
    if exact:
        values[:] = Fraction(0)
    blocks = values.reshape(1 << n, size)
    for index in range(2, 1 << n):
        sign = 1 if index % 2 == 0 else -1
        blocks[index] = blocks[index] + sign * amplification * f.values
    tail = 2 * size
    values[-tail:] = values[-tail:] + (1 << (n - 1)) * np.repeat(f.values, 2)
    return GridFunction(grid, values)


def _interval_average(f: GridFunction, cube: Cube):
    return f.grid.average(f.values, cube.level)[cube.index]


def tn_lemma_audit(f: GridFunction, n: int, amplification) -> List[DominationReport]:
    """
    The three properties of T_N f:
    large averages on D'_N, vanishing averages on [0, 2^-k) for k = 1..N,
    and the preserved total average.
    """
    image = build_TN(f, n, amplification)
    offset = f.grid.depth
    mean = f.mean()
    level = offset + n

    #Level-N intervals of [0,1) in the leaf grid of the image
    averages = image.grid.average(image.values, n)
    reduced = reduced_indices(n)
    large = check_domination(
        np.full(len(reduced), float(abs(amplification * mean))),
        np.abs(np.asarray(averages[reduced], dtype=float)),
        1.0, "tn-large-averages", {"N": n, "A": float(amplification), "image_depth": level},
    )

    vanishing = np.array([abs(_interval_average(image, Cube(k, 0))) for k in range(1, n + 1)], dtype=object)
    zero = check_domination(
        np.asarray(vanishing, dtype=float), np.zeros(n), 0.0, "tn-vanishing-left",
        {"N": n, "exact_zero": bool(all(v == 0 for v in vanishing))},
    )

    drift = abs(image.mean() - mean)
    preserved = check_domination(
        np.array([float(drift)]), np.zeros(1), 0.0, "tn-preserved-mean",
        {"N": n, "mean": mean, "exact_zero": bool(drift == 0)},
    )
    return [large, zero, preserved]


def right_edge_profile(image: GridFunction, n: int) -> List:
    """Average of the rightmost interval of each level 0..N-1 (the 2^k <f> growth)."""
    return [_interval_average(image, Cube(k, (1 << k) - 1)) for k in range(n)]


@dataclass(frozen=True, eq=False)
class CounterexampleResult:
    function: GridFunction
    forced: List[Cube]
    ratios: List[float]
    report: DominationReport


def _forced_cubes(f: GridFunction, cube: Cube, layers: int, n: int, c0: float, found: List[Cube]) -> None:
    found.append(cube)
    if layers == 0:
        return
    averages = f.grid.average(f.values, cube.level + n)
    base = cube.index << n
    for offset in reduced_indices(n):
        child = Cube(cube.level + n, base + offset)
        if abs(float(averages[child.index])) > c0:
            _forced_cubes(f, child, layers - 1, n, c0, found)


def forced_set(f: GridFunction, layers: int, n: int, c0: float) -> List[Cube]:
    """Cubes any family satisfying M f <= C0 sum |<f>_J| 1_J must contain."""
    found: List[Cube] = []
    _forced_cubes(f, Cube(0, 0), layers, n, c0, found)
    return found


def counterexample_sequence(layers: int, per_layer_n: int, amplification, c0: float = 1.0, exact: bool = False) -> CounterexampleResult:
    """f_0 = 1 and f_n = T_N f_(n-1), with the forced-set sparsity ratio after every layer."""
    if layers < 0:
        raise ValueError(f"layer count must be nonnegative, got {layers}")
    if c0 <= 0:
        raise ValueError(f"domination constant must be positive, got {c0}")
    if float(amplification) < MIN_AMPLIFICATION * c0:
        raise ValueError(f"amplification {amplification} is below {MIN_AMPLIFICATION} * C0 = {MIN_AMPLIFICATION * c0}")

    f = GridFunction.constant(build_grid(0, exact=exact), 1)
    ratios = [best_sparsity_ratio(forced_set(f, 0, per_layer_n, c0))]
    forced = [Cube(0, 0)]
    for layer in range(1, layers + 1):
        f = build_TN(f, per_layer_n, amplification)
        forced = forced_set(f, layer, per_layer_n, c0)
        ratios.append(best_sparsity_ratio(forced))
        logger.debug("Counterexample layer %d: %d forced cubes, ratio %.6g", layer, len(forced), ratios[-1])

    steps = [later / earlier for earlier, later in zip(ratios, ratios[1:])]
    worst = max(steps, default=0.0)
    report = DominationReport(
        inequality_id="counterexample-forced-set",
        best_constant=worst,
        witness_leaf=None,
        proof_constant=None,
        passed=all(step < 1.0 for step in steps),
        measured={"ratios": ratios, "layers": layers, "N": per_layer_n,
                  "A": float(amplification), "C0": c0, "forced_cubes": len(forced)},
    )
    if not report.passed:
        logger.warning("Forced-set sparsity ratio is not strictly decreasing: %s", ratios)
    return CounterexampleResult(f, forced, ratios, report)
