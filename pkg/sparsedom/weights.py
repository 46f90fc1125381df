"""
Muckenhoupt weights on Q0 = [0,1), their characteristics and the weighted
sparse experiments.

Cell integrals
Every quantity is built from exact integrals of w^gamma over the cells of a
uniform grid: closed-form primitives for the analytic weights, products of
cell length and value for grid weights. The A_q characteristic only needs
gamma = 1 and gamma = -1/(q-1).

Families
Dyadic suprema run over the cubes of the working grid. All-interval suprema
run over intervals with endpoints on the grid, a lower bound on the true
characteristic that increases under refinement.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dyadic import Cube, GridFunction, as_ratio, build_grid, doob_maximal, lp_norm, percentile_on_cube
from .reports import DominationReport, check_domination, check_ratio
from .slopes import fit_loglog_slope
from .sparse import SparseFamily

logger = logging.getLogger(__name__)

#Constants to be applied
GRID = "grid"
POWER = "power-eps"
FLAT_BUMP = "flat-bump-eps"
CONSTANT = "constant"
KINDS = (GRID, POWER, FLAT_BUMP, CONSTANT)

DYADIC = "dyadic"
ALL_INTERVALS = "all-intervals"

DEFAULT_BUMP = (0.0, 0.5)
RDQ_TOLERANCE = 1e-12
INTERVAL_CHUNK = 256
RING_CUTOFF = 1e-14


@dataclass(frozen=True)
class Weight:
    """
    Positive density on [0,1): analytic (power, flat bump, constant) or a
    piecewise-constant grid vector. ``scale`` multiplies the density.
    """

    kind: str
    eps: float = 1.0
    scale: float = 1.0
    bump: Tuple[float, float] = DEFAULT_BUMP
    values: Tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.scale <= 0:
            raise ValueError(f"weight scale must be positive, got {self.scale}")
        if self.kind in (POWER, FLAT_BUMP) and not 0 < self.eps <= 1:
            raise ValueError(f"eps must lie in (0,1], got {self.eps}")
        if self.kind == FLAT_BUMP and not 0 <= self.bump[0] < self.bump[1] <= 1:
            raise ValueError(f"bump {self.bump} is not a subinterval of [0,1)")
        if self.kind == GRID:
            values = tuple(float(v) for v in self.values)
            count = len(values)
            if count == 0 or count & (count - 1):
                raise ValueError("grid weights need 2^N leaf values")
            if min(values) <= 0 or not all(math.isfinite(v) for v in values):
                raise ValueError("weights must be strictly positive and finite")
            object.__setattr__(self, "values", values)

    #Constructors

    @classmethod
    def power(cls, eps: float) -> "Weight":
        return cls(POWER, eps=eps)

    @classmethod
    def flat_bump(cls, eps: float, bump: Tuple[float, float] = DEFAULT_BUMP) -> "Weight":
        return cls(FLAT_BUMP, eps=eps, bump=tuple(bump))

    @classmethod
    def constant(cls, value: float = 1.0) -> "Weight":
        return cls(CONSTANT, scale=value)

    @classmethod
    def from_grid(cls, values: Sequence[float]) -> "Weight":
        return cls(GRID, values=tuple(values))

    def scaled(self, factor: float) -> "Weight":
        return replace(self, scale=self.scale * factor)

    @property
    def grid_depth(self) -> int:
        return len(self.values).bit_length() - 1 if self.kind == GRID else 0

    def to_dict(self) -> Dict:
        if self.kind == GRID:
            return {"grid": self.grid_depth, "values": [v * self.scale for v in self.values]}
        data = {"kind": self.kind, "eps": self.eps}
        if self.kind == FLAT_BUMP:
            data["bump"] = list(self.bump)
        if self.scale != 1.0:
            data["scale"] = self.scale
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "Weight":
        if "grid" in data:
            weight = cls.from_grid(data["values"])
            if weight.grid_depth != int(data["grid"]):
                raise ValueError("grid weight depth does not match its value count")
            return weight
        return cls(
            data["kind"], eps=float(data.get("eps", 1.0)), scale=float(data.get("scale", 1.0)),
            bump=tuple(data.get("bump", DEFAULT_BUMP)),
        )

    #Cell integrals

    def cell_integrals(self, depth: int, gamma: float = 1.0) -> np.ndarray:
        """Exact integral of w^gamma over each of the 2^depth cells of [0,1)."""
        count = 1 << depth
        edges = np.arange(count + 1) / count
        left, right = edges[:-1], edges[1:]
        factor = self.scale ** gamma
        if self.kind == CONSTANT:
            return factor * (right - left)
        if self.kind == POWER:
            #w = eps x^(eps-1); w^gamma = eps^gamma x^(gamma (eps-1))
            exponent = gamma * (self.eps - 1.0) + 1.0
            if exponent <= 0:
                raise ValueError(f"w^{gamma} is not integrable near 0 for eps = {self.eps}")
            return factor * self.eps ** gamma * (right ** exponent - left ** exponent) / exponent
        if self.kind == FLAT_BUMP:
            low, high = self.bump
            inside = np.clip(np.minimum(right, high) - np.maximum(left, low), 0.0, None)
            return factor * (inside * self.eps ** gamma + (right - left - inside))
        if depth < self.grid_depth:
            raise ValueError(f"grid weight of depth {self.grid_depth} cannot be integrated at depth {depth}")
        density = np.repeat(np.asarray(self.values), 1 << (depth - self.grid_depth))
        return factor * density ** gamma / count

    def cell_masses(self, depth: int) -> np.ndarray:
        return self.cell_integrals(depth, 1.0)

    def primitive(self, x) -> np.ndarray:
        """W(x) = w([0, x)) for x in [0, 1]."""
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        if self.kind == CONSTANT:
            return self.scale * x
        if self.kind == POWER:
            return self.scale * x ** self.eps
        if self.kind == FLAT_BUMP:
            low, high = self.bump
            inside = np.clip(np.minimum(x, high) - low, 0.0, None)
            return self.scale * (inside * self.eps + (x - inside))
        masses = self.cell_masses(self.grid_depth)
        cumulative = np.concatenate([[0.0], np.cumsum(masses)])
        return np.interp(x, np.linspace(0.0, 1.0, masses.size + 1), cumulative)

    def dual_primitive(self, x, q: float) -> np.ndarray:
        """sigma([0, x)) for sigma = w^(-1/(q-1)), analytic kinds only."""
        gamma = -1.0 / (q - 1.0)
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        factor = self.scale ** gamma
        if self.kind == CONSTANT:
            return factor * x
        if self.kind == POWER:
            exponent = gamma * (self.eps - 1.0) + 1.0
            return factor * self.eps ** gamma * x ** exponent / exponent
        if self.kind == FLAT_BUMP:
            low, high = self.bump
            inside = np.clip(np.minimum(x, high) - low, 0.0, None)
            return factor * (inside * self.eps ** gamma + (x - inside))
        raise ValueError("grid weights have no closed-form dual primitive")


def _check_exponent(q: float) -> None:
    if not q > 1:
        raise ValueError(f"A_q needs q > 1, got {q}")


def _aq_products(mass_sums, dual_sums, lengths, q):
    return (mass_sums / lengths) * (dual_sums / lengths) ** (q - 1.0)


def aq_characteristic(w: Weight, q: float, family: str = DYADIC, depth: int = 10) -> float:
    """[w]_{A_q} = sup <w>_Q <w^(-1/(q-1))>_Q^(q-1) over the requested family."""
    _check_exponent(q)
    masses = w.cell_masses(depth)
    duals = w.cell_integrals(depth, -1.0 / (q - 1.0))
    count = 1 << depth
    if family == DYADIC:
        best = 0.0
        for k in range(depth + 1):
            length = 2.0 ** -k
            products = _aq_products(
                masses.reshape(1 << k, -1).sum(axis=1), duals.reshape(1 << k, -1).sum(axis=1), length, q,
            )
            best = max(best, float(products.max()))
    elif family == ALL_INTERVALS:
        mass_prefix = np.concatenate([[0.0], np.cumsum(masses)])
        dual_prefix = np.concatenate([[0.0], np.cumsum(duals)])
        best = 0.0
        ends = np.arange(1, count + 1)
        for start in range(0, count, INTERVAL_CHUNK):
            starts = np.arange(start, min(start + INTERVAL_CHUNK, count))[:, None]
            valid = ends[None, :] > starts
            lengths = np.where(valid, (ends[None, :] - starts) / count, 1.0)
            products = _aq_products(
                mass_prefix[ends][None, :] - mass_prefix[starts],
                dual_prefix[ends][None, :] - dual_prefix[starts], lengths, q,
            )
            best = max(best, float(np.where(valid, products, 0.0).max()))
    else:
        raise ValueError(f"unknown cube family {family!r}")
    logger.debug("[w]_A%s over %s cubes at depth %d: %.6g", q, family, depth, best)
    return best


def ainf_characteristic(w: Weight, depth: int = 10) -> float:
    """Fujii-Wilson constant sup_Q w(Q)^-1 integral_Q M_Q(w 1_Q) over dyadic cubes."""
    masses = w.cell_masses(depth)
    count = 1 << depth
    averages = [
        np.repeat(masses.reshape(1 << k, -1).sum(axis=1) * (1 << k), count >> k) for k in range(depth + 1)
    ]
    local_maximal = np.maximum.accumulate(np.vstack(averages)[::-1], axis=0)[::-1]
    best = 0.0
    for k in range(depth + 1):
        integrals = (local_maximal[k] / count).reshape(1 << k, -1).sum(axis=1)
        best = max(best, float((integrals / masses.reshape(1 << k, -1).sum(axis=1)).max()))
    return best


def weighted_norm(values, w: Weight, p: float) -> float:
    """||f||_{L^p(w)} for f piecewise constant on the cells of a uniform grid."""
    values = np.asarray(getattr(values, "values", values), dtype=float)
    depth = values.shape[0].bit_length() - 1
    if values.shape[0] != 1 << depth:
        raise ValueError("weighted norms need 2^N cell values")
    return lp_norm(values, w.cell_masses(depth), p)


#Weighted sparse bound

def _sparse_sum(f: GridFunction, family: SparseFamily, t: float, r: float) -> Tuple[np.ndarray, List[Tuple[Cube, float]]]:
    grid = f.grid
    total = np.zeros(grid.leaf_count)
    terms = []
    absolute = abs(f)
    for cube in family.cubes():
        percentile = float(percentile_on_cube(absolute, cube, r))
        terms.append((cube, percentile))
        total[cube.leaf_slice(grid.depth)] += percentile ** t
    return total, terms


def weighted_sparse_experiment(
    family: SparseFamily, f: GridFunction, w: Weight, p: float, t: float, r, q: float,
    aq: Optional[float] = None,
) -> DominationReport:
    """
    ||(sum_Q P_Q^r(|f|)^t 1_Q)^(1/t)||_{L^p(w)} against ||f||_{L^p(w)}. At p = t
    on a (1 - r/2)-sparse family the proof chain
    sum_Q P_Q^r(|f|)^p w(Q) <= [w]_{A_q} (2/r)^q 2^p ||f||^p is asserted.
    """
    if p <= 0 or t <= 0:
        raise ValueError(f"exponents must be positive, got p = {p}, t = {t}")
    _check_exponent(q)
    ratio = float(as_ratio(r))
    grid = f.grid
    if not grid.is_uniform:
        raise ValueError("weighted experiments run on the uniform grid")
    aq = aq_characteristic(w, q, DYADIC, grid.depth) if aq is None else aq
    masses = w.cell_masses(grid.depth)
    total, terms = _sparse_sum(f, family, t, ratio)

    lhs = float(((total ** (1.0 / t)) ** p * masses).sum() ** (1.0 / p))
    rhs = lp_norm(f.values, masses, p)
    measured = {"p": p, "t": t, "r": ratio, "q": q, "Aq": aq, "eta": family.eta, "members": len(terms), "lhs": lhs, "rhs": rhs}

    if p == t and family.eta >= 1.0 - ratio / 2.0 - 1e-15:
        chain = sum(value ** p * masses[cube.leaf_slice(grid.depth)].sum() for cube, value in terms)
        constant = aq * (2.0 / ratio) ** q * 2.0 ** p
        report = check_ratio(chain, rhs ** p, constant, "weighted-sparse", measured)
        report.measured["chain_lhs"] = float(chain)
        return report
    return check_ratio(lhs, rhs, None, "weighted-sparse", measured)


def rdq_audit(w: Weight, q: float, rng: np.random.Generator, pairs: int = 200, depth: int = 8) -> DominationReport:
    """(|E|/|Q|)^q <= [w]_{A_q} w(E)/w(Q) for random intervals Q and cell subsets E of Q."""
    aq = aq_characteristic(w, q, ALL_INTERVALS, depth)
    masses = w.cell_masses(depth)
    count = 1 << depth
    lhs, rhs = np.zeros(pairs), np.zeros(pairs)
    for i in range(pairs):
        start, end = np.sort(rng.choice(count + 1, size=2, replace=False))
        chosen = rng.random(end - start) < rng.uniform(0.05, 1.0)
        if not chosen.any():
            chosen[rng.integers(end - start)] = True
        lhs[i] = (chosen.sum() / (end - start)) ** q
        rhs[i] = aq * masses[start:end][chosen].sum() / masses[start:end].sum()
    return check_domination(lhs, rhs, 1.0 + RDQ_TOLERANCE, "rdq", {"q": q, "Aq": aq, "pairs": pairs, "depth": depth})


#Sharpness experiments

@dataclass(frozen=True)
class SharpnessPoint:
    eps: float
    aq: float
    ainf: float
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs

    def as_row(self) -> Dict[str, float]:
        return {"eps": self.eps, "Aq": self.aq, "Ainf": self.ainf, "lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio}


@dataclass(frozen=True)
class SharpnessResult:
    points: List[SharpnessPoint]
    report: DominationReport


def _slope_report(inequality_id: str, points: List[SharpnessPoint], target: float, tolerance: float, extra: Dict) -> DominationReport:
    aq_fit = fit_loglog_slope([pt.eps for pt in points], [pt.aq for pt in points])
    ratio_fit = fit_loglog_slope([pt.aq for pt in points], [pt.ratio for pt in points])
    deviation = abs(ratio_fit.slope - target)
    report = check_ratio(deviation, tolerance, 1.0, inequality_id, {
        **extra, "slope": ratio_fit.slope, "target": target, "tolerance": tolerance,
        "aq_slope_in_eps": aq_fit.slope, "r2": ratio_fit.r2,
        "points": [pt.as_row() for pt in points],
    })
    if not aq_fit.within(-1.0, 0.1):
        logger.warning("%s: [w_eps] slope in eps is %.4f, expected -1", inequality_id, aq_fit.slope)
    return report


def flat_bump_sharpness(p: float, r, q: float, eps_list: Sequence[float], depth: int = 10, tolerance: float = 0.1) -> SharpnessResult:
    """
    w_eps = eps 1_R + 1 elsewhere with |R| = 2r, f_eps = eps^(-1/p) 1_R and
    S = {Q0}: the ratio grows like [w_eps]^(1/p).
    """
    ratio = float(as_ratio(r))
    grid = build_grid(depth)
    bump = (0.0, 2.0 * ratio)
    if bump[1] >= 1.0:
        raise ValueError(f"the bump needs r < 1/2, got {ratio}")
    family = SparseFamily.from_cubes(grid, [Cube(0, 0)], eta=0.5)
    points = []
    for eps in eps_list:
        w = Weight.flat_bump(eps, bump)
        values = np.where((np.arange(grid.leaf_count) + 0.5) / grid.leaf_count < bump[1], eps ** (-1.0 / p), 0.0)
        f = GridFunction(grid, values)
        report = weighted_sparse_experiment(family, f, w, p, p, ratio, q, aq=aq_characteristic(w, q, DYADIC, depth))
        points.append(SharpnessPoint(eps, report.measured["Aq"], ainf_characteristic(w, depth), report.measured["lhs"], report.measured["rhs"]))
    return SharpnessResult(points, _slope_report("weighted-sharpness-flat", points, 1.0 / p, tolerance, {"p": p, "r": ratio, "q": q}))


def power_aq(eps: float, q: float) -> float:
    #Attained on every [0, 2^-k): eps^-1 / (beta + 1)^(q-1) with beta = (1 - eps)/(q - 1)
    beta = (1.0 - eps) / (q - 1.0)
    return (1.0 / eps) / (beta + 1.0) ** (q - 1.0)


def power_chain_sharpness(p: float, t: float, q: float, eps_list: Sequence[float], tolerance: float = 0.15) -> SharpnessResult:
    """
    w_eps = eps x^(eps-1), f = 1_{Q0}, S = {[0, 2^-k)}: on the ring
    Q_k minus Q_(k+1) the sparse sum is (k+1)^(1/t), with exact ring masses
    summed down to RING_CUTOFF instead of weighted_sparse_experiment on a grid.
    """
    if p <= 0 or t <= 0:
        raise ValueError(f"exponents must be positive, got p = {p}, t = {t}")
    _check_exponent(q)
    points = []
    for eps in eps_list:
        w = Weight.power(eps)
        rings = int(math.ceil(math.log2(1.0 / RING_CUTOFF) / eps)) + 1
        k = np.arange(rings)
        ring_masses = w.primitive(2.0 ** -k) - w.primitive(2.0 ** -(k + 1))
        lhs = float(((k + 1.0) ** (p / t) * ring_masses).sum() ** (1.0 / p))
        rhs = float(w.primitive(1.0)) ** (1.0 / p)
        points.append(SharpnessPoint(eps, power_aq(eps, q), ainf_characteristic(w, 10), lhs, rhs))
    return SharpnessResult(points, _slope_report("weighted-sharpness-power", points, 1.0 / t, tolerance, {"p": p, "t": t, "q": q}))


def weighted_haar_shift_audit(spec, p: float, q: float, eps_list: Sequence[float], depth: int, seed: int, tolerance: float = 0.2) -> DominationReport:
    """
    ||Sh f||_{L^p(w_eps)} / ||M f||_{L^p(w_eps)} along the power family grows no
    faster than [w]_{A_q}^(1/p) [w]_{A_inf}^((1-1/p)_+), measured as a slope in [w]_{A_q}.
    """
    from .haar import apply_shift

    grid = build_grid(depth)
    rng = np.random.default_rng(seed)
    values = rng.choice([-1.0, 1.0], size=grid.leaf_count) * rng.integers(1, 5, size=grid.leaf_count)
    f = GridFunction(grid, values - values.mean())
    shifted = apply_shift(f, spec).values
    maximal = doob_maximal(f).values
    aqs, ratios = [], []
    for eps in eps_list:
        w = Weight.power(eps)
        aqs.append(aq_characteristic(w, q, DYADIC, depth))
        ratios.append(weighted_norm(shifted, w, p) / weighted_norm(maximal, w, p))
    fit = fit_loglog_slope(aqs, ratios)
    bound = 1.0 / p + max(1.0 - 1.0 / p, 0.0)
    return check_ratio(
        max(fit.slope, 0.0), bound + tolerance, 1.0, "weighted-haar-shift",
        {"slope": fit.slope, "bound_exponent": bound, "tolerance": tolerance, "p": p, "q": q,
         "t": spec.t, "s": spec.s, "Aq": aqs, "ratios": ratios},
    )
