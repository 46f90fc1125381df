"""
The one-dimensional Calderon-Zygmund bench: a uniform line grid, kernels,
the Hilbert transform and the smooth maximal function M^s.

Kernel integrals
Kernels are convolution kernels k(x - y) with an exact logarithmic
primitive, so T of a piecewise-constant function is a sum over its jumps:
Tf(x) = sum_e (f(e+) - f(e-)) P(x - e), with P(u) = log|u| for the Hilbert
kernel 1/u and P(u) = log(u^2 + tau^2)/2 for the smoothed kernel
u/(u^2 + tau^2). Evaluated at cell midpoints the diagonal cell contributes 0.

Bump dictionary
The supremum over the class of s-smooth normalized bumps is replaced by a
finite dictionary: a C-infinity cutoff scaled into sub-intervals of Q and
multiplied by Legendre polynomials of degree <= m + 2, each rescaled so its
derivative and Holder bounds hold on a verification mesh. Dictionaries are
nested, so a larger dictionary never lowers M^s.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.polynomial import legendre
from scipy.special import comb

from .reports import DominationReport, check_ratio

logger = logging.getLogger(__name__)

#Constants to be applied
HILBERT = "hilbert"
SMOOTHED_POWER = "smoothed-power"
KERNEL_KINDS = (HILBERT, SMOOTHED_POWER)

CUTOFF_HALF_WIDTH = 9.0 / 16.0  #psi = 1 on [-1/2, 1/2], support (1 + 1/8)[-1/2, 1/2]
BUMP_SCALES = (8.0 / 9.0, 4.0 / 9.0, 2.0 / 9.0, 1.0 / 9.0)
DEFAULT_DICTIONARY_SIZE = 16
CHECK_MESH_POINTS = 4097
TARGET_CHUNK = 512
MIN_SUBSAMPLES = 8


@dataclass(frozen=True)
class LineGrid:
    """Uniform partition of [a, b) into M cells of width h."""

    a: float
    b: float
    cells: int

    def __post_init__(self):
        if self.cells < 2:
            raise ValueError(f"a line grid needs at least 2 cells, got {self.cells}")
        if not self.b > self.a:
            raise ValueError(f"empty interval [{self.a}, {self.b})")

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.cells

    @property
    def edges(self) -> np.ndarray:
        return self.a + self.h * np.arange(self.cells + 1)

    @property
    def midpoints(self) -> np.ndarray:
        return self.a + self.h * (np.arange(self.cells) + 0.5)

    def cell_of(self, x: float) -> int:
        index = int(math.floor((x - self.a) / self.h))
        if not 0 <= index < self.cells:
            raise ValueError(f"point {x} lies outside [{self.a}, {self.b})")
        return index

    def refined(self, factor: int = 2) -> "LineGrid":
        return LineGrid(self.a, self.b, self.cells * factor)

    def function(self, values) -> "LineFunction":
        return LineFunction(self, values)

    def sample(self, func) -> "LineFunction":
        return LineFunction(self, func(self.midpoints))


@dataclass(frozen=True, eq=False)
class LineFunction:
    """Cell values of a piecewise-constant function on a line grid."""

    grid: LineGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.cells,):
            raise ValueError(f"line function needs {self.grid.cells} cell values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("line function values must be finite")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def with_values(self, values) -> "LineFunction":
        return LineFunction(self.grid, values)

    def jumps(self) -> np.ndarray:
        """f(e+) - f(e-) at every edge, with f = 0 outside the grid."""
        return np.diff(np.concatenate([[0.0], self.values, [0.0]]))

    def inner(self, other: "LineFunction") -> float:
        return float((self.values * other.values).sum() * self.grid.h)

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    def restrict(self, start: int, stop: int) -> "LineFunction":
        grid = self.grid
        return LineFunction(LineGrid(grid.a + start * grid.h, grid.a + stop * grid.h, stop - start), self.values[start:stop])


@dataclass(frozen=True)
class CZKernelSpec:
    """
    Convolution kernel k(x - y) with smoothness order s and constant C_K.
    ``tau`` = 0 is the Hilbert kernel; ``constant`` = 0 leaves C_K unverified.
    """

    kind: str = HILBERT
    s: float = 1.0
    constant: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if not self.s > 0:
            raise ValueError(f"kernel smoothness must be positive, got {self.s}")
        if self.kind == HILBERT and self.tau != 0:
            raise ValueError("the Hilbert kernel has no smoothing width")
        if self.kind == SMOOTHED_POWER and not self.tau > 0:
            raise ValueError(f"smoothed kernels need tau > 0, got {self.tau}")

    @classmethod
    def hilbert(cls, s: float = 1.0) -> "CZKernelSpec":
        return cls(HILBERT, s=s)

    @classmethod
    def smoothed_power(cls, tau: float, s: float = 1.0) -> "CZKernelSpec":
        return cls(SMOOTHED_POWER, s=s, tau=tau)

    @classmethod
    def from_dict(cls, data: Dict) -> "CZKernelSpec":
        return cls(
            data.get("kind", HILBERT), s=float(data.get("s", 1.0)),
            constant=float(data.get("CK", 0.0)), tau=float(data.get("tau", 0.0)),
        )

    def to_dict(self) -> Dict:
        data = {"kind": self.kind, "s": self.s, "CK": self.constant}
        if self.kind == SMOOTHED_POWER:
            data["tau"] = self.tau
        return data

    @property
    def order(self) -> Tuple[int, float]:
        m = int(math.ceil(self.s)) - 1
        return m, self.s - m

    def derivative(self, u, order: int = 0) -> np.ndarray:
        #k(u) = Re (u - i tau)^-1, so k^(j)(u) = Re (-1)^j j! (u - i tau)^(-j-1)
        z = np.asarray(u, dtype=float) - 1j * self.tau
        return np.real((-1.0) ** order * math.factorial(order) * z ** (-order - 1))

    def evaluate(self, x, y) -> np.ndarray:
        return self.derivative(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))

    def primitive(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.kind == HILBERT:
            with np.errstate(divide="ignore"):
                return np.log(np.abs(u))
        return 0.5 * np.log(u * u + self.tau * self.tau)

    def cell_integrals(self, targets, edges) -> np.ndarray:
        """Integral of k(x - y) dy over [e_j, e_{j+1}) for every target x."""
        targets = np.asarray(targets, dtype=float)[:, None]
        edges = np.asarray(edges, dtype=float)
        return self.primitive(targets - edges[None, :-1]) - self.primitive(targets - edges[None, 1:])

    def validate(self, mesh: Optional[Sequence[float]] = None, steps: int = 21) -> float:
        """
        Measured C_K over the size, derivative and Holder bounds on a mesh of
        |x - y| values, with |h| <= |x - y|/2.
        """
        m, delta = self.order
        u = np.asarray(mesh if mesh is not None else np.logspace(-3, 3, 61), dtype=float)
        u = np.concatenate([u, -u])
        measured = 0.0
        for j in range(m + 1):
            measured = max(measured, float((np.abs(self.derivative(u, j)) * np.abs(u) ** (1 + j)).max()))
        fractions = np.linspace(-0.5, 0.5, steps)
        fractions = fractions[fractions != 0]
        shifts = fractions[None, :] * np.abs(u)[:, None]
        top = self.derivative(u, m)[:, None]
        gaps = np.abs(self.derivative(u[:, None] + shifts, m) - top)
        holder = gaps * np.abs(u)[:, None] ** (1 + self.s) / np.abs(shifts) ** delta
        measured = max(measured, float(holder.max()))
        if self.constant and measured > self.constant * (1 + 1e-9):
            raise ValueError(f"kernel constant {self.constant} is below the measured {measured:.6g}")
        logger.debug("Kernel %s (s = %s) measured C_K %.6g", self.kind, self.s, measured)
        return measured


def _check_kernel(kernel: CZKernelSpec) -> None:
    if kernel.kind not in KERNEL_KINDS:
        raise ValueError(f"kernel {kernel.kind!r} is not integrable on cells")


def apply_kernel(f: LineFunction, kernel: CZKernelSpec, targets=None) -> np.ndarray:
    """Tf at the given points (cell midpoints by default) through the jump form."""
    _check_kernel(kernel)
    targets = f.grid.midpoints if targets is None else np.asarray(targets, dtype=float)
    jumps = f.jumps()
    active = np.nonzero(jumps)[0]
    out = np.zeros(targets.shape[0])
    if active.size == 0:
        return out
    edges = f.grid.edges[active]
    weights = jumps[active]
    for start in range(0, targets.shape[0], TARGET_CHUNK):
        chunk = targets[start:start + TARGET_CHUNK]
        out[start:start + chunk.shape[0]] = kernel.primitive(chunk[:, None] - edges[None, :]) @ weights
    if not np.all(np.isfinite(out)):
        raise ValueError("principal value is undefined at a jump of f")
    return out


def hilbert_at(f: LineFunction, points) -> np.ndarray:
    return apply_kernel(f, CZKernelSpec.hilbert(), np.atleast_1d(points))


def hilbert_transform(f: LineFunction) -> LineFunction:
    return f.with_values(apply_kernel(f, CZKernelSpec.hilbert()))


def czo_apply(f: LineFunction, kernel: CZKernelSpec) -> LineFunction:
    return f.with_values(apply_kernel(f, kernel))


def antisymmetry_gap(f: LineFunction, g: LineFunction) -> float:
    """Relative size of <Hf, g> + <f, Hg>."""
    left = hilbert_transform(f).inner(g)
    right = f.inner(hilbert_transform(g))
    scale = max(abs(left), abs(right), 1e-300)
    return abs(left + right) / scale


#Cutoffs

def _smooth_step(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        left = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        right = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return left / (left + right)


def smooth_step(t) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    return _smooth_step(t)


def cutoff(x) -> np.ndarray:
    """psi: 1 on [-1/2, 1/2], 0 outside [-9/16, 9/16], values in [0, 1]."""
    x = np.abs(np.asarray(x, dtype=float))
    return _smooth_step((CUTOFF_HALF_WIDTH - x) / (CUTOFF_HALF_WIDTH - 0.5))


def interval_cutoff(points, center: float, length: float) -> np.ndarray:
    """psi_Q(x) = psi((x - x_Q)/l(Q))."""
    return cutoff((np.asarray(points, dtype=float) - center) / length)


#Bump dictionary

@dataclass(frozen=True)
class BumpShape:
    scale: float
    center: float
    degree: int

    def raw(self, t) -> np.ndarray:
        offset = np.asarray(t, dtype=float) - self.center
        polynomial = legendre.Legendre.basis(self.degree)(offset / (self.scale * CUTOFF_HALF_WIDTH))
        return cutoff(offset / self.scale) * polynomial


def _bump_shapes(max_degree: int) -> List[BumpShape]:
    shapes = []
    for scale in BUMP_SCALES:
        half = scale * CUTOFF_HALF_WIDTH
        count = int(round((1.0 - 2 * half) / half)) + 1
        for i in range(count):
            center = half + i * half
            for degree in range(max_degree + 1):
                shapes.append(BumpShape(scale, center, degree))
    return shapes


def _constraint_values(values: np.ndarray, m: int, delta: float, spacing: float) -> Tuple[float, ...]:
    #sup |phi^(a)| for a <= m and an upper bound on the delta-Holder seminorm of phi^(m)
    derivatives = [values]
    for _ in range(m + 1):
        derivatives.append(np.gradient(derivatives[-1], spacing, edge_order=2))
    sups = [float(np.abs(d).max()) for d in derivatives]
    if delta == 0:
        return tuple(sups[: m + 1])
    holder = (2.0 * sups[m]) ** (1.0 - delta) * sups[m + 1] ** delta
    return tuple(sups[: m + 1]) + (holder,)


class SmoothBumpDictionary:
    """
    Finite s-smooth dictionary on the reference interval [0, 1).

    Members are ordered by scale, then center, then degree; the first ``size``
    are kept, so dictionaries of growing size are nested.
    """

    def __init__(self, s: float, size: int = DEFAULT_DICTIONARY_SIZE, mesh_points: int = CHECK_MESH_POINTS):
        if s < 0:
            raise ValueError(f"smoothness must be nonnegative, got {s}")
        if size < 1:
            raise ValueError(f"dictionary size must be positive, got {size}")
        self.s = float(s)
        self.m = 0 if s == 0 else int(math.ceil(s)) - 1
        self.delta = self.s - self.m
        self.size = size
        self.mesh = np.linspace(0.0, 1.0, mesh_points)
        shapes = _bump_shapes(self.m + 2)
        if size > len(shapes):
            raise ValueError(f"dictionary size {size} exceeds the {len(shapes)} available shapes")
        self.shapes = shapes[:size]
        spacing = self.mesh[1] - self.mesh[0]
        self.factors = np.array([
            1.0 / max(_constraint_values(shape.raw(self.mesh), self.m, self.delta, spacing)) for shape in self.shapes
        ])
        self._window_cache: Dict[int, np.ndarray] = {}

    def __repr__(self) -> str:
        return f"SmoothBumpDictionary(s={self.s}, size={self.size})"

    def __len__(self) -> int:
        return self.size

    def evaluate(self, t) -> np.ndarray:
        """(members, points) values of the normalized members on [0, 1)."""
        return np.vstack([factor * shape.raw(t) for factor, shape in zip(self.factors, self.shapes)])

    def check(self) -> DominationReport:
        """Re-verify the derivative and Holder bounds of every member on the mesh."""
        spacing = self.mesh[1] - self.mesh[0]
        worst = 0.0
        for row in self.evaluate(self.mesh):
            worst = max(worst, max(_constraint_values(row, self.m, self.delta, spacing)))
        return check_ratio(worst, 1.0, 1.0 + 1e-9, "bump-dictionary", {"s": self.s, "size": self.size, "mesh": self.mesh.size})

    def window_weights(self, length: int) -> np.ndarray:
        """
        (members, length) array of integrals of each member over the equal
        cells of [0, 1), so a window average is |sum_i f_i W_i|.
        """
        if length not in self._window_cache:
            samples = max(MIN_SUBSAMPLES, (self.mesh.size - 1) // length)
            points = (np.arange(length * samples) + 0.5) / (length * samples)
            values = self.evaluate(points).reshape(self.size, length, samples)
            self._window_cache[length] = values.mean(axis=2) / length
        return self._window_cache[length]


def _window_plan(cells: int) -> List[Tuple[int, int]]:
    #Dyadic lengths with half-length steps
    plan = []
    length = 1
    while length <= cells:
        plan.append((length, max(length // 2, 1)))
        length *= 2
    return plan


def smooth_maximal(
    f: LineFunction,
    s: float,
    dictionary: Optional[SmoothBumpDictionary] = None,
    localize: Optional[Tuple[int, int]] = None,
) -> LineFunction:
    """
    sup over windows Q (inside ``localize`` = (start, stop) cells when given)
    and members phi of |Q|^-1 |integral f phi_Q|; at s = 0 the sup over sign
    patterns, i.e. the maximal function of |f| over the same windows.
    """
    if s < 0:
        raise ValueError(f"smoothness must be nonnegative, got {s}")
    start, stop = (0, f.grid.cells) if localize is None else localize
    if not 0 <= start < stop <= f.grid.cells:
        raise ValueError(f"localization [{start}, {stop}) is not inside the grid")
    values = f.values[start:stop]
    domain = stop - start
    out = np.zeros(domain)
    if s > 0:
        dictionary = SmoothBumpDictionary(s) if dictionary is None else dictionary
        if abs(dictionary.s - s) > 1e-12:
            raise ValueError(f"dictionary smoothness {dictionary.s} does not match s = {s}")
    for length, step in _window_plan(domain):
        windows = sliding_window_view(values, length)[::step]
        if s == 0:
            averages = np.abs(windows).mean(axis=1)
        else:
            averages = np.abs(windows @ dictionary.window_weights(length).T).max(axis=1)
        starts = np.arange(windows.shape[0]) * step
        cells = (starts[:, None] + np.arange(length)[None, :]).ravel()
        np.maximum.at(out, cells, np.repeat(averages, length))
    full = np.zeros(f.grid.cells)
    full[start:stop] = out
    return f.with_values(full)


#Binomial test function

def alternating_indicator(m: int) -> np.ndarray:
    """Coefficients (-1)^k C(m+1, k) of 1_(k, k+1), k = 0..m+1."""
    if m < 0:
        raise ValueError(f"moment order must be nonnegative, got {m}")
    return np.array([(-1) ** k * int(comb(m + 1, k, exact=True)) for k in range(m + 2)], dtype=float)


def alternating_function(grid: LineGrid, m: int) -> LineFunction:
    coefficients = alternating_indicator(m)
    mid = grid.midpoints
    values = np.zeros(grid.cells)
    for k, c in enumerate(coefficients):
        values[(mid > k) & (mid < k + 1)] = c
    return LineFunction(grid, values)


def moments(m: int, up_to: Optional[int] = None) -> List[float]:
    """Exact moments integral x^j f for j = 0..up_to of the alternating indicator."""
    coefficients = [(-1) ** k * int(comb(m + 1, k, exact=True)) for k in range(m + 2)]
    top = m if up_to is None else up_to
    return [
        float(sum(Fraction(c * ((k + 1) ** (j + 1) - k ** (j + 1)), j + 1) for k, c in enumerate(coefficients)))
        for j in range(top + 1)
    ]
