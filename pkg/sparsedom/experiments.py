"""
Experiment runner behind the ``sparsedom`` management command.

An ExperimentConfig names one registered experiment together with its grid
depth, ratio, seed and repetition count. Everything is validated before any
computation starts. run_experiment then runs the seeds in a thread pool,
merges the reports in seed order and writes one document whose only
run-dependent field is ``generated_at``.

Config files are plain text, one ``key = value`` per line:

    # stopping-time run on random doubling grids
    experiment = stopping-mt
    depth = 8
    r = 1/14
    reps = 100
    uniform = false

Keys may use ``-`` or ``_``; keys that are not config fields go to the
experiment's parameter map.
"""

import logging
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
import scipy
import sklearn
from django.conf import settings
from django.core.exceptions import ValidationError
from django.utils import timezone

from .biparam import ProductGrid, biparam_greedy
from .counterexample import counterexample_sequence, tn_lemma_audit
from .czo import (
    CZO_RATIO, DOUBLING_TOLERANCE, CellInterval, czo_extract_sparse, doubling_audit,
    estontf_audit, hilbert_sharpness_experiment, sharp_audit,
)
from .dyadic import EXACT_MAX_DEPTH, Cube, GridFunction, build_grid, weak_type_audit
from .euclid import CZKernelSpec, LineGrid, SmoothBumpDictionary
from .extraction import (
    GreedyEntry, extract_haar_shift, extract_layered, extract_stopping,
    greedy_domination_audit, layered_domination_audit,
)
from .generators import random_function, random_grid, random_line_function, random_uniform
from .haar import HaarShiftSpec, local_median_audit
from .martingale import SQUARE, TRANSFORM, PredictableSigns
from .reporting import FORMATS, JSON, emit_report
from .reports import DominationReport, merge_reports
from .serializers import load_json
from .sparse import cs_lp_audit, random_sparse_family, sparse_h1_lower_audit, sparse_h1_upper_audit, verify_sparsity
from .weights import (
    DYADIC, Weight, aq_characteristic, flat_bump_sharpness, power_chain_sharpness,
    weighted_haar_shift_audit, weighted_sparse_experiment,
)

logger = logging.getLogger(__name__)

#Constants to be applied
CONFIG_FIELDS = ("experiment", "depth", "r", "seed", "reps", "operator", "weight", "out", "format")
EPS_LADDER = tuple(2.0 ** -k for k in range(3, 9))
TRUE_WORDS = {"1", "true", "yes", "on"}
FALSE_WORDS = {"0", "false", "no", "off"}
REPORT_VERSION = 1


#Config parsing

def normalize_key(key: str) -> str:
    return key.strip().lstrip("-").replace("-", "_").lower()


def parse_config_text(text: str) -> Dict[str, str]:
    """``key = value`` lines; ``#`` comments and blank lines are skipped, later keys win."""
    values: Dict[str, str] = {}
    errors = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = normalize_key(key)
        if not sep or not key:
            errors.append(f"line {number}: expected 'key = value', got {raw!r}")
            continue
        values[key] = value.strip()
    if errors:
        raise ValidationError(errors)
    return values


def parse_config_file(path) -> Dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ValidationError({"config": [f"config file {path} does not exist"]})
    return parse_config_text(path.read_text())


def parse_ratio(value) -> Fraction:
    """Ratios accept fractions such as ``1/10`` as well as decimals."""
    try:
        ratio = Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"{value!r} is not a ratio") from None
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must lie in (0, 1), got {value}")
    return ratio


def _parse_bool(text: str) -> bool:
    word = str(text).strip().lower()
    if word in TRUE_WORDS:
        return True
    if word in FALSE_WORDS:
        return False
    raise ValueError(f"{text!r} is not a boolean")


def _parse_number(text) -> float:
    return float(Fraction(str(text).strip()))


def coerce_param(text, default):
    """Parses a parameter string into the type of its default."""
    if not isinstance(text, str):
        return text
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        return int(text)
    if default is None or isinstance(default, float):
        return _parse_number(text)
    if isinstance(default, tuple):
        items = [item for item in text.replace(";", ",").split(",") if item.strip()]
        if not items:
            raise ValueError("empty list")
        if default and isinstance(default[0], int):
            return tuple(int(item) for item in items)
        return tuple(_parse_number(item) for item in items)
    return text.strip()


#Config

@dataclass
class ExperimentConfig:
    """
    One experiment invocation. ``depth`` and ``r`` of None fall back to the
    experiment's own defaults; ``operator`` and ``weight`` are JSON file paths.
    """

    experiment: str
    depth: Optional[int] = None
    r: Optional[Fraction] = None
    seed: int = 0
    reps: int = 1
    operator: Optional[str] = None
    weight: Optional[str] = None
    out: Optional[str] = None
    format: str = JSON
    params: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_values(cls, values: Mapping[str, Any]) -> "ExperimentConfig":
        """Builds a config from raw strings (file or flags); unknown keys become params."""
        errors: Dict[str, List[str]] = {}
        known: Dict[str, Any] = {}
        params: Dict[str, Any] = {}
        for key, value in values.items():
            key = normalize_key(key)
            if key == "params":
                params.update({normalize_key(k): v for k, v in dict(value).items()})
            elif key in CONFIG_FIELDS:
                known[key] = value
            else:
                params[key] = value

        def convert(name, parser):
            value = known.get(name)
            if value is None or value == "":
                return None
            try:
                return parser(value)
            except (TypeError, ValueError) as exc:
                errors.setdefault(name, []).append(f"invalid {name} {value!r}: {exc}")
                return None

        experiment = known.get("experiment")
        if not experiment:
            errors.setdefault("experiment", []).append("an experiment id is required")
        config = cls(
            experiment=str(experiment or "").strip(),
            depth=convert("depth", int),
            r=convert("r", parse_ratio),
            seed=convert("seed", int) or 0,
            reps=convert("reps", int) or 1,
            operator=known.get("operator") or None,
            weight=known.get("weight") or None,
            out=known.get("out") or None,
            format=str(known.get("format") or JSON).strip(),
            params=params,
        )
        if errors:
            raise ValidationError(errors)
        return config

    @classmethod
    def from_sources(cls, config_file=None, **overrides) -> "ExperimentConfig":
        """File values first, then every override that is not None."""
        values: Dict[str, Any] = parse_config_file(config_file) if config_file else {}
        params = dict(overrides.pop("params", None) or {})
        for key, value in overrides.items():
            if value is not None:
                values[normalize_key(key)] = value
        if params:
            values["params"] = params
        return cls.from_values(values)

    @property
    def spec(self) -> "Experiment":
        return EXPERIMENTS[self.experiment]

    @property
    def resolved_depth(self) -> int:
        return self.spec.depth if self.depth is None else self.depth

    @property
    def seeds(self) -> List[int]:
        if not self.spec.seeded:
            return [self.seed]
        return [self.seed + i for i in range(self.reps)]

    def validate(self) -> "RunContext":
        """Checks every field and prepares the run; raises ValidationError listing all problems."""
        errors: Dict[str, List[str]] = {}
        experiment = EXPERIMENTS.get(self.experiment)
        if experiment is None:
            errors["experiment"] = [f"unknown experiment {self.experiment!r}; choose from {', '.join(sorted(EXPERIMENTS))}"]
            raise ValidationError(errors)

        max_depth = int(getattr(settings, "SPARSEDOM_MAX_DEPTH", 20))
        depth = self.resolved_depth
        if not 0 <= depth <= max_depth:
            errors.setdefault("depth", []).append(f"depth must lie in [0, {max_depth}], got {depth}")
        if self.seed < 0:
            errors.setdefault("seed", []).append(f"seed must be nonnegative, got {self.seed}")
        if self.reps < 1:
            errors.setdefault("reps", []).append(f"reps must be at least 1, got {self.reps}")
        if self.format not in FORMATS:
            errors.setdefault("format", []).append(f"unknown format {self.format!r}; choose from {', '.join(FORMATS)}")
        for name in ("operator", "weight"):
            path = getattr(self, name)
            if path and not Path(path).is_file():
                errors.setdefault(name, []).append(f"{name} spec {path} does not exist")

        options = {}
        for key, default in experiment.defaults.items():
            try:
                options[key] = coerce_param(self.params.get(key, default), default)
            except (TypeError, ValueError) as exc:
                errors.setdefault(key, []).append(f"invalid parameter {key}={self.params[key]!r}: {exc}")
        for key in sorted(set(self.params) - set(experiment.defaults)):
            logger.warning("Experiment %s ignores the parameter %s", self.experiment, key)
        if errors:
            raise ValidationError(errors)

        context = RunContext(self, depth, self.r, options)
        try:
            context.operator = load_json(self.operator) if self.operator else None
            context.weights = _load_weights(self.weight) if self.weight else []
            if experiment.check is not None:
                experiment.check(context)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError({"config": [str(exc)]}) from exc
        return context

    def to_dict(self) -> Dict[str, Any]:
        return {
            "experiment": self.experiment,
            "depth": self.resolved_depth,
            "r": None if self.r is None else str(self.r),
            "seed": self.seed,
            "reps": self.reps,
            "operator": self.operator,
            "weight": self.weight,
            "format": self.format,
            "params": {key: str(value) for key, value in sorted(self.params.items())},
        }


def _load_weights(path) -> List[Weight]:
    data = load_json(path)
    items = data if isinstance(data, list) else [data]
    return [Weight.from_dict(item) for item in items]


@dataclass
class RunContext:
    config: ExperimentConfig
    depth: int
    r: Optional[Fraction]
    options: Dict[str, Any]
    operator: Optional[Dict[str, Any]] = None
    weights: List[Weight] = field(default_factory=list)

    def ratio(self, default) -> float:
        return float(default if self.r is None else self.r)

    def rng(self, seed: int) -> np.random.Generator:
        return np.random.default_rng(seed)


@dataclass(frozen=True)
class Experiment:
    id: str
    run: Callable[[RunContext, int], List[DominationReport]]
    depth: int
    defaults: Mapping[str, Any] = field(default_factory=dict)
    seeded: bool = True
    check: Optional[Callable[[RunContext], None]] = None
    description: str = ""


#Shared resources

@lru_cache(maxsize=None)
def _dictionary(s: float, size: int) -> SmoothBumpDictionary:
    return SmoothBumpDictionary(s, size)


@lru_cache(maxsize=None)
def _dyadic_aq(w: Weight, q: float, depth: int) -> float:
    return aq_characteristic(w, q, DYADIC, depth)


def _kernel(context: RunContext) -> CZKernelSpec:
    if context.operator is None:
        return CZKernelSpec.hilbert()
    return CZKernelSpec.from_dict(context.operator)


def _tag(reports: Sequence[DominationReport], **values) -> List[DominationReport]:
    for report in reports:
        report.measured.update(values)
    return list(reports)


#Dyadic experiments

def run_percentile_weak_type(context: RunContext, seed: int) -> List[DominationReport]:
    rng = context.rng(seed)
    grid = random_grid(context.depth, rng, uniform=context.options["uniform"])
    f = random_function(grid, rng)
    ratios = context.options["ratios"] if context.r is None else (float(context.r),)
    return [weak_type_audit(f, ratio) for ratio in ratios]


def run_layered_domination(context: RunContext, seed: int) -> List[DominationReport]:
    rng = context.rng(seed)
    grid = random_grid(context.depth, rng, uniform=context.options["uniform"])
    f = random_function(grid, rng)
    family = extract_layered(f)
    return [verify_sparsity(family), layered_domination_audit(f, family, context.ratio(0.5))]


def run_theorem_b(context: RunContext, seed: int) -> List[DominationReport]:
    rng = context.rng(seed)
    grid = random_grid(context.depth, rng, uniform=context.options["uniform"])
    f = random_function(grid, rng)
    family = random_sparse_family(grid, rng, eta=0.5)
    return [
        verify_sparsity(family),
        sparse_h1_upper_audit(f, family),
        sparse_h1_lower_audit(f, extract_layered(f)),
    ]


def _interval_entries(f: GridFunction, rng: np.random.Generator, count: int) -> List[GreedyEntry]:
    grid = f.grid
    measure = np.asarray(grid.leaf_measure, dtype=float)
    values = f.as_float()
    entries = []
    for k in range(grid.depth + 1):
        averages = np.asarray(grid.average(values, k), dtype=float)
        for index in range(1 << k):
            cube = Cube(k, index)
            entries.append(GreedyEntry((cube.leaf_slice(grid.depth),), abs(float(averages[index])), cube))
    for _ in range(count):
        start, stop = np.sort(rng.choice(grid.leaf_count + 1, size=2, replace=False))
        window = slice(int(start), int(stop))
        mean = float((values[window] * measure[window]).sum() / measure[window].sum())
        entries.append(GreedyEntry((window,), abs(mean), (int(start), int(stop))))
    return entries


def run_greedy_domination(context: RunContext, seed: int) -> List[DominationReport]:
    rng = context.rng(seed)
    grid = random_grid(context.depth, rng, uniform=context.options["uniform"])
    f = random_function(grid, rng)
    entries = _interval_entries(f, rng, context.options["intervals"])
    report = greedy_domination_audit(entries, np.asarray(grid.leaf_measure, dtype=float))
    return _tag([report], candidates=len(entries))


def _run_stopping(context: RunContext, seed: int, operator: str) -> List[DominationReport]:
    rng = context.rng(seed)
    grid = random_grid(context.depth, rng, uniform=context.options["uniform"])
    f = random_function(grid, rng)
    sigma = PredictableSigns.rademacher(grid, seed) if operator == TRANSFORM else None
    extraction = extract_stopping(f, sigma, operator, context.r)
    return [extraction.overlap, extraction.domination, verify_sparsity(extraction.family)]


def run_stopping_mt(context: RunContext, seed: int) -> List[DominationReport]:
    return _run_stopping(context, seed, TRANSFORM)


def run_stopping_sf(context: RunContext, seed: int) -> List[DominationReport]:
    return _run_stopping(context, seed, SQUARE)


def _complexity_pairs(context: RunContext) -> List[tuple]:
    if context.operator is not None:
        return [(int(context.operator["t"]), int(context.operator["s"]))]
    pairs = []
    for item in context.options["pairs"].split(","):
        t, _, s = item.strip().partition(":")
        pairs.append((int(t), int(s)))
    return pairs


def check_haar_pairs(context: RunContext) -> None:
    for t, s in _complexity_pairs(context):
        if t < 0 or s < 0 or max(t, s) > context.depth:
            raise ValueError(f"complexity ({t}, {s}) does not fit depth {context.depth}")


def run_haar_shift_domination(context: RunContext, seed: int) -> List[DominationReport]:
    rng = context.rng(seed)
    grid = build_grid(context.depth)
    f = random_function(grid, rng)
    bound = float((context.operator or {}).get("bound", context.options["bound"]))
    reports = []
    for t, s in _complexity_pairs(context):
        spec = HaarShiftSpec.random(context.depth, t, s, seed, bound)
        extraction = extract_haar_shift(f, spec)
        reports.extend(_tag(
            [extraction.sparsity, extraction.domination, local_median_audit(f, spec)],
            t=t, s=s,
        ))
    return reports


def run_cs_lp_bound(context: RunContext, seed: int) -> List[DominationReport]:
    rng = context.rng(seed)
    grid = random_grid(context.depth, rng, uniform=context.options["uniform"])
    f = random_function(grid, rng)
    family = random_sparse_family(grid, rng, eta=0.5)
    r = context.ratio(Fraction(1, 2))
    return [cs_lp_audit(f, family, r, p) for p in context.options["exponents"]]


def run_counterexample(context: RunContext, seed: int) -> List[DominationReport]:
    options = context.options
    c0 = options["c0"]
    amplification = options["amplification"] or 8.0 * c0
    exact = bool(getattr(settings, "SPARSEDOM_EXACT_ARITHMETIC", False))
    exact = exact and options["layers"] * options["per_layer_n"] <= EXACT_MAX_DEPTH
    result = counterexample_sequence(options["layers"], options["per_layer_n"], amplification, c0, exact=exact)
    reports = [result.report]
    base = GridFunction.constant(build_grid(0), 1.0)
    for n in options["tn_sizes"]:
        reports.extend(tn_lemma_audit(base, n, amplification))
    return reports


def check_counterexample(context: RunContext) -> None:
    options = context.options
    if options["layers"] < 0:
        raise ValueError(f"layers must be nonnegative, got {options['layers']}")
    if options["c0"] <= 0:
        raise ValueError(f"c0 must be positive, got {options['c0']}")
    max_depth = int(getattr(settings, "SPARSEDOM_MAX_DEPTH", 20))
    if options["layers"] * options["per_layer_n"] > max_depth:
        raise ValueError(f"{options['layers']} layers of N = {options['per_layer_n']} exceed depth {max_depth}")


def run_biparam_strong_max(context: RunContext, seed: int) -> List[DominationReport]:
    rng = context.rng(seed)
    n1 = context.options["n1"] or context.depth
    n2 = context.options["n2"] or context.depth
    pg = ProductGrid(build_grid(n1), build_grid(n2))
    keep = rng.random(pg.shape) < rng.uniform(0.1, 1.0)
    values = np.where(keep, rng.standard_normal(pg.shape) * 10.0, 0.0)
    extraction = biparam_greedy(values, pg)
    return [extraction.sparsity, extraction.domination]


def check_biparam(context: RunContext) -> None:
    n1 = context.options["n1"] or context.depth
    n2 = context.options["n2"] or context.depth
    cap = int(getattr(settings, "SPARSEDOM_PRODUCT_DEPTH_CAP", 16))
    if n1 + n2 > cap:
        raise ValueError(f"product depth {n1} + {n2} exceeds the cap {cap}")


#Weighted experiments

def _experiment_weights(context: RunContext) -> List[Weight]:
    eps_list = context.options["eps"]
    weights = [Weight.constant()]
    weights.extend(Weight.power(eps) for eps in eps_list)
    weights.extend(Weight.flat_bump(eps) for eps in eps_list)
    return weights + list(context.weights)


def run_weighted_sparse(context: RunContext, seed: int) -> List[DominationReport]:
    options = context.options
    rng = context.rng(seed)
    grid = build_grid(context.depth)
    r = context.ratio(Fraction(1, 2))
    family = random_sparse_family(grid, rng, eta=1.0 - r / 2.0)
    f = random_uniform(grid, rng)
    reports = []
    for w in _experiment_weights(context):
        aq = _dyadic_aq(w, options["q"], context.depth)
        report = weighted_sparse_experiment(family, f, w, options["p"], options["t"], r, options["q"], aq=aq)
        reports.append(_tag([report], weight=w.kind, eps=w.eps)[0])
    return reports


def run_weighted_sharpness_flat(context: RunContext, seed: int) -> List[DominationReport]:
    options = context.options
    result = flat_bump_sharpness(
        options["p"], context.ratio(Fraction(1, 4)), options["q"], options["eps"],
        depth=context.depth, tolerance=options["tolerance"],
    )
    return [result.report]


def check_flat_bump(context: RunContext) -> None:
    if context.ratio(Fraction(1, 4)) >= 0.5:
        raise ValueError(f"the flat bump needs r < 1/2, got {context.r}")


def run_weighted_sharpness_power(context: RunContext, seed: int) -> List[DominationReport]:
    options = context.options
    result = power_chain_sharpness(options["p"], options["t"], options["q"], options["eps"], tolerance=options["tolerance"])
    reports = [result.report]
    if options["haar_shift"]:
        spec = HaarShiftSpec.random(context.depth, 0, 1, seed)
        reports.append(weighted_haar_shift_audit(spec, options["p"], options["q"], options["eps"], context.depth, seed))
    return reports


def check_exponents(context: RunContext) -> None:
    options = context.options
    for key in ("p", "t"):
        if key in options and options[key] <= 0:
            raise ValueError(f"{key} must be positive, got {options[key]}")
    if options.get("q", 2.0) <= 1:
        raise ValueError(f"q must exceed 1, got {options['q']}")
    if any(not 0 < eps <= 1 for eps in options.get("eps", ())):
        raise ValueError(f"eps values must lie in (0, 1], got {options['eps']}")


#Line experiments

def run_hilbert_sharpness(context: RunContext, seed: int) -> List[DominationReport]:
    options = context.options
    return [hilbert_sharpness_experiment(
        options["p"], options["s"], options["eps"], q=options["q"],
        dictionary_size=options["dictionary_size"], cells_per_unit=options["cells_per_unit"],
    )]


def check_hilbert(context: RunContext) -> None:
    check_exponents(context)
    options = context.options
    if not options["s"] > 1.0 / options["p"] - 1.0:
        raise ValueError(f"need s > 1/p - 1, got s = {options['s']}, p = {options['p']}")


def _line_setup(context: RunContext):
    cells = 1 << context.depth
    grid = LineGrid(-1.0, 2.0, 3 * cells)
    return grid, CellInterval(cells, cells)


def run_czo_pipeline(context: RunContext, seed: int) -> List[DominationReport]:
    rng = context.rng(seed)
    kernel = _kernel(context)
    grid, Q0 = _line_setup(context)
    f = random_line_function(grid, rng, (Q0.start, Q0.stop), context.options["pieces"])
    s = kernel.s if context.options["s"] is None else context.options["s"]
    extraction = czo_extract_sparse(
        f, kernel, Q0, s=s, r=context.ratio(CZO_RATIO),
        dictionary=_dictionary(s, context.options["dictionary_size"]),
    )
    return [extraction.sparsity, extraction.domination]


def run_estontf_audit(context: RunContext, seed: int) -> List[DominationReport]:
    options = context.options
    rng = context.rng(seed)
    kernel = _kernel(context)
    grid, Q = _line_setup(context)
    f = random_line_function(grid, rng, (0, grid.cells), options["pieces"])
    s = kernel.s if options["s"] is None else options["s"]
    dictionary = _dictionary(s, options["dictionary_size"])
    r = context.ratio(CZO_RATIO)
    reports = [estontf_audit(f, Q, kernel, r, s, dictionary)]
    if options["sharp"]:
        reports.append(sharp_audit(f, Q, kernel, s, dictionary))
    if options["doubling"]:
        reports.append(doubling_audit(
            estontf_audit, f, Q, options["tolerance"], kernel=kernel, r=r, s=s, dictionary=dictionary,
        ))
        if options["sharp"]:
            reports.append(doubling_audit(
                sharp_audit, f, Q, options["tolerance"], kernel=kernel, s=s, dictionary=dictionary,
            ))
    return reports


def check_line(context: RunContext) -> None:
    if context.depth < 1:
        raise ValueError("line experiments need depth >= 1")
    if context.r is not None and context.r > Fraction(1, 2):
        raise ValueError(f"line experiments need r <= 1/2, got {context.r}")
    _kernel(context)


#Registry

WEIGHT_DEFAULTS = {"p": 1.0, "t": 1.0, "q": 2.0, "eps": EPS_LADDER}

EXPERIMENTS: Dict[str, Experiment] = {item.id: item for item in (
    Experiment("percentile-weak-type", run_percentile_weak_type, 10,
               {"ratios": (0.1, 0.25, 0.5), "uniform": False},
               description="mu{P_r f > lambda} <= mu{|f| > lambda}/r at every attained level"),
    Experiment("layered-domination", run_layered_domination, 10, {"uniform": True},
               description="layered family is 1/2-sparse and M f <= 2 P_1/2(M_S f)"),
    Experiment("theoremB", run_theorem_b, 10, {"uniform": True},
               description="two-sided sparse characterization of the dyadic H1 norm"),
    Experiment("greedy-domination", run_greedy_domination, 10, {"intervals": 64, "uniform": True},
               description="greedy interval selection with constant 1"),
    Experiment("stopping-mt", run_stopping_mt, 8, {"uniform": False},
               description="stopping-time extraction for martingale transforms"),
    Experiment("stopping-sf", run_stopping_sf, 8, {"uniform": False},
               description="stopping-time extraction for the square function"),
    Experiment("haar-shift-domination", run_haar_shift_domination, 10, {"pairs": "0:0,0:1,1:0,1:2", "bound": 1.0},
               check=check_haar_pairs, description="Haar shift extraction and the local median estimate"),
    Experiment("cs-lp-bound", run_cs_lp_bound, 10, {"exponents": (0.5, 1.0), "uniform": True},
               description="||C_S f||_p^p <= 8 r^-2 ||f||_p^p"),
    Experiment("counterexample", run_counterexample, 0,
               {"layers": 2, "per_layer_n": 4, "amplification": 0.0, "c0": 1.0, "tn_sizes": (3, 4, 5)},
               seeded=False, check=check_counterexample,
               description="T_N lemma and the forced-set sparsity decay"),
    Experiment("biparam-strong-max", run_biparam_strong_max, 6, {"n1": 0, "n2": 0},
               check=check_biparam, description="greedy rectangle selection for the strong maximal function"),
    Experiment("weighted-sparse", run_weighted_sparse, 10, dict(WEIGHT_DEFAULTS),
               check=check_exponents, description="weighted sparse bound with the proof-chain constant"),
    Experiment("weighted-sharpness-flat", run_weighted_sharpness_flat, 10,
               {"p": 1.0, "q": 2.0, "eps": EPS_LADDER, "tolerance": 0.1},
               seeded=False, check=lambda context: (check_exponents(context), check_flat_bump(context)),
               description="flat-bump slope 1/p"),
    Experiment("weighted-sharpness-power", run_weighted_sharpness_power, 10,
               {**WEIGHT_DEFAULTS, "tolerance": 0.15, "haar_shift": False},
               seeded=False, check=check_exponents, description="nested-chain slope 1/t"),
    Experiment("hilbert-sharpness", run_hilbert_sharpness, 0,
               {"p": 1.0, "s": 1.0, "q": 2.0, "eps": EPS_LADDER, "dictionary_size": 16, "cells_per_unit": 64},
               seeded=False, check=check_hilbert, description="Hilbert transform against M^s along power weights"),
    Experiment("czo-pipeline", run_czo_pipeline, 8, {"s": None, "pieces": 8, "dictionary_size": 16},
               check=check_line, description="sparse family for a Calderon-Zygmund operator"),
    Experiment("estonTF-audit", run_estontf_audit, 10,
               {"s": None, "pieces": 8, "dictionary_size": 16, "sharp": True, "doubling": True,
                "tolerance": DOUBLING_TOLERANCE},
               check=check_line, description="percentile estimate for Tf and its mesh stability"),
)}


#Running

@dataclass
class ExperimentResult:
    config: ExperimentConfig
    payload: Dict[str, Any]
    reports: List[DominationReport]
    passed: bool
    path: Optional[Path] = None

    @property
    def failures(self) -> List[DominationReport]:
        return [report for report in self.reports if not report.passed]


def environment() -> Dict[str, str]:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "scikit-learn": sklearn.__version__,
    }


def summarize(reports: Sequence[DominationReport]) -> Dict[str, Dict[str, Any]]:
    """One merged report per inequality id, worst constant over every seed."""
    grouped: Dict[str, List[DominationReport]] = {}
    for report in reports:
        grouped.setdefault(report.inequality_id, []).append(report)
    summary = {}
    for inequality_id, items in sorted(grouped.items()):
        entry = merge_reports(inequality_id, items).to_dict()
        entry["count"] = len(items)
        summary[inequality_id] = entry
    return summary


def build_payload(config: ExperimentConfig, seeds: Sequence[int], per_seed: Sequence[List[DominationReport]]) -> Dict[str, Any]:
    reports = [report for batch in per_seed for report in batch]
    return {
        "version": REPORT_VERSION,
        "experiment": config.experiment,
        "config": config.to_dict(),
        "seeds": list(seeds),
        "runs": [
            {"seed": seed, "reports": [report.to_dict() for report in batch]}
            for seed, batch in zip(seeds, per_seed)
        ],
        "summary": summarize(reports),
        "passed": all(report.passed for report in reports),
        "environment": environment(),
        "generated_at": timezone.now().isoformat(),
    }


def default_output(config: ExperimentConfig) -> Path:
    suffix = {"json": "json", "csv": "csv", "gnuplot-data": "dat"}[config.format]
    directory = Path(getattr(settings, "SPARSEDOM_REPORT_DIR", "reports"))
    return directory / f"{config.experiment}-seed{config.seed}.{suffix}"


def run_seeds(context: RunContext, seeds: Sequence[int]) -> List[List[DominationReport]]:
    """Runs every seed in the worker pool; results come back in seed order."""
    experiment = context.config.spec
    workers = max(1, min(int(getattr(settings, "SPARSEDOM_WORKERS", 4)), len(seeds)))
    if workers == 1:
        return [experiment.run(context, seed) for seed in seeds]
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="sparsedom") as pool:
        return list(pool.map(lambda seed: experiment.run(context, seed), seeds))


def run_experiment(config: ExperimentConfig, record: bool = True, write: bool = True) -> ExperimentResult:
    """
    Validates ``config``, runs it and writes the report.

    Raises ValidationError before any computation if the config is invalid.
    The run is persisted when ``record`` is set; persistence failures are
    logged and never change the outcome.
    """
    from .runs import record_experiment_run, record_failed_run

    context = config.validate()
    seeds = config.seeds
    logger.info("Running %s at depth %d over %d seed(s) from %d", config.experiment, context.depth, len(seeds), config.seed)
    try:
        per_seed = run_seeds(context, seeds)
    except Exception as exc:
        logger.error("Experiment %s failed: %s", config.experiment, exc, exc_info=True)
        if record:
            record_failed_run(config, str(exc))
        raise

    payload = build_payload(config, seeds, per_seed)
    reports = [report for batch in per_seed for report in batch]
    result = ExperimentResult(config, payload, reports, payload["passed"])
    if write:
        result.path = emit_report(payload, config.format, config.out or default_output(config))
    if result.passed:
        logger.info("Experiment %s passed (%d reports)", config.experiment, len(reports))
    else:
        logger.warning(
            "Experiment %s failed: %s", config.experiment,
            ", ".join(sorted({report.inequality_id for report in result.failures})),
        )
    if record:
        record_experiment_run(result)
    return result
