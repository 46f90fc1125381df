"""
JSON and CSV interchange for the lab's objects.

Boolean masks travel as base64 of numpy.packbits with the shape alongside;
tabular data (leaf functions, line functions, product functions, slope
points, rectangle dumps) goes through pandas so headers and dtypes stay
stable across runs.
"""

import base64
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import numpy as np
import pandas as pd

from .biparam import ProductGrid, Rectangle
from .dyadic import Cube, DyadicGrid, GridFunction, build_grid
from .euclid import LineFunction, LineGrid
from .reports import DominationReport, plain
from .sparse import ADAPTED, FLAT, SparseFamily

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


#Masks

def encode_mask(mask) -> Dict[str, Any]:
    mask = np.asarray(mask, dtype=bool)
    packed = np.packbits(mask.ravel())
    return {"shape": list(mask.shape), "bits": base64.b64encode(packed.tobytes()).decode("ascii")}


def decode_mask(data: Dict[str, Any]) -> np.ndarray:
    shape = tuple(int(n) for n in data["shape"])
    count = int(np.prod(shape)) if shape else 1
    packed = np.frombuffer(base64.b64decode(data["bits"]), dtype=np.uint8)
    return np.unpackbits(packed, count=count).astype(bool).reshape(shape)


#Sparse families

def family_to_dict(family: SparseFamily) -> Dict[str, Any]:
    if family.kind == ADAPTED:
        grid = family.grid
        return {
            "kind": ADAPTED,
            "eta": family.eta,
            "depth": grid.depth,
            "leaf_measure": None if grid.is_uniform else [float(m) for m in grid.leaf_measure],
            "cubes": [cube.as_pair() for cube in family.cubes()],
        }
    return {
        "kind": FLAT,
        "eta": family.eta,
        "cell_measure": plain(family.cell_measure),
        "sets": [encode_mask(mask) for mask in family.sets],
        "witnesses": None if family.witnesses is None else [encode_mask(mask) for mask in family.witnesses],
        "labels": [_label_to_plain(label) for label in family.labels],
    }


def family_from_dict(data: Dict[str, Any]) -> SparseFamily:
    kind = data.get("kind")
    if kind == ADAPTED:
        grid = build_grid(int(data["depth"]), data.get("leaf_measure"))
        cubes = [Cube(int(level), int(index)) for level, index in data.get("cubes", [])]
        return SparseFamily.from_cubes(grid, cubes, eta=float(data["eta"]))
    if kind == FLAT:
        witnesses = data.get("witnesses")
        return SparseFamily.flat(
            np.asarray(data["cell_measure"], dtype=float),
            [decode_mask(mask) for mask in data["sets"]],
            None if witnesses is None else [decode_mask(mask) for mask in witnesses],
            eta=float(data["eta"]),
            labels=[_label_from_plain(label) for label in data.get("labels", [])],
        )
    raise ValueError(f"malformed family: unknown kind {kind!r}")


def _label_to_plain(label: Any) -> Any:
    if isinstance(label, Rectangle):
        return {"rectangle": label.as_row()}
    if isinstance(label, Cube):
        return {"cube": label.as_pair()}
    return plain(label)


def _label_from_plain(label: Any) -> Any:
    if isinstance(label, dict) and "rectangle" in label:
        k1, i1, k2, i2 = label["rectangle"]
        return Rectangle(Cube(k1, i1), Cube(k2, i2))
    if isinstance(label, dict) and "cube" in label:
        return Cube(*label["cube"])
    return label


def dump_json(data: Any, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(plain(data), indent=2, sort_keys=True) + "\n")
    return path


def load_json(path: PathLike) -> Any:
    return json.loads(Path(path).read_text())


def reports_from_json(items: Iterable[Dict[str, Any]]) -> List[DominationReport]:
    return [DominationReport.from_dict(item) for item in items]


#Tables

def grid_function_frame(f: GridFunction) -> pd.DataFrame:
    return pd.DataFrame({
        "leaf": np.arange(f.grid.leaf_count),
        "measure": np.asarray(f.grid.leaf_measure, dtype=float),
        "value": f.as_float(),
    })


def grid_function_from_frame(frame: pd.DataFrame) -> GridFunction:
    frame = frame.sort_values("leaf")
    count = len(frame)
    depth = count.bit_length() - 1
    if count != 1 << depth:
        raise ValueError(f"leaf table has {count} rows, expected a power of two")
    measure = frame["measure"].to_numpy(dtype=float)
    grid: DyadicGrid = build_grid(depth) if np.all(measure == measure[0]) else build_grid(depth, measure)
    return GridFunction(grid, frame["value"].to_numpy(dtype=float))


def line_function_frame(f: LineFunction) -> pd.DataFrame:
    return pd.DataFrame({"x_midpoint": f.grid.midpoints, "value": f.values})


def line_function_from_frame(frame: pd.DataFrame) -> LineFunction:
    mids = frame["x_midpoint"].to_numpy(dtype=float)
    if mids.size < 2:
        raise ValueError("a line function table needs at least two rows")
    h = float(np.mean(np.diff(mids)))
    if not np.allclose(np.diff(mids), h, rtol=1e-9, atol=1e-12):
        raise ValueError("line function midpoints are not uniformly spaced")
    grid = LineGrid(float(mids[0] - h / 2), float(mids[-1] + h / 2), int(mids.size))
    return LineFunction(grid, frame["value"].to_numpy(dtype=float))


def product_function_frame(values, pg: ProductGrid) -> pd.DataFrame:
    values = pg.check(values)
    n1, n2 = np.meshgrid(np.arange(pg.shape[0]), np.arange(pg.shape[1]), indexing="ij")
    return pd.DataFrame({"n1": n1.ravel(), "n2": n2.ravel(), "value": values.ravel()})


def product_function_from_frame(frame: pd.DataFrame, pg: ProductGrid) -> np.ndarray:
    frame = frame.sort_values(["n1", "n2"])
    return pg.check(frame["value"].to_numpy(dtype=float).reshape(pg.shape))


def rectangles_frame(rectangles: Iterable[Rectangle]) -> pd.DataFrame:
    rows = [rectangle.as_row() for rectangle in rectangles]
    return pd.DataFrame(rows, columns=["k1", "i1", "k2", "i2"])


def points_frame(points: Sequence[Dict[str, Any]], columns: Sequence[str] = ("eps", "Aq", "lhs", "rhs")) -> pd.DataFrame:
    frame = pd.DataFrame(list(points))
    missing = [column for column in columns if column not in frame.columns]
    if missing:
        raise ValueError(f"points lack the columns {missing}")
    extra = [column for column in frame.columns if column not in columns]
    return frame[list(columns) + extra]


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g")
    return path


def read_csv(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path)
