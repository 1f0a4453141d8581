import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from models.dataset import Dataset
from models.exceptions import ConfigError, DatasetFormatError
from models.graph import build_knn_graph
from models.temporal import SignalLike, TimeSignal, as_matrix

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

NODES_FILE = "nodes.csv"
SIGNALS_FILE = "signals.csv"
MANIFEST_FILE = "manifest.json"


def _density_range(start: float, stop: float, step: float) -> List[float]:
    count = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 10) for i in range(count)]


DATASET_PRESETS: Dict[str, Dict[str, Any]] = {
    "synthetic": {"knn_k": 5, "densities": _density_range(0.1, 0.9, 0.1)},
    "pm25": {"knn_k": 5, "densities": _density_range(0.1, 0.45, 0.05)},
    "sea_surface": {"knn_k": 5, "densities": _density_range(0.1, 0.9, 0.1)},
    "intel_lab": {"knn_k": 3, "densities": [0.1, 0.3, 0.5, 0.7]},
}


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    nodes_path: Path
    signals_path: Path
    knn_k: int
    densities: List[float] = field(default_factory=list)

    def to_dict(self, relative_to: Optional[Path] = None) -> Dict[str, Any]:
        def rel(path: Path) -> str:
            if relative_to is not None:
                try:
                    return str(path.relative_to(relative_to))
                except ValueError:
                    pass
            return str(path)

        return {
            "name": self.name,
            "nodes_path": rel(self.nodes_path),
            "signals_path": rel(self.signals_path),
            "knn_k": self.knn_k,
            "densities": list(self.densities),
        }


def load_manifest(path: PathLike) -> DatasetManifest:
    """Read a dataset manifest; relative file paths resolve against the manifest's folder"""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError("dataset", f"manifest not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError("dataset", f"manifest is not valid JSON: {e}")

    for key in ("name", "nodes_path", "signals_path", "knn_k"):
        if key not in data:
            raise ConfigError(key, "missing from dataset manifest")
    base = path.parent
    preset = DATASET_PRESETS.get(data["name"], {})
    return DatasetManifest(
        name=str(data["name"]),
        nodes_path=base / data["nodes_path"],
        signals_path=base / data["signals_path"],
        knn_k=int(data["knn_k"]),
        densities=[float(d) for d in data.get("densities", preset.get("densities", []))],
    )


def _read_csv(path: PathLike) -> pd.DataFrame:
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except FileNotFoundError:
        raise DatasetFormatError(f"File not found: {path}")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetFormatError(f"Cannot parse {path}: {e}")


def _dense_ids(frame: pd.DataFrame, path: PathLike) -> pd.DataFrame:
    if "node_id" not in frame.columns:
        raise DatasetFormatError(f"{path}: header must start with node_id", column="node_id")
    ids = pd.to_numeric(frame["node_id"], errors="coerce")
    if ids.isna().any():
        row = int(np.flatnonzero(ids.isna().to_numpy())[0])
        raise DatasetFormatError(f"{path}: node_id is not an integer", row=row, column="node_id")
    if not np.all(ids.to_numpy() == np.round(ids.to_numpy())):
        raise DatasetFormatError(f"{path}: node_id values must be integers", column="node_id")
    frame = frame.assign(node_id=ids.astype(np.int64)).sort_values("node_id", kind="stable")
    expected = np.arange(len(frame))
    actual = frame["node_id"].to_numpy()
    if not np.array_equal(actual, expected):
        missing = sorted(set(expected.tolist()) - set(actual.tolist()))
        raise DatasetFormatError(
            f"{path}: node ids must be dense 0..{len(frame) - 1}"
            + (f", missing {missing[:10]}" if missing else ", found duplicates or out-of-range ids"),
            column="node_id",
        )
    return frame.reset_index(drop=True)


def _numeric_block(frame: pd.DataFrame, columns: List[str], path: PathLike) -> np.ndarray:
    block = frame[columns].apply(pd.to_numeric, errors="coerce")
    bad = block.isna().to_numpy() | ~np.isfinite(block.to_numpy(dtype=float, na_value=np.nan))
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise DatasetFormatError(
            f"{path}: missing or non-numeric value",
            row=int(frame["node_id"].iloc[row]),
            column=columns[col],
        )
    return block.to_numpy(dtype=float)


def read_nodes_csv(path: PathLike) -> np.ndarray:
    """`node_id,x,y[,z]` -> N x d coordinates ordered by node id"""
    frame = _dense_ids(_read_csv(path), path)
    axes = [c for c in ("x", "y", "z") if c in frame.columns]
    if axes[:2] != ["x", "y"]:
        raise DatasetFormatError(f"{path}: header must be node_id,x,y[,z]", column="x")
    return _numeric_block(frame, axes, path)


def read_signals_csv(path: PathLike) -> np.ndarray:
    """`node_id,t0,...,t{M-1}` -> N x M matrix ordered by node id"""
    frame = _dense_ids(_read_csv(path), path)
    columns = [c for c in frame.columns if c != "node_id"]
    if len(columns) < 2:
        raise DatasetFormatError(f"{path}: need at least two time columns")
    return _numeric_block(frame, columns, path)


def load_dataset_csv(nodes_path: PathLike, signals_path: PathLike, knn_k: int, name: str) -> Dataset:
    coords = read_nodes_csv(nodes_path)
    values = read_signals_csv(signals_path)
    if coords.shape[0] != values.shape[0]:
        raise DatasetFormatError(
            f"Node count mismatch: {coords.shape[0]} nodes in {nodes_path}, {values.shape[0]} rows in {signals_path}"
        )
    graph = build_knn_graph(coords, knn_k)
    logger.info("Loaded dataset %s: %d nodes x %d times", name, values.shape[0], values.shape[1])
    return Dataset(name=name, graph=graph, signal=TimeSignal(values), knn_k=knn_k)


def load_dataset(manifest_path: PathLike) -> Dataset:
    manifest = load_manifest(manifest_path)
    return load_dataset_csv(manifest.nodes_path, manifest.signals_path, manifest.knn_k, manifest.name)


def write_signal_csv(values: SignalLike, path: PathLike) -> Path:
    """Write an N x M matrix as `node_id,t0,...` with round-trip float formatting"""
    matrix = as_matrix(values)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(matrix, columns=[f"t{j}" for j in range(matrix.shape[1])])
    frame.insert(0, "node_id", np.arange(matrix.shape[0]))
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def write_dataset_csv(dataset: Dataset, out_dir: PathLike, densities: Optional[List[float]] = None) -> Path:
    """Write nodes CSV, signals CSV and a manifest; returns the manifest path"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    coords = dataset.graph.coords
    if coords is None:
        raise DatasetFormatError("Dataset graph has no node coordinates to write")

    axes = ["x", "y", "z"][:coords.shape[1]]
    nodes = pd.DataFrame(coords, columns=axes)
    nodes.insert(0, "node_id", np.arange(coords.shape[0]))
    nodes.to_csv(out_dir / NODES_FILE, index=False, lineterminator="\n")
    write_signal_csv(dataset.signal, out_dir / SIGNALS_FILE)

    if densities is None:
        densities = DATASET_PRESETS.get(dataset.name, {}).get("densities", [])
    manifest = DatasetManifest(dataset.name, out_dir / NODES_FILE, out_dir / SIGNALS_FILE,
                               dataset.knn_k, list(densities))
    manifest_path = out_dir / MANIFEST_FILE
    manifest_path.write_text(json.dumps(manifest.to_dict(relative_to=out_dir), indent=2) + "\n")
    return manifest_path
