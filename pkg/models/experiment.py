import hashlib
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from utils.data_generator import SyntheticConfig, generate_synthetic, random_sampling_mask
from utils.dataset_io import DATASET_PRESETS, load_dataset, load_manifest
from utils.run_logging import log_run
from utils.validators import ConfigValidator

from .dataset import Dataset
from .exceptions import ConfigError, ReconstructionError
from .methods import run_method
from .metrics import compute_metrics
from .tuning import DEFAULT_SEARCH_SPACES, tune_method

logger = logging.getLogger(__name__)

RECORD_COLUMNS = ["method", "dataset", "density", "repetition", "rmse", "mae", "mape",
                  "wall_time_seconds", "converged", "mask_hash"]
CURVE_COLUMNS = ["method", "dataset", "density", "mean_rmse", "mean_mae", "mean_mape"]
SUMMARY_COLUMNS = ["method", "dataset", "mean_rmse", "mean_mae", "mean_mape",
                   "pooled_rmse", "pooled_mae", "pooled_mape", "records", "failed"]

RECORDS_FILE = "records.csv"
SUMMARY_FILE = "summary.csv"
CURVE_FILE = "curve.csv"
PARAMS_FILE = "params.json"

PathLike = Union[str, Path]


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Monte Carlo cross-validation over sampling densities

    `dataset` is either "synthetic" or the path of a dataset manifest. `densities`
    defaults to the preset of the dataset's name.
    """

    dataset: str = "synthetic"
    synthetic: Dict[str, Any] = field(default_factory=dict)
    methods: Tuple[str, ...] = ("gcn", "graphtrss", "tgsr", "timegnn")
    densities: Optional[Tuple[float, ...]] = None
    repetitions: int = 50
    base_seed: int = 0
    method_params: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    tune: bool = False
    search_space: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    tuning_trials: int = 20
    tuning_density: Optional[float] = None
    validation_fraction: float = 0.2
    output_dir: str = "results"
    workers: int = 1
    resume: bool = False
    record_wall_time: bool = False

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(sorted(self.methods)))
        if self.densities is not None:
            object.__setattr__(self, "densities", tuple(sorted(float(d) for d in self.densities)))
        if not self.methods:
            raise ConfigError("methods", "at least one method is required")
        if self.densities is not None and not all(0.0 < d <= 1.0 for d in self.densities):
            raise ConfigError("densities", "every density must lie in (0, 1]")
        if int(self.repetitions) < 1:
            raise ConfigError("repetitions", f"must be at least 1, got {self.repetitions}")
        if int(self.base_seed) < 0:
            raise ConfigError("base_seed", f"must be nonnegative, got {self.base_seed}")
        if int(self.workers) < 1:
            raise ConfigError("workers", f"must be at least 1, got {self.workers}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base_dir: Optional[Path] = None) -> "ExperimentConfig":
        validation = ConfigValidator.validate_experiment(data)
        for warning in validation['warnings']:
            logger.warning("Config: %s", warning)
        if not validation['is_valid']:
            field_name, _, message = validation['errors'][0].partition(": ")
            raise ConfigError(field_name, message)

        data = dict(data)
        if "methods" in data:
            data["methods"] = tuple(data["methods"])
        if "densities" in data:
            data["densities"] = tuple(data["densities"])
        dataset = data.get("dataset", "synthetic")
        if base_dir is not None and dataset != "synthetic" and not Path(dataset).is_absolute():
            data["dataset"] = str(Path(base_dir) / dataset)
        return cls(**data)

    @classmethod
    def from_json(cls, path: PathLike) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError("config", f"file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError("config", f"invalid JSON: {e}")
        return cls.from_dict(data, base_dir=path.parent)

    def density_grid(self) -> List[float]:
        if self.densities is not None:
            return list(self.densities)
        if self.dataset == "synthetic":
            return list(DATASET_PRESETS["synthetic"]["densities"])
        grid = load_manifest(self.dataset).densities
        if not grid:
            raise ConfigError("densities", f"no densities given and no preset for {self.dataset}")
        return sorted(grid)

    @property
    def records_path(self) -> Path:
        return Path(self.output_dir) / RECORDS_FILE


@dataclass
class ResultRecord:
    method: str
    dataset: str
    density: float
    repetition: int
    rmse: float
    mae: float
    mape: Optional[float]
    wall_time_seconds: Optional[float]
    converged: bool
    mask_hash: str

    @property
    def cell(self) -> Tuple[float, int]:
        return (self.density, self.repetition)

    def to_row(self) -> List[str]:
        return [self.method, self.dataset, _fmt(self.density), str(self.repetition), _fmt(self.rmse),
                _fmt(self.mae), _fmt(self.mape), _fmt(self.wall_time_seconds),
                "true" if self.converged else "false", self.mask_hash]


def _fmt(value: Optional[float]) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return repr(float(value))


def _optional(value) -> Optional[float]:
    return None if pd.isna(value) else float(value)


def derive_cell_seed(base_seed: int, density: float, repetition: int) -> int:
    """base_seed XOR a hash of (density, repetition); independent of execution order"""
    digest = hashlib.sha256(f"{float(density)!r}:{int(repetition)}".encode()).digest()
    return int.from_bytes(digest[:8], "big") ^ int(base_seed)


def load_experiment_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.dataset == "synthetic":
        return generate_synthetic(SyntheticConfig.from_dict({"seed": cfg.base_seed, **cfg.synthetic}))
    return load_dataset(cfg.dataset)


def run_cell(dataset: Dataset, cfg: ExperimentConfig, density: float, repetition: int,
             params: Dict[str, Dict[str, Any]]) -> List[ResultRecord]:
    """Every method on one shared mask; metrics on the unsampled entries"""
    seed = derive_cell_seed(cfg.base_seed, density, repetition)
    n, m = dataset.shape
    mask = random_sampling_mask(n, m, density, seed)
    truth = dataset.signal.values
    unsampled = mask.complement()
    # fully observed cells are scored on every entry
    eval_set = unsampled if unsampled.any() else np.ones_like(unsampled)

    records = []
    for method in cfg.methods:
        start = time.perf_counter()
        try:
            outcome = run_method(method, dataset, truth, mask, params.get(method, {}), seed)
            metrics = compute_metrics(outcome.reconstruction, truth, eval_set)
            rmse, mae, mape, converged = metrics.rmse, metrics.mae, metrics.mape, outcome.converged
        except ConfigError:
            raise
        except (ReconstructionError, ArithmeticError, np.linalg.LinAlgError) as e:
            logger.warning("%s failed at density %s, repetition %d: %s", method, density, repetition, e)
            rmse, mae, mape, converged = math.nan, math.nan, None, False
        elapsed = time.perf_counter() - start
        records.append(ResultRecord(method, dataset.name, float(density), int(repetition), rmse, mae, mape,
                                    elapsed if cfg.record_wall_time else None, converged, mask.mask_hash))
    return records


def _write_header(path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(",".join(RECORD_COLUMNS) + "\n")


def append_records(path: PathLike, records: Sequence[ResultRecord]):
    if not records:
        return
    frame = pd.DataFrame([r.to_row() for r in records], columns=RECORD_COLUMNS)
    frame.to_csv(path, mode="a", header=False, index=False, lineterminator="\n")


def read_records(path: PathLike) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype={"method": str, "dataset": str, "mask_hash": str, "converged": str},
                            keep_default_na=False, na_values=[""], float_precision="round_trip")
    except FileNotFoundError:
        raise ConfigError("records", f"file not found: {path}")
    missing = [c for c in RECORD_COLUMNS if c not in frame.columns]
    if missing:
        raise ConfigError("records", f"missing columns {', '.join(missing)} in {path}")
    frame["converged"] = frame["converged"].str.lower() == "true"
    return frame[RECORD_COLUMNS]


def records_from_frame(frame: pd.DataFrame) -> List[ResultRecord]:
    return [
        ResultRecord(str(row.method), str(row.dataset), float(row.density), int(row.repetition),
                     float(row.rmse), float(row.mae), _optional(row.mape), _optional(row.wall_time_seconds),
                     bool(row.converged), str(row.mask_hash))
        for row in frame.itertuples(index=False)
    ]


def _completed_cells(cfg: ExperimentConfig, grid: List[float]) -> Dict[Tuple[float, int], List[ResultRecord]]:
    """Cells of the current plan already complete in a previous run's records CSV"""
    path = cfg.records_path
    if not cfg.resume or not path.exists():
        return {}
    by_cell: Dict[Tuple[float, int], List[ResultRecord]] = {}
    for record in records_from_frame(read_records(path)):
        by_cell.setdefault(record.cell, []).append(record)
    done = {}
    for cell, cell_records in by_cell.items():
        cell_records = sorted(cell_records, key=lambda r: r.method)
        in_plan = cell[0] in grid and 0 <= cell[1] < int(cfg.repetitions)
        if in_plan and tuple(r.method for r in cell_records) == cfg.methods:
            done[cell] = cell_records
    logger.info("Resuming: %d complete cells found in %s", len(done), path)
    return done


def resolve_method_params(cfg: ExperimentConfig, dataset: Dataset, grid: List[float]) -> Dict[str, Dict[str, Any]]:
    """Fixed parameters, overridden by tuned ones when tuning is on; tuned values are cached"""
    params = {method: dict(cfg.method_params.get(method, {})) for method in cfg.methods}
    if not cfg.tune:
        return params

    cache = Path(cfg.output_dir) / PARAMS_FILE
    if cfg.resume and cache.exists():
        logger.info("Reusing tuned parameters from %s", cache)
        return json.loads(cache.read_text())

    density = cfg.tuning_density if cfg.tuning_density is not None else grid[len(grid) // 2]
    seed = derive_cell_seed(cfg.base_seed, density, -1)
    for method in cfg.methods:
        space = cfg.search_space.get(method, DEFAULT_SEARCH_SPACES[method])
        if not space:
            continue
        result = tune_method(method, dataset, density, space, cfg.tuning_trials, seed,
                             cfg.validation_fraction, base_params=params[method])
        params[method].update(result.best_params)

    cache.parent.mkdir(parents=True, exist_ok=True)
    cache.write_text(json.dumps(params, indent=2, sort_keys=True) + "\n")
    return params


@log_run()
def run_monte_carlo(cfg: ExperimentConfig, dataset: Optional[Dataset] = None) -> List[ResultRecord]:
    """Run every (density, repetition) cell and append its records to the records CSV

    Cells run on `cfg.workers` threads; records are written in (density, repetition,
    method) order whatever order the cells finish in.
    """
    if dataset is None:
        dataset = load_experiment_dataset(cfg)
    grid = cfg.density_grid()
    params = resolve_method_params(cfg, dataset, grid)

    done = _completed_cells(cfg, grid)
    path = cfg.records_path
    _write_header(path)

    plan = [(d, r) for d in grid for r in range(int(cfg.repetitions))]
    todo = [cell for cell in plan if cell not in done]
    logger.info("Running %d of %d cells (%d densities x %d repetitions, %d methods)",
                len(todo), len(plan), len(grid), cfg.repetitions, len(cfg.methods))

    records: List[ResultRecord] = []
    with ThreadPoolExecutor(max_workers=int(cfg.workers)) as pool:
        futures = {cell: pool.submit(run_cell, dataset, cfg, cell[0], cell[1], params) for cell in todo}
        try:
            for cell in plan:
                cell_records = done[cell] if cell in done else futures[cell].result()
                append_records(path, cell_records)
                records.extend(cell_records)
        except BaseException:
            pool.shutdown(wait=False, cancel_futures=True)
            raise
    return records


@dataclass
class ExperimentSummary:
    summary: pd.DataFrame
    curve: pd.DataFrame


def summarize(records: Union[pd.DataFrame, Sequence[ResultRecord]]) -> ExperimentSummary:
    """Density curve means and per-method averages

    `mean_*` weights every density equally; `pooled_*` averages all records.
    """
    if isinstance(records, pd.DataFrame):
        frame = records.copy()
    else:
        frame = pd.DataFrame([{c: getattr(r, c) for c in RECORD_COLUMNS} for r in records],
                             columns=RECORD_COLUMNS)
    if frame.empty:
        raise ReconstructionError("No records to summarize")
    for column in ("density", "rmse", "mae", "mape"):
        frame[column] = pd.to_numeric(frame[column], errors="coerce")

    curve = (frame.groupby(["method", "dataset", "density"], sort=True)[["rmse", "mae", "mape"]]
             .mean()
             .rename(columns={"rmse": "mean_rmse", "mae": "mean_mae", "mape": "mean_mape"})
             .reset_index())

    equal_weight = curve.groupby(["method", "dataset"], sort=True)[["mean_rmse", "mean_mae", "mean_mape"]].mean()
    grouped = frame.groupby(["method", "dataset"], sort=True)
    pooled = (grouped[["rmse", "mae", "mape"]].mean()
              .rename(columns={"rmse": "pooled_rmse", "mae": "pooled_mae", "mape": "pooled_mape"}))
    counts = grouped.agg(records=("rmse", "size"), failed=("rmse", lambda s: int(s.isna().sum())))
    summary = equal_weight.join(pooled).join(counts).reset_index()

    return ExperimentSummary(summary[SUMMARY_COLUMNS], curve[CURVE_COLUMNS])


def write_reports(records_path: PathLike, out_dir: Optional[PathLike] = None) -> Tuple[Path, Path]:
    """Summary and curve CSVs computed from a records CSV on disk"""
    records_path = Path(records_path)
    out_dir = Path(out_dir) if out_dir is not None else records_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    result = summarize(read_records(records_path))
    summary_path, curve_path = out_dir / SUMMARY_FILE, out_dir / CURVE_FILE
    result.summary.to_csv(summary_path, index=False, lineterminator="\n")
    result.curve.to_csv(curve_path, index=False, lineterminator="\n")
    return summary_path, curve_path
