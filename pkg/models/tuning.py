import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from utils.data_generator import random_sampling_mask
from utils.run_logging import log_run

from .dataset import Dataset
from .exceptions import ConfigError, ReconstructionError
from .methods import METHODS, run_method
from .metrics import compute_metrics
from .solvers import SamplingMask
from .trainer import split_training_set

logger = logging.getLogger(__name__)

UPSILON_GRID = [0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0]

DEFAULT_SEARCH_SPACES: Dict[str, Dict[str, Any]] = {
    "timegnn": {
        "n_layers": [1, 2, 3],
        "hidden": list(range(2, 11)),
        "learning_rate": {"low": 0.005, "high": 0.05, "log": True},
        "weight_decay": {"low": 1e-5, "high": 1e-3, "log": True},
        "lam": {"low": 1e-6, "high": 1e-3, "log": True},
        "alpha": [2, 3, 4],
    },
    "gcn": {
        "n_layers": [1, 2, 3],
        "hidden": list(range(2, 11)),
        "learning_rate": {"low": 0.005, "high": 0.05, "log": True},
        "weight_decay": {"low": 1e-5, "high": 1e-3, "log": True},
        "lam": {"low": 1e-6, "high": 1e-3, "log": True},
    },
    "tgsr": {"upsilon": UPSILON_GRID},
    "graphtrss": {"upsilon": UPSILON_GRID},
    "mean": {},
}


@dataclass
class TuningResult:
    method: str
    best_params: Dict[str, Any]
    best_score: float
    trials: List[Tuple[Dict[str, Any], float]] = field(default_factory=list)


def _is_range(entry: Any) -> bool:
    return isinstance(entry, dict) and "low" in entry and "high" in entry


def _sample_range(entry: Dict[str, Any], rng: np.random.Generator):
    low, high = entry["low"], entry["high"]
    if not low <= high:
        raise ConfigError("search_space", f"range low {low} exceeds high {high}")
    if isinstance(low, int) and isinstance(high, int) and not entry.get("log", False):
        return int(rng.integers(low, high + 1))
    if entry.get("log", False):
        if low <= 0:
            raise ConfigError("search_space", "log ranges need a positive lower bound")
        return float(math.exp(rng.uniform(math.log(low), math.log(high))))
    return float(rng.uniform(low, high))


def candidate_params(space: Dict[str, Any], trials: int, seed: int) -> List[Dict[str, Any]]:
    """Full grid when every entry is a list, otherwise `trials` seeded random draws"""
    keys = sorted(space)
    if not keys:
        return [{}]
    for key in keys:
        entry = space[key]
        if isinstance(entry, list) and not entry:
            raise ConfigError(key, "search list is empty")
        if not isinstance(entry, list) and not _is_range(entry):
            raise ConfigError(key, "search entries must be a list or a {low, high[, log]} range")

    if all(isinstance(space[k], list) for k in keys):
        return [dict(zip(keys, combo)) for combo in itertools.product(*(space[k] for k in keys))]

    rng = np.random.default_rng(seed)
    candidates = []
    for _ in range(max(int(trials), 1)):
        params = {}
        for key in keys:
            entry = space[key]
            if isinstance(entry, list):
                params[key] = entry[int(rng.integers(len(entry)))]
            else:
                params[key] = _sample_range(entry, rng)
        candidates.append(params)
    return candidates


def _tuning_summary(result: TuningResult) -> Dict[str, Any]:
    return {"method": result.method, "trials": len(result.trials), "best_rmse": f"{result.best_score:.6g}"}


@log_run(summary=_tuning_summary)
def tune_method(name: str, dataset: Dataset, density: float, search_space: Optional[Dict[str, Any]] = None,
                trials: int = 20, seed: int = 0, holdout_fraction: float = 0.2,
                base_params: Optional[Dict[str, Any]] = None) -> TuningResult:
    """Pick hyperparameters by RMSE on held-out sampled entries of one tuning mask"""
    if name not in METHODS:
        raise ConfigError("method", f"unknown method {name!r}")
    if not 0.0 < holdout_fraction < 1.0:
        raise ConfigError("validation_fraction", f"must lie in (0, 1), got {holdout_fraction}")
    space = DEFAULT_SEARCH_SPACES[name] if search_space is None else search_space
    base = dict(base_params or {})

    n, m = dataset.shape
    mask = random_sampling_mask(n, m, density, seed)
    fit_part, held_out = split_training_set(mask.mask, holdout_fraction, seed)
    if not held_out.any():
        raise ConfigError("validation_fraction", "tuning mask leaves no held-out entries")
    fit_mask = SamplingMask(fit_part)
    truth = dataset.signal.values

    history: List[Tuple[Dict[str, Any], float]] = []
    best_params, best_score = {}, math.inf
    for candidate in candidate_params(space, trials, seed):
        params = {**base, **candidate}
        try:
            outcome = run_method(name, dataset, truth, fit_mask, params, seed)
            score = compute_metrics(outcome.reconstruction, truth, held_out).rmse
        except ConfigError:
            raise
        except ReconstructionError as e:
            logger.info("Candidate %s for %s failed: %s", candidate, name, e)
            score = math.inf
        history.append((candidate, score))
        if score < best_score:
            best_params, best_score = candidate, score

    if not math.isfinite(best_score):
        raise ReconstructionError(f"Every tuning candidate for {name} failed")
    return TuningResult(name, best_params, best_score, history)
