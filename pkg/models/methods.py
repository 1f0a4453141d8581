import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np

from .dataset import Dataset
from .exceptions import ConfigError
from .gcn import gcn_propagation
from .solvers import SamplingMask, SolverConfig, solve
from .temporal import SignalLike, TimeSignal
from .trainer import ModelConfig, TrainConfig, train

logger = logging.getLogger(__name__)

MODEL_KEYS = ("n_layers", "hidden", "alpha", "activation")
TRAIN_KEYS = ("learning_rate", "weight_decay", "lam", "epsilon", "epochs", "validation_fraction")
SOLVER_KEYS = ("upsilon", "epsilon", "cg_tol", "cg_max_iter", "variant")


@dataclass
class MethodOutcome:
    """A completed N x M matrix plus whether the method reached its stopping criterion"""

    method: str
    reconstruction: TimeSignal
    converged: bool
    details: Dict[str, Any] = field(default_factory=dict)


def _split_params(name: str, params: Dict[str, Any], allowed) -> None:
    unknown = sorted(set(params) - set(allowed))
    if unknown:
        raise ConfigError(unknown[0], f"unknown parameter for method {name}")


def _run_solver(name: str, dataset: Dataset, observed: np.ndarray, mask: SamplingMask,
                params: Dict[str, Any], seed: int) -> MethodOutcome:
    _split_params(name, params, SOLVER_KEYS)
    if name == "tgsr":
        if params.get("epsilon", 0.0) != 0.0:
            raise ConfigError("epsilon", "tgsr uses the plain Laplacian; use graphtrss for epsilon > 0")
        params = {**params, "epsilon": 0.0}
    result = solve(observed, mask, dataset.graph.laplacians.laplacian, SolverConfig.from_dict(params))
    return MethodOutcome(name, result.signal, result.converged,
                         {"iterations": result.iterations, "final_residual": result.final_residual})


def _run_network(name: str, dataset: Dataset, observed: np.ndarray, mask: SamplingMask,
                 params: Dict[str, Any], seed: int) -> MethodOutcome:
    allowed = MODEL_KEYS + TRAIN_KEYS if name == "timegnn" else tuple(k for k in MODEL_KEYS if k != "alpha") + TRAIN_KEYS
    _split_params(name, params, allowed)
    model_cfg = ModelConfig.from_dict({"kind": name, **{k: v for k, v in params.items() if k in MODEL_KEYS}})
    train_cfg = TrainConfig.from_dict({"seed": seed, **{k: v for k, v in params.items() if k in TRAIN_KEYS}})
    bundle = dataset.graph.laplacians
    propagation = gcn_propagation(dataset.graph) if name == "gcn" else None
    result = train(observed, mask, bundle.scaled, bundle.laplacian, model_cfg, train_cfg, propagation=propagation)
    return MethodOutcome(name, result.reconstruction, True,
                         {"epochs": result.epochs_run, "final_loss": result.final_loss})


def _run_mean(name: str, dataset: Dataset, observed: np.ndarray, mask: SamplingMask,
              params: Dict[str, Any], seed: int) -> MethodOutcome:
    """Per-node mean of the observed entries; nodes never observed get the global mean"""
    _split_params(name, params, ())
    counts = mask.mask.sum(axis=1)
    totals = np.where(mask.mask, observed, 0.0).sum(axis=1)
    global_mean = float(totals.sum() / counts.sum()) if counts.sum() else 0.0
    node_means = np.where(counts > 0, totals / np.maximum(counts, 1), global_mean)
    filled = np.where(mask.mask, observed, node_means[:, None])
    return MethodOutcome(name, TimeSignal(filled), True)


METHODS: Dict[str, Callable[..., MethodOutcome]] = {
    "gcn": _run_network,
    "graphtrss": _run_solver,
    "mean": _run_mean,
    "tgsr": _run_solver,
    "timegnn": _run_network,
}


def run_method(name: str, dataset: Dataset, observed: SignalLike, mask: SamplingMask,
               params: Optional[Dict[str, Any]] = None, seed: int = 0) -> MethodOutcome:
    """Reconstruct dataset's signal from the entries of `observed` selected by `mask`"""
    if name not in METHODS:
        raise ConfigError("method", f"unknown method {name!r}; expected one of {', '.join(METHODS)}")
    values = mask.apply(observed)
    logger.debug("Running %s on %s at density %.3f", name, dataset.name, mask.density)
    return METHODS[name](name, dataset, values, mask, dict(params or {}), seed)
