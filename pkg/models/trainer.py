import logging
from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Optional

import numpy as np

from utils.run_logging import log_run

from .exceptions import ConfigError, TrainingDivergedError
from .gcn import GCNModel
from .optimizer import AdamW
from .solvers import SamplingMask
from .temporal import SignalLike, TimeSignal, as_matrix, temporal_difference
from .timegnn import ACTIVATIONS, CascadeModel, index_mask, loss_and_gradients

logger = logging.getLogger(__name__)

MODEL_KINDS = ("timegnn", "gcn")
DIVERGENCE_LIMIT = 1e12


def _from_dict(cls, data: Dict[str, Any]):
    known = {f.name for f in fields(cls) if f.init}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(unknown[0], f"unknown {cls.__name__} parameter")
    return cls(**data)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture of the learned reconstruction map"""

    kind: str = "timegnn"
    n_layers: int = 1
    hidden: int = 4
    alpha: int = 4
    activation: str = "relu"

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError("kind", f"must be one of {', '.join(MODEL_KINDS)}")
        if int(self.n_layers) < 1:
            raise ConfigError("n_layers", f"must be at least 1, got {self.n_layers}")
        if int(self.hidden) < 1:
            raise ConfigError("hidden", f"must be at least 1, got {self.hidden}")
        if int(self.alpha) < 1:
            raise ConfigError("alpha", f"must be at least 1, got {self.alpha}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError("activation", f"must be one of {', '.join(ACTIVATIONS)}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        return _from_dict(cls, data)

    def build(self, n_times: int, seed: int):
        if self.kind == "gcn":
            return GCNModel.initialize(n_times, int(self.hidden), int(self.n_layers), self.activation, seed)
        return CascadeModel.initialize(n_times, int(self.hidden), int(self.n_layers), int(self.alpha),
                                       self.activation, seed)


@dataclass(frozen=True, eq=False)
class TrainConfig:
    """Optimizer and loss settings; train_indices defaults to every sampled entry"""

    learning_rate: float = 0.01
    weight_decay: float = 1e-4
    lam: float = 1e-4
    epsilon: float = 0.05
    epochs: int = 5000
    seed: int = 0
    train_indices: Optional[Any] = None
    validation_fraction: float = 0.0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate", f"must be positive, got {self.learning_rate}")
        if not self.weight_decay >= 0:
            raise ConfigError("weight_decay", f"must be nonnegative, got {self.weight_decay}")
        if not self.lam >= 0:
            raise ConfigError("lam", f"must be nonnegative, got {self.lam}")
        if not self.epsilon >= 0:
            raise ConfigError("epsilon", f"must be nonnegative, got {self.epsilon}")
        if int(self.epochs) < 1:
            raise ConfigError("epochs", f"must be at least 1, got {self.epochs}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction", f"must lie in [0, 1), got {self.validation_fraction}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        return _from_dict(cls, data)


@dataclass
class TrainResult:
    model: Any
    reconstruction: TimeSignal
    loss_history: List[float]
    validation_history: List[float] = field(default_factory=list)

    @property
    def epochs_run(self) -> int:
        return len(self.loss_history)

    @property
    def final_loss(self) -> float:
        return self.loss_history[-1]

    def __iter__(self):
        return iter((self.model, self.reconstruction, self.loss_history))


def split_training_set(sampled: np.ndarray, fraction: float, seed: int):
    """Hold out round(fraction * |S|) sampled entries; returns (train, validation) masks"""
    held_out = np.zeros_like(sampled)
    if fraction <= 0:
        return sampled.copy(), held_out
    positions = np.argwhere(sampled)
    count = int(np.floor(fraction * len(positions) + 0.5))
    count = min(count, len(positions) - 1)
    if count <= 0:
        return sampled.copy(), held_out
    rng = np.random.default_rng(seed)
    chosen = positions[rng.choice(len(positions), size=count, replace=False)]
    held_out[chosen[:, 0], chosen[:, 1]] = True
    return sampled & ~held_out, held_out


def _train_summary(result: TrainResult) -> Dict[str, Any]:
    return {"epochs": result.epochs_run, "final_loss": f"{result.final_loss:.6g}"}


@log_run(summary=_train_summary)
def train(observed: SignalLike, mask: SamplingMask, scaled_laplacian, laplacian,
          model_cfg: ModelConfig = ModelConfig(), train_cfg: TrainConfig = TrainConfig(),
          propagation: Optional[np.ndarray] = None) -> TrainResult:
    """Full-batch AdamW on the masked-MSE + Sobolev loss

    `propagation` is the A_hat matrix and is required when model_cfg.kind == "gcn".
    """
    target = mask.apply(as_matrix(observed))
    n_times = target.shape[1]

    if train_cfg.train_indices is None:
        sampled = mask.mask.copy()
    else:
        sampled = index_mask(train_cfg.train_indices, target.shape).copy()
        if np.any(sampled & ~mask.mask):
            raise ConfigError("train_indices", "must be a subset of the sampled entries")
    if not sampled.any():
        raise ConfigError("train_indices", "training set is empty")
    train_set, held_out = split_training_set(sampled, train_cfg.validation_fraction, train_cfg.seed + 1)

    if model_cfg.kind == "gcn":
        if propagation is None:
            raise ConfigError("propagation", "GCN training needs the A_hat propagation matrix")
        operator = np.asarray(propagation, dtype=float)
    else:
        operator = np.asarray(scaled_laplacian, dtype=float)
    laplacian = np.asarray(laplacian, dtype=float)

    input_diff = temporal_difference(target)
    model = model_cfg.build(n_times, train_cfg.seed)
    params = model.parameter_vector()
    optimizer = AdamW(params.size, lr=train_cfg.learning_rate, weight_decay=train_cfg.weight_decay)

    loss_history: List[float] = []
    validation_history: List[float] = []
    for epoch in range(int(train_cfg.epochs)):
        value, grads, output = loss_and_gradients(model, input_diff, target, train_set, laplacian,
                                                  train_cfg.lam, train_cfg.epsilon, operator)
        if not np.isfinite(value) or value > DIVERGENCE_LIMIT:
            raise TrainingDivergedError(epoch, value)
        loss_history.append(value)
        if held_out.any():
            gap = np.where(held_out, output - target, 0.0)
            validation_history.append(float(np.sum(gap * gap)) / int(held_out.sum()))

        params = optimizer.step(params, grads.parameter_vector())
        model = model.with_parameters(params)

    output, _ = model.forward_with_cache(input_diff, operator)
    if not np.all(np.isfinite(output)):
        raise TrainingDivergedError(int(train_cfg.epochs), float("nan"))
    return TrainResult(model, TimeSignal(output), loss_history, validation_history)
