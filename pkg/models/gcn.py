from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from .exceptions import ReconstructionError, ShapeMismatchError
from .graph import Graph
from .timegnn import ACTIVATIONS, activate, activation_grad, glorot_uniform, layer_dims, _check_finite


def gcn_propagation(g: Graph) -> np.ndarray:
    """A_hat = D~^(-1/2) (A + I) D~^(-1/2) with D~ = diag((A + I) 1)"""
    a_tilde = g.adjacency + np.eye(g.n)
    inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    return inv_sqrt[:, None] * a_tilde * inv_sqrt[None, :]


@dataclass(eq=False)
class GCNModel:
    """Graph convolution stack X' = A_hat X W with the same widths as the cascade model"""

    weights: List[np.ndarray]
    activation: str = "relu"
    seed: Optional[int] = None
    kind: str = field(default="gcn", init=False)

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=float) for w in self.weights]
        if not self.weights:
            raise ReconstructionError("Model needs at least one layer")
        if self.activation not in ACTIVATIONS:
            raise ReconstructionError(f"Unknown activation {self.activation!r}")
        for i, (a, b) in enumerate(zip(self.weights[:-1], self.weights[1:])):
            if a.shape[1] != b.shape[0]:
                raise ShapeMismatchError(f"Layer {i} outputs {a.shape[1]} but layer {i + 1} expects {b.shape[0]}")

    @classmethod
    def initialize(cls, n_times: int, hidden: int, n_layers: int,
                   activation: str = "relu", seed: int = 0) -> "GCNModel":
        rng = np.random.default_rng(seed)
        dims = layer_dims(n_times, hidden, n_layers)
        weights = [glorot_uniform(rng, fan_in, fan_out) for fan_in, fan_out in zip(dims[:-1], dims[1:])]
        return cls(weights, activation=activation, seed=seed)

    @property
    def dims(self) -> List[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def parameter_arrays(self) -> List[np.ndarray]:
        return list(self.weights)

    def parameter_vector(self) -> np.ndarray:
        return np.concatenate([w.ravel() for w in self.weights])

    def with_parameters(self, vector: np.ndarray) -> "GCNModel":
        vector = np.asarray(vector, dtype=float)
        weights, offset = [], 0
        for w in self.weights:
            weights.append(vector[offset:offset + w.size].reshape(w.shape).copy())
            offset += w.size
        if offset != vector.size:
            raise ShapeMismatchError(f"Parameter vector has {vector.size} entries, model needs {offset}")
        return GCNModel(weights, activation=self.activation, seed=self.seed)

    def forward_with_cache(self, input_diff: np.ndarray, operator: np.ndarray):
        h = np.asarray(input_diff, dtype=float)
        if h.ndim != 2 or h.shape[1] != self.dims[0]:
            raise ShapeMismatchError(f"Model expects input width {self.dims[0]}, got {h.shape}")
        if operator.shape != (h.shape[0], h.shape[0]):
            raise ShapeMismatchError(f"Propagation matrix {operator.shape} does not match {h.shape[0]} nodes")
        caches = []
        last = len(self.weights) - 1
        for index, w in enumerate(self.weights):
            propagated = operator @ h
            pre = propagated @ w
            _check_finite(pre, index, "activations")
            caches.append((pre, propagated))
            h = pre if index == last else activate(pre, self.activation)
        return h, caches

    def backward(self, caches, grad_out: np.ndarray, operator: np.ndarray) -> "GCNModel":
        grad = grad_out
        grads: List[Optional[np.ndarray]] = [None] * len(self.weights)
        last = len(self.weights) - 1
        for index in range(last, -1, -1):
            pre, propagated = caches[index]
            if index != last:
                grad = activation_grad(pre, grad, self.activation)
            grads[index] = propagated.T @ grad
            _check_finite(grads[index], index, "gradients")
            grad = operator.T @ (grad @ self.weights[index].T)
        return GCNModel(grads, activation=self.activation, seed=self.seed)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "dims": self.dims,
            "activation": self.activation,
            "seed": self.seed,
            "layers": [{"shape": list(w.shape), "values": w.ravel(order="C").tolist()} for w in self.weights],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GCNModel":
        weights = [np.asarray(layer["values"], dtype=float).reshape(layer["shape"]) for layer in data["layers"]]
        return cls(weights, activation=data["activation"], seed=data.get("seed"))


def gcn_forward(input_diff, gcn_params: GCNModel, g: Graph) -> np.ndarray:
    out, _ = gcn_params.forward_with_cache(np.asarray(input_diff, dtype=float), gcn_propagation(g))
    return out
