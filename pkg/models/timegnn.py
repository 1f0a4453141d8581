import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from .exceptions import NumericalInstabilityError, ReconstructionError, ShapeMismatchError
from .temporal import SignalLike, as_matrix, second_temporal_difference, sobolev_smoothness

logger = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "identity")

IndexSet = Union[np.ndarray, Iterable[Tuple[int, int]]]


def index_mask(s: IndexSet, shape: Tuple[int, int]) -> np.ndarray:
    """Boolean N x M mask from either a boolean matrix or (node, time) pairs"""
    if isinstance(s, np.ndarray) and s.dtype == bool:
        if s.shape != shape:
            raise ShapeMismatchError(f"Index mask shape {s.shape} does not match {shape}")
        return s
    mask = np.zeros(shape, dtype=bool)
    for i, j in s:
        mask[i, j] = True
    return mask


def activate(values: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(values, 0.0)
    return values


def activation_grad(pre: np.ndarray, grad: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return grad * (pre > 0)
    return grad


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def layer_dims(n_times: int, hidden: int, n_layers: int) -> List[int]:
    """Widths M-1 -> H -> ... -> H -> M for a stack of n_layers"""
    if n_layers < 1:
        raise ReconstructionError(f"Need at least one layer, got {n_layers}")
    return [n_times - 1] + [hidden] * (n_layers - 1) + [n_times]


def _check_finite(values: np.ndarray, layer: int, what: str):
    if not np.all(np.isfinite(values)):
        raise NumericalInstabilityError(f"non-finite {what}", layer=layer)


@dataclass(eq=False)
class CascadeLayerParams:
    """Branch rho holds rho Chebyshev weight matrices; branch outputs are mixed by mu_rho"""

    weights: List[List[np.ndarray]]
    branch_scalars: np.ndarray

    def __post_init__(self):
        self.weights = [[np.asarray(w, dtype=float) for w in branch] for branch in self.weights]
        self.branch_scalars = np.asarray(self.branch_scalars, dtype=float).reshape(-1)
        if not self.weights:
            raise ReconstructionError("A cascade layer needs at least one branch")
        if len(self.branch_scalars) != len(self.weights):
            raise ShapeMismatchError(
                f"{len(self.weights)} branches but {len(self.branch_scalars)} branch scalars"
            )
        shape = self.weights[0][0].shape
        for rho, branch in enumerate(self.weights, start=1):
            if len(branch) != rho:
                raise ReconstructionError(f"Branch {rho} must hold {rho} weight matrices, got {len(branch)}")
            for w in branch:
                if w.shape != shape:
                    raise ShapeMismatchError(f"Weight shape {w.shape} differs from {shape}")

    @property
    def alpha(self) -> int:
        return len(self.weights)

    @property
    def in_dim(self) -> int:
        return self.weights[0][0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[0][0].shape[1]

    def arrays(self) -> List[np.ndarray]:
        return [w for branch in self.weights for w in branch] + [self.branch_scalars]


def cheb_basis(x, scaled_laplacian, order: int) -> List[np.ndarray]:
    """Z(1) = X, Z(2) = L_hat X, Z(k) = 2 L_hat Z(k-1) - Z(k-2)"""
    if order < 1:
        raise ReconstructionError(f"Chebyshev order must be at least 1, got {order}")
    values = np.asarray(x, dtype=float)
    lhat = np.asarray(scaled_laplacian, dtype=float)
    if values.ndim != 2 or lhat.shape != (values.shape[0], values.shape[0]):
        raise ShapeMismatchError(f"Input {values.shape} does not match operator {lhat.shape}")
    basis = [values]
    if order >= 2:
        basis.append(lhat @ values)
    for _ in range(2, order):
        basis.append(2.0 * (lhat @ basis[-1]) - basis[-2])
    return basis


def _cascade_layer_forward(h_in: np.ndarray, params: CascadeLayerParams, lhat: np.ndarray):
    if h_in.ndim != 2 or h_in.shape[1] != params.in_dim:
        raise ShapeMismatchError(f"Layer expects width {params.in_dim}, got input {h_in.shape}")
    basis = cheb_basis(h_in, lhat, params.alpha)
    branches = [sum(basis[k] @ branch[k] for k in range(len(branch))) for branch in params.weights]
    out = sum(mu * b for mu, b in zip(params.branch_scalars, branches))
    return out, (basis, branches)


def _cascade_layer_backward(grad_out: np.ndarray, cache, params: CascadeLayerParams, lhat: np.ndarray):
    basis, branches = cache
    mu = params.branch_scalars
    d_mu = np.array([np.sum(grad_out * b) for b in branches])
    d_weights = [[mu[r] * (basis[k].T @ grad_out) for k in range(len(branch))]
                 for r, branch in enumerate(params.weights)]

    d_basis = [np.zeros_like(z) for z in basis]
    for r, branch in enumerate(params.weights):
        for k, w in enumerate(branch):
            d_basis[k] += mu[r] * (grad_out @ w.T)
    # unwind the three-term recurrence; L_hat is symmetric
    for k in range(len(basis) - 1, 1, -1):
        d_basis[k - 1] += 2.0 * (lhat.T @ d_basis[k])
        d_basis[k - 2] -= d_basis[k]
    if len(basis) >= 2:
        d_basis[0] += lhat.T @ d_basis[1]
    return d_basis[0], CascadeLayerParams(d_weights, d_mu)


def cascade_forward(h_in, params: CascadeLayerParams, scaled_laplacian) -> np.ndarray:
    """H_out = sum_rho mu_rho sum_{k<=rho} Z(k) W(k)_rho"""
    out, _ = _cascade_layer_forward(np.asarray(h_in, dtype=float), params,
                                    np.asarray(scaled_laplacian, dtype=float))
    return out


@dataclass(eq=False)
class CascadeModel:
    """Stack of cascade layers: M-1 -> H -> ... -> H -> M"""

    layers: List[CascadeLayerParams]
    activation: str = "relu"
    seed: Optional[int] = None
    kind: str = field(default="timegnn", init=False)

    def __post_init__(self):
        if not self.layers:
            raise ReconstructionError("Model needs at least one layer")
        if self.activation not in ACTIVATIONS:
            raise ReconstructionError(f"Unknown activation {self.activation!r}")
        for i, (a, b) in enumerate(zip(self.layers[:-1], self.layers[1:])):
            if a.out_dim != b.in_dim:
                raise ShapeMismatchError(f"Layer {i} outputs {a.out_dim} but layer {i + 1} expects {b.in_dim}")

    @classmethod
    def initialize(cls, n_times: int, hidden: int, n_layers: int, alpha: int,
                   activation: str = "relu", seed: int = 0) -> "CascadeModel":
        """Glorot-uniform weights, mu_rho = 1/alpha"""
        if alpha < 1:
            raise ReconstructionError(f"alpha must be at least 1, got {alpha}")
        rng = np.random.default_rng(seed)
        dims = layer_dims(n_times, hidden, n_layers)
        layers = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            weights = [[glorot_uniform(rng, fan_in, fan_out) for _ in range(rho)] for rho in range(1, alpha + 1)]
            layers.append(CascadeLayerParams(weights, np.full(alpha, 1.0 / alpha)))
        return cls(layers, activation=activation, seed=seed)

    @property
    def dims(self) -> List[int]:
        return [self.layers[0].in_dim] + [layer.out_dim for layer in self.layers]

    @property
    def alpha(self) -> int:
        return self.layers[0].alpha

    def parameter_arrays(self) -> List[np.ndarray]:
        return [a for layer in self.layers for a in layer.arrays()]

    def parameter_vector(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.parameter_arrays()])

    def with_parameters(self, vector: np.ndarray) -> "CascadeModel":
        vector = np.asarray(vector, dtype=float)
        offset = 0

        def take(shape):
            nonlocal offset
            size = int(np.prod(shape))
            chunk = vector[offset:offset + size].reshape(shape)
            offset += size
            return chunk.copy()

        layers = []
        for layer in self.layers:
            weights = [[take(w.shape) for w in branch] for branch in layer.weights]
            layers.append(CascadeLayerParams(weights, take(layer.branch_scalars.shape)))
        if offset != vector.size:
            raise ShapeMismatchError(f"Parameter vector has {vector.size} entries, model needs {offset}")
        return CascadeModel(layers, activation=self.activation, seed=self.seed)

    def forward_with_cache(self, input_diff: np.ndarray, operator: np.ndarray):
        h = np.asarray(input_diff, dtype=float)
        if h.ndim != 2 or h.shape[1] != self.dims[0]:
            raise ShapeMismatchError(f"Model expects input width {self.dims[0]}, got {h.shape}")
        caches = []
        last = len(self.layers) - 1
        for index, layer in enumerate(self.layers):
            pre, cache = _cascade_layer_forward(h, layer, operator)
            _check_finite(pre, index, "activations")
            caches.append((pre, cache))
            h = pre if index == last else activate(pre, self.activation)
        return h, caches

    def backward(self, caches, grad_out: np.ndarray, operator: np.ndarray) -> "CascadeModel":
        grad = grad_out
        grads: List[Optional[CascadeLayerParams]] = [None] * len(self.layers)
        last = len(self.layers) - 1
        for index in range(last, -1, -1):
            pre, cache = caches[index]
            if index != last:
                grad = activation_grad(pre, grad, self.activation)
            grad, grads[index] = _cascade_layer_backward(grad, cache, self.layers[index], operator)
            for array in grads[index].arrays():
                _check_finite(array, index, "gradients")
        return CascadeModel(grads, activation=self.activation, seed=self.seed)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "dims": self.dims,
            "alpha": self.alpha,
            "activation": self.activation,
            "seed": self.seed,
            "layers": [
                {
                    "branch_scalars": layer.branch_scalars.tolist(),
                    "weights": [[{"shape": list(w.shape), "values": w.ravel(order="C").tolist()}
                                 for w in branch] for branch in layer.weights],
                }
                for layer in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CascadeModel":
        layers = []
        for layer in data["layers"]:
            weights = [[np.asarray(w["values"], dtype=float).reshape(w["shape"]) for w in branch]
                       for branch in layer["weights"]]
            layers.append(CascadeLayerParams(weights, layer["branch_scalars"]))
        model = cls(layers, activation=data["activation"], seed=data.get("seed"))
        if model.dims != list(data["dims"]):
            raise ShapeMismatchError(f"Checkpoint dims {data['dims']} do not match weights {model.dims}")
        return model


def model_forward(input_diff, model, scaled_laplacian) -> np.ndarray:
    """Run the stacked layers on (J o X) D_h; returns the N x M reconstruction"""
    out, _ = model.forward_with_cache(np.asarray(input_diff, dtype=float),
                                      np.asarray(scaled_laplacian, dtype=float))
    return out


def loss(x_bar: SignalLike, x_true: SignalLike, s: IndexSet, L, lam: float, epsilon: float) -> float:
    """Masked MSE over S plus lam * Sobolev smoothness of the reconstruction"""
    recon = as_matrix(x_bar)
    truth = as_matrix(x_true)
    if recon.shape != truth.shape:
        raise ShapeMismatchError(f"Reconstruction {recon.shape} does not match truth {truth.shape}")
    train = index_mask(s, truth.shape)
    count = int(train.sum())
    if count == 0:
        raise ReconstructionError("Training index set S is empty")
    residual = np.where(train, truth - recon, 0.0)
    return float(np.sum(residual * residual)) / count + lam * sobolev_smoothness(recon, L, epsilon)


def loss_gradient(x_bar: np.ndarray, x_true: np.ndarray, train: np.ndarray, L: np.ndarray,
                  lam: float, epsilon: float) -> np.ndarray:
    """d loss / d X_bar"""
    count = int(train.sum())
    fit = np.where(train, x_bar - x_true, 0.0) * (2.0 / count)
    stencil = second_temporal_difference(x_bar)
    return fit + 2.0 * lam * (L @ stencil + epsilon * stencil)


def loss_and_gradients(model, input_diff, x_true, s: IndexSet, L, lam: float, epsilon: float, operator):
    """Loss value, model-shaped gradient structure and model output, by reverse-mode differentiation"""
    truth = as_matrix(x_true)
    laplacian = np.asarray(L, dtype=float)
    op = np.asarray(operator, dtype=float)
    train = index_mask(s, truth.shape)
    out, caches = model.forward_with_cache(np.asarray(input_diff, dtype=float), op)
    if out.shape != truth.shape:
        raise ShapeMismatchError(f"Model output {out.shape} does not match truth {truth.shape}")
    value = loss(out, truth, train, laplacian, lam, epsilon)
    if not np.isfinite(value):
        raise NumericalInstabilityError("non-finite loss")
    grad_out = loss_gradient(out, truth, train, laplacian, lam, epsilon)
    return value, model.backward(caches, grad_out, op), out


def gradients(model, input_diff, x_true, s: IndexSet, L, lam: float, epsilon: float, operator):
    """Exact derivatives of the loss w.r.t. every weight matrix and branch scalar"""
    _, grads, _ = loss_and_gradients(model, input_diff, x_true, s, L, lam, epsilon, operator)
    return grads


def save_checkpoint(model, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model.to_dict(), indent=2))
    return path


def load_checkpoint(path):
    from .gcn import GCNModel

    data = json.loads(Path(path).read_text())
    kinds = {"timegnn": CascadeModel, "gcn": GCNModel}
    if data.get("kind") not in kinds:
        raise ReconstructionError(f"Unknown checkpoint kind {data.get('kind')!r}")
    return kinds[data["kind"]].from_dict(data)
