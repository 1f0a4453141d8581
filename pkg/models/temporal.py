from dataclasses import dataclass
from typing import Union

import numpy as np

from .exceptions import ReconstructionError, ShapeMismatchError
from .graph import Graph


@dataclass(frozen=True, eq=False)
class TimeSignal:
    """Time-varying graph signal: N x M matrix, column s is the graph signal at time s"""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ShapeMismatchError(f"TimeSignal must be a 2-D N x M matrix, got shape {values.shape}")
        if values.shape[1] < 2:
            raise ShapeMismatchError(f"TimeSignal needs at least 2 time steps, got {values.shape[1]}")
        if not np.all(np.isfinite(values)):
            raise ReconstructionError("TimeSignal entries must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    @property
    def n_times(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def __str__(self) -> str:
        return f"TimeSignal({self.n_nodes} nodes x {self.n_times} times)"

    def __repr__(self) -> str:
        return self.__str__()


SignalLike = Union[TimeSignal, np.ndarray]


def as_matrix(x: SignalLike) -> np.ndarray:
    return x.values if isinstance(x, TimeSignal) else np.asarray(x, dtype=float)


def temporal_difference(x: SignalLike) -> np.ndarray:
    """X D_h: column s is x_{s+1} - x_s"""
    values = as_matrix(x)
    if values.ndim != 2 or values.shape[1] < 2:
        raise ShapeMismatchError(f"Temporal difference needs an N x M matrix with M >= 2, got {values.shape}")
    return values[:, 1:] - values[:, :-1]


def second_temporal_difference(x: SignalLike) -> np.ndarray:
    """X D_h D_h^T, evaluated as a second-difference stencil with free boundaries"""
    diff = temporal_difference(x)
    out = np.zeros(diff.shape[:1] + (diff.shape[1] + 1,))
    out[:, :-1] -= diff
    out[:, 1:] += diff
    return out


def p_dirichlet(x, g: Graph, p: float) -> float:
    """Discrete p-Dirichlet form (1/p) sum_i [sum_j A(i,j) (x(j) - x(i))^2]^(p/2)"""
    if p <= 0:
        raise ReconstructionError(f"p must be positive, got {p}")
    vector = np.asarray(x, dtype=float)
    if vector.shape != (g.n,):
        raise ShapeMismatchError(f"Signal must have shape ({g.n},), got {vector.shape}")
    gaps = vector[None, :] - vector[:, None]
    local = np.sum(g.adjacency * gaps * gaps, axis=1)
    return float(np.sum(local ** (p / 2.0)) / p)


def quadratic_form(x: SignalLike, L) -> float:
    """x^T L x for a vector, tr(X^T L X) for a matrix"""
    values = as_matrix(x)
    matrix = np.asarray(L, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ShapeMismatchError(f"L must be square, got shape {matrix.shape}")
    if values.ndim not in (1, 2) or values.shape[0] != matrix.shape[0]:
        raise ShapeMismatchError(f"Signal with shape {values.shape} does not match L of size {matrix.shape[0]}")
    return float(np.sum(values * (matrix @ values)))


def sobolev_smoothness(x: SignalLike, L, epsilon: float) -> float:
    """tr((X D_h)^T (L + eps I) (X D_h))"""
    if epsilon < 0:
        raise ReconstructionError(f"epsilon must be nonnegative, got {epsilon}")
    diff = temporal_difference(x)
    return quadratic_form(diff, L) + epsilon * float(np.sum(diff * diff))
