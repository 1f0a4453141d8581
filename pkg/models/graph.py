import logging
import warnings
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np

from .exceptions import (
    EigenConvergenceError,
    GraphConnectivityError,
    GraphConstructionError,
    NotSymmetricError,
    ShapeMismatchError,
)

logger = logging.getLogger(__name__)

POWER_ITERATION_TOL = 1e-9
POWER_ITERATION_MAX_ITER = 1000
POWER_ITERATION_SEED = 0
RESIDUAL_TOL = 1e-7
KRYLOV_MAX_DIM = 64
KRYLOV_BREAKDOWN_TOL = 1e-12
JACOBI_THRESHOLD = 1e-12
JACOBI_MAX_SWEEPS = 100


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def _check_symmetric(matrix: np.ndarray, name: str = "matrix") -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ShapeMismatchError(f"{name} must be square, got shape {matrix.shape}")
    scale = max(np.abs(matrix).max(initial=0.0), 1.0)
    if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-12 * scale):
        raise NotSymmetricError(f"{name} is not symmetric")
    return matrix


def connected_components(adjacency: np.ndarray) -> List[List[int]]:
    """Breadth-first search over the nonzero pattern of an adjacency matrix"""
    n = adjacency.shape[0]
    seen = np.zeros(n, dtype=bool)
    components = []
    for start in range(n):
        if seen[start]:
            continue
        seen[start] = True
        queue = deque([start])
        component = []
        while queue:
            node = queue.popleft()
            component.append(node)
            for neighbor in np.flatnonzero(adjacency[node] > 0):
                if not seen[neighbor]:
                    seen[neighbor] = True
                    queue.append(int(neighbor))
        components.append(sorted(component))
    return components


@dataclass(frozen=True, eq=False)
class LaplacianBundle:
    """Normalized Laplacian L, its largest eigenvalue and L_hat = 2L/lambda_max - I"""

    laplacian: np.ndarray
    lambda_max: float
    scaled: np.ndarray


@dataclass(frozen=True, eq=False)
class Graph:
    """Connected, undirected, weighted graph with dense adjacency"""

    adjacency: np.ndarray
    coords: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        adjacency = np.asarray(self.adjacency, dtype=float)
        if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
            raise ShapeMismatchError(f"Adjacency must be square, got shape {adjacency.shape}")
        if adjacency.shape[0] == 0:
            raise GraphConstructionError("Graph must have at least one node")
        if not np.all(np.isfinite(adjacency)):
            raise GraphConstructionError("Adjacency contains non-finite weights")
        if np.any(adjacency < 0):
            raise GraphConstructionError("Adjacency weights must be nonnegative")
        if np.any(np.diag(adjacency) != 0):
            raise GraphConstructionError("Adjacency diagonal must be zero")
        if not np.array_equal(adjacency, adjacency.T):
            raise NotSymmetricError("Adjacency must be exactly symmetric")

        components = connected_components(adjacency)
        if len(components) > 1:
            raise GraphConnectivityError(components)

        object.__setattr__(self, "adjacency", _readonly(adjacency))
        if self.coords is not None:
            coords = np.asarray(self.coords, dtype=float)
            if coords.ndim != 2 or coords.shape[0] != adjacency.shape[0]:
                raise ShapeMismatchError("Coordinates must be an N x d array")
            object.__setattr__(self, "coords", _readonly(coords))

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def edges(self) -> List[Tuple[int, int, float]]:
        rows, cols = np.nonzero(np.triu(self.adjacency))
        return [(int(i), int(j), float(self.adjacency[i, j])) for i, j in zip(rows, cols)]

    def neighbors(self, node: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[node] > 0)

    @cached_property
    def laplacians(self) -> LaplacianBundle:
        """Normalized Laplacian bundle, computed once per graph"""
        return normalized_laplacian(self)

    def __str__(self) -> str:
        return f"Graph(n={self.n}, edges={int(np.count_nonzero(self.adjacency) // 2)})"

    def __repr__(self) -> str:
        return self.__str__()


def build_knn_graph(coords, k: int, sigma: Optional[float] = None) -> Graph:
    """Union-symmetrized k-NN graph with Gaussian weights exp(-d^2 / sigma^2)

    When sigma is None, sigma^2 is the mean squared distance over the retained edges.
    """
    points = np.asarray(coords, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if points.ndim != 2:
        raise ShapeMismatchError(f"Coordinates must be an N x d array, got shape {points.shape}")
    n = points.shape[0]
    if k < 1:
        raise GraphConstructionError(f"k must be at least 1, got {k}")
    if n < k + 1:
        raise GraphConstructionError(f"Need at least k+1 = {k + 1} points, got {n}")
    if sigma is not None and sigma <= 0:
        raise GraphConstructionError(f"sigma must be positive, got {sigma}")

    diff = points[:, None, :] - points[None, :, :]
    sq_dist = np.einsum("ijd,ijd->ij", diff, diff)

    off_diagonal = ~np.eye(n, dtype=bool)
    if np.any(sq_dist[off_diagonal] == 0):
        dup_i, dup_j = np.argwhere((sq_dist == 0) & off_diagonal)[0]
        raise GraphConstructionError(f"Duplicate points at nodes {dup_i} and {dup_j}")

    ranking = np.where(off_diagonal, sq_dist, np.inf)
    nearest = np.argsort(ranking, axis=1, kind="stable")[:, :k]
    selected = np.zeros((n, n), dtype=bool)
    selected[np.repeat(np.arange(n), k), nearest.ravel()] = True
    edges = selected | selected.T

    sigma_sq = float(sigma) ** 2 if sigma is not None else float(sq_dist[edges].mean())
    adjacency = np.where(edges, np.exp(-sq_dist / sigma_sq), 0.0)
    adjacency = 0.5 * (adjacency + adjacency.T)

    logger.debug("Built %d-NN graph on %d nodes (sigma^2=%.6g, %d edges)",
                 k, n, sigma_sq, int(edges.sum() // 2))
    return Graph(adjacency=adjacency, coords=points)


def combinatorial_laplacian(g: Graph) -> np.ndarray:
    """Unnormalized Laplacian D - A"""
    return np.diag(g.degrees) - g.adjacency


def normalized_laplacian(g: Graph) -> LaplacianBundle:
    degrees = g.degrees
    if np.any(degrees <= 0):
        isolated = np.flatnonzero(degrees <= 0).tolist()
        raise GraphConstructionError(f"Zero-degree nodes: {isolated}")

    inv_sqrt = 1.0 / np.sqrt(degrees)
    laplacian = np.eye(g.n) - inv_sqrt[:, None] * g.adjacency * inv_sqrt[None, :]
    laplacian = 0.5 * (laplacian + laplacian.T)

    lambda_max = estimate_lambda_max(laplacian)
    scaled = 2.0 * laplacian / lambda_max - np.eye(g.n)
    return LaplacianBundle(
        laplacian=_readonly(laplacian),
        lambda_max=lambda_max,
        scaled=_readonly(scaled),
    )


def _residual(matrix: np.ndarray, vector: np.ndarray, value: float) -> float:
    return float(np.linalg.norm(matrix @ vector - value * vector))


def _krylov_refine(matrix: np.ndarray, start: np.ndarray) -> Tuple[float, float]:
    """Largest Ritz value over span{v, Lv, L^2 v, ...} and its residual norm

    Lanczos with full reorthogonalization; for n <= KRYLOV_MAX_DIM the subspace is the whole space.
    """
    n = matrix.shape[0]
    dim = min(n, KRYLOV_MAX_DIM)
    basis = np.zeros((n, dim))
    basis[:, 0] = start / np.linalg.norm(start)
    breakdown = KRYLOV_BREAKDOWN_TOL * max(np.linalg.norm(matrix), 1.0)
    size = 1
    for j in range(1, dim):
        w = matrix @ basis[:, j - 1]
        for _ in range(2):
            w -= basis[:, :j] @ (basis[:, :j].T @ w)
        norm = np.linalg.norm(w)
        if norm <= breakdown:
            break
        basis[:, j] = w / norm
        size = j + 1

    q = basis[:, :size]
    projected = q.T @ matrix @ q
    values, vectors = np.linalg.eigh(0.5 * (projected + projected.T))
    ritz = q @ vectors[:, -1]
    return float(values[-1]), _residual(matrix, ritz, float(values[-1]))


def estimate_lambda_max(L) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by seeded power iteration

    Stops when the Rayleigh quotient changes by less than POWER_ITERATION_TOL (relative) and
    the eigen-residual is small. Otherwise the last iterate seeds a Krylov refinement, and
    only when that also fails does the estimate fall back to 2.0 with a RuntimeWarning.
    """
    matrix = _check_symmetric(L, "L")
    n = matrix.shape[0]
    rng = np.random.default_rng(POWER_ITERATION_SEED)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)

    estimate = 0.0
    for iteration in range(1, POWER_ITERATION_MAX_ITER + 1):
        w = matrix @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 1e-12
        new_estimate = float(v @ w)
        v = w / norm
        if iteration > 1 and abs(new_estimate - estimate) <= POWER_ITERATION_TOL * abs(new_estimate):
            if _residual(matrix, v, float(v @ matrix @ v)) <= RESIDUAL_TOL * abs(new_estimate):
                return max(new_estimate, 1e-12)
            break
        estimate = new_estimate

    logger.debug("Power iteration stalled after %d iterations, refining on a Krylov subspace", iteration)
    value, residual = _krylov_refine(matrix, v)
    if residual <= RESIDUAL_TOL * max(abs(value), 1e-12):
        return max(value, 1e-12)

    message = (f"Power iteration did not converge in {POWER_ITERATION_MAX_ITER} iterations; "
               f"falling back to lambda_max = 2.0")
    logger.warning(message)
    warnings.warn(message, RuntimeWarning, stacklevel=2)
    return 2.0


def _off_diagonal_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a - np.diag(np.diag(a))))


def symmetric_eigendecomposition(L) -> Tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition; returns (U, ascending eigenvalues)"""
    a = _check_symmetric(L, "L").copy()
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    total = np.linalg.norm(a)
    threshold = JACOBI_THRESHOLD * total if total > 0 else 0.0

    for sweep in range(JACOBI_MAX_SWEEPS):
        off = _off_diagonal_norm(a)
        if off <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
    else:
        off = _off_diagonal_norm(a)
        if off > threshold:
            raise EigenConvergenceError(
                f"Jacobi did not converge after {JACOBI_MAX_SWEEPS} sweeps (off-diagonal norm {off:.3e})"
            )

    eigenvalues = np.diag(a).copy()
    order = np.argsort(eigenvalues, kind="stable")
    return v[:, order], eigenvalues[order]
