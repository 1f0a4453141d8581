import logging
from dataclasses import dataclass, fields
from typing import Any, Dict

import numpy as np

from models.dataset import Dataset
from models.exceptions import ConfigError, GraphConnectivityError, GraphConstructionError
from models.graph import build_knn_graph, symmetric_eigendecomposition
from models.solvers import SamplingMask
from models.temporal import TimeSignal

from .run_logging import log_run

logger = logging.getLogger(__name__)

MAX_LAYOUT_ATTEMPTS = 10


@dataclass(frozen=True)
class SyntheticConfig:
    """Random geometric k-NN graph with a smoothly evolving signal"""

    n_nodes: int = 100
    n_times: int = 200
    area_side: float = 100.0
    knn_k: int = 5
    energy: float = 1e4
    low_freq_count: int = 10
    noise_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if int(self.knn_k) < 1:
            raise ConfigError("knn_k", f"must be at least 1, got {self.knn_k}")
        if int(self.n_nodes) < int(self.knn_k) + 1:
            raise ConfigError("n_nodes", f"must be at least knn_k + 1 = {int(self.knn_k) + 1}")
        if int(self.n_times) < 2:
            raise ConfigError("n_times", f"must be at least 2, got {self.n_times}")
        if not self.area_side > 0:
            raise ConfigError("area_side", f"must be positive, got {self.area_side}")
        if not self.energy > 0:
            raise ConfigError("energy", f"must be positive, got {self.energy}")
        if not 1 <= int(self.low_freq_count) <= int(self.n_nodes) - 1:
            raise ConfigError("low_freq_count", f"must lie in [1, n_nodes - 1], got {self.low_freq_count}")
        if not self.noise_scale >= 0:
            raise ConfigError("noise_scale", f"must be nonnegative, got {self.noise_scale}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SyntheticConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown synthetic dataset parameter")
        return cls(**data)


class DataGenerator:
    """Seeded synthetic datasets and sampling masks"""

    @classmethod
    @log_run()
    def generate_synthetic(cls, cfg: SyntheticConfig = SyntheticConfig()) -> Dataset:
        """x_t = x_{t-1} + L^(-1/2) f_t with x_1 a low-frequency signal of the given energy"""
        rng = np.random.default_rng(cfg.seed)
        n = int(cfg.n_nodes)

        graph = None
        for attempt in range(1, MAX_LAYOUT_ATTEMPTS + 1):
            coords = rng.uniform(0.0, cfg.area_side, size=(n, 2))
            try:
                graph = build_knn_graph(coords, int(cfg.knn_k))
                break
            except GraphConnectivityError as e:
                logger.info("Layout attempt %d produced %d components, redrawing", attempt, len(e.components))
        if graph is None:
            raise GraphConstructionError(
                f"No connected {cfg.knn_k}-NN graph after {MAX_LAYOUT_ATTEMPTS} coordinate draws"
            )

        basis, eigenvalues = symmetric_eigendecomposition(graph.laplacians.laplacian)
        inv_sqrt = np.zeros(n)
        inv_sqrt[1:] = 1.0 / np.sqrt(np.maximum(eigenvalues[1:], 1e-12))
        inverse_root = (basis * inv_sqrt[None, :]) @ basis.T

        coefficients = rng.standard_normal(int(cfg.low_freq_count))
        first = basis[:, 1:1 + int(cfg.low_freq_count)] @ coefficients
        first *= np.sqrt(cfg.energy) / np.linalg.norm(first)

        innovations = rng.normal(0.0, 1.0, size=(n, int(cfg.n_times) - 1)) * cfg.noise_scale
        steps = inverse_root @ innovations
        values = np.empty((n, int(cfg.n_times)))
        values[:, 0] = first
        values[:, 1:] = first[:, None] + np.cumsum(steps, axis=1)

        return Dataset(name="synthetic", graph=graph, signal=TimeSignal(values), knn_k=int(cfg.knn_k))

    @staticmethod
    def random_sampling_mask(n: int, m: int, density: float, seed: int) -> SamplingMask:
        """Per time step, exactly round(density * n) distinct nodes drawn without replacement"""
        if not 0.0 < density <= 1.0:
            raise ConfigError("density", f"must lie in (0, 1], got {density}")
        count = int(np.floor(density * n + 0.5))
        if count == 0:
            raise ConfigError("density", f"round({density} * {n}) = 0 nodes per time step")
        rng = np.random.default_rng(seed)
        mask = np.zeros((n, m), dtype=bool)
        for column in range(m):
            mask[rng.choice(n, size=count, replace=False), column] = True
        return SamplingMask(mask)


generate_synthetic = DataGenerator.generate_synthetic
random_sampling_mask = DataGenerator.random_sampling_mask
