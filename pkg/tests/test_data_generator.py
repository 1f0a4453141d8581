import numpy as np
import pytest

from models.exceptions import ConfigError
from models.graph import symmetric_eigendecomposition
from utils.data_generator import DataGenerator, SyntheticConfig, generate_synthetic, random_sampling_mask

SMALL = dict(n_nodes=25, n_times=12, knn_k=4, low_freq_count=5)


def test_same_seed_same_dataset():
    a = generate_synthetic(SyntheticConfig(seed=5, **SMALL))
    b = generate_synthetic(SyntheticConfig(seed=5, **SMALL))
    assert np.array_equal(a.signal.values, b.signal.values)
    assert np.array_equal(a.graph.adjacency, b.graph.adjacency)


def test_different_seed_different_dataset():
    a = generate_synthetic(SyntheticConfig(seed=5, **SMALL))
    b = generate_synthetic(SyntheticConfig(seed=6, **SMALL))
    assert not np.array_equal(a.signal.values, b.signal.values)


def test_first_snapshot_energy_and_spectrum():
    """x_1 has the requested energy and no component along the constant-mode eigenvector."""
    dataset = generate_synthetic(SyntheticConfig(seed=1, energy=400.0, **SMALL))
    first = dataset.signal.values[:, 0]
    assert float(first @ first) == pytest.approx(400.0, rel=1e-9)
    basis, _ = symmetric_eigendecomposition(dataset.graph.laplacians.laplacian)
    assert abs(basis[:, 0] @ first) < 1e-8 * np.linalg.norm(first)
    assert abs(basis[:, -1] @ first) < 1e-8 * np.linalg.norm(first)


def test_zero_noise_gives_constant_signal():
    dataset = generate_synthetic(SyntheticConfig(seed=2, noise_scale=0.0, **SMALL))
    values = dataset.signal.values
    assert np.array_equal(values, np.repeat(values[:, :1], values.shape[1], axis=1))


def test_dataset_shape_and_name():
    dataset = DataGenerator.generate_synthetic(SyntheticConfig(seed=3, **SMALL))
    assert dataset.name == "synthetic"
    assert dataset.shape == (25, 12)
    assert dataset.knn_k == 4


def test_mask_has_exact_count_per_column():
    mask = random_sampling_mask(100, 20, 0.25, seed=0)
    assert np.all(mask.mask.sum(axis=0) == 25)
    assert mask.density == pytest.approx(0.25)


def test_mask_count_rounds_half_up():
    assert np.all(random_sampling_mask(10, 3, 0.25, seed=0).mask.sum(axis=0) == 3)
    assert np.all(random_sampling_mask(10, 3, 0.24, seed=0).mask.sum(axis=0) == 2)


def test_full_density_samples_everything():
    assert random_sampling_mask(7, 4, 1.0, seed=3).mask.all()


def test_mask_is_seeded():
    assert random_sampling_mask(50, 10, 0.3, seed=1).mask_hash == random_sampling_mask(50, 10, 0.3, seed=1).mask_hash
    assert random_sampling_mask(50, 10, 0.3, seed=1).mask_hash != random_sampling_mask(50, 10, 0.3, seed=2).mask_hash


def test_empty_or_invalid_density_rejected():
    with pytest.raises(ConfigError):
        random_sampling_mask(100, 5, 0.004, seed=0)
    with pytest.raises(ConfigError):
        random_sampling_mask(100, 5, 0.0, seed=0)
    with pytest.raises(ConfigError):
        random_sampling_mask(100, 5, 1.5, seed=0)


def test_synthetic_config_validation():
    with pytest.raises(ConfigError) as info:
        SyntheticConfig(n_nodes=4, knn_k=5)
    assert info.value.field == "n_nodes"
    with pytest.raises(ConfigError):
        SyntheticConfig(low_freq_count=100)
    with pytest.raises(ConfigError):
        SyntheticConfig.from_dict({"nodes": 10})


def test_increments_have_no_constant_mode_component():
    dataset = generate_synthetic(SyntheticConfig(seed=4, **SMALL))
    kernel = np.sqrt(dataset.graph.degrees)
    kernel /= np.linalg.norm(kernel)
    increments = np.diff(dataset.signal.values, axis=1)
    for t in range(increments.shape[1]):
        step = increments[:, t]
        assert abs(kernel @ step) < 1e-9 * max(np.linalg.norm(step), 1.0), f"step {t}"


def test_increments_are_smoother_than_white_noise():
    """Over 20 seeds, the mean Rayleigh quotient of the increments stays below that of white noise."""
    for seed in range(20):
        dataset = generate_synthetic(SyntheticConfig(seed=100 + seed, **SMALL))
        L = dataset.graph.laplacians.laplacian
        increments = np.diff(dataset.signal.values, axis=1)
        noise = np.random.default_rng(seed).standard_normal(increments.shape)
        noise *= np.linalg.norm(increments, axis=0) / np.linalg.norm(noise, axis=0)

        def mean_energy(columns):
            return float(np.mean(np.einsum("it,ij,jt->t", columns, L, columns) / np.sum(columns ** 2, axis=0)))

        assert mean_energy(increments) < mean_energy(noise), f"seed {100 + seed}"


def test_default_size_generation_succeeds():
    dataset = generate_synthetic(SyntheticConfig(seed=0))
    assert dataset.shape == (100, 200)
    assert float(dataset.signal.values[:, 0] @ dataset.signal.values[:, 0]) == pytest.approx(1e4, rel=1e-9)
