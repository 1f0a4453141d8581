"""
Chebyshev cascade network.

 - Chebyshev basis equals T_{k-1}(L_hat) X
 - analytic gradients agree with central finite differences
 - initialization, shapes, checkpoints, instability detection
"""

import numpy as np
import pytest

from models.exceptions import NumericalInstabilityError, ReconstructionError, ShapeMismatchError
from models.temporal import temporal_difference
from models.timegnn import (CascadeLayerParams, CascadeModel, cascade_forward, cheb_basis, gradients,
                            layer_dims, load_checkpoint, loss, loss_and_gradients, model_forward,
                            save_checkpoint)
from utils.data_generator import SyntheticConfig, generate_synthetic, random_sampling_mask

LAM = 1e-4
EPSILON = 0.05


@pytest.fixture(scope="module")
def gate_instance():
    """N=12, M=8, two layers, H=3, alpha=2, seed 1"""
    dataset = generate_synthetic(SyntheticConfig(n_nodes=12, n_times=8, knn_k=4, low_freq_count=3, seed=1))
    mask = random_sampling_mask(12, 8, 0.5, seed=1)
    truth = dataset.signal.values
    model = CascadeModel.initialize(n_times=8, hidden=3, n_layers=2, alpha=2, seed=1)
    return {
        "model": model,
        "input": temporal_difference(mask.apply(truth)),
        "truth": truth,
        "train": mask.mask,
        "L": dataset.graph.laplacians.laplacian,
        "Lhat": dataset.graph.laplacians.scaled,
    }


def test_chebyshev_basis_matches_polynomials(graph10):
    """Z(k) = T_{k-1}(L_hat) X evaluated through the eigendecomposition."""
    lhat = graph10.laplacians.scaled
    x = np.random.default_rng(0).standard_normal((graph10.n, 4))
    eigenvalues, vectors = np.linalg.eigh(lhat)
    basis = cheb_basis(x, lhat, 5)
    for k, z in enumerate(basis, start=1):
        t = np.polynomial.chebyshev.Chebyshev.basis(k - 1)(eigenvalues)
        expected = vectors @ np.diag(t) @ vectors.T @ x
        assert np.linalg.norm(z - expected) <= 1e-10 * np.linalg.norm(expected)


def test_single_branch_is_a_linear_map(graph10):
    x = np.random.default_rng(1).standard_normal((graph10.n, 3))
    w = np.random.default_rng(2).standard_normal((3, 2))
    params = CascadeLayerParams([[w]], [0.7])
    assert np.allclose(cascade_forward(x, params, graph10.laplacians.scaled), 0.7 * x @ w)


def test_layer_dims():
    assert layer_dims(8, 3, 1) == [7, 8]
    assert layer_dims(8, 3, 3) == [7, 3, 3, 8]


def test_initialization(gate_instance):
    model = gate_instance["model"]
    assert model.dims == [7, 3, 8]
    assert model.alpha == 2
    for layer in model.layers:
        assert np.allclose(layer.branch_scalars, 0.5)
        assert [len(branch) for branch in layer.weights] == [1, 2]
        limit = np.sqrt(6.0 / (layer.in_dim + layer.out_dim))
        assert all(np.abs(w).max() <= limit for branch in layer.weights for w in branch)


def test_initialization_is_seeded():
    a = CascadeModel.initialize(6, 4, 2, 3, seed=9).parameter_vector()
    b = CascadeModel.initialize(6, 4, 2, 3, seed=9).parameter_vector()
    c = CascadeModel.initialize(6, 4, 2, 3, seed=10).parameter_vector()
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_forward_output_shape(gate_instance):
    out = model_forward(gate_instance["input"], gate_instance["model"], gate_instance["Lhat"])
    assert out.shape == (12, 8)


def test_gradients_match_finite_differences(gate_instance):
    """Every parameter array within 1e-4 relative of central differences with step 1e-5."""
    g = gate_instance
    model = g["model"]
    vector = model.parameter_vector()

    def objective(v):
        out = model_forward(g["input"], model.with_parameters(v), g["Lhat"])
        return loss(out, g["truth"], g["train"], g["L"], LAM, EPSILON)

    analytic = gradients(model, g["input"], g["truth"], g["train"], g["L"], LAM, EPSILON, g["Lhat"])
    analytic = analytic.parameter_vector()

    step = 1e-5
    numeric = np.empty_like(vector)
    for i in range(vector.size):
        up, down = vector.copy(), vector.copy()
        up[i] += step
        down[i] -= step
        numeric[i] = (objective(up) - objective(down)) / (2.0 * step)

    offset = 0
    for array in model.parameter_arrays():
        a = analytic[offset:offset + array.size]
        n = numeric[offset:offset + array.size]
        offset += array.size
        rel = np.max(np.abs(a - n)) / max(np.max(np.abs(n)), 1e-8)
        assert rel < 1e-4, f"parameter block of shape {array.shape}: relative error {rel:.2e}"


def test_loss_and_gradients_return_output(gate_instance):
    g = gate_instance
    value, grads, out = loss_and_gradients(g["model"], g["input"], g["truth"], g["train"], g["L"],
                                           LAM, EPSILON, g["Lhat"])
    assert value == pytest.approx(loss(out, g["truth"], g["train"], g["L"], LAM, EPSILON))
    assert grads.dims == g["model"].dims


def test_loss_requires_training_entries(gate_instance):
    g = gate_instance
    with pytest.raises(ReconstructionError):
        loss(g["truth"], g["truth"], np.zeros((12, 8), dtype=bool), g["L"], LAM, EPSILON)


def test_loss_accepts_index_pairs(gate_instance):
    g = gate_instance
    pairs = [(int(i), int(j)) for i, j in np.argwhere(g["train"])]
    recon = np.zeros_like(g["truth"])
    assert loss(recon, g["truth"], pairs, g["L"], LAM, EPSILON) == pytest.approx(
        loss(recon, g["truth"], g["train"], g["L"], LAM, EPSILON))


def test_wrong_input_width_rejected(gate_instance):
    with pytest.raises(ShapeMismatchError):
        model_forward(np.zeros((12, 5)), gate_instance["model"], gate_instance["Lhat"])


def test_non_finite_weights_reported_with_layer(gate_instance):
    model = gate_instance["model"]
    broken = model.with_parameters(np.full(model.parameter_vector().size, np.inf))
    with pytest.raises(NumericalInstabilityError) as info:
        with np.errstate(all="ignore"):
            model_forward(gate_instance["input"], broken, gate_instance["Lhat"])
    assert info.value.layer == 0


def test_checkpoint_restores_outputs(gate_instance, tmp_path):
    g = gate_instance
    path = save_checkpoint(g["model"], tmp_path / "model.json")
    restored = load_checkpoint(path)
    assert isinstance(restored, CascadeModel)
    assert np.array_equal(model_forward(g["input"], restored, g["Lhat"]),
                          model_forward(g["input"], g["model"], g["Lhat"]))


def test_branch_shape_validation():
    with pytest.raises(ReconstructionError):
        CascadeLayerParams([[np.zeros((2, 2))], [np.zeros((2, 2))]], [0.5, 0.5])
    with pytest.raises(ShapeMismatchError):
        CascadeLayerParams([[np.zeros((2, 2))]], [0.5, 0.5])


def test_three_branch_layer_matches_explicit_polynomials(graph10):
    """alpha=3: mu_1 X W11 + mu_2 (X W21 + L_hat X W22) + mu_3 (X W31 + L_hat X W32 + T_2 X W33)."""
    rng = np.random.default_rng(3)
    lhat = graph10.laplacians.scaled
    x = rng.standard_normal((graph10.n, 2))
    weights = [[rng.standard_normal((2, 2)) for _ in range(rho)] for rho in (1, 2, 3)]
    mu = np.array([0.3, -1.2, 0.8])
    polys = [np.eye(graph10.n), lhat, 2.0 * lhat @ lhat - np.eye(graph10.n)]
    expected = sum(mu[r] * sum(polys[k] @ x @ weights[r][k] for k in range(r + 1)) for r in range(3))
    out = cascade_forward(x, CascadeLayerParams(weights, mu), lhat)
    assert np.allclose(out, expected, atol=1e-12)


def test_cascade_layer_is_linear_in_its_input(graph10):
    rng = np.random.default_rng(4)
    lhat = graph10.laplacians.scaled
    params = CascadeLayerParams([[rng.standard_normal((3, 4)) for _ in range(rho)] for rho in (1, 2)], [0.6, 0.4])
    x, y = rng.standard_normal((2, graph10.n, 3))
    combined = cascade_forward(2.0 * x - 0.5 * y, params, lhat)
    expected = 2.0 * cascade_forward(x, params, lhat) - 0.5 * cascade_forward(y, params, lhat)
    assert np.allclose(combined, expected, atol=1e-10)


def test_zero_weights_give_zero_output(graph10):
    params = CascadeLayerParams([[np.zeros((3, 2)) for _ in range(rho)] for rho in (1, 2)], [5.0, -3.0])
    x = np.random.default_rng(5).standard_normal((graph10.n, 3))
    assert np.array_equal(cascade_forward(x, params, graph10.laplacians.scaled), np.zeros((graph10.n, 2)))


def test_identity_model_is_the_composition_of_its_layers(gate_instance):
    g = gate_instance
    model = CascadeModel(g["model"].layers, activation="identity")
    hidden = cascade_forward(g["input"], model.layers[0], g["Lhat"])
    expected = cascade_forward(hidden, model.layers[1], g["Lhat"])
    assert np.allclose(model_forward(g["input"], model, g["Lhat"]), expected, atol=1e-12)


def test_loss_ignores_truth_outside_training_set(gate_instance):
    g = gate_instance
    recon = np.random.default_rng(6).standard_normal(g["truth"].shape)
    altered = np.where(g["train"], g["truth"], 1e3)
    assert loss(recon, altered, g["train"], g["L"], 0.0, EPSILON) == loss(recon, g["truth"], g["train"],
                                                                          g["L"], 0.0, EPSILON)


def test_loss_without_smoothness_is_masked_mse(gate_instance):
    g = gate_instance
    recon = np.random.default_rng(7).standard_normal(g["truth"].shape)
    gap = (recon - g["truth"])[g["train"]]
    assert loss(recon, g["truth"], g["train"], g["L"], 0.0, EPSILON) == pytest.approx(np.mean(gap ** 2))


def test_loss_is_zero_for_exact_constant_reconstruction(gate_instance):
    g = gate_instance
    constant = np.repeat(np.arange(12.0)[:, None], 8, axis=1)
    assert loss(constant, constant, g["train"], g["L"], LAM, EPSILON) == 0.0


def test_identical_branches_get_identical_scalar_gradients(gate_instance):
    g = gate_instance
    w = np.random.default_rng(8).standard_normal((7, 8))
    layer = CascadeLayerParams([[w], [w, np.zeros((7, 8))]], [0.5, 0.5])
    model = CascadeModel([layer], activation="identity")
    grads = gradients(model, g["input"], g["truth"], g["train"], g["L"], LAM, EPSILON, g["Lhat"])
    d_mu = grads.layers[0].branch_scalars
    assert d_mu[0] == pytest.approx(d_mu[1], rel=1e-12)
    assert d_mu[0] != 0.0
