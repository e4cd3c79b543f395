import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from c2bnet.grids import line1d, make_quadrature, rect2d
from c2bnet.model import (
    c2bnet_forward,
    c2bnet_new,
    finetune_exact,
    finetune_gradient,
    fit_standardizer,
    interpolate_basis,
    quadrature_loss,
    quadrature_loss_grad,
    solve_basis,
    trainable_params,
    with_basis,
)
from c2bnet.nn import Mlp, Layer, count_params, finite_diff_grad_check
from c2bnet.numkit import Rng
from c2bnet.pde.dataset import Dataset
from c2bnet.train import TrainConfig


def dataset(x, y, out_grid=None, in_grid=None):
    x, y = np.asarray(x, float), np.asarray(y, float)
    n = x.shape[0]
    return Dataset(
        "synthetic",
        x,
        y,
        in_grid or line1d(0, 1, x.shape[1]),
        out_grid or line1d(0, 1, y.shape[1]),
        np.arange(n, dtype=np.uint64),
    )


def small_net(seed=0, d_in=6, d_low=3, d_out=9, grid=None):
    return c2bnet_new(d_in, d_low, d_out, Rng(seed), hidden=(12, 12), output_grid=grid)


# --- construction -----------------------------------------------------------


def test_experiment_parameter_counts():
    ell = c2bnet_new(100, 12, 100, Rng(0))
    assert count_params(ell.mlp) == 32_712
    assert trainable_params(ell, True) == 1_200
    heat = c2bnet_new(64, 20, 64, Rng(0))
    assert trainable_params(heat, True) == 1_280
    assert trainable_params(with_basis(heat, np.zeros((20, 127)), None), True) == 2_540
    assert count_params(c2bnet_new(484, 50, 100, Rng(0)).mlp) == 78_750


def test_layer_layout():
    net = c2bnet_new(5, 4, 7, Rng(1), hidden=(8, 8, 8))
    acts = [layer.activation for layer in net.mlp.layers]
    assert acts == ["relu", "relu", "relu", "identity", "identity"]
    assert net.mlp.layers[-1].bias is None and net.mlp.layers[-2].bias is not None
    assert net.basis.shape == (4, 7) and net.d_low == 4


def test_rejects_empty_dimensions():
    with pytest.raises(ValueError):
        c2bnet_new(3, 0, 4, Rng(0))


# --- forward ----------------------------------------------------------------


def test_zero_basis_gives_zero_output():
    net = with_basis(small_net(), np.zeros((3, 9)), None)
    assert np.array_equal(net(Rng(2).normal(size=(4, 6))), np.zeros((4, 9)))


def test_rank_one_basis():
    b = np.arange(1.0, 10.0)
    basis = np.zeros((3, 9))
    basis[0] = b
    net = with_basis(small_net(), basis, None)
    y, alpha = c2bnet_forward(net, Rng(3).normal(size=(5, 6)))
    assert np.allclose(y, np.outer(alpha[:, 0], b), atol=1e-14)


def test_single_input_is_one_dimensional():
    net = small_net()
    u = Rng(4).normal(size=6)
    y, alpha = c2bnet_forward(net, u)
    assert y.shape == (9,) and alpha.shape == (3,)
    assert np.array_equal(y, net(u[None])[0])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_outputs_lie_in_basis_span(seed):
    net = small_net(seed)
    y = net(Rng(seed).normal(size=(10, 6)))
    coef, *_ = np.linalg.lstsq(net.basis.T, y.T, rcond=None)
    assert np.max(np.abs(net.basis.T @ coef - y.T)) < 1e-10 * max(1.0, np.abs(y).max())


def test_standardizer_modes():
    x = Rng(5).normal(3.0, 2.0, size=(50, 6))
    x[:, 2] = 7.0
    net = small_net()
    fit_standardizer(net, x, "global")
    z = net.standardize(x)
    assert np.allclose(z.mean(axis=0), 0.0, atol=1e-12)
    assert np.sqrt(np.mean(z**2)) == pytest.approx(1.0)
    fit_standardizer(net, x, "grand")
    assert np.allclose(net.standardize(x).mean(axis=0), 0.0, atol=1e-12)
    assert np.all(net.std == pytest.approx(x.std()))
    fit_standardizer(net, x, "feature")
    assert net.std[2] == 1.0
    fit_standardizer(net, x, "none")
    assert np.array_equal(net.standardize(x), x)
    with pytest.raises(ValueError):
        fit_standardizer(net, x, "minmax")
    with pytest.raises(ValueError):
        net.standardize(np.ones((2, 5)))


# --- loss -------------------------------------------------------------------


def test_quadrature_loss_examples():
    w = np.array([0.25, 0.5, 0.25])
    assert quadrature_loss(np.ones((2, 3)), np.ones((2, 3)), w) == 0.0
    assert quadrature_loss(np.array([[1.0, 1.0, 1.0]]), np.zeros((1, 3)), w) == pytest.approx(1.0)
    # mean over samples
    assert quadrature_loss(np.array([[2.0, 0, 0], [0, 0, 0]]), np.zeros((2, 3)), w) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        quadrature_loss(np.ones((2, 3)), np.ones((2, 4)), w)


def test_quadrature_loss_gradient_matches_differences():
    rng = Rng(6)
    w = rng.uniform(0.1, 1.0, 5)
    head = Mlp([Layer(rng.normal(size=(3, 5)), None, "identity")])
    phi, v = rng.normal(size=(7, 3)), rng.normal(size=(7, 5))
    err = finite_diff_grad_check(head, phi, v, loss=lambda y, t: quadrature_loss_grad(y, t, w))
    assert err < 1e-6


# --- fine-tuning ------------------------------------------------------------


def features_and_data(seed=7, n=30, out=None):
    out = out or line1d(0, 1, 15)
    net = small_net(seed, grid=line1d(0, 1, 9))
    rng = Rng(seed)
    x = rng.normal(size=(n, 6))
    return net, x, out


def test_freeze_invariant_for_both_methods():
    net, x, grid = features_and_data()
    data = dataset(x, Rng(1).normal(size=(30, 15)), grid)
    for tuned in (finetune_gradient(net, data, TrainConfig(max_epochs=200, lr=1e-2)), finetune_exact(net, data)):
        for a, b in zip(net.mlp.layers[:-1], tuned.mlp.layers[:-1]):
            assert np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)
        assert np.array_equal(tuned.mean, net.mean) and np.array_equal(tuned.std, net.std)
        assert tuned.basis.shape == (3, 15) and tuned.output_grid == grid


def test_warm_start_with_no_epochs_keeps_model():
    net, x, _ = features_and_data()
    data = dataset(x, net(x), line1d(0, 1, 9))
    tuned = finetune_gradient(net, data, TrainConfig(max_epochs=0), warm_start=True)
    assert np.array_equal(tuned.basis, net.basis)
    assert np.array_equal(tuned(x), net(x))


def test_warm_start_interpolates_to_new_grid():
    net, x, grid = features_and_data()
    data = dataset(x, np.zeros((30, 15)), grid)
    tuned = finetune_gradient(net, data, TrainConfig(max_epochs=0), warm_start=True)
    assert np.allclose(tuned.basis, interpolate_basis(net.basis, line1d(0, 1, 9), grid))
    assert np.allclose(tuned.basis[:, 0], net.basis[:, 0]) and np.allclose(tuned.basis[:, -1], net.basis[:, -1])


def test_interpolate_basis_2d_is_exact_for_bilinear():
    old, new = rect2d(4, 4, "cell"), rect2d(8, 8, "cell")
    f = lambda xy: 1.0 + xy[:, 0] - 2.0 * xy[:, 1] + 3.0 * xy[:, 0] * xy[:, 1]  # noqa: E731
    out = interpolate_basis(f(old.nodes())[None], old, new)
    assert np.allclose(out[0], f(new.nodes()), atol=1e-12)
    with pytest.raises(ValueError):
        interpolate_basis(np.zeros((1, 3)), line1d(0, 1, 3), rect2d(2, 2))


def test_exact_recovers_planted_basis():
    net, x, grid = features_and_data(n=40)
    planted = Rng(9).normal(size=(3, 15))
    data = dataset(x, net.coefficients(x) @ planted, grid)
    tuned = finetune_exact(net, data)
    assert np.max(np.abs(tuned.basis - planted)) < 1e-8


def test_exact_single_sample_interpolates():
    net, x, grid = features_and_data(n=1)
    v = Rng(10).normal(size=(1, 15))
    tuned = finetune_exact(net, dataset(x, v, grid))
    assert np.max(np.abs(tuned(x) - v)) < 1e-8 * np.abs(v).max()


def test_solve_basis_reports_condition():
    phi = np.diag([1.0, 10.0])
    w, cond = solve_basis(phi, np.eye(2), ridge=0.0)
    assert np.allclose(w, np.diag([1.0, 0.1]))
    assert cond == pytest.approx(100.0)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_exact_never_worse_than_gradient(seed):
    net, x, grid = features_and_data(seed, n=25)
    data = dataset(x, Rng(seed).split("v").normal(size=(25, 15)), grid)
    q = make_quadrature(grid)
    g = quadrature_loss(finetune_gradient(net, data, TrainConfig(max_epochs=300, lr=1e-2))(x), data.outputs, q)
    e = quadrature_loss(finetune_exact(net, data)(x), data.outputs, q)
    assert e <= g + 1e-12


def test_finetune_checks_inputs():
    net, x, grid = features_and_data()
    net.input_grid = line1d(0, 1, 6)
    with pytest.raises(ValueError):
        finetune_exact(net, dataset(x, np.zeros((30, 15)), grid, in_grid=line1d(0, 2, 6)))
    with pytest.raises(ValueError):
        net.input_grid = None
        finetune_exact(net, dataset(x[:, :5], np.zeros((30, 15)), grid))
