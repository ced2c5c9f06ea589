"""Network forward/backward/optimizer checks against hand values and finite
differences."""

import numpy as np
import pytest

from alem import kernels, nn
from alem.nn import (
    AdamState,
    Conv1D,
    Dense,
    NetParams,
    ReLU,
    ShapeError,
    TrainConfig,
    adam_step,
    default_net_spec,
    forward,
    grad,
    init_net,
    l1_loss,
    per_layer_weight_sums,
    per_sample_l1,
    spec_to_string,
    string_to_spec,
    train,
    validate_spec,
)


def dense_net(weights, biases):
    spec = tuple(Dense(w.shape[1], w.shape[0]) for w in weights)
    return NetParams(spec, [np.asarray(w, float) for w in weights],
                     [np.asarray(b, float) for b in biases])


def walk(net, x):
    """Independent layer-by-layer forward used for margin checks below.

    Returns (output row, list of pre-ReLU activations). Conv inputs are
    reshaped from the flat vector exactly as the shape walk dictates.
    """
    cur = np.asarray(x, float)[None, :]
    pre = []
    shape = None
    pi = 0
    for layer in net.spec:
        if isinstance(layer, Conv1D):
            if cur.ndim == 2:
                cur = cur.reshape(cur.shape[0], layer.in_channels, -1)
            cur = kernels.conv1d_forward(cur, net.weights[pi], net.biases[pi],
                                         layer.stride, backend="numpy")
            pi += 1
        elif isinstance(layer, Dense):
            cur = cur.reshape(cur.shape[0], -1)
            cur = cur @ net.weights[pi].T + net.biases[pi]
            pi += 1
        else:
            pre.append(cur.reshape(-1).copy())
            cur = np.maximum(cur, 0.0)
    return cur.reshape(-1), pre


FD_SPECS = [
    (Dense(3, 5), ReLU(), Dense(5, 2)),
    (Dense(4, 4),),
    (Conv1D(1, 2, 3), ReLU(), Dense(2 * 8, 3)),
    (Conv1D(1, 2, 3, stride=2), ReLU(), Conv1D(2, 2, 2), ReLU(), Dense(2 * 3, 2)),
    (Dense(6, 8), ReLU(), Dense(8, 8), ReLU(), Dense(8, 4)),
]


def fd_case_worst_error(case, step=1e-5):
    """Worst relative error between analytic and central-difference gradients
    for one seeded net/batch configuration.

    Inputs are resampled until no |.| or ReLU argument sits within 1e-3 of
    its kink, so the analytic subgradient is the true derivative there.
    Coordinates where both sides are below 1e-9 are treated as matching
    zeros; central differences only resolve them to cancellation noise
    (~1e-12 at these loss scales, e.g. weights behind a dead ReLU).
    """
    spec = FD_SPECS[case % len(FD_SPECS)]
    in_dim = 10 if isinstance(spec[0], Conv1D) else spec[0].in_dim
    net = init_net(spec, 100 + case, input_dim=in_dim)
    rng = np.random.default_rng(200 + case)
    batch_n = 1 + case % 3
    for _ in range(60):
        x = rng.random((batch_n, in_dim))
        y = rng.random((batch_n, forward(net, x[0]).shape[0]))
        margin = min(
            float(np.abs(forward(net, x) - y).min()),
            min((float(np.abs(p).min()) for xi in x for p in walk(net, xi)[1]),
                default=1.0),
        )
        if margin > 1e-3:
            break
    else:
        raise AssertionError("could not sample a batch clear of kinks")

    g = grad(net, (x, y))
    flat_g = np.concatenate([a.reshape(-1) for a in g.weights + g.biases])
    idx = 0
    worst = 0.0
    for arr in net.weights + net.biases:
        flat = arr.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + step
            up = l1_loss(forward(net, x), y)
            flat[i] = keep - step
            dn = l1_loss(forward(net, x), y)
            flat[i] = keep
            fd = (up - dn) / (2 * step)
            scale = max(abs(fd), abs(flat_g[idx]))
            if scale > 1e-9:
                worst = max(worst, abs(fd - flat_g[idx]) / scale)
            idx += 1
    return worst


class TestSpec:
    def test_param_count(self):
        # (3*4 + 4) + (4*2 + 2)
        net = init_net((Dense(3, 4), ReLU(), Dense(4, 2)), seed=0)
        assert net.n_params() == 26

    def test_incompatible_pair_named(self):
        with pytest.raises(ShapeError) as exc:
            validate_spec((Dense(3, 4), Dense(5, 2)))
        assert "layer" in str(exc.value)

    def test_bad_conv_channels_named(self):
        with pytest.raises(ShapeError):
            validate_spec((Conv1D(1, 2, 3), Conv1D(3, 2, 3)), input_dim=16)

    def test_conv_length_walk(self):
        # conv output length (16-3)//1 + 1 = 14, flattened to 2*14 = 28
        spec = (Conv1D(1, 2, 3), ReLU(), Dense(28, 8))
        net = init_net(spec, 0, input_dim=16)
        y = forward(net, np.linspace(0.0, 1.0, 16))
        assert y.shape == (8,)

    def test_spec_string_round_trip(self):
        for spec in (
            (Dense(5, 128), ReLU(), Dense(128, 128), ReLU(), Dense(128, 128)),
            (Conv1D(1, 8, 5), ReLU(), Conv1D(8, 8, 5, stride=2), ReLU(), Dense(16, 4)),
        ):
            assert string_to_spec(spec_to_string(spec)) == spec

    def test_default_spec_small_input_is_mlp(self):
        spec = default_net_spec(5, 128)
        assert all(not isinstance(l, Conv1D) for l in spec)
        validate_spec(spec, input_dim=5)

    def test_default_spec_wide_input_uses_conv(self):
        spec = default_net_spec(10, 64)
        assert isinstance(spec[0], Conv1D)
        validate_spec(spec, input_dim=10)


class TestForward:
    def test_zero_net_maps_to_zero(self):
        net = dense_net([np.zeros((3, 4))], [np.zeros(3)])
        assert np.array_equal(forward(net, np.ones(4)), np.zeros(3))

    def test_hand_matrix_vector(self):
        net = dense_net([np.array([[1.0, 2.0], [3.0, 4.0]])], [np.zeros(2)])
        np.testing.assert_array_equal(forward(net, [1.0, 1.0]), [3.0, 7.0])

    def test_relu_clamps(self):
        net = NetParams((Dense(3, 3), ReLU()), [np.eye(3)], [np.zeros(3)])
        np.testing.assert_array_equal(forward(net, [-1.0, 0.0, 2.0]), [0.0, 0.0, 2.0])

    def test_dimension_mismatch(self):
        net = init_net((Dense(4, 2),), 0)
        with pytest.raises(ShapeError):
            forward(net, np.ones(5))

    def test_batch_matches_single(self):
        # matrix-matrix and vector-matrix BLAS paths round differently, so
        # agreement is to float precision rather than bitwise
        net = init_net(default_net_spec(10, 16), 3, input_dim=10)
        xs = np.random.default_rng(0).random((4, 10))
        batch = forward(net, xs)
        for i in range(4):
            np.testing.assert_allclose(batch[i], forward(net, xs[i]), rtol=1e-12)

    def test_output_length_matches_spec(self):
        for out_dim in (1, 7, 32):
            net = init_net((Dense(6, 9), ReLU(), Dense(9, out_dim)), 1)
            assert forward(net, np.ones(6)).shape == (out_dim,)

    def test_forward_matches_independent_walk(self):
        for seed in range(4):
            net = init_net(default_net_spec(10, 12), seed, input_dim=10)
            x = np.random.default_rng(seed).random(10)
            want, _ = walk(net, x)
            np.testing.assert_allclose(forward(net, x), want, rtol=1e-12)


class TestLoss:
    def test_exact_fit_is_zero(self):
        assert l1_loss([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_hand_mean(self):
        assert l1_loss([1.0, 2.0], [0.0, 0.0]) == 1.5

    def test_symmetry(self):
        assert l1_loss([-1.0], [1.0]) == 2.0

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            l1_loss([1.0], [1.0, 2.0])

    def test_per_sample_rows(self):
        pred = np.array([[1.0, 3.0], [0.0, 0.0]])
        truth = np.zeros((2, 2))
        np.testing.assert_array_equal(per_sample_l1(pred, truth), [2.0, 0.0])


class TestGrad:
    def test_zero_at_exact_fit(self):
        net = init_net((Dense(3, 2),), 5)
        x = np.random.default_rng(1).random((4, 3))
        y = forward(net, x)
        g = grad(net, (x, y))
        assert all(np.all(gw == 0.0) for gw in g.weights)
        assert all(np.all(gb == 0.0) for gb in g.biases)

    def test_last_bias_gradient_identity(self):
        # d loss / d b_last = mean over batch of sign(pred - truth) / dim
        net = init_net((Dense(4, 6), ReLU(), Dense(6, 3)), 2)
        rng = np.random.default_rng(7)
        x = rng.random((5, 4))
        y = rng.random((5, 3))
        pred = forward(net, x)
        want = np.sign(pred - y).mean(axis=0) / 3.0
        g = grad(net, (x, y))
        np.testing.assert_allclose(g.biases[-1], want, rtol=1e-12)

    def test_empty_batch_rejected(self):
        net = init_net((Dense(2, 2),), 0)
        with pytest.raises(ValueError):
            grad(net, (np.zeros((0, 2)), np.zeros((0, 2))))

    @pytest.mark.parametrize("case", range(20))
    def test_matches_central_differences(self, case):
        worst = fd_case_worst_error(case)
        assert worst < 1e-6, f"max relative gradient error {worst:.3e}"


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        net = init_net((Dense(3, 3),), 0)
        g = nn.Grads([np.zeros_like(w) for w in net.weights],
                     [np.zeros_like(b) for b in net.biases])
        net2, st2 = adam_step(net, g, AdamState.zeros_like(net))
        assert st2.t == 1
        assert np.array_equal(net2.weights[0], net.weights[0])

    def test_single_step_hand_value(self):
        # scalar theta=0, g=1: m_hat=1, v_hat~1, delta = -lr/(sqrt(v_hat)+eps)
        net = dense_net([np.array([[0.0]])], [np.array([0.0])])
        g = nn.Grads([np.array([[1.0]])], [np.array([0.0])])
        net2, _ = adam_step(net, g, AdamState.zeros_like(net))
        got = net2.weights[0][0, 0]
        m_hat = (0.1 * 1.0) / (1.0 - 0.9)
        v_hat = (0.001 * 1.0) / (1.0 - 0.999)
        want = -0.001 * m_hat / (np.sqrt(v_hat) + 1e-8)
        assert got == pytest.approx(-0.001, abs=1e-9)
        assert got == pytest.approx(want, rel=1e-12)

    def test_identical_calls_identical_results(self):
        net = init_net((Dense(2, 4), ReLU(), Dense(4, 2)), 9)
        x = np.random.default_rng(3).random((3, 2))
        y = np.random.default_rng(4).random((3, 2))
        g = grad(net, (x, y))
        a1, s1 = adam_step(net, g, AdamState.zeros_like(net))
        a2, s2 = adam_step(net, g, AdamState.zeros_like(net))
        assert s1.t == s2.t == 1
        for w1, w2 in zip(a1.weights, a2.weights):
            assert np.array_equal(w1, w2)

    def test_shape_mismatch_rejected(self):
        net = init_net((Dense(2, 2),), 0)
        g = nn.Grads([np.zeros((3, 3))], [np.zeros(2)])
        with pytest.raises(ShapeError):
            adam_step(net, g, AdamState.zeros_like(net))


class TestTrain:
    def _toy(self, seed=0, n=6):
        rng = np.random.default_rng(seed)
        x = rng.random((n, 3))
        y = rng.random((n, 4))
        return x, y

    def test_memorizes_single_sample(self):
        x, y = self._toy(1, n=1)
        net = init_net((Dense(3, 16), ReLU(), Dense(16, 4)), 0)
        cfg = TrainConfig(minibatch_size=1, max_epochs=500, patience=10 ** 9, seed=0)
        fit, log = train(net, (x, y), (x, y), cfg)
        assert l1_loss(forward(fit, x), y) < 1e-2

    def test_max_epochs_zero_is_identity(self):
        x, y = self._toy(2)
        net = init_net((Dense(3, 8), ReLU(), Dense(8, 4)), 1)
        fit, log = train(net, (x, y), (x, y), TrainConfig(max_epochs=0))
        assert log.epochs_run == 0
        for w1, w2 in zip(fit.weights, net.weights):
            assert np.array_equal(w1, w2)

    def test_same_seed_identical_logs(self):
        x, y = self._toy(3, n=10)
        cfg = TrainConfig(minibatch_size=4, max_epochs=12, seed=5)
        runs = []
        for _ in range(2):
            net = init_net((Dense(3, 8), ReLU(), Dense(8, 4)), 7)
            runs.append(train(net, (x, y), (x[:3], y[:3]), cfg))
        (f1, l1), (f2, l2) = runs
        assert l1.train_loss == l2.train_loss
        assert l1.val_loss == l2.val_loss
        for w1, w2 in zip(f1.weights, f2.weights):
            assert np.array_equal(w1, w2)

    def test_returns_best_validation_params(self):
        x, y = self._toy(4, n=12)
        net = init_net((Dense(3, 8), ReLU(), Dense(8, 4)), 2)
        fit, log = train(net, (x, y), (x[:4], y[:4]), TrainConfig(minibatch_size=4, max_epochs=30))
        # best_epoch is 1-based; 0 means the untouched input net won
        assert log.best_val <= min(log.val_loss)
        if log.best_epoch >= 1:
            assert log.val_loss[log.best_epoch - 1] == log.best_val
        got = float(np.mean(per_sample_l1(forward(fit, x[:4]), y[:4])))
        assert got == pytest.approx(log.best_val, rel=1e-9)

    def test_empty_labeled_rejected(self):
        net = init_net((Dense(3, 4),), 0)
        with pytest.raises(ValueError):
            train(net, (np.zeros((0, 3)), np.zeros((0, 4))), self._toy(0), TrainConfig())

    def test_patience_stops_early(self):
        x, y = self._toy(5, n=8)
        net = init_net((Dense(3, 8), ReLU(), Dense(8, 4)), 3)
        cfg = TrainConfig(minibatch_size=4, max_epochs=300, patience=3, seed=0)
        _, log = train(net, (x, y), (x[:2], y[:2]), cfg)
        assert log.epochs_run <= 300
        tail = log.val_loss[log.best_epoch:]
        assert len(tail) <= cfg.patience + 1 or log.epochs_run == 300


class TestWeightSums:
    def test_hand_row_sums(self):
        net = dense_net([np.array([[1.0, -2.0], [0.5, 0.5]])], [np.zeros(2)])
        assert per_layer_weight_sums(net) == [3.0]

    def test_zero_weights(self):
        net = dense_net([np.zeros((2, 2))], [np.zeros(2)])
        assert per_layer_weight_sums(net) == [0.0]

    def test_conv_kernel_sum(self):
        spec = (Conv1D(1, 1, 3), ReLU(), Dense(6, 2))
        net = init_net(spec, 0, input_dim=8)
        net.weights[0][:] = np.array([[[1.0, -1.0, 2.0]]])
        assert per_layer_weight_sums(net)[0] == 4.0

    def test_one_value_per_parameterized_layer(self):
        net = init_net(default_net_spec(10, 16), 0, input_dim=10)
        assert len(per_layer_weight_sums(net)) == len(net.weights)


class TestLipschitzPieces:
    def test_relu_nonexpansive(self):
        # |relu(a) - relu(b)|_q <= |a - b|_q through the network op itself
        net = NetParams((Dense(6, 6), ReLU()), [np.eye(6)], [np.zeros(6)])
        rng = np.random.default_rng(11)
        for _ in range(300):
            a = rng.standard_normal(6) * 3
            b = rng.standard_normal(6) * 3
            fa, fb = forward(net, a), forward(net, b)
            for q in (1, 2):
                lhs = np.linalg.norm(fa - fb, ord=q)
                rhs = np.linalg.norm(a - b, ord=q)
                assert lhs <= rhs + 1e-12

    def test_dense_layer_l1_bound(self):
        # |W(x - x~)|_1 <= alpha * |x - x~|_1 with alpha the worst row sum;
        # square and contracting shapes, where random-pair slack is large
        rng = np.random.default_rng(13)
        for shape in ((8, 8), (4, 16), (6, 6)):
            out_dim, in_dim = shape
            for trial in range(400):
                w = rng.standard_normal(shape)
                net = dense_net([w], [np.zeros(out_dim)])
                alpha = per_layer_weight_sums(net)[0]
                a = rng.standard_normal(in_dim)
                b = rng.standard_normal(in_dim)
                lhs = float(np.abs(forward(net, a) - forward(net, b)).sum())
                rhs = alpha * float(np.abs(a - b).sum())
                assert lhs <= rhs * (1 + 1e-9)

    def test_conv_layer_l1_bound(self):
        rng = np.random.default_rng(17)
        spec = (Conv1D(4, 2, 3),)
        for trial in range(400):
            net = init_net(spec, trial, input_dim=40)
            alpha = per_layer_weight_sums(net)[0]
            a = rng.standard_normal(40)
            b = rng.standard_normal(40)
            lhs = float(np.abs(forward(net, a) - forward(net, b)).sum())
            rhs = alpha * float(np.abs(a - b).sum())
            assert lhs <= rhs * (1 + 1e-9)


class TestDeterminism:
    def test_init_bitwise_reproducible(self):
        a = init_net((Dense(2, 1),), 7)
        b = init_net((Dense(2, 1),), 7)
        for w1, w2 in zip(a.weights, b.weights):
            assert np.array_equal(w1, w2)

    def test_different_seed_differs(self):
        a = init_net((Dense(8, 8),), 0)
        b = init_net((Dense(8, 8),), 1)
        assert not np.array_equal(a.weights[0], b.weights[0])

    def test_init_biases_zero_weights_bounded(self):
        net = init_net((Dense(20, 30),), 3)
        assert np.all(net.biases[0] == 0.0)
        half_width = np.sqrt(6.0 / 20)
        assert np.abs(net.weights[0]).max() <= half_width
