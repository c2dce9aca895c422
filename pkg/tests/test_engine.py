import json
import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from doccategorizer.engine import (
    Activation,
    Adam,
    AdamState,
    Concat,
    Conv1D,
    Dense,
    Dropout,
    LossKind,
    MaxOverTime,
    Network,
    activate,
    adam_step,
    conv1d_forward,
    dense_forward,
    dropout_forward,
    gradient_check,
    loss,
    max_over_time,
    sigmoid,
    softmax,
)
from doccategorizer.engine.losses import EPSILON_CLIP
from doccategorizer.errors import FormatVersionError, SequenceTooShortError, ShapeError


def _dense(W, b) -> Dense:
    layer = Dense(len(b))
    layer.params["W"] = np.asarray(W, dtype=np.float64)
    layer.params["b"] = np.asarray(b, dtype=np.float64)
    return layer


def _conv(filters, b, filter_len) -> Conv1D:
    filters = np.asarray(filters, dtype=np.float64)
    layer = Conv1D(filters.shape[0], filter_len)
    layer.params["W"] = filters
    layer.params["b"] = np.asarray(b, dtype=np.float64)
    return layer


class TestActivations:
    def test_spot_values(self):
        assert sigmoid(np.array([0.0]))[0] == 0.5
        assert_allclose(softmax(np.zeros((1, 3))), [[1 / 3, 1 / 3, 1 / 3]])
        assert_allclose(activate("leaky_relu", np.array([-2.0]), slope=0.3), [-0.6])
        assert_allclose(softmax(np.array([[1.0, 2.0, 3.0]])), [[0.09003, 0.24473, 0.66524]], atol=1e-5)

    def test_ranges_on_random_inputs(self):
        x = np.random.default_rng(0).normal(scale=20, size=(1000, 100))
        s = sigmoid(x)
        assert ((s >= 0) & (s <= 1)).all()
        assert_allclose(softmax(x).sum(axis=1), 1.0, atol=1e-6)
        assert_allclose(sigmoid(-x) + sigmoid(x), 1.0, atol=1e-7)
        assert np.isfinite(activate("tanh", x)).all()
        assert (activate("relu", x) >= 0).all()

    def test_sigmoid_does_not_overflow(self):
        out = sigmoid(np.array([-1000.0, 1000.0]))
        assert_array_equal(out, [0.0, 1.0])

    def test_softmax_needs_a_batch(self):
        with pytest.raises(ShapeError):
            softmax(np.array([1.0, 2.0]))

    def test_kind_parsing(self):
        assert_allclose(activate("LeakyReLU", np.array([-1.0])), [-0.3])
        with pytest.raises(ValueError):
            activate("swish", np.array([1.0]))


class TestLayers:
    def test_dense_forward(self):
        assert_allclose(dense_forward(_dense(np.eye(2), [0, 0]), [3, 4]), [3, 4])
        assert_allclose(dense_forward(_dense([[1, 2]], [1]), [3, 4]), [12])
        assert_allclose(dense_forward(_dense(np.zeros((2, 5)), [7, -1]), np.arange(5)), [7, -1])

    def test_dense_shape_mismatch(self):
        with pytest.raises(ShapeError):
            dense_forward(_dense([[1, 2]], [1]), [1, 2, 3])

    def test_conv1d_projection_filter(self):
        seq = np.arange(12, dtype=np.float64).reshape(4, 3)
        out = conv1d_forward(_conv([[1, 0, 0]], [0], 1), seq)
        assert_allclose(out, seq[:, :1])

    def test_conv1d_matches_windowed_dot_products(self):
        rng = np.random.default_rng(3)
        seq = rng.normal(size=(5, 2))
        layer = _conv(rng.normal(size=(4, 6)), rng.normal(size=4), 3)
        out = conv1d_forward(layer, seq)
        assert out.shape == (3, 4)
        for p in range(3):
            expected = layer.params["W"] @ seq[p:p + 3].reshape(-1) + layer.params["b"]
            assert_allclose(out[p], expected)

    def test_conv1d_zero_filter(self):
        out = conv1d_forward(_conv(np.zeros((2, 4)), [0, 0], 2), np.ones((6, 2)))
        assert_array_equal(out, np.zeros((5, 2)))

    def test_conv1d_sequence_too_short(self):
        with pytest.raises(SequenceTooShortError):
            conv1d_forward(_conv(np.zeros((1, 6)), [0], 3), np.ones((2, 2)))
        with pytest.raises(SequenceTooShortError):
            Network((2, 2)).add(Conv1D(1, 3))

    def test_max_over_time(self):
        assert_array_equal(max_over_time(np.array([[1, 5], [3, 2], [0, 4]], dtype=float)), [3, 5])
        assert_array_equal(max_over_time(np.array([[2.0, -1.0]])), [2, -1])
        assert_array_equal(max_over_time(np.full((4, 2), 7.0)), [7, 7])
        with pytest.raises(ShapeError):
            max_over_time(np.zeros((0, 3)))

    def test_max_over_time_routes_gradient_to_first_argmax(self):
        layer = MaxOverTime()
        x = np.array([[[1.0, 2.0], [3.0, 2.0], [3.0, 0.0]]])
        _, cache = layer.forward([x], True, None)
        (dx,), _ = layer.backward(np.array([[10.0, 20.0]]), cache)
        assert_array_equal(dx, [[[0, 20], [10, 0], [0, 0]]])

    def test_dropout(self):
        rng = np.random.default_rng(0)
        x = np.ones(100_000)
        assert_array_equal(dropout_forward(Dropout(0.0), x, "train", rng), x)
        assert_array_equal(dropout_forward(Dropout(0.7), x, "eval", rng), x)
        out = dropout_forward(Dropout(0.5), x, "train", np.random.default_rng(42))
        assert abs(out.mean() - 1.0) < 0.02
        assert set(np.unique(out)) == {0.0, 2.0}

    def test_dropout_rate_must_be_below_one(self):
        with pytest.raises(ValueError):
            Dropout(1.0)


class TestLosses:
    def test_spot_values(self):
        assert loss(LossKind.BINARY_CROSS_ENTROPY, [[1.0]], [[0.5]]) == pytest.approx(np.log(2))
        y = np.eye(3)
        assert 0 <= loss(LossKind.CATEGORICAL_CROSS_ENTROPY, y, y) <= -np.log(1 - EPSILON_CLIP)
        assert loss(LossKind.QUADRATIC, y, y) == 0.0

    def test_quadratic_is_half_mean_of_sums(self):
        assert loss("quadratic", [[0.0, 0.0], [1.0, 1.0]], [[1.0, 1.0], [1.0, 3.0]]) == pytest.approx(
            0.5 * (2.0 + 4.0) / 2)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            loss("quadratic", [[1.0]], [[1.0, 2.0]])

    def test_two_class_softmax_equals_single_sigmoid(self):
        rng = np.random.default_rng(5)
        z = rng.normal(scale=3, size=50)
        y1 = rng.integers(0, 2, size=50).astype(np.float64)
        binary = loss("binary_cross_entropy", y1[:, None], sigmoid(z)[:, None])
        two_class = softmax(np.stack([z, np.zeros_like(z)], axis=1))
        categorical = loss("categorical_cross_entropy", np.stack([y1, 1 - y1], axis=1), two_class)
        assert binary == pytest.approx(categorical, abs=1e-9)


def _random_network(seed: int, dtype, output: str) -> Network:
    rng = np.random.default_rng(seed)
    timesteps, dim = int(rng.integers(4, 8)), int(rng.integers(2, 5))
    activation = ["tanh", "sigmoid", "leaky_relu"][seed % 3]
    net = Network((timesteps, dim), dtype=dtype, seed=seed)
    net.add(Dropout(0.2), name="input_dropout")
    branches = []
    for i, f in enumerate(sorted(set(rng.integers(1, 4, size=2).tolist()))):
        net.add(Conv1D(int(rng.integers(2, 4)), f), inputs="input_dropout", name=f"conv{i}")
        net.add(Activation(activation), name=f"conv{i}_activation")
        branches.append(net.add(MaxOverTime(), name=f"pool{i}"))
    net.add(Concat(), inputs=branches, name="concat")
    net.add(Dense(int(rng.integers(3, 6))), name="hidden")
    net.add(Activation(activation), name="hidden_activation")
    net.add(Dense(3), name="output")
    net.add(Activation(output), name="output_activation")
    return net.build()


def _targets(seed: int, n: int, output: str) -> np.ndarray:
    rng = np.random.default_rng(seed + 100)
    if output == "softmax":
        return np.eye(3)[rng.integers(0, 3, size=n)]
    return rng.integers(0, 2, size=(n, 3)).astype(np.float64)


class TestBackward:
    @pytest.mark.parametrize("seed", range(20))
    @pytest.mark.parametrize("precision,tolerance", [(np.float32, 1e-3), (np.float64, 1e-6)])
    def test_gradient_check(self, seed, precision, tolerance):
        output = "softmax" if seed % 2 == 0 else "sigmoid"
        kind = "categorical_cross_entropy" if output == "softmax" else "binary_cross_entropy"
        net = _random_network(seed, precision, output)
        x = np.random.default_rng(seed + 200).normal(size=(4,) + net.input_shape)
        net.train()
        with net.freeze_dropout():
            assert gradient_check(net, x, _targets(seed, 4, output), kind) < tolerance

    def test_linear_quadratic_network_is_exact(self):
        net = Network((4,), dtype=np.float64, seed=1)
        net.add(Dense(3))
        net.build()
        x = np.random.default_rng(0).normal(size=(6, 4))
        y = np.random.default_rng(1).normal(size=(6, 3))
        assert gradient_check(net, x, y, "quadratic") < 1e-9

    def test_zero_weight_dense_quadratic(self):
        net = Network((2,), dtype=np.float64)
        net.add(Dense(2), name="dense")
        net.build()
        net.nodes["dense"].layer.params["W"][:] = 0.0
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        y = np.array([[1.0, 0.0], [0.0, 1.0]])
        _, grads = net.backward(x, y, "quadratic")
        # a = 0, so dE/dW = mean over samples of (a - y) x^T
        assert_allclose(grads["dense.W"], (-y).T @ x / 2)
        assert_allclose(grads["dense.b"], (-y).sum(axis=0) / 2)

    def test_logistic_gradient_closed_form(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(20, 5))
        y = rng.integers(0, 2, size=(20, 1)).astype(np.float64)
        net = Network((5,), dtype=np.float64, seed=3)
        net.add(Dense(1), name="dense")
        net.add(Activation("sigmoid"), name="out")
        net.build()
        _, grads = net.backward(x, y, "binary_cross_entropy")
        a = net.forward(x)
        assert_allclose(grads["dense.W"][0], np.mean(x * (a - y), axis=0), atol=1e-9)

    def test_loss_must_match_output_activation(self):
        net = Network((3,))
        net.add(Dense(2))
        net.add(Activation("sigmoid"))
        net.build()
        with pytest.raises(ShapeError):
            net.backward(np.ones((1, 3)), np.array([[1.0, 0.0]]), "categorical_cross_entropy")


class TestAdam:
    def test_first_step_moves_by_learning_rate(self):
        params = {"w": np.array([1.0, -1.0, 0.5])}
        state = adam_step(AdamState(alpha=0.01), params, {"w": np.array([2.0, -3.0, 0.1])})
        assert state.step == 1
        assert_allclose(params["w"], [0.99, -0.99, 0.49], atol=1e-6)

    def test_zero_gradient_changes_nothing(self):
        params = {"w": np.array([1.0, 2.0])}
        adam_step(AdamState(), params, {"w": np.zeros(2)})
        assert_array_equal(params["w"], [1.0, 2.0])

    def test_training_is_deterministic(self):
        def run():
            net = _random_network(4, np.float32, "softmax")
            optimizer = Adam()
            x = np.random.default_rng(1).normal(size=(8,) + net.input_shape)
            for _ in range(3):
                net.train_on_batch(x, _targets(4, 8, "softmax"), "categorical_cross_entropy", optimizer)
            return net.parameters()

        first, second = run(), run()
        for key in first:
            assert_array_equal(first[key], second[key])


class TestPersistence:
    def test_save_load_round_trip(self, tmp_path):
        net = _random_network(2, np.float32, "softmax")
        x = np.random.default_rng(0).normal(size=(5,) + net.input_shape)
        net.save(str(tmp_path / "net"))
        loaded = Network.load(str(tmp_path / "net"))
        assert loaded.count_params() == net.count_params()
        assert_allclose(loaded.predict(x), net.predict(x), atol=1e-6)

    def test_predict_ignores_dropout(self):
        net = _random_network(6, np.float64, "sigmoid").train()
        x = np.random.default_rng(0).normal(size=(3,) + net.input_shape)
        assert_array_equal(net.predict(x), net.predict(x))

    def test_unknown_layer_type_is_a_format_error(self, tmp_path):
        directory = tmp_path / "net"
        _random_network(2, np.float32, "softmax").save(str(directory))
        descriptor = json.loads((directory / "network.json").read_text(encoding="utf-8"))
        descriptor["nodes"][0]["type"] = "lstm"
        (directory / "network.json").write_text(json.dumps(descriptor), encoding="utf-8")
        with pytest.raises(FormatVersionError, match="unknown layer type 'lstm'"):
            Network.load(str(directory))
