import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given
from hypothesis import strategies as st

from neo_ensemble.errors import ConfigError, DataError
from neo_ensemble.nn import (
    AdamState,
    FfnnModel,
    LstmLayer,
    LstmState,
    RnnModel,
    TrainConfig,
    backward,
    bce_loss,
    classify,
    ffnn_forward,
    init_model,
    init_rnn,
    lstm_step,
    optimizer_step,
    rnn_forward,
    sigmoid,
    train,
)

from oracles import lstm_reference, max_relative_error, numeric_grads


def zero_lstm(n_in, H):
    return LstmLayer(np.zeros((4 * H, n_in)), np.zeros((4 * H, H)), np.zeros(4 * H))


class TestFunctional:
    def test_sigmoid_values(self):
        assert sigmoid(0.0) == 0.5
        assert 0.0 < sigmoid(1000.0) <= 1.0
        assert 0.0 <= sigmoid(-1000.0) < 1.0

    @given(st.floats(-50, 50))
    def test_sigmoid_symmetry(self, x):
        assert abs(sigmoid(x) + sigmoid(-x) - 1.0) < 1e-15

    def test_bce(self):
        npt.assert_allclose(bce_loss(0.5, 1), np.log(2.0), rtol=1e-15)
        assert bce_loss(1.0 - 1e-12, 1) < 1e-11
        assert bce_loss(1.0, 1) >= 0.0
        assert np.isfinite(bce_loss(0.0, 1))

    @given(st.floats(1e-6, 1 - 1e-6))
    def test_bce_symmetry(self, p):
        npt.assert_allclose(bce_loss(p, 1), bce_loss(1 - p, 0), rtol=1e-9)
        assert bce_loss(p, 0) >= 0.0

    @pytest.mark.parametrize("p, want", [(0.5, 1), (0.49, 0), (1.0, 1), (0.0, 0)])
    def test_classify(self, p, want):
        assert classify(p) == want


class TestInit:
    def test_shapes(self):
        m = init_model([8, 16, 32, 1], seed=0)
        assert [w.shape for w in m.weights] == [(16, 8), (32, 16), (1, 32)]

    def test_biases_zero(self):
        m = init_model([8, 16, 32, 1], seed=0)
        assert all(np.all(b == 0.0) for b in m.biases)
        r = init_model([35, 32, 32, 1], seed=0, kind="rnn")
        assert all(np.all(l.b == 0.0) for l in r.layers)

    def test_glorot_bounds(self):
        m = init_model([8, 16, 32, 1], seed=3)
        for w in m.weights:
            fan_out, fan_in = w.shape
            assert np.abs(w).max() <= np.sqrt(6.0 / (fan_in + fan_out))

    def test_deterministic(self):
        a, b = init_model([8, 4, 1], seed=5), init_model([8, 4, 1], seed=5)
        for p, q in zip(a.params, b.params):
            npt.assert_array_equal(p, q)

    @pytest.mark.parametrize("arch", [[8, 0, 1], [8, -2, 1], [8, 4, 2]])
    def test_bad_arch(self, arch):
        with pytest.raises(ConfigError):
            init_model(arch)


class TestFfnn:
    def test_zero_weights(self):
        m = FfnnModel([3, 2, 1], [np.zeros((2, 3)), np.zeros((1, 2))], [np.zeros(2), np.zeros(1)])
        assert ffnn_forward(m, [1.0, 2.0, 3.0]) == 0.5

    def test_hand_computed(self):
        # one hidden unit: relu(2*1 - 1*2 + 0.5) = 0.5, then 3*0.5 - 1 = 0.5
        m = FfnnModel([2, 1, 1], [np.array([[2.0, -1.0]]), np.array([[3.0]])], [np.array([0.5]), np.array([-1.0])])
        npt.assert_allclose(ffnn_forward(m, [1.0, 2.0]), 1.0 / (1.0 + np.exp(-0.5)), rtol=1e-15)

    def test_range(self, rng):
        m = init_model([8, 16, 32, 1], seed=1)
        p = m.forward(rng.normal(size=(200, 8)) * 10)
        assert np.all((p > 0) & (p < 1))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            ffnn_forward(init_model([8, 4, 1]), np.zeros(7))

    @pytest.mark.parametrize("seed", range(3))
    def test_gradients(self, seed):
        rng = np.random.default_rng(seed)
        m = init_model([8, 4, 1], seed=seed)
        for b in m.biases:
            b[...] = rng.normal(size=b.shape) * 0.1
        X, y = rng.normal(size=(16, 8)), rng.integers(0, 2, 16)
        num = numeric_grads(lambda: m.loss_and_grads(X, y)[0], m.params)
        assert max_relative_error(backward(m, X, y), num) < 1e-4


class TestLstmStep:
    def test_zero_params_zero_state(self):
        s = lstm_step(zero_lstm(3, 2), np.ones(3), LstmState(np.zeros(2), np.zeros(2)))
        npt.assert_array_equal(s.c, 0.0)
        npt.assert_array_equal(s.h, 0.0)

    def test_zero_params_carry(self):
        c0 = np.array([1.0, -2.0])
        s = lstm_step(zero_lstm(3, 2), np.ones(3), LstmState(np.zeros(2), c0))
        npt.assert_allclose(s.c, 0.5 * c0, rtol=1e-15)
        npt.assert_allclose(s.h, 0.5 * np.tanh(0.5 * c0), rtol=1e-15)

    def test_matches_reference_gates(self, rng):
        layer = LstmLayer(rng.normal(size=(12, 4)), rng.normal(size=(12, 3)), rng.normal(size=12))
        x, h, c = rng.normal(size=4), rng.normal(size=3), rng.normal(size=3)
        W = {g: layer.gate(g) for g in "fioc"}
        gate = {g: W[g][0] @ x + W[g][1] @ h + W[g][2] for g in "fioc"}
        f, i, o = (1 / (1 + np.exp(-gate[g])) for g in "fio")
        assert all(np.all((v > 0) & (v < 1)) for v in (f, i, o))
        c_new = f * c + i * np.tanh(gate["c"])
        s = lstm_step(layer, x, LstmState(h, c))
        npt.assert_allclose(s.c, c_new, rtol=1e-12)
        npt.assert_allclose(s.h, o * np.tanh(c_new), rtol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            lstm_step(zero_lstm(3, 2), np.ones(4), LstmState(np.zeros(2), np.zeros(2)))


def as_reference(m):
    layers = []
    for l in m.layers:
        d = {}
        for g in "fioc":
            d[f"W_{g}"], d[f"U_{g}"], d[f"b_{g}"] = l.gate(g)
        layers.append(d)
    return layers


class TestRnn:
    def test_zero_params(self, rng):
        m = RnnModel([zero_lstm(5, 2)], np.zeros((1, 2)), np.zeros(1))
        assert rnn_forward(m, rng.normal(size=(6, 5))) == 0.5

    def test_matches_reference(self, rng):
        m = init_rnn([5, 4, 3, 1], seed=2)
        for l in m.layers:
            l.b[...] = rng.normal(size=l.b.shape) * 0.3
        seq = rng.normal(size=(7, 5))
        want = lstm_reference(as_reference(m), m.readout_W[0], m.readout_b[0], seq)
        npt.assert_allclose(rnn_forward(m, seq), want, rtol=1e-12)

    def test_single_step(self, rng):
        m = init_rnn([3, 2, 2, 1], seed=4)
        x = rng.normal(size=3)
        zero = LstmState(np.zeros(2), np.zeros(2))
        h2 = lstm_step(m.layers[1], lstm_step(m.layers[0], x, zero).h, zero).h
        want = sigmoid(float(m.readout_W[0] @ h2 + m.readout_b[0]))
        npt.assert_allclose(rnn_forward(m, x[None, :]), want, rtol=1e-14)

    def test_padding_invariance(self, rng):
        m = init_rnn([5, 4, 4, 1], seed=1)
        seq = rng.normal(size=(6, 5))
        padded = np.vstack([seq, np.ones((9, 5))])
        assert rnn_forward(m, padded, valid_len=6) == rnn_forward(m, seq)

    def test_batch_matches_single(self, rng):
        m = init_rnn([5, 4, 4, 1], seed=1)
        X = rng.normal(size=(9, 8, 5))
        L = rng.integers(1, 9, size=9)
        batch = m.forward(X, L)
        single = [rnn_forward(m, X[k], valid_len=L[k]) for k in range(9)]
        npt.assert_array_equal(batch, single)

    def test_empty_sequence(self):
        m = init_rnn([5, 4, 1])
        with pytest.raises(ValueError):
            rnn_forward(m, np.zeros((0, 5)))
        with pytest.raises(ValueError):
            m.loss_and_grads((np.zeros((2, 3, 5)), np.array([3, 0])), np.array([0, 1]))

    @pytest.mark.parametrize("seed", range(3))
    def test_gradients(self, seed):
        rng = np.random.default_rng(seed)
        m = init_rnn([4, 3, 1], seed=seed)
        m.layers[0].b[...] = rng.normal(size=12) * 0.3
        X, y = rng.normal(size=(5, 4, 4)), rng.integers(0, 2, 5)
        L = np.array([4, 4, 2, 3, 1])
        num = numeric_grads(lambda: m.loss_and_grads((X, L), y)[0], m.params)
        assert max_relative_error(backward(m, (X, L), y), num) < 1e-4

    def test_gradients_stacked(self, rng):
        m = init_rnn([3, 3, 2, 1], seed=9)
        X, y = rng.normal(size=(4, 5, 3)), np.array([0, 1, 1, 0])
        L = np.array([5, 2, 4, 1])
        num = numeric_grads(lambda: m.loss_and_grads((X, L), y)[0], m.params)
        assert max_relative_error(backward(m, (X, L), y), num) < 1e-4


class TestOptim:
    def test_sgd(self):
        p = [np.array([1.0])]
        optimizer_step(p, [np.array([1.0])], None, TrainConfig(optimizer="sgd"))
        npt.assert_allclose(p[0], [0.999], rtol=1e-15)

    def test_adam_zero_grad(self):
        p = [np.array([1.0, -2.0])]
        optimizer_step(p, [np.zeros(2)], None, TrainConfig(optimizer="adam"))
        npt.assert_array_equal(p[0], [1.0, -2.0])

    @pytest.mark.parametrize("c", [3.0, -0.2, 1e-3])
    def test_adam_first_step(self, c):
        cfg = TrainConfig(optimizer="adam")
        p = [np.array([0.0])]
        optimizer_step(p, [np.array([c])], None, cfg)
        npt.assert_allclose(p[0], [-cfg.learning_rate * c / (abs(c) + cfg.eps)], rtol=1e-12)

    def test_adam_state_advances(self):
        p = [np.zeros(2)]
        _, st = optimizer_step(p, [np.ones(2)], None, TrainConfig(optimizer="adam"))
        optimizer_step(p, [np.ones(2)], st, TrainConfig(optimizer="adam"))
        assert st.t == 2

    def test_schedule(self):
        cfg = TrainConfig(epochs=5)
        assert [cfg.method_for_epoch(e) for e in range(5)] == ["adam"] * 3 + ["sgd"] * 2
        cfg = TrainConfig(epochs=4, switch_epoch=1)
        assert [cfg.method_for_epoch(e) for e in range(4)] == ["adam", "sgd", "sgd", "sgd"]

    def test_schedule_uses_sgd_after_switch(self):
        cfg = TrainConfig(epochs=2, switch_epoch=1)
        p = [np.array([1.0])]
        st = AdamState.for_params(p)
        optimizer_step(p, [np.array([1.0])], st, cfg, epoch=1)
        npt.assert_allclose(p[0], [0.999], rtol=1e-15)
        assert st.t == 0

    @pytest.mark.parametrize("kw", [{"learning_rate": 0}, {"batch_size": 0}, {"epochs": 0}, {"optimizer": "rmsprop"}])
    def test_config_validation(self, kw):
        with pytest.raises(ConfigError):
            TrainConfig(**kw)


class TestTrain:
    def test_two_points(self):
        X = np.array([[1.0, 0, 0, 0, 0, 0, 0, 0], [-1.0, 0, 0, 0, 0, 0, 0, 0]])
        y = np.array([1, 0])
        cfg = TrainConfig(learning_rate=0.05, batch_size=2, epochs=200, optimizer="adam")
        _, hist = train(init_model([8, 4, 1], seed=0), X, y, cfg)
        assert len(hist.loss) == 200
        assert hist.loss[-1] < 0.01

    def test_deterministic(self, rng):
        X, y = rng.normal(size=(120, 8)), rng.integers(0, 2, 120)
        cfg = TrainConfig(epochs=3, batch_size=32, seed=4)
        a, ha = train(init_model([8, 4, 1], seed=1), X, y, cfg)
        b, hb = train(init_model([8, 4, 1], seed=1), X, y, cfg)
        assert ha.loss == hb.loss
        for p, q in zip(a.params, b.params):
            npt.assert_array_equal(p, q)

    def test_does_not_mutate_input_model(self, rng):
        m = init_model([8, 4, 1], seed=1)
        before = [p.copy() for p in m.params]
        train(m, rng.normal(size=(10, 8)), rng.integers(0, 2, 10), TrainConfig(epochs=1))
        for p, q in zip(m.params, before):
            npt.assert_array_equal(p, q)

    def test_rnn_trains(self, rng):
        X = rng.normal(size=(40, 5, 3))
        y = (X[:, 0, 0] > 0).astype(int)
        cfg = TrainConfig(epochs=30, batch_size=10, learning_rate=0.02, optimizer="adam")
        _, hist = train(init_rnn([3, 4, 1], seed=0), (X, np.full(40, 5)), y, cfg)
        assert hist.loss[-1] < 0.5 * hist.loss[0]

    def test_single_class_warning(self, rng):
        _, hist = train(init_model([8, 4, 1]), rng.normal(size=(10, 8)), np.zeros(10), TrainConfig(epochs=2))
        assert hist.warnings == ["single-class training data"]
        assert len(hist.loss) == 2

    def test_rejects_bad_labels(self, rng):
        with pytest.raises(DataError):
            train(init_model([8, 4, 1]), rng.normal(size=(4, 8)), np.array([0, 1, 2, 1]), TrainConfig(epochs=1))

    def test_imbalanced_plateau(self, rng):
        # uninformative features at a 1% base rate: the best the net can do is the constant predictor
        n = 5000
        X = rng.normal(size=(n, 8))
        y = (rng.random(n) < 0.01).astype(int)
        p_bar = y.mean()
        base = -(p_bar * np.log(p_bar) + (1 - p_bar) * np.log(1 - p_bar))
        m, hist = train(init_model([8, 16, 32, 1], seed=0), X, y, TrainConfig(epochs=20))
        assert abs(hist.loss[-1] - base) < 0.1 * base
        assert np.all(m.forward(X) < 0.5)
