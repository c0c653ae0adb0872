import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given
from hypothesis import strategies as st

from neo_ensemble import metrics
from neo_ensemble.ensemble import EnsembleConfig, PreparedRecord, aggregate, predict, predict_batch
from neo_ensemble.errors import ConfigError
from neo_ensemble.nn import FfnnModel, LstmLayer, RnnModel, init_ffnn, init_rnn

prob = st.floats(0.0, 1.0)


def constant_models(p_f=0.5, p_r=0.5):
    """Branches whose output is fixed by the readout bias alone."""
    logit = lambda p: np.log(p / (1 - p))
    ffnn = FfnnModel([8, 1], [np.zeros((1, 8))], [np.array([logit(p_f)])])
    layer = LstmLayer(np.zeros((8, 3)), np.zeros((8, 2)), np.zeros(8))
    rnn = RnnModel([layer], np.zeros((1, 2)), np.array([logit(p_r)]))
    return ffnn, rnn


def record(rng):
    return PreparedRecord(rng.normal(size=8), rng.normal(size=(5, 3)), 5)


class TestAggregate:
    def test_equal(self):
        assert aggregate(0.9, 0.9) == 0.9

    def test_average(self):
        assert aggregate(0.6, 0.2) == pytest.approx(0.4, abs=1e-15)

    @given(prob, st.floats(0.0, 1.0))
    def test_same_input(self, p, w):
        assert aggregate(p, p, EnsembleConfig((w, 1.0 - w))) == p

    @given(prob, prob, st.floats(0.0, 1.0))
    def test_bounded(self, a, b, w):
        out = aggregate(a, b, EnsembleConfig((w, 1.0 - w)))
        assert min(a, b) <= out <= max(a, b)

    @given(prob, prob, prob)
    def test_monotone(self, a, b, c):
        lo, hi = min(a, b), max(a, b)
        assert aggregate(lo, c) <= aggregate(hi, c)
        assert aggregate(c, lo) <= aggregate(c, hi)

    @pytest.mark.parametrize("a, b", [(1.1, 0.5), (0.5, -0.01)])
    def test_out_of_range(self, a, b):
        with pytest.raises(ValueError):
            aggregate(a, b)

    def test_arrays(self):
        npt.assert_allclose(aggregate(np.array([0.2, 1.0]), np.array([0.4, 0.0])), [0.3, 0.5])


class TestConfig:
    @pytest.mark.parametrize("w", [(0.6, 0.6), (1.2, -0.2), (1.0,)])
    def test_bad_weights(self, w):
        with pytest.raises(ConfigError):
            EnsembleConfig(w)

    @pytest.mark.parametrize("t", [0.0, 1.0, -0.5])
    def test_bad_threshold(self, t):
        with pytest.raises(ConfigError):
            EnsembleConfig(threshold=t)

    def test_round_trip(self):
        c = EnsembleConfig((0.3, 0.7), 0.4)
        assert EnsembleConfig.from_dict(c.to_dict()) == c


class TestPredict:
    def test_both_half(self, rng):
        f, r = constant_models(0.5, 0.5)
        p, label = predict(f, r, record(rng))
        assert p == 0.5 and label == 1

    def test_opposite_branches(self, rng):
        # saturated logits stand in for outputs of exactly 1 and 0
        f = FfnnModel([8, 1], [np.zeros((1, 8))], [np.array([800.0])])
        r = RnnModel([LstmLayer(np.zeros((8, 3)), np.zeros((8, 2)), np.zeros(8))], np.zeros((1, 2)), np.array([-800.0]))
        p, label = predict(f, r, record(rng))
        assert p == 0.5 and label == 1

    def test_ffnn_only_weights(self, rng):
        f, r = init_ffnn([8, 4, 1], seed=1), init_rnn([3, 2, 1], seed=2)
        rec = record(rng)
        p, _ = predict(f, r, rec, EnsembleConfig((1.0, 0.0)))
        assert p == f.forward(rec.numeric[None, :])[0]

    def test_deterministic(self, rng):
        f, r = init_ffnn([8, 4, 1], seed=1), init_rnn([3, 2, 1], seed=2)
        rec = record(rng)
        assert predict(f, r, rec) == predict(f, r, rec)

    def test_degenerate_weights_reports(self, rng):
        pf, pr = rng.random(200), rng.random(200)
        y = rng.integers(0, 2, 200)
        for w, branch in (((1.0, 0.0), pf), ((0.0, 1.0), pr)):
            p, _ = predict_batch(pf, pr, EnsembleConfig(w))
            assert metrics.evaluate(p, y) == metrics.evaluate(branch, y)
