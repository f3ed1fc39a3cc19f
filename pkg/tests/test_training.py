import math

import numpy as np
import pytest

from nbp.channel import sigma_from_ebn0
from nbp.neural_bp import FF, RNN, WeightSet, forward
from nbp.training import (
    PRESETS,
    GradientSet,
    OptimizerState,
    TrainConfig,
    TrainingError,
    backward,
    evaluate_loss,
    generate_batch,
    loss_last,
    loss_multi,
    rmsprop_step,
    trace_loss,
    train,
)
from nbp.tanner import build

from conftest import fd_max_rel_error, load_code, random_h


class TestLosses:
    def test_half_probabilities(self):
        assert loss_last(np.full(63, 0.5), np.zeros(63)) == pytest.approx(math.log(2), abs=1e-15)
        assert loss_multi([np.full(63, 0.5)] * 5, np.zeros(63)) == pytest.approx(5 * math.log(2), abs=1e-12)

    def test_perfect_prediction(self):
        y = np.array([0.0, 1.0, 1.0, 0.0])
        assert loss_last(y, y) == pytest.approx(0.0, abs=1e-11)

    def test_single_step_multi_equals_last(self):
        rng = np.random.default_rng(0)
        o, y = rng.uniform(0.01, 0.99, (4, 9)), rng.integers(0, 2, (4, 9))
        assert loss_multi([o], y) == loss_last(o, y)

    def test_scalar_oracle(self):
        rng = np.random.default_rng(1)
        o = rng.uniform(1e-6, 1 - 1e-6, 50)
        y = rng.integers(0, 2, 50)
        expected = -sum(math.log(p) if t else math.log(1 - p) for p, t in zip(o, y)) / 50
        assert loss_last(o, y) == pytest.approx(expected, abs=1e-12)

    def test_batch_mean(self):
        o = np.array([[0.5, 0.5], [0.25, 0.25]])
        assert loss_last(o, np.zeros((2, 2))) == pytest.approx((math.log(2) - math.log(0.75)) / 2)

    def test_rejects_non_probabilities(self):
        with pytest.raises(ValueError):
            loss_last(np.array([1.2, 0.5]), np.zeros(2))
        with pytest.raises(ValueError):
            loss_last(np.array([np.nan]), np.zeros(1))
        with pytest.raises(ValueError):
            loss_multi([], np.zeros(1))


class TestBatches:
    def test_shapes(self):
        code = load_code("bch63_45")
        llr, y = generate_batch(code, 120, range(1, 9), np.random.default_rng(0))
        assert llr.shape == (120, 63) and y.shape == (120, 63) and not y.any()

    def test_balanced_round_robin(self):
        code = load_code("bch63_45")
        # grid points 10 dB apart so each row's SNR can be read back from its LLR scale
        grid = np.arange(10.0, 90.0, 10.0)
        for size in (120, 50, 7):
            llr, _ = generate_batch(code, size, grid, np.random.default_rng(1))
            level = np.rint(np.log10(-llr.mean(axis=1) / (4 * code.rate)))  # = snr_db / 10
            counts = np.unique(level, return_counts=True)[1]
            assert counts.sum() == size and len(counts) == min(size, 8)
            assert counts.max() - counts.min() <= 1

    def test_high_snr_rows(self):
        code = load_code("bch63_45")
        llr, _ = generate_batch(code, 2, [60.0], np.random.default_rng(2))
        s = sigma_from_ebn0(60.0, code.rate)
        np.testing.assert_allclose(llr, -2 / s**2, rtol=1e-2)

    def test_snr_follows_grid(self):
        code = load_code("bch63_45")
        llr, _ = generate_batch(code, 4000, [1.0, 8.0], np.random.default_rng(3))
        for j, snr in enumerate((1.0, 8.0)):
            s = sigma_from_ebn0(snr, code.rate)
            assert llr[j::2].mean() == pytest.approx(-2 / s**2, rel=0.01)

    def test_empty_grid(self):
        with pytest.raises(ValueError):
            generate_batch(load_code("bch63_45"), 3, [], np.random.default_rng(0))


def _random_problem(seed, variant, T, edges=15):
    rng = np.random.default_rng(seed)
    g = build(random_h(rng, 4, 8, ones=edges))
    w = WeightSet.unit(g, variant, T)
    for arr in w.params().values():
        arr += 0.4 * rng.standard_normal(arr.shape)
    llr = rng.normal(-1.0, 1.5, (3, 8))
    return g, w, llr


class TestBackward:
    @pytest.mark.parametrize("variant", [FF, RNN])
    @pytest.mark.parametrize("multiloss", [False, True])
    def test_finite_differences(self, variant, multiloss):
        g, w, llr = _random_problem(11, variant, 3)
        assert g.e_total == 15
        assert fd_max_rel_error(g, llr, np.zeros_like(llr), w, 3, multiloss) < 1e-4

    def test_finite_differences_ten_edges(self):
        g, w, llr = _random_problem(12, RNN, 2, edges=10)
        assert fd_max_rel_error(g, llr, np.zeros_like(llr), w, 2, False) < 1e-4

    def test_nonzero_targets(self):
        g, w, llr = _random_problem(13, FF, 2)
        y = np.random.default_rng(0).integers(0, 2, llr.shape)
        assert fd_max_rel_error(g, llr, y, w, 2, True) < 1e-4

    def test_symmetric_zero_input(self, bch63_36_graph):
        g = bch63_36_graph
        w = WeightSet.unit(g, RNN, 5)
        l = np.zeros((2, 63))
        gr = backward(g, forward(g, l, w, multiloss_outputs=True), np.zeros_like(l), True)
        assert not gr.w_edge.any()

    def test_ff_and_rnn_agree_for_one_step(self):
        g, r, llr = _random_problem(14, RNN, 1)
        f = WeightSet(FF, 1, r.w_edge, r.w_out_v, r.w_out_edge)
        y = np.zeros_like(llr)
        a = backward(g, forward(g, llr, r), y, False).params()
        b = backward(g, forward(g, llr, f), y, False).params()
        for name in a:
            np.testing.assert_array_equal(a[name], b[name])

    def test_clipped_values_pass_no_gradient(self):
        g, w, _ = _random_problem(15, RNN, 2)
        llr = np.full((1, 8), -50.0)  # every variable pre-activation saturates
        gr = backward(g, forward(g, llr, w, 2), np.zeros_like(llr), False)
        assert not gr.w_edge.any()

    def test_needs_recorded_taps(self):
        g, w, llr = _random_problem(16, RNN, 3)
        with pytest.raises(ValueError):
            backward(g, forward(g, llr, w, 3), np.zeros_like(llr), True)


class TestRmsprop:
    def _scalar(self, w0):
        return WeightSet(RNN, 1, [[w0]], [[1.0]], [[1.0]])

    def test_zero_gradient(self):
        w = self._scalar(0.7)
        zero = GradientSet(*(np.zeros_like(a) for a in w.params().values()))
        new, state = rmsprop_step(w, zero, OptimizerState.zeros_like(w), 0.01)
        for name in w.params():
            np.testing.assert_array_equal(new.params()[name], w.params()[name])

    def test_two_steps_by_hand(self):
        lr, gamma, eps = 0.01, 0.9, 1e-8
        w = self._scalar(1.0)
        state = OptimizerState.zeros_like(w)
        expected, r = 1.0, 0.0
        for g in (0.5, -2.0):
            grads = GradientSet(np.array([[g]]), np.zeros((1, 1)), np.zeros((1, 1)))
            w, state = rmsprop_step(w, grads, state, lr, gamma, eps)
            r = gamma * r + (1 - gamma) * g * g
            expected -= lr * g / math.sqrt(r + eps)
        assert w.w_edge[0, 0] == pytest.approx(expected, abs=1e-12)
        assert state.r["w_edge"][0, 0] == pytest.approx(r, abs=1e-15)

    def test_first_step_size(self):
        w = self._scalar(0.0)
        grads = GradientSet(np.array([[3.0]]), np.zeros((1, 1)), np.zeros((1, 1)))
        new, _ = rmsprop_step(w, grads, OptimizerState.zeros_like(w), 0.001)
        assert new.w_edge[0, 0] == pytest.approx(-0.001 / math.sqrt(0.1), rel=1e-6)

    def test_input_not_mutated(self):
        w = self._scalar(1.0)
        grads = GradientSet(np.ones((1, 1)), np.ones((1, 1)), np.ones((1, 1)))
        rmsprop_step(w, grads, OptimizerState.zeros_like(w), 0.1)
        assert w.w_edge[0, 0] == 1.0

    def test_shape_mismatch(self):
        w = self._scalar(1.0)
        grads = GradientSet(np.ones((1, 2)), np.ones((1, 1)), np.ones((1, 1)))
        with pytest.raises(ValueError):
            rmsprop_step(w, grads, OptimizerState.zeros_like(w), 0.1)


class TestConfig:
    def test_presets(self):
        assert PRESETS == {"n63": (120, 0.001), "127_99": (80, 0.0003), "127_64": (40, 0.003)}
        cfg = TrainConfig.preset("127_64", steps=5)
        assert (cfg.batch_size, cfg.learning_rate, cfg.steps) == (40, 0.003, 5)
        with pytest.raises(ValueError):
            TrainConfig.preset("n255")

    @pytest.mark.parametrize("kw", [{"batch_size": 0}, {"learning_rate": 0.0}, {"rms_decay": 1.0},
                                    {"snr_grid_db": ()}])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            TrainConfig(**kw)


class TestTrain:
    @pytest.fixture(scope="class")
    @classmethod
    def short_run(cls):
        code = load_code("bch63_45")
        g = build(code.h)
        cfg = TrainConfig(steps=300, log_every=50, seed=3)
        return code, g, cfg, train(code, g, cfg)

    def test_zero_steps_returns_unit_weights(self, hamming, hamming_graph):
        res = train(hamming, hamming_graph, TrainConfig(steps=0))
        unit = WeightSet.unit(hamming_graph)
        for name, arr in unit.params().items():
            np.testing.assert_array_equal(res.weights.params()[name], arr)
        assert res.log == []

    def test_deterministic(self, hamming, hamming_graph):
        cfg = TrainConfig(steps=20, batch_size=16, log_every=5, seed=9)
        a, b = train(hamming, hamming_graph, cfg), train(hamming, hamming_graph, cfg)
        assert a.log == b.log
        for name, arr in a.weights.params().items():
            np.testing.assert_array_equal(b.weights.params()[name], arr)

    def test_log_file_and_snapshots(self, tmp_path, hamming, hamming_graph):
        cfg = TrainConfig(steps=6, batch_size=8, log_every=2, snapshot_every=4)
        res = train(hamming, hamming_graph, cfg, log_path=tmp_path / "log.txt", snapshot_dir=tmp_path)
        lines = (tmp_path / "log.txt").read_text().splitlines()
        assert [int(x.split(",")[0]) for x in lines] == [2, 4, 6]
        assert lines[1].split(", ")[2].endswith("step0000004.nbp")
        assert (tmp_path / "step0000004.nbp").exists()
        assert len(res.log) == 3

    def test_divergence_is_reported(self, hamming, hamming_graph):
        w = WeightSet.unit(hamming_graph)
        w.w_out_v[:] = np.nan
        with pytest.raises((TrainingError, ValueError)):
            train(hamming, hamming_graph, TrainConfig(steps=2, batch_size=4), initial=w)

    def test_validation_not_worse_than_init(self, short_run):
        code, g, cfg, res = short_run
        unit = WeightSet.unit(g)
        diffs = []
        rng = np.random.default_rng(100)
        for _ in range(50):
            llr, y = generate_batch(code, cfg.batch_size, cfg.snr_grid_db, rng)
            a = forward(g, llr, res.weights, multiloss_outputs=True)
            b = forward(g, llr, unit, multiloss_outputs=True)
            diffs.append(trace_loss(a, y, True) - trace_loss(b, y, True))
        diffs = np.array(diffs)
        assert diffs.mean() + 1.96 * diffs.std(ddof=1) / np.sqrt(50) < 0

    def test_validation_close_to_training(self, short_run):
        code, g, cfg, res = short_run
        train_loss = np.mean([loss for _, loss, _ in res.log[-3:]])
        val = evaluate_loss(code, g, res.weights, cfg, np.random.default_rng(7), batches=20)
        assert val <= 1.05 * train_loss
