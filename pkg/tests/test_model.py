"""nn core: init, forward vs scalar oracle, backward vs finite
differences, dropout semantics, Adam, serialization."""

import numpy as np
import pytest

from irloss.errors import CheckpointError, InvalidArgumentError, ShapeError
from irloss.model import (
    AdamState,
    Gradients,
    ModelParams,
    LstmLayerParams,
    adam_step,
    backward,
    backward_batch,
    forward,
    forward_batch,
    init_params,
    load_model,
    params_digest,
    params_from_bytes,
    params_to_bytes,
    save_model,
)
from reference_lstm import model_forward_scalar


class TestInit:
    def test_shapes_and_forget_bias(self):
        p = init_params([(4, 8)], 4, seed=7)
        assert p.layer_sizes == ((4, 8),)
        assert p.layers[0].wx.shape == (32, 4)
        assert p.layers[0].wh.shape == (32, 8)
        assert p.layers[0].b.shape == (32,)
        assert p.w_out.shape == (4, 8)
        assert p.b_out.shape == (4,)
        # forget-gate slice starts at 1.0, the rest at 0
        b = p.layers[0].b
        assert np.all(b[8:16] == 1.0)
        assert np.all(b[:8] == 0.0) and np.all(b[16:] == 0.0)

    def test_same_seed_bit_identical(self):
        a = init_params([(4, 8), (8, 5)], 4, seed=7)
        b = init_params([(4, 8), (8, 5)], 4, seed=7)
        assert params_to_bytes(a) == params_to_bytes(b)

    def test_different_seed_differs(self):
        a = init_params([(4, 8)], 4, seed=7)
        b = init_params([(4, 8)], 4, seed=8)
        assert params_to_bytes(a) != params_to_bytes(b)

    def test_zero_dimension_rejected(self):
        with pytest.raises(InvalidArgumentError):
            init_params([(4, 0)], 4, seed=1)
        with pytest.raises(InvalidArgumentError):
            init_params([], 4, seed=1)
        with pytest.raises(InvalidArgumentError):
            init_params([(4, 8)], 0, seed=1)

    def test_mismatched_layer_chain_rejected(self):
        with pytest.raises(InvalidArgumentError):
            init_params([(4, 8), (9, 5)], 4, seed=1)

    def test_uniform_bound(self):
        p = init_params([(4, 8)], 4, seed=3)
        limit = np.sqrt(6.0 / (32 + 4))
        assert np.all(np.abs(p.layers[0].wx) <= limit)


class TestForward:
    def test_zero_weights_predict_output_bias(self):
        h = 1
        layer = LstmLayerParams(np.zeros((4, 2)), np.zeros((4, 1)),
                                np.array([0.0, 1.0, 0.0, 0.0]))
        params = ModelParams((layer,), np.zeros((3, h)), np.array([0.5, -1.5, 2.0]))
        pred, _ = forward(params, np.random.default_rng(0).normal(size=(6, 2)) + 3.0)
        np.testing.assert_array_equal(pred, [0.5, -1.5, 2.0])

    def test_matches_scalar_reference(self):
        # hand-sized instance checked against the independent loop oracle
        rng = np.random.default_rng(42)
        wx = rng.normal(size=(8, 2)) * 0.7
        wh = rng.normal(size=(8, 2)) * 0.7
        b = rng.normal(size=8) * 0.3
        w_out = rng.normal(size=(3, 2))
        b_out = rng.normal(size=3)
        seq = rng.normal(size=(2, 2))
        params = ModelParams((LstmLayerParams(wx, wh, b),), w_out, b_out)
        pred, _ = forward(params, seq)
        expected = model_forward_scalar(
            [(wx.tolist(), wh.tolist(), b.tolist())],
            w_out.tolist(), b_out.tolist(), seq.tolist(),
        )
        np.testing.assert_allclose(pred, expected, rtol=1e-12, atol=1e-12)

    def test_two_layer_matches_scalar_reference(self):
        rng = np.random.default_rng(5)
        l1 = (rng.normal(size=(12, 2)) * 0.5, rng.normal(size=(12, 3)) * 0.5,
              rng.normal(size=12) * 0.2)
        l2 = (rng.normal(size=(8, 3)) * 0.5, rng.normal(size=(8, 2)) * 0.5,
              rng.normal(size=8) * 0.2)
        w_out = rng.normal(size=(4, 2))
        b_out = rng.normal(size=4)
        seq = rng.normal(size=(5, 2))
        params = ModelParams(
            (LstmLayerParams(*l1), LstmLayerParams(*l2)), w_out, b_out
        )
        pred, _ = forward(params, seq)
        expected = model_forward_scalar(
            [tuple(np.asarray(a).tolist() for a in l) for l in (l1, l2)],
            w_out.tolist(), b_out.tolist(), seq.tolist(),
        )
        np.testing.assert_allclose(pred, expected, rtol=1e-12, atol=1e-12)

    def test_eval_ignores_dropout(self):
        base = init_params([(3, 4), (4, 4)], 2, seed=1)
        with_p = ModelParams(base.layers, base.w_out, base.b_out, dropout=0.5)
        seq = np.random.default_rng(2).normal(size=(4, 3))
        a, _ = forward(base, seq, mode="eval")
        b, _ = forward(with_p, seq, mode="eval", seed=123)
        np.testing.assert_array_equal(a, b)

    def test_train_dropout_needs_seed(self):
        p = init_params([(3, 4), (4, 4)], 2, seed=1, dropout=0.5)
        with pytest.raises(InvalidArgumentError):
            forward(p, np.ones((4, 3)), mode="train")

    def test_train_dropout_mean_matches_eval(self):
        # inverted scaling: the masked-forward expectation approximates
        # the eval output; 10k masks in one batch, 2% tolerance
        p = init_params([(3, 6), (6, 6)], 2, seed=9, dropout=0.4)
        seq = np.random.default_rng(3).normal(size=(5, 3))
        eval_pred, _ = forward(p, seq, mode="eval")
        tiled = np.tile(seq, (10_000, 1, 1))
        train_preds, _ = forward_batch(p, tiled, mode="train", seed=77)
        mean_pred = train_preds.mean(axis=0)
        np.testing.assert_allclose(mean_pred, eval_pred, rtol=0.02, atol=0.02)

    def test_width_mismatch(self, tiny_params):
        with pytest.raises(ShapeError):
            forward(tiny_params, np.ones((3, 5)))

    def test_empty_sequence(self, tiny_params):
        with pytest.raises(InvalidArgumentError):
            forward(tiny_params, np.ones((0, 4)))

    def test_bad_mode(self, tiny_params):
        with pytest.raises(InvalidArgumentError):
            forward(tiny_params, np.ones((3, 4)), mode="predict")

    def test_forward_deterministic_under_seed(self):
        p = init_params([(3, 4), (4, 4)], 2, seed=1, dropout=0.3)
        seq = np.ones((4, 3))
        a, _ = forward(p, seq, mode="train", seed=5)
        b, _ = forward(p, seq, mode="train", seed=5)
        np.testing.assert_array_equal(a, b)
        c, _ = forward(p, seq, mode="train", seed=6)
        assert not np.array_equal(a, c)


class TestBackward:
    def test_zero_loss_grad_gives_zero_gradients(self, tiny_params):
        _, cache = forward(tiny_params, np.ones((3, 4)))
        grads = backward(tiny_params, cache, np.zeros(4))
        assert all(np.all(v == 0) for v in grads.values)

    def test_same_cache_same_gradients(self, tiny_params):
        _, cache = forward(tiny_params, np.random.default_rng(1).normal(size=(3, 4)))
        lg = np.array([0.3, -0.2, 1.0, 0.1])
        g1 = backward(tiny_params, cache, lg)
        g2 = backward(tiny_params, cache, lg)
        for a, b in zip(g1.values, g2.values):
            assert np.array_equal(a, b)

    def test_cache_mismatch_rejected(self, tiny_params):
        other = init_params([(4, 5)], 4, seed=2)
        _, cache = forward(tiny_params, np.ones((3, 4)))
        with pytest.raises(InvalidArgumentError):
            backward(other, cache, np.zeros(4))

    def test_loss_grad_width_checked(self, tiny_params):
        _, cache = forward(tiny_params, np.ones((3, 4)))
        with pytest.raises(ShapeError):
            backward(tiny_params, cache, np.zeros(3))

    def test_gradients_match_finite_differences(self):
        # scalar objective: squared distance of the prediction to a target
        rng = np.random.default_rng(8)
        params = init_params([(2, 3), (3, 2)], 2, seed=4)
        seq = rng.normal(size=(3, 2))
        target = rng.normal(size=2)

        def loss_of(p):
            pred, _ = forward(p, seq)
            return float(np.sum((pred - target) ** 2))

        pred, cache = forward(params, seq)
        grads = backward(params, cache, 2.0 * (pred - target))

        eps = 1e-5
        arrays = [a.copy() for a in params.arrays()]
        worst = 0.0
        for k, arr in enumerate(arrays):
            flat = arr.reshape(-1)
            gflat = grads.values[k].reshape(-1)
            for idx in range(flat.size):
                orig = flat[idx]
                flat[idx] = orig + eps
                hi = loss_of(params.with_arrays(arrays))
                flat[idx] = orig - eps
                lo = loss_of(params.with_arrays(arrays))
                flat[idx] = orig
                numeric = (hi - lo) / (2 * eps)
                worst = max(worst, abs(gflat[idx] - numeric) / max(1.0, abs(numeric)))
        assert worst <= 1e-4

    def test_batch_gradients_sum_singles(self, tiny_params):
        rng = np.random.default_rng(10)
        x = rng.normal(size=(3, 2, 4))
        lg = rng.normal(size=(3, 4))
        _, cache = forward_batch(tiny_params, x)
        batched = backward_batch(tiny_params, cache, lg)
        acc = [np.zeros_like(v) for v in batched.values]
        for i in range(3):
            _, c = forward(tiny_params, x[i])
            g = backward(tiny_params, c, lg[i])
            for slot, v in zip(acc, g.values):
                slot += v
        for a, b in zip(acc, batched.values):
            np.testing.assert_allclose(b, a, rtol=1e-10, atol=1e-12)


class TestAdam:
    def test_zero_gradient_fixed_point(self, tiny_params):
        state = AdamState.init(tiny_params)
        zeros = Gradients.zeros_like(tiny_params)
        new_p, new_s = adam_step(tiny_params, zeros, state)
        assert params_to_bytes(new_p) == params_to_bytes(tiny_params)
        assert new_s.step == 1

    def test_first_step_moves_by_learning_rate(self):
        # single scalar parameter, hand-evaluated first Adam step:
        # m_hat = g, v_hat = g^2, so w1 = -lr * g/(|g|+eps) ~= -lr
        layer = LstmLayerParams(np.zeros((4, 1)), np.zeros((4, 1)), np.zeros(4))
        params = ModelParams((layer,), np.array([[0.0]]), np.array([0.0]))
        arrays = [np.zeros_like(a) for a in params.arrays()]
        arrays[-2] = np.array([[1.0]])  # gradient of 1 on the single w_out entry
        grads = Gradients(tuple(arrays))
        new_p, state = adam_step(params, grads, AdamState.init(params, lr=0.001))
        expected = -0.001 * 1.0 / (1.0 + 1e-8)
        assert new_p.w_out[0, 0] == pytest.approx(expected, abs=1e-15)
        assert new_p.w_out[0, 0] == pytest.approx(-0.001, abs=1e-9)
        assert state.step == 1

    def test_trajectory_deterministic(self, tiny_params):
        rng = np.random.default_rng(0)
        gs = [
            Gradients(tuple(rng.normal(size=a.shape) for a in tiny_params.arrays()))
            for _ in range(3)
        ]

        def run():
            p, s = tiny_params, AdamState.init(tiny_params)
            for g in gs:
                p, s = adam_step(p, g, s)
            return params_to_bytes(p)

        assert run() == run()

    def test_shape_mismatch_rejected(self, tiny_params):
        other = init_params([(4, 5)], 4, seed=2)
        grads = Gradients.zeros_like(other)
        with pytest.raises(ShapeError):
            adam_step(tiny_params, grads, AdamState.init(tiny_params))


class TestSerialization:
    def test_round_trip_bytes(self):
        p = init_params([(4, 8), (8, 3)], 4, seed=21, dropout=0.25)
        blob = params_to_bytes(p)
        q = params_from_bytes(blob)
        assert params_to_bytes(q) == blob
        assert q.layer_sizes == p.layer_sizes
        assert q.dropout == p.dropout

    def test_file_round_trip(self, tmp_path):
        p = init_params([(4, 6)], 4, seed=13)
        path = tmp_path / "model.bin"
        save_model(p, path)
        q = load_model(path)
        assert params_digest(q) == params_digest(p)

    def test_truncated_rejected(self, tmp_path):
        p = init_params([(4, 6)], 4, seed=13)
        blob = params_to_bytes(p)
        with pytest.raises(CheckpointError):
            params_from_bytes(blob[:-9])

    def test_bad_magic_rejected(self):
        with pytest.raises(CheckpointError):
            params_from_bytes(b"NOPE" + b"\x00" * 64)

    def test_trailing_bytes_rejected(self):
        p = init_params([(4, 6)], 4, seed=13)
        with pytest.raises(CheckpointError):
            params_from_bytes(params_to_bytes(p) + b"\x00")

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_model(tmp_path / "absent.bin")


class TestImmutability:
    def test_param_arrays_read_only(self, tiny_params):
        with pytest.raises(ValueError):
            tiny_params.layers[0].wx[0, 0] = 1.0

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidArgumentError):
            LstmLayerParams(np.full((4, 1), np.nan), np.zeros((4, 1)), np.zeros(4))
