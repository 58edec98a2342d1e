"""
Tensor, autodiff, optimiser and checkpoint tests
"""

import math

import numpy as np
import pytest

from sltstack.errors import CheckpointFormatError, ConfigError, ShapeError
from sltstack.numcore.functional import concat, dropout, embedding, layer_norm, log_softmax, softmax
from sltstack.numcore.gradcheck import gradient_check
from sltstack.numcore.optim import AdamState, ScheduleConfig, adam_update, clip_grad_norm, noam_lrate
from sltstack.numcore.params import ModelParams, load_checkpoint, save_checkpoint
from sltstack.numcore.tensor import Tensor, no_grad, relu


class TestTensorOps:
    def test_softmax_of_equal_scores_is_uniform(self):
        out = softmax(Tensor([[1.0, 1.0, 1.0, 1.0]]))
        np.testing.assert_allclose(out.data, [[0.25] * 4], atol=1e-7)

    def test_softmax_mask(self):
        out = softmax(Tensor([[0.0, 5.0, 0.0]]), mask=np.array([[True, False, True]]))
        np.testing.assert_allclose(out.data, [[0.5, 0.0, 0.5]], atol=1e-7)

    def test_fully_masked_row_is_rejected(self):
        with pytest.raises(ValueError):
            softmax(Tensor([[1.0, 2.0]]), mask=np.array([[False, False]]))

    def test_relu_and_matmul(self):
        a = Tensor([[1.0, -2.0], [3.0, 4.0]])
        b = Tensor([[1.0], [1.0]])
        np.testing.assert_array_equal(relu(a).data, [[1.0, 0.0], [3.0, 4.0]])
        np.testing.assert_array_equal((a @ b).data, [[-1.0], [7.0]])

    def test_matmul_shape_mismatch(self):
        with pytest.raises(ShapeError):
            Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))

    def test_log_softmax_matches_log_of_softmax(self, rng):
        x = Tensor(rng.standard_normal((3, 5)))
        np.testing.assert_allclose(log_softmax(x).data, np.log(softmax(x).data), atol=1e-5)

    def test_embedding_rejects_unknown_id(self):
        with pytest.raises(ValueError):
            embedding(Tensor(np.ones((4, 2))), np.array([0, 4]))

    def test_dropout_without_generator_is_identity(self):
        x = Tensor(np.ones((2, 3)))
        assert dropout(x, 0.5, None) is x


class TestBackward:
    def test_product_rule(self):
        a = Tensor([2.0, 3.0], requires_grad=True)
        b = Tensor([4.0, 5.0], requires_grad=True)
        (a * b).sum().backward()
        np.testing.assert_array_equal(a.grad, [4.0, 5.0])
        np.testing.assert_array_equal(b.grad, [2.0, 3.0])

    def test_shared_input_accumulates(self):
        a = Tensor([3.0], requires_grad=True)
        (a * a + a).sum().backward()
        np.testing.assert_allclose(a.grad, [7.0])

    def test_broadcast_gradient_is_reduced(self):
        x = Tensor(np.ones((3, 2)), requires_grad=True)
        bias = Tensor([1.0, 2.0], requires_grad=True)
        (x + bias).sum().backward()
        np.testing.assert_array_equal(bias.grad, [3.0, 3.0])

    def test_no_grad_records_nothing(self):
        a = Tensor([1.0], requires_grad=True)
        with no_grad():
            out = a * 2.0
        assert not out.requires_grad

    def test_untouched_leaves_get_zero_gradients(self):
        a = Tensor([1.0, 2.0], requires_grad=True)
        unused = Tensor(np.ones((2, 3)), requires_grad=True)
        (a * 3.0).sum().backward(leaves=[a, unused])
        np.testing.assert_array_equal(a.grad, [3.0, 3.0])
        np.testing.assert_array_equal(unused.grad, np.zeros((2, 3)))


class TestGradientCheck:
    def test_layer_norm_softmax_chain(self, float64, rng):
        x = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        gamma = Tensor(rng.standard_normal(4), requires_grad=True)
        beta = Tensor(rng.standard_normal(4), requires_grad=True)
        w = Tensor(rng.standard_normal((4, 4)), requires_grad=True)
        target = rng.random((3, 4))

        def loss():
            y = softmax(relu(layer_norm(x, gamma, beta)) @ w)
            return (y * target).sum()

        assert gradient_check(loss, [x, gamma, beta, w]) < 1e-3

    def test_concat_splits_the_gradient(self, float64, rng):
        a = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
        b = Tensor(rng.standard_normal((2, 2)), requires_grad=True)
        weights = rng.standard_normal((2, 5))

        out = concat([a, b], axis=-1)
        assert out.shape == (2, 5)
        np.testing.assert_array_equal(out.data[:, 3:], b.data)
        assert gradient_check(lambda: (softmax(concat([a, b], axis=-1)) * weights).sum(), [a, b]) < 1e-3

    def test_concat_shape_mismatch(self):
        with pytest.raises(ShapeError, match="concat"):
            concat([Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2)))], axis=-1)


class TestSchedule:
    def test_reference_values(self):
        cfg = ScheduleConfig(k=1.0, d_model=256, warmup=25000)
        assert noam_lrate(25000, cfg) == pytest.approx(256 ** -0.5 * 25000 ** -0.5, rel=1e-6)
        assert noam_lrate(25000, cfg) == pytest.approx(3.953e-4, rel=1e-3)
        assert noam_lrate(1, cfg) == pytest.approx(1.581e-8, rel=1e-3)

    def test_peak_at_warmup(self):
        cfg = ScheduleConfig(k=1.0, d_model=256, warmup=25000)
        peak = noam_lrate(25000, cfg)
        assert noam_lrate(24999, cfg) < peak
        assert noam_lrate(25001, cfg) < peak

    def test_step_zero_rejected(self):
        with pytest.raises(ValueError):
            noam_lrate(0, ScheduleConfig())


class TestAdam:
    def test_first_step_moves_by_lrate(self):
        p = {"w": Tensor([1.0], requires_grad=True)}
        state = AdamState()
        assert adam_update(p, {"w": np.array([0.3])}, state, 0.1)
        assert p["w"].data[0] == pytest.approx(0.9, abs=1e-6)
        assert state.step == 1

    def test_two_steps_with_changing_gradient(self):
        p = {"w": Tensor(np.zeros(1), requires_grad=True)}
        state = AdamState()
        adam_update(p, {"w": np.array([1.0])}, state, 0.1)
        adam_update(p, {"w": np.array([0.5])}, state, 0.1)
        m = 0.9 * 0.1 + 0.1 * 0.5
        v = 0.99 * 0.01 + 0.01 * 0.25
        expected = -0.1 - 0.1 * (m / (1 - 0.9 ** 2)) / (math.sqrt(v / (1 - 0.99 ** 2)) + 1e-9)
        assert p["w"].data[0] == pytest.approx(expected, abs=1e-6)
        assert p["w"].data[0] == pytest.approx(-0.19334, abs=1e-4)

    def test_zero_gradient_leaves_parameter_and_moments(self):
        p = {"w": Tensor([1.0, 2.0], requires_grad=True)}
        state = AdamState()
        adam_update(p, {"w": np.zeros(2)}, state, 0.1)
        np.testing.assert_array_equal(p["w"].data, [1.0, 2.0])
        assert "w" not in state.m

    def test_non_finite_gradient_rejects_the_step(self):
        p = {"w": Tensor([1.0], requires_grad=True)}
        state = AdamState()
        assert not adam_update(p, {"w": np.array([np.nan])}, state, 0.1)
        assert state.step == 0
        assert p["w"].data[0] == 1.0

    def test_clip_grad_norm(self):
        grads = {"a": np.array([3.0]), "b": np.array([4.0])}
        assert clip_grad_norm(grads, 1.0) == pytest.approx(5.0)
        np.testing.assert_allclose([grads["a"][0], grads["b"][0]], [0.6, 0.8])


class TestCheckpoints:
    def _params(self, rng):
        params = ModelParams()
        params.add("enc.w", rng.standard_normal((3, 4)))
        params.add("out.b", rng.standard_normal(5))
        return params

    def test_round_trip(self, tmp_path, rng):
        params = self._params(rng)
        save_checkpoint(tmp_path / "a.sqbr", params.snapshot())
        loaded = load_checkpoint(tmp_path / "a.sqbr")
        assert list(loaded) == ["enc.w", "out.b"]
        for name, tensor in params.items():
            np.testing.assert_array_equal(loaded[name], tensor.data)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.sqbr"
        path.write_bytes(b"NOPE0" + b"\x00" * 8)
        with pytest.raises(CheckpointFormatError):
            load_checkpoint(path)

    def test_truncated_file(self, tmp_path, rng):
        path = tmp_path / "cut.sqbr"
        save_checkpoint(path, self._params(rng).snapshot())
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(CheckpointFormatError):
            load_checkpoint(path)

    def test_load_rejects_shape_mismatch_naming_the_layer(self, rng):
        params = self._params(rng)
        with pytest.raises(ConfigError, match="enc.w"):
            params.load({"enc.w": np.zeros((4, 3)), "out.b": np.zeros(5)})

    def test_copy_is_independent(self, rng):
        params = self._params(rng)
        clone = params.copy()
        clone["out.b"].data[:] = 0.0
        assert np.any(params["out.b"].data != 0.0)
