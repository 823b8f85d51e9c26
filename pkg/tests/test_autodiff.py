import numpy as np

import pytest

from rsonerf.autodiff import (
    AdamState,
    Tape,
    Tensor,
    activation,
    adam_step,
    add,
    backward,
    clamp,
    columns,
    concat,
    linear,
    matmul,
    mse_loss,
    mul,
    reshape,
    sub,
    total,
)
from rsonerf.autodiff.tensor import EXP_CLAMP
from rsonerf.exceptions import ContractError, DimensionError

from .helpers import numeric_gradient, relative_error


def gradients(function, params):
    with Tape() as tape:
        leaves = {name: tape.watch(value) for name, value in params.items()}
        loss = function(leaves)
    grads = backward(tape, loss)
    return {name: grads[leaf.node_id].values for name, leaf in leaves.items()}


def scalar(function):
    return lambda params: float(function({name: Tensor(value) for name, value in params.items()}).item())


class TestTensor:
    def test_values_are_read_only(self):
        tensor = Tensor([1.0, 2.0])
        with pytest.raises(ValueError):
            tensor.values[0] = 3.0

    def test_shape_and_size(self):
        tensor = Tensor(np.zeros((2, 3)))
        assert tensor.shape == (2, 3)
        assert tensor.size == 6

    def test_float_width_follows_setting(self, settings):
        settings.RSONERF_FLOAT_BITS = 64
        assert Tensor([1.0]).values.dtype == np.float64
        settings.RSONERF_FLOAT_BITS = 32
        assert Tensor([1.0]).values.dtype == np.float32

    def test_operators(self):
        a, b = Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]])
        assert (a @ b).item() == 11.0
        np.testing.assert_array_equal((a + a).values, [[2.0, 4.0]])
        np.testing.assert_array_equal((a - a).values, [[0.0, 0.0]])
        np.testing.assert_array_equal((a * a).values, [[1.0, 4.0]])


class TestTape:
    def test_no_recording_without_tape(self):
        out = add(Tensor([1.0]), Tensor([2.0]))
        assert out.node_id is None
        assert Tape.current() is None

    def test_no_recording_for_constants(self):
        with Tape() as tape:
            out = add(Tensor([1.0]), Tensor([2.0]))
        assert out.node_id is None
        assert tape.records == []

    def test_nested_tapes_restore(self):
        with Tape() as outer:
            with Tape() as inner:
                assert Tape.current() is inner
            assert Tape.current() is outer
        assert Tape.current() is None

    def test_square_gradient(self):
        grads = gradients(lambda p: total(mul(p["x"], p["x"])), {"x": np.array([1.0, -2.0, 3.0])})
        np.testing.assert_allclose(grads["x"], [2.0, -4.0, 6.0])

    def test_shared_input_accumulates(self):
        grads = gradients(lambda p: total(add(p["x"], mul(p["x"], 3.0))), {"x": np.array([1.0, 2.0])})
        np.testing.assert_allclose(grads["x"], [4.0, 4.0])

    def test_unreached_leaf_gets_zeros(self):
        grads = gradients(lambda p: total(p["used"]), {"used": np.ones(2), "unused": np.ones((3, 2))})
        np.testing.assert_array_equal(grads["unused"], np.zeros((3, 2)))

    def test_broadcast_bias_gradient(self):
        params = {"x": np.ones((4, 3)), "b": np.zeros(3)}
        grads = gradients(lambda p: total(add(p["x"], p["b"])), params)
        np.testing.assert_array_equal(grads["b"], [4.0, 4.0, 4.0])

    def test_non_scalar_loss(self):
        with Tape() as tape:
            x = tape.watch(np.ones(3))
            out = mul(x, 2.0)
        with pytest.raises(ContractError):
            backward(tape, out)

    def test_loss_from_another_tape(self):
        with Tape() as first:
            loss = total(first.watch(np.ones(2)))
        with pytest.raises(ContractError):
            backward(Tape(), loss)


class TestMatmul:
    def test_identity(self, rng):
        a = Tensor(rng.normal(size=(2, 2)))
        np.testing.assert_array_equal(matmul(a, Tensor(np.eye(2))).values, a.values)

    def test_zeros(self, rng):
        out = matmul(Tensor(np.zeros((3, 4))), Tensor(rng.normal(size=(4, 2))))
        assert out.shape == (3, 2)
        np.testing.assert_array_equal(out.values, np.zeros((3, 2)))


class TestShapes:
    def test_matmul_mismatch(self):
        with pytest.raises(DimensionError, match=r"\(2, 3\) and \(2, 3\)"):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_add_mismatch(self):
        with pytest.raises(DimensionError):
            add(Tensor(np.ones((2, 3))), Tensor(np.ones(4)))

    def test_mse_mismatch(self):
        with pytest.raises(DimensionError):
            mse_loss(Tensor(np.ones(3)), Tensor(np.ones(4)))

    def test_concat_mismatch(self):
        with pytest.raises(DimensionError):
            concat([Tensor(np.ones((2, 3))), Tensor(np.ones((3, 3)))], axis=1)

    def test_reshape_mismatch(self):
        with pytest.raises(DimensionError):
            reshape(Tensor(np.ones(6)), (4, 2))

    def test_unknown_activation(self):
        with pytest.raises(ContractError):
            activation(Tensor([1.0]), "tanh")


class TestActivations:
    def test_exp_is_clamped(self):
        assert activation(Tensor([100.0], dtype=np.float64), "exp").item() == pytest.approx(np.exp(EXP_CLAMP))

    @pytest.mark.parametrize("kind", ("relu", "sigmoid", "softplus", "exp"))
    def test_ranges(self, kind):
        out = activation(Tensor(np.linspace(-20, 20, 41)), kind).values
        assert np.isfinite(out).all()
        assert (out >= 0).all()
        if kind == "sigmoid":
            assert (out <= 1).all()


@pytest.mark.usefixtures("float64")
class TestGradients:
    def check(self, function, params):
        analytic = gradients(function, params)
        numeric = numeric_gradient(scalar(function), {name: value.copy() for name, value in params.items()})
        assert relative_error(analytic, numeric) < 1e-3

    @pytest.mark.parametrize("kind", ("relu", "sigmoid", "softplus", "exp"))
    def test_activation(self, kind, rng):
        # keep relu inputs away from its kink
        x = rng.uniform(0.1, 1.0, size=(3, 4)) * rng.choice([-1, 1], size=(3, 4))
        self.check(lambda p: total(mul(activation(p["x"], kind), p["x"])), {"x": x})

    def test_linear_layer(self, rng):
        params = {"x": rng.normal(size=(5, 3)), "w": rng.normal(size=(3, 2)), "b": rng.normal(size=2)}
        target = Tensor(rng.normal(size=(5, 2)))
        self.check(lambda p: mse_loss(linear(p["x"], p["w"], p["b"]), target), params)

    def test_slicing_and_concat(self, rng):
        params = {"a": rng.normal(size=(4, 3)), "b": rng.normal(size=(4, 2))}

        def function(p):
            joined = concat([p["a"], p["b"]], axis=1)
            return total(mul(columns(joined, 1, 4), reshape(sub(p["a"], 0.5), (4, 3))))

        self.check(function, params)

    def test_clamp(self, rng):
        x = rng.uniform(-0.5, 1.5, size=10)
        x[np.abs(x) < 0.05] = 0.2
        x[np.abs(x - 1) < 0.05] = 0.8
        self.check(lambda p: total(mul(clamp(p["x"], 0.0, 1.0), p["x"])), {"x": x})


class TestAdam:
    def test_first_step_moves_by_learning_rate(self):
        params = {"w": np.array([1.0, -1.0, 0.5])}
        state = AdamState.for_params(params, learning_rate=0.1)
        updated, state = adam_step(params, {"w": np.array([2.0, -3.0, 0.25])}, state)
        np.testing.assert_allclose(updated["w"], [0.9, -0.9, 0.4], atol=1e-6)
        assert state.step_count == 1

    def test_step_count_increases(self):
        params = {"w": np.zeros(2)}
        state = AdamState.for_params(params, learning_rate=1e-3)
        for expected in (1, 2, 3):
            params, state = adam_step(params, {"w": np.ones(2)}, state)
            assert state.step_count == expected
        assert state.first_moment["w"].shape == (2,)

    def test_zero_gradient_leaves_parameters(self):
        params = {"w": np.array([1.0, 2.0])}
        updated, _ = adam_step(params, {"w": np.zeros(2)}, AdamState.for_params(params, 0.1))
        np.testing.assert_array_equal(updated["w"], params["w"])

    def test_accepts_tensor_gradients(self):
        params = {"w": np.ones(2)}
        updated, _ = adam_step(params, {"w": Tensor([1.0, 1.0])}, AdamState.for_params(params, 0.5))
        np.testing.assert_allclose(updated["w"], [0.5, 0.5], atol=1e-6)

    def test_shape_mismatch(self):
        params = {"w": np.ones(2)}
        with pytest.raises(DimensionError):
            adam_step(params, {"w": np.ones(3)}, AdamState.for_params(params, 0.1))

    def test_original_parameters_untouched(self):
        params = {"w": np.ones(2)}
        adam_step(params, {"w": np.ones(2)}, AdamState.for_params(params, 0.1))
        np.testing.assert_array_equal(params["w"], np.ones(2))

    def test_mismatch_leaves_state_alone(self):
        params = {"a": np.ones(2), "w": np.ones(2)}
        state = AdamState.for_params(params, 0.1)
        with pytest.raises(DimensionError):
            adam_step(params, {"a": np.ones(2), "w": np.ones(3)}, state)
        assert state.step_count == 0
        np.testing.assert_array_equal(state.first_moment["a"], np.zeros(2))
        np.testing.assert_array_equal(state.second_moment["a"], np.zeros(2))

    def test_converges_on_a_parabola(self):
        params = {"x": np.array([0.0])}
        state = AdamState.for_params(params, learning_rate=0.1)
        for _ in range(200):
            params, state = adam_step(params, {"x": 2.0 * (params["x"] - 2.0)}, state)
        assert abs(params["x"][0] - 2.0) < 0.05
