import numpy as np
import pytest

from esgan.gan.adam import AdamParams, AdamState, adam_step


def single_step(value, grad, k, constants):
    params = [np.array([value])]
    state = AdamState(params)
    adam_step(params, [np.array([grad])], state, constants, step_index=k)
    return params[0][0], state


class TestAdamStep:
    def test_zero_gradient_fixed_point(self):
        constants = AdamParams()
        params = [np.array([1.0, -2.0]), np.array([[0.5]])]
        state = AdamState(params)
        before = [p.copy() for p in params]
        adam_step(params, [np.zeros(2), np.zeros((1, 1))], state, constants)
        for p, b in zip(params, before):
            np.testing.assert_array_equal(p, b)

    def test_single_step_hand_value(self):
        # k=0, w=0, g=1 with the production constants: the update magnitude is
        # gamma * sqrt(1-beta2) / (1-beta1) * ((1-beta1) / (sqrt(1-beta2) + delta))
        constants = AdamParams(gamma=0.0002, beta1=0.5, beta2=0.999, delta=1e-7)
        new_value, _ = single_step(0.0, 1.0, 0, constants)
        expected = 0.0002 * (np.sqrt(0.001) / 0.5) * (0.5 / (np.sqrt(0.001) + 1e-7))
        assert new_value == pytest.approx(-expected, rel=1e-12)
        assert new_value == pytest.approx(-0.00019999936754646797, rel=1e-15)

    def test_production_constants(self):
        c = AdamParams()
        assert (c.gamma, c.beta1, c.beta2, c.delta) == (0.0002, 0.5, 0.999, 1e-7)

    def test_descent_direction(self):
        constants = AdamParams()
        new_value, _ = single_step(0.0, 1.0, 0, constants)
        assert new_value < 0.0
        new_value, _ = single_step(0.0, -1.0, 0, constants)
        assert new_value > 0.0

    def test_moment_recursion_two_steps(self):
        constants = AdamParams(gamma=0.01, beta1=0.5, beta2=0.9, delta=1e-8)
        params = [np.array([0.0])]
        state = AdamState(params)
        g1, g2 = 1.0, -2.0
        adam_step(params, [np.array([g1])], state, constants)
        adam_step(params, [np.array([g2])], state, constants)
        # replay the printed recursion by hand
        b1, b2 = constants.beta1, constants.beta2
        v1 = (1 - b2) * g1 * g1
        m1 = (1 - b1) * g1
        w1 = 0.0 - constants.gamma * np.sqrt(1 - b2) / (1 - b1) * m1 / (np.sqrt(v1) + constants.delta)
        v2 = b2 * v1 + (1 - b2) * g2 * g2
        m2 = b1 * m1 + (1 - b1) * g2
        w2 = w1 - constants.gamma * np.sqrt(1 - b2**2) / (1 - b1**2) * m2 / (np.sqrt(v2) + constants.delta)
        assert params[0][0] == pytest.approx(w2, rel=1e-14)
        assert state.step == 2

    def test_shape_mismatch(self):
        params = [np.zeros(2)]
        state = AdamState(params)
        with pytest.raises(ValueError):
            adam_step(params, [np.zeros(3)], state, AdamParams())

    def test_non_finite_gradient(self):
        params = [np.zeros(2)]
        state = AdamState(params)
        with pytest.raises(ValueError):
            adam_step(params, [np.array([np.nan, 0.0])], state, AdamParams())

    def test_constant_validation(self):
        with pytest.raises(ValueError):
            AdamParams(beta1=1.0)
        with pytest.raises(ValueError):
            AdamParams(gamma=0.0)
