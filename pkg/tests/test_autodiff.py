"""Reverse-mode gradients against finite differences, plus optimizer steps."""

import math

import numpy as np
import pytest

import certitrain as ct
from certitrain.optim import AdamState
from certitrain.tape import DotConst

from conftest import (fd_param_gradient, gradient_close, random_box, random_net,
                      random_predicate, tape_fd_safe)


def scalar_output_loss(net, x, coeffs):
    y, tape = ct.forward(net, x)
    node = tape.append(DotConst(tape, tape.output_index, coeffs))
    tape.mark_loss(node)
    return tape


class TestBackwardBasics:
    def test_single_linear_neuron(self):
        net = ct.Network((ct.LayerSpec(np.array([[1.0]]), np.zeros(1), False),))
        tape = scalar_output_loss(net, [2.0], [1.0])
        bundle = ct.backward(tape, 1.0)
        assert bundle.d_weights[0][0, 0] == 2.0
        assert bundle.d_bias[0][0] == 1.0

    def test_relu_at_exactly_zero_contributes_nothing(self):
        net = ct.Network((
            ct.LayerSpec(np.array([[1.0]]), np.zeros(1), apply_relu=True),
            ct.LayerSpec(np.array([[1.0]]), np.zeros(1), apply_relu=False),
        ))
        tape = scalar_output_loss(net, [0.0], [1.0])  # pre-activation exactly 0
        bundle = ct.backward(tape, 1.0)
        assert bundle.d_weights[0][0, 0] == 0.0

    def test_seed_scales_gradients(self, monitor_net):
        tape = scalar_output_loss(monitor_net, [1.0, 2.0], [1.0, -1.0])
        one = ct.backward(tape, 1.0)
        three = ct.backward(tape, 3.0)
        for a, b in zip(one.d_weights, three.d_weights):
            assert np.allclose(3.0 * a, b, rtol=0, atol=0)

    def test_tape_without_loss_rejected(self, monitor_net):
        _, tape = ct.forward(monitor_net, [1.0, 1.0])
        with pytest.raises(ct.TapeError):
            ct.backward(tape, 1.0)

    def test_non_finite_seed_rejected(self, monitor_net):
        tape = scalar_output_loss(monitor_net, [1.0, 1.0], [1.0, 0.0])
        with pytest.raises(ct.TapeError):
            ct.backward(tape, np.inf)


class TestGradientChecks:
    """Reverse-mode versus central finite differences (step 1e-5)."""

    def _check_all_params(self, net, loss_of_net, bundle):
        checked = 0
        for layer_index, layer in enumerate(net.layers):
            for index in np.ndindex(layer.weights.shape):
                numeric = fd_param_gradient(loss_of_net, net, layer_index, "w", index)
                analytic = bundle.d_weights[layer_index][index]
                assert gradient_close(analytic, numeric), (
                    f"layer {layer_index} W{index}: {analytic} vs {numeric}")
                checked += 1
            for index in range(layer.bias.shape[0]):
                numeric = fd_param_gradient(loss_of_net, net, layer_index, "b", (index,))
                analytic = bundle.d_bias[layer_index][index]
                assert gradient_close(analytic, numeric), (
                    f"layer {layer_index} b[{index}]: {analytic} vs {numeric}")
                checked += 1
        return checked

    def test_concrete_losses_match_finite_differences(self):
        rng = np.random.default_rng(2024)
        done = 0
        while done < 100:
            net = random_net(rng)
            x = rng.uniform(-2, 2, net.input_dim)
            coeffs = rng.uniform(-2, 2, net.output_dim)

            def loss_of_net(candidate):
                y = ct.forward_values(candidate, x)
                return float(coeffs @ y)

            y, tape = ct.forward(net, x)
            node = tape.append(DotConst(tape, tape.output_index, coeffs))
            tape.mark_loss(node)
            if not tape_fd_safe(tape):
                continue
            bundle = ct.backward(tape, 1.0)
            self._check_all_params(net, loss_of_net, bundle)
            done += 1

    def test_box_losses_match_finite_differences(self):
        rng = np.random.default_rng(77)
        done = 0
        while done < 100:
            net = random_net(rng)
            box = random_box(rng, net.input_dim)
            pred = random_predicate(rng, net.output_dim)

            _, tape = ct.forward_box(net, box)
            value = ct.worst_case_distance(tape, pred)
            if value == 0.0 or not tape_fd_safe(tape):
                continue

            def loss_of_net(candidate):
                _, probe = ct.forward_box(candidate, box)
                return ct.worst_case_distance(probe, pred)

            bundle = ct.backward(tape, 1.0)
            self._check_all_params(net, loss_of_net, bundle)
            done += 1

    def test_box_bound_gradients_match_finite_differences(self, monitor_net,
                                                          monitor_box, monitor_pred):
        _, tape = ct.forward_box(monitor_net, monitor_box)
        ct.worst_case_distance(tape, monitor_pred)
        bundle = ct.backward(tape, 1.0)
        step = 1e-5
        for which, grads in (("lower", bundle.d_input_lower),
                             ("upper", bundle.d_input_upper)):
            for dim in range(monitor_box.dim):
                def probe(delta):
                    lower = np.array(monitor_box.lower)
                    upper = np.array(monitor_box.upper)
                    (lower if which == "lower" else upper)[dim] += delta
                    _, t = ct.forward_box(monitor_net, ct.Box(lower, upper))
                    return ct.worst_case_distance(t, monitor_pred)

                numeric = (probe(step) - probe(-step)) / (2 * step)
                assert gradient_close(grads[dim], numeric)


def sgd_scalar_net(w):
    return ct.Network((ct.LayerSpec(np.array([[w]]), np.zeros(1), False),))


class TestSgd:
    def test_definition(self):
        net = sgd_scalar_net(1.0)
        grads = ct.GradientBundle.for_network(net)
        grads.d_weights[0][0, 0] = 2.0
        stepped = ct.sgd_step(net, grads, 0.01)
        assert stepped.layers[0].weights[0, 0] == 0.98

    def test_zero_gradient_is_identity(self, monitor_net):
        grads = ct.GradientBundle.for_network(monitor_net)
        stepped = ct.sgd_step(monitor_net, grads, 0.5)
        for before, after in zip(monitor_net.layers, stepped.layers):
            assert np.array_equal(before.weights, after.weights)

    def test_zero_lr_is_identity(self, monitor_net):
        grads = ct.GradientBundle.for_network(monitor_net)
        for dw in grads.d_weights:
            dw += 1.0
        stepped = ct.sgd_step(monitor_net, grads, 0.0)
        for before, after in zip(monitor_net.layers, stepped.layers):
            assert np.array_equal(before.weights, after.weights)

    def test_revision_bumps(self, monitor_net):
        grads = ct.GradientBundle.for_network(monitor_net)
        stepped = ct.sgd_step(monitor_net, grads, 0.1)
        assert stepped.revision == monitor_net.revision + 1


class TestAdam:
    def test_first_step_moves_by_lr_sign(self):
        net = sgd_scalar_net(1.0)
        state = AdamState.for_network(net)
        grads = ct.GradientBundle.for_network(net)
        grads.d_weights[0][0, 0] = 0.37
        lr = 0.01
        stepped, _ = ct.adam_step(state, net, grads, lr)
        moved = stepped.layers[0].weights[0, 0] - 1.0
        assert moved == pytest.approx(-lr, rel=1e-6)

    def test_zero_gradient_forever_fixed(self, monitor_net):
        state = AdamState.for_network(monitor_net)
        net = monitor_net
        grads = ct.GradientBundle.for_network(net)
        for _ in range(5):
            net, state = ct.adam_step(state, net, grads, 0.1)
        for before, after in zip(monitor_net.layers, net.layers):
            assert np.array_equal(before.weights, after.weights)

    def test_three_step_hand_trace(self):
        # Hand-computed trace on a single scalar parameter.
        lr, beta1, beta2, eps = 0.1, 0.9, 0.999, 1e-8
        w = 1.0
        m = v = 0.0
        gradient_sequence = [2.0, -1.0, 0.5]
        expected = []
        for t, g in enumerate(gradient_sequence, start=1):
            m = beta1 * m + (1 - beta1) * g
            v = beta2 * v + (1 - beta2) * g * g
            m_hat = m / (1 - beta1 ** t)
            v_hat = v / (1 - beta2 ** t)
            w = w - lr * m_hat / (math.sqrt(v_hat) + eps)
            expected.append(w)

        net = sgd_scalar_net(1.0)
        state = AdamState.for_network(net)
        for g, want in zip(gradient_sequence, expected):
            grads = ct.GradientBundle.for_network(net)
            grads.d_weights[0][0, 0] = g
            net, state = ct.adam_step(state, net, grads, lr)
            assert net.layers[0].weights[0, 0] == pytest.approx(want, rel=1e-12)
