"""Network construction, concrete evaluation, and the text format."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import certitrain as ct


def identity_net(dim=2):
    return ct.Network((ct.LayerSpec(np.eye(dim), np.zeros(dim), apply_relu=False),))


class TestForward:
    def test_monitor_example_values(self, monitor_net):
        y, tape = ct.forward(monitor_net, [4.0, 1.0])
        hidden = tape.records[2].value  # post-ReLU of the first layer
        assert np.allclose(hidden, [4.5, 3.0], atol=1e-12, rtol=0)
        assert np.allclose(y, [1.5, 5.25], atol=1e-12, rtol=0)

    def test_identity(self):
        y, _ = ct.forward(identity_net(), [3.0, -7.0])
        assert np.array_equal(y, [3.0, -7.0])

    def test_zero_input_maps_to_zero(self, monitor_net):
        y, _ = ct.forward(monitor_net, [0.0, 0.0])
        assert np.array_equal(y, [0.0, 0.0])

    def test_dimension_mismatch(self, monitor_net):
        with pytest.raises(ct.ShapeError):
            ct.forward(monitor_net, [1.0, 2.0, 3.0])

    def test_non_finite_input(self, monitor_net):
        with pytest.raises(ct.ShapeError):
            ct.forward(monitor_net, [np.nan, 0.0])

    def test_determinism_bit_identical(self, monitor_net):
        x = [1.234567, -0.7654321]
        first, _ = ct.forward(monitor_net, x)
        second, _ = ct.forward(monitor_net, x)
        assert first.tobytes() == second.tobytes()

    def test_batch_matches_single(self, monitor_net):
        rng = np.random.default_rng(7)
        xs = rng.uniform(-3, 3, (20, 2))
        batch = ct.forward_values(monitor_net, xs)
        for row, x in zip(batch, xs):
            single, _ = ct.forward(monitor_net, x)
            assert np.array_equal(row, single)

    def test_tape_replay_reproduces_outputs(self, monitor_net):
        _, tape = ct.forward(monitor_net, [0.3, -2.0])
        assert tape.replay_matches()

    def test_relu_free_net_is_affine(self):
        rng = np.random.default_rng(3)
        net = ct.Network((
            ct.LayerSpec(rng.normal(size=(3, 2)), rng.normal(size=3), apply_relu=False),
            ct.LayerSpec(rng.normal(size=(2, 3)), rng.normal(size=2), apply_relu=False),
        ))
        x, z = rng.normal(size=2), rng.normal(size=2)
        a, b = 0.7, -1.3
        lhs = ct.forward_values(net, a * x + b * z)
        rhs = (a * ct.forward_values(net, x) + b * ct.forward_values(net, z)
               - (a + b - 1.0) * ct.forward_values(net, np.zeros(2)))
        assert np.allclose(lhs, rhs, atol=1e-9, rtol=0)


class TestValidation:
    def test_final_layer_must_be_linear(self):
        with pytest.raises(ct.ShapeError):
            ct.Network((ct.LayerSpec(np.eye(2), np.zeros(2), apply_relu=True),))

    def test_chained_dims_must_match(self):
        with pytest.raises(ct.ShapeError):
            ct.Network((
                ct.LayerSpec(np.ones((3, 2)), np.zeros(3), apply_relu=True),
                ct.LayerSpec(np.ones((2, 4)), np.zeros(2), apply_relu=False),
            ))

    def test_non_finite_weights_rejected(self):
        with pytest.raises(ct.ShapeError):
            ct.LayerSpec(np.array([[np.inf, 0.0]]), np.zeros(1), apply_relu=False)

    def test_bias_length_must_match(self):
        with pytest.raises(ct.ShapeError):
            ct.LayerSpec(np.eye(2), np.zeros(3), apply_relu=False)


class TestRandomNetwork:
    def test_init_bounds_follow_fan_in(self):
        net = ct.random_network([100, 50, 10], seed=0)
        first = net.layers[0].weights
        assert np.abs(first).max() <= 1.0 / np.sqrt(100)
        assert np.abs(net.layers[1].weights).max() <= 1.0 / np.sqrt(50)
        assert net.layers[0].apply_relu and not net.layers[1].apply_relu

    def test_same_seed_same_net(self):
        a = ct.random_network([3, 5, 2], seed=42)
        b = ct.random_network([3, 5, 2], seed=42)
        for la, lb in zip(a.layers, b.layers):
            assert np.array_equal(la.weights, lb.weights)


class TestSerialization:
    def test_round_trip_monitor(self, tmp_path, monitor_net):
        path = tmp_path / "net.txt"
        ct.save_network(monitor_net, path)
        loaded = ct.load_network(path)
        for original, reread in zip(monitor_net.layers, loaded.layers):
            assert np.array_equal(original.weights, reread.weights)
            assert np.array_equal(original.bias, reread.bias)
            assert original.apply_relu == reread.apply_relu

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_round_trip_random_exact(self, tmp_path_factory, seed):
        rng = np.random.default_rng(seed)
        dims = [int(rng.integers(1, 6)) for _ in range(int(rng.integers(2, 5)))]
        net = ct.random_network(dims, seed=seed, bias=True)
        path = tmp_path_factory.mktemp("ser") / "net.txt"
        ct.save_network(net, path)
        loaded = ct.load_network(path)
        for original, reread in zip(net.layers, loaded.layers):
            assert original.weights.tobytes() == reread.weights.tobytes()
            assert original.bias.tobytes() == reread.bias.tobytes()

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("layer 1x1 linear\n1\n0\n")
        with pytest.raises(ct.FileFormatError):
            ct.load_network(path)

    def test_truncated_file_reports_line(self, tmp_path):
        path = tmp_path / "trunc.txt"
        path.write_text("netfmt 1\nlayer 2x2 relu\n1 0\n")
        with pytest.raises(ct.FileFormatError) as excinfo:
            ct.load_network(path)
        assert excinfo.value.line is not None

    def test_bad_token_reports_line(self, tmp_path):
        path = tmp_path / "tok.txt"
        path.write_text("netfmt 1\nlayer 1x1 linear\noops\n0\n")
        with pytest.raises(ct.FileFormatError) as excinfo:
            ct.load_network(path)
        assert excinfo.value.line == 3
