"""
Tests for widening a shared policy and copying it into independent agents.
"""

import sys
from pathlib import Path

# Add parent directory to path to allow imports
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest

from agents.network import (
    DenseLayer,
    DenseNet,
    format_weights,
    init_network,
    load_weights,
    optimizer_step,
    save_weights,
)
from agents.transfer import build_transfer, pad_network, replicate_policy
from envs.multi import MultiEnvConfig, MultiJunctionEnv, encode_observation, feature_dim
from utils.errors import ContractViolation, WeightsLoadError


class TestPadNetwork:

    def test_same_width_is_equal_copy(self):
        net = init_network([11, 8, 5], 0)
        padded = pad_network(net, 11)
        assert padded.parameters_equal(net)
        assert padded.layers[0].weights is not net.layers[0].weights

    def test_cannot_shrink(self):
        with pytest.raises(ContractViolation):
            pad_network(init_network([11, 5], 0), 10)

    def test_original_untouched(self):
        net = init_network([11, 8, 5], 0)
        snapshot = net.copy()
        pad_network(net, 15)
        assert net.parameters_equal(snapshot)

    @pytest.mark.parametrize("seed", range(100))
    def test_outputs_exactly_preserved(self, seed):
        rng = np.random.default_rng(seed)
        net = init_network([11, 16, 16, 5], seed)
        padded = pad_network(net, 15)
        x = rng.normal(size=(4, 11))
        widened = np.hstack([x, np.zeros((4, 4))])
        assert padded.dims == [15, 16, 16, 5]
        np.testing.assert_array_equal(padded.forward(widened), net.forward(x))

    def test_training_only_adds_new_column_gradients(self):
        # A 1-input net widened to 2 inputs, stepped on an input whose new
        # coordinate is non-zero.
        net = DenseNet([
            DenseLayer(np.array([[0.5], [-1.5], [2.0]]), np.array([0.1, 0.2, -0.3])),
            DenseLayer(np.array([[1.0, -2.0, 0.5], [0.3, 0.3, 0.3]]), np.array([0.0, 1.0])),
        ])
        padded = pad_network(net, 2)
        g = np.array([1.0, -0.5])

        optimizer_step(net, net.backward(np.array([0.8]), g), lr=0.1, clip_norm=1e9)
        optimizer_step(padded, padded.backward(np.array([0.8, 2.0]), g), lr=0.1, clip_norm=1e9)

        np.testing.assert_array_equal(padded.layers[0].weights[:, :1], net.layers[0].weights)
        np.testing.assert_array_equal(padded.layers[0].biases, net.layers[0].biases)
        np.testing.assert_array_equal(padded.layers[1].weights, net.layers[1].weights)
        np.testing.assert_array_equal(padded.layers[1].biases, net.layers[1].biases)
        assert padded.layers[0].weights[:, 1].any()


class TestReplicate:

    def test_copies_are_independent(self):
        replicas = replicate_policy(init_network([6, 8, 5], 0), 3)
        assert len(replicas) == 3
        replicas[0].layers[0].weights += 1.0
        assert replicas[1].parameters_equal(replicas[2])
        assert not replicas[0].parameters_equal(replicas[1])

    def test_needs_a_replica(self):
        with pytest.raises(ContractViolation):
            replicate_policy(init_network([6, 5], 0), 0)


class TestBuildTransfer:

    def test_four_to_ten_agents(self, tmp_path):
        pretrained = init_network([feature_dim(4), 16, 5], 7)
        path = save_weights(pretrained, tmp_path / "vdn4.wts")

        agents = build_transfer(path, MultiEnvConfig(n_agents=10))
        assert len(agents) == 10
        reference = agents[0].online
        assert reference.input_dim == feature_dim(10)
        for agent in agents:
            assert agent.online.parameters_equal(reference)
            assert agent.target.parameters_equal(agent.online)
            assert agent.steps_since_sync == 0
        assert agents[0].online.layers[0].weights is not agents[1].online.layers[0].weights

    def test_known_agents_act_as_before(self, tmp_path):
        pretrained = init_network([feature_dim(4), 16, 5], 3)
        path = save_weights(pretrained, tmp_path / "vdn4.wts")
        env = MultiJunctionEnv(MultiEnvConfig(n_agents=10, seed=1))
        agents = build_transfer(path, env.config)
        _, obs = env.reset()
        for i in range(4):
            original = pretrained.forward(encode_observation(obs[i], env.layout, i, 4))
            transferred = agents[i].online.forward(encode_observation(obs[i], env.layout, i, 10))
            np.testing.assert_array_equal(transferred, original)

    def test_pre_padded_weights_load_as_is(self, tmp_path):
        pretrained = init_network([feature_dim(10), 8, 5], 1)
        path = save_weights(pretrained, tmp_path / "padded.wts")
        agents = build_transfer(path, MultiEnvConfig(n_agents=10))
        assert agents[0].online.parameters_equal(pretrained)

    def test_explicit_identity_slots(self, tmp_path):
        path = save_weights(init_network([feature_dim(4), 8, 5], 1), tmp_path / "w.wts")
        agents = build_transfer(path, MultiEnvConfig(n_agents=6), id_slots=12)
        assert len(agents) == 6
        assert agents[0].online.input_dim == feature_dim(12)

    def test_too_wide_network(self, tmp_path):
        path = save_weights(init_network([feature_dim(10), 8, 5], 1), tmp_path / "wide.wts")
        with pytest.raises(WeightsLoadError):
            build_transfer(path, MultiEnvConfig(n_agents=4))

    def test_missing_weights(self, tmp_path):
        with pytest.raises(WeightsLoadError):
            build_transfer(tmp_path / "absent.wts", MultiEnvConfig(n_agents=4))

    def test_file_survives_round_trip(self, tmp_path):
        net = init_network([feature_dim(4), 8, 5], 2)
        path = save_weights(net, tmp_path / "w.wts")
        assert format_weights(load_weights(path)) == path.read_text()
