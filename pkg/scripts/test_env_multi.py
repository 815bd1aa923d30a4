"""
Tests for the multi-agent junction and its observation encoding.
"""

import sys
from pathlib import Path

# Add parent directory to path to allow imports
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest

from envs.gridworld import Action, Position
from envs.multi import (
    AgentSlot,
    MultiEnvConfig,
    MultiEnvState,
    MultiJunctionEnv,
    detect_collisions,
    encode_all,
    encode_observation,
    feature_dim,
)
from utils.errors import ConfigurationError, ContractViolation

INWARD = {"north": Action.DOWN, "south": Action.UP, "west": Action.RIGHT, "east": Action.LEFT}


def make_env(n_agents=3, seed=0, **kwargs):
    return MultiJunctionEnv(MultiEnvConfig(n_agents=n_agents, seed=seed, **kwargs))


def crafted(*slots):
    return MultiEnvState(agents=tuple(slots), rng=np.random.default_rng(0))


class TestReset:

    def test_first_wave_on_distinct_spawns(self):
        env = make_env(n_agents=4, seed=1)
        for _ in range(50):
            state, obs = env.reset()
            positions = [slot.pos for slot in state.agents]
            assert len(set(positions)) == 4
            for slot, o in zip(state.agents, obs):
                assert slot.pos in env.layout.spawn_points
                assert env.layout.arm_of(slot.dest) != env.layout.arm_of(slot.pos)
                assert o.target == slot.dest
                assert o.step_fraction == 0.0

    def test_same_seed_same_episode(self):
        a, b = make_env(seed=9), make_env(seed=9)
        for _ in range(10):
            assert a.reset()[0] == b.reset()[0]

    def test_overflow_agents_wait(self):
        env = make_env(n_agents=10)
        state, obs = env.reset()
        assert sum(state.active) == 8
        assert sum(slot.waiting for slot in state.agents) == 2
        assert sum(o is None for o in obs) == 2

    def test_capacity_enforced(self):
        assert MultiEnvConfig(n_agents=16).capacity == 16
        with pytest.raises(ConfigurationError):
            MultiEnvConfig(n_agents=17)
        with pytest.raises(ConfigurationError):
            MultiEnvConfig(n_agents=0)

    def test_penalty_ordering_enforced(self):
        with pytest.raises(ConfigurationError):
            MultiEnvConfig(collision_penalty=-0.001)


class TestStep:

    def test_wrong_action_count(self):
        env = make_env(n_agents=3)
        state, _ = env.reset()
        with pytest.raises(ContractViolation):
            env.step(state, [Action.STAY, Action.STAY])

    def test_finished_episode_rejected(self):
        env = make_env(n_agents=1)
        state = MultiEnvState(agents=(AgentSlot(pos=None, dest=Position(0, 6), arrived=True),), done=True)
        with pytest.raises(ContractViolation):
            env.step(state, [Action.STAY])

    def test_step_penalty_only(self):
        env = make_env(n_agents=1)
        state = crafted(AgentSlot(pos=Position(6, 6), dest=Position(0, 6)))
        nxt, _, rewards, dones = env.step(state, [Action.STAY])
        assert rewards == [-0.01]
        assert dones == [False]
        assert nxt.collisions == 0

    def test_same_cell_collision_reverts_both(self):
        env = make_env(n_agents=2)
        state = crafted(
            AgentSlot(pos=Position(6, 5), dest=Position(0, 6)),
            AgentSlot(pos=Position(6, 7), dest=Position(0, 6)),
        )
        nxt, _, rewards, _ = env.step(state, [Action.RIGHT, Action.LEFT])
        assert rewards == [pytest.approx(-10.01), pytest.approx(-10.01)]
        assert [s.pos for s in nxt.agents] == [Position(6, 5), Position(6, 7)]
        assert nxt.collisions == 2

    def test_swap_collision(self):
        env = make_env(n_agents=2)
        state = crafted(
            AgentSlot(pos=Position(6, 5), dest=Position(0, 6)),
            AgentSlot(pos=Position(6, 6), dest=Position(0, 6)),
        )
        nxt, _, rewards, _ = env.step(state, [Action.RIGHT, Action.LEFT])
        assert rewards == [pytest.approx(-10.01)] * 2
        assert [s.pos for s in nxt.agents] == [Position(6, 5), Position(6, 6)]

    def test_rear_end_cascade(self):
        # The front pair collides and is reverted, which blocks the follower.
        env = make_env(n_agents=3)
        state = crafted(
            AgentSlot(pos=Position(6, 4), dest=Position(0, 6)),
            AgentSlot(pos=Position(6, 5), dest=Position(0, 6)),
            AgentSlot(pos=Position(6, 7), dest=Position(0, 6)),
        )
        nxt, _, rewards, _ = env.step(state, [Action.RIGHT, Action.RIGHT, Action.LEFT])
        assert rewards == [pytest.approx(-10.01)] * 3
        assert [s.pos for s in nxt.agents] == [Position(6, 4), Position(6, 5), Position(6, 7)]

    def test_following_into_vacated_cell_is_fine(self):
        env = make_env(n_agents=2)
        state = crafted(
            AgentSlot(pos=Position(6, 4), dest=Position(0, 6)),
            AgentSlot(pos=Position(6, 5), dest=Position(0, 6)),
        )
        nxt, _, rewards, _ = env.step(state, [Action.RIGHT, Action.RIGHT])
        assert rewards == [-0.01, -0.01]
        assert [s.pos for s in nxt.agents] == [Position(6, 5), Position(6, 6)]

    def test_arrival_removes_vehicle(self):
        env = make_env(n_agents=2)
        state = crafted(
            AgentSlot(pos=Position(1, 6), dest=Position(0, 6)),
            AgentSlot(pos=Position(7, 12), dest=Position(0, 7)),
        )
        nxt, obs, rewards, dones = env.step(state, [Action.UP, Action.STAY])
        assert rewards == [-0.01, -0.01]
        assert nxt.agents[0].arrived and not nxt.agents[0].active
        assert obs[0] is None and obs[1] is not None
        assert not any(dones)

        after, _, rewards, _ = env.step(nxt, [Action.STAY, Action.STAY])
        assert rewards[0] == 0.0
        assert after.agents[0].arrived

    def test_all_arrived_ends_episode(self):
        env = make_env(n_agents=1)
        state = crafted(AgentSlot(pos=Position(1, 6), dest=Position(0, 6)))
        nxt, _, _, dones = env.step(state, [Action.UP])
        assert nxt.done and dones == [True]

    def test_truncation(self):
        env = make_env(n_agents=1, max_steps=3)
        state = MultiEnvState(
            agents=(AgentSlot(pos=Position(6, 6), dest=Position(0, 6)),),
            step=2,
            rng=np.random.default_rng(0),
        )
        nxt, _, _, dones = env.step(state, [Action.STAY])
        assert nxt.done and dones == [True]

    def test_waiting_vehicles_enter_freed_spawns(self):
        env = make_env(n_agents=10, seed=4)
        state, _ = env.reset()
        actions = [
            INWARD[env.layout.arm_of(slot.pos)] if slot.active else Action.STAY
            for slot in state.agents
        ]
        nxt, obs, rewards, _ = env.step(state, actions)
        assert sum(nxt.active) == 10
        assert nxt.collisions == 0
        for slot, reward in zip(state.agents, rewards):
            assert reward == (-0.01 if slot.active else 0.0)
        for i, slot in enumerate(nxt.agents):
            if state.agents[i].waiting:
                assert slot.pos in env.layout.spawn_points
                assert env.layout.arm_of(slot.dest) != env.layout.arm_of(slot.pos)
                assert obs[i] is not None

    def test_random_play_stays_consistent(self):
        env = make_env(n_agents=6, seed=2)
        rng = np.random.default_rng(2)
        for _ in range(5):
            state, _ = env.reset()
            while not state.done:
                actions = [Action(int(a)) for a in rng.integers(5, size=6)]
                state, _, rewards, _ = env.step(state, actions)
                assert sum(rewards) <= 0
                positions = [s.pos for s in state.agents if s.active]
                assert len(positions) == len(set(positions))
                assert all(p in env.layout.road_cells for p in positions)


class TestDetectCollisions:

    def test_same_cell(self):
        assert detect_collisions([Position(0, 0), Position(0, 2)], [Position(0, 1), Position(0, 1)]) == {0, 1}

    def test_swap(self):
        assert detect_collisions([Position(0, 0), Position(0, 1)], [Position(0, 1), Position(0, 0)]) == {0, 1}

    def test_no_conflict(self):
        assert detect_collisions([Position(0, 0), Position(5, 5)], [Position(0, 1), Position(5, 5)]) == set()

    def test_length_mismatch(self):
        with pytest.raises(ContractViolation):
            detect_collisions([Position(0, 0)], [])


class TestEncoding:

    def test_dimension(self):
        assert feature_dim(0) == 41
        assert feature_dim(4) == 45

    def test_identity_and_one_hot(self):
        env = make_env(n_agents=4)
        state, obs = env.reset()
        vec = encode_observation(obs[2], env.layout, 2, 4)
        assert vec.shape == (45,)
        assert vec[41:].tolist() == [0.0, 0.0, 1.0, 0.0]
        # One code per mask cell.
        assert vec[2:38].sum() == 9.0
        assert 0.0 <= vec.min() and vec.max() <= 1.0

    def test_absent_vehicle_is_identity_only(self):
        env = make_env(n_agents=4)
        vec = encode_observation(None, env.layout, 1, 4)
        assert vec.sum() == 1.0 and vec[42] == 1.0

    def test_widening_appends_zeros(self):
        env = make_env(n_agents=4)
        _, obs = env.reset()
        narrow = encode_observation(obs[3], env.layout, 3, 4)
        wide = encode_observation(obs[3], env.layout, 3, 10)
        np.testing.assert_array_equal(wide[:45], narrow)
        assert not wide[45:].any()

    def test_index_must_fit(self):
        env = make_env(n_agents=4)
        with pytest.raises(ContractViolation):
            encode_observation(None, env.layout, 4, 4)

    def test_encode_all_rows(self):
        env = make_env(n_agents=10)
        _, obs = env.reset()
        stacked = encode_all(obs, env.layout, 10)
        assert stacked.shape == (10, feature_dim(10))
        np.testing.assert_array_equal(stacked.sum(axis=0)[41:], np.ones(10))
