"""
Tests for tabular Q-learning, Q-table merging and the table file format.
"""

import itertools
import sys
from pathlib import Path

# Add parent directory to path to allow imports
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest

from agents.tabular import (
    LearningParams,
    QTable,
    linear_epsilon,
    load_qtable,
    merge_tables,
    q_update,
    save_qtable,
    select_action,
)
from envs.gridworld import CellCode, Position, build_junction_layout, observe, state_key
from envs.single import SingleEnvConfig, SingleVariant
from training.tabular import evaluate_qtable, train_tabular
from utils.errors import ContractViolation, QTableLoadError


def table_of(**rows):
    return QTable({k: np.array(v, dtype=float) for k, v in rows.items()})


class TestQUpdate:

    def test_zero_alpha_is_identity(self):
        table = table_of(s=[0.5, 0, 0, 0, 0], t=[2.0, 0, 0, 0, 0])
        before = table.copy()
        q_update(table, "s", 0, 1.0, "t", False, LearningParams(alpha=0.0))
        assert table == before

    def test_hand_computed_backup(self):
        table = table_of(s=[0.5, 0, 0, 0, 0], t=[0, 2.0, 0, 0, 0])
        q_update(table, "s", 0, 1.0, "t", False, LearningParams(alpha=0.1, gamma=0.9))
        assert table.values("s")[0] == pytest.approx(0.73)

    def test_terminal_with_full_step_is_reward(self):
        table = table_of(s=[0.5, 0, 0, 0, 0], t=[0, 2.0, 0, 0, 0])
        q_update(table, "s", 0, 1.4, "t", True, LearningParams(alpha=1.0))
        assert table.values("s")[0] == 1.4

    def test_unseen_state_is_created(self):
        table = QTable()
        q_update(table, "new", 3, 2.0, "other", False, LearningParams(alpha=0.5))
        assert table.values("new").tolist() == [0.0, 0.0, 0.0, 1.0, 0.0]
        assert "other" not in table

    def test_non_finite_reward_rejected(self):
        with pytest.raises(ContractViolation):
            q_update(QTable(), "s", 0, float("nan"), "t", False, LearningParams())

    def test_two_state_chain_converges(self):
        # a --0--> b (r=0); a --1--> a (r=0.1); b --0--> end (r=1); b --1--> end (r=0)
        params = LearningParams(alpha=0.5, gamma=0.95)
        table = QTable()
        for _ in range(2000):
            q_update(table, "a", 0, 0.0, "b", False, params)
            q_update(table, "a", 1, 0.1, "a", False, params)
            q_update(table, "b", 0, 1.0, "end", True, params)
            q_update(table, "b", 1, 0.0, "end", True, params)
        assert table.values("b")[0] == pytest.approx(1.0, abs=1e-6)
        assert table.values("b")[1] == pytest.approx(0.0, abs=1e-6)
        assert table.values("a")[0] == pytest.approx(0.95, abs=1e-6)
        assert table.values("a")[1] == pytest.approx(2.0, abs=1e-6)

    def test_invalid_params(self):
        with pytest.raises(ContractViolation):
            LearningParams(alpha=1.5)
        with pytest.raises(ContractViolation):
            LearningParams(gamma=1.0)
        with pytest.raises(ContractViolation):
            LearningParams(epsilon_start=0.1, epsilon_end=0.5)


class TestSelectAction:

    def test_pure_argmax(self):
        table = table_of(s=[0, 0, 3, 0, 0])
        assert select_action(table, "s", 0.0, np.random.default_rng(0)) == 2

    def test_ties_go_to_lowest_index(self):
        table = table_of(s=[1, 1, 1, 1, 1])
        assert select_action(table, "s", 0.0, np.random.default_rng(0)) == 0
        assert select_action(QTable(), "unseen", 0.0, np.random.default_rng(0)) == 0

    def test_uniform_exploration(self):
        rng = np.random.default_rng(17)
        counts = np.bincount([select_action(QTable(), "s", 1.0, rng) for _ in range(10_000)], minlength=5)
        assert np.all(np.abs(counts / 10_000 - 0.2) <= 0.02)

    def test_greedy_draw_consumes_one_number(self):
        rng, reference = np.random.default_rng(3), np.random.default_rng(3)
        select_action(table_of(s=[0, 1, 0, 0, 0]), "s", 0.0, rng)
        reference.random()
        assert rng.random() == reference.random()

    def test_scaling_keeps_greedy_action(self):
        values = np.random.default_rng(8).normal(size=(50, 5))
        table = QTable({str(i): v for i, v in enumerate(values)})
        scaled = QTable({str(i): 3.7 * v for i, v in enumerate(values)})
        for key in table.keys():
            assert table.greedy(key) == scaled.greedy(key)

    def test_epsilon_range(self):
        with pytest.raises(ContractViolation):
            select_action(QTable(), "s", 1.5, np.random.default_rng(0))


class TestEpsilonSchedule:

    def test_linear_then_flat(self):
        assert linear_epsilon(1.0, 0.05, 700, 0) == 1.0
        assert linear_epsilon(1.0, 0.05, 700, 350) == pytest.approx(0.525)
        assert linear_epsilon(1.0, 0.05, 700, 700) == pytest.approx(0.05)
        assert linear_epsilon(1.0, 0.05, 700, 5000) == pytest.approx(0.05)

    def test_params_delegate(self):
        params = LearningParams(epsilon_start=0.5, epsilon_end=0.1, epsilon_decay_episodes=4)
        assert [params.epsilon_at(e) for e in range(6)] == pytest.approx([0.5, 0.4, 0.3, 0.2, 0.1, 0.1])


class TestMerge:

    def test_disjoint_keys_pass_through(self):
        merged = merge_tables([table_of(k1=[1, 0, 0, 0, 0]), table_of(k2=[0, 2, 0, 0, 0])])
        assert merged == table_of(k1=[1, 0, 0, 0, 0], k2=[0, 2, 0, 0, 0])

    def test_shared_key_is_mean(self):
        merged = merge_tables([table_of(k=[1, 3, 0, 0, 0]), table_of(k=[3, 5, 0, 0, 0])])
        assert merged.values("k").tolist() == [2.0, 4.0, 0.0, 0.0, 0.0]

    def test_single_table_identity(self):
        table = table_of(a=[0.1, 0.2, 0.3, 0.4, 0.5], b=[-1, 0, 1, 0, 0])
        assert merge_tables([table]) == table

    def test_order_independent(self):
        rng = np.random.default_rng(1)
        tables = [QTable({k: rng.normal(size=5) for k in "abcd"[:i + 2]}) for i in range(3)]
        expected = merge_tables(tables)
        for order in itertools.permutations(tables):
            assert merge_tables(list(order)) == expected

    def test_duplicates_are_idempotent(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            table = QTable({k: rng.normal(size=5) for k in "xyz"})
            assert merge_tables([table, table.copy()]) == table

    def test_inputs_untouched_and_variants_joined(self):
        goal, avoid = table_of(k=[1, 0, 0, 0, 0]), table_of(k=[3, 0, 0, 0, 0])
        goal.metadata.variant, avoid.metadata.variant = "goal", "avoid"
        merged = merge_tables([goal, avoid])
        assert goal.values("k")[0] == 1.0
        assert merged.metadata.variant == "avoid+goal"

    def test_empty_rejected(self):
        with pytest.raises(ContractViolation):
            merge_tables([])


class TestQTableFile:

    def test_round_trip(self, tmp_path):
        layout = build_junction_layout(3, 1)
        obs = observe(layout, {Position(2, 3): int(CellCode.OTHER_VEHICLE)}, Position(3, 3), target=Position(0, 3))
        key = state_key(obs)
        table = QTable({key: np.array([0.1, -2.5, 1e-17, 3.0, 1 / 3]), "x": np.zeros(5)})
        path = save_qtable(table, tmp_path / "sub" / "goal.qt")
        loaded = load_qtable(path)
        assert loaded == table
        assert key in loaded
        assert loaded.metadata.variant == "goal"

    def test_canonical_text(self, tmp_path):
        path = save_qtable(table_of(b=[1, 0, 0, 0, 0], a=[0.5, 0, 0, 0, 0]), tmp_path / "t.qt")
        assert path.read_text().splitlines() == [
            "SRLQT 1",
            "actions 5",
            "a 0.5 0.0 0.0 0.0 0.0",
            "b 1.0 0.0 0.0 0.0 0.0",
        ]

    @pytest.mark.parametrize("body", [
        "SRLQT 2\nactions 5\n",
        "SRLQT 1\nactions 4\n",
        "SRLQT 1\nactions 5\na 1 2 3\n",
        "SRLQT 1\nactions 5\na 1 2 3 4 x\n",
        "SRLQT 1\nactions 5\na 1 2 3 4 nan\n",
        "SRLQT 1\nactions 5\na 1 2 3 4 5\na 1 2 3 4 5\n",
    ])
    def test_malformed_files(self, tmp_path, body):
        path = tmp_path / "bad.qt"
        path.write_text(body)
        with pytest.raises(QTableLoadError):
            load_qtable(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(QTableLoadError):
            load_qtable(tmp_path / "nope.qt")


class TestTrainTabular:

    def test_zero_episodes_rejected(self):
        with pytest.raises(ContractViolation):
            train_tabular(SingleEnvConfig(), LearningParams(), 0)

    def test_deterministic(self):
        config = SingleEnvConfig(variant=SingleVariant.JOINT, seed=5)
        params = LearningParams(epsilon_decay_episodes=30)
        a_table, a_rows = train_tabular(config, params, 40)
        b_table, b_rows = train_tabular(config, params, 40)
        assert a_table == b_table
        assert a_rows == b_rows

    def test_rows_describe_episodes(self):
        config = SingleEnvConfig(variant=SingleVariant.AVOID_ONLY, seed=2, max_steps=20)
        _, rows = train_tabular(config, LearningParams(epsilon_decay_episodes=10), 15, run_id="avoid")
        assert [r.episode for r in rows] == list(range(15))
        assert all(r.run_id == "avoid" and r.seed == 2 for r in rows)
        assert all(r.steps == 20 for r in rows)
        assert rows[0].epsilon == 1.0
        for r in rows:
            assert r.return_total == pytest.approx(-0.2 * r.collisions)

    def test_init_is_copied(self):
        config = SingleEnvConfig(seed=1)
        init, _ = train_tabular(config, LearningParams(epsilon_decay_episodes=10), 20)
        snapshot = init.copy()
        trained, _ = train_tabular(config, LearningParams(epsilon_decay_episodes=10), 20, init=init)
        assert init == snapshot
        assert trained != init

    def test_frozen_leaves_table_alone(self):
        config = SingleEnvConfig(seed=1)
        init, _ = train_tabular(config, LearningParams(epsilon_decay_episodes=10), 20)
        frozen, rows = train_tabular(config, LearningParams(), 10, init=init, frozen=True)
        assert frozen == init
        assert all(r.epsilon == 0.0 for r in rows)

    def test_goal_task_is_learned(self):
        config = SingleEnvConfig(variant=SingleVariant.GOAL_ONLY, seed=0)
        params = LearningParams(epsilon_end=0.01, epsilon_decay_episodes=1400)
        table, rows = train_tabular(config, params, 2000)
        assert np.mean([r.return_total for r in rows[-50:]]) >= 4.0
        summary = evaluate_qtable(table, config, 50)
        assert summary.mean_return >= 4.0
        assert summary.collisions == 0
