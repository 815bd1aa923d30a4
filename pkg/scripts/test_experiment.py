"""
Tests for running whole configured stages across seeds.
"""

import sys
from dataclasses import replace
from pathlib import Path

# Add parent directory to path to allow imports
sys.path.insert(0, str(Path(__file__).parent.parent))

import pytest

from agents.network import load_weights
from agents.tabular import load_qtable, merge_tables, save_qtable
from config.settings import THREADS_ENV, parse_config, with_overrides
from envs.multi import feature_dim
from training.experiment import run_experiment
from utils.errors import ConfigurationError
from utils.metrics import read_metrics

TINY_DEEP = [
    "experiment.episodes = 2",
    "experiment.seeds = 1,2",
    "env.max_steps = 8",
    "learning.hidden = 8",
    "learning.warmup = 8",
    "learning.batch_size = 4",
    "learning.buffer_capacity = 100",
    "learning.target_sync = 5",
]


def stage(output_dir, *lines):
    return with_overrides(parse_config("\n".join(lines)), output_dir=output_dir)


def subtask(output_dir, variant, seeds="1-3"):
    return stage(
        output_dir,
        "experiment.stage = tabular-subtask",
        f"env.variant = {variant}",
        "experiment.episodes = 5",
        f"experiment.seeds = {seeds}",
        f"experiment.artifact = {variant}.qt",
    )


class TestTabularStages:

    def test_one_series_per_seed(self, tmp_path):
        metrics = run_experiment(subtask(tmp_path, "goal"))
        assert metrics == tmp_path / "subtask-goal.csv"
        rows = read_metrics(metrics)
        assert [r.seed for r in rows] == [1] * 5 + [2] * 5 + [3] * 5
        assert {r.run_id for r in rows} == {"subtask-goal"}
        for name in ("goal.qt", "goal-seed2.qt", "goal-seed3.qt"):
            assert (tmp_path / name).exists()

    def test_bytes_do_not_depend_on_directory_or_threads(self, tmp_path, monkeypatch):
        monkeypatch.delenv(THREADS_ENV, raising=False)
        first = run_experiment(subtask(tmp_path / "a", "avoid"))
        monkeypatch.setenv(THREADS_ENV, "1")
        second = run_experiment(subtask(tmp_path / "b", "avoid"))
        assert first.read_bytes() == second.read_bytes()
        assert (tmp_path / "a" / "avoid-seed2.qt").read_bytes() == (tmp_path / "b" / "avoid-seed2.qt").read_bytes()

    def test_merged_init_and_frozen_evaluation(self, tmp_path):
        run_experiment(subtask(tmp_path, "goal", seeds="1"))
        run_experiment(subtask(tmp_path, "avoid", seeds="1"))
        merged = merge_tables([load_qtable(tmp_path / "goal.qt"), load_qtable(tmp_path / "avoid.qt")])
        save_qtable(merged, tmp_path / "merged.qt")

        joint = [
            "experiment.stage = tabular-joint",
            "experiment.episodes = 4",
            "experiment.seeds = 1",
            "experiment.init = merged.qt",
        ]
        trained = run_experiment(stage(tmp_path, *joint, "experiment.artifact = joint.qt", "experiment.run_id = joint-merged"))
        assert len(read_metrics(trained)) == 4
        assert load_qtable(tmp_path / "joint.qt") != merged

        frozen = run_experiment(stage(tmp_path, *joint, "experiment.frozen = true", "experiment.run_id = frozen"))
        assert all(r.epsilon == 0.0 for r in read_metrics(frozen))
        assert load_qtable(tmp_path / "merged.qt") == merged


class TestDeepStages:

    def test_pretrain_then_transfer(self, tmp_path):
        pretrain = stage(
            tmp_path, "experiment.stage = vdn-pretrain", "env.n_agents = 2", "env.pad_agents = 4",
            "experiment.artifact = vdn.wts", *TINY_DEEP,
        )
        rows = read_metrics(run_experiment(pretrain))
        assert len(rows) == 4
        assert load_weights(tmp_path / "vdn.wts").input_dim == feature_dim(4)
        assert (tmp_path / "vdn-seed2.wts").exists()

        transfer = stage(
            tmp_path, "experiment.stage = idql-transfer", "env.n_agents = 4",
            "experiment.init = vdn.wts", *TINY_DEEP,
        )
        rows = read_metrics(run_experiment(transfer))
        assert {r.run_id for r in rows} == {"idql-transfer"}
        assert sorted({r.seed for r in rows}) == [1, 2]

    def test_scratch_is_deterministic(self, tmp_path):
        lines = ["experiment.stage = idql-scratch", "env.n_agents = 2", *TINY_DEEP]
        first = run_experiment(stage(tmp_path / "a", *lines))
        second = run_experiment(stage(tmp_path / "b", *lines))
        assert first.read_bytes() == second.read_bytes()

    def test_transfer_without_init_writes_nothing(self, tmp_path):
        config = parse_config("\n".join(["experiment.stage = idql-transfer", *TINY_DEEP]))
        with pytest.raises(ConfigurationError):
            run_experiment(replace(config, output_dir=tmp_path))
        assert list(tmp_path.iterdir()) == []
