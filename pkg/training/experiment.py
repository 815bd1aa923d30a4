"""
Seeded experiment orchestration.

A configured stage runs once per seed. Seeds may run on a thread pool; each
seed keeps its rows private and the metrics file is written afterwards in
seed order, so its bytes do not depend on scheduling.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List

from agents.network import save_weights
from agents.tabular import load_qtable, save_qtable
from agents.transfer import build_transfer
from config.settings import ExperimentConfig, Stage, thread_limit
from utils.metrics import MetricsLogger, MetricsRow
from .deep import train_idql, train_vdn
from .tabular import train_tabular

logger = logging.getLogger(__name__)


def run_experiment(config: ExperimentConfig) -> Path:
    """
    Run a stage for every configured seed and write one metrics file.

    Tables and weights go to the artifact path for the first seed and to
    ``<stem>-seed<k><suffix>`` for the others.

    Returns:
        Path of the metrics CSV

    Raises:
        ConfigurationError: On invalid stage wiring, before any training
        WeightsLoadError, QTableLoadError: If an init file cannot be used
    """
    config.validate()
    workers = thread_limit(len(config.seeds))
    logger.info(
        "Running %s (%s) for seeds %s on %d thread(s)",
        config.name, config.stage.value, list(config.seeds), workers,
    )

    if workers == 1:
        per_seed = [run_seed(config, seed) for seed in config.seeds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_seed = list(pool.map(lambda s: run_seed(config, s), config.seeds))

    metrics = MetricsLogger(config.metrics_path)
    for rows in per_seed:
        metrics.log_rows(rows)
    logger.info("Wrote %d episode rows to %s", len(metrics.rows), config.metrics_path)
    return config.metrics_path


def run_seed(config: ExperimentConfig, seed: int) -> List[MetricsRow]:
    """Train one seed of a stage and write its artifact, if any."""
    stage = config.stage
    common = dict(run_id=config.name, progress=config.progress, log_every=config.log_every)
    artifact = config.artifact_for_seed(seed)

    if stage.is_tabular:
        params = config.learning.tabular_params(config.episodes)
        init_path = config.init_for_seed(seed)
        init = load_qtable(init_path) if init_path is not None else None
        table, rows = train_tabular(
            config.env.single_config(stage, seed), params, config.episodes,
            init=init, frozen=config.frozen, **common,
        )
        if artifact is not None:
            save_qtable(table, artifact)
        return rows

    params = config.learning.deep_params(config.episodes)
    env_config = config.env.multi_config(stage, seed)
    id_slots = config.env.id_slots

    if stage is Stage.VDN_PRETRAIN:
        agent, rows = train_vdn(env_config, params, config.episodes, id_slots=id_slots, **common)
        save_weights(agent.online, artifact)
        return rows

    agents = None
    if stage is Stage.IDQL_TRANSFER:
        agents = build_transfer(config.init_for_seed(seed), env_config, id_slots)
    _, rows = train_idql(env_config, params, config.episodes, agents=agents, id_slots=id_slots, **common)
    return rows
