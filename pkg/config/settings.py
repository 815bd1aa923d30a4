"""
Experiment configuration.

Configs are flat text files of ``section.key = value`` lines. Blank lines and
``#`` comments are ignored; unknown keys and malformed values are errors that
name the offending line. Values left out fall back to stage-dependent
defaults: the tabular stages use the 7x7 single-lane junction, the deep
stages the 14x14 two-lane junction.
"""

import logging
import os
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

from agents.tabular import LearningParams
from envs.gridworld import build_junction_layout
from envs.multi import MultiEnvConfig
from envs.single import SingleEnvConfig, SingleVariant
from training.deep import DeepParams
from utils.errors import ConfigurationError, ContractViolation

logger = logging.getLogger(__name__)

THREADS_ENV = "SRL_THREADS"
DEFAULT_SEEDS = tuple(range(1, 11))


class Stage(str, Enum):
    TABULAR_SUBTASK = "tabular-subtask"
    TABULAR_JOINT = "tabular-joint"
    VDN_PRETRAIN = "vdn-pretrain"
    IDQL_SCRATCH = "idql-scratch"
    IDQL_TRANSFER = "idql-transfer"

    @property
    def is_tabular(self) -> bool:
        return self in (Stage.TABULAR_SUBTASK, Stage.TABULAR_JOINT)

    @property
    def artifact_suffix(self) -> str:
        return ".qt" if self.is_tabular else ".wts"


@dataclass(frozen=True)
class StageDefaults:
    arm_length: int
    arm_width: int
    max_steps: int
    collision_penalty: float
    step_penalty: float


TABULAR_DEFAULTS = StageDefaults(arm_length=3, arm_width=1, max_steps=50, collision_penalty=-0.2, step_penalty=0.0)
DEEP_DEFAULTS = StageDefaults(arm_length=6, arm_width=2, max_steps=60, collision_penalty=-10.0, step_penalty=-0.01)


@dataclass(frozen=True)
class EnvSettings:
    """
    ``env.*`` keys. None means "use the stage default".

    Attributes:
        variant: goal, avoid or joint (tabular stages)
        arm_length: Cells per junction arm
        arm_width: Lanes per arm
        max_steps: Episode truncation length
        seed: Single seed used when experiment.seeds is absent
        goal_reward: Single-agent goal reward
        collision_penalty: Reward per collision
        step_penalty: Multi-agent per-tick reward
        n_agents: Vehicles in the multi-agent junction
        pad_agents: Identity slots of the encoding (>= n_agents); sizing the
            network for a larger junction is how pretraining pads it
        adversary_period: The single-agent adversary moves every this many ticks
    """
    variant: Optional[SingleVariant] = None
    arm_length: Optional[int] = None
    arm_width: Optional[int] = None
    max_steps: Optional[int] = None
    seed: Optional[int] = None
    goal_reward: float = 5.0
    collision_penalty: Optional[float] = None
    step_penalty: Optional[float] = None
    n_agents: int = 4
    pad_agents: Optional[int] = None
    adversary_period: int = 1

    @property
    def id_slots(self) -> int:
        return self.n_agents if self.pad_agents is None else self.pad_agents

    def single_config(self, stage: Stage, seed: int) -> SingleEnvConfig:
        """Single-agent junction for one seed."""
        defaults = _defaults_for(stage)
        variant = SingleVariant.JOINT if stage is Stage.TABULAR_JOINT else self.variant
        return SingleEnvConfig(
            variant=variant or SingleVariant.JOINT,
            layout=build_junction_layout(_pick(self.arm_length, defaults.arm_length), _pick(self.arm_width, defaults.arm_width)),
            max_steps=_pick(self.max_steps, defaults.max_steps),
            goal_reward=self.goal_reward,
            collision_penalty=_pick(self.collision_penalty, defaults.collision_penalty),
            seed=seed,
            adversary_period=self.adversary_period,
        )

    def multi_config(self, stage: Stage, seed: int) -> MultiEnvConfig:
        """Multi-agent junction for one seed."""
        defaults = _defaults_for(stage)
        return MultiEnvConfig(
            n_agents=self.n_agents,
            layout=build_junction_layout(_pick(self.arm_length, defaults.arm_length), _pick(self.arm_width, defaults.arm_width)),
            max_steps=_pick(self.max_steps, defaults.max_steps),
            collision_penalty=_pick(self.collision_penalty, defaults.collision_penalty),
            step_penalty=_pick(self.step_penalty, defaults.step_penalty),
            seed=seed,
        )


@dataclass(frozen=True)
class LearningSettings:
    """``learning.*`` keys shared by the tabular and deep learners."""
    alpha: float = 0.1
    gamma: float = 0.95
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_episodes: Optional[int] = None
    epsilon_decay_fraction: float = 0.7
    lr: float = 5e-4
    batch_size: int = 32
    buffer_capacity: int = 50_000
    target_sync: int = 200
    hidden: Tuple[int, ...] = (64, 64)
    warmup: int = 500
    train_every: int = 1
    clip_norm: float = 10.0

    def decay_episodes(self, episodes: int) -> int:
        if self.epsilon_decay_episodes is not None:
            return self.epsilon_decay_episodes
        return max(1, int(round(self.epsilon_decay_fraction * episodes)))

    def tabular_params(self, episodes: int) -> LearningParams:
        return LearningParams(
            alpha=self.alpha,
            gamma=self.gamma,
            epsilon_start=self.epsilon_start,
            epsilon_end=self.epsilon_end,
            epsilon_decay_episodes=self.decay_episodes(episodes),
        )

    def deep_params(self, episodes: int) -> DeepParams:
        return DeepParams(
            gamma=self.gamma,
            lr=self.lr,
            batch_size=self.batch_size,
            buffer_capacity=self.buffer_capacity,
            target_sync=self.target_sync,
            hidden=tuple(self.hidden),
            warmup=self.warmup,
            train_every=self.train_every,
            clip_norm=self.clip_norm,
            epsilon_start=self.epsilon_start,
            epsilon_end=self.epsilon_end,
            epsilon_decay_episodes=self.decay_episodes(episodes),
        )


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One stage of the pipeline, run once per seed.

    Relative metrics, artifact and init paths resolve against output_dir.
    """
    stage: Stage
    run_id: Optional[str] = None
    episodes: int = 1000
    seeds: Tuple[int, ...] = DEFAULT_SEEDS
    output_dir: Path = Path("runs")
    metrics: Optional[str] = None
    artifact: Optional[str] = None
    init: Optional[str] = None
    frozen: bool = False
    progress: bool = False
    log_every: int = 0
    env: EnvSettings = field(default_factory=EnvSettings)
    learning: LearningSettings = field(default_factory=LearningSettings)

    @property
    def name(self) -> str:
        if self.run_id:
            return self.run_id
        if self.stage is Stage.TABULAR_SUBTASK and self.env.variant is not None:
            return f"subtask-{self.env.variant.value}"
        return self.stage.value

    @property
    def metrics_path(self) -> Path:
        return self._resolve(self.metrics or f"{self.name}.csv")

    @property
    def artifact_path(self) -> Optional[Path]:
        """Output table or weights, if the stage writes one."""
        if self.artifact:
            return self._resolve(self.artifact)
        if self.stage in (Stage.TABULAR_SUBTASK, Stage.VDN_PRETRAIN):
            return self._resolve(f"{self.name}{self.stage.artifact_suffix}")
        return None

    @property
    def init_path(self) -> Optional[Path]:
        return self._resolve(self.init) if self.init else None

    def artifact_for_seed(self, seed: int) -> Optional[Path]:
        """The first seed writes the plain path; later seeds add ``-seed<k>``."""
        path = self.artifact_path
        if path is None or seed == self.seeds[0]:
            return path
        return seed_variant(path, seed)

    def init_for_seed(self, seed: int) -> Optional[Path]:
        """Per-seed init file when one exists, the shared one otherwise."""
        path = self.init_path
        if path is None:
            return None
        paired = seed_variant(path, seed)
        return paired if paired.exists() else path

    def validate(self) -> "ExperimentConfig":
        """
        Check stage wiring before any training.

        Raises:
            ConfigurationError: On a wiring error or a missing init file
        """
        if self.episodes < 1:
            raise ConfigurationError(f"experiment.episodes must be positive, got {self.episodes}")
        if not self.seeds:
            raise ConfigurationError("experiment.seeds must not be empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigurationError(f"experiment.seeds has duplicates: {list(self.seeds)}")
        if self.log_every < 0:
            raise ConfigurationError("experiment.log_every must be non-negative")

        if self.stage is Stage.TABULAR_SUBTASK:
            if self.env.variant not in (SingleVariant.GOAL_ONLY, SingleVariant.AVOID_ONLY):
                raise ConfigurationError("tabular-subtask needs env.variant = goal or avoid")
            if self.init is not None:
                raise ConfigurationError("tabular-subtask trains from scratch; remove experiment.init")
        if self.stage is Stage.TABULAR_JOINT and self.env.variant not in (None, SingleVariant.JOINT):
            raise ConfigurationError("tabular-joint always uses the joint variant")
        if self.frozen and (self.stage is not Stage.TABULAR_JOINT or self.init is None):
            raise ConfigurationError("experiment.frozen evaluates an init table on tabular-joint only")
        if self.stage is Stage.VDN_PRETRAIN and self.init is not None:
            raise ConfigurationError("vdn-pretrain trains from scratch; remove experiment.init")
        if self.stage is Stage.IDQL_SCRATCH and self.init is not None:
            raise ConfigurationError("idql-scratch cannot take experiment.init; use idql-transfer")
        if self.stage is Stage.IDQL_TRANSFER and self.init is None:
            raise ConfigurationError("idql-transfer needs experiment.init pointing at pretrained weights")
        if self.stage in (Stage.IDQL_SCRATCH, Stage.IDQL_TRANSFER) and self.artifact is not None:
            raise ConfigurationError("IDQL stages write metrics only; remove experiment.artifact")
        if not self.stage.is_tabular and self.env.id_slots < self.env.n_agents:
            raise ConfigurationError(
                f"env.pad_agents={self.env.pad_agents} is smaller than env.n_agents={self.env.n_agents}"
            )

        if self.init_path is not None:
            missing = [s for s in self.seeds if not self.init_for_seed(s).exists()]
            if missing:
                raise ConfigurationError(f"init file {self.init_path} does not exist")

        # Build every environment once so layout and capacity errors surface here.
        for seed in self.seeds:
            if self.stage.is_tabular:
                self.env.single_config(self.stage, seed)
            else:
                self.env.multi_config(self.stage, seed)
        try:
            if self.stage.is_tabular:
                self.learning.tabular_params(self.episodes)
            else:
                self.learning.deep_params(self.episodes)
        except ContractViolation as e:
            raise ConfigurationError(f"invalid learning settings: {e}") from None
        return self

    def _resolve(self, name: Union[str, Path]) -> Path:
        path = Path(name)
        return path if path.is_absolute() else Path(self.output_dir) / path


def seed_variant(path: Path, seed: int) -> Path:
    """``dir/stem.ext`` -> ``dir/stem-seed<k>.ext``."""
    return path.with_name(f"{path.stem}-seed{seed}{path.suffix}")


def parse_seeds(text: str) -> Tuple[int, ...]:
    """
    Parse ``1,2,3``, ``1-10`` or a mix such as ``1-3,7``.

    Raises:
        ValueError: On malformed items or an empty list
    """
    seeds: List[int] = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        low, sep, high = item.partition("-")
        if sep and low:
            start, stop = int(low), int(high)
            if stop < start:
                raise ValueError(f"empty seed range {item!r}")
            seeds.extend(range(start, stop + 1))
        else:
            seeds.append(int(item))
    if not seeds:
        raise ValueError("no seeds given")
    return tuple(seeds)


def thread_limit(n_seeds: int) -> int:
    """Worker count for seed parallelism, capped by SRL_THREADS."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or not raw.strip():
        return max(1, n_seeds)
    try:
        limit = int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if limit < 1:
        raise ConfigurationError(f"{THREADS_ENV} must be positive, got {limit}")
    return max(1, min(limit, n_seeds))


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_widths(text: str) -> Tuple[int, ...]:
    widths = tuple(int(w) for w in text.replace(",", " ").split())
    if not widths:
        raise ValueError("expected at least one hidden width")
    return widths


_EXPERIMENT_PARSERS: Dict[str, Callable[[str], object]] = {
    "stage": Stage,
    "run_id": str,
    "episodes": int,
    "seeds": parse_seeds,
    "output_dir": Path,
    "metrics": str,
    "artifact": str,
    "init": str,
    "frozen": _parse_bool,
    "progress": _parse_bool,
    "log_every": int,
}


def _section_parsers(cls) -> Dict[str, Callable[[str], object]]:
    parsers = {}
    for item in fields(cls):
        if item.name == "variant":
            parsers[item.name] = SingleVariant
        elif item.name == "hidden":
            parsers[item.name] = _parse_widths
        else:
            default = item.default
            parsers[item.name] = float if isinstance(default, float) or item.name in (
                "collision_penalty", "step_penalty"
            ) else int
    return parsers


_PARSERS = {
    "experiment": _EXPERIMENT_PARSERS,
    "env": _section_parsers(EnvSettings),
    "learning": _section_parsers(LearningSettings),
}


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """
    Parse config text into an (unvalidated) ExperimentConfig.

    Raises:
        ConfigurationError: Naming ``source:line`` on unknown sections or
            keys, duplicates, malformed lines or values, or a missing stage
    """
    values: Dict[str, Dict[str, object]] = {name: {} for name in _PARSERS}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        section, dot, name = key.partition(".")
        if not sep or not dot or not value:
            raise ConfigurationError(f"{source}:{number}: expected 'section.key = value', got {raw.strip()!r}")
        if section not in _PARSERS:
            raise ConfigurationError(f"{source}:{number}: unknown section {section!r}")
        parser = _PARSERS[section].get(name)
        if parser is None:
            raise ConfigurationError(f"{source}:{number}: unknown key {key!r}")
        if name in values[section]:
            raise ConfigurationError(f"{source}:{number}: duplicate key {key!r}")
        try:
            values[section][name] = parser(value)
        except ValueError as e:
            raise ConfigurationError(f"{source}:{number}: bad value for {key}: {e}") from None

    experiment = values["experiment"]
    if "stage" not in experiment:
        raise ConfigurationError(f"{source}: missing experiment.stage")
    env = EnvSettings(**values["env"])
    if "seeds" not in experiment and env.seed is not None:
        experiment["seeds"] = (env.seed,)
    return ExperimentConfig(env=env, learning=LearningSettings(**values["learning"]), **experiment)


def load_config(path: Union[str, Path], validate: bool = True) -> ExperimentConfig:
    """
    Read a config file, validating it unless told not to.

    Callers that apply overrides first pass validate=False and validate the
    result through with_overrides.

    Raises:
        ConfigurationError: On a parse or wiring error
        OSError: If the file cannot be read
    """
    path = Path(path)
    config = parse_config(path.read_text(encoding="utf-8"), str(path))
    logger.debug("Loaded %s config from %s", config.stage.value, path)
    return config.validate() if validate else config


def with_overrides(config: ExperimentConfig, **overrides) -> ExperimentConfig:
    """
    Apply command-line overrides and re-validate.

    ``seed`` replaces the seed list with one seed; ``variant`` sets
    env.variant; every other keyword replaces the experiment field of the
    same name. None values are ignored.
    """
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if "seed" in overrides:
        overrides["seeds"] = (overrides.pop("seed"),)
    if "variant" in overrides:
        overrides["env"] = replace(config.env, variant=SingleVariant(overrides.pop("variant")))
    return replace(config, **overrides).validate()


def _defaults_for(stage: Stage) -> StageDefaults:
    return TABULAR_DEFAULTS if stage.is_tabular else DEEP_DEFAULTS


def _pick(value, default):
    return default if value is None else value
