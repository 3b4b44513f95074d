"""Typed experiment configuration with a strict plain-text loader.

Config files are INI-style: ``[section]`` headers, ``key = value`` lines,
``#`` comments (full-line or inline).  Unknown sections or keys are
errors, so a typo can never silently fall back to a default.  The
defaults encoded here are the desk-scale settings every command runs
with when no file is given; they are the single source of truth for
"the desk config" used throughout the test suite.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .envs import EnvSpec, make_spec
from .errors import ConfigError
from .genetics import GAConfig
from .policy_opt import CEMConfig
from .reward_net import TrainConfig


@dataclass
class EnvSection:
    """Environment choice plus the two seed-demo quality knobs.

    Quality is a noise level in [0, 1]; lower is better, so the good
    demo must have the smaller value.
    """

    name: str = "GridNav"
    demo_quality_good: float = 0.1
    demo_quality_bad: float = 0.5

    def __post_init__(self) -> None:
        make_spec(self.name)
        for label, q in (("good", self.demo_quality_good), ("bad", self.demo_quality_bad)):
            if not 0.0 <= q <= 1.0:
                raise ConfigError(f"demo_quality_{label} must lie in [0, 1], got {q}")
        if not self.demo_quality_good < self.demo_quality_bad:
            raise ConfigError(
                "demo_quality_good must be below demo_quality_bad, got "
                f"{self.demo_quality_good} vs {self.demo_quality_bad}"
            )


@dataclass
class DataSection:
    """Snippet subsampling and pair construction sizes."""

    n_snippets: int = 2000
    min_len: int = 15
    max_len: int = 30
    n_pairs: int = 4000
    min_margin: float = 0.5

    def __post_init__(self) -> None:
        if self.n_snippets < 2:
            raise ConfigError(f"n_snippets must be >= 2, got {self.n_snippets}")
        if not 1 <= self.min_len <= self.max_len:
            raise ConfigError(
                f"need 1 <= min_len <= max_len, got [{self.min_len}, {self.max_len}]"
            )
        if self.n_pairs < 1:
            raise ConfigError(f"n_pairs must be >= 1, got {self.n_pairs}")
        if self.min_margin < 0:
            raise ConfigError(f"min_margin must be >= 0, got {self.min_margin}")


@dataclass
class PolicySection:
    """Policy-stage settings: value-iteration discount and CEM knobs.

    The discount here drives policy optimization only; ground-truth
    returns are always discounted with the environment's own factor.
    """

    discount: float = 0.99
    tol: float = 1e-10
    cem_population_size: int = 64
    cem_elite_frac: float = 0.125
    cem_n_iters: int = 30
    cem_init_std: float = 2.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.discount < 1.0:
            raise ConfigError(f"discount must lie in [0, 1), got {self.discount}")
        if self.tol <= 0:
            raise ConfigError(f"tol must be > 0, got {self.tol}")
        self.cem()

    def cem(self) -> CEMConfig:
        return CEMConfig(
            population_size=self.cem_population_size,
            elite_frac=self.cem_elite_frac,
            n_iters=self.cem_n_iters,
            init_std=self.cem_init_std,
        )


@dataclass
class EvalSection:
    """Evaluation-set shape and trial/model counts."""

    qualities: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
    n_per_quality: int = 10
    n_bins: int = 8
    n_trials: int = 5
    n_models_per_trial: int = 3
    n_eval_episodes: int = 5

    def __post_init__(self) -> None:
        self.qualities = tuple(float(q) for q in self.qualities)
        if not self.qualities:
            raise ConfigError("qualities must be non-empty")
        for q in self.qualities:
            if not 0.0 <= q <= 1.0:
                raise ConfigError(f"eval qualities must lie in [0, 1], got {q}")
        for name in ("n_per_quality", "n_trials", "n_models_per_trial", "n_eval_episodes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.n_bins < 2:
            raise ConfigError(f"n_bins must be >= 2, got {self.n_bins}")


@dataclass
class SweepSection:
    """Crossover step sizes visited by the sweep command."""

    step_sizes: tuple[int, ...] = (1, 2, 5, 10, 20)

    def __post_init__(self) -> None:
        self.step_sizes = tuple(int(s) for s in self.step_sizes)
        if not self.step_sizes:
            raise ConfigError("step_sizes must be non-empty")
        for s in self.step_sizes:
            if s < 1:
                raise ConfigError(f"step sizes must be >= 1, got {s}")


@dataclass
class ExperimentConfig:
    """Everything a run needs, grouped by pipeline stage."""

    env: EnvSection = field(default_factory=EnvSection)
    ga: GAConfig = field(default_factory=GAConfig)
    data: DataSection = field(default_factory=DataSection)
    train: TrainConfig = field(
        default_factory=lambda: TrainConfig(learning_rate=3e-4, steps=6000, batch_size=16)
    )
    policy: PolicySection = field(default_factory=PolicySection)
    eval: EvalSection = field(default_factory=EvalSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    base_seed: int = 1
    output_dir: str = "out"

    def spec(self) -> EnvSpec:
        return make_spec(self.env.name)


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


# ---------------------------------------------------------------------------
# Parsing


def _to_int(raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"expected an integer, got {raw!r}") from None


def _to_float(raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"expected a number, got {raw!r}") from None


_BOOL_WORDS = {
    "true": True, "yes": True, "on": True, "1": True,
    "false": False, "no": False, "off": False, "0": False,
}


def _to_bool(raw: str) -> bool:
    try:
        return _BOOL_WORDS[raw.strip().lower()]
    except KeyError:
        raise ConfigError(f"expected a boolean, got {raw!r}") from None


def _to_opt_int(raw: str) -> int | None:
    if raw.strip().lower() == "none":
        return None
    return _to_int(raw)


def _to_float_list(raw: str) -> tuple[float, ...]:
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if not parts:
        raise ConfigError(f"expected a comma-separated list, got {raw!r}")
    return tuple(_to_float(p) for p in parts)


def _to_int_list(raw: str) -> tuple[int, ...]:
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if not parts:
        raise ConfigError(f"expected a comma-separated list, got {raw!r}")
    return tuple(_to_int(p) for p in parts)


# section -> key -> caster; unknown sections/keys are rejected
_SCHEMA: dict[str, dict[str, object]] = {
    "env": {
        "name": str.strip,
        "demo_quality_good": _to_float,
        "demo_quality_bad": _to_float,
    },
    "ga": {
        "n_offspring": _to_int,
        "crossover_rate": _to_float,
        "mutation_rate": _to_float,
        "max_crossover_step": _to_int,
        "n_ranks": _to_int,
        "rank_low": _to_int,
        "rank_high": _to_opt_int,
        "bucket_tolerance": _to_float,
        "max_attempts": _to_int,
        "parents_include_offspring": _to_bool,
    },
    "data": {
        "n_snippets": _to_int,
        "min_len": _to_int,
        "max_len": _to_int,
        "n_pairs": _to_int,
        "min_margin": _to_float,
    },
    "train": {
        "learning_rate": _to_float,
        "steps": _to_int,
        "batch_size": _to_int,
        "l2": _to_float,
    },
    "policy": {
        "discount": _to_float,
        "tol": _to_float,
        "cem_population_size": _to_int,
        "cem_elite_frac": _to_float,
        "cem_n_iters": _to_int,
        "cem_init_std": _to_float,
    },
    "eval": {
        "qualities": _to_float_list,
        "n_per_quality": _to_int,
        "n_bins": _to_int,
        "n_trials": _to_int,
        "n_models_per_trial": _to_int,
        "n_eval_episodes": _to_int,
    },
    "sweep": {
        "step_sizes": _to_int_list,
    },
    "seeds": {
        "base": _to_int,
    },
    "output": {
        "dir": str.strip,
    },
}

_SECTION_TYPES = {
    "env": EnvSection,
    "ga": GAConfig,
    "data": DataSection,
    "train": TrainConfig,
    "policy": PolicySection,
    "eval": EvalSection,
    "sweep": SweepSection,
}


def parse_config_text(text: str, origin: str = "<string>") -> ExperimentConfig:
    """Build an ExperimentConfig from config-file text.

    Every value starts at its desk default; the file overrides.  Unknown
    sections, unknown keys, duplicate keys, and type errors all raise
    ConfigError naming the offending location.
    """
    parser = configparser.ConfigParser(
        interpolation=None,
        inline_comment_prefixes=("#",),
        comment_prefixes=("#",),
        strict=True,
        default_section="\x00disabled\x00",
    )
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: {exc}") from exc

    overrides: dict[str, dict[str, object]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(
                f"{origin}: unknown section [{section}]; "
                f"known sections: {', '.join(sorted(_SCHEMA))}"
            )
        casters = _SCHEMA[section]
        for key, raw in parser.items(section):
            if key not in casters:
                raise ConfigError(
                    f"{origin}: unknown key {key!r} in [{section}]; "
                    f"known keys: {', '.join(sorted(casters))}"
                )
            try:
                overrides.setdefault(section, {})[key] = casters[key](raw)
            except ConfigError as exc:
                raise ConfigError(f"{origin}: [{section}] {key}: {exc}") from None

    base = default_config()
    built: dict[str, object] = {}
    for section, cls in _SECTION_TYPES.items():
        current = dataclasses.asdict(getattr(base, section))
        current.update(overrides.get(section, {}))
        built[section] = cls(**current)
    return ExperimentConfig(
        env=built["env"],
        ga=built["ga"],
        data=built["data"],
        train=built["train"],
        policy=built["policy"],
        eval=built["eval"],
        sweep=built["sweep"],
        base_seed=overrides.get("seeds", {}).get("base", base.base_seed),
        output_dir=overrides.get("output", {}).get("dir", base.output_dir),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), origin=str(path))


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Plain nested dict of every setting, for manifests and echoing."""
    out = {}
    for section in _SECTION_TYPES:
        out[section] = dataclasses.asdict(getattr(cfg, section))
    out["seeds"] = {"base": cfg.base_seed}
    out["output"] = {"dir": cfg.output_dir}
    return out
