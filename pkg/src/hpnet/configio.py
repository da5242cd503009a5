"""Run configuration: one flat key=value text format shared by config files,
CLI overrides and the echo written into every output directory.

Precedence: CLI flag > config file > profile defaults. Keys:

    seed = 0
    profile = default | toy          # base model+train hyperparameters
    model.<field>                    # ModelConfig fields
    train.<field>                    # TrainConfig fields
    augment.<field>                  # AugmentationConfig fields
    scenario.<field>                 # ScenarioSpec fields (except mix/seed)
    scenario.mix.<maneuver> = weight
    corpus.train_count / val_count / stream_count / stream_steps

Lines starting with '#' and blank lines are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from hpnet.configs import ConfigError, ModelConfig, TrainConfig
from hpnet.synth.augment import AugmentationConfig
from hpnet.synth.generate import ScenarioSpec


@dataclass
class CorpusConfig:
    train_count: int = 512
    val_count: int = 64
    stream_count: int = 64
    stream_steps: int = 10


@dataclass
class RunConfig:
    seed: int = 0
    profile: str = "default"
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)


def parse_kv_text(text):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _coerce(current, text, key):
    if isinstance(current, bool):
        low = text.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float):
        return float(text)
    return text


def _apply(rc, items):
    for key, text in items.items():
        if key in ("profile",):
            continue
        if key == "seed":
            rc.seed = int(text)
            rc.train.seed = rc.seed
            rc.scenario.seed = rc.seed
            continue
        section, _, name = key.partition(".")
        if section == "scenario" and name.startswith("mix."):
            rc.scenario.maneuver_mix[name[len("mix."):]] = float(text)
            continue
        target = {
            "model": rc.model,
            "train": rc.train,
            "augment": rc.train.augmentation,
            "scenario": rc.scenario,
            "corpus": rc.corpus,
        }.get(section)
        if target is None or not hasattr(target, name):
            raise ConfigError(f"unknown configuration key {key!r}")
        setattr(target, name, _coerce(getattr(target, name), text, key))
    return rc


def build_run_config(file_text=None, overrides=()):
    """Assemble the effective RunConfig from a config file and CLI overrides."""
    file_items = parse_kv_text(file_text) if file_text else {}
    flag_items = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, value = item.split("=", 1)
        flag_items[key.strip()] = value.strip()

    profile = flag_items.get("profile", file_items.get("profile", "default"))
    if profile == "toy":
        rc = RunConfig(profile="toy", model=ModelConfig.toy(), train=TrainConfig.toy())
    elif profile == "default":
        rc = RunConfig()
    else:
        raise ConfigError(f"unknown profile {profile!r} (expected default|toy)")
    _apply(rc, file_items)
    _apply(rc, flag_items)
    rc.model.validate()
    rc.train.validate()
    rc.scenario.validate()
    rc.scenario.history_frames = rc.model.history_frames
    rc.scenario.future_frames = rc.model.future_frames
    return rc


def run_config_text(rc):
    """Canonical echo of the effective configuration."""
    lines = ["# hpnet run config v1", f"seed = {rc.seed}", f"profile = {rc.profile}"]
    for section, obj in (
        ("model", rc.model), ("train", rc.train),
        ("augment", rc.train.augmentation), ("scenario", rc.scenario),
        ("corpus", rc.corpus),
    ):
        for f in fields(obj):
            if f.name in ("augmentation", "maneuver_mix", "seed"):
                continue
            lines.append(f"{section}.{f.name} = {getattr(obj, f.name)}")
    for name in sorted(rc.scenario.maneuver_mix):
        lines.append(f"scenario.mix.{name} = {rc.scenario.maneuver_mix[name]}")
    return "\n".join(lines) + "\n"
