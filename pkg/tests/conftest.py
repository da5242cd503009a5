import numpy as np
import pytest

from hpnet.configs import ModelConfig, TrainConfig
from hpnet.scene.types import AgentTrack, LaneSegment, Scene
from hpnet.synth.augment import AugmentationConfig
from hpnet.synth.generate import ScenarioSpec, generate


def micro_config(**overrides):
    return ModelConfig.micro(**overrides)


def micro_scene(seed=0, n_agents=2, T=4, F=3, n_lanes=2):
    """Small random-but-valid scene for gradient and invariance probes."""
    rng = np.random.default_rng(seed)
    total = T + F
    agents = []
    for i in range(n_agents):
        start = rng.uniform(-10, 10, size=2)
        heading = rng.uniform(-np.pi, np.pi)
        speed = rng.uniform(2.0, 8.0)
        direction = np.array([np.cos(heading), np.sin(heading)])
        times = np.arange(total)[:, None] * 0.1
        xy = start + times * speed * direction
        xy = xy + rng.normal(0, 0.05, size=xy.shape)
        vel = np.tile(speed * direction, (total, 1))
        agents.append(
            AgentTrack(i, "vehicle", xy, np.full(total, heading), vel,
                       np.ones(total, dtype=bool))
        )
    lanes = []
    for j in range(n_lanes):
        y = -3.5 + 7.0 * j + rng.normal(0, 0.3)
        xs = np.linspace(-20, 20, 9)
        lanes.append(
            LaneSegment(j, "normal", np.stack([xs, np.full(9, y)], axis=1))
        )
    return Scene(T, F, agents, lanes)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_scene():
    return generate(
        ScenarioSpec(layout="straight", min_agents=2, max_agents=3, seed=77)
    )


@pytest.fixture
def quiet_train_config():
    return TrainConfig.toy(
        epochs=1, batch_size=2, seed=3,
        augmentation=AugmentationConfig(0.0, 0.0, 0.0),
    )
