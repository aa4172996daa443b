from __future__ import annotations

import numpy as np
import pytest

from coadapt.config import TrainLoopConfig, default_config
from coadapt.persist import load_checkpoint
from coadapt.rl import Trainer, train


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def tiny_character_run(tmp_path_factory):
    """A short character training run: enough for wiring tests, not for skill."""
    out = tmp_path_factory.mktemp("tiny-char")
    cfg = default_config("character", condition="adaptive", seed=11).replace(
        out_dir=str(out),
        train=TrainLoopConfig(epochs=4, num_envs=8),
    )
    report = train(cfg, quiet=True)
    return cfg, report


@pytest.fixture(scope="session")
def tiny_character_checkpoint(tiny_character_run):
    _, report = tiny_character_run
    return load_checkpoint(report.final_checkpoint)
