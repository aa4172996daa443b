"""Difficulty curriculum over the number of initial attribute differences.

Episodes start easy; the mean initial difference grows by a fixed step each
time the success rate clears a threshold and enough epochs have passed since
the previous level-up.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class CurriculumState:
    mean_differences: float = 1.0
    epochs_since_levelup: int = 0
    level_history: list[float] = field(default_factory=list)
    # level-up rule
    step: float = 0.01
    success_threshold: float = 0.9
    patience_epochs: int = 10
    max_mean: float | None = None

    def to_dict(self) -> dict:
        return {
            "mean_differences": self.mean_differences,
            "epochs_since_levelup": self.epochs_since_levelup,
            "level_history": list(self.level_history),
            "step": self.step,
            "success_threshold": self.success_threshold,
            "patience_epochs": self.patience_epochs,
            "max_mean": self.max_mean,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CurriculumState":
        return cls(**d)


def sample_initial_differences(cur: CurriculumState, n_attr: int, rng: np.random.Generator) -> int:
    """Draw the number of initially mismatched attributes.

    Normal(mean, 1), rounded to the nearest integer, clamped to [1, n_attr].
    """
    if n_attr < 1:
        raise ValueError(f"n_attr must be >= 1, got {n_attr}")
    draw = rng.normal(cur.mean_differences, 1.0)
    return int(np.clip(round(draw), 1, n_attr))


def curriculum_update(cur: CurriculumState, success_rate: float) -> CurriculumState:
    """Advance the curriculum by one epoch; level up when the rule says so."""
    if not 0.0 <= success_rate <= 1.0:
        raise ValueError(f"success_rate must be in [0, 1], got {success_rate}")
    level_up = (
        success_rate > cur.success_threshold
        and cur.epochs_since_levelup >= cur.patience_epochs
        and (cur.max_mean is None or cur.mean_differences < cur.max_mean)
    )
    if level_up:
        new_mean = cur.mean_differences + cur.step
        if cur.max_mean is not None:
            new_mean = min(new_mean, cur.max_mean)
        return CurriculumState(
            mean_differences=new_mean,
            epochs_since_levelup=0,
            level_history=cur.level_history + [new_mean],
            step=cur.step,
            success_threshold=cur.success_threshold,
            patience_epochs=cur.patience_epochs,
            max_mean=cur.max_mean,
        )
    return CurriculumState(
        mean_differences=cur.mean_differences,
        epochs_since_levelup=cur.epochs_since_levelup + 1,
        level_history=list(cur.level_history),
        step=cur.step,
        success_threshold=cur.success_threshold,
        patience_epochs=cur.patience_epochs,
        max_mean=cur.max_mean,
    )
