"""Analytic human-performance models.

Movement time follows the WHo pointing law (speed-accuracy trade-off between
endpoint spread and travel distance), decision time interpolates a linear
visual-search term with a Hick-Hyman logarithmic term, and pointing endpoints
are drawn from an isotropic Gaussian around the commanded target.

All functions are pure; random state is owned by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

RATIO_EPS = 1e-6


class InputDomainError(ValueError):
    """Raised when an argument is outside a model's physical domain."""


@dataclass(frozen=True)
class WhoParams:
    """Group-level pointing parameters.

    k: shape coefficient (> 0)
    beta: exponent in (0, 1)
    y0: minimum normalized spread/distance ratio (>= 0)
    t_min: minimal movement time in seconds (>= 0)
    """

    k: float = 0.12
    beta: float = 0.42
    y0: float = 0.01
    t_min: float = 0.1

    def __post_init__(self) -> None:
        if not self.k > 0:
            raise InputDomainError(f"k must be > 0, got {self.k}")
        if not 0 < self.beta < 1:
            raise InputDomainError(f"beta must be in (0, 1), got {self.beta}")
        if self.y0 < 0 or self.t_min < 0:
            raise InputDomainError("y0 and t_min must be >= 0")


@dataclass(frozen=True)
class DecisionTimeParams:
    """Coefficients for the two decision-time components and their mix.

    Linear search: t = search_intercept + search_slope * n
    Hick-Hyman:    t = hick_intercept + hick_slope * log2(n + 1)
    expertise in [0, 1] weights the Hick-Hyman term (1 = pure expert recall).
    """

    search_intercept: float = 0.2
    search_slope: float = 0.1
    hick_intercept: float = 0.0
    hick_slope: float = 0.2
    expertise: float = 0.5

    def __post_init__(self) -> None:
        for name in ("search_intercept", "search_slope", "hick_intercept", "hick_slope"):
            if getattr(self, name) < 0:
                raise InputDomainError(f"{name} must be >= 0")
        if not 0.0 <= self.expertise <= 1.0:
            raise InputDomainError(f"expertise must be in [0, 1], got {self.expertise}")


@dataclass(frozen=True)
class MotorCommand:
    """Endpoint distribution parameters in normalized UI coordinates."""

    mu: np.ndarray
    sigma: float

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=np.float64)
        object.__setattr__(self, "mu", mu)
        if np.any(mu < 0.0) or np.any(mu > 1.0):
            raise InputDomainError(f"mu components must be in [0, 1], got {mu}")
        if self.sigma < 0:
            raise InputDomainError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class MotorOutcome:
    """Result of one executed pointing movement."""

    endpoint: np.ndarray
    movement_time: float
    hit: bool


def who_movement_time(params: WhoParams, distance: float, sigma: float) -> float:
    """Predicted movement time for travelling `distance` with endpoint spread `sigma`.

    The spread/distance ratio is clamped below at y0 + RATIO_EPS so that
    near-singular commands (tiny spread over a long reach) stay finite instead
    of crashing exploration.
    """
    if distance < 0:
        raise InputDomainError(f"distance must be >= 0, got {distance}")
    if sigma < 0:
        raise InputDomainError(f"sigma must be >= 0, got {sigma}")
    if distance == 0.0:
        return params.t_min
    ratio = max(sigma / distance, params.y0 + RATIO_EPS)
    base = params.k / (ratio - params.y0) ** (1.0 - params.beta)
    return base ** (1.0 / params.beta) + params.t_min


def decision_time(params: DecisionTimeParams, n_items: int) -> float:
    """Time to choose among `n_items` selectable targets."""
    if n_items < 1:
        raise InputDomainError(f"n_items must be >= 1, got {n_items}")
    t_search = params.search_intercept + params.search_slope * n_items
    t_hick = params.hick_intercept + params.hick_slope * math.log2(n_items + 1)
    return (1.0 - params.expertise) * t_search + params.expertise * t_hick


def sample_endpoint(
    cmd: MotorCommand,
    target_center: np.ndarray,
    target_width: float,
    current_position: np.ndarray,
    who: WhoParams,
    rng: np.random.Generator,
) -> MotorOutcome:
    """Execute a pointing movement toward an axis-aligned square target.

    The endpoint is drawn per axis from Normal(mu, sigma) and clamped to the
    unit cube; `hit` means the clamped endpoint lies inside the target box.
    Movement time is the WHo prediction for the distance from
    `current_position` to the commanded center.
    """
    mu = np.asarray(cmd.mu, dtype=np.float64)
    if cmd.sigma == 0.0:
        endpoint = mu.copy()
    else:
        endpoint = rng.normal(mu, cmd.sigma)
    endpoint = np.clip(endpoint, 0.0, 1.0)
    center = np.asarray(target_center, dtype=np.float64)
    hit = bool(np.all(np.abs(endpoint - center) <= target_width / 2.0))
    dist = float(np.linalg.norm(mu - np.asarray(current_position, dtype=np.float64)))
    t_m = who_movement_time(who, dist, cmd.sigma)
    return MotorOutcome(endpoint=endpoint, movement_time=t_m, hit=hit)
