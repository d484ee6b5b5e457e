"""Planar poses, tolerances and the arrival test."""

from __future__ import annotations

import math
from dataclasses import dataclass


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.remainder(a, 2 * math.pi)
    return math.pi if w == -math.pi else w


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    psi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "psi", wrap_angle(float(self.psi)))

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Tolerance:
    position: float = 0.05
    yaw: float = 0.08
    timeout: float = 10.0

    def __post_init__(self):
        if not (self.position > 0 and self.yaw > 0 and self.timeout > 0):
            raise ValueError("tolerances and timeout must be strictly positive")


def yaw_error(a: float, b: float) -> float:
    return abs(wrap_angle(a - b))


def at_destination(pose: Pose2D, goal: Pose2D, tol: Tolerance) -> bool:
    """Both planar distance and wrapped yaw error within tolerance (inclusive)."""
    dist = math.hypot(pose.x - goal.x, pose.y - goal.y)
    # absorb rounding from the subtraction so boundary cases stay inclusive
    eps = 1e-12
    return dist <= tol.position + eps and yaw_error(pose.psi, goal.psi) <= tol.yaw + eps


def bearing(src: tuple[float, float], dst: tuple[float, float], default: float = 0.0) -> float:
    dx, dy = dst[0] - src[0], dst[1] - src[1]
    if math.hypot(dx, dy) < 1e-12:
        return default
    return math.atan2(dy, dx)
