"""Uniform time grids starting at t = 0"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, t_end] with n_points nodes (times in units of 1/rate)"""
    t_end: float = 20.0
    n_points: int = 2001

    def __post_init__(self):
        if self.n_points < 2:
            raise ValidationError(f"grid needs at least 2 points, got {self.n_points}")
        if not self.t_end > 0:
            raise ValidationError(f"grid end must be > 0, got {self.t_end}")

    @property
    def t0(self) -> float:
        return 0.0

    @property
    def step(self) -> float:
        return self.t_end / (self.n_points - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_points)

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t_end, factor * (self.n_points - 1) + 1)

    def __len__(self) -> int:
        return self.n_points
