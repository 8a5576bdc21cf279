"""Axis-aligned box domains: sampling, uniform grids, membership."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [lower_i, upper_i] in R^d."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise ValueError("lower and upper must be 1-D arrays of equal length")
        if not np.all(hi > lo):
            raise ValueError("degenerate box: upper must exceed lower on every axis")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    def scaled(self, factor: float) -> "Box":
        """Box enlarged (or shrunk) about its center by `factor`."""
        center = 0.5 * (self.lower + self.upper)
        half = 0.5 * (self.upper - self.lower) * factor
        return Box(center - half, center + half)

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """`count` points drawn uniformly, shape (count, dim)."""
        if count < 1:
            raise ValueError("count must be >= 1")
        return rng.uniform(self.lower, self.upper, size=(count, self.dim))

    def uniform_grid(self, points_per_axis: int) -> np.ndarray:
        """Cartesian-product grid with endpoints included, shape (points^dim, dim)."""
        if points_per_axis < 1:
            raise ValueError("points_per_axis must be >= 1")
        axes = [
            np.linspace(self.lower[i], self.upper[i], points_per_axis)
            for i in range(self.dim)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)
