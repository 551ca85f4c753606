from dataclasses import dataclass

import numpy as np

from .grid import Grid


@dataclass(frozen=True, eq=False)
class Field:
    """Multi-channel samples on a grid, stored as (batch, channels, points)."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ValueError(f"Field values must be 3-D, got shape {self.values.shape}")
        if self.values.shape[2] != self.grid.size:
            raise ValueError(
                f"Field has {self.values.shape[2]} points, grid has {self.grid.size}"
            )

    @property
    def batch(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]

    def as_image(self) -> np.ndarray:
        """Values reshaped to (batch, channels, *grid.shape)."""
        if self.grid.shape is None:
            raise ValueError(f"{self.grid} has no regular shape")
        return self.values.reshape(self.batch, self.channels, *self.grid.shape)

    @classmethod
    def from_image(cls, image: np.ndarray, grid: Grid) -> "Field":
        """Create a Field from (batch, channels, *grid.shape) values."""
        return cls(values=image.reshape(image.shape[0], image.shape[1], -1), grid=grid)

    def with_values(self, values: np.ndarray) -> "Field":
        """Same grid, new values."""
        return Field(values=values, grid=self.grid)

    def __str__(self) -> str:
        return f"Field({self.batch}x{self.channels} on {self.grid})"
