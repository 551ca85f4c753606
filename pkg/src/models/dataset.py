from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .field import Field
from .grid import Grid


@dataclass
class DarcySample:
    """Input pressure u and forcing f = -div(a grad u) on a (0,1)^2 grid."""

    u: np.ndarray  # (m,)
    f: np.ndarray  # (m,)
    grid: Grid
    seed: int


@dataclass(frozen=True)
class ParabolaSpec:
    """Channel coefficients of v(x) = |x|^2 (c_1, ..., c_n), times a scale factor."""

    coefficients: Tuple[float, ...]
    scale: float = 1.0

    def __post_init__(self):
        if len(self.coefficients) < 1:
            raise ValueError("ParabolaSpec needs at least one channel")

    @property
    def channels(self) -> int:
        return len(self.coefficients)

    @property
    def scaled(self) -> np.ndarray:
        return self.scale * np.asarray(self.coefficients, dtype=np.float64)

    @classmethod
    def random(cls, channels: int, scale: float, seed: int) -> "ParabolaSpec":
        """Coefficients uniform on [0, 1) from a seeded generator."""
        rng = np.random.default_rng(seed)
        return cls(coefficients=tuple(rng.uniform(0.0, 1.0, channels)), scale=scale)

    def to_dict(self) -> dict:
        return {"coefficients": list(self.coefficients), "scale": self.scale}

    @classmethod
    def from_dict(cls, data: dict) -> "ParabolaSpec":
        return cls(coefficients=tuple(data["coefficients"]), scale=data.get("scale", 1.0))


@dataclass
class Dataset:
    """Paired input/target samples on one grid with their generation record."""

    task: str
    inputs: np.ndarray  # (N, c_in, m)
    targets: np.ndarray  # (N, c_out, m)
    grid: Grid
    seed: int
    sample_seeds: List[int] = field(default_factory=list)
    input_names: List[str] = field(default_factory=list)
    target_names: List[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs and targets disagree on sample count")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def input_field(self, index=slice(None)) -> Field:
        values = self.inputs[index]
        if values.ndim == 2:
            values = values[None]
        return Field(values=values, grid=self.grid)

    def target_field(self, index=slice(None)) -> Field:
        values = self.targets[index]
        if values.ndim == 2:
            values = values[None]
        return Field(values=values, grid=self.grid)

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices)
        seeds = [self.sample_seeds[i] for i in indices] if self.sample_seeds else []
        return Dataset(
            task=self.task,
            inputs=self.inputs[indices],
            targets=self.targets[indices],
            grid=self.grid,
            seed=self.seed,
            sample_seeds=seeds,
            input_names=list(self.input_names),
            target_names=list(self.target_names),
            extra=dict(self.extra),
        )
