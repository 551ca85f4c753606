from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Tuple

from ..utils.constants import (
    DEFAULT_AZIMUTH,
    DEFAULT_MODEL_CUTOFF,
    DEFAULT_RINGS,
    DEFAULT_STENCIL_SIZE,
    PADDING_MODES,
)
from ..utils.errors import InvalidArgumentError
from .basis import RadialAnisotropicBasis

# Keys of a train run that configure neither the model nor the optimizer
RUN_KEYS = ("data", "val", "max_rel_l2")


def _known_fields(cls, data: dict) -> dict:
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise InvalidArgumentError(f"unknown {cls.__name__} keys: {unknown}")
    return dict(data)


@dataclass
class BlockConfig:
    """Branch layout of one local neural operator block."""

    width: int
    modes: Tuple[int, ...] = (12, 6)
    spectral: bool = True
    differential: bool = False
    local_integral: bool = False
    pointwise: bool = True
    stencil_size: int = DEFAULT_STENCIL_SIZE
    padding: str = "reflective"
    basis: RadialAnisotropicBasis = field(
        default_factory=lambda: RadialAnisotropicBasis(DEFAULT_MODEL_CUTOFF)
    )
    branch_scale: Optional[float] = None

    def __post_init__(self):
        self.modes = tuple(self.modes)
        if self.enabled_count == 0:
            raise ValueError("A block needs at least one enabled branch")

    @property
    def enabled_count(self) -> int:
        return sum([self.spectral, self.differential, self.local_integral, self.pointwise])

    @property
    def scale(self) -> float:
        """n^(-1/2) over enabled branches unless pinned."""
        if self.branch_scale is not None:
            return self.branch_scale
        return self.enabled_count ** -0.5


@dataclass
class ModelConfig:
    """Flat model description; per-block layouts are derived from it."""

    in_channels: int = 1
    out_channels: int = 1
    width: int = 16
    blocks: int = 4
    modes: Tuple[int, ...] = (12, 6)
    spectral: bool = True
    differential: bool = False
    local_integral: bool = False
    pointwise: bool = True
    differential_blocks: Optional[List[int]] = None
    stencil_size: int = DEFAULT_STENCIL_SIZE
    padding: str = "reflective"
    basis_r_cutoff: float = DEFAULT_MODEL_CUTOFF
    basis_rings: int = DEFAULT_RINGS
    basis_azimuth: int = DEFAULT_AZIMUTH
    basis_normalize: bool = False
    activation: str = "gelu"
    positional_encoding: bool = True
    projection_hidden: Optional[int] = None
    branch_scale: Optional[float] = None

    def __post_init__(self):
        self.modes = tuple(self.modes)
        if self.activation not in ("gelu", "identity"):
            raise ValueError(f"Unknown activation: {self.activation}")
        if self.padding not in PADDING_MODES:
            raise ValueError(f"Unknown padding mode: {self.padding}")
        if self.width < 1 or self.blocks < 0:
            raise ValueError("width must be >= 1 and blocks >= 0")

    @property
    def spatial_dim(self) -> int:
        return len(self.modes)

    @property
    def hidden(self) -> int:
        """Projection hidden size (2 * width by default)."""
        return self.projection_hidden if self.projection_hidden is not None else 2 * self.width

    def basis(self) -> RadialAnisotropicBasis:
        return RadialAnisotropicBasis(
            r_cutoff=self.basis_r_cutoff,
            n_rings=self.basis_rings,
            n_azimuth=self.basis_azimuth,
            normalize=self.basis_normalize,
        )

    def block_configs(self) -> List[BlockConfig]:
        """One BlockConfig per block; differential_blocks restricts the differential branch."""
        result = []
        for index in range(self.blocks):
            differential = self.differential
            if self.differential_blocks is not None:
                differential = differential and index in self.differential_blocks
            result.append(BlockConfig(
                width=self.width,
                modes=self.modes,
                spectral=self.spectral,
                differential=differential,
                local_integral=self.local_integral,
                pointwise=self.pointwise,
                stencil_size=self.stencil_size,
                padding=self.padding,
                basis=self.basis(),
                branch_scale=self.branch_scale,
            ))
        return result

    def to_dict(self) -> dict:
        data = asdict(self)
        data["modes"] = list(self.modes)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        """Create a ModelConfig from a flat dictionary; unknown keys are an error."""
        return cls(**_known_fields(cls, data))


@dataclass
class TrainConfig:
    """Optimizer, schedule and batching for one training run."""

    lr: float = 1e-3
    decay: float = 0.5
    decay_interval: int = 10
    epochs: int = 50
    batch_size: int = 16
    seed: int = 0
    loss: str = "l2"
    chunk_size: int = 4
    dtype: str = "float64"

    def __post_init__(self):
        if self.dtype not in ("float64", "float32"):
            raise ValueError(f"Unknown dtype: {self.dtype}")
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 0 or self.decay_interval < 1:
            raise ValueError("lr and batch_size must be positive, epochs non-negative")
        if self.loss != "l2":
            raise ValueError(f"Unknown loss kind: {self.loss}")

    def rate_at(self, epoch: int) -> float:
        """Step schedule: lr * decay ** floor(epoch / decay_interval)."""
        return self.lr * self.decay ** (epoch // self.decay_interval)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**_known_fields(cls, data))


@dataclass
class RunConfig:
    """Parsed command plus the merged file values and flag overrides."""

    command: str
    out: str
    values: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)

    @staticmethod
    def is_serialized(data: dict) -> bool:
        """Whether ``data`` is a written config.json rather than a flat config file."""
        return "command" in data and "merged" in data

    def merged(self) -> dict:
        """File values with flag overrides applied on top."""
        result = dict(self.values)
        result.update({k: v for k, v in self.overrides.items() if v is not None})
        return result

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "out": self.out,
            "values": self.values,
            "overrides": {k: v for k, v in self.overrides.items() if v is not None},
            "merged": self.merged(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return cls(
            command=data["command"],
            out=data["out"],
            values=data.get("values", {}),
            overrides=data.get("overrides", {}),
        )


def split_train_values(values: dict) -> Tuple[dict, dict, dict]:
    """Partition flat train values into (model, train, run) dictionaries.

    Raises InvalidArgumentError on a key that belongs to none of them.
    """
    model_names = {f.name for f in fields(ModelConfig)}
    train_names = {f.name for f in fields(TrainConfig)}
    parts: Dict[str, dict] = {"model": {}, "train": {}, "run": {}}
    unknown = []
    for key, value in values.items():
        if key in model_names:
            parts["model"][key] = value
        elif key in train_names:
            parts["train"][key] = value
        elif key in RUN_KEYS:
            parts["run"][key] = value
        else:
            unknown.append(key)
    if unknown:
        raise InvalidArgumentError(f"unknown configuration keys: {sorted(unknown)}")
    return parts["model"], parts["train"], parts["run"]
