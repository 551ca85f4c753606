from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np


@dataclass(frozen=True)
class HatBasis1D:
    """Piecewise-linear hat functions on the real line.

    ``collocation`` holds xi^(1..L); ``lower`` and ``upper`` are the boundary
    points xi^(0) and xi^(L+1).
    """

    collocation: Tuple[float, ...]
    lower: float
    upper: float
    normalize: bool = False

    def __post_init__(self):
        nodes = (self.lower,) + tuple(self.collocation) + (self.upper,)
        if len(self.collocation) < 1:
            raise ValueError("HatBasis1D needs at least one collocation point")
        if any(b <= a for a, b in zip(nodes, nodes[1:])):
            raise ValueError(f"Hat nodes must be strictly increasing: {nodes}")

    @property
    def size(self) -> int:
        """Basis count L."""
        return len(self.collocation)

    @property
    def nodes(self) -> np.ndarray:
        """xi^(0) .. xi^(L+1)."""
        return np.array((self.lower,) + tuple(self.collocation) + (self.upper,))

    @property
    def support_width(self) -> float:
        return self.upper - self.lower

    @classmethod
    def equidistant(cls, count: int, spacing: float, start: float = 0.0) -> "HatBasis1D":
        """Collocation at start, start + spacing, ... with one-spacing boundary margins."""
        if count < 1 or spacing <= 0:
            raise ValueError("count must be >= 1 and spacing > 0")
        collocation = tuple(start + k * spacing for k in range(count))
        return cls(collocation=collocation, lower=start - spacing, upper=start + count * spacing)

    def to_dict(self) -> dict:
        return {
            "kind": "hat1d",
            "collocation": list(self.collocation),
            "lower": self.lower,
            "upper": self.upper,
            "normalize": self.normalize,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HatBasis1D":
        return cls(
            collocation=tuple(data["collocation"]),
            lower=data["lower"],
            upper=data["upper"],
            normalize=data.get("normalize", False),
        )


@dataclass(frozen=True)
class RadialAnisotropicBasis:
    """Center hat plus rings of azimuthal hats, compactly supported in a disc.

    Ring k sits at radius k * r_cutoff / (n_rings + 1); each ring carries
    n_azimuth hats at angles 2*pi*a / n_azimuth. Function 0 is the isotropic
    center function; ring k, azimuth a is function 1 + (k - 1) * n_azimuth + a.
    """

    r_cutoff: float
    n_rings: int = 1
    n_azimuth: int = 4
    normalize: bool = False

    def __post_init__(self):
        if self.r_cutoff <= 0:
            raise ValueError(f"r_cutoff must be positive, got {self.r_cutoff}")
        if self.n_rings < 0 or self.n_azimuth < 1:
            raise ValueError("n_rings must be >= 0 and n_azimuth >= 1")

    @property
    def size(self) -> int:
        """Basis count L = 1 + n_rings * n_azimuth."""
        return 1 + self.n_rings * self.n_azimuth

    @property
    def ring_spacing(self) -> float:
        return self.r_cutoff / (self.n_rings + 1)

    @property
    def azimuth_spacing(self) -> float:
        return 2 * np.pi / self.n_azimuth

    def to_dict(self) -> dict:
        return {
            "kind": "radial",
            "r_cutoff": self.r_cutoff,
            "n_rings": self.n_rings,
            "n_azimuth": self.n_azimuth,
            "normalize": self.normalize,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RadialAnisotropicBasis":
        return cls(
            r_cutoff=data["r_cutoff"],
            n_rings=data.get("n_rings", 1),
            n_azimuth=data.get("n_azimuth", 4),
            normalize=data.get("normalize", False),
        )


KernelBasis = Union[HatBasis1D, RadialAnisotropicBasis]


def basis_from_dict(data: dict) -> KernelBasis:
    """Dispatch on the ``kind`` key."""
    kind = data.get("kind", "radial")
    if kind == "hat1d":
        return HatBasis1D.from_dict(data)
    if kind == "radial":
        return RadialAnisotropicBasis.from_dict(data)
    raise ValueError(f"Unknown basis kind: {kind}")
