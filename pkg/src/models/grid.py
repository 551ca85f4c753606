import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np


class Topology(str, Enum):
    """Domain topology a grid discretizes."""

    PERIODIC_BOX = "periodic_box"
    BOUNDED_BOX = "bounded_box"
    SPHERE = "sphere"
    UNSTRUCTURED = "unstructured"


@dataclass(frozen=True, eq=False)
class Grid:
    """Discretization points with quadrature weights.

    Regular boxes store points in row-major order over ``shape`` with axis k
    carrying coordinate k. Spheres store (colatitude, longitude) pairs in
    row-major order over (nlat, nlon).
    """

    dim: int
    points: np.ndarray  # (m, dim)
    quad_weights: np.ndarray  # (m,)
    topology: Topology
    extent: Optional[Tuple[float, ...]] = None
    shape: Optional[Tuple[int, ...]] = None
    widths: Optional[Tuple[float, ...]] = None
    width: Optional[float] = None
    _key: tuple = field(default=(), repr=False)

    def __post_init__(self):
        self.points.setflags(write=False)
        self.quad_weights.setflags(write=False)

    @property
    def size(self) -> int:
        """Number of points m."""
        return int(self.quad_weights.shape[0])

    @property
    def is_regular(self) -> bool:
        return self.topology in (Topology.PERIODIC_BOX, Topology.BOUNDED_BOX)

    @property
    def is_periodic(self) -> bool:
        return self.topology == Topology.PERIODIC_BOX

    def key(self) -> tuple:
        """Hashable identity used to cache assembled kernels.

        Point clouds are identified by a digest of their points and weights.
        """
        if self._key:
            return self._key
        digest = hashlib.sha1(self.points.tobytes() + self.quad_weights.tobytes()).hexdigest()
        return (self.topology.value, self.points.shape, digest)

    def to_dict(self) -> dict:
        """Convert the header part to a dictionary for JSON serialization."""
        return {
            "dim": self.dim,
            "topology": self.topology.value,
            "shape": list(self.shape) if self.shape is not None else None,
            "extent": list(self.extent) if self.extent is not None else None,
        }

    def __str__(self) -> str:
        if self.shape is not None:
            dims = "x".join(str(n) for n in self.shape)
            return f"Grid({self.topology.value}, {dims})"
        return f"Grid({self.topology.value}, m={self.size})"


@dataclass(frozen=True)
class SphereRotation:
    """Rotation taking the north pole to (colatitude, longitude), first Euler angle zero."""

    colatitude: float
    longitude: float

    def __post_init__(self):
        if not 0.0 <= self.colatitude <= np.pi:
            raise ValueError(f"colatitude {self.colatitude} outside [0, pi]")
        if not 0.0 <= self.longitude < 2 * np.pi:
            raise ValueError(f"longitude {self.longitude} outside [0, 2pi)")

    def matrix(self) -> np.ndarray:
        """3x3 rotation Rz(longitude) @ Ry(colatitude)."""
        ct, st = np.cos(self.colatitude), np.sin(self.colatitude)
        cl, sl = np.cos(self.longitude), np.sin(self.longitude)
        rz = np.array([[cl, -sl, 0.0], [sl, cl, 0.0], [0.0, 0.0, 1.0]])
        ry = np.array([[ct, 0.0, st], [0.0, 1.0, 0.0], [-st, 0.0, ct]])
        return rz @ ry
