from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Tuple

import numpy as np
import scipy.sparse as sp

from .grid import Grid


@dataclass(frozen=True, eq=False)
class AssembledKernel:
    """Per-basis sparse matrices K^(l) sharing one row-compressed pattern.

    Rows index output points, columns input points; ``values[l]`` holds the
    entries of K^(l) in the order of ``indices``.
    """

    indptr: np.ndarray  # (m_out + 1,)
    indices: np.ndarray  # (nnz,)
    values: np.ndarray  # (L, nnz)
    grid_in: Grid
    grid_out: Grid
    geometry: str
    quadrature_folded: bool = False
    normalized: bool = False

    @property
    def size(self) -> int:
        """Basis count L."""
        return self.values.shape[0]

    @property
    def nnz(self) -> int:
        return self.indices.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.grid_out.size, self.grid_in.size)

    def matrix(self, ell: int) -> sp.csr_array:
        """K^(ell) as a CSR array."""
        return sp.csr_array((self.values[ell], self.indices, self.indptr), shape=self.shape)

    def row_counts(self) -> np.ndarray:
        return np.diff(self.indptr)

    @cached_property
    def stacked(self) -> sp.csr_array:
        """All L matrices stacked vertically, row l*m_out + i."""
        m_out, m_in = self.shape
        ell = self.size
        nnz = self.nnz
        offsets = (np.arange(ell) * nnz)[:, None]
        indptr = np.concatenate([[0], (self.indptr[1:][None, :] + offsets).ravel()])
        indices = np.tile(self.indices, ell)
        return sp.csr_array(
            (self.values.ravel(), indices, indptr), shape=(ell * m_out, m_in)
        )

    @cached_property
    def stacked_transpose(self) -> sp.csr_array:
        return self.stacked.T.tocsr()

    def to_dict(self) -> dict:
        """Header part for JSON serialization."""
        return {
            "L": self.size,
            "nnz": self.nnz,
            "geometry": self.geometry,
            "quadrature_folded": self.quadrature_folded,
            "normalized": self.normalized,
            "grids": {"in": self.grid_in.to_dict(), "out": self.grid_out.to_dict()},
        }


@dataclass
class DiscoParams:
    """DISCO coefficients theta of shape (out_channels, in_channels, L)."""

    theta: np.ndarray

    def __post_init__(self):
        if self.theta.ndim != 3:
            raise ValueError(f"theta must be 3-D, got shape {self.theta.shape}")
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta has non-finite entries")

    @property
    def out_channels(self) -> int:
        return self.theta.shape[0]

    @property
    def in_channels(self) -> int:
        return self.theta.shape[1]


class PaddingMode(str, Enum):
    """Boundary handling of the differential branch."""

    REFLECTIVE = "reflective"
    PERIODIC = "periodic"
    ZERO = "zero"
    REPLICATE = "replicate"

    @property
    def numpy_mode(self) -> str:
        return {
            PaddingMode.REFLECTIVE: "reflect",
            PaddingMode.PERIODIC: "wrap",
            PaddingMode.ZERO: "constant",
            PaddingMode.REPLICATE: "edge",
        }[self]


@dataclass
class DifferentialKernel:
    """Raw taps K of shape (out_channels, in_channels, S, ..., S), S odd."""

    taps: np.ndarray
    padding_mode: PaddingMode = PaddingMode.REFLECTIVE

    def __post_init__(self):
        spatial = self.taps.shape[2:]
        if self.taps.ndim < 3:
            raise ValueError(f"taps must have at least one spatial axis, got {self.taps.shape}")
        if any(s % 2 == 0 for s in spatial) or len(set(spatial)) != 1:
            raise ValueError(f"stencil extents must be equal and odd, got {spatial}")
        self.padding_mode = PaddingMode(self.padding_mode)

    @property
    def stencil_size(self) -> int:
        return self.taps.shape[2]

    @property
    def spatial_dim(self) -> int:
        return self.taps.ndim - 2

    def offsets(self) -> np.ndarray:
        """Integer tap offsets, shape (S**d, d), in row-major tap order."""
        half = self.stencil_size // 2
        axes = [np.arange(-half, half + 1)] * self.spatial_dim
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass
class DirectionalSignature:
    """Limit operator c * v + grad(v) . b per (out, in) channel pair."""

    b: np.ndarray  # (out, in, d)
    c: np.ndarray  # (out, in)


@dataclass
class SpectralWeights:
    """Complex weights of shape (out_channels, in_channels, *modes).

    Non-last axes retain ``modes[k]`` frequencies split symmetrically between
    non-negative and negative indices; the last axis retains the first
    ``modes[-1]`` non-negative frequencies of the real transform.
    """

    weights: np.ndarray

    def __post_init__(self):
        if not np.iscomplexobj(self.weights):
            self.weights = self.weights.astype(np.complex128)
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("spectral weights have non-finite entries")

    @property
    def modes(self) -> Tuple[int, ...]:
        return tuple(self.weights.shape[2:])
