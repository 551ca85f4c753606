"""Evaluation of the piecewise-linear kernel bases."""

import numpy as np

from ..models.basis import HatBasis1D, RadialAnisotropicBasis
from ..utils.constants import (
    DEFAULT_AZIMUTH,
    DEFAULT_PLANAR_CUTOFF,
    DEFAULT_RINGS,
    DEFAULT_SPHERE_CUTOFF,
    DEFAULT_TORUS_CUTOFF,
)


def eval_hat_1d(basis: HatBasis1D, x) -> np.ndarray:
    """Values of all L hat functions at x, shape (L, *x.shape)."""
    x = np.asarray(x, dtype=np.float64)
    nodes = basis.nodes
    values = np.empty((basis.size,) + x.shape)
    for ell in range(basis.size):
        ordinates = np.zeros(nodes.shape[0])
        ordinates[ell + 1] = 1.0
        values[ell] = np.interp(x, nodes, ordinates, left=0.0, right=0.0)
    return values


def _radial_hats(basis: RadialAnisotropicBasis, radial: np.ndarray) -> np.ndarray:
    """Radial hats at 0, dr, ..., n_rings * dr, shape (n_rings + 1, *radial.shape)."""
    nodes = np.arange(basis.n_rings + 2) * basis.ring_spacing
    nodes[-1] = basis.r_cutoff
    hats = np.empty((basis.n_rings + 1,) + radial.shape)
    for k in range(basis.n_rings + 1):
        ordinates = np.zeros(nodes.shape[0])
        ordinates[k] = 1.0
        hats[k] = np.interp(radial, nodes, ordinates, left=0.0, right=0.0)
    return hats


def _azimuthal_hats(basis: RadialAnisotropicBasis, azimuthal: np.ndarray) -> np.ndarray:
    """2*pi-periodic hats at a * 2*pi / n_azimuth, shape (n_azimuth, *azimuthal.shape)."""
    if basis.n_azimuth == 1:
        return np.ones((1,) + azimuthal.shape)
    spacing = basis.azimuth_spacing
    centers = np.arange(basis.n_azimuth) * spacing
    delta = azimuthal[None, ...] - centers.reshape((-1,) + (1,) * azimuthal.ndim)
    delta = np.mod(delta + np.pi, 2 * np.pi) - np.pi
    return np.maximum(0.0, 1.0 - np.abs(delta) / spacing)


def eval_radial_basis(basis: RadialAnisotropicBasis, radial, azimuthal) -> np.ndarray:
    """Values of all L functions at polar offsets, shape (L, *radial.shape)."""
    radial = np.asarray(radial, dtype=np.float64)
    azimuthal = np.broadcast_to(np.asarray(azimuthal, dtype=np.float64), radial.shape)
    radial_hats = _radial_hats(basis, radial)
    values = np.empty((basis.size,) + radial.shape)
    values[0] = radial_hats[0]
    if basis.n_rings:
        azimuthal_hats = _azimuthal_hats(basis, azimuthal)
        for k in range(1, basis.n_rings + 1):
            start = 1 + (k - 1) * basis.n_azimuth
            values[start:start + basis.n_azimuth] = radial_hats[k][None, ...] * azimuthal_hats
    return values


def default_planar_basis(r_cutoff: float = DEFAULT_PLANAR_CUTOFF) -> RadialAnisotropicBasis:
    """Five functions: one center hat plus one ring of four azimuthal hats."""
    return RadialAnisotropicBasis(r_cutoff=r_cutoff, n_rings=DEFAULT_RINGS, n_azimuth=DEFAULT_AZIMUTH)


def default_sphere_basis() -> RadialAnisotropicBasis:
    """Five-function layout with a geodesic cutoff of 0.1 pi."""
    return default_planar_basis(DEFAULT_SPHERE_CUTOFF * np.pi)


def torus_basis(extent: float = 2 * np.pi) -> RadialAnisotropicBasis:
    """Five-function layout with a 0.05 pi cutoff on a 2 pi box, scaled to ``extent``."""
    return default_planar_basis(DEFAULT_TORUS_CUTOFF * np.pi * extent / (2 * np.pi))
