"""Grid construction, quadrature rules and group actions."""

import logging
from typing import Sequence, Tuple

import numpy as np

from ..models.field import Field
from ..models.grid import Grid, SphereRotation, Topology
from ..utils.errors import InvalidArgumentError, UnsupportedTopologyError

_logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


def _isotropic_width(widths: Sequence[float]) -> float:
    """Common width if all axes agree, else the geometric mean."""
    widths = np.asarray(widths, dtype=np.float64)
    if np.allclose(widths, widths[0], rtol=1e-14, atol=0.0):
        return float(widths[0])
    return float(np.exp(np.mean(np.log(widths))))


def make_regular_grid(
    shape: Sequence[int], extent: Sequence[float], periodic: bool
) -> Grid:
    """Equidistant box grid with trapezoidal quadrature.

    Periodic boxes hold n points of width extent/n with no seam duplicate.
    Bounded boxes include both end points, width extent/(n-1), and halve the
    end-point weights along each axis.
    """
    shape = tuple(int(n) for n in shape)
    extent = tuple(float(e) for e in extent)
    if len(shape) != len(extent) or not shape:
        raise InvalidArgumentError(f"shape {shape} and extent {extent} disagree")
    if any(n < 2 for n in shape):
        raise InvalidArgumentError(f"every count must be >= 2, got {shape}")
    if any(not e > 0 for e in extent):
        raise InvalidArgumentError(f"every extent must be > 0, got {extent}")

    axes, weights, widths = [], [], []
    for n, length in zip(shape, extent):
        if periodic:
            h = length / n
            axes.append(np.arange(n) * h)
            weights.append(np.full(n, h))
        else:
            h = length / (n - 1)
            axes.append(np.linspace(0.0, length, n))
            w = np.full(n, h)
            w[0] = w[-1] = 0.5 * h
            weights.append(w)
        widths.append(h)

    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    quad = weights[0]
    for w in weights[1:]:
        quad = np.multiply.outer(quad, w)
    topology = Topology.PERIODIC_BOX if periodic else Topology.BOUNDED_BOX
    return Grid(
        dim=len(shape),
        points=points,
        quad_weights=np.ascontiguousarray(quad.ravel()),
        topology=topology,
        extent=extent,
        shape=shape,
        widths=tuple(widths),
        width=_isotropic_width(widths),
        _key=(topology.value, shape, extent),
    )


def make_equiangular_sphere_grid(nlat: int, nlon: int) -> Grid:
    """Cell-centered colatitudes, uniform longitudes, exact cell-area weights."""
    if nlat < 2 or nlon < 4:
        raise InvalidArgumentError(f"need nlat >= 2 and nlon >= 4, got ({nlat}, {nlon})")
    edges = np.linspace(0.0, np.pi, nlat + 1)
    theta = 0.5 * (edges[:-1] + edges[1:])
    dlon = TWO_PI / nlon
    lam = np.arange(nlon) * dlon
    ring_area = dlon * (np.cos(edges[:-1]) - np.cos(edges[1:]))

    tt, ll = np.meshgrid(theta, lam, indexing="ij")
    points = np.stack([tt.ravel(), ll.ravel()], axis=-1)
    quad = np.repeat(ring_area, nlon)
    return Grid(
        dim=2,
        points=points,
        quad_weights=quad,
        topology=Topology.SPHERE,
        extent=(np.pi, TWO_PI),
        shape=(nlat, nlon),
        widths=(np.pi / nlat, dlon),
        width=None,
        _key=(Topology.SPHERE.value, (nlat, nlon)),
    )


def make_unstructured_grid(points: np.ndarray, quad_weights: np.ndarray) -> Grid:
    """Point cloud with user-supplied quadrature weights."""
    points = np.array(points, dtype=np.float64)
    quad_weights = np.array(quad_weights, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[0] != quad_weights.shape[0]:
        raise InvalidArgumentError("points and quad_weights disagree on count")
    if np.any(quad_weights <= 0):
        raise InvalidArgumentError("quadrature weights must be positive")
    return Grid(
        dim=points.shape[1],
        points=points,
        quad_weights=quad_weights,
        topology=Topology.UNSTRUCTURED,
    )


def sphere_to_cartesian(colatitude, longitude) -> np.ndarray:
    """Unit vectors for (colatitude, longitude) arrays, stacked on the last axis."""
    colatitude = np.asarray(colatitude, dtype=np.float64)
    longitude = np.asarray(longitude, dtype=np.float64)
    st = np.sin(colatitude)
    return np.stack(
        [st * np.cos(longitude), st * np.sin(longitude), np.cos(colatitude)], axis=-1
    )


def geodesic_offsets(
    center_colatitude, center_longitude, colatitude, longitude
) -> Tuple[np.ndarray, np.ndarray]:
    """Broadcasting form of geodesic_offset on raw coordinate arrays."""
    ct, st = np.cos(center_colatitude), np.sin(center_colatitude)
    dlon = np.asarray(longitude) - np.asarray(center_longitude)
    sp = np.sin(colatitude)
    x = sp * np.cos(dlon)
    y = sp * np.sin(dlon)
    z = np.cos(colatitude)
    xr = ct * x - st * z
    zr = st * x + ct * z
    radial = np.arctan2(np.hypot(xr, y), zr)
    azimuthal = np.mod(np.arctan2(y, xr), TWO_PI)
    azimuthal = np.where(azimuthal >= TWO_PI, 0.0, azimuthal)
    return radial, azimuthal


def geodesic_offset(center: SphereRotation, point: Sequence[float]) -> Tuple[float, float]:
    """Colatitude and longitude of ``point`` after the inverse rotation of ``center``."""
    radial, azimuthal = geodesic_offsets(
        center.colatitude, center.longitude, point[0], point[1]
    )
    return float(radial), float(azimuthal)


def translate_field(field: Field, steps: Sequence[int]) -> Field:
    """Circular shift of a field on a periodic box by integer grid steps."""
    grid = field.grid
    if not grid.is_periodic:
        raise UnsupportedTopologyError(f"translation needs a periodic box, got {grid}")
    steps = tuple(int(s) for s in steps)
    if len(steps) != grid.dim:
        raise InvalidArgumentError(f"expected {grid.dim} steps, got {steps}")
    image = field.as_image()
    axes = tuple(range(2, 2 + grid.dim))
    return Field.from_image(np.roll(image, shift=steps, axis=axes), grid)


def rotate_longitude(field: Field, steps: int) -> Field:
    """Rotate a field on an equiangular sphere grid by whole longitude steps."""
    grid = field.grid
    if grid.topology != Topology.SPHERE or grid.shape is None:
        raise UnsupportedTopologyError(f"longitude rotation needs a sphere grid, got {grid}")
    image = field.as_image()
    return Field.from_image(np.roll(image, shift=int(steps), axis=3), grid)


def periodic_offsets(delta: np.ndarray, extent: Sequence[float]) -> np.ndarray:
    """Wrap coordinate differences into [-extent/2, extent/2) per axis."""
    extent = np.asarray(extent, dtype=np.float64)
    return delta - extent * np.floor(delta / extent + 0.5)


def grid_from_dict(data: dict) -> Grid:
    """Rebuild a structured grid from its serialized header."""
    topology = Topology(data["topology"])
    if topology in (Topology.PERIODIC_BOX, Topology.BOUNDED_BOX):
        return make_regular_grid(data["shape"], data["extent"], topology == Topology.PERIODIC_BOX)
    if topology == Topology.SPHERE:
        nlat, nlon = data["shape"]
        return make_equiangular_sphere_grid(nlat, nlon)
    raise UnsupportedTopologyError("unstructured grids carry their points in a binary sibling")
