"""Discrete-continuous convolutions: sparse assembly, application and adjoints.

The kernel is evaluated analytically at the group-action offsets
g_i^{-1} x_j while the integral is replaced by the grid quadrature:

    out[b, o, i] = sum_c sum_l theta[o, c, l] sum_j K^(l)[i, j] v[b, c, j] q_j
"""

import logging
from typing import Iterable, Tuple

import numpy as np
from scipy.spatial import cKDTree

from ..models.basis import HatBasis1D, KernelBasis, RadialAnisotropicBasis
from ..models.field import Field
from ..models.grid import Grid, Topology
from ..models.kernels import AssembledKernel, DiscoParams
from ..utils.constants import BRUTE_FORCE_LIMIT, EXACT_TOL
from ..utils.errors import (
    AssemblyDegenerateError,
    InvalidArgumentError,
    NotEquivariantError,
    UnsupportedTopologyError,
)
from .basis import eval_hat_1d, eval_radial_basis
from .geometry import geodesic_offsets, periodic_offsets

_logger = logging.getLogger(__name__)

_ROW_CHUNK = 256


# Assembly

def _search_radius(basis: KernelBasis) -> float:
    if isinstance(basis, HatBasis1D):
        return max(abs(basis.lower), abs(basis.upper))
    return basis.r_cutoff


def _candidate_pairs_brute(m_out: int, m_in: int) -> Iterable[Tuple[np.ndarray, np.ndarray]]:
    """All (row, col) pairs, chunked over rows."""
    cols = np.arange(m_in)
    for start in range(0, m_out, _ROW_CHUNK):
        rows = np.arange(start, min(start + _ROW_CHUNK, m_out))
        yield np.repeat(rows, m_in), np.tile(cols, rows.shape[0])


def _candidate_pairs_tree(grid_in: Grid, grid_out: Grid, radius: float, periodic: bool):
    """Pairs within ``radius`` (slightly inflated) from a k-d tree query."""
    boxsize = np.asarray(grid_in.extent) if periodic else None
    points_in = np.asarray(grid_in.points)
    points_out = np.asarray(grid_out.points)
    if periodic:
        points_in = np.mod(points_in, boxsize)
        points_out = np.mod(points_out, boxsize)
    tree = cKDTree(points_in, boxsize=boxsize)
    neighbors = tree.query_ball_point(points_out, r=radius * (1 + 1e-12))
    for start in range(0, grid_out.size, _ROW_CHUNK):
        stop = min(start + _ROW_CHUNK, grid_out.size)
        lists = neighbors[start:stop]
        counts = np.array([len(n) for n in lists], dtype=np.int64)
        if counts.sum() == 0:
            continue
        rows = np.repeat(np.arange(start, stop), counts)
        cols = np.concatenate([np.asarray(n, dtype=np.int64) for n in lists if n])
        yield rows, cols


def _same_regular_grid(grid_in: Grid, grid_out: Grid) -> bool:
    return grid_in is grid_out or (grid_in.is_regular and grid_in.key() == grid_out.key())


def _planar_offsets(grid_in: Grid, grid_out: Grid, rows, cols, periodic: bool) -> np.ndarray:
    """Offsets x_j - y_i for the given pairs, shape (n, d)."""
    if periodic and _same_regular_grid(grid_in, grid_out):
        # integer index arithmetic keeps offsets a function of (j - i) mod n only
        shape = np.asarray(grid_in.shape)
        idx_out = np.stack(np.unravel_index(rows, grid_in.shape), axis=-1)
        idx_in = np.stack(np.unravel_index(cols, grid_in.shape), axis=-1)
        delta = np.mod(idx_in - idx_out + shape // 2, shape) - shape // 2
        return delta * np.asarray(grid_in.widths)
    delta = grid_in.points[cols] - grid_out.points[rows]
    if periodic:
        delta = periodic_offsets(delta, grid_in.extent)
    return delta


def _evaluate_planar(basis: KernelBasis, offsets: np.ndarray, extent, periodic: bool):
    """Basis values (L, n) and the in-support mask for planar offsets."""
    if isinstance(basis, HatBasis1D):
        x = offsets[:, 0]
        if periodic:
            period = extent[0]
            inside = (x >= basis.lower) & (x < basis.lower + period)
            x = np.where(inside, x, basis.lower + np.mod(x - basis.lower, period))
        mask = (x > basis.lower) & (x < basis.upper)
        return eval_hat_1d(basis, x), mask
    radial = np.hypot(offsets[:, 0], offsets[:, 1])
    azimuthal = np.mod(np.arctan2(offsets[:, 1], offsets[:, 0]), 2 * np.pi)
    mask = radial < basis.r_cutoff
    return eval_radial_basis(basis, radial, azimuthal), mask


def _build_kernel(
    rows_list, cols_list, values_list, grid_in: Grid, grid_out: Grid, basis: KernelBasis,
    geometry: str, fold_quadrature: bool,
) -> AssembledKernel:
    ell = basis.size
    if rows_list:
        rows = np.concatenate(rows_list)
        cols = np.concatenate(cols_list)
        values = np.concatenate(values_list, axis=1)
    else:
        rows = np.zeros(0, dtype=np.int64)
        cols = np.zeros(0, dtype=np.int64)
        values = np.zeros((ell, 0))

    order = np.lexsort((cols, rows))
    rows, cols, values = rows[order], cols[order], values[:, order]
    counts = np.bincount(rows, minlength=grid_out.size)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise AssemblyDegenerateError(int(empty[0]))
    indptr = np.concatenate([[0], np.cumsum(counts)])

    quad = grid_in.quad_weights[cols]
    if basis.normalize:
        mass = np.zeros((ell, grid_out.size))
        for k in range(ell):
            mass[k] = np.bincount(rows, weights=values[k] * quad, minlength=grid_out.size)
        scale = np.divide(1.0, mass, out=np.zeros_like(mass), where=mass > 0)
        values = values * scale[:, rows]
    if fold_quadrature:
        values = values * quad[None, :]

    kernel = AssembledKernel(
        indptr=indptr,
        indices=cols.astype(np.int64),
        values=np.ascontiguousarray(values),
        grid_in=grid_in,
        grid_out=grid_out,
        geometry=geometry,
        quadrature_folded=fold_quadrature,
        normalized=basis.normalize,
    )
    _logger.debug("Assembled %s kernel: L=%d nnz=%d", geometry, ell, kernel.nnz)
    return kernel


def _check_planar(grid_in: Grid, grid_out: Grid, basis: KernelBasis) -> bool:
    """Validate a planar pairing; returns whether the domain is periodic."""
    planar = (Topology.PERIODIC_BOX, Topology.BOUNDED_BOX, Topology.UNSTRUCTURED)
    if grid_in.topology not in planar or grid_out.topology not in planar:
        raise UnsupportedTopologyError(f"planar assembly needs box grids, got {grid_in}, {grid_out}")
    if grid_in.dim != grid_out.dim:
        raise InvalidArgumentError("input and output grids differ in dimension")
    if isinstance(basis, HatBasis1D) and grid_in.dim != 1:
        raise InvalidArgumentError("1-D hat bases need 1-D grids")
    if isinstance(basis, RadialAnisotropicBasis) and grid_in.dim != 2:
        raise InvalidArgumentError("radial bases need 2-D grids")
    periodic = grid_in.is_periodic
    if grid_out.is_periodic != periodic:
        raise InvalidArgumentError("input and output grids disagree on periodicity")
    if grid_in.extent is not None and grid_out.extent is not None:
        if not np.allclose(grid_in.extent, grid_out.extent, rtol=1e-14, atol=0.0):
            raise InvalidArgumentError("input and output grids differ in extent")
    if periodic:
        extent = min(grid_in.extent)
        if isinstance(basis, RadialAnisotropicBasis) and basis.r_cutoff >= 0.5 * extent:
            raise InvalidArgumentError(
                f"r_cutoff {basis.r_cutoff} must be below half the extent {extent}"
            )
        if isinstance(basis, HatBasis1D) and basis.support_width > extent:
            raise InvalidArgumentError(
                f"hat support {basis.support_width} exceeds the period {extent}"
            )
    return periodic


def assemble_planar(
    grid_in: Grid, grid_out: Grid, basis: KernelBasis, fold_quadrature: bool = False
) -> AssembledKernel:
    """Sparse K^(l)_ij = kappa^(l)(x_j - y_i) on boxes, tori and planar point clouds."""
    periodic = _check_planar(grid_in, grid_out, basis)
    radius = _search_radius(basis)
    if max(grid_in.size, grid_out.size) <= BRUTE_FORCE_LIMIT:
        pairs = _candidate_pairs_brute(grid_out.size, grid_in.size)
        strategy = "brute"
    else:
        pairs = _candidate_pairs_tree(grid_in, grid_out, radius, periodic)
        strategy = "tree"
    _logger.debug("Planar neighbour search: %s (m_in=%d, m_out=%d)", strategy, grid_in.size, grid_out.size)

    rows_list, cols_list, values_list = [], [], []
    for rows, cols in pairs:
        offsets = _planar_offsets(grid_in, grid_out, rows, cols, periodic)
        values, mask = _evaluate_planar(basis, offsets, grid_in.extent, periodic)
        rows_list.append(rows[mask])
        cols_list.append(cols[mask])
        values_list.append(values[:, mask])
    geometry = "torus" if periodic else ("plane" if grid_in.is_regular else "unstructured")
    return _build_kernel(
        rows_list, cols_list, values_list, grid_in, grid_out, basis, geometry, fold_quadrature
    )


def assemble_unstructured(
    grid_in: Grid, grid_out: Grid, basis: RadialAnisotropicBasis, fold_quadrature: bool = False
) -> AssembledKernel:
    """Euclidean assembly between planar point clouds (no wrap)."""
    if Topology.UNSTRUCTURED not in (grid_in.topology, grid_out.topology):
        _logger.debug("assemble_unstructured called on regular grids")
    return assemble_planar(grid_in, grid_out, basis, fold_quadrature=fold_quadrature)


def _sphere_band_pairs(grid_in: Grid, grid_out: Grid, radius: float):
    """Pairs whose colatitudes differ by less than ``radius``."""
    theta_in = grid_in.points[:, 0]
    order = np.argsort(theta_in, kind="stable")
    sorted_theta = theta_in[order]
    theta_out = grid_out.points[:, 0]
    lo = np.searchsorted(sorted_theta, theta_out - radius, side="left")
    hi = np.searchsorted(sorted_theta, theta_out + radius, side="right")
    for start in range(0, grid_out.size, _ROW_CHUNK):
        stop = min(start + _ROW_CHUNK, grid_out.size)
        counts = hi[start:stop] - lo[start:stop]
        if counts.sum() == 0:
            continue
        rows = np.repeat(np.arange(start, stop), counts)
        cols = np.concatenate([order[lo[i]:hi[i]] for i in range(start, stop)])
        yield rows, cols


def assemble_spherical(
    grid_in: Grid, grid_out: Grid, basis: RadialAnisotropicBasis, fold_quadrature: bool = False
) -> AssembledKernel:
    """Sparse K^(l)_ij = kappa^(l)(geodesic_offset(g_i, x_j)) on the sphere."""
    if grid_in.topology != Topology.SPHERE or grid_out.topology != Topology.SPHERE:
        raise UnsupportedTopologyError(f"spherical assembly needs sphere grids, got {grid_in}, {grid_out}")
    if not isinstance(basis, RadialAnisotropicBasis):
        raise InvalidArgumentError("spherical assembly needs a radial basis")
    if basis.r_cutoff >= np.pi:
        raise InvalidArgumentError(f"geodesic cutoff {basis.r_cutoff} must be below pi")

    if max(grid_in.size, grid_out.size) <= BRUTE_FORCE_LIMIT:
        pairs = _candidate_pairs_brute(grid_out.size, grid_in.size)
    else:
        pairs = _sphere_band_pairs(grid_in, grid_out, basis.r_cutoff)

    rows_list, cols_list, values_list = [], [], []
    for rows, cols in pairs:
        centers = grid_out.points[rows]
        targets = grid_in.points[cols]
        radial, azimuthal = geodesic_offsets(centers[:, 0], centers[:, 1], targets[:, 0], targets[:, 1])
        mask = radial < basis.r_cutoff
        values = eval_radial_basis(basis, radial[mask], azimuthal[mask])
        rows_list.append(rows[mask])
        cols_list.append(cols[mask])
        values_list.append(values)
    return _build_kernel(
        rows_list, cols_list, values_list, grid_in, grid_out, basis, "sphere", fold_quadrature
    )


def assemble(grid_in: Grid, grid_out: Grid, basis: KernelBasis, fold_quadrature: bool = False) -> AssembledKernel:
    """Dispatch on the grid topology."""
    if grid_in.topology == Topology.SPHERE:
        return assemble_spherical(grid_in, grid_out, basis, fold_quadrature)
    return assemble_planar(grid_in, grid_out, basis, fold_quadrature)


# Application

def _check_apply(kernel: AssembledKernel, theta: np.ndarray, values: np.ndarray):
    if values.ndim != 3 or values.shape[2] != kernel.grid_in.size:
        raise InvalidArgumentError(
            f"input with shape {values.shape} does not live on the kernel's input grid"
        )
    if theta.ndim != 3 or theta.shape[1] != values.shape[1] or theta.shape[2] != kernel.size:
        raise InvalidArgumentError(
            f"theta shape {theta.shape} does not match {values.shape[1]} channels and L={kernel.size}"
        )


def _basis_responses(kernel: AssembledKernel, values: np.ndarray) -> np.ndarray:
    """Z[l, i, b, c] = sum_j K^(l)_ij v[b, c, j] q_j."""
    batch, channels, m_in = values.shape
    weighted = values if kernel.quadrature_folded else values * kernel.grid_in.quad_weights
    columns = weighted.transpose(2, 0, 1).reshape(m_in, batch * channels)
    z = kernel.stacked @ columns
    return np.asarray(z).reshape(kernel.size, kernel.grid_out.size, batch, channels)


def disco_apply(kernel: AssembledKernel, theta: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Array form of disco_forward: (b, c_in, m_in) -> (b, c_out, m_out)."""
    _check_apply(kernel, theta, values)
    z = _basis_responses(kernel, values)
    return np.einsum("libc,ocl->boi", z, theta, optimize=True)


def disco_apply_vjp(
    kernel: AssembledKernel, theta: np.ndarray, values: np.ndarray, upstream: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Array form of disco_vjp, returns (grad_theta, grad_values)."""
    _check_apply(kernel, theta, values)
    batch, channels, m_in = values.shape
    expected = (batch, theta.shape[0], kernel.grid_out.size)
    if upstream.shape != expected:
        raise InvalidArgumentError(f"upstream shape {upstream.shape}, expected {expected}")
    z = _basis_responses(kernel, values)
    grad_theta = np.einsum("boi,libc->ocl", upstream, z, optimize=True)

    w = np.einsum("boi,ocl->libc", upstream, theta, optimize=True)
    w = w.reshape(kernel.size * kernel.grid_out.size, batch * channels)
    back = np.asarray(kernel.stacked_transpose @ w).reshape(m_in, batch, channels)
    grad_values = back.transpose(1, 2, 0)
    if not kernel.quadrature_folded:
        grad_values = grad_values * kernel.grid_in.quad_weights
    return grad_theta, np.ascontiguousarray(grad_values)


def _check_field_grid(kernel: AssembledKernel, field: Field):
    if field.grid is not kernel.grid_in and field.grid.key() != kernel.grid_in.key():
        raise InvalidArgumentError(f"{field} does not live on the kernel's input grid {kernel.grid_in}")


def disco_forward(kernel: AssembledKernel, params: DiscoParams, field: Field) -> Field:
    """DISCO convolution of a field; the output lives on the kernel's output grid."""
    _check_field_grid(kernel, field)
    return Field(values=disco_apply(kernel, params.theta, field.values), grid=kernel.grid_out)


def disco_vjp(
    kernel: AssembledKernel, params: DiscoParams, field: Field, upstream: Field
) -> Tuple[DiscoParams, Field]:
    """Exact adjoints of disco_forward with respect to theta and the input."""
    _check_field_grid(kernel, field)
    grad_theta, grad_values = disco_apply_vjp(kernel, params.theta, field.values, upstream.values)
    return DiscoParams(theta=grad_theta), Field(values=grad_values, grid=field.grid)


# Equidistant-grid equivalence

def _offset_indices(kernel: AssembledKernel) -> np.ndarray:
    """Flat index of (col - row) mod shape for every stored entry."""
    shape = kernel.grid_in.shape
    rows = np.repeat(np.arange(kernel.grid_out.size), kernel.row_counts())
    idx_out = np.stack(np.unravel_index(rows, shape), axis=0)
    idx_in = np.stack(np.unravel_index(kernel.indices, shape), axis=0)
    delta = np.mod(idx_in - idx_out, np.asarray(shape)[:, None])
    return np.ravel_multi_index(tuple(delta), shape)


def dense_equivalent(kernel: AssembledKernel, params: DiscoParams, tol: float = EXACT_TOL) -> np.ndarray:
    """Translation-invariant taps reproduced by every row.

    Returns taps of shape (c_out, c_in, *shape) with taps[..., o] weighting the
    input at (i + o) mod shape.
    """
    grid = kernel.grid_in
    if not (grid.is_periodic and _same_regular_grid(grid, kernel.grid_out)):
        raise UnsupportedTopologyError("dense equivalent needs one regular periodic grid")
    theta = params.theta
    entries = np.einsum("ocl,ln->ocn", theta, kernel.values)
    if not kernel.quadrature_folded:
        entries = entries * grid.quad_weights[kernel.indices]
    offsets = _offset_indices(kernel)

    first = slice(kernel.indptr[0], kernel.indptr[1])
    taps = np.zeros(theta.shape[:2] + (grid.size,))
    taps[:, :, offsets[first]] = entries[:, :, first]

    deviation = np.abs(entries - taps[:, :, offsets])
    if deviation.size and deviation.max() > tol:
        bad = int(np.argmax(deviation.max(axis=(0, 1))))
        row = int(np.searchsorted(kernel.indptr, bad, side="right") - 1)
        raise NotEquivariantError(f"row {row} is not a translate of row 0 (deviation {deviation.max():.3e})")

    reference = set(offsets[first].tolist())
    strong = np.abs(taps).max(axis=(0, 1)) > tol
    for row in range(1, grid.size):
        present = set(offsets[kernel.indptr[row]:kernel.indptr[row + 1]].tolist())
        missing = [o for o in reference - present if strong[o]]
        if missing:
            raise NotEquivariantError(f"row {row} lacks offsets {missing[:4]} present in row 0")
    return taps.reshape(theta.shape[:2] + tuple(grid.shape))


def apply_circulant(taps: np.ndarray, field: Field) -> Field:
    """Dense circular convolution out[i] = sum_o taps[o] v[(i + o) mod n]."""
    grid = field.grid
    image = field.as_image()
    spatial = taps.shape[2:]
    out = np.zeros((field.batch, taps.shape[0]) + tuple(spatial))
    axes = tuple(range(2, 2 + len(spatial)))
    for flat in np.flatnonzero(np.abs(taps).max(axis=(0, 1)).ravel()):
        offset = np.unravel_index(flat, spatial)
        shifted = np.roll(image, shift=tuple(-int(o) for o in offset), axis=axes)
        out += np.einsum("oc,bc...->bo...", taps[(slice(None), slice(None)) + offset], shifted)
    return Field.from_image(out, grid)


def circulant_taps_from_basis(basis: KernelBasis, grid: Grid, theta: np.ndarray) -> np.ndarray:
    """Taps q * kappa(z_o) sampled directly from the basis at wrapped offsets z_o."""
    if not grid.is_periodic:
        raise UnsupportedTopologyError("circulant taps need a periodic box")
    shape = np.asarray(grid.shape)
    mesh = np.meshgrid(*[np.arange(n) for n in grid.shape], indexing="ij")
    index = np.stack([m.ravel() for m in mesh], axis=-1)
    signed = np.mod(index + shape // 2, shape) - shape // 2
    offsets = signed * np.asarray(grid.widths)
    values, mask = _evaluate_planar(basis, offsets, grid.extent, True)
    kappa = np.einsum("ocl,ln->ocn", theta, values * mask)
    q = grid.quad_weights[0]
    return (q * kappa).reshape(theta.shape[:2] + tuple(grid.shape))
