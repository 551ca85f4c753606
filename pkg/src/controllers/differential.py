"""Constrained differential convolutions on regular grids.

The stored taps K are centred per (out, in) slice and divided by the grid
width at forward time, so the layer converges to a first-order directional
derivative under refinement instead of collapsing to a pointwise map.
"""

import logging
from typing import Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..models.field import Field
from ..models.grid import Grid
from ..models.kernels import DifferentialKernel, DirectionalSignature, PaddingMode
from ..utils.errors import InvalidArgumentError

_logger = logging.getLogger(__name__)


def grid_scale(grid: Grid) -> float:
    """Characteristic width h of a regular grid."""
    if grid.width is None or not grid.is_regular:
        raise InvalidArgumentError(f"{grid} has no characteristic width")
    return grid.width


def _spatial_axes(taps: np.ndarray) -> Tuple[int, ...]:
    return tuple(range(2, taps.ndim))


def center_taps(taps: np.ndarray) -> np.ndarray:
    """Subtract the mean of every (out, in) slice."""
    return taps - taps.mean(axis=_spatial_axes(taps), keepdims=True)


def effective_kernel(raw: DifferentialKernel, h: float) -> np.ndarray:
    """(K - mean(K)) / h per (out, in) slice."""
    return effective_taps(raw.taps, h)


def effective_taps(taps: np.ndarray, h: float) -> np.ndarray:
    if not h > 0:
        raise InvalidArgumentError(f"grid width must be > 0, got {h}")
    return center_taps(taps) / h


# Padding as index maps, so the adjoint is a scatter-add over the same maps.

def _pad_index(n: int, pad: int, mode: PaddingMode) -> np.ndarray:
    if mode == PaddingMode.ZERO:
        return np.pad(np.arange(n), pad, mode="constant", constant_values=-1)
    if mode == PaddingMode.REFLECTIVE and n <= pad:
        raise InvalidArgumentError(f"reflective padding of {pad} needs more than {pad} points")
    return np.pad(np.arange(n), pad, mode=mode.numpy_mode)


def pad_image(image: np.ndarray, pad: int, mode: PaddingMode) -> np.ndarray:
    """Pad every spatial axis (2 and up) of a (b, c, ...) array."""
    result = image
    for axis in range(2, image.ndim):
        index = _pad_index(image.shape[axis], pad, mode)
        gathered = np.take(result, np.maximum(index, 0), axis=axis)
        if mode == PaddingMode.ZERO:
            shape = [1] * image.ndim
            shape[axis] = index.shape[0]
            gathered = gathered * (index >= 0).reshape(shape)
        result = gathered
    return result


def pad_image_adjoint(grad: np.ndarray, shape: Sequence[int], pad: int, mode: PaddingMode) -> np.ndarray:
    """Transpose of pad_image: accumulate padded gradients onto the source points."""
    result = grad
    for axis in reversed(range(2, grad.ndim)):
        n = shape[axis - 2]
        index = _pad_index(n, pad, mode)
        valid = index >= 0
        moved = np.moveaxis(result, axis, 0)
        out = np.zeros((n,) + moved.shape[1:], dtype=grad.dtype)
        np.add.at(out, index[valid], moved[valid])
        result = np.moveaxis(out, 0, axis)
    return result


def _windows(kernel_size: int, dim: int, out_shape: Sequence[int]):
    """Yield (tap index, slices) for every tap of a stride-1 valid correlation."""
    offsets = np.stack(
        [m.ravel() for m in np.meshgrid(*[np.arange(kernel_size)] * dim, indexing="ij")],
        axis=-1,
    )
    for offset in offsets:
        slices = tuple(slice(o, o + n) for o, n in zip(offset, out_shape))
        yield tuple(int(o) for o in offset), slices


def _tap_windows(padded: np.ndarray, kernel_size: int, dim: int) -> np.ndarray:
    """Read-only view (b, c, *out_shape, S, ..., S) of every stencil window."""
    return sliding_window_view(padded, (kernel_size,) * dim, axis=tuple(range(2, 2 + dim)))


def correlate_valid(padded: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Valid cross-correlation of (b, c_in, ...) with (c_out, c_in, S, ...) taps."""
    dim = taps.ndim - 2
    windows = _tap_windows(padded, taps.shape[2], dim)
    window_axes = (1,) + tuple(range(2 + dim, 2 + 2 * dim))
    tap_axes = (1,) + tuple(range(2, 2 + dim))
    out = np.tensordot(windows, taps, axes=(window_axes, tap_axes))
    return np.ascontiguousarray(np.moveaxis(out, -1, 1))


def diff_apply(taps: np.ndarray, h: float, padding: PaddingMode, image: np.ndarray) -> np.ndarray:
    """Array form of diff_conv_forward on (b, c_in, *shape) images."""
    _check_image(taps, image)
    effective = effective_taps(taps, h)
    padded = pad_image(image, taps.shape[2] // 2, PaddingMode(padding))
    return correlate_valid(padded, effective)


def diff_apply_vjp(
    taps: np.ndarray, h: float, padding: PaddingMode, image: np.ndarray, upstream: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Array form of diff_conv_vjp, returns (grad_taps, grad_image)."""
    _check_image(taps, image)
    padding = PaddingMode(padding)
    expected = (image.shape[0], taps.shape[0]) + image.shape[2:]
    if upstream.shape != expected:
        raise InvalidArgumentError(f"upstream shape {upstream.shape}, expected {expected}")
    pad = taps.shape[2] // 2
    dim = taps.ndim - 2
    effective = effective_taps(taps, h)
    padded = pad_image(image, pad, padding)

    spatial = tuple(range(2, 2 + dim))
    windows = _tap_windows(padded, taps.shape[2], dim)
    grad_effective = np.tensordot(upstream, windows, axes=((0,) + spatial, (0,) + spatial))
    # (b, *shape, c_in, S, ..., S) -> (b, c_in, *shape, S, ..., S)
    spread = np.moveaxis(np.tensordot(upstream, effective, axes=((1,), (0,))), 1 + dim, 1)
    grad_padded = np.zeros_like(padded)
    for offset, slices in _windows(taps.shape[2], dim, image.shape[2:]):
        grad_padded[(slice(None), slice(None)) + slices] += spread[(Ellipsis,) + offset]

    # chain through the centering projector and the 1/h scale
    grad_taps = center_taps(grad_effective) / h
    grad_image = pad_image_adjoint(grad_padded, image.shape[2:], pad, padding)
    return grad_taps, grad_image


def _check_image(taps: np.ndarray, image: np.ndarray):
    if image.ndim != taps.ndim or image.shape[1] != taps.shape[1]:
        raise InvalidArgumentError(
            f"image shape {image.shape} does not match taps shape {taps.shape}"
        )


def diff_conv_forward(raw: DifferentialKernel, field: Field) -> Field:
    """Stride-1 cross-correlation with the effective kernel, same resolution out."""
    h = grid_scale(field.grid)
    if raw.spatial_dim != field.grid.dim:
        raise InvalidArgumentError(f"{raw.spatial_dim}-D taps on a {field.grid.dim}-D grid")
    out = diff_apply(raw.taps, h, raw.padding_mode, field.as_image())
    return Field.from_image(out, field.grid)


def diff_conv_vjp(raw: DifferentialKernel, field: Field, upstream: Field) -> Tuple[DifferentialKernel, Field]:
    """Exact adjoints of diff_conv_forward, through the centering and scaling."""
    h = grid_scale(field.grid)
    grad_taps, grad_image = diff_apply_vjp(
        raw.taps, h, raw.padding_mode, field.as_image(), upstream.as_image()
    )
    return (
        DifferentialKernel(taps=grad_taps, padding_mode=raw.padding_mode),
        Field.from_image(grad_image, field.grid),
    )


def extract_direction(raw: DifferentialKernel, h: float) -> DirectionalSignature:
    """Limit operator c v + grad(v) . b of the effective kernel.

    b = sum_i eff_i z_i with z_i = h * (integer tap offset); c = sum_i eff_i.
    """
    effective = effective_kernel(raw, h)
    flat = effective.reshape(effective.shape[:2] + (-1,))
    z = raw.offsets() * h
    b = np.einsum("oct,td->ocd", flat, z)
    c = flat.sum(axis=-1)
    return DirectionalSignature(b=b, c=c)


def collapse_limit(taps: np.ndarray) -> np.ndarray:
    """Pointwise limit of an unconstrained, unscaled kernel: the tap sum per slice."""
    return taps.sum(axis=_spatial_axes(taps))
