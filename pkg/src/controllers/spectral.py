"""Truncated-Fourier global convolution on regular grids.

Forward transform unnormalized, inverse divided by the point count. Non-last
axes keep ``modes[k]`` frequencies, ceil(m/2) non-negative and floor(m/2)
negative; the last axis keeps the first ``modes[-1]`` real-transform bins.
"""

import logging
from typing import Sequence, Tuple

import numpy as np

from ..models.field import Field
from ..models.kernels import SpectralWeights
from ..utils.errors import InvalidArgumentError

_logger = logging.getLogger(__name__)


def check_modes(shape: Sequence[int], modes: Sequence[int]):
    """Raise unless every retained mode count fits the grid."""
    shape, modes = tuple(shape), tuple(modes)
    if len(shape) != len(modes):
        raise InvalidArgumentError(f"modes {modes} do not match a {len(shape)}-D grid")
    for axis, (n, m) in enumerate(zip(shape, modes)):
        limit = n // 2 + 1 if axis == len(shape) - 1 else n
        if m < 1 or m > limit:
            raise InvalidArgumentError(
                f"{m} modes along axis {axis} exceed the {limit} available on {n} points"
            )


def mode_indices(shape: Sequence[int], modes: Sequence[int]) -> Tuple[np.ndarray, ...]:
    """Index arrays into the rfftn spectrum for every retained mode, per axis."""
    check_modes(shape, modes)
    indices = []
    last = len(shape) - 1
    for axis, (n, m) in enumerate(zip(shape, modes)):
        if axis == last:
            indices.append(np.arange(m))
        else:
            positive = (m + 1) // 2
            negative = m // 2
            indices.append(np.concatenate([np.arange(positive), np.arange(n - negative, n)]))
    return tuple(indices)


def _gather(spectrum: np.ndarray, index: Tuple[np.ndarray, ...]) -> np.ndarray:
    return spectrum[(slice(None), slice(None)) + np.ix_(*index)]


def _bin_multiplicity(shape: Sequence[int], index: Tuple[np.ndarray, ...]) -> np.ndarray:
    """2 for last-axis bins with a conjugate twin, 1 for the zero and Nyquist bins."""
    n = shape[-1]
    last = index[-1]
    weight = np.full(last.shape[0], 2.0)
    weight[last == 0] = 1.0
    if n % 2 == 0:
        weight[last == n // 2] = 1.0
    return weight


def init_spectral_weights(
    in_channels: int, out_channels: int, modes: Sequence[int], rng: np.random.Generator
) -> SpectralWeights:
    """Independent real and imaginary parts, zero mean, total variance 1/(c_in c_out)."""
    shape = (out_channels, in_channels) + tuple(modes)
    std = np.sqrt(1.0 / (2.0 * in_channels * out_channels))
    weights = rng.normal(0.0, std, shape) + 1j * rng.normal(0.0, std, shape)
    return SpectralWeights(weights=weights)


def spectral_apply(weights: np.ndarray, image: np.ndarray) -> np.ndarray:
    """Array form of spectral_conv_forward on (b, c_in, *shape) images."""
    shape = image.shape[2:]
    _check_weights(weights, image)
    index = mode_indices(shape, weights.shape[2:])
    axes = tuple(range(2, image.ndim))
    spectrum = np.fft.rfftn(image, axes=axes)
    mixed = np.einsum("bi...,oi...->bo...", _gather(spectrum, index), weights)
    out_spectrum = np.zeros((image.shape[0], weights.shape[0]) + spectrum.shape[2:], dtype=np.complex128)
    out_spectrum[(slice(None), slice(None)) + np.ix_(*index)] = mixed
    return np.fft.irfftn(out_spectrum, s=shape, axes=axes)


def spectral_apply_vjp(
    weights: np.ndarray, image: np.ndarray, upstream: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Array form of spectral_conv_vjp, returns (grad_weights, grad_image).

    Complex gradients hold dL/dRe + i dL/dIm.
    """
    shape = image.shape[2:]
    _check_weights(weights, image)
    expected = (image.shape[0], weights.shape[0]) + tuple(shape)
    if upstream.shape != expected:
        raise InvalidArgumentError(f"upstream shape {upstream.shape}, expected {expected}")
    index = mode_indices(shape, weights.shape[2:])
    axes = tuple(range(2, image.ndim))
    count = float(np.prod(shape))
    multiplicity = _bin_multiplicity(shape, index)

    spectrum_in = _gather(np.fft.rfftn(image, axes=axes), index)
    grad_out = _gather(np.fft.rfftn(upstream, axes=axes), index) * (multiplicity / count)
    grad_weights = np.einsum("bo...,bi...->oi...", grad_out, np.conj(spectrum_in))

    grad_in = np.einsum("oi...,bo...->bi...", np.conj(weights), grad_out)
    full = np.zeros((image.shape[0], image.shape[1]) + _rfft_shape(shape), dtype=np.complex128)
    full[(slice(None), slice(None)) + np.ix_(*index)] = grad_in / multiplicity
    grad_image = count * np.fft.irfftn(full, s=shape, axes=axes)
    return grad_weights, grad_image


def _rfft_shape(shape: Sequence[int]) -> Tuple[int, ...]:
    return tuple(shape[:-1]) + (shape[-1] // 2 + 1,)


def _check_weights(weights: np.ndarray, image: np.ndarray):
    if weights.ndim != image.ndim or weights.shape[1] != image.shape[1]:
        raise InvalidArgumentError(
            f"weights shape {weights.shape} does not match input shape {image.shape}"
        )


def spectral_conv_forward(weights: SpectralWeights, field: Field) -> Field:
    """Real FFT, per-mode channel mixing on retained modes, inverse FFT."""
    if field.grid.shape is None:
        raise InvalidArgumentError(f"{field.grid} is not a regular grid")
    out = spectral_apply(weights.weights, field.as_image())
    return Field.from_image(out, field.grid)


def spectral_conv_vjp(
    weights: SpectralWeights, field: Field, upstream: Field
) -> Tuple[SpectralWeights, Field]:
    """Exact adjoints of spectral_conv_forward."""
    grad_weights, grad_image = spectral_apply_vjp(
        weights.weights, field.as_image(), upstream.as_image()
    )
    return SpectralWeights(weights=grad_weights), Field.from_image(grad_image, field.grid)


def identity_weights(channels: int, modes: Sequence[int]) -> SpectralWeights:
    """Weights passing every retained mode of every channel unchanged."""
    weights = np.zeros((channels, channels) + tuple(modes), dtype=np.complex128)
    for c in range(channels):
        weights[c, c] = 1.0
    return SpectralWeights(weights=weights)
