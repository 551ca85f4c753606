"""Tests for the truncated-Fourier convolution."""

import numpy as np
import pytest

from src.controllers.geometry import make_regular_grid, translate_field
from src.controllers.spectral import (
    check_modes,
    identity_weights,
    init_spectral_weights,
    mode_indices,
    spectral_apply,
    spectral_apply_vjp,
    spectral_conv_forward,
    spectral_conv_vjp,
)
from src.models.field import Field
from src.models.kernels import SpectralWeights
from src.utils.errors import InvalidArgumentError


@pytest.fixture
def rng():
    return np.random.default_rng(11)


class TestModes:
    """Tests for mode bookkeeping."""

    def test_mode_indices_split_non_last_axes(self):
        rows, cols = mode_indices((8, 8), (5, 3))
        assert rows.tolist() == [0, 1, 2, 6, 7]
        assert cols.tolist() == [0, 1, 2]

    def test_full_last_axis_allowed(self):
        check_modes((8, 8), (8, 5))

    @pytest.mark.parametrize("modes", [(9, 3), (4, 6), (0, 2), (4,)])
    def test_rejects_modes_beyond_grid(self, modes):
        with pytest.raises(InvalidArgumentError):
            check_modes((8, 8), modes)

    def test_weights_must_be_finite(self):
        weights = np.zeros((1, 1, 2, 2), dtype=np.complex128)
        weights[0, 0, 1, 1] = np.nan
        with pytest.raises(ValueError):
            SpectralWeights(weights=weights)

    def test_real_weights_are_promoted(self):
        weights = SpectralWeights(weights=np.ones((1, 1, 2, 2)))
        assert np.iscomplexobj(weights.weights)
        assert weights.modes == (2, 2)


class TestForward:
    """Tests for the forward map."""

    @pytest.fixture
    def grid(self):
        return make_regular_grid((16, 16), (1.0, 1.0), periodic=True)

    def test_identity_keeps_bandlimited_fields(self, grid):
        x, y = grid.points[:, 0], grid.points[:, 1]
        values = np.sin(2 * np.pi * x) + np.cos(2 * np.pi * (2 * x + y))
        field = Field(values=values[None, None], grid=grid)
        out = spectral_conv_forward(identity_weights(1, (8, 5)), field)
        assert np.allclose(out.values, field.values, atol=1e-12)

    def test_truncation_drops_high_frequencies(self, grid):
        x = grid.points[:, 0]
        values = np.cos(2 * np.pi * 6 * x)
        out = spectral_conv_forward(identity_weights(1, (4, 3)), Field(values=values[None, None], grid=grid))
        assert np.allclose(out.values, 0.0, atol=1e-12)

    def test_output_is_real_and_shaped(self, grid, rng):
        weights = init_spectral_weights(2, 3, (4, 3), rng)
        field = Field(values=rng.standard_normal((2, 2, grid.size)), grid=grid)
        out = spectral_conv_forward(weights, field)
        assert out.values.shape == (2, 3, grid.size)
        assert not np.iscomplexobj(out.values)

    def test_translation_equivariance(self, grid, rng):
        weights = init_spectral_weights(2, 2, (8, 5), rng)
        field = Field(values=rng.standard_normal((1, 2, grid.size)), grid=grid)
        base = spectral_conv_forward(weights, field)
        for shift in [(1, 0), (5, 11)]:
            lhs = spectral_conv_forward(weights, translate_field(field, shift))
            assert np.allclose(lhs.values, translate_field(base, shift).values, atol=1e-10)

    def test_rejects_channel_mismatch(self, grid, rng):
        weights = init_spectral_weights(3, 2, (4, 3), rng)
        with pytest.raises(InvalidArgumentError):
            spectral_conv_forward(weights, Field(values=np.zeros((1, 2, grid.size)), grid=grid))

    def test_one_dimensional(self, rng):
        grid = make_regular_grid((32,), (1.0,), periodic=True)
        out = spectral_conv_forward(identity_weights(1, (17,)), Field(values=rng.standard_normal((1, 1, 32)), grid=grid))
        assert out.values.shape == (1, 1, 32)


class TestAdjoint:
    """Tests for the vector-Jacobian product."""

    @pytest.mark.parametrize("shape,modes", [((8, 8), (4, 3)), ((8, 8), (8, 5)), ((9, 7), (5, 4))])
    def test_adjoint_identity(self, shape, modes, rng):
        weights = init_spectral_weights(2, 3, modes, rng).weights
        image = rng.standard_normal((2, 2) + shape)
        upstream = rng.standard_normal((2, 3) + shape)
        out = spectral_apply(weights, image)
        grad_weights, grad_image = spectral_apply_vjp(weights, image, upstream)
        pairing = np.sum(out * upstream)
        assert pairing == pytest.approx(np.sum(image * grad_image), rel=1e-9)

        # the map is real-linear in the weights, paired through Re(conj(grad) * w)
        assert pairing == pytest.approx(np.sum(np.real(np.conj(grad_weights) * weights)), rel=1e-9)

    def test_field_wrapper(self, rng):
        grid = make_regular_grid((8, 8), (1.0, 1.0), periodic=True)
        weights = init_spectral_weights(1, 2, (4, 3), rng)
        field = Field(values=rng.standard_normal((1, 1, 64)), grid=grid)
        upstream = Field(values=rng.standard_normal((1, 2, 64)), grid=grid)
        grad_weights, grad_field = spectral_conv_vjp(weights, field, upstream)
        assert grad_weights.weights.shape == weights.weights.shape
        assert grad_field.values.shape == field.values.shape

    def test_rejects_wrong_upstream(self, rng):
        weights = init_spectral_weights(1, 1, (4, 3), rng).weights
        with pytest.raises(InvalidArgumentError):
            spectral_apply_vjp(weights, np.zeros((1, 1, 8, 8)), np.zeros((1, 2, 8, 8)))
