"""Tests for the synthetic dataset generators."""

import numpy as np
import pytest

from src.controllers.data import (
    darcy_at_points,
    darcy_coefficients,
    gen_bandlimited,
    gen_darcy,
    gen_parabola,
    generate_bandlimited,
    generate_darcy,
    generate_parabola,
    regenerate_dataset,
    split_seeds,
    task_grid,
)
from src.controllers.geometry import make_regular_grid
from src.models.dataset import ParabolaSpec
from src.models.kernels import DirectionalSignature
from src.utils.errors import InvalidArgumentError


def numeric_forcing(coefficients, x, y, step=1e-4):
    """-div(a grad u) by nested central differences of the closed-form u."""

    def u(px, py):
        return darcy_at_points(coefficients, px, py)[0]

    def grad(px, py):
        ux = (u(px + step, py) - u(px - step, py)) / (2 * step)
        uy = (u(px, py + step) - u(px, py - step)) / (2 * step)
        return ux, uy

    def flux(px, py):
        ux, uy = grad(px, py)
        return px * px * ux + np.sin(px * py) * uy, (px + py) * ux + py * uy

    fx_plus, _ = flux(x + step, y)
    fx_minus, _ = flux(x - step, y)
    _, fy_plus = flux(x, y + step)
    _, fy_minus = flux(x, y - step)
    return -((fx_plus - fx_minus) + (fy_plus - fy_minus)) / (2 * step)


class TestDarcy:
    """Tests for the Darcy generator."""

    @pytest.fixture
    def grid(self):
        return make_regular_grid((17, 17), (1.0, 1.0), periodic=False)

    def test_coefficients_are_seeded(self):
        assert np.array_equal(darcy_coefficients(3), darcy_coefficients(3))
        assert not np.array_equal(darcy_coefficients(3), darcy_coefficients(4))
        assert darcy_coefficients(0).shape == (20, 20)

    def test_forcing_matches_finite_differences(self):
        coefficients = darcy_coefficients(0, modes=4)
        rng = np.random.default_rng(0)
        x, y = rng.uniform(0.2, 0.8, 10), rng.uniform(0.2, 0.8, 10)
        _, f = darcy_at_points(coefficients, x, y)
        assert np.allclose(f, numeric_forcing(coefficients, x, y), rtol=1e-4, atol=1e-4)

    def test_dirichlet_boundary(self):
        coefficients = darcy_coefficients(1)
        t = np.linspace(0.0, 1.0, 9)
        for x, y in [(t, np.zeros(9)), (t, np.ones(9)), (np.zeros(9), t), (np.ones(9), t)]:
            u, _ = darcy_at_points(coefficients, x, y)
            assert np.allclose(u, 0.0, atol=1e-12)

    def test_grid_and_point_evaluation_agree(self, grid):
        sample = gen_darcy(grid, seed=2)
        u, f = darcy_at_points(darcy_coefficients(2), grid.points[:, 0], grid.points[:, 1])
        assert np.allclose(sample.u, u, atol=1e-12)
        assert np.allclose(sample.f, f, atol=1e-10)

    def test_resampling_reads_the_same_function(self, grid):
        coarse = gen_darcy(grid, seed=5)
        fine = gen_darcy(make_regular_grid((33, 33), (1.0, 1.0), periodic=False), seed=5)
        assert np.allclose(fine.u.reshape(33, 33)[::2, ::2].ravel(), coarse.u, atol=1e-12)

    def test_dataset(self, grid):
        dataset = generate_darcy(grid, count=3, seed=10)
        assert len(dataset) == 3
        assert dataset.inputs.shape == (3, 1, grid.size)
        assert dataset.sample_seeds == [10, 11, 12]
        assert dataset.extra["split"] == "train"

    def test_needs_unit_bounded_box(self):
        with pytest.raises(InvalidArgumentError):
            gen_darcy(make_regular_grid((8, 8), (1.0, 1.0), periodic=True), seed=0)
        with pytest.raises(InvalidArgumentError):
            gen_darcy(make_regular_grid((8, 8), (2.0, 1.0), periodic=False), seed=0)


class TestSplits:
    """Tests for train and test seed ranges."""

    def test_splits_are_disjoint(self):
        train = set(split_seeds(0, 100, "train"))
        test = set(split_seeds(0, 100, "test"))
        assert not train & test

    def test_unknown_split(self):
        with pytest.raises(InvalidArgumentError):
            split_seeds(0, 1, "validation")


class TestParabola:
    """Tests for the parabola fields."""

    def test_values_and_target(self):
        grid = make_regular_grid((5, 5), (1.0, 1.0), periodic=False)
        spec = ParabolaSpec(coefficients=(1.0, 0.5), scale=2.0)
        field, target = gen_parabola(grid, spec)
        radius_sq = np.sum(grid.points ** 2, axis=1)
        assert np.allclose(field.values[0, 1], 1.0 * radius_sq)
        signature = DirectionalSignature(b=np.array([[[1.0, 0.0], [0.0, 1.0]]]), c=np.zeros((1, 2)))
        expected = 2.0 * (2.0 * grid.points[:, 0] + 1.0 * grid.points[:, 1])
        assert np.allclose(target(signature).values[0, 0], expected)

    def test_target_rejects_wrong_signature(self):
        grid = make_regular_grid((5, 5), (1.0, 1.0), periodic=False)
        _, target = gen_parabola(grid, ParabolaSpec(coefficients=(1.0,)))
        with pytest.raises(InvalidArgumentError):
            target(DirectionalSignature(b=np.zeros((1, 2, 2)), c=np.zeros((1, 2))))

    def test_dataset_holds_gradients(self):
        grid = make_regular_grid((5, 5), (1.0, 1.0), periodic=False)
        dataset = generate_parabola(grid, ParabolaSpec.random(3, 1.0, seed=0))
        assert dataset.targets.shape == (1, 6, grid.size)
        assert dataset.target_names[:2] == ["dv0/dx0", "dv0/dx1"]

    def test_random_spec_is_seeded(self):
        assert ParabolaSpec.random(4, 2.0, seed=1) == ParabolaSpec.random(4, 2.0, seed=1)


class TestBandlimited:
    """Tests for trigonometric polynomials on the torus."""

    def test_laplacian_matches_spectral_derivative(self):
        grid = make_regular_grid((16, 16), (1.0, 1.0), periodic=True)
        values, target = gen_bandlimited(grid, seed=0)
        k = 2 * np.pi * np.fft.fftfreq(16, d=1.0 / 16)
        kx, ky = np.meshgrid(k, k, indexing="ij")
        spectrum = np.fft.fft2(values.reshape(16, 16))
        laplacian = np.real(np.fft.ifft2(-(kx ** 2 + ky ** 2) * spectrum))
        assert np.allclose(laplacian.ravel(), target, atol=1e-9)

    def test_needs_periodic_box(self):
        with pytest.raises(InvalidArgumentError):
            gen_bandlimited(make_regular_grid((8, 8), (1.0, 1.0), periodic=False), seed=0)


class TestRegeneration:
    """Tests for resampling datasets on other grids."""

    @pytest.mark.parametrize("task", ["darcy", "bandlimited"])
    def test_same_seeds_on_new_grid(self, task):
        dataset = (generate_darcy if task == "darcy" else generate_bandlimited)(task_grid(task, 9), 2, 4)
        fine = regenerate_dataset(dataset, task_grid(task, 17))
        assert fine.sample_seeds == dataset.sample_seeds
        assert fine.inputs.shape == (2, 1, 17 * 17)

    def test_parabola(self):
        dataset = generate_parabola(task_grid("parabola", 9), ParabolaSpec.random(2, 1.0, seed=0))
        fine = regenerate_dataset(dataset, task_grid("parabola", 17))
        assert fine.extra["spec"] == dataset.extra["spec"]

    def test_task_grid(self):
        assert task_grid("bandlimited", 8).is_periodic
        assert not task_grid("darcy", 8).is_periodic
        with pytest.raises(InvalidArgumentError):
            task_grid("navier-stokes", 8)
