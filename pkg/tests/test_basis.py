"""Tests for the piecewise-linear kernel bases."""

import numpy as np
import pytest

from src.controllers.basis import (
    default_planar_basis,
    default_sphere_basis,
    eval_hat_1d,
    eval_radial_basis,
    torus_basis,
)
from src.models.basis import HatBasis1D, RadialAnisotropicBasis, basis_from_dict


class TestHatBasis1D:
    """Tests for 1-D hat functions."""

    @pytest.fixture
    def basis(self):
        return HatBasis1D(collocation=(0.0, 1.0, 2.0), lower=-1.0, upper=3.0)

    def test_size_and_nodes(self, basis):
        assert basis.size == 3
        assert basis.nodes.tolist() == [-1.0, 0.0, 1.0, 2.0, 3.0]
        assert basis.support_width == 4.0

    def test_cardinal_at_collocation_points(self, basis):
        values = eval_hat_1d(basis, np.array([0.0, 1.0, 2.0]))
        assert np.array_equal(values, np.eye(3))

    def test_linear_between_nodes(self, basis):
        values = eval_hat_1d(basis, np.array([0.25, -0.5]))
        assert values[0, 0] == pytest.approx(0.75)
        assert values[1, 0] == pytest.approx(0.25)
        assert values[0, 1] == pytest.approx(0.5)

    def test_zero_outside_support(self, basis):
        values = eval_hat_1d(basis, np.array([-1.0, -2.0, 3.0, 5.0]))
        assert np.all(values == 0.0)

    def test_partition_of_unity_inside_collocation_range(self, basis):
        x = np.linspace(0.0, 2.0, 17)
        assert np.allclose(eval_hat_1d(basis, x).sum(axis=0), 1.0)

    def test_lipschitz_at_jittered_points(self, basis):
        rng = np.random.default_rng(3)
        x = rng.uniform(-1.5, 3.5, 2000)
        y = x + rng.uniform(-0.1, 0.1, 2000)
        change = np.abs(eval_hat_1d(basis, x) - eval_hat_1d(basis, y)).max(axis=0)
        assert np.all(change <= np.abs(x - y) + 1e-12)

    def test_equidistant(self):
        basis = HatBasis1D.equidistant(3, 0.5, 1.0)
        assert basis.collocation == (1.0, 1.5, 2.0)
        assert basis.lower == 0.5
        assert basis.upper == 2.5

    def test_rejects_unsorted_nodes(self):
        with pytest.raises(ValueError):
            HatBasis1D(collocation=(1.0, 0.0), lower=-1.0, upper=2.0)

    def test_to_dict_and_from_dict(self, basis):
        restored = basis_from_dict(basis.to_dict())
        assert isinstance(restored, HatBasis1D)
        assert restored.collocation == basis.collocation
        assert restored.lower == basis.lower
        assert restored.upper == basis.upper


class TestRadialAnisotropicBasis:
    """Tests for the ring-and-azimuth basis."""

    @pytest.fixture
    def basis(self):
        return RadialAnisotropicBasis(r_cutoff=1.0, n_rings=1, n_azimuth=4)

    def test_size(self, basis):
        assert basis.size == 5
        assert RadialAnisotropicBasis(r_cutoff=1.0, n_rings=2, n_azimuth=3).size == 7

    def test_center_function(self, basis):
        values = eval_radial_basis(basis, np.array([0.0, 0.25, 0.5]), np.zeros(3))
        assert values[0].tolist() == pytest.approx([1.0, 0.5, 0.0])

    def test_ring_functions_at_collocation(self, basis):
        angles = np.arange(4) * np.pi / 2
        values = eval_radial_basis(basis, np.full(4, 0.5), angles)
        assert np.allclose(values[1:], np.eye(4))
        assert np.allclose(values[0], 0.0)

    def test_vanishes_at_cutoff(self, basis):
        values = eval_radial_basis(basis, np.array([1.0, 1.5]), np.array([0.3, 2.0]))
        assert np.all(values == 0.0)

    def test_azimuthal_periodicity(self, basis):
        a = eval_radial_basis(basis, np.array([0.6]), np.array([0.1]))
        b = eval_radial_basis(basis, np.array([0.6]), np.array([0.1 + 2 * np.pi]))
        assert np.allclose(a, b)

    def test_partition_of_unity_inside_first_ring(self, basis):
        rng = np.random.default_rng(0)
        radial = rng.uniform(0.0, 0.5, 50)
        azimuthal = rng.uniform(0.0, 2 * np.pi, 50)
        assert np.allclose(eval_radial_basis(basis, radial, azimuthal).sum(axis=0), 1.0)

    def test_lipschitz_at_jittered_points(self, basis):
        rng = np.random.default_rng(7)
        p = rng.uniform(-1.2, 1.2, (4000, 2))
        q = p + rng.uniform(-0.05, 0.05, (4000, 2))

        def values(points):
            return eval_radial_basis(basis, np.hypot(points[:, 0], points[:, 1]),
                                     np.arctan2(points[:, 1], points[:, 0]))

        # radial hats have slope 1 / dr; ring hats are bounded by r / dr near the center
        bound = (1.0 + 1.0 / basis.azimuth_spacing) / basis.ring_spacing
        change = np.abs(values(p) - values(q)).max(axis=0)
        assert np.all(change <= bound * np.linalg.norm(p - q, axis=1) + 1e-12)

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            RadialAnisotropicBasis(r_cutoff=0.0)
        with pytest.raises(ValueError):
            RadialAnisotropicBasis(r_cutoff=1.0, n_azimuth=0)

    def test_to_dict_and_from_dict(self):
        basis = RadialAnisotropicBasis(r_cutoff=0.2, n_rings=2, n_azimuth=6, normalize=True)
        restored = basis_from_dict(basis.to_dict())
        assert restored == basis


class TestDefaultBases:
    """Tests for the preset layouts."""

    def test_planar(self):
        basis = default_planar_basis()
        assert basis.size == 5
        assert basis.r_cutoff == pytest.approx(0.007)

    def test_sphere(self):
        assert default_sphere_basis().r_cutoff == pytest.approx(0.1 * np.pi)

    def test_torus_scales_with_extent(self):
        assert torus_basis().r_cutoff == pytest.approx(0.05 * np.pi)
        assert torus_basis(1.0).r_cutoff == pytest.approx(0.025)
