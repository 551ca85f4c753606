"""Tests for DISCO assembly, application and adjoints."""

from dataclasses import replace

import numpy as np
import pytest

from src.controllers import disco
from src.controllers.basis import default_sphere_basis
from src.controllers.disco import (
    apply_circulant,
    assemble,
    assemble_planar,
    assemble_spherical,
    assemble_unstructured,
    circulant_taps_from_basis,
    dense_equivalent,
    disco_apply,
    disco_apply_vjp,
    disco_forward,
    disco_vjp,
)
from src.controllers.geometry import (
    make_equiangular_sphere_grid,
    make_regular_grid,
    make_unstructured_grid,
    translate_field,
)
from src.models.basis import HatBasis1D, RadialAnisotropicBasis
from src.models.field import Field
from src.models.kernels import DiscoParams
from src.utils.errors import (
    AssemblyDegenerateError,
    InvalidArgumentError,
    NotEquivariantError,
    UnsupportedTopologyError,
)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def torus():
    return make_regular_grid((8, 8), (1.0, 1.0), periodic=True)


@pytest.fixture
def torus_kernel(torus):
    return assemble_planar(torus, torus, RadialAnisotropicBasis(r_cutoff=0.3))


class TestPlanarAssembly:
    """Tests for planar and toroidal assembly."""

    @pytest.mark.parametrize("m", [4, 8, 16])
    def test_hat_basis_gives_shift_matrices(self, m):
        grid = make_regular_grid((m,), (1.0,), periodic=True)
        basis = HatBasis1D.equidistant(3, 1.0 / m, 0.0)
        kernel = assemble_planar(grid, grid, basis)
        for ell in range(3):
            expected = np.roll(np.eye(m), ell, axis=1)
            assert np.array_equal(kernel.matrix(ell).toarray(), expected)

    def test_every_row_has_entries(self, torus_kernel):
        assert np.all(torus_kernel.row_counts() > 0)
        assert torus_kernel.size == 5
        assert torus_kernel.geometry == "torus"

    def test_support_is_strict(self):
        grid = make_regular_grid((5,), (1.0,), periodic=False)
        kernel = assemble_planar(grid, grid, HatBasis1D(collocation=(0.0,), lower=-0.25, upper=0.25))
        # neighbours at distance h = 0.25 sit exactly on the support boundary
        assert kernel.row_counts().tolist() == [1, 1, 1, 1, 1]

    def test_empty_row_raises(self):
        grid = make_regular_grid((8,), (1.0,), periodic=False)
        basis = HatBasis1D(collocation=(5.0,), lower=4.0, upper=6.0)
        with pytest.raises(AssemblyDegenerateError):
            assemble_planar(grid, grid, basis)

    def test_rejects_large_cutoff_on_torus(self, torus):
        with pytest.raises(InvalidArgumentError):
            assemble_planar(torus, torus, RadialAnisotropicBasis(r_cutoff=0.5))

    def test_rejects_sphere_grids(self):
        sphere = make_equiangular_sphere_grid(4, 8)
        with pytest.raises(UnsupportedTopologyError):
            assemble_planar(sphere, sphere, RadialAnisotropicBasis(r_cutoff=0.3))

    def test_normalize_gives_unit_mass(self, torus):
        basis = RadialAnisotropicBasis(r_cutoff=0.3, normalize=True)
        kernel = assemble_planar(torus, torus, basis)
        for ell in range(kernel.size):
            mass = kernel.matrix(ell) @ torus.quad_weights
            assert np.allclose(mass, 1.0)
        assert kernel.normalized

    def test_fold_quadrature(self, torus, torus_kernel):
        folded = assemble_planar(torus, torus, RadialAnisotropicBasis(r_cutoff=0.3), fold_quadrature=True)
        assert np.allclose(folded.values, torus_kernel.values * torus.quad_weights[torus_kernel.indices])
        v = np.random.default_rng(0).standard_normal((2, 3, torus.size))
        theta = np.random.default_rng(1).standard_normal((4, 3, 5))
        assert np.allclose(disco_apply(folded, theta, v), disco_apply(torus_kernel, theta, v), atol=1e-12)

    def test_tree_search_matches_brute_force(self, torus, torus_kernel, monkeypatch):
        monkeypatch.setattr(disco, "BRUTE_FORCE_LIMIT", 4)
        tree_kernel = assemble_planar(torus, torus, RadialAnisotropicBasis(r_cutoff=0.3))
        assert np.array_equal(tree_kernel.indptr, torus_kernel.indptr)
        assert np.array_equal(tree_kernel.indices, torus_kernel.indices)
        assert np.allclose(tree_kernel.values, torus_kernel.values, atol=1e-14)

    def test_tree_search_on_bounded_grid(self, monkeypatch):
        grid = make_regular_grid((9, 9), (1.0, 1.0), periodic=False)
        basis = RadialAnisotropicBasis(r_cutoff=0.3)
        brute = assemble_planar(grid, grid, basis)
        monkeypatch.setattr(disco, "BRUTE_FORCE_LIMIT", 4)
        tree = assemble_planar(grid, grid, basis)
        assert np.array_equal(tree.indices, brute.indices)
        assert np.allclose(tree.values, brute.values)

    def test_unstructured_cloud(self, rng):
        points = rng.uniform(0.0, 1.0, (60, 2))
        cloud = make_unstructured_grid(points, np.full(60, 1.0 / 60))
        kernel = assemble_unstructured(cloud, cloud, RadialAnisotropicBasis(r_cutoff=0.4))
        assert kernel.geometry == "unstructured"
        dense = kernel.matrix(0).toarray()
        distance = np.linalg.norm(points[None, :, :] - points[:, None, :], axis=-1)
        assert np.all(dense[distance >= 0.4] == 0.0)
        assert np.allclose(np.diag(dense), 1.0)


class TestSphericalAssembly:
    """Tests for assembly on the equiangular sphere grid."""

    @pytest.fixture
    def sphere(self):
        return make_equiangular_sphere_grid(6, 12)

    def test_rows_on_a_latitude_are_cyclic_shifts(self, sphere):
        kernel = assemble_spherical(sphere, sphere, RadialAnisotropicBasis(r_cutoff=0.3 * np.pi))
        for ell in range(kernel.size):
            dense = kernel.matrix(ell).toarray().reshape(6, 12, 6, 12)
            for lat in range(6):
                shifted = np.roll(dense[lat, 0], 1, axis=1)
                assert np.allclose(dense[lat, 1], shifted, atol=1e-12)

    def test_dispatch(self, sphere):
        kernel = assemble(sphere, sphere, default_sphere_basis())
        assert kernel.geometry == "sphere"

    def test_band_search_matches_brute_force(self, sphere, monkeypatch):
        basis = RadialAnisotropicBasis(r_cutoff=0.3 * np.pi)
        brute = assemble_spherical(sphere, sphere, basis)
        monkeypatch.setattr(disco, "BRUTE_FORCE_LIMIT", 4)
        band = assemble_spherical(sphere, sphere, basis)
        assert np.array_equal(band.indices, brute.indices)
        assert np.allclose(band.values, brute.values)

    def test_rejects_planar_grids(self, torus):
        with pytest.raises(UnsupportedTopologyError):
            assemble_spherical(torus, torus, RadialAnisotropicBasis(r_cutoff=0.3))

    def test_rejects_cutoff_beyond_pi(self, sphere):
        with pytest.raises(InvalidArgumentError):
            assemble_spherical(sphere, sphere, RadialAnisotropicBasis(r_cutoff=4.0))


class TestDiscoApply:
    """Tests for the forward map and its adjoints."""

    def test_linear_in_theta_and_input(self, torus_kernel, rng):
        v = rng.standard_normal((2, 3, 64))
        theta = rng.standard_normal((2, 3, 5))
        out = disco_apply(torus_kernel, theta, v)
        assert out.shape == (2, 2, 64)
        assert np.allclose(disco_apply(torus_kernel, 2.0 * theta, v), 2.0 * out)
        assert np.allclose(disco_apply(torus_kernel, theta, v + v), 2.0 * out)

    def test_normalized_kernel_preserves_constants(self, torus):
        kernel = assemble_planar(torus, torus, RadialAnisotropicBasis(r_cutoff=0.3, normalize=True))
        theta = np.arange(10, dtype=float).reshape(1, 2, 5)
        out = disco_apply(kernel, theta, np.ones((1, 2, 64)))
        assert np.allclose(out, theta.sum())

    def test_adjoint_identity(self, torus_kernel, rng):
        v = rng.standard_normal((2, 3, 64))
        theta = rng.standard_normal((4, 3, 5))
        g = rng.standard_normal((2, 4, 64))
        grad_theta, grad_v = disco_apply_vjp(torus_kernel, theta, v, g)
        out = disco_apply(torus_kernel, theta, v)
        assert np.sum(g * out) == pytest.approx(np.sum(grad_v * v), rel=1e-12)
        assert np.sum(g * out) == pytest.approx(np.sum(grad_theta * theta), rel=1e-12)

    def test_field_wrappers(self, torus, torus_kernel, rng):
        field = Field(values=rng.standard_normal((1, 2, 64)), grid=torus)
        params = DiscoParams(rng.standard_normal((3, 2, 5)))
        out = disco_forward(torus_kernel, params, field)
        assert out.grid is torus_kernel.grid_out
        grad_params, grad_field = disco_vjp(torus_kernel, params, field, out)
        assert grad_params.theta.shape == params.theta.shape
        assert grad_field.values.shape == field.values.shape

    def test_rejects_mismatched_channels(self, torus_kernel, rng):
        with pytest.raises(InvalidArgumentError):
            disco_apply(torus_kernel, rng.standard_normal((2, 4, 5)), rng.standard_normal((1, 3, 64)))

    def test_translation_equivariance(self, torus, torus_kernel, rng):
        field = Field(values=rng.standard_normal((1, 2, 64)), grid=torus)
        params = DiscoParams(rng.standard_normal((2, 2, 5)))
        base = disco_forward(torus_kernel, params, field)
        for shift in [(1, 0), (3, 5), (7, 7)]:
            lhs = disco_forward(torus_kernel, params, translate_field(field, shift)).values
            assert np.allclose(lhs, translate_field(base, shift).values, atol=1e-12)


class TestDenseEquivalence:
    """Tests for the circulant equivalent on periodic grids."""

    def test_taps_match_basis_samples(self, torus, torus_kernel, rng):
        theta = rng.standard_normal((2, 3, 5))
        taps = dense_equivalent(torus_kernel, DiscoParams(theta))
        expected = circulant_taps_from_basis(RadialAnisotropicBasis(r_cutoff=0.3), torus, theta)
        assert taps.shape == (2, 3, 8, 8)
        assert np.allclose(taps, expected, atol=1e-12)

    def test_circulant_oracle_matches_sparse_forward(self, torus, torus_kernel, rng):
        theta = rng.standard_normal((2, 3, 5))
        field = Field(values=rng.standard_normal((2, 3, 64)), grid=torus)
        taps = dense_equivalent(torus_kernel, DiscoParams(theta))
        sparse = disco_forward(torus_kernel, DiscoParams(theta), field).values
        assert np.allclose(apply_circulant(taps, field).values, sparse, atol=1e-12)

    def test_non_translation_invariant_kernel(self, torus_kernel, rng):
        values = torus_kernel.values.copy()
        values[:, torus_kernel.indptr[5]] += 1.0
        broken = replace(torus_kernel, values=values)
        with pytest.raises(NotEquivariantError):
            dense_equivalent(broken, DiscoParams(np.ones((1, 1, 5))))

    def test_needs_periodic_grid(self, rng):
        grid = make_regular_grid((8, 8), (1.0, 1.0), periodic=False)
        kernel = assemble_planar(grid, grid, RadialAnisotropicBasis(r_cutoff=0.3))
        with pytest.raises(UnsupportedTopologyError):
            dense_equivalent(kernel, DiscoParams(rng.standard_normal((1, 1, 5))))
