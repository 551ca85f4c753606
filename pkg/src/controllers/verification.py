"""Verification suites: convergence, collapse, equivalence, equivariance,
gradients, irregular stencils and resolution transfer.

Every suite returns a SuiteResult with measured rows and PASS/FAIL checks.
"""

import logging
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from ..models.basis import HatBasis1D, RadialAnisotropicBasis
from ..models.config import ModelConfig
from ..models.dataset import ParabolaSpec
from ..models.field import Field
from ..models.kernels import DifferentialKernel, DirectionalSignature, DiscoParams, PaddingMode
from ..models.metrics import SuiteResult
from ..utils.constants import EXACT_TOL, FD_MAX_ENTRIES, GRADCHECK_TOL, SPECTRAL_TOL, STENCIL_TOL
from .basis import default_sphere_basis
from .data import gen_bandlimited
from .differential import collapse_limit, correlate_valid, effective_taps, extract_direction
from .disco import (
    apply_circulant,
    assemble_planar,
    assemble_spherical,
    circulant_taps_from_basis,
    dense_equivalent,
    disco_apply,
    disco_forward,
)
from .geometry import make_equiangular_sphere_grid, make_regular_grid, rotate_longitude, translate_field
from .gradcheck import (
    differential_operation,
    disco_operation,
    grad_check,
    linear_operation,
    model_operation,
    spectral_operation,
)
from .model import LocalNOModel, model_apply_at_resolution
from .spectral import init_spectral_weights, spectral_conv_forward
from .stencil import (
    build_neighborhoods,
    irregular_diff_forward,
    jittered_lattice,
    solve_irregular_stencil,
    stencil_residual,
)

_logger = logging.getLogger(__name__)

CONVERGENCE_RESOLUTIONS = (32, 64, 128, 256, 512, 1024, 2048, 4096)
COLLAPSE_RESOLUTIONS = (32, 64, 128, 256, 512, 1024)
PARABOLA_SCALES = (1.0, 2.0, 4.0, 16.0)


def _within(value: float, low: float, high: float) -> bool:
    return bool(np.isfinite(value) and low <= value <= high)


# Differential convergence

def parabola_interior_error(
    raw: DifferentialKernel, spec: ParabolaSpec, n: int, band_rows: int = 128
) -> float:
    """L2 error of the differential layer on interior points of an n x n unit grid.

    Rows are processed in bands with valid correlation, so the full image is
    never held in memory.
    """
    h = 1.0 / (n - 1)
    axis = np.linspace(0.0, 1.0, n)
    effective = effective_taps(raw.taps, h)
    signature = extract_direction(raw, h)
    coefficients = spec.scaled
    # limit 2 sum_j c_j (x b_j0 + y b_j1) for every output channel
    bx = 2.0 * np.einsum("j,oj->o", coefficients, signature.b[:, :, 0])
    by = 2.0 * np.einsum("j,oj->o", coefficients, signature.b[:, :, 1])
    y_inner = axis[1:-1]
    total = 0.0
    for r0 in range(1, n - 1, band_rows):
        r1 = min(r0 + band_rows, n - 1)
        xs = axis[r0 - 1:r1 + 1]
        radius_sq = xs[:, None] ** 2 + axis[None, :] ** 2
        image = coefficients[None, :, None, None] * radius_sq[None, None]
        out = correlate_valid(image, effective)[0]
        x_inner = axis[r0:r1]
        target = bx[:, None, None] * x_inner[None, :, None] + by[:, None, None] * y_inner[None, None, :]
        total += float(np.sum((out - target) ** 2))
    return float(np.sqrt(total * h * h))


def diff_convergence(
    resolutions: Sequence[int] = CONVERGENCE_RESOLUTIONS,
    scales: Sequence[float] = PARABOLA_SCALES,
    channels: int = 10,
    seed: int = 0,
) -> SuiteResult:
    rng = np.random.default_rng(seed)
    raw = DifferentialKernel(taps=rng.standard_normal((1, channels, 3, 3)))
    base = ParabolaSpec.random(channels, 1.0, seed)
    result = SuiteResult("diff-convergence", ["scale", "resolution", "h", "l2_error"])
    errors: Dict[float, list] = {}
    for scale in scales:
        spec = ParabolaSpec(coefficients=base.coefficients, scale=scale)
        errors[scale] = []
        for n in resolutions:
            error = parabola_interior_error(raw, spec, n)
            errors[scale].append(error)
            result.rows.append([scale, n, 1.0 / (n - 1), error])
            _logger.info("diff-convergence scale %g n %d error %.6e", scale, n, error)

    for scale, values in errors.items():
        decreasing = all(b < a for a, b in zip(values, values[1:]))
        result.check(f"decreasing[scale={scale:g}]", decreasing, " > ".join(f"{v:.3e}" for v in values))
        pairs = list(zip(values, values[1:]))[-3:]
        for index, (coarse, fine) in enumerate(pairs):
            ratio = coarse / fine
            result.check(f"ratio[scale={scale:g},pair={index}]", _within(ratio, 1.8, 2.2), f"{ratio:.4f}")
    reference = min(scales)
    for position, n in enumerate(resolutions):
        for scale in scales:
            if scale == reference:
                continue
            relative = errors[scale][position] / errors[reference][position] / (scale / reference)
            result.check(f"scale-proportional[n={n},scale={scale:g}]", _within(relative, 0.8, 1.2), f"{relative:.4f}")
    return result


# Pointwise collapse

def _collapse_test_function(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.sin(x + 2.0 * y) + 0.5 * x * x


def collapse(resolutions: Sequence[int] = COLLAPSE_RESOLUTIONS) -> SuiteResult:
    """Unconstrained, unscaled taps converge to the tap sum times v."""
    taps = (np.arange(1, 10, dtype=np.float64) / 10.0).reshape(1, 1, 3, 3)
    limit = collapse_limit(taps)[0, 0]
    result = SuiteResult("collapse", ["resolution", "h", "max_error"])
    errors = []
    for n in resolutions:
        axis = np.linspace(0.0, 1.0, n)
        x, y = np.meshgrid(axis, axis, indexing="ij")
        v = _collapse_test_function(x, y)
        out = correlate_valid(v[None, None], taps)[0, 0]
        error = float(np.max(np.abs(out - limit * v[1:-1, 1:-1])))
        errors.append(error)
        result.rows.append([n, 1.0 / (n - 1), error])
    for (n, coarse), fine in zip(zip(resolutions, errors), errors[1:]):
        ratio = coarse / fine
        result.check(f"halving[n={n}]", _within(ratio, 2.0 * 0.85, 2.0 * 1.15), f"{ratio:.4f}")
    return result


# DISCO and standard convolutions

def disco_equivalence(sizes: Sequence[int] = (4, 8, 16), seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    result = SuiteResult("disco-equivalence", ["m", "quantity", "value"])
    for m in sizes:
        grid = make_regular_grid((m,), (1.0,), periodic=True)
        h = grid.widths[0]
        basis = HatBasis1D.equidistant(min(3, m - 1), h, 0.0)
        kernel = assemble_planar(grid, grid, basis)

        circulant = True
        for ell in range(kernel.size):
            expected = np.roll(np.eye(m), ell, axis=1)
            circulant &= bool(np.array_equal(kernel.matrix(ell).toarray(), expected))
        result.rows.append([m, "circulant", int(circulant)])
        result.check(f"circulant-shifts[m={m}]", circulant)

        theta = rng.standard_normal((2, 2, kernel.size))
        field = Field(values=rng.standard_normal((3, 2, m)), grid=grid)
        sparse = disco_forward(kernel, DiscoParams(theta), field).values
        oracle_taps = circulant_taps_from_basis(basis, grid, theta)
        dense = apply_circulant(oracle_taps, field).values
        diff = float(np.max(np.abs(sparse - dense)))
        result.rows.append([m, "sparse_vs_dense", diff])
        result.check(f"sparse-equals-dense[m={m}]", diff <= EXACT_TOL, f"{diff:.3e}")

        taps = dense_equivalent(kernel, DiscoParams(theta))
        tap_diff = float(np.max(np.abs(taps - oracle_taps)))
        result.rows.append([m, "taps_vs_basis", tap_diff])
        result.check(f"taps-match-basis[m={m}]", tap_diff <= EXACT_TOL, f"{tap_diff:.3e}")
    return result


# Equivariance

def equivariance(n: int = 16, nlat: int = 16, nlon: int = 32, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    result = SuiteResult("equivariance", ["layer", "shifts", "max_abs_diff"])

    extent = 2.0 * np.pi
    torus = make_regular_grid((n, n), (extent, extent), periodic=True)
    basis = RadialAnisotropicBasis(r_cutoff=2.5 * torus.widths[0])
    kernel = assemble_planar(torus, torus, basis)
    params = DiscoParams(rng.standard_normal((2, 2, basis.size)))
    field = Field(values=rng.standard_normal((2, 2, torus.size)), grid=torus)
    base = disco_forward(kernel, params, field)

    weights = init_spectral_weights(2, 2, (n // 2, n // 4 + 1), rng)
    spectral_base = spectral_conv_forward(weights, field)

    disco_worst, spectral_worst = 0.0, 0.0
    shifts = [(a, b) for a in range(n) for b in range(n)]
    for shift in shifts:
        moved = translate_field(field, shift)
        lhs = disco_forward(kernel, params, moved).values
        rhs = translate_field(base, shift).values
        disco_worst = max(disco_worst, float(np.max(np.abs(lhs - rhs))))
        lhs = spectral_conv_forward(weights, moved).values
        rhs = translate_field(spectral_base, shift).values
        spectral_worst = max(spectral_worst, float(np.max(np.abs(lhs - rhs))))
    result.rows.append(["disco-torus", len(shifts), disco_worst])
    result.rows.append(["spectral-torus", len(shifts), spectral_worst])
    result.check("disco-torus-translation", disco_worst <= EXACT_TOL, f"{disco_worst:.3e}")
    result.check("spectral-torus-translation", spectral_worst <= SPECTRAL_TOL, f"{spectral_worst:.3e}")

    sphere = make_equiangular_sphere_grid(nlat, nlon)
    sphere_kernel = assemble_spherical(sphere, sphere, default_sphere_basis())
    sphere_params = DiscoParams(rng.standard_normal((2, 2, sphere_kernel.size)))
    sphere_field = Field(values=rng.standard_normal((2, 2, sphere.size)), grid=sphere)
    sphere_base = disco_forward(sphere_kernel, sphere_params, sphere_field)
    sphere_worst = 0.0
    for step in range(1, nlon):
        lhs = disco_forward(sphere_kernel, sphere_params, rotate_longitude(sphere_field, step)).values
        rhs = rotate_longitude(sphere_base, step).values
        sphere_worst = max(sphere_worst, float(np.max(np.abs(lhs - rhs))))
    result.rows.append(["disco-sphere", nlon - 1, sphere_worst])
    result.check("disco-sphere-longitude", sphere_worst <= EXACT_TOL, f"{sphere_worst:.3e}")
    return result


# Gradients

def gradcheck(
    seed: int = 0, tolerance: float = GRADCHECK_TOL, max_entries: Optional[int] = FD_MAX_ENTRIES
) -> SuiteResult:
    """Finite differences against every adjoint; ``max_entries=None`` perturbs every entry."""
    rng = np.random.default_rng(seed)
    result = SuiteResult("gradcheck", ["layer", "max_rel_error", "checked"])
    bounded = make_regular_grid((8, 8), (1.0, 1.0), periodic=False)
    torus = make_regular_grid((8, 8), (1.0, 1.0), periodic=True)
    line = make_regular_grid((8,), (1.0,), periodic=True)
    sphere = make_equiangular_sphere_grid(8, 16)

    cases = [
        (
            differential_operation(bounded, PaddingMode.REFLECTIVE),
            {"taps": rng.standard_normal((3, 2, 3, 3))},
            rng.standard_normal((2, 2, bounded.size)),
        ),
        (
            disco_operation(assemble_planar(torus, torus, RadialAnisotropicBasis(0.3)), "disco-planar"),
            {"theta": rng.standard_normal((3, 2, 5))},
            rng.standard_normal((2, 2, torus.size)),
        ),
        (
            disco_operation(assemble_planar(line, line, HatBasis1D.equidistant(3, line.widths[0])), "disco-1d"),
            {"theta": rng.standard_normal((2, 2, 3))},
            rng.standard_normal((2, 2, line.size)),
        ),
        (
            disco_operation(
                assemble_spherical(sphere, sphere, RadialAnisotropicBasis(0.3 * np.pi)), "disco-spherical"
            ),
            {"theta": rng.standard_normal((2, 2, 5))},
            rng.standard_normal((2, 2, sphere.size)),
        ),
        (
            spectral_operation(torus),
            {"weights": init_spectral_weights(2, 3, (4, 3), rng).weights},
            rng.standard_normal((2, 2, torus.size)),
        ),
        (
            linear_operation(),
            {"weight": rng.standard_normal((3, 2)), "bias": rng.standard_normal(3)},
            rng.standard_normal((2, 2, bounded.size)),
        ),
    ]
    config = ModelConfig(
        width=4, blocks=2, modes=(4, 3), spectral=True, differential=True,
        local_integral=True, pointwise=True, basis_r_cutoff=0.3,
    )
    model = LocalNOModel.init(config, seed=seed)
    cases.append((model_operation(config, bounded), model.copy_params(), rng.standard_normal((2, 1, bounded.size))))

    for operation, params, x in cases:
        report = grad_check(operation, params, x, tolerance=tolerance, max_entries=max_entries, seed=seed)
        result.rows.append([report.name, report.max_rel_error, report.checked])
        coverage = "all entries" if max_entries is None else f"up to {max_entries} sampled entries per array"
        result.check(
            f"gradient[{report.name}]", report.passed,
            f"{report.max_rel_error:.3e} over {report.checked} entries ({coverage})",
        )
    return result


# Irregular stencils

def irregular_stencil(
    count: int = 200, sizes: Sequence[int] = (32, 64), seed: int = 0, radius: float = 0.05
) -> SuiteResult:
    rng = np.random.default_rng(seed)
    result = SuiteResult("irregular-stencil", ["quantity", "index", "value"])
    worst_residual, worst_affine = 0.0, 0.0
    for index in range(count):
        center = rng.uniform(0.0, 1.0, 2)
        k = int(rng.integers(4, 13))
        angles = rng.uniform(0.0, 2.0 * np.pi, k)
        radii = radius * np.sqrt(rng.uniform(0.0, 1.0, k))
        neighbors = center + np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=-1)
        target_c = float(rng.standard_normal())
        target_b = rng.standard_normal(2)
        weights = solve_irregular_stencil(center, neighbors, target_c, target_b, point=index)
        residual = stencil_residual(center, neighbors, weights, target_c, target_b)

        alpha, beta = float(rng.standard_normal()), rng.standard_normal(2)
        applied = float(weights @ (alpha + neighbors @ beta))
        expected = target_c * (alpha + center @ beta) + beta @ target_b
        affine = abs(applied - expected) / max(abs(expected), 1.0)
        worst_residual = max(worst_residual, residual)
        worst_affine = max(worst_affine, affine)
    result.rows.append(["max_constraint_residual", count, worst_residual])
    result.rows.append(["max_affine_error", count, worst_affine])
    result.check("constraint-residual", worst_residual <= STENCIL_TOL, f"{worst_residual:.3e}")
    result.check("affine-exactness", worst_affine <= STENCIL_TOL, f"{worst_affine:.3e}")

    signature = DirectionalSignature(b=np.array([[[1.0, 0.5]]]), c=np.array([[0.0]]))
    errors = []
    for n in sizes:
        grid = jittered_lattice(n, 0.15, seed)
        neighborhoods = build_neighborhoods(grid, 1.8 / n)
        points = grid.points
        field = Field(values=np.sum(points * points, axis=1)[None, None, :], grid=grid)
        out = irregular_diff_forward(grid, neighborhoods, signature, field).values[0, 0]
        target = 2.0 * points @ signature.b[0, 0]
        error = float(np.max(np.abs(out - target)))
        errors.append(error)
        result.rows.append(["max_error", n, error])
    for (n, coarse), fine in zip(zip(sizes, errors), errors[1:]):
        ratio = coarse / fine
        result.check(f"convergence-order[n={n}]", _within(ratio, 1.7, 2.3), f"{ratio:.4f}")
    return result


# Resolution transfer

def resolution(seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    result = SuiteResult("resolution", ["quantity", "resolution", "value"])

    config = ModelConfig(
        width=4, blocks=2, modes=(4, 3), spectral=True, pointwise=True,
        activation="identity", positional_encoding=False,
    )
    model = LocalNOModel.init(config, seed=seed)
    coarse = make_regular_grid((16, 16), (1.0, 1.0), periodic=True)
    fine = make_regular_grid((32, 32), (1.0, 1.0), periodic=True)
    v_coarse, _ = gen_bandlimited(coarse, seed)
    v_fine, _ = gen_bandlimited(fine, seed)
    out_coarse = model.forward(Field(values=v_coarse[None, None], grid=coarse)).as_image()
    out_fine = model_apply_at_resolution(model, Field(values=v_fine[None, None], grid=fine)).as_image()
    spectral_diff = float(np.max(np.abs(out_fine[..., ::2, ::2] - out_coarse)))
    result.rows.append(["spectral_model_shared_points", 32, spectral_diff])
    result.check("spectral-model-transfer", spectral_diff <= 1e-8, f"{spectral_diff:.3e}")

    repeat = model_apply_at_resolution(model, Field(values=v_coarse[None, None], grid=coarse)).as_image()
    result.check("same-resolution-bitwise", bool(np.array_equal(repeat, out_coarse)))

    # grid-aligned hat kinks leave a clean second-order trapezoidal error
    basis = HatBasis1D.equidistant(3, 1.0 / 16.0, 0.0)
    theta = rng.standard_normal((1, 1, basis.size))
    sizes = (32, 64, 128, 256)
    outputs = []
    for n in sizes:
        grid = make_regular_grid((n,), (1.0,), periodic=True)
        x = grid.points[:, 0]
        v = np.sin(2.0 * np.pi * x) + 0.5 * np.cos(6.0 * np.pi * x)
        kernel = assemble_planar(grid, grid, basis)
        out = disco_apply(kernel, theta, v[None, None])[0, 0]
        outputs.append(out[:: n // sizes[0]])
    differences = [float(np.max(np.abs(a - b))) for a, b in zip(outputs, outputs[1:])]
    for n, d in zip(sizes[1:], differences):
        result.rows.append(["disco_refinement_difference", n, d])
    for (n, coarse_d), fine_d in zip(zip(sizes[1:], differences), differences[1:]):
        ratio = coarse_d / fine_d
        result.check(f"disco-second-order[n={n}]", _within(ratio, 3.5, 4.5), f"{ratio:.4f}")
    return result


SUITES: Dict[str, Callable[..., SuiteResult]] = {
    "diff-convergence": diff_convergence,
    "collapse": collapse,
    "disco-equivalence": disco_equivalence,
    "equivariance": equivariance,
    "gradcheck": gradcheck,
    "irregular-stencil": irregular_stencil,
    "resolution": resolution,
}


def run_suite(name: str, **options) -> SuiteResult:
    """Run a registered suite; ``options`` are passed to the suite function."""
    return SUITES[name](**options)
