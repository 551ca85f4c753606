"""Synthetic datasets with analytic ground truth.

Darcy: u is a random combination of Dirichlet Laplace eigenfunctions on
(0,1)^2 and f = -div(a grad u) with a(x) = [[x^2, sin(xy)], [x + y, y]],
evaluated in closed form. Parabola: v = |x|^2 (c_1, ..., c_n) with targets
2 sum_j c_j x . b_j. Bandlimited: random trigonometric polynomials on a
periodic box with their Laplacian.
"""

import logging
from typing import Callable, List, Sequence, Tuple

import numpy as np

from ..models.dataset import DarcySample, Dataset, ParabolaSpec
from ..models.field import Field
from ..models.grid import Grid, Topology
from ..models.kernels import DirectionalSignature
from ..utils.constants import DARCY_MODES, GENERATOR_VERSION, TEST_SEED_OFFSET
from ..utils.errors import InvalidArgumentError
from ..utils.parallel import ordered_map
from .geometry import make_regular_grid

_logger = logging.getLogger(__name__)

BANDLIMIT = 3


# Darcy

def darcy_coefficients(seed: int, modes: int = DARCY_MODES) -> np.ndarray:
    """c_ij ~ N(0, 1/(i + j)) drawn row-major from a PCG64 generator."""
    rng = np.random.default_rng(seed)
    i, j = np.meshgrid(np.arange(1, modes + 1), np.arange(1, modes + 1), indexing="ij")
    return rng.normal(0.0, 1.0, (modes, modes)) * np.sqrt(1.0 / (i + j))


def _amplitudes(coefficients: np.ndarray) -> np.ndarray:
    modes = coefficients.shape[0]
    i, j = np.meshgrid(np.arange(1, modes + 1), np.arange(1, modes + 1), indexing="ij")
    return coefficients / np.sqrt(np.pi ** 2 * (i ** 2 + j ** 2))


def _flux_divergence(x, y, u_x, u_y, u_xx, u_xy, u_yy):
    """-div(a grad u) from the partials of u."""
    return -(
        2.0 * x * u_x + x * x * u_xx
        + y * np.cos(x * y) * u_y + np.sin(x * y) * u_xy
        + u_x + (x + y) * u_xy
        + u_y + y * u_yy
    )


def darcy_at_points(coefficients: np.ndarray, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(u, f) at arbitrary points of (0,1)^2."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    a = _amplitudes(coefficients)
    k = np.pi * np.arange(1, a.shape[0] + 1)
    sx, cx = np.sin(np.multiply.outer(k, x)), np.cos(np.multiply.outer(k, x))
    sy, cy = np.sin(np.multiply.outer(k, y)), np.cos(np.multiply.outer(k, y))
    kk = k.reshape((-1,) + (1,) * x.ndim)

    def combine(fx, fy):
        return np.einsum("ij,i...,j...->...", a, fx, fy)

    u = combine(sx, sy)
    f = _flux_divergence(
        x, y,
        combine(kk * cx, sy), combine(sx, kk * cy),
        -combine(kk ** 2 * sx, sy), combine(kk * cx, kk * cy), -combine(sx, kk ** 2 * sy),
    )
    return u, f


def _check_darcy_grid(grid: Grid):
    if grid.topology != Topology.BOUNDED_BOX or grid.dim != 2:
        raise InvalidArgumentError(f"Darcy samples need a bounded 2-D box, got {grid}")
    if not np.allclose(grid.extent, (1.0, 1.0)):
        raise InvalidArgumentError(f"Darcy samples live on (0,1)^2, got extent {grid.extent}")


def _grid_axes(grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    points = grid.points.reshape(tuple(grid.shape) + (2,))
    return points[:, 0, 0], points[0, :, 1]


def darcy_on_grid(coefficients: np.ndarray, grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    """(u, f) sampled on a regular grid through separable matrix products."""
    a = _amplitudes(coefficients)
    k = np.pi * np.arange(1, a.shape[0] + 1)
    xs, ys = _grid_axes(grid)
    sx, cx = np.sin(np.outer(k, xs)), np.cos(np.outer(k, xs))
    sy, cy = np.sin(np.outer(k, ys)), np.cos(np.outer(k, ys))
    kc = k[:, None]

    def combine(fx, fy):
        return fx.T @ a @ fy

    x, y = np.meshgrid(xs, ys, indexing="ij")
    u = combine(sx, sy)
    f = _flux_divergence(
        x, y,
        combine(kc * cx, sy), combine(sx, kc * cy),
        -combine(kc ** 2 * sx, sy), combine(kc * cx, kc * cy), -combine(sx, kc ** 2 * sy),
    )
    return u.ravel(), f.ravel()


def gen_darcy(grid: Grid, seed: int) -> DarcySample:
    """One seeded Darcy sample on a regular grid of (0,1)^2."""
    _check_darcy_grid(grid)
    u, f = darcy_on_grid(darcy_coefficients(seed), grid)
    return DarcySample(u=u, f=f, grid=grid, seed=seed)


def split_seeds(seed: int, count: int, split: str) -> List[int]:
    """Disjoint seed ranges: train from ``seed``, test from ``seed + TEST_SEED_OFFSET``."""
    if split not in ("train", "test"):
        raise InvalidArgumentError(f"unknown split: {split}")
    base = seed + (TEST_SEED_OFFSET if split == "test" else 0)
    return [base + k for k in range(count)]


def generate_darcy(grid: Grid, count: int, seed: int, split: str = "train") -> Dataset:
    _check_darcy_grid(grid)
    seeds = split_seeds(seed, count, split)
    samples = ordered_map(lambda s: gen_darcy(grid, s), seeds)
    return _darcy_dataset(samples, grid, seed, seeds, split)


def _darcy_dataset(samples: Sequence[DarcySample], grid: Grid, seed: int, seeds: List[int], split: str) -> Dataset:
    inputs = np.stack([s.u for s in samples])[:, None, :] if samples else np.zeros((0, 1, grid.size))
    targets = np.stack([s.f for s in samples])[:, None, :] if samples else np.zeros((0, 1, grid.size))
    return Dataset(
        task="darcy",
        inputs=inputs,
        targets=targets,
        grid=grid,
        seed=seed,
        sample_seeds=list(seeds),
        input_names=["u"],
        target_names=["f"],
        extra={"generator": GENERATOR_VERSION, "split": split},
    )


# Parabola

def gen_parabola(grid: Grid, spec: ParabolaSpec) -> Tuple[Field, Callable[[DirectionalSignature], Field]]:
    """Sampled parabola channels and the exact directional-derivative target."""
    points = grid.points
    coefficients = spec.scaled
    radius_sq = np.sum(points * points, axis=1)
    values = coefficients[None, :, None] * radius_sq[None, None, :]

    def target(signature: DirectionalSignature) -> Field:
        if signature.b.shape[1] != spec.channels or signature.b.shape[2] != grid.dim:
            raise InvalidArgumentError(
                f"signature shape {signature.b.shape} does not match {spec.channels} channels"
            )
        # grad v_j = 2 c_j x, so the limit is sum_j 2 c_j (x . b_oj)
        projected = np.einsum("md,ojd->ojm", points, signature.b)
        out = 2.0 * np.einsum("j,ojm->om", coefficients, projected)
        return Field(values=out[None], grid=grid)

    return Field(values=values, grid=grid), target


def generate_parabola(grid: Grid, spec: ParabolaSpec, seed: int = 0) -> Dataset:
    """One sample: the parabola channels with their exact gradients as targets."""
    field, _ = gen_parabola(grid, spec)
    coefficients = spec.scaled
    gradients = 2.0 * coefficients[:, None, None] * grid.points.T[None, :, :]  # (n, d, m)
    names = [f"dv{j}/dx{k}" for j in range(spec.channels) for k in range(grid.dim)]
    return Dataset(
        task="parabola",
        inputs=field.values,
        targets=gradients.reshape(1, spec.channels * grid.dim, grid.size),
        grid=grid,
        seed=seed,
        sample_seeds=[seed],
        input_names=[f"v{j}" for j in range(spec.channels)],
        target_names=names,
        extra={"spec": spec.to_dict()},
    )


# Bandlimited

def _wavenumbers(dim: int, limit: int = BANDLIMIT) -> np.ndarray:
    axes = [np.arange(-limit, limit + 1)] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def gen_bandlimited(grid: Grid, seed: int, limit: int = BANDLIMIT) -> Tuple[np.ndarray, np.ndarray]:
    """Random trigonometric polynomial with |k_i| <= limit and its exact Laplacian."""
    if grid.topology != Topology.PERIODIC_BOX:
        raise InvalidArgumentError(f"bandlimited samples need a periodic box, got {grid}")
    rng = np.random.default_rng(seed)
    k = _wavenumbers(grid.dim, limit)
    amplitudes = rng.normal(0.0, 1.0, (k.shape[0], 2)) / (1.0 + np.sum(k * k, axis=1))[:, None]
    omega = 2.0 * np.pi * k / np.asarray(grid.extent)[None, :]
    phase = grid.points @ omega.T  # (m, K)
    values = np.cos(phase) @ amplitudes[:, 0] + np.sin(phase) @ amplitudes[:, 1]
    laplacian_factor = -np.sum(omega * omega, axis=1)
    target = (np.cos(phase) * laplacian_factor) @ amplitudes[:, 0] + (np.sin(phase) * laplacian_factor) @ amplitudes[:, 1]
    return values, target


def generate_bandlimited(grid: Grid, count: int, seed: int, split: str = "train") -> Dataset:
    seeds = split_seeds(seed, count, split)
    pairs = ordered_map(lambda s: gen_bandlimited(grid, s), seeds)
    inputs = np.stack([p[0] for p in pairs])[:, None, :]
    targets = np.stack([p[1] for p in pairs])[:, None, :]
    return Dataset(
        task="bandlimited",
        inputs=inputs,
        targets=targets,
        grid=grid,
        seed=seed,
        sample_seeds=seeds,
        input_names=["v"],
        target_names=["laplacian"],
        extra={"limit": BANDLIMIT, "split": split},
    )


# Grids and regeneration

def task_grid(task: str, resolution: int) -> Grid:
    """Default grid of a task: unit bounded box, or unit periodic box for bandlimited data."""
    if task not in ("darcy", "parabola", "bandlimited"):
        raise InvalidArgumentError(f"unknown task: {task}")
    periodic = task == "bandlimited"
    return make_regular_grid((resolution, resolution), (1.0, 1.0), periodic=periodic)


def regenerate_dataset(dataset: Dataset, grid: Grid) -> Dataset:
    """Resample the same analytic samples (same seeds) on another grid."""
    if dataset.task == "darcy":
        _check_darcy_grid(grid)
        samples = ordered_map(lambda s: gen_darcy(grid, s), dataset.sample_seeds)
        return _darcy_dataset(samples, grid, dataset.seed, dataset.sample_seeds, dataset.extra.get("split", "train"))
    if dataset.task == "bandlimited":
        limit = int(dataset.extra.get("limit", BANDLIMIT))
        pairs = ordered_map(lambda s: gen_bandlimited(grid, s, limit), dataset.sample_seeds)
        return Dataset(
            task="bandlimited",
            inputs=np.stack([p[0] for p in pairs])[:, None, :],
            targets=np.stack([p[1] for p in pairs])[:, None, :],
            grid=grid,
            seed=dataset.seed,
            sample_seeds=list(dataset.sample_seeds),
            input_names=list(dataset.input_names),
            target_names=list(dataset.target_names),
            extra=dict(dataset.extra),
        )
    if dataset.task == "parabola":
        spec = ParabolaSpec.from_dict(dataset.extra["spec"])
        return generate_parabola(grid, spec, dataset.seed)
    raise InvalidArgumentError(f"cannot regenerate task {dataset.task}")
