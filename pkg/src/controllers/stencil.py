"""Differential stencils on scattered point sets.

For a centre y and neighbours x_j the weights k_j solve

    sum_j k_j = c,    sum_j k_j (x_j - y) = b

with minimum Euclidean norm, so that sum_j k_j v(x_j) -> c v(y) + grad v(y) . b
as the neighbourhoods shrink.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from ..models.field import Field
from ..models.grid import Grid, Topology
from ..models.kernels import DirectionalSignature
from ..utils.constants import STENCIL_TOL
from ..utils.errors import DegenerateNeighborhoodError, InvalidArgumentError
from ..utils.parallel import ordered_map

_logger = logging.getLogger(__name__)

STENCIL_TILE = 4


def _moment_matrix(center: np.ndarray, neighbors: np.ndarray, scale: float) -> np.ndarray:
    """Rows (1, (x_j - y) / scale), shape (d + 1, k)."""
    offsets = (neighbors - center[None, :]) / scale
    return np.vstack([np.ones(neighbors.shape[0]), offsets.T])


def stencil_pseudo_inverse(
    center: Sequence[float], neighbors: np.ndarray, point: int = -1
) -> np.ndarray:
    """Minimum-norm solution operator P, shape (k, d + 1), with weights = P @ (c, b).

    Offsets are rescaled by the neighbourhood radius before the rank test.
    """
    center = np.asarray(center, dtype=np.float64)
    neighbors = np.atleast_2d(np.asarray(neighbors, dtype=np.float64))
    if neighbors.shape[1] != center.shape[0]:
        raise InvalidArgumentError("neighbors and center disagree on dimension")
    required = center.shape[0] + 1
    scale = float(np.max(np.linalg.norm(neighbors - center, axis=1), initial=0.0))
    if scale == 0.0:
        raise DegenerateNeighborhoodError(point, 0, required)
    matrix = _moment_matrix(center, neighbors, scale)
    rank = int(np.linalg.matrix_rank(matrix))
    if rank < required:
        raise DegenerateNeighborhoodError(point, rank, required)
    # columns for (c, b / scale); undo the rescaling of the b block
    identity = np.eye(required)
    solution, _, _, _ = np.linalg.lstsq(matrix, identity, rcond=None)
    solution[:, 1:] /= scale
    return solution


def solve_irregular_stencil(
    center: Sequence[float],
    neighbors: np.ndarray,
    target_c: float,
    target_b: Sequence[float],
    point: int = -1,
) -> np.ndarray:
    """Minimum-norm weights with sum k = c and sum k (x - y) = b."""
    target = np.concatenate([[float(target_c)], np.asarray(target_b, dtype=np.float64)])
    operator = stencil_pseudo_inverse(center, neighbors, point)
    if operator.shape[1] != target.shape[0]:
        raise InvalidArgumentError(f"target_b must have {operator.shape[1] - 1} entries")
    return operator @ target


def stencil_residual(
    center: Sequence[float], neighbors: np.ndarray, weights: np.ndarray,
    target_c: float, target_b: Sequence[float],
) -> float:
    """Largest constraint violation relative to the target magnitude."""
    center = np.asarray(center, dtype=np.float64)
    neighbors = np.atleast_2d(np.asarray(neighbors, dtype=np.float64))
    target = np.concatenate([[float(target_c)], np.asarray(target_b, dtype=np.float64)])
    achieved = np.concatenate([[weights.sum()], weights @ (neighbors - center)])
    return float(np.max(np.abs(achieved - target)) / max(np.max(np.abs(target)), 1.0))


def build_neighborhoods(grid: Grid, radius: float) -> List[np.ndarray]:
    """Sorted indices of all points within ``radius`` of each point (self included)."""
    tree = cKDTree(grid.points)
    lists = tree.query_ball_point(grid.points, r=radius)
    return [np.asarray(sorted(n), dtype=np.int64) for n in lists]


@dataclass(frozen=True, eq=False)
class StencilOperator:
    """Moment operators P_t as CSR matrices, one per entry of (c, b).

    The stencil for a signature (c, b) is c * P_0 + sum_k b_k * P_{k+1}.
    """

    moments: Tuple[sp.csr_array, ...]
    grid: Grid

    def matrix(self, c: float, b: Sequence[float]) -> sp.csr_array:
        coefficients = [c] + list(b)
        result = coefficients[0] * self.moments[0]
        for coefficient, moment in zip(coefficients[1:], self.moments[1:]):
            result = result + coefficient * moment
        return sp.csr_array(result)


def assemble_stencil_operator(grid: Grid, neighborhoods: Sequence[np.ndarray]) -> StencilOperator:
    """Solve every neighbourhood once and collect the moment operators."""
    if len(neighborhoods) != grid.size:
        raise InvalidArgumentError("one neighborhood per grid point is required")
    points = grid.points

    def solve(index: int) -> np.ndarray:
        return stencil_pseudo_inverse(points[index], points[neighborhoods[index]], point=index)

    operators = ordered_map(solve, range(grid.size))
    counts = np.array([len(n) for n in neighborhoods], dtype=np.int64)
    indptr = np.concatenate([[0], np.cumsum(counts)])
    indices = np.concatenate(neighborhoods).astype(np.int64)
    stacked = np.concatenate(operators, axis=0)  # (nnz, d + 1)
    moments = tuple(
        sp.csr_array((stacked[:, t].copy(), indices, indptr), shape=(grid.size, grid.size))
        for t in range(stacked.shape[1])
    )
    _logger.debug("Assembled irregular stencils: m=%d nnz=%d", grid.size, indices.shape[0])
    return StencilOperator(moments=moments, grid=grid)


def irregular_diff_forward(
    grid: Grid,
    neighborhoods: Sequence[np.ndarray],
    signature: DirectionalSignature,
    field: Field,
    operator: Optional[StencilOperator] = None,
) -> Field:
    """out_o = sum_i (c_oi P_0 + sum_k b_oik P_k) v_i at every point."""
    if field.grid is not grid:
        raise InvalidArgumentError(f"{field} does not live on {grid}")
    if signature.b.shape[1] != field.channels:
        raise InvalidArgumentError("signature and field disagree on channel count")
    if operator is None:
        operator = assemble_stencil_operator(grid, neighborhoods)
    batch, channels, m = field.values.shape
    columns = field.values.transpose(2, 0, 1).reshape(m, batch * channels)
    responses = np.stack(
        [np.asarray(moment @ columns).reshape(m, batch, channels) for moment in operator.moments]
    )  # (d + 1, m, b, c)
    coefficients = np.concatenate([signature.c[..., None], signature.b], axis=-1)  # (o, c, d + 1)
    out = np.einsum("tmbc,oct->bom", responses, coefficients)
    return Field(values=out, grid=grid)


def jittered_lattice(n: int, jitter: float, seed: int = 0) -> Grid:
    """Cell-centred n x n lattice on [0, 1]^2 with a periodic 4 x 4 jitter tile.

    Jitter is in units of the spacing h = 1/n; the tile repeats so that
    refining n -> 2n reproduces every local neighbourhood shape scaled by 1/2.
    """
    if n < STENCIL_TILE or n % STENCIL_TILE:
        raise InvalidArgumentError(f"lattice size must be a positive multiple of {STENCIL_TILE}")
    if not 0.0 <= jitter < 0.5:
        raise InvalidArgumentError(f"jitter must lie in [0, 0.5), got {jitter}")
    rng = np.random.default_rng(seed)
    tile = rng.uniform(-jitter, jitter, size=(2, STENCIL_TILE, STENCIL_TILE))
    h = 1.0 / n
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    x = (i + 0.5 + tile[0][i % STENCIL_TILE, j % STENCIL_TILE]) * h
    y = (j + 0.5 + tile[1][i % STENCIL_TILE, j % STENCIL_TILE]) * h
    points = np.stack([x.ravel(), y.ravel()], axis=-1)
    return Grid(
        dim=2,
        points=points,
        quad_weights=np.full(n * n, h * h),
        topology=Topology.UNSTRUCTURED,
        extent=(1.0, 1.0),
        width=h,
    )


def check_stencil(
    center: Sequence[float], neighbors: np.ndarray, target_c: float, target_b: Sequence[float],
    tol: float = STENCIL_TOL,
) -> bool:
    weights = solve_irregular_stencil(center, neighbors, target_c, target_b)
    return stencil_residual(center, neighbors, weights, target_c, target_b) <= tol
