"""Central finite-difference checks of the vector-Jacobian products."""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from ..models.config import ModelConfig
from ..models.field import Field
from ..models.grid import Grid
from ..models.kernels import AssembledKernel, PaddingMode
from ..models.metrics import GradCheckReport
from ..utils.constants import FD_MAX_ENTRIES, FD_STEP, GRADCHECK_TOL
from .differential import diff_apply, diff_apply_vjp, grid_scale
from .disco import disco_apply, disco_apply_vjp
from .model import LocalNOModel, linear_apply, linear_vjp
from .spectral import spectral_apply, spectral_apply_vjp

_logger = logging.getLogger(__name__)

Params = Dict[str, np.ndarray]


@dataclass
class Operation:
    """A differentiable map: forward(params, x) and vjp(params, x, g) -> (grads, grad_x)."""

    name: str
    forward: Callable[[Params, np.ndarray], np.ndarray]
    vjp: Callable[[Params, np.ndarray, np.ndarray], Tuple[Params, np.ndarray]]


def _flat_real(array: np.ndarray) -> np.ndarray:
    """Writable real view; complex entries appear as (re, im) pairs."""
    if np.iscomplexobj(array):
        return array.view(np.float64).reshape(-1)
    return array.reshape(-1)


def grad_check(
    operation: Operation,
    params: Params,
    x: np.ndarray,
    tolerance: float = GRADCHECK_TOL,
    step: float = FD_STEP,
    max_entries: Optional[int] = FD_MAX_ENTRIES,
    seed: int = 0,
) -> GradCheckReport:
    """Compare analytic gradients of <g, forward(params, x)> with central differences.

    Up to ``max_entries`` randomly chosen entries per parameter (and of the
    input) are perturbed; ``None`` perturbs every entry.
    The relative error of an entry is |a - n| / max(|a|, |n|, 1e-3 * max|a|).
    """
    rng = np.random.default_rng(seed)
    params = {name: np.ascontiguousarray(value.copy()) for name, value in params.items()}
    x = np.ascontiguousarray(x.copy())
    upstream = rng.standard_normal(operation.forward(params, x).shape)

    def objective() -> float:
        return float(np.sum(upstream * operation.forward(params, x)))

    grads, grad_x = operation.vjp(params, x, upstream)
    targets = [(name, params[name], grads[name]) for name in sorted(params)]
    targets.append(("input", x, grad_x))

    worst = 0.0
    checked = 0
    for name, array, analytic in targets:
        flat = _flat_real(array)
        flat_grad = _flat_real(np.ascontiguousarray(analytic))
        count = flat.shape[0] if max_entries is None else min(max_entries, flat.shape[0])
        chosen = rng.choice(flat.shape[0], size=count, replace=False)
        floor = 1e-3 * max(float(np.max(np.abs(flat_grad), initial=0.0)), 1e-12)
        for k in chosen:
            original = flat[k]
            flat[k] = original + step
            plus = objective()
            flat[k] = original - step
            minus = objective()
            flat[k] = original
            numeric = (plus - minus) / (2.0 * step)
            error = abs(flat_grad[k] - numeric) / max(abs(flat_grad[k]), abs(numeric), floor)
            worst = max(worst, error)
            checked += 1
    report = GradCheckReport(name=operation.name, max_rel_error=worst, tolerance=tolerance, checked=checked)
    _logger.debug("grad check %s: max rel error %.3e over %d entries", report.name, worst, checked)
    return report


# Layer adapters

def linear_operation() -> Operation:
    def forward(params, x):
        return linear_apply(params["weight"], params["bias"], x)

    def vjp(params, x, g):
        gw, gb, gx = linear_vjp(params["weight"], x, g)
        return {"weight": gw, "bias": gb}, gx

    return Operation("pointwise", forward, vjp)


def differential_operation(grid: Grid, padding: PaddingMode = PaddingMode.REFLECTIVE) -> Operation:
    h = grid_scale(grid)
    shape = tuple(grid.shape)

    def image(x):
        return x.reshape(x.shape[:2] + shape)

    def forward(params, x):
        out = diff_apply(params["taps"], h, padding, image(x))
        return out.reshape(out.shape[:2] + (-1,))

    def vjp(params, x, g):
        gt, gi = diff_apply_vjp(params["taps"], h, padding, image(x), image(g))
        return {"taps": gt}, gi.reshape(x.shape)

    return Operation("differential", forward, vjp)


def disco_operation(kernel: AssembledKernel, name: str = "disco") -> Operation:
    def forward(params, x):
        return disco_apply(kernel, params["theta"], x)

    def vjp(params, x, g):
        gt, gx = disco_apply_vjp(kernel, params["theta"], x, g)
        return {"theta": gt}, gx

    return Operation(name, forward, vjp)


def spectral_operation(grid: Grid) -> Operation:
    shape = tuple(grid.shape)

    def image(x):
        return x.reshape(x.shape[:2] + shape)

    def forward(params, x):
        out = spectral_apply(params["weights"], image(x))
        return out.reshape(out.shape[:2] + (-1,))

    def vjp(params, x, g):
        gw, gi = spectral_apply_vjp(params["weights"], image(x), image(g))
        return {"weights": gw}, gi.reshape(x.shape)

    return Operation("spectral", forward, vjp)


def model_operation(config: ModelConfig, grid: Grid) -> Operation:
    """Whole model with its parameter dictionary as the checked parameters."""
    template = LocalNOModel.init(config, seed=0)

    def forward(params, x):
        return template.with_params(params).forward(Field(values=x, grid=grid)).values

    def vjp(params, x, g):
        model = template.with_params(params)
        _, tape = model.forward_with_tape(Field(values=x, grid=grid))
        return model.vjp(tape, g)

    return Operation("model", forward, vjp)
