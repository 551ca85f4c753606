"""The local neural operator: lifting, summed-branch blocks, projection.

Each block computes

    a = act(scale * (spectral(h) + differential(h) + disco(h) + W h + b))

with no activation after the final block. Gradients come from explicit
per-layer vector-Jacobian products replayed over a tape of the forward pass.
"""

import logging
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import erf

from ..models.config import BlockConfig, ModelConfig
from ..models.field import Field
from ..models.grid import Grid, Topology
from ..models.kernels import AssembledKernel
from ..utils.constants import KERNEL_CACHE_SIZE
from ..utils.errors import AssemblyDegenerateError, InvalidArgumentError
from .differential import diff_apply, diff_apply_vjp, grid_scale
from .disco import assemble, disco_apply, disco_apply_vjp
from .spectral import check_modes, init_spectral_weights, spectral_apply, spectral_apply_vjp

_logger = logging.getLogger(__name__)

_SQRT_2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact GELU x * Phi(x)."""
    return 0.5 * x * (1.0 + erf(x / _SQRT_2))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x / _SQRT_2)) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _activate(kind: str, x: np.ndarray) -> np.ndarray:
    return gelu(x) if kind == "gelu" else x


def _activate_grad(kind: str, x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    return upstream * gelu_grad(x) if kind == "gelu" else upstream


def linear_apply(weight: np.ndarray, bias: Optional[np.ndarray], x: np.ndarray) -> np.ndarray:
    """Pointwise linear map over channels of (b, c, m) values."""
    out = np.einsum("oc,bcm->bom", weight, x)
    if bias is not None:
        out = out + bias[None, :, None]
    return out


def linear_vjp(weight: np.ndarray, x: np.ndarray, upstream: np.ndarray):
    """(grad_weight, grad_bias, grad_input) of linear_apply."""
    grad_weight = np.einsum("bom,bcm->oc", upstream, x)
    grad_bias = upstream.sum(axis=(0, 2))
    grad_input = np.einsum("oc,bom->bcm", weight, upstream)
    return grad_weight, grad_bias, grad_input


def _uniform(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape)


@dataclass
class BlockTape:
    inputs: np.ndarray
    pre_activation: np.ndarray


@dataclass
class Tape:
    """Intermediate values of one forward pass."""

    grid: Grid
    lifted_input: np.ndarray
    blocks: List[BlockTape] = field(default_factory=list)
    hidden_input: Optional[np.ndarray] = None
    hidden_pre: Optional[np.ndarray] = None


class LocalNOModel:
    """Parameters plus the layer recipe described by a ModelConfig."""

    def __init__(self, config: ModelConfig, params: Dict[str, np.ndarray]):
        self.config = config
        self.params = params
        self.block_configs: List[BlockConfig] = config.block_configs()
        self._kernels: "OrderedDict[tuple, AssembledKernel]" = OrderedDict()
        self._lock = threading.Lock()
        self._check_params()

    # Construction

    @staticmethod
    def param_shapes(config: ModelConfig) -> Dict[str, Tuple[Tuple[int, ...], bool]]:
        """Name -> (shape, is_complex) for every learnable array, in a fixed order."""
        width = config.width
        lift_in = config.in_channels + (config.spatial_dim if config.positional_encoding else 0)
        shapes = {
            "lift.weight": ((width, lift_in), False),
            "lift.bias": ((width,), False),
        }
        for index, block in enumerate(config.block_configs()):
            prefix = f"blocks.{index}"
            if block.spectral:
                shapes[f"{prefix}.spectral"] = ((width, width) + tuple(block.modes), True)
            if block.differential:
                taps = (block.stencil_size,) * config.spatial_dim
                shapes[f"{prefix}.differential"] = ((width, width) + taps, False)
            if block.local_integral:
                shapes[f"{prefix}.disco"] = ((width, width, block.basis.size), False)
            if block.pointwise:
                shapes[f"{prefix}.pointwise.weight"] = ((width, width), False)
                shapes[f"{prefix}.pointwise.bias"] = ((width,), False)
        hidden = config.hidden
        shapes["proj.hidden.weight"] = ((hidden, width), False)
        shapes["proj.hidden.bias"] = ((hidden,), False)
        shapes["proj.out.weight"] = ((config.out_channels, hidden), False)
        shapes["proj.out.bias"] = ((config.out_channels,), False)
        return shapes

    @classmethod
    def init(cls, config: ModelConfig, seed: int = 0) -> "LocalNOModel":
        """Random initialization from a seeded generator."""
        rng = np.random.default_rng(seed)
        params = {}
        for name, (shape, is_complex) in cls.param_shapes(config).items():
            if is_complex:
                params[name] = init_spectral_weights(shape[1], shape[0], shape[2:], rng).weights
            elif name.endswith(".bias"):
                fan_in = params[name[: -len("bias")] + "weight"].shape[1]
                params[name] = _uniform(rng, fan_in, shape)
            else:
                params[name] = _uniform(rng, int(np.prod(shape[1:])), shape)
        model = cls(config, params)
        _logger.info("Initialized model with %d parameters", model.count_params())
        return model

    def _check_params(self):
        expected = self.param_shapes(self.config)
        missing = set(expected) - set(self.params)
        if missing:
            raise InvalidArgumentError(f"missing parameters: {sorted(missing)}")
        for name, (shape, _) in expected.items():
            if self.params[name].shape != shape:
                raise InvalidArgumentError(
                    f"parameter {name} has shape {self.params[name].shape}, expected {shape}"
                )

    def count_params(self) -> int:
        return count_params(self)

    def copy_params(self) -> Dict[str, np.ndarray]:
        return {name: value.copy() for name, value in self.params.items()}

    def with_params(self, params: Dict[str, np.ndarray]) -> "LocalNOModel":
        """Same config and kernel cache, new parameters."""
        model = LocalNOModel(self.config, params)
        model._kernels = self._kernels
        model._lock = self._lock
        return model

    # Grid-dependent pieces

    def kernel_for(self, grid: Grid) -> AssembledKernel:
        """DISCO kernel on ``grid``, assembled once per grid.

        The most recently used KERNEL_CACHE_SIZE kernels are kept. Raises
        AssemblyDegenerateError when only the center function has support,
        which would turn the branch into a pointwise map.
        """
        key = grid.key()
        with self._lock:
            kernel = self._kernels.get(key)
            if kernel is not None:
                self._kernels.move_to_end(key)
                return kernel
            basis = self.config.basis()
            if grid.is_regular and basis.r_cutoff <= min(grid.widths):
                raise AssemblyDegenerateError(
                    0, f"basis r_cutoff {basis.r_cutoff} does not exceed the spacing {min(grid.widths)} of {grid}"
                )
            kernel = assemble(grid, grid, basis)
            if basis.size > 1 and not np.any(kernel.values[1:]):
                raise AssemblyDegenerateError(
                    0, f"no ring function of r_cutoff {basis.r_cutoff} reaches a neighbour on {grid}"
                )
            self._kernels[key] = kernel
            while len(self._kernels) > KERNEL_CACHE_SIZE:
                self._kernels.popitem(last=False)
            _logger.info("Assembled DISCO kernel on %s (nnz=%d)", grid, kernel.nnz)
        return kernel

    def prepare(self, grid: Grid):
        """Validate the grid against every branch and assemble what it needs."""
        if grid.dim != self.config.spatial_dim:
            raise InvalidArgumentError(f"{grid} does not match a {self.config.spatial_dim}-D model")
        uses = lambda flag: any(getattr(b, flag) for b in self.block_configs)
        if uses("spectral"):
            if grid.shape is None:
                raise InvalidArgumentError(f"spectral branch needs a regular grid, got {grid}")
            check_modes(grid.shape, self.config.modes)
        if uses("differential"):
            grid_scale(grid)
        if uses("local_integral"):
            self.kernel_for(grid)

    # Forward

    def _inputs(self, field: Field) -> np.ndarray:
        values = field.values
        if values.shape[1] != self.config.in_channels:
            raise InvalidArgumentError(
                f"model expects {self.config.in_channels} input channels, got {values.shape[1]}"
            )
        if not self.config.positional_encoding:
            return values
        coords = np.broadcast_to(field.grid.points.T[None], (values.shape[0],) + field.grid.points.T.shape)
        return np.concatenate([values, coords], axis=1)

    def _branches(self, index: int, block: BlockConfig, grid: Grid, x: np.ndarray) -> np.ndarray:
        prefix = f"blocks.{index}"
        batch, width, _ = x.shape
        total = np.zeros_like(x)
        if block.spectral:
            image = x.reshape((batch, width) + tuple(grid.shape))
            total += spectral_apply(self.params[f"{prefix}.spectral"], image).reshape(x.shape)
        if block.differential:
            image = x.reshape((batch, width) + tuple(grid.shape))
            out = diff_apply(self.params[f"{prefix}.differential"], grid.width, block.padding, image)
            total += out.reshape(x.shape)
        if block.local_integral:
            total += disco_apply(self.kernel_for(grid), self.params[f"{prefix}.disco"], x)
        if block.pointwise:
            total += linear_apply(
                self.params[f"{prefix}.pointwise.weight"], self.params[f"{prefix}.pointwise.bias"], x
            )
        return total

    def forward_with_tape(self, field: Field) -> Tuple[Field, Tape]:
        grid = field.grid
        self.prepare(grid)
        activation = self.config.activation
        x = self._inputs(field)
        tape = Tape(grid=grid, lifted_input=x)
        h = linear_apply(self.params["lift.weight"], self.params["lift.bias"], x)
        last = len(self.block_configs) - 1
        for index, block in enumerate(self.block_configs):
            z = block.scale * self._branches(index, block, grid, h)
            tape.blocks.append(BlockTape(inputs=h, pre_activation=z))
            h = z if index == last else _activate(activation, z)
        tape.hidden_input = h
        tape.hidden_pre = linear_apply(self.params["proj.hidden.weight"], self.params["proj.hidden.bias"], h)
        hidden = _activate(activation, tape.hidden_pre)
        out = linear_apply(self.params["proj.out.weight"], self.params["proj.out.bias"], hidden)
        return Field(values=out, grid=grid), tape

    def forward(self, field: Field) -> Field:
        return self.forward_with_tape(field)[0]

    # Reverse

    def _branches_vjp(
        self, index: int, block: BlockConfig, grid: Grid, x: np.ndarray, upstream: np.ndarray,
        grads: Dict[str, np.ndarray],
    ) -> np.ndarray:
        prefix = f"blocks.{index}"
        batch, width, _ = x.shape
        grad_x = np.zeros_like(x)
        if block.spectral or block.differential:
            image = x.reshape((batch, width) + tuple(grid.shape))
            up_image = upstream.reshape((batch, width) + tuple(grid.shape))
        if block.spectral:
            gw, gi = spectral_apply_vjp(self.params[f"{prefix}.spectral"], image, up_image)
            grads[f"{prefix}.spectral"] = gw
            grad_x += gi.reshape(x.shape)
        if block.differential:
            gt, gi = diff_apply_vjp(
                self.params[f"{prefix}.differential"], grid.width, block.padding, image, up_image
            )
            grads[f"{prefix}.differential"] = gt
            grad_x += gi.reshape(x.shape)
        if block.local_integral:
            gt, gi = disco_apply_vjp(self.kernel_for(grid), self.params[f"{prefix}.disco"], x, upstream)
            grads[f"{prefix}.disco"] = gt
            grad_x += gi
        if block.pointwise:
            gw, gb, gi = linear_vjp(self.params[f"{prefix}.pointwise.weight"], x, upstream)
            grads[f"{prefix}.pointwise.weight"] = gw
            grads[f"{prefix}.pointwise.bias"] = gb
            grad_x += gi
        return grad_x

    def vjp(self, tape: Tape, upstream: np.ndarray) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
        """Parameter gradients and the gradient with respect to the input values."""
        activation = self.config.activation
        grads: Dict[str, np.ndarray] = {}
        hidden = _activate(activation, tape.hidden_pre)
        gw, gb, g_hidden = linear_vjp(self.params["proj.out.weight"], hidden, upstream)
        grads["proj.out.weight"], grads["proj.out.bias"] = gw, gb
        g_pre = _activate_grad(activation, tape.hidden_pre, g_hidden)
        gw, gb, g = linear_vjp(self.params["proj.hidden.weight"], tape.hidden_input, g_pre)
        grads["proj.hidden.weight"], grads["proj.hidden.bias"] = gw, gb

        last = len(self.block_configs) - 1
        for index in reversed(range(len(self.block_configs))):
            block = self.block_configs[index]
            record = tape.blocks[index]
            if index != last:
                g = _activate_grad(activation, record.pre_activation, g)
            g = self._branches_vjp(index, block, tape.grid, record.inputs, block.scale * g, grads)

        gw, gb, g_input = linear_vjp(self.params["lift.weight"], tape.lifted_input, g)
        grads["lift.weight"], grads["lift.bias"] = gw, gb
        return grads, g_input[:, : self.config.in_channels]


def count_params(model: LocalNOModel) -> int:
    """Learnable scalar count; complex entries count twice."""
    total = 0
    for value in model.params.values():
        total += value.size * (2 if np.iscomplexobj(value) else 1)
    return total


def model_forward(model: LocalNOModel, field: Field) -> Field:
    return model.forward(field)


def model_apply_at_resolution(model: LocalNOModel, field: Field) -> Field:
    """Evaluate on another grid with unchanged parameters.

    The differential branch re-reads h, the DISCO branch reassembles the same
    basis on the new grid and the spectral branch keeps its truncation.
    """
    grid = field.grid
    if not grid.is_regular and grid.topology != Topology.SPHERE:
        raise InvalidArgumentError(f"resolution transfer needs a structured grid, got {grid}")
    _logger.info("Applying model on %s", grid)
    return model.forward(field)
