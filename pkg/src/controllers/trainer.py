"""Losses, evaluation and the deterministic training loop."""

import logging
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from ..models.config import TrainConfig
from ..models.dataset import Dataset
from ..models.field import Field
from ..models.metrics import EpochMetrics
from ..utils.errors import DegenerateTargetError, DivergedError, InvalidArgumentError
from ..utils.parallel import ordered_map
from .model import LocalNOModel, model_apply_at_resolution, model_forward
from .optimizer import AdamState, adam_step

_logger = logging.getLogger(__name__)

EVAL_BATCH = 16


def squared_l2(pred: np.ndarray, target: np.ndarray, quad_weights: np.ndarray) -> np.ndarray:
    """Quadrature-weighted squared L2 distance per sample, summed over channels."""
    diff = pred - target
    return np.einsum("bcm,m->b", diff * diff, quad_weights)


def relative_l2_per_sample(pred: np.ndarray, target: np.ndarray, quad_weights: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.einsum("bcm,m->b", target * target, quad_weights))
    if np.any(norms == 0):
        raise DegenerateTargetError("relative L2 is undefined for a zero target")
    return np.sqrt(squared_l2(pred, target, quad_weights)) / norms


def relative_l2(pred: Field, target: Field) -> float:
    """||pred - target||_q / ||target||_q averaged over the batch."""
    if pred.grid is not target.grid and pred.grid.key() != target.grid.key():
        raise InvalidArgumentError("prediction and target live on different grids")
    if pred.values.shape != target.values.shape:
        raise InvalidArgumentError(
            f"prediction shape {pred.values.shape} differs from target shape {target.values.shape}"
        )
    return float(np.mean(relative_l2_per_sample(pred.values, target.values, target.grid.quad_weights)))


def _chunk_gradient(
    model: LocalNOModel, dataset: Dataset, indices: np.ndarray, normalizer: float
) -> Tuple[float, Dict[str, np.ndarray]]:
    """Loss sum and gradients of loss / normalizer over the given samples."""
    field = dataset.input_field(indices)
    target = dataset.targets[indices]
    pred, tape = model.forward_with_tape(field)
    quad = dataset.grid.quad_weights
    loss = float(squared_l2(pred.values, target, quad).sum())
    upstream = (2.0 / normalizer) * (pred.values - target) * quad
    grads, _ = model.vjp(tape, upstream)
    return loss, grads


def batch_gradient(
    model: LocalNOModel, dataset: Dataset, indices: np.ndarray, chunk_size: int
) -> Tuple[float, Dict[str, np.ndarray]]:
    """Mean loss and gradient of a batch, reduced over chunks in a fixed order."""
    size = len(indices)
    chunks = [indices[start:start + chunk_size] for start in range(0, size, chunk_size)]
    results = ordered_map(lambda chunk: _chunk_gradient(model, dataset, chunk, size), chunks)
    loss = 0.0
    grads: Dict[str, np.ndarray] = {}
    for chunk_loss, chunk_grads in results:
        loss += chunk_loss
        for name, grad in chunk_grads.items():
            grads[name] = grads[name] + grad if name in grads else grad
    return loss / size, grads


def predict(
    model: LocalNOModel, dataset: Dataset, batch_size: int = EVAL_BATCH, transfer: bool = False
) -> np.ndarray:
    """Model outputs for every sample, evaluated in batches.

    With ``transfer`` the batches go through model_apply_at_resolution.
    """
    model.prepare(dataset.grid)
    apply = model_apply_at_resolution if transfer else model_forward
    outputs = []
    for start in range(0, len(dataset), batch_size):
        indices = np.arange(start, min(start + batch_size, len(dataset)))
        outputs.append(apply(model, dataset.input_field(indices)).values)
    return np.concatenate(outputs, axis=0)


def evaluate(
    model: LocalNOModel, dataset: Dataset, batch_size: int = EVAL_BATCH, transfer: bool = False
) -> float:
    """Mean relative L2 error over a dataset."""
    pred = predict(model, dataset, batch_size, transfer)
    return float(np.mean(relative_l2_per_sample(pred, dataset.targets, dataset.grid.quad_weights)))


def dataset_loss(model: LocalNOModel, dataset: Dataset, batch_size: int = EVAL_BATCH) -> float:
    """Mean quadrature-weighted squared L2 loss over a dataset."""
    pred = predict(model, dataset, batch_size)
    return float(np.mean(squared_l2(pred, dataset.targets, dataset.grid.quad_weights)))


def _cast(params: Dict[str, np.ndarray], dtype: str) -> Dict[str, np.ndarray]:
    if dtype == "float64":
        return params
    return {
        name: value.astype(np.complex64 if np.iscomplexobj(value) else np.float32)
        for name, value in params.items()
    }


def train_loop(
    model: LocalNOModel,
    dataset: Dataset,
    config: TrainConfig,
    val_dataset: Optional[Dataset] = None,
    on_epoch: Optional[Callable[[EpochMetrics, LocalNOModel], None]] = None,
) -> Tuple[LocalNOModel, List[EpochMetrics]]:
    """Adam on the squared L2 loss with a seeded shuffle per epoch.

    Validation uses ``val_dataset`` when given, the training set otherwise.
    """
    if len(dataset) == 0:
        raise InvalidArgumentError("cannot train on an empty dataset")
    model.prepare(dataset.grid)
    if val_dataset is not None:
        model.prepare(val_dataset.grid)
    rng = np.random.default_rng(config.seed)
    state = AdamState()
    params = _cast(model.copy_params(), config.dtype)
    model = model.with_params(params)
    history: List[EpochMetrics] = []

    for epoch in range(config.epochs):
        rate = config.rate_at(epoch)
        order = rng.permutation(len(dataset))
        total = 0.0
        for start in range(0, len(dataset), config.batch_size):
            indices = order[start:start + config.batch_size]
            loss, grads = batch_gradient(model, dataset, indices, config.chunk_size)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise DivergedError(
                    f"non-finite loss or gradient in epoch {epoch}",
                    last_good=model.copy_params(),
                    epoch=epoch,
                )
            total += loss * len(indices)
            params, state = adam_step(model.params, grads, state, rate)
            model = model.with_params(_cast(params, config.dtype))

        metrics = EpochMetrics(
            epoch=epoch,
            lr=rate,
            train_loss=total / len(dataset),
            val_rel_l2=evaluate(model, val_dataset if val_dataset is not None else dataset),
        )
        history.append(metrics)
        _logger.info(
            "epoch %d lr %.3e train_loss %.6e val_rel_l2 %.6e",
            metrics.epoch, metrics.lr, metrics.train_loss, metrics.val_rel_l2,
        )
        if on_epoch is not None:
            on_epoch(metrics, model)
    return model, history
