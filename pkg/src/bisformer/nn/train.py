import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from bisformer.autodiff.tensor import Node, backward, no_grad
from bisformer.core.config import ModelConfig, TrainConfig
from bisformer.core.errors import DataError, NonFiniteLoss, NonFiniteValue, NumericalError
from bisformer.core.state import EpochRecord, TrainingLog
from bisformer.datapipe.schema import SampleBatch
from bisformer.imbalance.losses import history_loss, total_objective, weighted_mse
from bisformer.nn.model import model_forward
from bisformer.nn.optim import Adam
from bisformer.nn.weights import SEED_MASK, ModelWeights, init_weights

logger = logging.getLogger(__name__)

EpochCallback = Callable[[EpochRecord], None]


@dataclass
class FitResult:
    weights: ModelWeights
    log: TrainingLog


@dataclass
class BatchLoss:
    objective: float
    history: float
    weighted: float


def _micro_loss(
    batch: SampleBatch,
    weights: ModelWeights,
    hyper: TrainConfig,
    training: bool,
    rng: Optional[np.random.Generator],
):
    output = model_forward(batch, weights, training=training, rng=rng)
    target = weights.normalize(batch.y_target)
    sample_weights = batch.weight if hyper.reweight else np.ones(len(batch))
    l_w = weighted_mse(output.prediction, target, weights=sample_weights)
    if output.history is not None:
        l_h = history_loss(output.history, weights.normalize(batch.y_history))
    else:
        l_h = 0.0
    return total_objective(l_h, l_w, hyper.lambda_h, hyper.lambda_w), l_h, l_w


def _value(x) -> float:
    return x.item() if isinstance(x, Node) else float(x)


def evaluate_objective(weights: ModelWeights, data: SampleBatch, hyper: TrainConfig) -> BatchLoss:
    """Full-data objective without recording gradients."""
    totals = np.zeros(3)
    with no_grad():
        for start in range(0, len(data), hyper.micro_batch):
            chunk = data.take(slice(start, start + hyper.micro_batch))
            objective, l_h, l_w = _micro_loss(chunk, weights, hyper, training=False, rng=None)
            totals += len(chunk) * np.array([_value(objective), _value(l_h), _value(l_w)])
    totals /= max(len(data), 1)
    return BatchLoss(*totals.tolist())


def _batch_step(
    batch: SampleBatch,
    weights: ModelWeights,
    hyper: TrainConfig,
    optimizer: Adam,
    rng: np.random.Generator,
) -> BatchLoss:
    # gradient accumulation reproduces the full-batch gradient of the mean objective
    grads: Dict[str, np.ndarray] = {name: np.zeros_like(p.value) for name, p in weights.params.items()}
    totals = np.zeros(3)
    nodes = weights.nodes()
    for start in range(0, len(batch), hyper.micro_batch):
        chunk = batch.take(slice(start, start + hyper.micro_batch))
        share = len(chunk) / len(batch)
        objective, l_h, l_w = _micro_loss(chunk, weights, hyper, training=True, rng=rng)
        backward(objective * share, params=nodes)
        for name, p in weights.params.items():
            grads[name] += p.grad
        totals += share * np.array([_value(objective), _value(l_h), _value(l_w)])
    optimizer.step(grads)
    return BatchLoss(*totals.tolist())


def fit(
    data: SampleBatch,
    config: ModelConfig,
    hyper: TrainConfig,
    weights: Optional[ModelWeights] = None,
    target_stats: Optional[Tuple[float, float]] = None,
    on_epoch: Optional[EpochCallback] = None,
) -> FitResult:
    """Train with Adam on the combined history and weighted objective.

    `weights` warm-starts from an existing model (fine-tuning); otherwise weights are
    initialized from `hyper.seed`, de-normalizing with `target_stats` (mean, scale)
    or the target statistics of `data`.
    """
    if not len(data):
        raise DataError("training set is empty")
    if weights is None:
        if target_stats is None:
            scale = float(np.std(data.y_target)) or 1.0
            target_stats = (float(np.mean(data.y_target)), scale)
        weights = init_weights(config, hyper.seed, *target_stats)
    elif weights.config != config:
        logger.info("Warm start keeps the saved model configuration")
    weights = weights.copy()

    optimizer = Adam(weights.params, hyper.lr, hyper.beta1, hyper.beta2, hyper.adam_eps)
    rng = np.random.default_rng((hyper.seed + 1) & SEED_MASK)
    log = TrainingLog()

    try:
        initial = evaluate_objective(weights, data, hyper)
    except NonFiniteValue:
        raise NonFiniteLoss(batch_index=0, epoch=None)
    log = log.with_initial(initial.objective)
    logger.info(f"Initial objective {initial.objective:.6f} over {len(data)} samples")

    batch_index = 0
    for epoch in range(hyper.epochs):
        optimizer.lr = hyper.lr_at(epoch)
        order = rng.permutation(len(data))
        totals = np.zeros(3)
        n_batches = 0
        for start in range(0, len(data), hyper.batch_size):
            batch = data.take(order[start:start + hyper.batch_size])
            try:
                loss = _batch_step(batch, weights, hyper, optimizer, rng)
            except NumericalError as e:
                logger.error(f"Numerical failure in epoch {epoch}, batch {batch_index}: {e}")
                raise NonFiniteLoss(batch_index=batch_index, epoch=epoch)
            if not np.isfinite(loss.objective):
                raise NonFiniteLoss(batch_index=batch_index, epoch=epoch)
            totals += len(batch) * np.array([loss.objective, loss.history, loss.weighted])
            n_batches += 1
            batch_index += 1
        totals /= len(data)
        record = EpochRecord(
            epoch=epoch,
            lr=optimizer.lr,
            objective=float(totals[0]),
            history_loss=float(totals[1]),
            weighted_mse=float(totals[2]),
            n_batches=n_batches,
        )
        log = log.with_epoch(record)
        logger.info(f"Epoch {epoch}: lr={record.lr:g} objective={record.objective:.6f}")
        if on_epoch is not None:
            on_epoch(record)
    return FitResult(weights=weights, log=log)
