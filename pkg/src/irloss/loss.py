"""Training losses: the plain per-sample loss, decreasing weight vectors
standing in for the center-peaked probability over a tolerance region,
and the weighted per-scale losses that sum to the full objective.

With a single scale (N=0) and weight [1.0] the objective reduces exactly
to the plain loss, so the least-squares baseline is the degenerate case
of the same code path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, ShapeError
from .imprecision import ImpreciseDatasets, ScaledDataset
from .model import Gradients, ModelParams, add_gradients, backward_batch, forward_batch

_CHUNK = 1024


def _check_alpha(alpha) -> int:
    if alpha not in (1, 2):
        raise InvalidArgumentError(f"alpha must be 1 or 2, got {alpha!r}")
    return int(alpha)


def base_loss(y, pred, alpha=2) -> float:
    """Sum over measures of |y_m - pred_m|^alpha for one sample."""
    alpha = _check_alpha(alpha)
    y = np.asarray(y, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if y.shape != pred.shape or y.ndim != 1:
        raise ShapeError(f"targets {y.shape} and predictions {pred.shape} must be equal-width vectors")
    d = pred - y
    if alpha == 2:
        return float(np.sum(d * d))
    return float(np.sum(np.abs(d)))


def _pointwise(y: np.ndarray, pred: np.ndarray, alpha: int):
    """Per-sample loss values (B,) and dLoss/dpred (B, M).

    alpha=1 uses the sign subgradient, 0 exactly at ties.
    """
    d = pred - y
    if alpha == 2:
        return np.sum(d * d, axis=-1), 2.0 * d
    return np.sum(np.abs(d), axis=-1), np.sign(d)


@dataclass(frozen=True)
class WeightVector:
    """Normalized, strictly decreasing weights w_0..w_N."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, copy=True)
        if vals.ndim != 1 or vals.size == 0:
            raise InvalidArgumentError("weights must be a non-empty vector")
        if np.any(vals <= 0):
            raise InvalidArgumentError("weights must be strictly positive")
        if np.any(np.diff(vals) >= 0):
            raise InvalidArgumentError("weights must be strictly decreasing")
        if abs(vals.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError(f"weights must sum to 1, got {vals.sum()!r}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, idx):
        return self.values[idx]


def weight_vector(n_scales: int, scheme: str = "linear", *, lam: float = 0.5,
                  custom=None) -> WeightVector:
    """Build w_0..w_N. 'linear' decays as N+1-j, 'exponential' as lam^j;
    both are normalized to sum 1. 'custom' validates a caller-given list."""
    if n_scales < 0:
        raise InvalidArgumentError(f"n_scales must be >= 0, got {n_scales}")
    if scheme == "custom" or custom is not None:
        if custom is None:
            raise InvalidArgumentError("custom scheme requires an explicit weight list")
        vals = np.asarray(custom, dtype=np.float64)
        if vals.size != n_scales + 1:
            raise InvalidArgumentError(
                f"custom weights must have length {n_scales + 1}, got {vals.size}"
            )
        return WeightVector(vals)
    if scheme == "linear":
        raw = np.arange(n_scales + 1, 0, -1, dtype=np.float64)
    elif scheme == "exponential":
        if not (0.0 < lam < 1.0):
            raise InvalidArgumentError(f"exponential decay factor must be in (0, 1), got {lam}")
        raw = lam ** np.arange(n_scales + 1, dtype=np.float64)
    else:
        raise InvalidArgumentError(f"unknown weight scheme {scheme!r}")
    return WeightVector(raw / raw.sum())


@dataclass(frozen=True)
class LossConfig:
    """Objective shape: exponent, scale count, and weight scheme."""

    alpha: int = 2
    scheme: str = "linear"
    lam: float = 0.5
    custom: tuple | None = None

    def __post_init__(self):
        _check_alpha(self.alpha)

    def weights_for(self, n_scales: int) -> WeightVector:
        return weight_vector(n_scales, self.scheme, lam=self.lam, custom=self.custom)


def _as_weights(weights, expected: int) -> np.ndarray:
    vals = weights.values if isinstance(weights, WeightVector) else np.asarray(
        weights, dtype=np.float64
    )
    if vals.ndim != 1 or vals.size != expected:
        raise InvalidArgumentError(
            f"need {expected} weights (one per scale), got {vals.size}"
        )
    return vals


def weighted_batch_loss(params: ModelParams, features, targets, weight: float,
                        alpha=2, mode: str = "eval", seed=None):
    """Weighted loss and exact gradients over one batch of sequences."""
    alpha = _check_alpha(alpha)
    features = np.asarray(features, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    preds, cache = forward_batch(params, features, mode, seed)
    if targets.shape != preds.shape:
        raise ShapeError(f"targets {targets.shape} do not match predictions {preds.shape}")
    vals, dpred = _pointwise(targets, preds, alpha)
    value = float(weight * vals.sum())
    grads = backward_batch(params, cache, weight * dpred)
    return value, grads


def stage_loss(params: ModelParams, stage: ScaledDataset, weight: float, alpha=2):
    """Deterministic (dropout-free) loss and gradients over one scale's
    dataset: weight * sum over samples of the per-sample loss."""
    alpha = _check_alpha(alpha)
    if len(stage) == 0:
        raise InvalidArgumentError("stage dataset must be non-empty")
    total = 0.0
    grads = None
    for lo in range(0, len(stage), _CHUNK):
        value, g = weighted_batch_loss(
            params, stage.features[lo:lo + _CHUNK], stage.targets[lo:lo + _CHUNK],
            weight, alpha, mode="eval",
        )
        total += value
        grads = g if grads is None else add_gradients(grads, g)
    return total, grads


def stage_loss_value(params: ModelParams, stage: ScaledDataset, weight: float, alpha=2) -> float:
    """Forward-only variant of stage_loss."""
    alpha = _check_alpha(alpha)
    total = 0.0
    for lo in range(0, len(stage), _CHUNK):
        preds, _ = forward_batch(params, stage.features[lo:lo + _CHUNK], "eval")
        vals, _ = _pointwise(stage.targets[lo:lo + _CHUNK], preds, alpha)
        total += float(vals.sum())
    return weight * total


def total_loss(params: ModelParams, datasets: ImpreciseDatasets, weights, alpha=2) -> float:
    """Full objective: sum over scales of the weighted per-scale losses."""
    vals = _as_weights(weights, len(datasets.stages))
    return sum(
        stage_loss_value(params, stage, w, alpha)
        for stage, w in zip(datasets.stages, vals)
    )


def total_loss_and_grads(params: ModelParams, datasets: ImpreciseDatasets, weights, alpha=2):
    """Full objective with exact gradients."""
    vals = _as_weights(weights, len(datasets.stages))
    total = 0.0
    grads = Gradients.zeros_like(params)
    for stage, w in zip(datasets.stages, vals):
        value, g = stage_loss(params, stage, w, alpha)
        total += value
        grads = add_gradients(grads, g)
    return total, grads
