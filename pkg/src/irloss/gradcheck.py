"""Finite-difference oracle for the full tolerance-weighted objective.

Central differences at a configurable epsilon are compared against the
analytic BPTT gradients, parameter by parameter. Intended for models
small enough that O(P) extra loss evaluations are cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .imprecision import ImpreciseDatasets, ScaledDataset
from .loss import _as_weights, _check_alpha, total_loss, total_loss_and_grads
from .model import ModelParams, forward_batch


@dataclass(frozen=True)
class GradcheckReport:
    """Worst relative disagreement plus any samples excluded from the check."""

    max_rel_error: float
    n_params: int
    excluded: tuple[tuple[int, int], ...]  # (stage index, sample index)


def _find_ties(params: ModelParams, datasets: ImpreciseDatasets, tol: float):
    """Samples where some measure prediction sits within tol of its target;
    the alpha=1 loss is non-differentiable there, so they are skipped."""
    ties = []
    for si, stage in enumerate(datasets.stages):
        preds, _ = forward_batch(params, stage.features, "eval")
        gaps = np.min(np.abs(preds - stage.targets), axis=1)
        for idx in np.nonzero(gaps <= tol)[0]:
            ties.append((si, int(idx)))
    return ties


def _drop_samples(datasets: ImpreciseDatasets, ties) -> ImpreciseDatasets:
    by_stage: dict[int, set[int]] = {}
    for si, idx in ties:
        by_stage.setdefault(si, set()).add(idx)
    stages = []
    for si, stage in enumerate(datasets.stages):
        drop = by_stage.get(si)
        if not drop:
            stages.append(stage)
            continue
        keep = np.array([i for i in range(len(stage)) if i not in drop], dtype=np.intp)
        if keep.size == 0:
            raise InvalidArgumentError(
                f"every sample of stage {si} sits on an alpha=1 tie; nothing to check"
            )
        stages.append(
            ScaledDataset(
                stage.delta_index, stage.delta,
                stage.features[keep], stage.targets[keep], stage.base_ids[keep],
            )
        )
    return ImpreciseDatasets(datasets.spec, datasets.strategy, tuple(stages))


def gradcheck(params: ModelParams, datasets: ImpreciseDatasets, weights,
              alpha=2, eps: float = 1e-5) -> GradcheckReport:
    """Compare BPTT gradients of the full objective against central
    finite differences; returns the worst relative error
    |analytic - numeric| / max(1, |numeric|) over all parameters."""
    alpha = _check_alpha(alpha)
    if params.dropout != 0.0:
        raise InvalidArgumentError(
            "gradient check requires dropout 0 (the objective must be deterministic)"
        )
    if eps <= 0:
        raise InvalidArgumentError(f"epsilon must be positive, got {eps}")
    _as_weights(weights, len(datasets.stages))

    excluded: tuple[tuple[int, int], ...] = ()
    if alpha == 1:
        ties = _find_ties(params, datasets, tol=eps)
        if ties:
            excluded = tuple(ties)
            datasets = _drop_samples(datasets, ties)

    _, analytic = total_loss_and_grads(params, datasets, weights, alpha)
    arrays = [a.copy() for a in params.arrays()]
    worst = 0.0
    n_checked = 0
    for k, arr in enumerate(arrays):
        flat = arr.reshape(-1)
        a_flat = analytic.values[k].reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            lo_hi = total_loss(params.with_arrays(arrays), datasets, weights, alpha)
            flat[idx] = orig - eps
            lo_lo = total_loss(params.with_arrays(arrays), datasets, weights, alpha)
            flat[idx] = orig
            numeric = (lo_hi - lo_lo) / (2.0 * eps)
            rel = abs(a_flat[idx] - numeric) / max(1.0, abs(numeric))
            if rel > worst:
                worst = rel
            n_checked += 1
    return GradcheckReport(max_rel_error=worst, n_params=n_checked, excluded=excluded)
