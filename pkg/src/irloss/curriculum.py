"""Staged training over the scale datasets D_0..D_N.

Stage 0 fits the untouched data from the given initialization; stage j
warm-starts from the previous stage's parameters and minimizes that
scale's weighted loss. Adam moments are reset at stage boundaries (each
stage is its own minimization). The least-squares baseline is the same
loop run on a single stage with weight 1.0, which makes the degenerate
N=0 case byte-identical to the baseline by construction.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import DivergenceError, InvalidArgumentError
from .imprecision import ImpreciseDatasets, ScaledDataset
from .loss import _as_weights, _check_alpha, weighted_batch_loss
from .model import AdamState, ModelParams, adam_step, params_digest
from .rng import STREAM_DROPOUT, STREAM_SHUFFLE, check_seed, spawn_generator


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for one training run (either loss)."""

    epochs_per_stage: int | tuple[int, ...] = 5
    batch_size: int = 64
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    alpha: int = 2
    seed: int = 0

    def __post_init__(self):
        epochs = self.epochs_per_stage
        if isinstance(epochs, (list, tuple)):
            epochs = tuple(int(e) for e in epochs)
            object.__setattr__(self, "epochs_per_stage", epochs)
            if not epochs or any(e < 1 for e in epochs):
                raise InvalidArgumentError("every stage needs at least one epoch")
        elif int(epochs) < 1:
            raise InvalidArgumentError(f"epochs_per_stage must be >= 1, got {epochs}")
        else:
            object.__setattr__(self, "epochs_per_stage", int(epochs))
        if self.batch_size < 1:
            raise InvalidArgumentError(f"batch_size must be >= 1, got {self.batch_size}")
        _check_alpha(self.alpha)
        check_seed(self.seed)

    def stage_epochs(self, n_stages: int) -> tuple[int, ...]:
        if isinstance(self.epochs_per_stage, tuple):
            if len(self.epochs_per_stage) != n_stages:
                raise InvalidArgumentError(
                    f"per-stage epoch list has {len(self.epochs_per_stage)} entries "
                    f"for {n_stages} stages"
                )
            return self.epochs_per_stage
        return (self.epochs_per_stage,) * n_stages


@dataclass
class StageReport:
    """What happened inside one stage of the schedule."""

    index: int
    delta: float
    weight: float
    epoch_losses: list[float]
    seconds: float
    start_digest: str
    end_digest: str

    @property
    def final_loss(self) -> float:
        return self.epoch_losses[-1]


@dataclass
class TrainReport:
    seed: int
    stages: list[StageReport] = field(default_factory=list)
    final_params: ModelParams | None = None

    @property
    def wall_clock(self) -> float:
        return sum(s.seconds for s in self.stages)


def _train_stages(stages, weights, deltas, model_init: ModelParams, cfg: TrainConfig,
                  keep_stage_params: bool = False):
    epochs = cfg.stage_epochs(len(stages))
    params = model_init
    report = TrainReport(seed=cfg.seed)
    stage_params = []
    for j, (stage, w, delta) in enumerate(zip(stages, weights, deltas)):
        if len(stage) == 0:
            raise InvalidArgumentError(f"stage {j} dataset is empty")
        t0 = time.perf_counter()
        start_digest = params_digest(params)
        adam = AdamState.init(params, lr=cfg.lr, beta1=cfg.beta1,
                              beta2=cfg.beta2, eps=cfg.adam_eps)
        n = len(stage)
        epoch_losses = []
        for epoch in range(epochs[j]):
            order = spawn_generator(cfg.seed, STREAM_SHUFFLE, j, epoch).permutation(n)
            epoch_loss = 0.0
            for bi, lo in enumerate(range(0, n, cfg.batch_size)):
                idx = order[lo:lo + cfg.batch_size]
                value, grads = weighted_batch_loss(
                    params, stage.features[idx], stage.targets[idx],
                    float(w), cfg.alpha, mode="train",
                    seed=None if params.dropout == 0.0
                    else _dropout_seed(cfg.seed, j, epoch, bi),
                )
                if not np.isfinite(value):
                    raise DivergenceError(
                        f"non-finite loss at stage {j}, epoch {epoch}",
                        stage=j, epoch=epoch,
                    )
                params, adam = adam_step(params, grads, adam)
                epoch_loss += value
            epoch_losses.append(epoch_loss)
        report.stages.append(StageReport(
            index=j, delta=float(delta), weight=float(w),
            epoch_losses=epoch_losses, seconds=time.perf_counter() - t0,
            start_digest=start_digest, end_digest=params_digest(params),
        ))
        if keep_stage_params:
            stage_params.append(params)
    report.final_params = params
    if keep_stage_params:
        return params, report, stage_params
    return params, report


def _dropout_seed(seed: int, stage: int, epoch: int, batch: int) -> tuple:
    return (seed, STREAM_DROPOUT, stage, epoch, batch)


def train_baseline(data: Dataset | ScaledDataset, model_init: ModelParams,
                   cfg: TrainConfig):
    """Minimize the plain summed loss over the source data only."""
    if isinstance(data, Dataset):
        stage = ScaledDataset(0, 0.0, data.features, data.targets, data.patient_ids)
    else:
        stage = data
    if isinstance(cfg.epochs_per_stage, tuple) and len(cfg.epochs_per_stage) != 1:
        raise InvalidArgumentError("baseline training takes a single stage epoch count")
    return _train_stages([stage], [1.0], [0.0], model_init, cfg)


def train_curriculum(datasets: ImpreciseDatasets, weights, model_init: ModelParams,
                     cfg: TrainConfig, keep_stage_params: bool = False):
    """Run the full schedule over D_0..D_N, warm-starting each stage."""
    vals = _as_weights(weights, len(datasets.stages))
    if np.any(np.diff(vals) >= 0):
        raise InvalidArgumentError(
            "stage weights must be strictly decreasing (training runs from the "
            "center of the tolerance region outward)"
        )
    deltas = [stage.delta for stage in datasets.stages]
    return _train_stages(datasets.stages, vals, deltas, model_init, cfg,
                         keep_stage_params=keep_stage_params)


def save_train_report(report: TrainReport, path) -> None:
    """One JSON record per line: a meta record, then one per stage.

    Timing is deliberately omitted so report files are byte-reproducible;
    wall-clock lives in the run manifest.
    """
    with open(path, "w") as fh:
        meta = {
            "record": "meta",
            "seed": report.seed,
            "n_stages": len(report.stages),
            "final_digest": report.stages[-1].end_digest if report.stages else None,
        }
        fh.write(json.dumps(meta, sort_keys=True) + "\n")
        for s in report.stages:
            fh.write(json.dumps({
                "record": "stage",
                "index": s.index,
                "delta": s.delta,
                "weight": s.weight,
                "epoch_losses": s.epoch_losses,
                "start_digest": s.start_digest,
                "end_digest": s.end_digest,
            }, sort_keys=True) + "\n")


def load_train_report(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
