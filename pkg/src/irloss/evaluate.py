"""Evaluation under imprecise test inputs.

Accuracy compares normal/abnormal labels of predictions and targets
against reference ranges ("abnormal" is the positive class). Distance
accumulates |f(x_j) - y|^alpha over imprecise input variants drawn from
the test-time tolerance region. Sweeps repeat those metrics over a grid
of perturbation scales or over discretization steps.

Models are evaluated read-only. Perturbations are applied to raw lab
values before standardization; predictions are reported in raw units.
A plain callable (raw features (n, T, M) -> raw predictions (n, M)) is
accepted anywhere a model is, which keeps oracle predictors testable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .curriculum import TrainConfig, train_curriculum
from .data import Dataset, NormalizationStats, ReferenceRange, range_arrays
from .errors import InvalidArgumentError
from .imprecision import (
    ImprecisionSpec,
    SignStrategy,
    generate_datasets,
    standardize_stages,
)
from .loss import _check_alpha, weight_vector
from .model import ModelParams, forward_batch
from .rng import STREAM_EVAL, check_seed, spawn_generator

_CHUNK = 2048


@dataclass(frozen=True)
class EvalConfig:
    """Test-time perturbation grid and Distance settings."""

    delta_grid: tuple[float, ...] = tuple(0.01 * j for j in range(1, 11))
    samples_per_patient: int = 1
    alpha: int = 2
    seed: int = 9999
    ranges: dict[str, ReferenceRange] = field(default_factory=dict)

    def __post_init__(self):
        grid = tuple(float(d) for d in self.delta_grid)
        object.__setattr__(self, "delta_grid", grid)
        if any(d < 0 or d >= 1 for d in grid):
            raise InvalidArgumentError("perturbation scales must lie in [0, 1)")
        if self.samples_per_patient < 1:
            raise InvalidArgumentError("samples_per_patient must be >= 1")
        _check_alpha(self.alpha)
        check_seed(self.seed)


@dataclass(frozen=True)
class AccuracyResult:
    per_measure: dict[str, float]
    average: float
    counts: dict[str, dict[str, int]]  # measure -> {tp, tn, fp, fn}
    n_patients: int
    delta: float = 0.0


@dataclass(frozen=True)
class DistanceResult:
    total: float
    per_patient: float
    per_measure: dict[str, float]
    alpha: int
    n_variants: int


@dataclass(frozen=True)
class EvalReport:
    accuracy: AccuracyResult
    distance: DistanceResult | None
    model_id: str = ""
    delta: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class SweepRow:
    value: float
    model_label: str
    accuracy: AccuracyResult
    distance: DistanceResult | None = None


@dataclass(frozen=True)
class SweepReport:
    parameter: str
    rows: tuple[SweepRow, ...]
    slopes: dict[str, float] = field(default_factory=dict)


def predict(model, features, stats: NormalizationStats | None = None) -> np.ndarray:
    """Raw-unit predictions for raw-unit features (n, T, M)."""
    feats = np.asarray(features, dtype=np.float64)
    if callable(model):
        preds = np.asarray(model(feats), dtype=np.float64)
        if preds.shape != (feats.shape[0],) + (feats.shape[2],):
            raise InvalidArgumentError(
                f"predictor returned shape {preds.shape}, expected ({feats.shape[0]}, {feats.shape[2]})"
            )
        return preds
    z = stats.standardize(feats) if stats is not None else feats
    chunks = []
    for lo in range(0, z.shape[0], _CHUNK):
        out, _ = forward_batch(model, z[lo:lo + _CHUNK], "eval")
        chunks.append(out)
    preds = np.concatenate(chunks, axis=0)
    return stats.destandardize(preds) if stats is not None else preds


def perturb_features(features, delta: float, seed) -> np.ndarray:
    """One random-sign imprecise variant of every patient's raw inputs."""
    feats = np.asarray(features, dtype=np.float64)
    if delta == 0.0:
        return feats
    key = seed if isinstance(seed, tuple) else (check_seed(seed),)
    rng = spawn_generator(*key)
    signs = rng.integers(0, 2, size=feats.shape).astype(np.float64) * 2.0 - 1.0
    return feats * (1.0 + signs * delta)


def _label_counts(preds: np.ndarray, targets: np.ndarray, lowers, uppers):
    pred_abn = (preds < lowers) | (preds > uppers)
    true_abn = (targets < lowers) | (targets > uppers)
    tp = np.sum(pred_abn & true_abn, axis=0)
    tn = np.sum(~pred_abn & ~true_abn, axis=0)
    fp = np.sum(pred_abn & ~true_abn, axis=0)
    fn = np.sum(~pred_abn & true_abn, axis=0)
    return tp, tn, fp, fn


def accuracy(model, test: Dataset, ranges: dict[str, ReferenceRange],
             perturbation: tuple[float, int] | None = None) -> AccuracyResult:
    """Label accuracy per measure plus the macro average.

    perturbation, when given, is (delta, seed): inputs are perturbed at
    that scale with seeded random signs before prediction.
    """
    from .data import MEASURES

    lowers, uppers = range_arrays(ranges)
    feats = test.features
    delta = 0.0
    if perturbation is not None:
        delta, seed = perturbation
        feats = perturb_features(feats, float(delta), seed)
    preds = predict(model, feats, test.stats)
    tp, tn, fp, fn = _label_counts(preds, test.targets, lowers, uppers)
    n = len(test)
    per_measure = {m: float((tp[k] + tn[k]) / n) for k, m in enumerate(MEASURES)}
    counts = {
        m: {"tp": int(tp[k]), "tn": int(tn[k]), "fp": int(fp[k]), "fn": int(fn[k])}
        for k, m in enumerate(MEASURES)
    }
    return AccuracyResult(
        per_measure=per_measure,
        average=float(np.mean(list(per_measure.values()))),
        counts=counts,
        n_patients=n,
        delta=float(delta),
    )


def distance(model, test: Dataset, cfg: EvalConfig) -> DistanceResult:
    """Accumulated |prediction - target|^alpha over imprecise variants.

    For every patient, every grid scale, and every repeat, one
    random-sign variant is generated, predicted, and scored against the
    unperturbed target. Reported raw (the literal sum) and per patient.
    """
    from .data import MEASURES

    sums = np.zeros(len(MEASURES))
    n_variants = 0
    for j, delta in enumerate(cfg.delta_grid):
        for k in range(cfg.samples_per_patient):
            feats = perturb_features(
                test.features, float(delta), (cfg.seed, STREAM_EVAL, j, k)
            )
            preds = predict(model, feats, test.stats)
            diff = np.abs(preds - test.targets)
            sums += np.sum(diff ** cfg.alpha, axis=0)
            n_variants += 1
    total = float(sums.sum())
    return DistanceResult(
        total=total,
        per_patient=total / len(test),
        per_measure={m: float(sums[k]) for k, m in enumerate(MEASURES)},
        alpha=cfg.alpha,
        n_variants=n_variants,
    )


def _fit_slope(xs, ys) -> float:
    return float(np.polyfit(np.asarray(xs, dtype=np.float64),
                            np.asarray(ys, dtype=np.float64), 1)[0])


def stability_sweep(model_ir, model_ls, test: Dataset, delta_grid,
                    cfg: EvalConfig) -> SweepReport:
    """Accuracy and single-variant Distance of both models across a grid
    of test-time perturbation scales, on identical perturbed inputs.

    Also fits a least-squares line through (scale, average accuracy) per
    model; a shallower (less negative) slope means a more stable model.
    """
    from .data import MEASURES

    grid = sorted(float(d) for d in delta_grid)
    if any(d < 0 or d >= 1 for d in grid):
        raise InvalidArgumentError("perturbation scales must lie in [0, 1)")
    lowers, uppers = range_arrays(cfg.ranges)
    n = len(test)
    rows = []
    accs = {"ir": [], "ls": []}
    for j, delta in enumerate(grid):
        feats = perturb_features(test.features, delta, (cfg.seed, STREAM_EVAL, j))
        for label, model in (("ir", model_ir), ("ls", model_ls)):
            preds = predict(model, feats, test.stats)
            tp, tn, fp, fn = _label_counts(preds, test.targets, lowers, uppers)
            per_measure = {m: float((tp[k] + tn[k]) / n) for k, m in enumerate(MEASURES)}
            counts = {
                m: {"tp": int(tp[k]), "tn": int(tn[k]), "fp": int(fp[k]), "fn": int(fn[k])}
                for k, m in enumerate(MEASURES)
            }
            acc = AccuracyResult(
                per_measure=per_measure,
                average=float(np.mean(list(per_measure.values()))),
                counts=counts, n_patients=n, delta=delta,
            )
            sums = np.sum(np.abs(preds - test.targets) ** cfg.alpha, axis=0)
            total = float(sums.sum())
            dist = DistanceResult(
                total=total, per_patient=total / n,
                per_measure={m: float(sums[k]) for k, m in enumerate(MEASURES)},
                alpha=cfg.alpha, n_variants=1,
            )
            rows.append(SweepRow(value=delta, model_label=label,
                                 accuracy=acc, distance=dist))
            accs[label].append(acc.average)
    slopes = {label: _fit_slope(grid, accs[label]) for label in accs}
    return SweepReport(parameter="delta", rows=tuple(rows), slopes=slopes)


def granularity_sweep(train_data: Dataset, test_data: Dataset, s_values,
                      r: float, layer_sizes, output_dim: int, model_seed: int,
                      train_cfg: TrainConfig, eval_cfg: EvalConfig,
                      strategy_seed: int, weight_scheme: str = "linear",
                      dropout: float = 0.0) -> SweepReport:
    """Train one schedule per discretization step and report accuracy.

    Each step must divide the tolerance fraction; every run starts from
    the same seeded initialization so only the discretization varies.
    """
    from .model import init_params

    for s in s_values:
        ImprecisionSpec(float(r), float(s))  # validates divisibility up front
    if train_data.stats is None:
        raise InvalidArgumentError("training data must carry normalization stats")
    rows = []
    for s in sorted(float(s) for s in s_values):
        spec = ImprecisionSpec(float(r), s)
        datasets = generate_datasets(
            train_data, spec, SignStrategy.random(strategy_seed)
        )
        stages = standardize_stages(datasets, train_data.stats)
        weights = weight_vector(spec.n_scales, weight_scheme)
        init = init_params(layer_sizes, output_dim, model_seed, dropout)
        params, _ = train_curriculum(stages, weights, init, train_cfg)
        acc = accuracy(params, test_data, eval_cfg.ranges)
        rows.append(SweepRow(value=s, model_label="ir", accuracy=acc))
    return SweepReport(parameter="s", rows=tuple(rows))
