"""Measurement-tolerance regions and their discretization.

A reported value x with tolerance fraction r is acceptable anywhere in
[x(1-r), x(1+r)]. That region is discretized with a fixed step fraction
s into scales delta_j = j*s for j = 1..N with N = r/s (s must divide r).
Perturbed copies of the training data at scale delta_j form dataset D_j;
D_0 is the untouched source data. Targets are never perturbed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .data import MEASURES, Dataset, NormalizationStats
from .errors import InvalidArgumentError, ShapeError
from .rng import check_seed, spawn_generator

ALL_CORNERS = "all-corners"
RANDOM_PER_SAMPLE = "random-per-sample"
FIXED_POSITIVE = "fixed-positive"

MAX_CORNER_SLOTS = 12


@dataclass(frozen=True)
class ImprecisionSpec:
    """Tolerance fraction r and discretization step s, with s dividing r."""

    r: float
    s: float

    def __post_init__(self):
        if not (0.0 < self.r < 1.0):
            raise InvalidArgumentError(f"tolerance fraction r must be in (0, 1), got {self.r}")
        if not (0.0 < self.s <= self.r):
            raise InvalidArgumentError(f"step s must be in (0, r], got s={self.s}, r={self.r}")
        n = round(self.r / self.s)
        if n < 1 or abs(n * self.s - self.r) > 1e-9:
            raise InvalidArgumentError(
                f"step s={self.s} must divide the tolerance r={self.r}"
            )

    @property
    def n_scales(self) -> int:
        return round(self.r / self.s)


def delta_sequence(spec: ImprecisionSpec) -> np.ndarray:
    """Scales j*s for j = 1..N, strictly increasing up to r."""
    return spec.s * np.arange(1, spec.n_scales + 1)


@dataclass(frozen=True)
class SignStrategy:
    """How the +- in a perturbation is resolved per feature slot."""

    kind: str
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in (ALL_CORNERS, RANDOM_PER_SAMPLE, FIXED_POSITIVE):
            raise InvalidArgumentError(f"unknown sign strategy {self.kind!r}")
        if self.kind == RANDOM_PER_SAMPLE:
            check_seed(self.seed, "sign strategy seed")

    @classmethod
    def all_corners(cls) -> "SignStrategy":
        return cls(ALL_CORNERS)

    @classmethod
    def random(cls, seed: int) -> "SignStrategy":
        return cls(RANDOM_PER_SAMPLE, seed)

    @classmethod
    def fixed_positive(cls) -> "SignStrategy":
        return cls(FIXED_POSITIVE)


def perturb(x, delta: float, signs) -> np.ndarray:
    """Elementwise x * (1 + sign * delta); signs must be +-1 of x's shape."""
    x = np.asarray(x, dtype=np.float64)
    signs = np.asarray(signs, dtype=np.float64)
    if signs.shape != x.shape:
        raise ShapeError(f"signs shape {signs.shape} does not match input shape {x.shape}")
    if not np.all(np.abs(signs) == 1.0):
        raise InvalidArgumentError("signs must be +1 or -1")
    if not (0.0 <= delta < 1.0):
        raise InvalidArgumentError(f"scale must be in [0, 1), got {delta}")
    return x * (1.0 + signs * delta)


@dataclass(frozen=True)
class ImpreciseSample:
    base_id: int
    delta_index: int
    features: np.ndarray  # (T, M)
    target: np.ndarray    # (M,)


@dataclass(frozen=True)
class ScaledDataset:
    """All perturbed samples sharing one scale (the spec's D_j)."""

    delta_index: int
    delta: float
    features: np.ndarray   # (k, T, M)
    targets: np.ndarray    # (k, M)
    base_ids: np.ndarray   # (k,)

    def __len__(self) -> int:
        return self.features.shape[0]

    def samples(self) -> Iterator[ImpreciseSample]:
        for i in range(len(self)):
            yield ImpreciseSample(
                int(self.base_ids[i]), self.delta_index, self.features[i], self.targets[i]
            )


@dataclass(frozen=True)
class ImpreciseDatasets:
    """The family D_0..D_N; D_0 shares the source arrays untouched."""

    spec: ImprecisionSpec
    strategy: SignStrategy
    stages: tuple[ScaledDataset, ...]

    def __len__(self) -> int:
        return len(self.stages)

    def __iter__(self) -> Iterator[ScaledDataset]:
        return iter(self.stages)


def _corner_signs(slots: int) -> np.ndarray:
    idx = np.arange(2 ** slots, dtype=np.uint32)[:, None]
    bits = (idx >> np.arange(slots, dtype=np.uint32)[None, :]) & 1
    return bits.astype(np.float64) * 2.0 - 1.0


def generate_datasets(
    data: Dataset, spec: ImprecisionSpec, strategy: SignStrategy
) -> ImpreciseDatasets:
    """Build D_0..D_N from a source dataset.

    all-corners emits every sign combination over the T*M feature slots
    (guarded to at most 2^12 per base sample); random-per-sample emits
    one copy per base per scale with independently drawn signs, seeded;
    fixed-positive emits one all-plus copy. Deterministic throughout.
    """
    n, t_len, m = data.features.shape
    deltas = delta_sequence(spec)
    slots = t_len * m
    stages = [
        ScaledDataset(0, 0.0, data.features, data.targets, data.patient_ids)
    ]
    rng = None
    corner = None
    if strategy.kind == ALL_CORNERS:
        if slots > MAX_CORNER_SLOTS:
            raise InvalidArgumentError(
                f"all-corners needs T*M <= {MAX_CORNER_SLOTS} sign slots, got {slots}"
            )
        corner = _corner_signs(slots).reshape(-1, t_len, m)
    elif strategy.kind == RANDOM_PER_SAMPLE:
        rng = spawn_generator(strategy.seed)

    for j, delta in enumerate(deltas, start=1):
        if strategy.kind == ALL_CORNERS:
            k = corner.shape[0]
            feats = data.features[:, None] * (1.0 + corner[None] * delta)
            feats = feats.reshape(n * k, t_len, m)
            targs = np.repeat(data.targets, k, axis=0)
            ids = np.repeat(data.patient_ids, k)
        elif strategy.kind == RANDOM_PER_SAMPLE:
            signs = rng.integers(0, 2, size=(n, t_len, m)).astype(np.float64) * 2.0 - 1.0
            feats = data.features * (1.0 + signs * delta)
            targs = data.targets
            ids = data.patient_ids
        else:
            feats = data.features * (1.0 + delta)
            targs = data.targets
            ids = data.patient_ids
        feats = np.ascontiguousarray(feats)
        feats.setflags(write=False)
        stages.append(ScaledDataset(j, float(delta), feats, targs, ids))
    return ImpreciseDatasets(spec, strategy, tuple(stages))


def standardize_stages(
    datasets: ImpreciseDatasets, stats: NormalizationStats
) -> ImpreciseDatasets:
    """Map every stage into model space. Perturbations are applied to raw
    lab values, so this always runs after generate_datasets."""
    stages = tuple(
        ScaledDataset(
            st.delta_index,
            st.delta,
            stats.standardize(st.features),
            stats.standardize(st.targets),
            st.base_ids,
        )
        for st in datasets.stages
    )
    return ImpreciseDatasets(datasets.spec, datasets.strategy, stages)


def save_imprecise_csv(datasets: ImpreciseDatasets, path) -> None:
    """Dataset CSV schema plus base_id and delta_index columns; each
    imprecise sample gets a fresh sequential patient_id."""
    header = ["patient_id", "step"] + list(MEASURES) + ["is_target", "base_id", "delta_index"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        next_id = 0
        for stage in datasets.stages:
            t_len = stage.features.shape[1]
            for sample in stage.samples():
                extra = [sample.base_id, sample.delta_index]
                for t in range(t_len):
                    writer.writerow(
                        [next_id, t]
                        + [format(v, ".17g") for v in sample.features[t]]
                        + [0] + extra
                    )
                writer.writerow(
                    [next_id, t_len]
                    + [format(v, ".17g") for v in sample.target]
                    + [1] + extra
                )
                next_id += 1
