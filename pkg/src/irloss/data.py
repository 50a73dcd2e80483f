"""Patient time-series data: synthetic generation, CSV round-trip,
train/test split, normalization statistics, and reference-range labels.

The synthetic generator replaces a private clinical dataset. Each patient
carries a latent severity following a mean-reverting AR(1) process; the
four blood measures are monotone exponential links of severity (TSH
inversely, the others positively) with multiplicative log-normal noise,
so every value is strictly positive by construction.

CSV schema (header required):

    patient_id, step, FT3, FT4, TSH, TRAb, is_target

Input steps are 0..T-1 with is_target=0; exactly one row per patient has
is_target=1 and carries the prediction-horizon values. Reference ranges
live in a separate key-value CSV: measure, lower, upper.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import InvalidArgumentError, ParseError
from .rng import check_seed

MEASURES = ("FT3", "FT4", "TSH", "TRAb")
N_MEASURES = len(MEASURES)

NORMAL = "normal"
ABNORMAL = "abnormal"

_CSV_HEADER = ["patient_id", "step"] + list(MEASURES) + ["is_target"]


@dataclass(frozen=True)
class ReferenceRange:
    """Closed interval of clinically normal values for one measure."""

    lower: float
    upper: float

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise InvalidArgumentError("reference bounds must be finite")
        if self.lower < 0 or self.lower >= self.upper:
            raise InvalidArgumentError(
                f"need 0 <= lower < upper, got [{self.lower}, {self.upper}]"
            )


def default_reference_ranges() -> dict[str, ReferenceRange]:
    """Standard adult ranges; override via a ranges file where needed."""
    return {
        "FT3": ReferenceRange(3.1, 6.8),
        "FT4": ReferenceRange(12.0, 22.0),
        "TSH": ReferenceRange(0.27, 4.2),
        "TRAb": ReferenceRange(0.0, 1.75),
    }


def label(value: float, ref: ReferenceRange) -> str:
    """Normal iff lower <= value <= upper (closed at both bounds)."""
    return NORMAL if ref.lower <= value <= ref.upper else ABNORMAL


def range_arrays(ranges: dict[str, ReferenceRange]) -> tuple[np.ndarray, np.ndarray]:
    """(lowers, uppers) aligned with MEASURES order."""
    missing = [m for m in MEASURES if m not in ranges]
    if missing:
        raise InvalidArgumentError(f"reference ranges missing measures: {missing}")
    lowers = np.array([ranges[m].lower for m in MEASURES])
    uppers = np.array([ranges[m].upper for m in MEASURES])
    return lowers, uppers


@dataclass(frozen=True)
class NormalizationStats:
    """Per-measure mean/std computed on a training split."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.shape != (N_MEASURES,) or std.shape != (N_MEASURES,):
            raise InvalidArgumentError("stats must have one entry per measure")
        if np.any(std <= 0):
            raise InvalidArgumentError("stds must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def standardize(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.std

    def destandardize(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self.std + self.mean


def compute_stats(features: np.ndarray) -> NormalizationStats:
    """Stats over all samples and time steps; stds floored at 1e-12."""
    feats = np.asarray(features, dtype=np.float64)
    mean = feats.mean(axis=(0, 1))
    std = np.maximum(feats.std(axis=(0, 1)), 1e-12)
    return NormalizationStats(mean, std)


@dataclass(frozen=True)
class PatientRecord:
    patient_id: int
    inputs: np.ndarray   # (T, M)
    target: np.ndarray   # (M,)


@dataclass(frozen=True)
class Dataset:
    """Homogeneous collection of patient records as dense arrays."""

    features: np.ndarray            # (n, T, M)
    targets: np.ndarray             # (n, M)
    patient_ids: np.ndarray         # (n,)
    stats: NormalizationStats | None = None

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64, copy=True)
        targs = np.array(self.targets, dtype=np.float64, copy=True)
        ids = np.array(self.patient_ids, dtype=np.int64, copy=True)
        if feats.ndim != 3 or feats.shape[2] != N_MEASURES:
            raise InvalidArgumentError(f"features must be (n, T, {N_MEASURES}), got {feats.shape}")
        n = feats.shape[0]
        if n == 0:
            raise InvalidArgumentError("dataset must contain at least one record")
        if targs.shape != (n, N_MEASURES):
            raise InvalidArgumentError(f"targets must be ({n}, {N_MEASURES}), got {targs.shape}")
        if ids.shape != (n,):
            raise InvalidArgumentError(f"patient_ids must be ({n},), got {ids.shape}")
        if len(np.unique(ids)) != n:
            raise InvalidArgumentError("patient ids must be unique")
        if not (np.all(feats > 0) and np.all(targs > 0)):
            raise InvalidArgumentError("all measure values must be strictly positive")
        for arr in (feats, targs, ids):
            arr.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "targets", targs)
        object.__setattr__(self, "patient_ids", ids)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def seq_len(self) -> int:
        return self.features.shape[1]

    def records(self) -> Iterator[PatientRecord]:
        for i in range(len(self)):
            yield PatientRecord(int(self.patient_ids[i]), self.features[i], self.targets[i])

    def with_stats(self, stats: NormalizationStats) -> "Dataset":
        return Dataset(self.features, self.targets, self.patient_ids, stats)


@dataclass(frozen=True)
class SyntheticConfig:
    """Controls the synthetic patient generator."""

    n_patients: int = 2460
    seq_len: int = 6
    horizon: int = 24
    ar_coeff: float = 0.7
    severity_noise: float = 0.15
    meas_noise: float = 0.05
    seed: int = 1
    link_base: tuple[float, float, float, float] = (4.6, 16.2, 1.1, 0.8)
    link_slope: tuple[float, float, float, float] = (0.35, 0.30, -0.90, 0.85)

    def __post_init__(self):
        if self.n_patients <= 0 or self.seq_len <= 0 or self.horizon <= 0:
            raise InvalidArgumentError("patient count, sequence length and horizon must be positive")
        if not (0.0 < self.ar_coeff < 1.0):
            raise InvalidArgumentError("ar_coeff must lie in (0, 1)")
        if self.severity_noise < 0 or self.meas_noise < 0:
            raise InvalidArgumentError("noise scales must be non-negative")
        if len(self.link_base) != N_MEASURES or len(self.link_slope) != N_MEASURES:
            raise InvalidArgumentError("link parameters need one entry per measure")
        if any(b <= 0 for b in self.link_base):
            raise InvalidArgumentError("link bases must be positive")
        check_seed(self.seed)


def severity_to_measures(z: float, cfg: SyntheticConfig) -> np.ndarray:
    """Noise-free measure levels at latent severity z."""
    base = np.asarray(cfg.link_base)
    slope = np.asarray(cfg.link_slope)
    return base * np.exp(slope * z)


def generate_synthetic(cfg: SyntheticConfig) -> Dataset:
    """Deterministic synthetic cohort; each patient owns a seeded substream."""
    total_steps = cfg.seq_len + cfg.horizon
    base = np.asarray(cfg.link_base)
    slope = np.asarray(cfg.link_slope)
    features = np.empty((cfg.n_patients, cfg.seq_len, N_MEASURES))
    targets = np.empty((cfg.n_patients, N_MEASURES))
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_patients)
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        mu = rng.normal()
        z = mu + cfg.severity_noise * rng.normal()
        for t in range(total_steps):
            if t > 0:
                z = mu + cfg.ar_coeff * (z - mu) + cfg.severity_noise * rng.normal()
            values = base * np.exp(slope * z + cfg.meas_noise * rng.normal(size=N_MEASURES))
            if t < cfg.seq_len:
                features[i, t] = values
            elif t == total_steps - 1:
                targets[i] = values
    ids = np.arange(cfg.n_patients, dtype=np.int64)
    return Dataset(features, targets, ids)


def split(dataset: Dataset, n_train: int) -> tuple[Dataset, Dataset]:
    """First n_train records by patient id; training stats attached to both."""
    n = len(dataset)
    if not (0 < n_train < n):
        raise InvalidArgumentError(f"n_train must be in (0, {n}), got {n_train}")
    order = np.argsort(dataset.patient_ids, kind="stable")
    tr, te = order[:n_train], order[n_train:]
    stats = compute_stats(dataset.features[tr])
    train = Dataset(dataset.features[tr], dataset.targets[tr], dataset.patient_ids[tr], stats)
    test = Dataset(dataset.features[te], dataset.targets[te], dataset.patient_ids[te], stats)
    return train, test


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_csv(dataset: Dataset, path) -> None:
    """Write the documented CSV schema; target rows use step = T."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        t_target = dataset.seq_len
        for rec in dataset.records():
            for t in range(dataset.seq_len):
                writer.writerow([rec.patient_id, t] + [_fmt(v) for v in rec.inputs[t]] + [0])
            writer.writerow([rec.patient_id, t_target] + [_fmt(v) for v in rec.target] + [1])


def load_csv(path) -> Dataset:
    """Parse the documented schema; any violation names the offending line."""
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("no records") from None
        if [h.strip() for h in header] != _CSV_HEADER:
            raise ParseError(f"bad header, expected {','.join(_CSV_HEADER)}", line=1)

        inputs: dict[int, list] = {}
        targets_rows: dict[int, np.ndarray] = {}
        order: list[int] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(_CSV_HEADER):
                raise ParseError(f"expected {len(_CSV_HEADER)} fields, got {len(row)}", line=lineno)
            try:
                pid = int(row[0])
                step = int(row[1])
                values = np.array([float(v) for v in row[2:6]])
                is_target = int(row[6])
            except ValueError as exc:
                raise ParseError(f"malformed value: {exc}", line=lineno) from None
            if not np.all(np.isfinite(values)) or np.any(values <= 0):
                raise ParseError("measure values must be positive and finite", line=lineno)
            if is_target not in (0, 1):
                raise ParseError(f"is_target must be 0 or 1, got {is_target}", line=lineno)
            if pid not in inputs:
                inputs[pid] = []
                order.append(pid)
            if is_target:
                if pid in targets_rows:
                    raise ParseError(f"duplicate target row for patient {pid}", line=lineno)
                targets_rows[pid] = values
            else:
                if step != len(inputs[pid]):
                    raise ParseError(
                        f"patient {pid}: expected input step {len(inputs[pid])}, got {step}",
                        line=lineno,
                    )
                inputs[pid].append(values)

        if not order:
            raise ParseError("no records")
        seq_len = len(inputs[order[0]])
        feats, targs = [], []
        for pid in order:
            if len(inputs[pid]) != seq_len:
                raise ParseError(
                    f"patient {pid} has {len(inputs[pid])} input steps, expected {seq_len}"
                )
            if pid not in targets_rows:
                raise ParseError(f"patient {pid} has no target row")
            if seq_len == 0:
                raise ParseError(f"patient {pid} has no input rows")
            feats.append(np.stack(inputs[pid]))
            targs.append(targets_rows[pid])
        return Dataset(np.stack(feats), np.stack(targs), np.array(order, dtype=np.int64))


def save_ranges(ranges: dict[str, ReferenceRange], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["measure", "lower", "upper"])
        for m in MEASURES:
            writer.writerow([m, _fmt(ranges[m].lower), _fmt(ranges[m].upper)])


def load_ranges(path) -> dict[str, ReferenceRange]:
    out: dict[str, ReferenceRange] = {}
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("no records") from None
        if [h.strip() for h in header] != ["measure", "lower", "upper"]:
            raise ParseError("bad header, expected measure,lower,upper", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError("expected 3 fields", line=lineno)
            name = row[0].strip()
            if name not in MEASURES:
                raise ParseError(f"unknown measure {name!r}", line=lineno)
            try:
                out[name] = ReferenceRange(float(row[1]), float(row[2]))
            except (ValueError, InvalidArgumentError) as exc:
                raise ParseError(str(exc), line=lineno) from None
    missing = [m for m in MEASURES if m not in out]
    if missing:
        raise ParseError(f"ranges file missing measures: {missing}")
    return out
