"""Power-law feature computation and global mean/variance normalization.

Corpus statistics are always computed from raw power-mel features, before
any masking, so every utterance is normalized against unmasked data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .dsp import EnergyMatrix
from .errors import EmptyCorpus, ShapeMismatch

STAGE_RAW = "raw_power_mel"
STAGE_MEAN_SUBTRACTED = "mean_subtracted"
STAGE_FINAL = "final"

# std floor keeps divide_std total on degenerate constant channels
STD_FLOOR = 1e-8


@dataclass(frozen=True)
class FeatureMatrix:
    """An (M, C) feature matrix with its pipeline stage."""

    values: np.ndarray
    utterance_id: str
    stage: str = STAGE_RAW

    @property
    def num_frames(self) -> int:
        return int(self.values.shape[0])

    @property
    def num_channels(self) -> int:
        return int(self.values.shape[1])


@dataclass(frozen=True)
class GlobalStats:
    """Per-channel corpus mean and (floored) population standard deviation."""

    mean: np.ndarray
    std: np.ndarray
    num_frames_seen: int

    def __post_init__(self):
        if np.any(self.std <= 0):
            raise ValueError("std must be strictly positive (flooring failed?)")

    @property
    def num_channels(self) -> int:
        return int(self.mean.shape[0])


class StatsAccumulator:
    """One-pass per-channel mean/variance accumulator.

    Uses the Welford/Chan update so partial accumulators from parallel
    workers merge without a second pass over the data.
    """

    def __init__(self):
        self.count = 0
        self._mean = None
        self._m2 = None

    def update(self, features: FeatureMatrix | np.ndarray) -> None:
        values = np.asarray(getattr(features, "values", features), dtype=np.float64)
        if values.size == 0:
            return
        batch_count = values.shape[0]
        batch_mean = values.mean(axis=0)
        batch_m2 = ((values - batch_mean) ** 2).sum(axis=0)
        self._combine(batch_count, batch_mean, batch_m2)

    def merge(self, other: "StatsAccumulator") -> None:
        if other.count:
            self._combine(other.count, other._mean, other._m2)

    def _combine(self, count: int, mean: np.ndarray, m2: np.ndarray) -> None:
        if self.count == 0:
            self.count = count
            self._mean = mean.copy()
            self._m2 = m2.copy()
            return
        if mean.shape != self._mean.shape:
            raise ShapeMismatch(
                f"channel count changed mid-corpus: {mean.shape[0]} vs {self._mean.shape[0]}"
            )
        total = self.count + count
        delta = mean - self._mean
        self._mean = self._mean + delta * (count / total)
        self._m2 = self._m2 + m2 + delta * delta * (self.count * count / total)
        self.count = total

    def finalize(self) -> GlobalStats:
        if self.count == 0:
            raise EmptyCorpus("no frames accumulated")
        variance = self._m2 / self.count  # population variance
        std = np.maximum(np.sqrt(variance), STD_FLOOR)
        return GlobalStats(mean=self._mean.copy(), std=std, num_frames_seen=self.count)


def power_mel(energies: EnergyMatrix, exponent: float) -> FeatureMatrix:
    """Elementwise power-law compression of filterbank energies."""
    if exponent <= 0:
        raise ValueError(f"exponent must be > 0, got {exponent}")
    values = np.asarray(energies.values, dtype=np.float64) ** exponent
    return FeatureMatrix(values=values, utterance_id=energies.utterance_id, stage=STAGE_RAW)


def compute_global_stats(corpus: Iterable[FeatureMatrix]) -> GlobalStats:
    """Per-channel mean and population std over all frames of all utterances."""
    acc = StatsAccumulator()
    for features in corpus:
        acc.update(features)
    return acc.finalize()


def _check_channels(features: FeatureMatrix, stats: GlobalStats) -> None:
    if features.num_channels != stats.num_channels:
        raise ShapeMismatch(
            f"{features.utterance_id}: {features.num_channels} channels vs "
            f"stats with {stats.num_channels}"
        )


def subtract_mean(features: FeatureMatrix, stats: GlobalStats) -> FeatureMatrix:
    """Subtract the per-channel corpus mean (applied before masking)."""
    _check_channels(features, stats)
    return FeatureMatrix(
        values=features.values - stats.mean,
        utterance_id=features.utterance_id,
        stage=STAGE_MEAN_SUBTRACTED,
    )


def divide_std(features: FeatureMatrix, stats: GlobalStats) -> FeatureMatrix:
    """Divide by the per-channel corpus standard deviation."""
    _check_channels(features, stats)
    return FeatureMatrix(
        values=features.values / stats.std,
        utterance_id=features.utterance_id,
        stage=STAGE_FINAL,
    )
