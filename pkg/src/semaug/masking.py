"""Small energy masking, its fixed-threshold variant, and input dropout.

The masking pipeline per utterance:

  1. draw a dB threshold eta_th uniformly from [eta_a, eta_b)
  2. e_th = e_peak * 10^(eta_th/10), with e_peak the 95th-percentile energy
  3. mask mu[m,c] = 1 where energy >= e_th, else 0
  4. r = sum(x_raw) / sum(x_raw * mu), so the utterance feature sum is
     preserved through masking
  5. output = r * mu * (x_raw - mean) / std

The scaling coefficient is computed from raw (nonnegative) power-mel
features; the mask multiplies the mean-subtracted values so masked bins
are exactly zero. Utterances the mask would wipe out entirely (including
all-silence input with zero peak energy) fall back to an unmasked
pass-through with a flag instead of failing the batch.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .dsp import EnergyMatrix
from .errors import (
    AllMaskedSignal,
    EmptyMatrix,
    InvalidRate,
    NonPositivePeak,
    ShapeMismatch,
)
from .features import STAGE_FINAL, FeatureMatrix, GlobalStats

# energies below this floor are clamped before the dB ratio (keeps eta finite)
ETA_FLOOR = 1e-30

# denominators below this are treated as "everything masked"
MASKED_SUM_FLOOR = 1e-12

PEAK_PERCENTILE = 95


@dataclass(frozen=True)
class SemConfig:
    """Threshold-sampling bounds in dB and the corpus-level seed."""

    eta_a: float = -80.0
    eta_b: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.eta_a < self.eta_b:
            raise ValueError(f"eta_a must be < eta_b, got [{self.eta_a}, {self.eta_b})")


@dataclass(frozen=True)
class MaskMatrix:
    """Binary keep/drop mask with the thresholds that produced it."""

    values: np.ndarray  # uint8, entries in {0, 1}
    eta_th_used: float
    e_th_used: float

    @property
    def masked_fraction(self) -> float:
        return float(np.count_nonzero(self.values == 0)) / self.values.size


@dataclass(frozen=True)
class SemOutcome:
    features: FeatureMatrix  # stage "final"
    mask: MaskMatrix
    scaling_r: float
    fallback_applied: bool


def _stream_digest(seed: int, utterance_id: str, stream: str) -> bytes:
    """Stable 8-byte digest keyed by (stream label, seed, utterance id).

    Replayable regardless of processing order or platform; distinct stream
    labels give independent per-utterance draws.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(stream.encode("ascii"))
    h.update(b"\x00")
    h.update((seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little"))
    h.update(utterance_id.encode("utf-8"))
    return h.digest()


def _unit_uniform(seed: int, utterance_id: str, stream: str) -> float:
    # 53-bit mantissa construction: uniform on [0, 1), strictly below 1.
    bits = int.from_bytes(_stream_digest(seed, utterance_id, stream), "little") >> 11
    return bits / (1 << 53)


def peak_energy(energies: EnergyMatrix | np.ndarray) -> float:
    """Nearest-rank 95th percentile over all time-frequency bins.

    Sorted ascending, the element at index ceil(0.95 * n) - 1; the ceiling
    is taken in exact integer arithmetic.
    """
    values = np.asarray(getattr(energies, "values", energies), dtype=np.float64)
    n = values.size
    if n == 0:
        raise EmptyMatrix("peak_energy of an empty matrix")
    index = (PEAK_PERCENTILE * n + 99) // 100 - 1
    flat = values.ravel()
    return float(np.partition(flat, index)[index])


def eta(e_val, e_peak: float):
    """Energy expressed in dB relative to the peak: 10*log10(e/e_peak).

    Zero energies are floored at 1e-30 so the ratio stays finite. Accepts
    scalars or arrays.
    """
    if e_peak <= 0:
        raise NonPositivePeak(f"e_peak must be > 0, got {e_peak}")
    clamped = np.maximum(np.asarray(e_val, dtype=np.float64), ETA_FLOOR)
    result = 10.0 * np.log10(clamped / e_peak)
    return float(result) if np.ndim(e_val) == 0 else result


def sample_threshold(cfg: SemConfig, utterance_id: str) -> float:
    """One uniform dB threshold per utterance, on [eta_a, eta_b).

    Deterministic given (cfg.seed, utterance_id): the draw comes from a
    keyed hash stream, never from shared RNG state.
    """
    u = _unit_uniform(cfg.seed, utterance_id, "eta-threshold")
    return cfg.eta_a + u * (cfg.eta_b - cfg.eta_a)


def energy_threshold(e_peak: float, eta_th: float) -> float:
    """Convert a dB ratio threshold back to an absolute energy threshold."""
    if e_peak <= 0:
        raise NonPositivePeak(f"e_peak must be > 0, got {e_peak}")
    return e_peak * 10.0 ** (eta_th / 10.0)


def binary_mask(
    energies: EnergyMatrix | np.ndarray,
    e_th: float,
    eta_th: float = math.nan,
) -> MaskMatrix:
    """Keep bins with energy >= e_th (ties kept), drop the rest.

    eta_th is recorded as provenance only; the comparison runs in the
    energy domain.
    """
    values = np.asarray(getattr(energies, "values", energies), dtype=np.float64)
    mask = (values >= e_th).astype(np.uint8)
    return MaskMatrix(values=mask, eta_th_used=float(eta_th), e_th_used=float(e_th))


def scaling_coefficient(x_raw: FeatureMatrix, mask: MaskMatrix) -> float:
    """Sum-preserving rescale factor r = sum(x) / sum(x * mu).

    Raises AllMaskedSignal when the surviving mass is numerically zero;
    the caller decides the fallback.
    """
    if x_raw.values.shape != mask.values.shape:
        raise ShapeMismatch(
            f"features {x_raw.values.shape} vs mask {mask.values.shape}"
        )
    numerator = float(x_raw.values.sum())
    denominator = float((x_raw.values * mask.values).sum())
    if denominator < MASKED_SUM_FLOOR:
        raise AllMaskedSignal(
            f"{x_raw.utterance_id}: masked feature sum {denominator!r} below floor"
        )
    return numerator / denominator


def _passthrough_mask(shape) -> MaskMatrix:
    # Effective thresholds of an all-ones mask: -inf dB, zero energy.
    return MaskMatrix(
        values=np.ones(shape, dtype=np.uint8),
        eta_th_used=-math.inf,
        e_th_used=0.0,
    )


def _mask_and_normalize(
    x_raw: FeatureMatrix,
    energies: EnergyMatrix,
    stats: GlobalStats,
    eta_th: float,
) -> SemOutcome:
    fallback = False
    e_peak = peak_energy(energies)
    if e_peak <= 0:
        # all-silence utterance: no dB ratio exists, pass through unmasked
        fallback = True
    else:
        e_th = energy_threshold(e_peak, eta_th)
        mask = binary_mask(energies, e_th, eta_th=eta_th)
        try:
            scaling_r = scaling_coefficient(x_raw, mask)
        except AllMaskedSignal:
            fallback = True
    if fallback:
        mask = _passthrough_mask(x_raw.values.shape)
        scaling_r = 1.0

    normalized = (x_raw.values - stats.mean) / stats.std
    output = normalized * mask.values * scaling_r
    features = FeatureMatrix(
        values=output, utterance_id=x_raw.utterance_id, stage=STAGE_FINAL
    )
    return SemOutcome(
        features=features, mask=mask, scaling_r=scaling_r, fallback_applied=fallback
    )


def _check_shapes(x_raw: FeatureMatrix, energies: EnergyMatrix, stats: GlobalStats) -> None:
    if x_raw.values.shape != energies.values.shape:
        raise ShapeMismatch(
            f"{x_raw.utterance_id}: features {x_raw.values.shape} vs "
            f"energies {energies.values.shape}"
        )
    if x_raw.num_channels != stats.num_channels:
        raise ShapeMismatch(
            f"{x_raw.utterance_id}: {x_raw.num_channels} channels vs "
            f"stats with {stats.num_channels}"
        )


def apply_sem(
    x_raw: FeatureMatrix,
    energies: EnergyMatrix,
    stats: GlobalStats,
    cfg: SemConfig,
) -> SemOutcome:
    """Full small-energy-masking pipeline with a per-utterance random threshold."""
    _check_shapes(x_raw, energies, stats)
    eta_th = sample_threshold(cfg, x_raw.utterance_id)
    return _mask_and_normalize(x_raw, energies, stats, eta_th)


def apply_fixed_sem(
    x_raw: FeatureMatrix,
    energies: EnergyMatrix,
    stats: GlobalStats,
    eta_th_fixed: float,
) -> SemOutcome:
    """Masking pipeline with a constant dB threshold (the non-random ablation)."""
    _check_shapes(x_raw, energies, stats)
    return _mask_and_normalize(x_raw, energies, stats, eta_th_fixed)


def input_dropout(
    features: FeatureMatrix,
    rate: float,
    seed: int,
    utterance_id: str,
) -> FeatureMatrix:
    """Inverted input dropout: zero each element with probability `rate`,
    scale survivors by 1/(1 - rate). Deterministic per (seed, utterance_id)."""
    if not 0.0 <= rate < 1.0:
        raise InvalidRate(f"rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return FeatureMatrix(
            values=features.values.copy(),
            utterance_id=features.utterance_id,
            stage=features.stage,
        )
    child_seed = int.from_bytes(_stream_digest(seed, utterance_id, "dropout"), "little")
    rng = np.random.default_rng(child_seed)
    keep = rng.random(features.values.shape) >= rate
    survivor_scale = 1.0 / (1.0 - rate)
    values = np.where(keep, features.values * survivor_scale, 0.0)
    return FeatureMatrix(
        values=values, utterance_id=features.utterance_id, stage=features.stage
    )
