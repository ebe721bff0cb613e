"""Small energy masking augmentation for power-mel speech features."""

from . import errors
from .audio_io import (
    Waveform,
    read_wav,
    synth_fixture,
    synth_speech_like,
    write_wav,
)
from .dsp import (
    EnergyMatrix,
    FeatureConfig,
    FilterbankMatrix,
    filterbank_energies,
    frame_signal,
    hamming_window,
    mel_filterbank,
    power_spectrum,
)
from .features import (
    FeatureMatrix,
    GlobalStats,
    StatsAccumulator,
    compute_global_stats,
    divide_std,
    power_mel,
    subtract_mean,
)
from .masking import (
    MaskMatrix,
    SemConfig,
    SemOutcome,
    apply_fixed_sem,
    apply_sem,
    binary_mask,
    energy_threshold,
    eta,
    input_dropout,
    peak_energy,
    sample_threshold,
    scaling_coefficient,
)
from .stats import (
    EtaDistribution,
    EtaHistogramAccumulator,
    energy_ratio_curve,
    eta_histogram,
    masked_fraction,
)

__version__ = "0.1.0"

__all__ = [
    "errors",
    "Waveform",
    "read_wav",
    "write_wav",
    "synth_fixture",
    "synth_speech_like",
    "FeatureConfig",
    "FilterbankMatrix",
    "EnergyMatrix",
    "hamming_window",
    "frame_signal",
    "power_spectrum",
    "mel_filterbank",
    "filterbank_energies",
    "FeatureMatrix",
    "GlobalStats",
    "StatsAccumulator",
    "compute_global_stats",
    "power_mel",
    "subtract_mean",
    "divide_std",
    "SemConfig",
    "MaskMatrix",
    "SemOutcome",
    "peak_energy",
    "eta",
    "sample_threshold",
    "energy_threshold",
    "binary_mask",
    "scaling_coefficient",
    "apply_sem",
    "apply_fixed_sem",
    "input_dropout",
    "EtaDistribution",
    "EtaHistogramAccumulator",
    "eta_histogram",
    "energy_ratio_curve",
    "masked_fraction",
]
