"""Waveform to mel filterbank energy extraction.

The front end frames the signal with a symmetric Hamming window, takes the
squared-magnitude DFT (unscaled forward transform, zero-padded to the FFT
size) and sums it through triangular mel filters:

    energy[m, c] = sum_k |X[m, k]|^2 * W[c, k],   k = 0 .. K/2

No pre-emphasis and no dithering are applied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import Waveform
from .errors import FrameTooLong, LengthTooSmall, TooManyChannels, TooShort


def hz_to_mel(freq_hz):
    """Perceptual frequency warp: mel(f) = 2595 * log10(1 + f/700)."""
    return 2595.0 * np.log10(1.0 + np.asarray(freq_hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class FeatureConfig:
    """Front-end configuration: 25 ms Hamming windows, 10 ms hop, 40 mel
    channels on 16 kHz audio, power-law exponent 1/15."""

    window_length_ms: float = 25.0
    hop_ms: float = 10.0
    fft_size: int = 512
    num_channels: int = 40
    sample_rate_hz: int = 16000
    power_exponent: float = 1.0 / 15.0

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample_rate_hz must be > 0, got {self.sample_rate_hz}")
        if self.fft_size < 2 or self.fft_size & (self.fft_size - 1) != 0:
            raise ValueError(f"fft_size must be a power of two >= 2, got {self.fft_size}")
        if self.window_samples < 2:
            raise ValueError("window shorter than 2 samples")
        if self.fft_size < self.window_samples:
            raise ValueError(
                f"fft_size {self.fft_size} smaller than window of "
                f"{self.window_samples} samples"
            )
        if not 0 < self.num_channels <= self.fft_size // 2:
            raise ValueError(
                f"num_channels must be in (0, fft_size/2], got {self.num_channels}"
            )
        if self.hop_ms > self.window_length_ms:
            raise ValueError("hop_ms must not exceed window_length_ms")
        if self.hop_ms <= 0:
            raise ValueError("hop_ms must be > 0")
        if self.power_exponent <= 0:
            raise ValueError("power_exponent must be > 0")

    @property
    def window_samples(self) -> int:
        return int(round(self.window_length_ms * self.sample_rate_hz / 1000.0))

    @property
    def hop_samples(self) -> int:
        return int(round(self.hop_ms * self.sample_rate_hz / 1000.0))


@dataclass(frozen=True)
class FilterbankMatrix:
    """Triangular mel filter weights, one row per channel.

    weights: (num_channels, fft_size/2 + 1), entries in [0, 1], each row a
    contiguous triangle peaking at exactly 1.0.
    """

    weights: np.ndarray
    center_freqs_hz: np.ndarray

    @property
    def num_channels(self) -> int:
        return int(self.weights.shape[0])


@dataclass(frozen=True)
class EnergyMatrix:
    """Per-frame, per-channel filterbank energies (all entries >= 0)."""

    values: np.ndarray
    utterance_id: str

    @property
    def num_frames(self) -> int:
        return int(self.values.shape[0])

    @property
    def num_channels(self) -> int:
        return int(self.values.shape[1])


def hamming_window(length: int) -> np.ndarray:
    """Symmetric Hamming window w[n] = 0.54 - 0.46*cos(2*pi*n/(length-1))."""
    if length < 2:
        raise LengthTooSmall(f"window length must be >= 2, got {length}")
    n = np.arange(length)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / (length - 1))


def frame_signal(waveform: Waveform, cfg: FeatureConfig) -> np.ndarray:
    """Slice a waveform into overlapping frames of one window each.

    Returns an (M, L) array with M = 1 + floor((N - L) / H); the trailing
    partial frame is dropped.
    """
    samples = np.asarray(waveform.samples, dtype=np.float64)
    length = cfg.window_samples
    hop = cfg.hop_samples
    if samples.size < length:
        raise TooShort(
            f"{waveform.utterance_id}: {samples.size} samples < one window of {length}"
        )
    frames = np.lib.stride_tricks.sliding_window_view(samples, length)[::hop]
    return np.ascontiguousarray(frames)


def power_spectrum(frame: np.ndarray, fft_size: int) -> np.ndarray:
    """Squared DFT magnitudes at bins 0..K/2 of a zero-padded frame."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape[-1] > fft_size:
        raise FrameTooLong(f"frame of {frame.shape[-1]} samples > fft_size {fft_size}")
    spectrum = np.fft.rfft(frame, n=fft_size, axis=-1)
    return np.abs(spectrum) ** 2


def mel_filterbank(cfg: FeatureConfig) -> FilterbankMatrix:
    """Build triangular mel filters with centers equally spaced on the mel
    scale between 0 Hz and Nyquist.

    Centers snap to the nearest DFT bin so every triangle peaks at exactly
    1.0; triangle c spans from center c-1 to center c+1 (band edges for the
    first and last).
    """
    half = cfg.fft_size // 2
    nyquist = cfg.sample_rate_hz / 2.0
    grid_mel = np.linspace(0.0, float(hz_to_mel(nyquist)), cfg.num_channels + 2)
    grid_hz = mel_to_hz(grid_mel)
    grid_bins = np.rint(grid_hz * cfg.fft_size / cfg.sample_rate_hz).astype(np.int64)
    grid_bins[0] = 0
    grid_bins[-1] = half
    if np.any(np.diff(grid_bins) < 1):
        raise TooManyChannels(
            f"{cfg.num_channels} channels collapse adjacent centers onto one DFT bin "
            f"(fft_size={cfg.fft_size}, rate={cfg.sample_rate_hz})"
        )

    weights = np.zeros((cfg.num_channels, half + 1))
    bins = np.arange(half + 1, dtype=np.float64)
    for c in range(cfg.num_channels):
        left, center, right = grid_bins[c], grid_bins[c + 1], grid_bins[c + 2]
        rising = (bins > left) & (bins <= center)
        falling = (bins > center) & (bins < right)
        weights[c, rising] = (bins[rising] - left) / (center - left)
        weights[c, falling] = (right - bins[falling]) / (right - center)

    center_freqs = grid_bins[1:-1] * cfg.sample_rate_hz / cfg.fft_size
    return FilterbankMatrix(weights=weights, center_freqs_hz=center_freqs.astype(np.float64))


def filterbank_energies(
    waveform: Waveform,
    cfg: FeatureConfig,
    filterbank: FilterbankMatrix | None = None,
) -> EnergyMatrix:
    """Full front end: framing, Hamming windowing, power spectrum, mel sum.

    A precomputed FilterbankMatrix may be shared read-only across calls.
    """
    if filterbank is None:
        filterbank = mel_filterbank(cfg)
    frames = frame_signal(waveform, cfg)
    windowed = frames * hamming_window(cfg.window_samples)
    power = power_spectrum(windowed, cfg.fft_size)
    energies = power @ filterbank.weights.T
    return EnergyMatrix(values=energies, utterance_id=waveform.utterance_id)
