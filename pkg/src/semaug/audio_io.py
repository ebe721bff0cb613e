"""WAV input/output and deterministic waveform fixtures.

Only 16-bit mono linear PCM is accepted; resampling and multi-channel
mixing are out of scope. Peak amplitude normalization is deliberately
not performed.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyAudio, InvalidDuration, MalformedHeader, UnsupportedFormat

# 16-bit PCM full scale; raw integers map to [-1.0, 1.0).
PCM_SCALE = 32768.0

SINE_FREQ_HZ = 440.0
SINE_AMPLITUDE = 0.5
CHIRP_START_HZ = 100.0

FIXTURE_KINDS = ("sine", "white_noise", "chirp", "silence")


@dataclass(frozen=True)
class Waveform:
    """Mono amplitude sequence with its sample rate and an utterance label."""

    samples: np.ndarray
    sample_rate_hz: int
    utterance_id: str

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample_rate_hz must be > 0, got {self.sample_rate_hz}")

    @property
    def num_samples(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return self.num_samples / self.sample_rate_hz


def read_wav(path: str | Path) -> Waveform:
    """Read a 16-bit mono PCM WAV file into a float waveform.

    Samples are the raw integers divided by 32768.0; the utterance id is
    the file stem.
    """
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as handle:
            num_channels = handle.getnchannels()
            sample_width = handle.getsampwidth()
            comp_type = handle.getcomptype()
            rate = handle.getframerate()
            num_frames = handle.getnframes()
            raw = handle.readframes(num_frames)
    except wave.Error as exc:
        # The wave module reports non-PCM encodings as "unknown format".
        if "unknown format" in str(exc):
            raise UnsupportedFormat(f"{path}: {exc}") from exc
        raise MalformedHeader(f"{path}: {exc}") from exc
    except EOFError as exc:
        raise MalformedHeader(f"{path}: truncated header") from exc

    if comp_type != "NONE":
        raise UnsupportedFormat(f"{path}: compressed audio ({comp_type}) not supported")
    if num_channels != 1:
        raise UnsupportedFormat(f"{path}: expected mono, got {num_channels} channels")
    if sample_width != 2:
        raise UnsupportedFormat(
            f"{path}: expected 16-bit samples, got {8 * sample_width}-bit"
        )
    if num_frames == 0 or len(raw) == 0:
        raise EmptyAudio(f"{path}: no audio samples")
    if len(raw) % 2 != 0:
        raise MalformedHeader(f"{path}: truncated sample data")

    ints = np.frombuffer(raw, dtype="<i2")
    return Waveform(
        samples=ints.astype(np.float64) / PCM_SCALE,
        sample_rate_hz=rate,
        utterance_id=path.stem,
    )


def write_wav(path: str | Path, waveform: Waveform) -> None:
    """Write a waveform as 16-bit mono PCM (the fixture writer).

    Amplitudes already on the 1/32768 grid round-trip bit-exactly through
    read_wav.
    """
    ints = np.clip(
        np.rint(np.asarray(waveform.samples, dtype=np.float64) * PCM_SCALE),
        -32768,
        32767,
    ).astype("<i2")
    with wave.open(str(path), "wb") as handle:
        handle.setnchannels(1)
        handle.setsampwidth(2)
        handle.setframerate(waveform.sample_rate_hz)
        handle.writeframes(ints.tobytes())


def synth_fixture(
    kind: str,
    duration_s: float,
    sample_rate_hz: int = 16000,
    seed: int = 0,
    utterance_id: str | None = None,
) -> Waveform:
    """Synthesize a deterministic test waveform.

    kind is one of "sine" (440 Hz, amplitude 0.5), "white_noise",
    "chirp" (linear sweep), or "silence". The result is a pure function
    of (kind, duration_s, sample_rate_hz, seed).
    """
    if duration_s <= 0:
        raise InvalidDuration(f"duration_s must be > 0, got {duration_s}")
    num = int(round(duration_s * sample_rate_hz))
    t = np.arange(num) / sample_rate_hz

    if kind == "silence":
        samples = np.zeros(num)
    elif kind == "sine":
        samples = SINE_AMPLITUDE * np.sin(2.0 * np.pi * SINE_FREQ_HZ * t)
    elif kind == "chirp":
        # Linear sweep from CHIRP_START_HZ up to 45% of Nyquist.
        f_end = 0.45 * (sample_rate_hz / 2.0)
        phase = 2.0 * np.pi * (
            CHIRP_START_HZ * t + (f_end - CHIRP_START_HZ) * t * t / (2.0 * duration_s)
        )
        samples = SINE_AMPLITUDE * np.sin(phase)
    elif kind == "white_noise":
        rng = np.random.default_rng(seed)
        samples = rng.uniform(-0.5, 0.5, size=num)
    else:
        raise ValueError(f"unknown fixture kind: {kind!r} (expected one of {FIXTURE_KINDS})")

    if utterance_id is None:
        utterance_id = f"{kind}_{seed}"
    return Waveform(samples=samples, sample_rate_hz=sample_rate_hz, utterance_id=utterance_id)


def synth_speech_like(
    duration_s: float,
    sample_rate_hz: int = 16000,
    seed: int = 0,
    utterance_id: str | None = None,
) -> Waveform:
    """Synthesize a deterministic speech-like waveform.

    A continuously voiced harmonic carrier (drifting pitch, two random
    formant peaks) with a syllabic amplitude envelope, short pauses, and
    fricative noise bursts rides on a low broadband noise floor. The
    voicing is dense so the energy distribution has a speech-like top
    end rather than isolated peaks. Deterministic per
    (duration_s, sample_rate_hz, seed).
    """
    if duration_s <= 0:
        raise InvalidDuration(f"duration_s must be > 0, got {duration_s}")
    # Salted so the stream differs from synth_fixture("white_noise", seed=seed).
    rng = np.random.default_rng([seed, 0x5EE])
    num = int(round(duration_s * sample_rate_hz))
    t = np.arange(num) / sample_rate_hz

    sig = rng.normal(0.0, 1.5e-3, size=num)  # background floor, keeps bins nonzero

    # Voiced carrier: harmonics of a slowly drifting pitch.
    f0 = rng.uniform(100.0, 220.0)
    drift = 1.0 + 0.08 * np.sin(2.0 * np.pi * rng.uniform(0.3, 0.8) * t + rng.uniform(0, 2 * np.pi))
    inst_freq = f0 * drift * (1.0 + 0.02 * np.sin(2.0 * np.pi * 5.0 * t))
    base_phase = 2.0 * np.pi * np.cumsum(inst_freq) / sample_rate_hz
    formant1 = rng.uniform(300.0, 900.0)
    formant2 = rng.uniform(1000.0, 2500.0)
    voiced = np.zeros(num)
    for h in range(1, 13):
        freq = h * f0
        if freq >= 0.45 * sample_rate_hz:
            break
        weight = (1.0 / h) * (
            1.0
            + 2.0 * np.exp(-(((freq - formant1) / 200.0) ** 2))
            + 1.5 * np.exp(-(((freq - formant2) / 350.0) ** 2))
        )
        voiced += weight * np.sin(h * base_phase + rng.uniform(0.0, 2.0 * np.pi))
    voiced /= np.max(np.abs(voiced))

    # Syllabic envelope: 3-4 Hz modulation with audible but bounded dips.
    syllable_rate = rng.uniform(2.8, 4.0)
    envelope = 0.62 + 0.38 * np.sin(2.0 * np.pi * syllable_rate * t + rng.uniform(0, 2 * np.pi))
    envelope *= rng.uniform(0.2, 0.35)

    # Short pauses where the voicing drops to near the floor.
    for _ in range(rng.integers(2, 4)):
        pause_len = int(rng.uniform(0.08, 0.18) * sample_rate_hz)
        if pause_len >= num:
            continue
        start = rng.integers(0, num - pause_len)
        dip = 1.0 - 0.99 * np.hanning(pause_len)
        envelope[start : start + pause_len] *= dip

    sig += envelope * voiced

    # Fricative bursts: band-shaped noise around a random high-band center.
    for _ in range(max(1, int(round(duration_s * rng.uniform(0.8, 1.5))))):
        length = min(num, max(32, int(rng.uniform(0.06, 0.15) * sample_rate_hz)))
        start = rng.integers(0, num - length + 1)
        noise = rng.normal(0.0, 1.0, size=length)
        spectrum = np.fft.rfft(noise)
        freqs = np.fft.rfftfreq(length, d=1.0 / sample_rate_hz)
        center = rng.uniform(2000.0, 6000.0)
        width = rng.uniform(800.0, 2000.0)
        spectrum *= np.exp(-(((freqs - center) / width) ** 2))
        burst = np.fft.irfft(spectrum, n=length)
        peak = np.max(np.abs(burst))
        if peak > 0:
            sig[start : start + length] += (
                rng.uniform(0.05, 0.12) * np.hanning(length) * burst / peak
            )

    # Soft limiter: compresses syllable peaks the way recording chains do,
    # which keeps the loudest time-frequency bins densely clustered.
    sig = 0.42 * np.tanh(sig / 0.24)

    np.clip(sig, -0.999, 0.999, out=sig)
    if utterance_id is None:
        utterance_id = f"speech_like_{seed}"
    return Waveform(samples=sig, sample_rate_hz=sample_rate_hz, utterance_id=utterance_id)
