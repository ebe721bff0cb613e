"""Shared fixtures: a default front-end config and small mixed corpora."""

import pytest

from semaug import FeatureConfig, filterbank_energies, mel_filterbank, power_mel
from semaug import synth_fixture, synth_speech_like


@pytest.fixture(scope="session")
def cfg():
    return FeatureConfig()


@pytest.fixture(scope="session")
def filterbank(cfg):
    return mel_filterbank(cfg)


def mixed_waveforms(num=8, duration_s=1.0):
    """A deterministic mix of fixture kinds, ids fixed by position."""
    kinds = ["sine", "white_noise", "chirp"]
    waves = []
    for i in range(num):
        if i % 4 == 3:
            waves.append(synth_speech_like(duration_s, seed=i, utterance_id=f"utt_{i:03d}"))
        else:
            waves.append(
                synth_fixture(kinds[i % 3], duration_s, seed=i, utterance_id=f"utt_{i:03d}")
            )
    return waves


@pytest.fixture(scope="session")
def mixed_corpus(cfg, filterbank):
    """(energies, raw features) pairs for a small mixed fixture corpus."""
    pairs = []
    for wave in mixed_waveforms(8):
        energies = filterbank_energies(wave, cfg, filterbank=filterbank)
        pairs.append((energies, power_mel(energies, cfg.power_exponent)))
    return pairs


def random_energy_matrix(rng, num_frames=None, num_channels=None):
    """Random nonnegative energies with a wide dynamic range."""
    frames = num_frames or int(rng.integers(2, 40))
    channels = num_channels or int(rng.integers(1, 16))
    magnitudes = rng.uniform(-8.0, 3.0, size=(frames, channels))
    return 10.0 ** magnitudes
