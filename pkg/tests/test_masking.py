"""Threshold sampling, binary masks, sum-preserving rescale, dropout."""

import math

import numpy as np
import pytest

from semaug import (
    EnergyMatrix,
    FeatureConfig,
    FeatureMatrix,
    GlobalStats,
    SemConfig,
    apply_fixed_sem,
    apply_sem,
    binary_mask,
    compute_global_stats,
    divide_std,
    energy_threshold,
    eta,
    filterbank_energies,
    input_dropout,
    peak_energy,
    power_mel,
    sample_threshold,
    scaling_coefficient,
    subtract_mean,
    synth_fixture,
)
from semaug.audio_io import Waveform
from semaug.errors import (
    AllMaskedSignal,
    EmptyMatrix,
    InvalidRate,
    NonPositivePeak,
    ShapeMismatch,
)
from conftest import random_energy_matrix


def raw_feat(values, uid="u"):
    return FeatureMatrix(np.asarray(values, dtype=float), uid, "raw_power_mel")


def sort_oracle_percentile(values):
    flat = np.sort(np.asarray(values, dtype=float).ravel())
    index = math.ceil(0.95 * flat.size) - 1
    return flat[index]


class TestPeakEnergy:
    def test_constant_matrix(self):
        assert peak_energy(EnergyMatrix(np.full((4, 5), 3.25), "c")) == 3.25

    def test_one_to_hundred(self):
        values = np.arange(1.0, 101.0).reshape(10, 10)
        assert peak_energy(EnergyMatrix(values, "h")) == 95.0

    def test_single_entry(self):
        assert peak_energy(EnergyMatrix(np.array([[7.0]]), "s")) == 7.0

    def test_empty(self):
        with pytest.raises(EmptyMatrix):
            peak_energy(EnergyMatrix(np.zeros((0, 4)), "e"))

    def test_against_sort_oracle(self):
        rng = np.random.default_rng(31)
        for _ in range(200):
            values = random_energy_matrix(rng)
            assert peak_energy(values) == sort_oracle_percentile(values)


class TestEta:
    def test_ratio_of_one(self):
        assert eta(4.0, 4.0) == 0.0

    def test_minus_twenty(self):
        assert eta(0.01, 1.0) == pytest.approx(-20.0, abs=1e-12)

    def test_zero_energy_floored(self):
        value = eta(0.0, 1.0)
        assert math.isfinite(value)
        assert value <= -200.0

    def test_nonpositive_peak(self):
        with pytest.raises(NonPositivePeak):
            eta(1.0, 0.0)

    def test_array_input(self):
        out = eta(np.array([1.0, 0.1]), 1.0)
        assert np.allclose(out, [0.0, -10.0], atol=1e-12)


class TestSampleThreshold:
    def test_deterministic(self):
        cfg = SemConfig(seed=42)
        assert sample_threshold(cfg, "utt1") == sample_threshold(cfg, "utt1")

    def test_varies_with_utterance_and_seed(self):
        cfg = SemConfig(seed=42)
        assert sample_threshold(cfg, "utt1") != sample_threshold(cfg, "utt2")
        assert sample_threshold(cfg, "utt1") != sample_threshold(SemConfig(seed=43), "utt1")

    def test_collapsed_interval(self):
        cfg = SemConfig(eta_a=-5.0 - 1e-12, eta_b=-5.0)
        assert sample_threshold(cfg, "x") == pytest.approx(-5.0, abs=1e-11)

    def test_uniform_moments(self):
        cfg = SemConfig(eta_a=-80.0, eta_b=0.0, seed=0)
        draws = np.array([sample_threshold(cfg, f"utt{i}") for i in range(100_000)])
        assert abs(draws.mean() + 40.0) < 0.3
        assert draws.min() >= -80.0
        assert draws.max() < 0.0

    def test_invalid_bounds(self):
        with pytest.raises(ValueError):
            SemConfig(eta_a=0.0, eta_b=0.0)


class TestEnergyThreshold:
    @pytest.mark.parametrize("eta_th,divisor", [(0.0, 1.0), (-20.0, 100.0), (-10.0, 10.0)])
    def test_analytic(self, eta_th, divisor):
        assert energy_threshold(5.0, eta_th) == pytest.approx(5.0 / divisor, rel=1e-14)

    def test_nonpositive_peak(self):
        with pytest.raises(NonPositivePeak):
            energy_threshold(0.0, -20.0)


class TestBinaryMask:
    def test_zero_threshold_keeps_all(self):
        mask = binary_mask(EnergyMatrix(np.abs(np.random.default_rng(1).normal(size=(3, 4))), "a"), 0.0)
        assert np.all(mask.values == 1)

    def test_above_max_drops_all(self):
        mask = binary_mask(EnergyMatrix(np.ones((3, 4)), "b"), 2.0)
        assert np.all(mask.values == 0)

    def test_hand_example(self):
        energies = EnergyMatrix(np.array([[4.0, 1.0], [2.0, 8.0]]), "h")
        mask = binary_mask(energies, 2.0)
        assert np.array_equal(mask.values, [[1, 0], [1, 1]])

    def test_tie_is_kept(self):
        mask = binary_mask(EnergyMatrix(np.array([[5.0]]), "t"), 5.0)
        assert mask.values[0, 0] == 1

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            values = random_energy_matrix(rng)
            e_peak = peak_energy(values)
            t1, t2 = sorted(rng.uniform(-90, 5, size=2))
            low = binary_mask(values, energy_threshold(e_peak, t1)).values
            high = binary_mask(values, energy_threshold(e_peak, t2)).values
            assert np.all(low >= high)


class TestScalingCoefficient:
    def test_all_ones_mask(self):
        x = raw_feat([[2.0, 1.0, 1.0]])
        mask = binary_mask(EnergyMatrix(np.ones((1, 3)), "m"), 0.0)
        assert scaling_coefficient(x, mask) == 1.0

    def test_hand_example(self):
        x = raw_feat([[2.0, 1.0, 1.0]])
        mask = binary_mask(EnergyMatrix(np.array([[1.0, 0.0, 1.0]]), "m"), 0.5)
        assert scaling_coefficient(x, mask) == pytest.approx(4.0 / 3.0, rel=1e-15)

    def test_all_masked(self):
        x = raw_feat([[1.0, 1.0]])
        mask = binary_mask(EnergyMatrix(np.zeros((1, 2)), "m"), 1.0)
        with pytest.raises(AllMaskedSignal):
            scaling_coefficient(x, mask)

    def test_shape_mismatch(self):
        x = raw_feat(np.ones((2, 3)))
        mask = binary_mask(EnergyMatrix(np.ones((2, 2)), "m"), 0.0)
        with pytest.raises(ShapeMismatch):
            scaling_coefficient(x, mask)

    def test_at_least_one(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            values = random_energy_matrix(rng)
            x = raw_feat(values ** (1 / 15))
            e_peak = peak_energy(values)
            mask = binary_mask(values, energy_threshold(e_peak, rng.uniform(-80, 0)))
            assert scaling_coefficient(x, mask) >= 1.0


def _pipeline_inputs(seed=0, kind="white_noise", duration=0.5):
    cfg_feat = FeatureConfig()
    wav = synth_fixture(kind, duration, seed=seed, utterance_id=f"pipe_{kind}_{seed}")
    energies = filterbank_energies(wav, cfg_feat)
    x_raw = power_mel(energies, cfg_feat.power_exponent)
    stats = compute_global_stats([x_raw])
    return wav, energies, x_raw, stats


class TestApplySem:
    def test_no_masking_limit_matches_plain_normalization(self):
        _, energies, x_raw, stats = _pipeline_inputs()
        cfg = SemConfig(eta_a=-10000.0, eta_b=-9999.0, seed=1)
        outcome = apply_sem(x_raw, energies, stats, cfg)
        assert outcome.scaling_r == 1.0
        assert not outcome.fallback_applied
        assert np.all(outcome.mask.values == 1)
        expected = divide_std(subtract_mean(x_raw, stats), stats).values
        assert np.array_equal(outcome.features.values, expected)

    def test_sum_preservation_on_raw_features(self):
        rng = np.random.default_rng(3)
        _, energies, x_raw, stats = _pipeline_inputs(seed=5)
        for _ in range(25):
            eta_th = rng.uniform(-80, 0)
            outcome = apply_fixed_sem(x_raw, energies, stats, eta_th)
            if outcome.fallback_applied:
                continue
            masked_sum = (outcome.scaling_r * outcome.mask.values * x_raw.values).sum()
            total = x_raw.values.sum()
            assert abs(masked_sum - total) / total <= 1e-6

    def test_mask_is_gain_invariant(self):
        wav, _, _, _ = _pipeline_inputs(seed=8)
        cfg_feat = FeatureConfig()
        sem = SemConfig(seed=77)
        masks = []
        for gain in (0.1, 1.0, 10.0):
            scaled = Waveform(wav.samples * gain, wav.sample_rate_hz, wav.utterance_id)
            energies = filterbank_energies(scaled, cfg_feat)
            x_raw = power_mel(energies, cfg_feat.power_exponent)
            stats = compute_global_stats([x_raw])
            outcome = apply_sem(x_raw, energies, stats, sem)
            masks.append(outcome.mask.values)
        assert np.array_equal(masks[0], masks[1])
        assert np.array_equal(masks[1], masks[2])

    def test_fallback_on_silence(self):
        _, _, x_ref, stats = _pipeline_inputs()
        silent = EnergyMatrix(np.zeros_like(x_ref.values), x_ref.utterance_id)
        x_raw = power_mel(silent, 1 / 15)
        outcome = apply_sem(x_raw, silent, stats, SemConfig(seed=3))
        assert outcome.fallback_applied
        assert outcome.scaling_r == 1.0
        assert np.all(outcome.mask.values == 1)
        expected = divide_std(subtract_mean(x_raw, stats), stats).values
        assert np.array_equal(outcome.features.values, expected)

    def test_masked_bins_are_exactly_zero(self):
        _, energies, x_raw, stats = _pipeline_inputs(seed=4, kind="chirp")
        outcome = apply_fixed_sem(x_raw, energies, stats, -20.0)
        assert np.any(outcome.mask.values == 0)
        assert np.all(outcome.features.values[outcome.mask.values == 0] == 0.0)

    def test_shape_mismatch(self):
        _, energies, x_raw, stats = _pipeline_inputs()
        bad = FeatureMatrix(x_raw.values[:, :-1], x_raw.utterance_id, x_raw.stage)
        with pytest.raises(ShapeMismatch):
            apply_sem(bad, energies, stats, SemConfig())

    def test_same_seed_same_outcome(self):
        _, energies, x_raw, stats = _pipeline_inputs(seed=6)
        cfg = SemConfig(seed=123)
        a = apply_sem(x_raw, energies, stats, cfg)
        b = apply_sem(x_raw, energies, stats, cfg)
        assert a.mask.eta_th_used == b.mask.eta_th_used
        assert np.array_equal(a.features.values, b.features.values)


class TestApplyFixedSem:
    def test_very_low_threshold_masks_nothing(self):
        for kind in ("sine", "white_noise", "chirp"):
            _, energies, x_raw, stats = _pipeline_inputs(seed=2, kind=kind)
            outcome = apply_fixed_sem(x_raw, energies, stats, -200.0)
            assert not outcome.fallback_applied
            assert np.all(outcome.mask.values == 1)
            assert outcome.scaling_r == 1.0

    def test_hand_chain(self):
        energies = EnergyMatrix(np.array([[4.0, 1.0], [2.0, 8.0]]), "hand")
        x_raw = power_mel(energies, 1 / 15)
        stats = GlobalStats(np.zeros(2), np.ones(2), 2)
        # e_peak = 8; eta_th puts e_th exactly at 2.5
        eta_th = 10.0 * math.log10(2.5 / 8.0)
        outcome = apply_fixed_sem(x_raw, energies, stats, eta_th)
        assert outcome.mask.e_th_used == pytest.approx(2.5, rel=1e-12)
        assert np.array_equal(outcome.mask.values, [[1, 0], [0, 1]])
        expected_r = x_raw.values.sum() / (x_raw.values[0, 0] + x_raw.values[1, 1])
        assert outcome.scaling_r == pytest.approx(expected_r, rel=1e-12)

    def test_minus_twenty_on_hand_matrix_keeps_all(self):
        energies = EnergyMatrix(np.array([[4.0, 1.0], [2.0, 8.0]]), "hand")
        x_raw = power_mel(energies, 1 / 15)
        stats = GlobalStats(np.zeros(2), np.ones(2), 2)
        outcome = apply_fixed_sem(x_raw, energies, stats, -20.0)
        # e_th = 0.08, below every entry
        assert np.all(outcome.mask.values == 1)

    def test_repeated_calls_identical(self):
        _, energies, x_raw, stats = _pipeline_inputs(seed=9)
        a = apply_fixed_sem(x_raw, energies, stats, -30.0)
        b = apply_fixed_sem(x_raw, energies, stats, -30.0)
        assert np.array_equal(a.features.values, b.features.values)
        assert a.scaling_r == b.scaling_r

    def test_mask_zero_fraction_equals_cdf_statistic(self):
        from semaug import masked_fraction, synth_speech_like

        cfg_feat = FeatureConfig()
        for seed in range(4):
            wav = synth_speech_like(1.0, seed=seed, utterance_id=f"cdf_{seed}")
            energies = filterbank_energies(wav, cfg_feat)
            x_raw = power_mel(energies, cfg_feat.power_exponent)
            stats = compute_global_stats([x_raw])
            outcome = apply_fixed_sem(x_raw, energies, stats, -20.0)
            assert outcome.mask.masked_fraction == masked_fraction(energies, -20.0)


class TestInputDropout:
    def test_rate_zero_is_identity(self):
        x = raw_feat(np.random.default_rng(0).normal(size=(5, 4)))
        out = input_dropout(x, 0.0, seed=1, utterance_id="u")
        assert np.array_equal(out.values, x.values)

    def test_survivor_scale_exact(self):
        x = raw_feat(np.random.default_rng(1).uniform(1, 2, size=(50, 20)))
        out = input_dropout(x, 0.1, seed=2, utterance_id="u")
        kept = out.values != 0.0
        assert np.array_equal(out.values[kept], x.values[kept] * (1.0 / 0.9))

    def test_empirical_rate(self):
        x = raw_feat(np.ones((1000, 1000)))
        out = input_dropout(x, 0.2, seed=3, utterance_id="u")
        dropped = np.count_nonzero(out.values == 0.0) / out.values.size
        assert abs(dropped - 0.2) <= 3.0 * math.sqrt(0.2 * 0.8 / 1e6)

    def test_unbiased_mean(self):
        x = raw_feat(np.random.default_rng(4).uniform(0.5, 1.5, size=(1000, 1000)))
        out = input_dropout(x, 0.2, seed=5, utterance_id="u")
        assert abs(out.values.mean() - x.values.mean()) / x.values.mean() < 0.01

    def test_deterministic_per_utterance(self):
        x = raw_feat(np.ones((10, 10)))
        a = input_dropout(x, 0.5, seed=6, utterance_id="u1")
        b = input_dropout(x, 0.5, seed=6, utterance_id="u1")
        c = input_dropout(x, 0.5, seed=6, utterance_id="u2")
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    @pytest.mark.parametrize("rate", [-0.1, 1.0, 1.5])
    def test_invalid_rate(self, rate):
        with pytest.raises(InvalidRate):
            input_dropout(raw_feat(np.ones((2, 2))), rate, seed=0, utterance_id="u")
