"""Normalizer, windowing, HI score, and boundary calibration."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from himon import component as comp
from himon import nn
from himon.data import SegmentedSeries
from himon.errors import (ConfigurationError, DimensionError,
                          InsufficientDataError)


def zero_dae(n=8, out_bias=0.0):
    p = nn.init_dae_params(n, seed=0)
    for _, arr in p.param_items():
        arr[:] = 0.0
    p.out_b[0] = out_bias
    return p


def constant_window_model(n=8, value=5.0, out_bias=0.0, bound=1.0):
    """HI of the constant-`value` window is exactly |out_bias| under this model."""
    return comp.ComponentModel(
        spec=comp.SensorSpec("s", "T"), dae=zero_dae(n, out_bias),
        normalizer=comp.Normalizer(value, 1.0, degenerate=True),
        window_size=n, hi_upper_bound=bound, calibrated=True)


class TestNormalizer:
    def test_two_point_series(self):
        norm = comp.fit_normalizer([0.0, 2.0])
        assert norm.mean == 1.0
        assert norm.std == 1.0  # population sigma
        assert not norm.degenerate

    def test_constant_series_degenerate_fallback(self):
        norm = comp.fit_normalizer([5.0, 5.0, 5.0])
        assert norm.mean == 5.0
        assert norm.std == 1.0
        assert norm.degenerate

    def test_zscore_idempotence(self):
        rng = np.random.default_rng(0)
        series = rng.normal(3.0, 2.5, size=500)
        z = comp.fit_normalizer(series).normalize(series)
        refit = comp.fit_normalizer(z)
        assert abs(refit.mean) < 1e-12
        assert abs(refit.std - 1.0) < 1e-12

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            comp.fit_normalizer([1.0])


class TestMakeWindows:
    def test_counting_and_last_window(self):
        series = SegmentedSeries.single(np.arange(1.0, 11.0))
        windows = comp.make_windows(series, 4, 1)
        assert len(windows) == 7
        assert np.array_equal(windows[-1], np.array([7.0, 8.0, 9.0, 10.0]))

    def test_short_segment_contributes_nothing(self):
        series = SegmentedSeries([("a", np.arange(5.0)), ("b", np.arange(3.0))])
        windows = comp.make_windows(series, 4, 1)
        assert len(windows) == 2
        assert np.array_equal(windows[0], np.arange(4.0))
        assert np.array_equal(windows[1], np.arange(1.0, 5.0))

    def test_too_short_yields_empty(self):
        assert comp.make_windows(SegmentedSeries.single(np.arange(3.0)), 4) == []

    def test_windows_do_not_mutate_source(self):
        series = SegmentedSeries.single(np.arange(10.0))
        comp.make_windows(series, 4)[0][:] = -1
        assert np.array_equal(series.segments[0][1], np.arange(10.0))

    @given(st.lists(st.integers(min_value=1, max_value=12), min_size=1, max_size=5),
           st.integers(min_value=1, max_value=6),
           st.integers(min_value=1, max_value=4))
    @settings(max_examples=60, deadline=None)
    def test_matches_brute_force_and_never_spans_segments(self, seg_lens, n, stride):
        segments = []
        offset = 0.0
        for k, length in enumerate(seg_lens):
            segments.append((k, np.arange(offset, offset + length)))
            offset += 1000.0 + length  # gap makes cross-segment windows detectable
        series = SegmentedSeries(segments)

        expected = []
        for _, values in segments:
            for start in range(0, len(values) - n + 1, stride):
                expected.append(values[start:start + n])
        got = comp.make_windows(series, n, stride)
        assert len(got) == len(expected)
        for g, e in zip(got, expected):
            assert np.array_equal(g, e)
        for g in got:
            # Values inside one segment are consecutive; a span would jump by >1000.
            assert np.all(np.diff(g) == 1.0)

    def test_end_indices_are_stream_positions(self):
        series = SegmentedSeries([("a", np.arange(5.0)), ("b", np.arange(6.0))])
        ends = [e for e, _ in comp.windows_with_ends(series, 3, 1)]
        assert ends == [3, 4, 5, 8, 9, 10, 11]


class TestHiScore:
    def test_direct_mae_arithmetic(self):
        hi = comp.hi_from_reconstruction(np.array([0.0, 1.0, 0.0, 1.0]),
                                         np.array([0.5, 0.5, 0.5, 0.5]))
        assert hi == pytest.approx(0.5)

    def test_perfect_reconstruction_is_zero(self):
        model = constant_window_model(out_bias=0.0)
        assert comp.compute_hi(model, np.full(8, 5.0)) == 0.0

    def test_constant_offset_reconstruction(self):
        model = constant_window_model(out_bias=0.5)
        assert comp.compute_hi(model, np.full(8, 5.0)) == pytest.approx(0.5)

    def test_wrong_length(self):
        with pytest.raises(DimensionError):
            comp.compute_hi(constant_window_model(), np.zeros(9))

    def test_affine_rescaling_invariance(self):
        rng = np.random.default_rng(1)
        raw = rng.normal(10.0, 2.0, size=200)
        rescaled = 3.5 * raw - 40.0
        dae = nn.init_dae_params(8, seed=4)
        norm_a = comp.fit_normalizer(raw)
        norm_b = comp.fit_normalizer(rescaled)
        model_a = comp.ComponentModel(comp.SensorSpec("a", "T"), dae, norm_a, 8, 1.0)
        model_b = comp.ComponentModel(comp.SensorSpec("a", "T"), dae, norm_b, 8, 1.0)
        for start in range(0, 40, 8):
            hi_a = comp.compute_hi(model_a, raw[start:start + 8])
            hi_b = comp.compute_hi(model_b, rescaled[start:start + 8])
            assert hi_a == pytest.approx(hi_b, abs=1e-9)


class TestCalibrateBound:
    def test_two_point_series(self):
        bound, mean, std = comp.calibrate_bound([0.0, 2.0])
        assert mean == 1.0
        assert std == pytest.approx(math.sqrt(2.0))  # sample std
        assert bound == pytest.approx(9.0 * math.sqrt(2.0))

    def test_constant_series_floors_at_eps(self):
        # The fp mean of three 0.1s is off by an ulp, so the sample std is
        # ~1e-17 rather than exactly 0; the eps floor absorbs that.
        bound, _, std = comp.calibrate_bound([0.1, 0.1, 0.1])
        assert std < 1e-15
        assert bound == comp.DEFAULT_EPS_MIN

    def test_nine_times_sigma(self):
        # Two points with sample std exactly 0.01.
        delta = 0.01 * math.sqrt(2.0)
        bound, _, std = comp.calibrate_bound([0.5, 0.5 + delta])
        assert std == pytest.approx(0.01)
        assert bound == pytest.approx(0.09)

    def test_mean_plus_mode_adds_mean(self):
        values = [0.2, 0.4, 0.6]
        b9, mean, std = comp.calibrate_bound(values)
        bmp, mean2, std2 = comp.calibrate_bound(values, comp.BOUND_MEAN_PLUS_NINE_SIGMA)
        assert (mean, std) == (mean2, std2)
        assert bmp == pytest.approx(mean + 9.0 * std)
        assert b9 == pytest.approx(9.0 * std)

    def test_mean_plus_mode_keeps_eps_margin_over_mean(self):
        bound, mean, _ = comp.calibrate_bound([0.3, 0.3, 0.3],
                                              comp.BOUND_MEAN_PLUS_NINE_SIGMA)
        assert bound == pytest.approx(mean + comp.DEFAULT_EPS_MIN)
        assert bound > mean

    def test_unknown_mode(self):
        with pytest.raises(ConfigurationError):
            comp.calibrate_bound([0.0, 1.0], "median")

    def test_insufficient(self):
        with pytest.raises(InsufficientDataError):
            comp.calibrate_bound([0.5])


class TestStep:
    def test_hi_equal_to_bound_is_inside(self):
        model = constant_window_model(out_bias=0.5, bound=0.5)
        rec = comp.step(model, np.full(8, 5.0), t=10)
        assert rec.hi == 0.5
        assert not rec.over_bound

    def test_hi_above_bound_is_over(self):
        model = constant_window_model(out_bias=0.5, bound=0.5 / 1.01)
        rec = comp.step(model, np.full(8, 5.0), t=11)
        assert rec.over_bound

    def test_perfect_model_never_over(self):
        model = constant_window_model(out_bias=0.0, bound=comp.DEFAULT_EPS_MIN)
        rec = comp.step(model, np.full(8, 5.0), t=1)
        assert rec.hi == 0.0
        assert not rec.over_bound


class TestBurnInFit:
    def test_fits_and_calibrates(self, pretrained_w8):
        rng = np.random.default_rng(2)
        series = SegmentedSeries.single(10.0 + np.sin(np.arange(90) / 5.0)
                                        + rng.normal(0, 0.2, size=90))
        cfg = nn.TrainConfig(seed=7, max_epochs=40)
        model, report = comp.burn_in_fit(comp.SensorSpec("x", "T"),
                                         pretrained_w8["T"], series, 8, cfg)
        assert model.calibrated
        assert report.epochs_run >= 1
        # Bound matches a recomputation from the stored statistics.
        expected = max(9.0 * model.burn_in_hi_std, comp.DEFAULT_EPS_MIN)
        assert model.hi_upper_bound == pytest.approx(expected)
        # And matches a from-scratch two-pass oracle over the burn-in windows.
        his = [comp.compute_hi(model, w) for w in comp.make_windows(series, 8, 1)]
        m = sum(his) / len(his)
        s = math.sqrt(sum((h - m) ** 2 for h in his) / (len(his) - 1))
        assert model.burn_in_hi_mean == pytest.approx(m, rel=1e-12)
        assert model.burn_in_hi_std == pytest.approx(s, rel=1e-12)

    def test_constant_series_is_degenerate_but_fits(self, pretrained_w8):
        series = SegmentedSeries.single(np.full(30, 7.0))
        cfg = nn.TrainConfig(seed=1, max_epochs=10)
        model, _ = comp.burn_in_fit(comp.SensorSpec("c", "T"),
                                    pretrained_w8["T"], series, 8, cfg)
        assert model.normalizer.degenerate
        assert model.hi_upper_bound >= comp.DEFAULT_EPS_MIN

    def test_too_few_windows(self, pretrained_w8):
        series = SegmentedSeries.single(np.arange(8.0))
        with pytest.raises(InsufficientDataError):
            comp.burn_in_fit(comp.SensorSpec("x", "T"), pretrained_w8["T"],
                             series, 8, nn.TrainConfig(seed=0))

    def test_window_size_mismatch(self, pretrained_w8):
        series = SegmentedSeries.single(np.arange(40.0))
        with pytest.raises(ConfigurationError):
            comp.burn_in_fit(comp.SensorSpec("x", "T"), pretrained_w8["T"],
                             series, 16, nn.TrainConfig(seed=0))
