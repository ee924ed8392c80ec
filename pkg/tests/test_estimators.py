import math
import statistics

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from homodyne_cov.estimators import (
    CalibrationError,
    CoMoments,
    EstimateWithError,
    InsufficientDataError,
    OutOfRangeError,
    Verdict,
    calibrate_snl,
    classify_state,
    covariance,
    covariance_to_db,
    covariance_two_pass,
    difference_variance,
    squeezing_from_covariance,
    squeezing_from_subtraction,
)
from homodyne_cov.experiments import accumulate
from homodyne_cov.states import GaussianState, LocalOscillator
from homodyne_cov.traces import DetectorNoiseModel, TracePair, sample_trace_pair

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
paired = st.lists(st.tuples(finite, finite), min_size=2, max_size=300)


def _pair(rows):
    a = np.array(rows)
    return TracePair(a[:, 0], a[:, 1])


class TestDifferenceVariance:
    def test_identical_channels(self):
        x = np.random.default_rng(0).normal(size=100)
        assert difference_variance(TracePair(x, x)).value == 0.0

    def test_hand_value(self):
        est = difference_variance(TracePair([1, 2, 3], [0, 0, 0]))
        assert est.value == pytest.approx(1.0)
        assert est.std_error == pytest.approx(1.0 * math.sqrt(2 / 2))
        assert est.n == 3

    def test_vacuum_monte_carlo(self, squeezed_config):
        cfg = squeezed_config.with_(state=GaussianState.vacuum())
        est = difference_variance(sample_trace_pair(cfg))
        assert abs(est.value - 1.0) < 4 * est.std_error

    @given(paired)
    def test_matches_statistics_module(self, rows):
        d = [a - b for a, b in rows]
        assert difference_variance(_pair(rows)).value == pytest.approx(
            statistics.variance(d), rel=1e-9, abs=1e-9
        )


class TestCovariance:
    def test_self_covariance_is_variance(self):
        x = np.random.default_rng(1).normal(size=1000)
        assert covariance(TracePair(x, x)).value == pytest.approx(np.var(x, ddof=1), rel=1e-12)

    def test_hand_value(self):
        assert covariance(TracePair([1, 2, 3], [3, 2, 1])).value == pytest.approx(-1.0)

    def test_squeezed_monte_carlo(self, squeezed_config):
        cfg = squeezed_config.with_(noise=DetectorNoiseModel(2.0, 1.5, 0.0))
        est = covariance(sample_trace_pair(cfg))
        assert est.value > 0
        assert abs(est.value - 0.079) < 4 * est.std_error

    def test_insufficient(self):
        with pytest.raises(InsufficientDataError):
            CoMoments().update([1.0], [2.0]).covariance()
        with pytest.raises(InsufficientDataError):
            EstimateWithError(1.0, 0.1, 1)

    def test_two_pass_constant(self):
        tp = TracePair(np.full(10, 3.0), np.full(10, -2.0))
        assert covariance_two_pass(tp).value == 0.0
        assert covariance(tp).value == 0.0

    def test_large_offset(self, squeezed_config):
        tp = sample_trace_pair(squeezed_config.with_(n_samples=200_000))
        shifted = TracePair(tp.ch1 + 1e8, tp.ch2 + 1e8)
        ref = covariance_two_pass(tp).value
        assert covariance_two_pass(shifted).value == pytest.approx(ref, rel=1e-6)
        assert covariance(shifted).value == pytest.approx(covariance_two_pass(shifted).value, rel=1e-10)

    @given(paired)
    def test_one_pass_matches_two_pass(self, rows):
        tp = _pair(rows)
        one, two = covariance(tp), covariance_two_pass(tp)
        scale = math.sqrt(np.var(tp.ch1, ddof=1) * np.var(tp.ch2, ddof=1))
        assert abs(one.value - two.value) <= 1e-10 * scale + 1e-12

    @given(paired, finite, finite)
    def test_shift_invariance(self, rows, a, b):
        tp = _pair(rows)
        moved = TracePair(tp.ch1 + a, tp.ch2 + b)
        s1 = math.sqrt(np.var(tp.ch1, ddof=1) * np.var(tp.ch2, ddof=1))
        assume(s1 > 1e-3)
        assert abs(covariance(moved).value - covariance(tp).value) <= 1e-9 * s1
        d0 = difference_variance(tp).value
        assume(d0 > 1e-3)
        assert difference_variance(moved).value == pytest.approx(d0, rel=1e-9)

    @given(paired, st.integers(1, 299))
    @settings(max_examples=100)
    def test_merge_matches_sequential(self, rows, cut):
        a = np.array(rows)
        cut = min(cut, len(rows) - 1)
        seq = CoMoments().update(a[:, 0], a[:, 1])
        left = CoMoments().update(a[:cut, 0], a[:cut, 1])
        right = CoMoments().update(a[cut:, 0], a[cut:, 1])
        merged = left.merge(right)
        assert merged.n == seq.n
        scale = max(np.abs(seq.m2).max(), 1.0)
        assert np.allclose(merged.m2, seq.m2, rtol=1e-12, atol=1e-12 * scale)

    def test_merge_with_empty(self):
        acc = CoMoments().update([1.0, 2.0, 4.0], [0.0, 1.0, 1.0])
        assert acc.merge(CoMoments()).covariance() == acc.covariance()
        assert CoMoments().merge(acc).covariance() == acc.covariance()

    def test_streamed_equals_in_memory(self, squeezed_config):
        cfg = squeezed_config.with_(n_samples=600_000)
        streamed = accumulate(cfg)
        tp = sample_trace_pair(cfg)
        assert streamed.covariance() == covariance(tp)
        assert streamed.difference_variance() == difference_variance(tp)


class TestNoiseRejection:
    def test_covariance_flat_difference_grows(self, squeezed_config):
        # each detector's EN variance in units of the shot-noise level (1.0 here)
        covs, dvars = [], []
        for i, scale in enumerate([0.0, 1.0, 10.0]):
            cfg = squeezed_config.with_(noise=DetectorNoiseModel.symmetric(scale), n_samples=10_000_000, seed=100 + i)
            acc = accumulate(cfg)
            covs.append(acc.covariance())
            dvars.append((scale, acc.difference_variance()))
        for i in range(3):
            for j in range(i + 1, 3):
                a, b = covs[i], covs[j]
                assert abs(a.value - b.value) < 4 * math.hypot(a.std_error, b.std_error)
        s0, d0 = dvars[0]
        for s, d in dvars[1:]:
            assert abs((d.value - d0.value) - 2 * s) < 4 * math.hypot(d.std_error, d0.std_error)

    def test_correlated_noise_bias(self, squeezed_config):
        cfg = squeezed_config.with_(noise=DetectorNoiseModel(1.0, 1.0, 1.0), n_samples=2_000_000)
        est = accumulate(cfg).covariance()
        assert abs((est.value - 0.079) - 1.0) < 4 * est.std_error


class TestCalibration:
    def test_exact_line(self):
        cal = calibrate_snl([(p, 2 * p) for p in (1, 2, 3, 5)])
        assert cal.slope == pytest.approx(2.0, abs=1e-12)
        assert cal.intercept == pytest.approx(0.0, abs=1e-12)
        assert cal.r_squared == pytest.approx(1.0)

    def test_extrapolation_drops_floor(self):
        cal = calibrate_snl([(p, 2 * p + 0.5) for p in (1, 2, 4, 8)])
        assert cal.slope == pytest.approx(2.0, abs=1e-12)
        assert cal.intercept == pytest.approx(0.5, abs=1e-12)
        assert cal.snl(0.1) == pytest.approx(0.2)

    @pytest.mark.parametrize(
        "ladder",
        [[(1, 1), (2, 2)], [(1, 1), (1, 2), (1, 3)], [(0, 1), (1, 2), (2, 3)], [(1, 3), (2, 2), (3, 1)]],
    )
    def test_errors(self, ladder):
        with pytest.raises(CalibrationError):
            calibrate_snl(ladder)

    def test_monte_carlo_ladder(self, squeezed_config):
        en_total = 0.02 * 8.0
        points = []
        for i, f in enumerate((1, 2, 4, 8)):
            cfg = squeezed_config.with_(
                state=GaussianState.vacuum(),
                lo=LocalOscillator(math.sqrt(f)),
                noise=DetectorNoiseModel.symmetric(en_total / 2),
                seed=500 + i,
            )
            points.append((float(f), difference_variance(sample_trace_pair(cfg)).value))
        cal = calibrate_snl(points)
        assert cal.slope == pytest.approx(1.0, rel=0.02)


class TestSqueezingFigures:
    def test_subtraction(self, squeezed_config):
        tp = TracePair([1, 2, 3], [0, 0, 0])
        assert squeezing_from_subtraction(tp, 1.0) == pytest.approx(0.0)
        db = squeezing_from_subtraction(sample_trace_pair(squeezed_config), 1.0)
        assert db == pytest.approx(-1.65, abs=0.1)

    def test_subtraction_en_dominated(self, squeezed_config):
        alpha, sigma2 = 0.05, 0.5
        cfg = squeezed_config.with_(lo=LocalOscillator(alpha), noise=DetectorNoiseModel.symmetric(sigma2))
        snl = alpha**2
        db = squeezing_from_subtraction(sample_trace_pair(cfg), snl)
        limit = 10 * math.log10((2 * sigma2 + 4 * alpha**2 * 0.171) / snl)
        assert db > 0
        assert db == pytest.approx(limit, abs=0.02)

    def test_covariance_inversion(self):
        assert covariance_to_db(0.0, 1.0) == 0.0
        assert covariance_to_db(0.079, 1.0) == pytest.approx(-1.65, abs=5e-3)
        assert covariance_to_db(-0.54, 1.0) == pytest.approx(5.0, abs=5e-3)
        # non-shot-noise-limited LO: V_phi = V_LO - cov / snl
        assert covariance_to_db(0.079, 1.0, lo_variance=0.3) == pytest.approx(
            10 * math.log10((0.3 - 0.079) / 0.25)
        )

    def test_covariance_out_of_range(self):
        with pytest.raises(OutOfRangeError) as info:
            covariance_to_db(0.3, 1.0)
        assert info.value.covariance == 0.3

    def test_covariance_monte_carlo(self, squeezed_config):
        cfg = squeezed_config.with_(noise=DetectorNoiseModel.symmetric(1.0))
        assert squeezing_from_covariance(sample_trace_pair(cfg), 1.0) == pytest.approx(-1.65, abs=0.1)


class TestClassify:
    def test_examples(self):
        v = classify_state(EstimateWithError(0.079, 0.001, 10**6))
        assert v.verdict is Verdict.SQUEEZED and v.z_score == pytest.approx(79)
        assert classify_state(EstimateWithError(0.0005, 0.001, 10**6)).verdict is Verdict.COHERENT_CONSISTENT
        assert classify_state(EstimateWithError(-0.54, 0.002, 10**6)).verdict is Verdict.EXCESS_NOISE

    def test_zero_error(self):
        assert classify_state(EstimateWithError(0.0, 0.0, 10)).verdict is Verdict.COHERENT_CONSISTENT
        v = classify_state(EstimateWithError(-1.0, 0.0, 10))
        assert v.verdict is Verdict.EXCESS_NOISE and v.z_score == -math.inf

    def test_non_finite(self):
        assert classify_state(EstimateWithError(math.nan, 0.1, 10)).verdict is Verdict.INCONCLUSIVE

    def test_threshold(self):
        est = EstimateWithError(0.004, 0.001, 100)
        assert classify_state(est).verdict is Verdict.SQUEEZED
        assert classify_state(est, z_threshold=5).verdict is Verdict.COHERENT_CONSISTENT
