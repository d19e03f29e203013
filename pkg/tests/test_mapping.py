import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sasvfuse.mapping import (LINEAR, SIGMOID, CalibratorParams, ConvergenceError,
                              apply_mapping, calibration_nll, fit_calibrator,
                              map_linear, map_sigmoid, sigmoid)
from sasvfuse.metrics import compute_eer
from sasvfuse.synth import oracle_calibrator


class TestSigmoid:
    def test_midpoint(self):
        assert sigmoid(0.0) == 0.5

    def test_known_value(self):
        assert sigmoid(2.0) == pytest.approx(0.8807970779778823, abs=1e-16)

    @given(st.floats(-700, 700))
    def test_symmetry_identity(self, s):
        assert sigmoid(s) + sigmoid(-s) == pytest.approx(1.0, abs=1e-12)

    def test_extreme_inputs_stable(self):
        assert sigmoid(-1000.0) == 0.0
        assert sigmoid(1000.0) == 1.0
        assert np.all(np.isfinite(sigmoid(np.array([-1e308, -50.0, 50.0, 1e308]))))

    def test_array_matches_scalar(self):
        xs = np.linspace(-30, 30, 101)
        assert np.array_equal(sigmoid(xs), np.array([sigmoid(float(x)) for x in xs]))


class TestMaps:
    def test_linear_endpoints(self):
        assert map_linear(-1.0) == 0.0
        assert map_linear(1.0) == 1.0
        assert map_linear(0.0) == 0.5

    def test_apply_dispatch(self):
        assert apply_mapping(LINEAR, 0.2) == pytest.approx(0.6, abs=1e-15)
        assert apply_mapping(SIGMOID, 0.0) == 0.5
        assert apply_mapping(CalibratorParams(0.0, 0.0), 0.77) == 0.5
        assert apply_mapping(CalibratorParams(2.0, -1.0), 0.5) == 0.5
        with pytest.raises(ValueError):
            apply_mapping("affine", 0.0)

    @given(st.floats(-1, 1), st.floats(-1, 1))
    def test_strict_monotonicity(self, s1, s2):
        if s1 == s2:
            return
        lo, hi = min(s1, s2), max(s1, s2)
        for kind in (LINEAR, SIGMOID, CalibratorParams(3.0, -0.2)):
            assert apply_mapping(kind, lo) < apply_mapping(kind, hi)


class TestFitCalibrator:
    def test_symmetric_data_zero_offset(self):
        s = np.array([0.8] * 12 + [-0.8] * 12)
        y = np.array([1] * 12 + [0] * 12)
        params = fit_calibrator(s, y, l2=0.01)
        assert abs(params.b) < 1e-6
        assert params.a > 0

    def test_constant_scores(self):
        s = np.full(30, 0.7)
        y = np.array([1, 0] * 15)
        params = fit_calibrator(s, y, l2=0.01)
        assert abs(params.a) < 1e-8
        assert sigmoid(params.b) == pytest.approx(0.5, abs=1e-8)

    def test_matches_grid_oracle(self):
        rng = np.random.default_rng(40)
        s = np.concatenate([rng.normal(0.5, 0.3, 20), rng.normal(-0.2, 0.3, 20)])
        y = np.array([1] * 20 + [0] * 20)
        fit = fit_calibrator(s, y, l2=0.01)
        oracle = oracle_calibrator(s, y, l2=0.01)
        nll_fit = calibration_nll(s, y, fit.a, fit.b, 0.01)
        nll_oracle = calibration_nll(s, y, oracle.a, oracle.b, 0.01)
        assert abs(nll_fit - nll_oracle) <= 1e-6
        assert nll_fit <= nll_oracle + 1e-6

    def test_convexity_sanity(self):
        rng = np.random.default_rng(41)
        s = np.concatenate([rng.normal(0.6, 0.4, 25), rng.normal(-0.1, 0.4, 25)])
        y = np.array([1] * 25 + [0] * 25)
        fit = fit_calibrator(s, y, l2=1e-4)
        nll_fit = calibration_nll(s, y, fit.a, fit.b, 1e-4)
        probes_a = rng.uniform(0, 20, 1000)
        probes_b = rng.uniform(-10, 10, 1000)
        for a, b in zip(probes_a, probes_b):
            assert nll_fit <= calibration_nll(s, y, a, b, 1e-4) + 1e-12

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="each class"):
            fit_calibrator([0.1, 0.2], [1, 1], l2=0.01)

    def test_iteration_cap_signals_pathology(self):
        s = np.array([1.0] * 5 + [-1.0] * 5)
        y = np.array([1] * 5 + [0] * 5)
        with pytest.raises(ConvergenceError):
            fit_calibrator(s, y, l2=0.0, max_iter=3)

    def test_gradient_norm_at_solution(self):
        rng = np.random.default_rng(42)
        s = np.concatenate([rng.normal(0.4, 0.5, 30), rng.normal(-0.3, 0.5, 30)])
        y = np.array([1] * 30 + [0] * 30)
        p = fit_calibrator(s, y, l2=1e-3, tol=1e-8)
        z = p.a * s + p.b
        r = sigmoid(z) - y
        ga = np.mean(r * s) + 1e-3 * p.a
        gb = np.mean(r) + 1e-3 * p.b
        assert np.hypot(ga, gb) < 1e-8


def test_calibration_preserves_eer_exactly():
    # order-preserving map: the error-rate curves are unchanged
    rng = np.random.default_rng(5)
    tar = np.round(rng.normal(0.5, 0.3, 40), 1)
    non = np.round(rng.normal(-0.2, 0.3, 60), 1)
    params = CalibratorParams(a=4.2, b=-0.7)
    raw = compute_eer(tar, non)
    cal = compute_eer(apply_mapping(params, tar), apply_mapping(params, non))
    assert raw.eer == cal.eer
