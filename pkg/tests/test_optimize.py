import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fdnfit import (
    ConfigurationError,
    DomainError,
    EarlyReflections,
    FitConfig,
    NetworkParams,
    TargetMetrics,
    compute_metrics,
    early_constants,
    fit,
    impulse_response,
    initialize,
    inverse_reparameterize,
    reparameterize,
)

from conftest import FS, KAPPAS, ground_truth_case

# (1e-3) ** (1 / 4735), checked by raising back to the 4735th power
ALPHA0_AMPLITUDE_4735 = 0.9985421924042942


def targets_of(metrics, length, **kw):
    return TargetMetrics.from_metrics(metrics, FS, horizon_samples=length, **kw)


class TestReparameterize:
    def test_zero(self):
        assert reparameterize(0.0) == 0.5

    def test_round_trip(self):
        assert reparameterize(inverse_reparameterize(0.9)) == pytest.approx(0.9, abs=1e-12)

    def test_saturation_stays_inside(self):
        v = reparameterize([-20.0, 20.0])
        assert np.all((v > 0.0) & (v < 1.0))

    @pytest.mark.parametrize("v", [0.0, 1.0])
    def test_inverse_domain(self, v):
        with pytest.raises(DomainError):
            inverse_reparameterize(v)

    @given(st.floats(1e-6, 1 - 1e-6))
    def test_round_trip_property(self, v):
        assert reparameterize(inverse_reparameterize(v)) == pytest.approx(v, abs=1e-12)


class TestInitialize:
    tm = TargetMetrics(-0.004, 0.99, 264.0, 4735.0, decay_form="amplitude")

    def test_amplitude_heuristic(self):
        v = reparameterize(initialize(0, 0, self.tm))
        assert v[0] == pytest.approx(ALPHA0_AMPLITUDE_4735, rel=1e-12)
        assert v[0] ** 4735 == pytest.approx(1e-3, rel=1e-9)
        np.testing.assert_allclose(v[1:], 0.05, rtol=1e-12)
        assert v.size == 17

    def test_decay_curve_heuristic(self):
        tm = TargetMetrics(-0.004, 0.99, 264.0, 4735.0)
        v = reparameterize(initialize(0, 0, tm))
        assert 20 * math.log10(v[0]) * 4735 == pytest.approx(-30.0, rel=1e-9)

    def test_deterministic(self):
        np.testing.assert_array_equal(initialize(3, 2, self.tm), initialize(3, 2, self.tm))

    def test_restarts_differ(self):
        starts = [initialize(3, i, self.tm) for i in range(8)]
        assert len({s.tobytes() for s in starts}) == 8
        assert not np.array_equal(initialize(3, 1, self.tm), initialize(4, 1, self.tm))


class TestFitConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            {"step_size": 0.0},
            {"tolerance": -1.0},
            {"restarts": 0},
            {"method": "adam"},
            {"mode": "analog"},
            {"weights": (1.0, 1.0, 1.0)},
            {"normalization": "none"},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigurationError):
            FitConfig(**kw)


@pytest.fixture(scope="module")
def case0():
    fdn, early, ec, metrics, rir = ground_truth_case(0)
    return ec, targets_of(metrics, len(rir)), metrics


class TestFit:
    @pytest.mark.parametrize("method", ["preconditioned", "gd"])
    def test_trace_is_monotone(self, case0, method):
        ec, tm, _ = case0
        config = FitConfig(method=method, max_iterations=300 if method == "gd" else 20000, restarts=1)
        p, report = fit(tm, ec, KAPPAS, config)
        losses = [row[1] for row in report.trace]
        assert len(losses) == report.iterations_used + 1
        assert all(b <= a for a, b in zip(losses, losses[1:]))
        assert report.final_loss == losses[-1]
        assert 0.0 < p.alpha < 1.0 and all(0.0 < b < 1.0 for b in p.betas)

    def test_round_trip(self, case0):
        ec, tm, metrics = case0
        _, report = fit(tm, ec, KAPPAS)
        assert report.converged and report.final_loss <= 1e-12
        got = report.achieved_metrics
        assert abs(got.clarity - metrics.clarity) <= 1e-3
        assert abs(got.definition - metrics.definition) <= 5e-4
        assert abs(got.center_time_samples - metrics.center_time_samples) <= 2e-3 * metrics.center_time_samples
        assert abs(got.t30_samples - metrics.t30_samples) <= 0.11 * metrics.t30_samples

    def test_achieved_metrics_close_the_loop(self, case0):
        ec, tm, _ = case0
        p, report = fit(tm, ec, KAPPAS)
        early = EarlyReflections(ec.delays, ec.gains)
        rir = impulse_response(NetworkParams(FS, p, early), tm.horizon_samples)
        assert compute_metrics(rir) == report.achieved_metrics

    def test_deterministic(self, case0):
        ec, tm, _ = case0
        config = FitConfig(restarts=3, stop_at_first_converged=False, seed=11)
        a = fit(tm, ec, KAPPAS, config)
        b = fit(tm, ec, KAPPAS, config)
        assert a[0] == b[0]
        assert a[1].to_dict() == b[1].to_dict()
        assert a[1].trace == b[1].trace

    def test_parallel_restarts_match_serial(self, case0):
        ec, tm, _ = case0
        serial = FitConfig(restarts=3, stop_at_first_converged=False)
        threaded = FitConfig(restarts=3, stop_at_first_converged=False, n_jobs=3)
        assert fit(tm, ec, KAPPAS, serial)[0] == fit(tm, ec, KAPPAS, threaded)[0]

    def test_converged_implies_tolerance(self, case0):
        ec, tm, _ = case0
        for tol in (1e-6, 1e-12):
            _, report = fit(tm, ec, KAPPAS, FitConfig(tolerance=tol))
            assert report.final_loss >= 0.0
            assert report.converged == (report.final_loss <= tol)

    def test_unreachable_is_best_effort(self, case0):
        ec, tm, _ = case0
        # clarity far above anything the fixed early taps allow
        bad = TargetMetrics(0.0, tm.definition, tm.center_time_samples, tm.t30_samples, horizon_samples=tm.horizon_samples)
        p, report = fit(bad, ec, KAPPAS, FitConfig(restarts=2, max_iterations=500))
        assert not report.converged
        assert math.isfinite(report.final_loss)
        assert 0.0 < p.alpha < 1.0

    def test_t30_before_last_loop(self, case0):
        ec, tm, _ = case0
        with pytest.raises(ConfigurationError):
            fit(TargetMetrics(-0.1, 0.9, 500.0, 1000.0), ec, KAPPAS)

    def test_definition_out_of_range(self):
        with pytest.raises(ConfigurationError):
            TargetMetrics(-0.1, 1.5, 500.0, 5000.0)
        with pytest.raises(ConfigurationError):
            TargetMetrics(-0.1, 0.0, 500.0, 5000.0)

    def test_all_energy_early(self):
        # D = 1 with T30 past the last loop: the tail has to die out before
        # the definition window closes yet still set T30
        early = EarlyReflections((0, 50, 400), (1.0, 0.5, 0.3))
        ec = early_constants(early, FS)
        tm = TargetMetrics(-0.3, 1.0, 1500.0, 3000.0, horizon_samples=FS)
        p, report = fit(tm, ec, KAPPAS, FitConfig(restarts=2))
        assert 0.0 < p.alpha < 1.0 and all(0.0 < b < 1.0 for b in p.betas)
        assert report.final_loss >= 0.0
        assert report.converged == (report.final_loss <= 1e-12)
        assert report.achieved_metrics.definition >= 1.0 - 1e-3
