import math

import numpy as np
import pytest

from chemostat_dde import (AssumptionViolation, Constant, Fourier, HistorySegment, Linear, Monod,
                           NegativeHistory, NotPeriodic, PeriodMismatch, PiecewiseConstant,
                           Sampled, Tabulated, make_model, make_signal, make_uptake)
from chemostat_dde.signals import is_period_of, signal_average


MONOD = {"kind": "monod", "m": 1.0, "K": 1.0}


class TestUptake:
    @pytest.mark.parametrize("law", [Monod(2.0, 0.5), Linear(1.5),
                                     Tabulated([0, 0.5, 1, 2, 4], [0, 0.4, 0.6, 0.8, 0.9])])
    def test_zero_at_origin_and_increasing(self, law):
        s = np.linspace(0, 5, 1001)
        assert law.value(0.0) == 0.0
        assert np.all(law.derivative(s) > 0)
        assert np.all(np.diff(law(s)) > 0)

    @pytest.mark.parametrize("law", [Monod(2.0, 0.5), Linear(1.5)])
    def test_derivative_matches_central_differences(self, law):
        s = np.linspace(0.1, 3.0, 50)
        errs = []
        for eps in (1e-2, 5e-3):
            fd = (law(s + eps) - law(s - eps)) / (2 * eps)
            errs.append(np.max(np.abs(fd - law.derivative(s))))
        # O(eps^2): halving eps divides the error by about 4 (exact for linear)
        assert errs[1] <= errs[0] / 3.5 or errs[0] < 1e-12

    def test_tabulated_derivative_second_order(self):
        law = Tabulated([0, 1, 2, 3], [0, 1, 1.5, 1.75])
        s = np.array([0.3, 0.7, 1.4, 2.2, 2.8])
        e1 = np.abs((law(s + 1e-3) - law(s - 1e-3)) / 2e-3 - law.derivative(s))
        assert np.max(e1) < 1e-5

    def test_tabulated_interpolates_table(self):
        s = [0, 1, 2, 3]
        v = [0, 1, 1.5, 1.75]
        law = Tabulated(s, v)
        np.testing.assert_allclose(law(np.array(s, float)), v, atol=1e-15)

    def test_tabulated_rejects_decreasing_pair(self):
        with pytest.raises(AssumptionViolation) as err:
            Tabulated([0, 1, 2], [0, 1, 0.9])
        assert err.value.assumption == "A1"

    def test_tabulated_needs_origin(self):
        with pytest.raises(AssumptionViolation):
            Tabulated([0, 1], [0.1, 1])

    @pytest.mark.parametrize("m,K", [(0, 1), (1, 0), (-1, 1)])
    def test_monod_parameters(self, m, K):
        with pytest.raises(AssumptionViolation):
            Monod(m, K)

    def test_monod_inverse(self):
        law = Monod(3.0, 2.0)
        for u in (0.1, 1.0, 2.9):
            assert law.value(law.inverse(u)) == pytest.approx(u, rel=1e-14)

    def test_make_uptake(self):
        assert isinstance(make_uptake("Monod", m=1, K=2), Monod)
        assert isinstance(make_uptake("linear", k=1), Linear)
        with pytest.raises(ValueError):
            make_uptake("hill", n=2)


class TestSignals:
    def test_constant(self):
        c = Constant(2.5)
        assert c(3.0) == 2.5
        assert c.lower == c.upper == 2.5
        assert signal_average(c, 1.7) == pytest.approx(2.5, rel=1e-14)

    def test_fourier_average_is_mean(self):
        f = Fourier(1.3, cos=[0.2, 0.1], period=2.0)
        assert signal_average(f, 2.0) == pytest.approx(1.3, rel=1e-12)

    def test_fourier_bounds_are_conservative(self):
        f = Fourier(1.0, cos=[0.3], sin=[0.2], period=1.0)
        assert f.lower == pytest.approx(0.5)
        assert f.upper == pytest.approx(1.5)
        t = np.linspace(0, 1, 2001)
        assert f.lower <= f(t).min() and f(t).max() <= f.upper

    def test_piecewise_average(self):
        f = PiecewiseConstant([0.0, 0.5], [1.0, 3.0], period=1.0)
        assert signal_average(f, 1.0) == pytest.approx(2.0, rel=1e-14)

    def test_piecewise_one_sided_values(self):
        f = PiecewiseConstant([0.0, 0.5], [1.0, 3.0], period=1.0)
        assert f.evaluate(0.5, "right") == 3.0
        assert f.evaluate(0.5, "left") == 1.0
        assert f.evaluate(1.0, "left") == 3.0
        assert f.evaluate(1.0, "right") == 1.0
        np.testing.assert_allclose(f.breakpoints(0.2, 2.2), [0.5, 1.0, 1.5, 2.0])

    @pytest.mark.parametrize("shift", [0.1, 0.37, 2.5])
    def test_average_shift_invariant(self, shift):
        for f in (PiecewiseConstant([0.0, 0.3], [0.5, 2.0], 1.0),
                  Fourier(1.0, cos=[0.4], sin=[0.1], period=1.0)):
            assert signal_average(f, 1.0, shift) == pytest.approx(signal_average(f, 1.0),
                                                                  rel=1e-10)

    def test_average_rejects_wrong_period(self):
        with pytest.raises(NotPeriodic):
            signal_average(Fourier(1.0, cos=[0.3], period=1.0), 0.7)

    def test_periodicity_check(self):
        f = Fourier(1.0, cos=[0.3], period=0.5)
        assert is_period_of(f, 0.5) and is_period_of(f, 1.0)
        assert not is_period_of(f, 0.3)

    def test_sampled_bounds_and_values(self):
        f = Sampled([0, 1, 2, 3], [1.0, 2.0, 1.5, 1.5])
        assert f.lower == 1.0 and f.upper == 2.0
        assert f(0.5) == pytest.approx(1.5)

    def test_make_signal(self):
        assert isinstance(make_signal("piecewise", breakpoints=[0], values=[1], period=1),
                          PiecewiseConstant)
        with pytest.raises(ValueError):
            make_signal("square")


class TestModel:
    def test_valid_model(self):
        m = make_model(1.0, MONOD, {"kind": "constant", "value": 0.5},
                       {"kind": "constant", "value": 1.0})
        assert m.tau == 1.0 and m.is_autonomous and m.is_periodic
        assert m.flags == ()

    def test_zero_dilution_rejected(self):
        with pytest.raises(AssumptionViolation) as err:
            make_model(1.0, MONOD, {"kind": "constant", "value": 0.0},
                       {"kind": "constant", "value": 1.0})
        assert err.value.assumption == "A2"

    def test_feed_must_be_positive(self):
        with pytest.raises(AssumptionViolation):
            make_model(1.0, MONOD, {"kind": "constant", "value": 1.0},
                       {"kind": "fourier", "mean": 1.0, "cos": [1.0], "period": 1.0}, period=1.0)

    def test_period_mismatch(self):
        with pytest.raises(PeriodMismatch):
            make_model(0.5, MONOD, {"kind": "fourier", "mean": 1, "cos": [0.3], "period": 1.0},
                       {"kind": "constant", "value": 1.0}, period=0.75)

    def test_negative_delay_rejected(self):
        with pytest.raises(ValueError):
            make_model(-1.0, MONOD, {"kind": "constant", "value": 1.0},
                       {"kind": "constant", "value": 1.0})

    def test_discontinuous_inputs_flagged(self):
        m = make_model(0.5, MONOD, {"kind": "piecewise", "breakpoints": [0, 0.5],
                                    "values": [0.5, 1.0], "period": 1.0},
                       {"kind": "constant", "value": 1.0}, period=1.0)
        assert "discontinuous_D" in m.flags

    def test_uptake_checked_on_twice_feed_bound(self):
        m = make_model(0.0, {"kind": "linear", "k": 1.0}, {"kind": "constant", "value": 1.0},
                       {"kind": "constant", "value": 2.0})
        s = np.linspace(0, 2 * m.s_upper, 1000)
        assert np.all(m.p.derivative(s) > 0)

    def test_replace(self):
        m = make_model(0.5, MONOD, {"kind": "constant", "value": 1.0},
                       {"kind": "constant", "value": 1.0})
        m2 = m.replace(tau=1.0)
        assert m2.tau == 1.0 and m.tau == 0.5


class TestHistorySegment:
    def test_negative_rejected(self):
        with pytest.raises(NegativeHistory):
            HistorySegment(0.0, 1.0, [0.1, -0.1], [0.1, 0.1])

    def test_not_null(self):
        assert HistorySegment.constant(0.5, 0.1, 1.0).is_not_null()
        x = np.zeros(5)
        assert not HistorySegment(0.0, 1.0, np.ones(5), x).is_not_null()
        x[2] = 0.3
        assert HistorySegment(0.0, 1.0, np.ones(5), x).is_not_null()
        assert not HistorySegment(0.0, 1.0, np.zeros(5), x).is_not_null()

    def test_cubic_interpolation_is_exact_for_cubics(self):
        f = lambda t: 1 + t + 0.5 * t ** 2 + 0.1 * t ** 3  # noqa: E731
        df = lambda t: 1 + t + 0.3 * t ** 2  # noqa: E731
        t = np.linspace(-1, 0, 5)
        seg = HistorySegment(0.0, 1.0, f(t), f(t), df(t), df(t))
        tq = np.linspace(-1, 0, 37)
        s, _ = seg(tq)
        np.testing.assert_allclose(s, f(tq), atol=1e-14)

    def test_resample_and_distance(self):
        seg = HistorySegment.from_functions(np.cos, lambda t: 1 + 0.5 * np.sin(t), 2.0, 1.0, n=64)
        fine = seg.resample(128)
        assert fine.n_intervals == 128
        assert seg.distance(fine) < 1e-12
        assert seg.distance(seg.scaled_biomass(2.0)) > 0

    def test_tau_zero_segment(self):
        seg = HistorySegment(0.0, 0.0, [0.5], [0.2])
        assert seg.n_intervals == 0
        assert seg.norm() == pytest.approx(math.hypot(0.5, 0.2))
