import math

import numpy as np
import pytest

from chemostat_dde import (BoundViolated, GridTooLarge, HorizonTooShort, NotPeriodic,
                           compute_phi_periodic, compute_washout_general, compute_washout_periodic, constant_phi,
                           containment_radius, contraction_bound, lemma_contraction_check,
                           make_model, proof_constants)
from chemostat_dde.lemmas import phi_z

from oracles import constant_phi_bisection, constant_phi_lambertw, fourier_washout


def model_with(tau=0.5, D=None, s0=None, period=1.0, p=None):
    D = D or {"kind": "constant", "value": 1.0}
    s0 = s0 or {"kind": "constant", "value": 1.0}
    p = p or {"kind": "monod", "m": 3.0, "K": 1.0}
    return make_model(tau, p, D, s0, period)


FOURIER_FEED = {"kind": "fourier", "mean": 1.0, "cos": [0.4], "period": 2.0}
PIECEWISE_D = {"kind": "piecewise", "breakpoints": [0, 0.4], "values": [0.4, 1.2], "period": 1.0}
PIECEWISE_S0 = {"kind": "piecewise", "breakpoints": [0, 0.7], "values": [1.5, 0.8], "period": 1.0}


class TestWashoutPeriodic:
    def test_constant_inputs(self):
        w = compute_washout_periodic(model_with(D={"kind": "constant", "value": 0.7},
                                                s0={"kind": "constant", "value": 1.3}, period=None))
        np.testing.assert_allclose(w.z, 1.3, rtol=1e-14)

    @pytest.mark.parametrize("d", [0.3, 1.0, 2.5])
    def test_fourier_closed_form(self, d):
        model = model_with(D={"kind": "constant", "value": d}, s0=FOURIER_FEED, period=2.0)
        w = compute_washout_periodic(model)
        t = np.linspace(0, 2.0, 301)
        np.testing.assert_allclose(w(t), fourier_washout(t, d, 0.4, 2.0), atol=1e-8)

    def test_piecewise_periodicity(self):
        w = compute_washout_periodic(model_with(D=PIECEWISE_D, s0=PIECEWISE_S0))
        assert w.periodicity_residual < 1e-9
        assert w.equation_residual < 1e-8

    def test_bounds(self):
        model = model_with(D=PIECEWISE_D, s0=PIECEWISE_S0)
        w = compute_washout_periodic(model)
        assert 0 < w.lower and w.upper <= model.s_upper
        assert model.p.value(w.lower) > 0

    def test_shift_by_period(self):
        w = compute_washout_periodic(model_with(s0=FOURIER_FEED, period=2.0))
        t = np.linspace(0.1, 1.9, 17)
        np.testing.assert_allclose(w(t + 2.0), w(t), atol=1e-10)
        np.testing.assert_allclose(w(t + 6.0), w(t), atol=1e-10)

    def test_needs_period(self):
        model = make_model(0.5, {"kind": "monod", "m": 1, "K": 1}, {"kind": "constant", "value": 1},
                           {"kind": "sampled", "t": [0, 10, 20], "values": [1, 2, 1]})
        with pytest.raises(NotPeriodic):
            compute_washout_periodic(model)


class TestWashoutGeneral:
    def test_agrees_with_periodic(self):
        model = model_with(D=PIECEWISE_D, s0=PIECEWISE_S0)
        per = compute_washout_periodic(model)
        gen = compute_washout_general(model, 80.0)
        t = np.linspace(gen.t[0], 80.0, 400)
        assert np.max(np.abs(gen(t) - per(t))) < 1e-8

    def test_constant_tail(self):
        gen = compute_washout_general(model_with(s0={"kind": "constant", "value": 1.7},
                                                 period=None), 60.0)
        assert np.max(np.abs(gen.z - 1.7)) < 1e-10

    def test_aperiodic_feed_residual(self):
        model = make_model(0.5, {"kind": "monod", "m": 1, "K": 1}, {"kind": "constant", "value": 0.8},
                           {"kind": "sampled", "t": np.linspace(0, 100, 41),
                            "values": 1.2 + 0.3 * np.sin(np.sqrt(2) * np.linspace(0, 100, 41)),
                            "interpolation": "pchip"})
        gen = compute_washout_general(model, 100.0)
        assert gen.burn_in >= math.log(1e10) / 0.8 - 0.05
        assert gen.equation_residual < 1e-8

    def test_horizon_too_short(self):
        with pytest.raises(HorizonTooShort):
            compute_washout_general(model_with(period=None), 5.0)


class TestPhi:
    def test_no_delay(self):
        phi = compute_phi_periodic(model_with(tau=0.0, s0=FOURIER_FEED, period=2.0))
        assert np.all(phi.values == 1.0)
        assert phi.identity_residual == 0.0

    @pytest.mark.parametrize("tau", [0.25, 0.5, 2.0])
    @pytest.mark.parametrize("m", [0.5, 3.0])
    def test_constant_environment_oracles(self, tau, m):
        model = model_with(tau=tau, p={"kind": "monod", "m": m, "K": 1.0}, period=None)
        phi = compute_phi_periodic(model)
        p_v = model.p.value(1.0)
        assert np.max(np.abs(phi.values - constant_phi_bisection(p_v, tau))) < 1e-10
        assert abs(constant_phi_lambertw(p_v, tau) - constant_phi(p_v, tau)) < 1e-13

    def test_periodic_identity_and_range(self):
        phi = compute_phi_periodic(model_with(D=PIECEWISE_D, s0=PIECEWISE_S0))
        assert phi.identity_residual < 1e-6
        assert phi.periodicity_residual < 1e-8
        assert 0 < phi.min and phi.max <= 1

    @pytest.mark.parametrize("kappa", [1e-3, 1e3])
    def test_scale_invariance(self, kappa):
        model = model_with(s0=FOURIER_FEED, period=2.0)
        w = compute_washout_periodic(model)
        ref = compute_phi_periodic(model, w)
        scaled = compute_phi_periodic(model, w, c_history=kappa)
        assert np.max(np.abs(ref.values - scaled.values)) < 1e-12

    def test_contraction_ratios_below_one(self):
        phi = compute_phi_periodic(model_with(tau=1.0, D=PIECEWISE_D, s0=PIECEWISE_S0))
        ratios = [r for r in phi.contraction_ratios if np.isfinite(r)]
        assert ratios and max(ratios) < 1

    def test_growth_exponent_matches_lambda(self):
        phi = compute_phi_periodic(model_with(D=PIECEWISE_D, s0=PIECEWISE_S0))
        assert phi.c_growth_exponent == pytest.approx(phi.lambda_ * phi.period, abs=1e-8)

    def test_incommensurate_delay(self):
        model = model_with(tau=1 / math.sqrt(2), s0=FOURIER_FEED, period=2.0)
        phi = compute_phi_periodic(model)
        assert phi.identity_residual < 1e-6
        t = np.linspace(0, 2, 9)
        np.testing.assert_allclose(phi(t + 2.0), phi(t), atol=1e-10)

    def test_tiny_delay_rejected(self):
        with pytest.raises(GridTooLarge):
            compute_phi_periodic(model_with(tau=1e-9, period=None))

    def test_z_star_column(self):
        model = model_with(s0=FOURIER_FEED, period=2.0)
        w = compute_washout_periodic(model)
        phi = compute_phi_periodic(model, w)
        np.testing.assert_allclose(phi_z(phi, phi.t), w(phi.t), atol=1e-12)


class TestContraction:
    @pytest.fixture
    def model(self):
        return model_with(tau=1.0, D=PIECEWISE_D, s0=PIECEWISE_S0)

    def test_identical_histories(self, model):
        w = compute_washout_periodic(model)
        rep = lemma_contraction_check(model, w, 1.0, 1.0)
        assert np.all(rep.difference == 0.0) and rep.passed

    def test_scaled_histories(self, model):
        w = compute_washout_periodic(model)
        rep = lemma_contraction_check(model, w, 1.0, 10.0)
        assert np.max(rep.difference) < 1e-12

    def test_bound_holds(self, model):
        w = compute_washout_periodic(model)
        rep = lemma_contraction_check(model, w, 1.0, lambda t: 1.0 + t + model.tau)
        assert rep.passed and rep.worst_ratio < 1
        assert rep.t[-1] >= 20 * model.omega - 1e-9

    def test_violation_raises(self, model, monkeypatch):
        import chemostat_dde.bounds as bounds
        monkeypatch.setattr(bounds, "contraction_bound", lambda t, *a: 1e-30 * np.ones_like(t))
        w = compute_washout_periodic(model)
        with pytest.raises(BoundViolated):
            lemma_contraction_check(model, w, 1.0, lambda t: 2.0 + t)

    def test_needs_delay(self):
        model = model_with(tau=0.0)
        with pytest.raises(ValueError):
            lemma_contraction_check(model, compute_washout_periodic(model), 1.0, 2.0)


class TestProofConstants:
    def test_monod(self):
        model = model_with(p={"kind": "monod", "m": 2.0, "K": 0.5}, period=None)
        c = proof_constants(model)
        assert c["L"] == pytest.approx(2.0 / 0.5)
        assert c["M"] == pytest.approx(max(2.0 * 2 / 2.5, 1 / 3))

    def test_linear(self):
        model = model_with(tau=2.0, p={"kind": "linear", "k": 0.05}, period=None)
        c = proof_constants(model)
        assert c["L"] == pytest.approx(0.05)
        assert c["M"] == pytest.approx(max(2 * 0.05, 1 / 9))

    def test_no_delay_branch(self):
        model = model_with(tau=0.0, p={"kind": "linear", "k": 0.1}, period=None)
        assert proof_constants(model)["M"] >= 1.0

    def test_bound_shape(self):
        t = np.linspace(1.5, 30, 50)
        b = contraction_bound(t, 1.0, 0.8, 1.0, 0.5)
        assert np.all(b > 0)
        # eventually decays geometrically
        assert b[-1] < b[len(b) // 2]

    def test_containment_radius(self):
        model = model_with(period=None)
        r = containment_radius(model, 1.0)
        assert r == pytest.approx(1 + 7 + 3 * model.p.value(3.0) * model.tau)
