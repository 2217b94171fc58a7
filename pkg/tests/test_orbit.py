import numpy as np
import pytest

from chemostat_dde import (HistorySegment, NotPersistent, compute_washout_periodic,
                           constant_equilibrium, containment_radius, default_ensemble,
                           find_periodic_orbit, make_model, uniform_persistence_probe,
                           verify_orbit)
from chemostat_dde.integrator import S, X, Y
from chemostat_dde.orbit import attraction_rate, equilibrium_decay_root, poincare_map
from chemostat_dde.scenarios import scenario

from oracles import equilibrium


@pytest.fixture(scope="module")
def short_orbit():
    model = scenario("piecewise_persistent_short").model()
    return model, find_periodic_orbit(model)


class TestPeriodMap:
    def test_washout_segment_is_invariant(self, short_orbit):
        model, _ = short_orbit
        w = compute_washout_periodic(model)
        seg = w.history(0.0, model.tau, 0.0, 32)
        image = poincare_map(model, seg).moved_to(0.0)
        assert np.all(image.x == 0.0)
        assert seg.distance(image) < 1e-9

    def test_equilibrium_segment_is_fixed(self):
        model = scenario("constant_persistent").model()
        s, x, _ = equilibrium(4.0, 1.0, 1.0, 1.0, 0.5)
        seg = HistorySegment.constant(s, x, model.tau, 0.0, 16)
        assert seg.distance(poincare_map(model, seg).moved_to(0.0)) < 1e-8

    def test_iterates_stay_in_containment_ball(self, short_orbit):
        model, _ = short_orbit
        z0 = float(compute_washout_periodic(model)(0.0))
        radius = containment_radius(model, z0)
        bound = 3 * model.s_upper / np.sqrt(2)
        rng = np.random.default_rng(7)
        for _ in range(4):
            t = np.linspace(0, 1, 33)
            s = rng.uniform(0, bound) * (0.5 + 0.5 * np.cos(2 * np.pi * t + rng.uniform(0, 6)))
            x = rng.uniform(0, bound) * (0.5 + 0.5 * np.sin(2 * np.pi * t + rng.uniform(0, 6)))
            seg = HistorySegment(0.0, model.tau, s, x)
            assert seg.norm() <= 3 * model.s_upper
            for _ in range(15):
                seg = poincare_map(model, seg).moved_to(0.0)
                assert seg.norm() <= radius


class TestFixedPoint:
    def test_constant_environment_gives_equilibrium(self):
        model = scenario("constant_persistent").model()
        orbit = find_periodic_orbit(model)
        s, x, y = equilibrium(4.0, 1.0, 1.0, 1.0, 0.5)
        assert np.max(np.abs(orbit.segment.s - s)) < 1e-8
        assert np.max(np.abs(orbit.segment.x - x)) < 1e-8
        assert float(orbit.trajectory(0.0, "y")) == pytest.approx(y, abs=1e-8)
        assert constant_equilibrium(model) == pytest.approx((s, x, y), rel=1e-12)

    def test_is_fixed_by_period_map(self, short_orbit):
        model, orbit = short_orbit
        image = poincare_map(model, orbit.segment, n=orbit.n).moved_to(0.0)
        assert orbit.segment.distance(image) < 1e-8
        assert orbit.residual < 1e-8

    def test_total_substrate_follows_washout(self, short_orbit):
        model, orbit = short_orbit
        w = compute_washout_periodic(model)
        traj = orbit.trajectory
        j = traj.t >= model.tau
        total = traj.values[j, S] + traj.values[j, X] + traj.values[j, Y]
        assert np.max(np.abs(total - w(traj.t[j]))) < 1e-7

    def test_positive_and_bounded(self, short_orbit):
        model, orbit = short_orbit
        t, s, x, y, psi = orbit.one_period()
        assert orbit.min_x > 0 and np.all(x > 0)
        assert np.all(s + x <= model.s_upper + 1e-9)
        assert np.all((psi > 0) & (psi <= 1))
        assert t[0] == pytest.approx(0.0, abs=1e-12) and t[-1] == pytest.approx(1.0)

    def test_independent_of_start(self, short_orbit):
        model, orbit = short_orbit
        other = find_periodic_orbit(model, HistorySegment.constant(0.05, 1e-3, model.tau))
        assert orbit.segment.distance(other.segment) < 1e-7

    def test_extinct_model_has_no_orbit(self):
        with pytest.raises(NotPersistent):
            find_periodic_orbit(scenario("fourier_extinct").model())

    def test_null_start_rejected(self, short_orbit):
        model, _ = short_orbit
        with pytest.raises(ValueError):
            find_periodic_orbit(model, HistorySegment.constant(0.5, 0.0, model.tau))

    def test_floor_consistent_with_probe(self, short_orbit):
        model, orbit = short_orbit
        probe = uniform_persistence_probe(model, default_ensemble(model, size=4), horizon=100.0)
        assert orbit.min_x >= probe.empirical_delta - 1e-6

    def test_acceleration_reaches_same_orbit(self, short_orbit):
        model, orbit = short_orbit
        fast = find_periodic_orbit(model, accelerate=True)
        assert orbit.segment.distance(fast.segment) < 1e-7


class TestVerify:
    def test_identities(self, short_orbit):
        model, orbit = short_orbit
        checks = verify_orbit(model, orbit)
        assert checks["passed"]
        assert checks["orbit_identity_residual"] < 1e-6
        assert abs(checks["mean_exponent"]) < 1e-7

    def test_constant_absorbed_substrate(self):
        model = scenario("constant_persistent").model()
        checks = verify_orbit(model, find_periodic_orbit(model))
        assert checks["equilibrium_y_residual"] < 1e-8

    def test_no_delay(self):
        model = scenario("fourier_persistent_nodelay").model()
        checks = verify_orbit(model, find_periodic_orbit(model))
        assert checks["orbit_identity_residual"] == 0.0
        assert abs(checks["mean_exponent"]) < 1e-7


class TestAttraction:
    def test_constant_rate_matches_characteristic_root(self):
        model = scenario("constant_persistent").model()
        orbit = find_periodic_orbit(model)
        rate = equilibrium_decay_root(model) * model.omega
        rep = attraction_rate(model, orbit, (1e-3, 1e-5))
        for slope, ratio in zip(rep.slopes, rep.ratio_rates):
            assert slope == pytest.approx(rate, rel=1e-3)
            assert ratio == pytest.approx(rate, rel=1e-3)
        assert rep.agreement < 0.01

    def test_zero_perturbation_is_degenerate(self, short_orbit):
        model, orbit = short_orbit
        rep = attraction_rate(model, orbit, (0.0,), periods=20)
        assert rep.degenerate and rep.slopes == (None,)
        assert np.all(rep.distances[0] == 0.0)

    def test_ratio_estimate_agrees(self, short_orbit):
        model, orbit = short_orbit
        rep = attraction_rate(model, orbit, (1e-4,))
        assert rep.ratio_rates[0] == pytest.approx(rep.slopes[0], rel=0.05)
        assert rep.r2[0] > 0.99


def test_equilibrium_decay_root_is_negative():
    model = make_model(1.0, {"kind": "monod", "m": 5.0, "K": 1.0},
                       {"kind": "constant", "value": 0.5}, {"kind": "constant", "value": 2.0})
    mu = equilibrium_decay_root(model)
    assert -0.5 <= mu < 0
