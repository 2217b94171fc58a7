import math

import pytest

from chemostat_dde import ToleranceBreach, make_model, verify_lemmas
from chemostat_dde.lemmas import THRESHOLDS


@pytest.fixture(scope="module")
def results(suite):
    return {name: verify_lemmas(model) for name, model in suite.items()}


class TestVerifyLemmas:
    def test_every_check_passes_on_the_suite(self, results):
        for name, checks in results.items():
            failed = {k: c.value for k, c in checks.items() if not c.passed}
            assert not failed, (name, failed)

    def test_thresholds_reported(self, results):
        for checks in results.values():
            for key, check in checks.items():
                assert check.threshold == THRESHOLDS[key]

    def test_periodic_checks_present(self, results):
        keys = set(results["piecewise_persistent"])
        assert {"phi_identity", "phi_range", "contraction_bound", "comparison_window"} <= keys

    def test_no_delay_skips_contraction(self, results):
        assert "contraction_bound" not in results["constant_persistent_nodelay"]
        assert results["constant_persistent_nodelay"]["y_quadrature"].value == 0.0

    def test_aperiodic_model(self):
        model = make_model(0.5, {"kind": "monod", "m": 3.0, "K": 1.0},
                           {"kind": "constant", "value": 0.8},
                           {"kind": "sampled", "t": [0, 20, 40, 60], "values": [1.0, 1.4, 1.1, 1.2],
                            "interpolation": "pchip"})
        checks = verify_lemmas(model, horizon=20.0)
        assert "phi_identity" not in checks
        assert all(c.passed for c in checks.values())

    def test_breach_raises(self, suite):
        with pytest.raises(ToleranceBreach) as err:
            verify_lemmas(suite["fourier_persistent"], thresholds={"conservation": 0.0},
                          raise_on_breach=True)
        assert "conservation" in err.value.breaches

    def test_breach_reported_without_raising(self, suite):
        checks = verify_lemmas(suite["constant_persistent"], thresholds={"psi_identity": 0.0})
        assert not checks["psi_identity"].passed
        assert math.isfinite(checks["psi_identity"].value)
