"""Scale the dilution profile of a periodic chemostat and watch the threshold change sign.

For each scale factor the threshold exponent is computed from the periodic
washout and phi, then checked against a plain long simulation.
"""
import numpy as np

from chemostat_dde import HistorySegment, simulated_fate, threshold_periodic
from chemostat_dde.scenarios import scenario


def main():
    base = scenario("fourier_persistent")
    print(f"{'scale':>6} {'lambda':>11} {'class':>13} {'log-slope':>10} {'x floor':>9}")
    for k in np.linspace(0.6, 2.0, 8):
        sc = base.copy().set("D.value", 0.7 * k)
        model = sc.model()
        rep = threshold_periodic(model)
        fate = simulated_fate(model, HistorySegment.constant(0.5, 0.3, model.tau), 300.0)
        slope = "underflow" if fate.log_slope is None else f"{fate.log_slope:10.4f}"
        print(f"{k:6.2f} {rep.lambda_:11.5f} {rep.classification:>13} {slope:>10} "
              f"{fate.x_floor:9.3g}")


if __name__ == "__main__":
    main()
