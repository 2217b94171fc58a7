"""Compare the periodic phi with the ratio psi of a linear solution started far from it."""
import numpy as np

from chemostat_dde import compute_phi_periodic, compute_washout_periodic, lemma_contraction_check
from chemostat_dde.scenarios import scenario


def main():
    model = scenario("piecewise_persistent_short").model()
    w = compute_washout_periodic(model)
    phi = compute_phi_periodic(model, w)
    print(f"lambda = {phi.lambda_:.6f}, phi in [{phi.min:.4f}, {phi.max:.4f}]")
    rep = lemma_contraction_check(model, w, 1.0, lambda t: 1.0 + t + model.tau)
    for k in np.linspace(0, len(rep.t) - 1, 10).astype(int):
        print(f"  t={rep.t[k]:6.2f}  |phi - psi|={rep.difference[k]:.3e}  bound={rep.bound[k]:.3e}")
    print(f"worst ratio difference / bound = {rep.worst_ratio:.3g}")


if __name__ == "__main__":
    main()
