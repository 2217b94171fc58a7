"""Delayed chemostat in a time-varying environment.

Solver, washout and threshold analysis, persistence probes and periodic
orbits for

    s'(t) = D(t) (s0(t) - s(t)) - p(s(t)) x(t)
    x'(t) = x(t - tau) p(s(t - tau)) exp(-int_{t-tau}^t D) - D(t) x(t)
"""
from .bounds import containment_radius, contraction_bound, proof_constants
from .config import Scenario
from .errors import (AssumptionViolation, BlowUp, BoundViolated, ChemostatError,
                     DegenerateDilution, FitFailed, GridTooLarge, HorizonTooShort, IdentityViolated,
                     NegativeHistory, NoConvergence, NotPeriodic, NotPersistent, OutOfRange,
                     ParseError, PeriodMismatch, ProbeFailed, StepNotDividingDelay,
                     ToleranceBreach, UnknownKey, ZeroBiomass)
from .integrator import (Trajectory, compute_psi, conservation_residual, evaluate_y,
                         exponential_form_residual, integrate, recommended_steps,
                         write_trajectory_csv)
from .lemmas import THRESHOLDS, verify_lemmas
from .model import ChemostatModel, HistorySegment, make_model
from .orbit import (PeriodicOrbit, attraction_rate, constant_equilibrium,
                    equilibrium_decay_root, find_periodic_orbit, poincare_map, verify_orbit)
from .persistence import (EXTINCT, INDETERMINATE, PERSISTENT, PersistenceReport, classify,
                          default_ensemble, simulated_fate, threshold_periodic,
                          uniform_persistence_probe, window_condition_general)
from .scenarios import expected_fate, standard_suite
from .signals import Constant, Fourier, PiecewiseConstant, Sampled, Shifted, make_signal
from .uptake import Linear, Monod, Tabulated, make_uptake
from .washout import (PhiFunction, WashoutSolution, compute_phi_periodic,
                      compute_washout_general, compute_washout_periodic, constant_phi,
                      lemma_contraction_check)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
