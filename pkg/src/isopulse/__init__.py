"""Pulse-based switching and regulation for bistable monotone systems.

The library designs rectangular input pulses (fixed magnitude, fixed
length) that drive a monotone bistable system between its stable
equilibria, bounds the convergence time under interval parametric
uncertainty, and regulates the flow around the saddle with an event-based
pulse scheme. The central object is the dominant Koopman eigenfunction,
evaluated pointwise along trajectories; its level sets (isostables) turn
timing questions into algebra.
"""

__version__ = "0.1.0"

from .dynamics import (Box, IntegratorOptions, MonotonicityReport,
                       OrthantOrder, PulseInput, Trajectory, VectorFieldModel,
                       check_kamke_muller, integrate, load_model_config,
                       model_from_config, model_to_config, pulse_signal,
                       toggle_switch_model, TOGGLE_Q_INT, TOGGLE_Q_MAX,
                       TOGGLE_Q_MIN)
from .errors import (AnchorInfeasibleError, DomainError,
                     DominanceViolatedError, EmptyLevelSetError,
                     InfeasibleError, IsopulseError, NoConvergenceError,
                     NoFeasibleAnchorError, RunawayStateError,
                     StepFailureError, ToleranceNotMetError, UnreachableError)
from .pulse_design import (ClosedLoopPolicy, PulseControlEvaluation,
                           PulseDesign, RField, closed_loop_policy,
                           convergence_time, grad_r_fd, r_eval, r_field,
                           run_closed_loop, solve_static_program)
from .regulator import (AnchorTable, BoxConstraint, RegulationEvent,
                        event_regulate, nearest_anchor,
                        precompute_boundary_pulses)
from .spectral import (EigenfunctionSample, LaplaceOptions, SpectralData,
                       dominant_spectrum, find_equilibria, grid_seeds,
                       isostable_levelset, isostable_time,
                       laplace_average_s1, sample_s1_grid, stable_extremes)
from .uncertainty import (IntersectionReport, LevelSetTarget, MembershipReport,
                          TimeField, UncertaintyEnvelope, admissible_set,
                          isostable_ray_point, levelset_intersection_check,
                          min_time_to_levelset, value_bounds,
                          verify_membership)
