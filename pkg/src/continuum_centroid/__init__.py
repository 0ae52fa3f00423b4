"""Continuum centroid classifiers for two-group functional data.

Curves observed on an equispaced grid are smoothed with a penalized cubic
B-spline, projected onto a direction from the functional continuum
(a one-parameter family running from least squares through PLS towards
principal components), and classified by a linear or quadratic centroid
rule on the projected scores.
"""

from .classify import (FittedClassifier, GroupStats, Kind, discriminant, fit, fit_ccc, fit_pcc,
                       fit_plcc, group_stats, predict)
from .continuum import (CenteredDesign, ContinuumModel, WeightSolution, center_and_factor,
                        continuum_objective, fit_continuum, project, solve_weight)
from .dataio import CurveSet, ExperimentConfig, load_csv, load_model, save_csv, save_model
from .errors import (CCCError, DataFormatError, DegenerateDesignError, DegenerateVarianceError,
                     DeflationExhaustedError, DomainError, InsufficientGroupError,
                     InvalidInputError, TuningError)
from .experiment import ReplicateReport, repeated_split_eval
from .simulate import SimDesign, generate_sample, legendre_shifted, run_replicates
from .splines import (SmoothedSample, SplineBasis, TimeGrid, build_basis, derivative_coefficients,
                      evaluate, smooth_curves, smooth_fixed)
from .tune import CandidateGrid, GcvTable, build_grid, cv_select_baseline, gcv_select, p_upper

__version__ = "0.1.0"
