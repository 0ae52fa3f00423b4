"""Two-population curve simulator and replicated misclassification runs.

Curves follow a five-term Karhunen-Loeve expansion with centred
exponential scores, ``Z = E - 1`` with ``E ~ Exp(1)``. Group 0 uses the
shifted Legendre polynomials as eigenfunctions and has mean zero.

* design ``"i"``: group 1 shares the eigenfunctions and is shifted by
  ``rho * sqrt(lambda_1) * phi_1``.
* design ``"ii"``: group 1 uses the eigenfunctions in reversed order
  (``phi_{1,j} = phi_{0,6-j}``) and is shifted by
  ``rho * sqrt(lambda_3) * phi_{1,3}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from . import tune
from .dataio import CurveSet
from .errors import InvalidInputError
from .experiment import (CLASSIFIER_ORDER, STREAMS, ReplicateReport, SplitSettings,
                         evaluate_split, normalize_classifiers, run_parallel, smooth_split,
                         substream)
from .splines import TimeGrid

SIM_P_UPPER = 5
DEFAULT_EIGENVALUES = (200.0, 100.0, 1.0, 0.2, 0.1)
DEFAULT_CLASSIFIERS = CLASSIFIER_ORDER[:4]

_LEGENDRE = (
    (math.sqrt(3), (-1, 2)),
    (math.sqrt(5), (1, -6, 6)),
    (math.sqrt(7), (-1, 12, -30, 20)),
    (3.0, (1, -20, 90, -140, 70)),
    (math.sqrt(11), (-1, 30, -210, 560, -630, 252)),
)


def legendre_shifted(j: int, t):
    """Orthonormal shifted Legendre polynomial of order ``j`` (1..5) on [0, 1]."""
    if j not in range(1, 6) or isinstance(j, bool):
        raise InvalidInputError(f"order must be 1..5, got {j!r}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr > 1) or np.any(np.isnan(t_arr)):
        raise InvalidInputError("t must lie in [0, 1]")
    scale, coefs = _LEGENDRE[j - 1]
    val = scale * np.polynomial.polynomial.polyval(t_arr, coefs)
    return float(val) if np.ndim(val) == 0 else val


def eigenfunction_order(design: str, group: int) -> Tuple[int, ...]:
    """Legendre orders used as eigenfunctions 1..5 of ``group``."""
    if group == 1 and design == "ii":
        return (5, 4, 3, 2, 1)
    return (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class SimDesign:
    design: str = "i"
    rho: float = 1.0
    pi0: float = 0.5
    N: int = 200
    grid_points: int = 101
    eigenvalues: Tuple[float, ...] = DEFAULT_EIGENVALUES
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "design", str(self.design).lower())
        object.__setattr__(self, "eigenvalues", tuple(float(v) for v in self.eigenvalues))
        if self.design not in ("i", "ii"):
            raise InvalidInputError(f"design must be 'i' or 'ii', got {self.design!r}")
        if not (math.isfinite(self.rho) and self.rho >= 0):
            raise InvalidInputError("rho must be a nonnegative number")
        if not 0 < self.pi0 < 1:
            raise InvalidInputError("pi0 must lie in (0, 1)")
        if self.N < 2:
            raise InvalidInputError("N must be >= 2")
        if self.grid_points < 6:
            raise InvalidInputError("need at least 6 grid points")
        if len(self.eigenvalues) != 5 or min(self.eigenvalues) <= 0:
            raise InvalidInputError("need five positive eigenvalues")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(0.0, 1.0, self.grid_points - 1)

    def eigenfunctions(self, group: int) -> np.ndarray:
        """Rows are eigenfunctions 1..5 of ``group`` on the grid."""
        t = self.grid.points
        return np.array([legendre_shifted(j, t) for j in eigenfunction_order(self.design, group)])

    def mean_function(self, group: int) -> np.ndarray:
        if group == 0:
            return np.zeros(self.grid_points)
        j = 0 if self.design == "i" else 2
        return self.rho * math.sqrt(self.eigenvalues[j]) * self.eigenfunctions(1)[j]


def generate_sample(design: SimDesign, rng=None) -> CurveSet:
    """Draw ``design.N`` labeled curves; ``rng`` defaults to the design's seed."""
    if rng is None:
        rng = np.random.default_rng(design.seed)
    labels = (rng.random(design.N) >= design.pi0).astype(int)
    Z = rng.exponential(1.0, size=(design.N, 5)) - 1.0
    sd = np.sqrt(np.array(design.eigenvalues))
    X = np.empty((design.N, design.grid_points))
    for k in (0, 1):
        rows = labels == k
        X[rows] = (Z[rows] * sd) @ design.eigenfunctions(k) + design.mean_function(k)
    return CurveSet(design.grid, X, labels, [f"s{i + 1:04d}" for i in range(design.N)])


def uniform_split(N: int, train_fraction: float, rng: np.random.Generator):
    n_train = int(round(train_fraction * N))
    perm = rng.permutation(N)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


@dataclass(frozen=True)
class _ReplicateTask:
    design: SimDesign
    settings: SplitSettings
    train_fraction: float

    def __call__(self, rep: int):
        seed = self.design.seed
        curves = generate_sample(self.design, substream(seed, "simulation", rep))
        tr_idx, te_idx = uniform_split(curves.N, self.train_fraction, substream(seed, "split", rep))
        train, test = smooth_split(curves.subset(tr_idx), curves.subset(te_idx),
                                   self.settings.theta_grid)
        cv_seed = np.random.SeedSequence(seed, spawn_key=(STREAMS["cv"], rep))
        return evaluate_split(train, test, self.settings, substream(seed, "grid", rep), cv_seed)


def run_replicates(design: SimDesign, classifiers: Sequence[str] = DEFAULT_CLASSIFIERS,
                   R: int = 50, train_fraction: float = 0.8, threads: int = 1,
                   alphas: Sequence[float] = tune.DEFAULT_ALPHAS,
                   p_upper: int = SIM_P_UPPER, folds: int = 5,
                   theta_grid=None) -> ReplicateReport:
    """Generate, split, smooth, tune, fit and test ``R`` times.

    Replicate ``r`` draws from substreams keyed by ``(design.seed, r)``, so
    serial and parallel runs give identical reports.
    """
    if R < 1:
        raise InvalidInputError("R must be >= 1")
    if not 0 < train_fraction < 1:
        raise InvalidInputError("train_fraction must lie in (0, 1)")
    settings = SplitSettings(normalize_classifiers(classifiers), tuple(alphas), p_upper, folds,
                             None if theta_grid is None else tuple(theta_grid))
    report = ReplicateReport(design.design, design.rho, design.pi0, settings.classifiers)
    for outcome in run_parallel(_ReplicateTask(design, settings, train_fraction), R, threads):
        report.add(outcome)
    return report
