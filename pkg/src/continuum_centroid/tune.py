"""Hyperparameter selection.

``(p, alpha)`` for the continuum classifiers is chosen by the GCV-type
criterion ``errors / (N - p - 2)^2`` over a random non-rectangular grid:
every ``alpha`` gets its own upper bound on ``p`` drawn uniformly from
``1..p_upper``. The baselines pick ``p`` by stratified K-fold CV.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import classify, continuum
from .classify import Kind
from .errors import CCCError, InvalidInputError, TuningError
from .splines import SmoothedSample

DEFAULT_ALPHAS = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99, 0.999, 0.9999)
VARIANCE_SHARE = 0.99
N_GROUPS = 2


def p_upper(sample: SmoothedSample, share: float = VARIANCE_SHARE) -> int:
    """Fewest within-group eigenfunctions explaining ``share`` of the variance."""
    classify.check_groups(sample)
    lam, _ = classify.within_spectrum(sample)
    return p_upper_from_spectrum(lam, share)


def p_upper_from_spectrum(eigenvalues, share: float = VARIANCE_SHARE) -> int:
    lam = np.sort(np.maximum(np.asarray(eigenvalues, dtype=float), 0.0))[::-1]
    total = lam.sum()
    if total <= 0:
        return 1
    frac = np.cumsum(lam) / total
    return int(np.argmax(frac >= share - 1e-12) + 1)


@dataclass(frozen=True)
class CandidateGrid:
    alphas: Tuple[float, ...]
    p_max: Dict[float, int]
    seed: Optional[int] = None

    def candidates(self) -> List[Tuple[int, float]]:
        return [(p, a) for a in self.alphas for p in range(1, self.p_max[a] + 1)]

    def __len__(self) -> int:
        return sum(self.p_max.values())


def build_grid(p_upper_value: int, alphas: Sequence[float] = DEFAULT_ALPHAS,
               seed=None) -> CandidateGrid:
    """Draw ``p_max(alpha) ~ Uniform{1..p_upper}`` independently per alpha.

    ``seed`` may be an integer, a ``numpy.random.SeedSequence`` or a
    ``Generator``.
    """
    alphas = tuple(float(a) for a in alphas)
    if not alphas:
        raise InvalidInputError("need at least one alpha")
    if any(not 0.0 <= a < 1.0 for a in alphas):
        raise InvalidInputError("alphas must lie in [0, 1)")
    if p_upper_value < 1:
        raise InvalidInputError("p_upper must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    draws = rng.integers(1, p_upper_value + 1, size=len(alphas))
    return CandidateGrid(alphas, {a: int(d) for a, d in zip(alphas, draws)},
                         seed if isinstance(seed, int) else None)


@dataclass(frozen=True)
class GcvRow:
    p: int
    alpha: float
    gcv: float
    train_errors: int


@dataclass
class GcvTable:
    kind: Kind
    N: int
    rows: List[GcvRow] = field(default_factory=list)
    failures: List[Tuple[int, float, str]] = field(default_factory=list)

    def best(self) -> GcvRow:
        if not self.rows:
            raise TuningError(f"every {self.kind.value} candidate failed",
                              diagnostics=self.failures)
        return min(self.rows, key=lambda r: (r.gcv, r.p, r.alpha))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "p", "alpha", "gcv", "train_errors"])
        for r in self.rows:
            w.writerow([self.kind.value, r.p, repr(r.alpha), repr(r.gcv), r.train_errors])
        return buf.getvalue()


def gcv_tables(sample: SmoothedSample, grid: CandidateGrid,
               kinds: Iterable = (Kind.CCC_L, Kind.CCC_Q),
               design: Optional[continuum.CenteredDesign] = None) -> Dict[Kind, GcvTable]:
    """GCV tables for several CCC kinds from one shared set of fits."""
    kinds = [Kind(k) for k in kinds]
    classify.check_groups(sample)
    if design is None:
        design = continuum.center_and_factor(sample)
    N = sample.N
    y = sample.labels
    tables = {k: GcvTable(k, N) for k in kinds}
    for alpha in grid.alphas:
        p_req = min(grid.p_max[alpha], design.r, N - N_GROUPS - 1)
        if p_req < 1:
            for k in kinds:
                tables[k].failures.append((grid.p_max[alpha], alpha, "N - p - 2 <= 0"))
            continue
        try:
            model = continuum.fit_continuum(design, p_req, alpha)
        except CCCError as exc:
            for k in kinds:
                tables[k].failures.append((1, alpha, str(exc)))
            continue
        for p in range(1, model.p + 1):
            beta = model.truncated(p).beta_coef if p < model.p else model.beta_coef
            for k in kinds:
                try:
                    clf = classify.classifier_from_direction(sample, beta, k, p, alpha)
                    pred = classify.predict(clf, sample.coef)
                except CCCError as exc:
                    tables[k].failures.append((p, alpha, str(exc)))
                    continue
                errors = int(np.sum(pred != y))
                tables[k].rows.append(GcvRow(p, alpha, errors / (N - p - N_GROUPS) ** 2, errors))
        for p in range(model.p + 1, grid.p_max[alpha] + 1):
            for k in kinds:
                tables[k].failures.append((p, alpha, "component unavailable"))
    return tables


def gcv_select(sample: SmoothedSample, grid: CandidateGrid, kind="ccc-l",
               design: Optional[continuum.CenteredDesign] = None):
    """Return ``(p, alpha, table)`` minimizing GCV; ties go to smaller p, then alpha."""
    kind = Kind(kind)
    if not kind.is_ccc:
        raise InvalidInputError("GCV selection applies to ccc-l / ccc-q")
    table = gcv_tables(sample, grid, [kind], design)[kind]
    best = table.best()
    return best.p, best.alpha, table


def stratified_folds(labels, folds: int, rng) -> np.ndarray:
    """Fold index per observation, dealing each class round-robin after shuffling."""
    labels = np.asarray(labels)
    assign = np.empty(labels.size, dtype=int)
    offset = 0
    for k in (0, 1):
        idx = np.flatnonzero(labels == k)
        idx = idx[rng.permutation(idx.size)]
        assign[idx] = (np.arange(idx.size) + offset) % folds
        offset += idx.size
    return assign


def _baseline_direction(train: SmoothedSample, kind: Kind, p_max: int,
                        design: Optional[continuum.CenteredDesign] = None):
    """Directions for p = 1..p_max (fewer if the rank runs out)."""
    if kind is Kind.PCC:
        return classify.pcc_directions(train, p_max)
    design = design or continuum.center_and_factor(train)
    model = continuum.fit_continuum(design, min(p_max, design.r), 0.5)
    return [model.truncated(p).beta_coef for p in range(1, model.p + 1)]


def cv_select_baseline(sample: SmoothedSample, p_upper_value: int, kind="pcc",
                       folds: int = 5, seed=None) -> int:
    """Stratified K-fold choice of ``p`` for the PCC / PLCC baselines."""
    kind = Kind(kind)
    if kind.is_ccc:
        raise InvalidInputError("cv_select_baseline is for pcc / plcc")
    if p_upper_value <= 1:
        return 1
    n0, n1 = classify.check_groups(sample)
    k = min(folds, n0, n1)
    if k < 2 or min(n0, n1) < 3:
        raise TuningError(f"groups of size {n0} and {n1} are too small for {folds}-fold CV")
    if k < folds:
        warnings.warn(f"reducing CV folds from {folds} to {k}", RuntimeWarning, stacklevel=2)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    fold = stratified_folds(sample.labels, k, rng)
    errors = np.zeros(p_upper_value)
    for f in range(k):
        train = sample.subset(np.flatnonzero(fold != f))
        test = sample.subset(np.flatnonzero(fold == f))
        try:
            directions = _baseline_direction(train, kind, p_upper_value)
        except CCCError:
            directions = []
        for p in range(1, p_upper_value + 1):
            if not directions:
                errors[p - 1] += test.N
                continue
            beta = directions[min(p, len(directions)) - 1]
            try:
                clf = classify.classifier_from_direction(train, beta, kind, p)
                errors[p - 1] += np.sum(classify.predict(clf, test.coef) != test.labels)
            except CCCError:
                errors[p - 1] += test.N
    return int(np.argmin(errors) + 1)
