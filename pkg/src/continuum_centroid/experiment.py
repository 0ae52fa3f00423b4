"""Replicated train/test evaluation shared by the simulator and real-data runs.

Randomness comes from one master seed. Each consumer draws from its own
substream ``SeedSequence(seed, spawn_key=(stream, replicate))`` so that
adding a consumer, or running replicates in parallel, never changes what
another consumer sees.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import classify, continuum, tune
from .classify import Kind
from .dataio import CurveSet, ExperimentConfig
from .errors import CCCError, InsufficientGroupError, InvalidInputError
from .splines import SmoothedSample, build_basis, derivative_coefficients, smooth_curves, smooth_fixed

MAJORITY = "majority"
CLASSIFIER_ORDER = ("ccc-l", "ccc-q", "plcc", "pcc", MAJORITY)
STREAMS = {"simulation": 0, "split": 1, "grid": 2, "cv": 3}
REPORT_COLUMNS = ("design", "rho", "pi0", "classifier", "mean", "sd", "R")


def substream(seed: int, stream: str, replicate: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(STREAMS[stream], replicate)))


def normalize_classifiers(names: Sequence[str]) -> Tuple[str, ...]:
    out = []
    for n in names:
        n = str(n).strip().lower()
        if n != MAJORITY:
            n = Kind(n).value
        if n not in out:
            out.append(n)
    if not out:
        raise InvalidInputError("no classifiers requested")
    return tuple(out)


# --- report ---------------------------------------------------------------

@dataclass
class ReplicateReport:
    """Test misclassification percentages per classifier across replicates.

    ``errors[name]`` holds one percentage per successful replicate;
    ``failures[name]`` counts replicates where that classifier could not be
    tuned or fitted (those are excluded from the summary).
    """

    design: str
    rho: float
    pi0: float
    classifiers: Tuple[str, ...]
    errors: Dict[str, List[float]] = field(default_factory=dict)
    failures: Dict[str, int] = field(default_factory=dict)
    messages: Dict[str, List[str]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for c in self.classifiers:
            self.errors.setdefault(c, [])
            self.failures.setdefault(c, 0)
            self.messages.setdefault(c, [])

    def add(self, outcome: Dict[str, object]) -> None:
        for c in self.classifiers:
            v = outcome[c]
            if isinstance(v, str):
                self.failures[c] += 1
                self.messages[c].append(v)
            else:
                self.errors[c].append(float(v))

    def mean(self, name: str) -> float:
        e = self.errors[name]
        return float(np.mean(e)) if e else math.nan

    def sd(self, name: str) -> float:
        """Sample standard deviation (ddof = 1); ``nan`` below two replicates."""
        e = self.errors[name]
        return float(np.std(e, ddof=1)) if len(e) > 1 else math.nan

    def count(self, name: str) -> int:
        return len(self.errors[name])

    def rows(self) -> List[dict]:
        return [
            {"design": self.design, "rho": self.rho, "pi0": self.pi0, "classifier": c,
             "mean": self.mean(c), "sd": self.sd(c), "R": self.count(c)}
            for c in self.classifiers
        ]

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(REPORT_COLUMNS)
        for r in self.rows():
            w.writerow([r["design"], _fmt(r["rho"]), _fmt(r["pi0"]), r["classifier"],
                        _fmt(r["mean"]), _fmt(r["sd"]), r["R"]])
        return buf.getvalue()

    def to_text(self) -> str:
        """Aligned table: one row for the setting, ``mean (sd)`` per classifier."""
        head = ["design", "rho", "pi0"] + [c.upper() for c in self.classifiers]
        cells = [self.design, _short(self.rho), f"{_short(100 * self.pi0)}%"]
        cells += [f"{_short(self.mean(c))} ({_short(self.sd(c))})" for c in self.classifiers]
        widths = [max(len(h), len(v)) for h, v in zip(head, cells)]
        lines = ["  ".join(h.rjust(w) for h, w in zip(head, widths)),
                 "  ".join(v.rjust(w) for v, w in zip(cells, widths))]
        failed = {c: n for c, n in self.failures.items() if n}
        if failed:
            lines.append("failed replicates: " + ", ".join(f"{c}={n}" for c, n in failed.items()))
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return repr(float(v)) if isinstance(v, float) else str(v)


def _short(v: float) -> str:
    if math.isnan(v):
        return "-"
    return f"{v:.2g}" if abs(v) < 10 else f"{v:.0f}"


# --- one split ---------------------------------------------------------------

@dataclass(frozen=True)
class SplitSettings:
    classifiers: Tuple[str, ...]
    alphas: Tuple[float, ...] = tune.DEFAULT_ALPHAS
    p_upper: Optional[int] = None
    folds: int = 5
    theta_grid: Optional[Tuple[float, ...]] = None
    derivative: int = 0

    @classmethod
    def from_config(cls, config: ExperimentConfig, p_upper: Optional[int] = None) -> "SplitSettings":
        return cls(
            classifiers=normalize_classifiers(config.classifiers),
            alphas=tuple(config.alphas) if config.alphas else tune.DEFAULT_ALPHAS,
            p_upper=config.p_upper if config.p_upper is not None else p_upper,
            folds=config.folds,
            theta_grid=tuple(config.theta_grid) if config.theta_grid else None,
            derivative=config.derivative,
        )


def smooth_split(train: CurveSet, test: CurveSet, theta_grid=None, derivative: int = 0):
    """Smooth training curves by GCV and test curves at the same ``theta0``."""
    basis = build_basis(train.grid)
    tr = smooth_curves(train.values, train.grid, theta_grid, train.labels, basis)
    te = smooth_fixed(test.values, basis, tr.theta0, test.labels)
    if derivative:
        tr = derivative_coefficients(tr, derivative)
        te = derivative_coefficients(te, derivative)
    return tr, te


def _error_pct(clf, test: SmoothedSample) -> float:
    return 100.0 * float(np.mean(classify.predict(clf, test.coef) != test.labels))


def evaluate_split(train: SmoothedSample, test: SmoothedSample, settings: SplitSettings,
                   grid_rng: np.random.Generator, cv_seed) -> Dict[str, object]:
    """Tune and fit every requested classifier on ``train``; test error in percent.

    A classifier that cannot be tuned or fitted gets its failure message
    (a string) instead of a number.
    """
    out: Dict[str, object] = {}
    names = settings.classifiers
    if MAJORITY in names:
        majority = int(np.sum(train.labels == 1) > np.sum(train.labels == 0))
        out[MAJORITY] = 100.0 * float(np.mean(test.labels != majority))
    try:
        classify.check_groups(train)
    except InsufficientGroupError as exc:
        return {n: out.get(n, str(exc)) for n in names}

    design = None
    try:
        design = continuum.center_and_factor(train)
        pu = settings.p_upper or tune.p_upper(train)
    except CCCError as exc:
        return {n: out.get(n, f"{type(exc).__name__}: {exc}") for n in names}

    ccc = [Kind(n) for n in names if n != MAJORITY and Kind(n).is_ccc]
    if ccc:
        grid = tune.build_grid(pu, settings.alphas, grid_rng)
        tables = tune.gcv_tables(train, grid, ccc, design)
        for k in ccc:
            try:
                best = tables[k].best()
                clf = classify.fit_ccc(train, best.p, best.alpha, k, design)
                out[k.value] = _error_pct(clf, test)
            except CCCError as exc:
                out[k.value] = f"{type(exc).__name__}: {exc}"

    for n in names:
        if n == MAJORITY or Kind(n).is_ccc:
            continue
        kind = Kind(n)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                p = tune.cv_select_baseline(train, pu, kind, settings.folds,
                                            np.random.default_rng(cv_seed))
                clf = (classify.fit_pcc(train, p) if kind is Kind.PCC
                       else classify.fit_plcc(train, p, design))
            out[n] = _error_pct(clf, test)
        except CCCError as exc:
            out[n] = f"{type(exc).__name__}: {exc}"
    return out


def run_parallel(task: Callable[[int], Dict[str, object]], R: int, threads: int = 1):
    """Run ``task(rep)`` for rep = 0..R-1; results come back in replicate order."""
    if threads <= 1 or R == 1:
        return [task(r) for r in range(R)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(task, range(R)))


# --- repeated splits on real data -------------------------------------------

def stratified_split(labels, train_fraction: float, rng: np.random.Generator):
    """Train/test index arrays keeping each class's share (at least one test curve per class)."""
    labels = np.asarray(labels)
    train, test = [], []
    for k in (0, 1):
        idx = np.flatnonzero(labels == k)
        idx = idx[rng.permutation(idx.size)]
        n_test = min(max(1, int(round((1 - train_fraction) * idx.size))), idx.size - 1)
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


@dataclass(frozen=True)
class _SplitTask:
    curves: CurveSet
    settings: SplitSettings
    train_fraction: float
    seed: int

    def __call__(self, rep: int) -> Dict[str, object]:
        tr_idx, te_idx = stratified_split(self.curves.labels, self.train_fraction,
                                          substream(self.seed, "split", rep))
        train, test = smooth_split(self.curves.subset(tr_idx), self.curves.subset(te_idx),
                                   self.settings.theta_grid, self.settings.derivative)
        cv_seed = np.random.SeedSequence(self.seed, spawn_key=(STREAMS["cv"], rep))
        return evaluate_split(train, test, self.settings, substream(self.seed, "grid", rep), cv_seed)


MIN_CLASS_SIZE = 5


def repeated_split_eval(curves: CurveSet, config: ExperimentConfig,
                        name: str = "data") -> ReplicateReport:
    """Seeded repeated stratified train/test splits on labeled curves."""
    if curves.labels is None:
        raise InvalidInputError("curves need labels for evaluation")
    n1 = int(curves.labels.sum())
    n0 = curves.N - n1
    if min(n0, n1) < MIN_CLASS_SIZE:
        raise InsufficientGroupError(
            f"each class needs at least {MIN_CLASS_SIZE} curves, found {n0} and {n1}")
    settings = SplitSettings.from_config(config)
    task = _SplitTask(curves, settings, config.train_fraction, config.seed)
    report = ReplicateReport(name, math.nan, n0 / curves.N, settings.classifiers)
    for outcome in run_parallel(task, config.repeats, config.threads):
        report.add(outcome)
    return report
