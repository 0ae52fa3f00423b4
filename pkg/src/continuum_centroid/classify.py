"""Centroid classifiers on a one-dimensional projection of the curves.

Four kinds share one fitted structure:

* ``ccc-l`` / ``ccc-q`` project onto the continuum slope and apply an LDA
  (pooled variance) or QDA (per-group variance) rule to the scores;
* ``pcc`` / ``plcc`` project onto the principal-component or PLS slope,
  normalized to unit L2 norm, and compare squared distances to the group
  centroids with an implicit unit variance.

A positive discriminant assigns a curve to group 0, a negative one to
group 1; an exact zero goes to group 0.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import continuum
from .errors import DegenerateVarianceError, InsufficientGroupError, InvalidInputError
from .splines import SmoothedSample, SplineBasis, TimeGrid, build_basis

MODEL_FORMAT = "continuum-centroid-model"
MODEL_VERSION = 1


class Kind(str, enum.Enum):
    CCC_L = "ccc-l"
    CCC_Q = "ccc-q"
    PCC = "pcc"
    PLCC = "plcc"

    @property
    def is_ccc(self) -> bool:
        return self in (Kind.CCC_L, Kind.CCC_Q)


@dataclass(frozen=True)
class GroupStats:
    n0: int
    n1: int
    proj_mean0: float
    proj_mean1: float
    var0: float
    var1: float
    var_pooled: float


@dataclass(frozen=True, eq=False)
class FittedClassifier:
    kind: Kind
    direction: np.ndarray
    stats: GroupStats
    basis: SplineBasis = field(repr=False)
    p: int
    alpha: Optional[float] = None
    theta0: Optional[float] = None
    derivative: int = 0
    diagnostics: dict = field(default_factory=dict, repr=False)

    def scores(self, coef) -> np.ndarray:
        return np.asarray(coef, dtype=float) @ (self.basis.W @ self.direction)

    def discriminant(self, coef):
        return discriminant(self, coef)

    def predict(self, coef):
        return predict(self, coef)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": self.kind.value,
            "hyper": {"p": self.p, "alpha": self.alpha},
            "basis": self.basis.describe(),
            "smoothing": {"theta0": self.theta0, "derivative": self.derivative},
            "direction": [float(v) for v in self.direction],
            "stats": {
                "n0": self.stats.n0,
                "n1": self.stats.n1,
                "proj_mean0": self.stats.proj_mean0,
                "proj_mean1": self.stats.proj_mean1,
                "var0": self.stats.var0,
                "var1": self.stats.var1,
                "var_pooled": self.stats.var_pooled,
            },
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FittedClassifier":
        if doc.get("format") != MODEL_FORMAT:
            raise InvalidInputError("not a continuum-centroid model document")
        if doc.get("version") != MODEL_VERSION:
            raise InvalidInputError(f"unsupported model version {doc.get('version')}")
        b = doc["basis"]
        basis = build_basis(TimeGrid(float(b["t_min"]), float(b["t_max"]), int(b["M"])),
                            int(b.get("degree", 3)))
        if basis.L != int(b["L"]):
            raise InvalidInputError(f"basis dimension mismatch: {basis.L} != {b['L']}")
        direction = np.array(doc["direction"], dtype=float)
        if direction.shape != (basis.L,):
            raise InvalidInputError("direction length does not match the basis")
        st = doc["stats"]
        smoothing = doc.get("smoothing", {})
        return cls(
            kind=Kind(doc["kind"]),
            direction=direction,
            stats=GroupStats(int(st["n0"]), int(st["n1"]), float(st["proj_mean0"]),
                             float(st["proj_mean1"]), float(st["var0"]), float(st["var1"]),
                             float(st["var_pooled"])),
            basis=basis,
            p=int(doc["hyper"]["p"]),
            alpha=doc["hyper"].get("alpha"),
            theta0=smoothing.get("theta0"),
            derivative=int(smoothing.get("derivative", 0)),
            diagnostics=doc.get("diagnostics", {}),
        )


def check_groups(sample: SmoothedSample, minimum: int = 2) -> tuple:
    """Group sizes ``(n0, n1)``, raising when either is below ``minimum``."""
    if sample.labels is None:
        raise InvalidInputError("sample has no labels")
    n1 = int(np.sum(sample.labels))
    n0 = sample.N - n1
    if n0 < minimum or n1 < minimum:
        raise InsufficientGroupError(
            f"each group needs >= {minimum} curves (got {n0} and {n1})")
    return n0, n1


def _group_scores(sample: SmoothedSample, direction: np.ndarray):
    if sample.labels is None:
        raise InvalidInputError("sample has no labels")
    s = sample.coef @ (sample.basis.W @ np.asarray(direction, dtype=float))
    y = sample.labels
    return s[y == 0], s[y == 1]


def group_stats(sample: SmoothedSample, direction) -> GroupStats:
    """Projected group means and variances of the training curves."""
    s0, s1 = _group_scores(sample, direction)
    n0, n1 = s0.size, s1.size
    if n0 < 2 or n1 < 2:
        raise InsufficientGroupError(f"each group needs >= 2 curves (got {n0} and {n1})")
    m0, m1 = float(s0.mean()), float(s1.mean())
    ss0 = float(np.sum((s0 - m0) ** 2))
    ss1 = float(np.sum((s1 - m1) ** 2))
    return GroupStats(
        n0=n0,
        n1=n1,
        proj_mean0=m0,
        proj_mean1=m1,
        var0=ss0 / (n0 - 1),
        var1=ss1 / (n1 - 1),
        var_pooled=(ss0 + ss1) / (n0 + n1 - 2),
    )


def _score(clf: FittedClassifier, coef):
    s = clf.scores(coef)
    return float(s) if np.ndim(s) == 0 else s


def discriminant_L(clf: FittedClassifier, coef):
    st = clf.stats
    if st.var_pooled <= 0:
        raise DegenerateVarianceError("pooled projected variance is zero")
    s = _score(clf, coef)
    return (((s - st.proj_mean1) ** 2 - (s - st.proj_mean0) ** 2) / st.var_pooled
            + 2.0 * math.log(st.n0 / st.n1))


def discriminant_Q(clf: FittedClassifier, coef):
    st = clf.stats
    if st.var0 <= 0 or st.var1 <= 0:
        raise DegenerateVarianceError("a projected group variance is zero")
    s = _score(clf, coef)
    return ((s - st.proj_mean1) ** 2 / st.var1 - (s - st.proj_mean0) ** 2 / st.var0
            + 2.0 * math.log(st.n0 * math.sqrt(st.var1) / (st.n1 * math.sqrt(st.var0))))


def discriminant_centroid(clf: FittedClassifier, coef):
    """Unit-variance centroid rule; the stored direction has unit L2 norm."""
    st = clf.stats
    s = _score(clf, coef)
    return ((s - st.proj_mean1) ** 2 - (s - st.proj_mean0) ** 2
            + 2.0 * math.log(st.n0 / st.n1))


def discriminant(clf: FittedClassifier, coef):
    if clf.kind is Kind.CCC_L:
        return discriminant_L(clf, coef)
    if clf.kind is Kind.CCC_Q:
        return discriminant_Q(clf, coef)
    return discriminant_centroid(clf, coef)


def label_from_discriminant(d):
    """0 for a nonnegative discriminant, 1 for a negative one."""
    out = (np.asarray(d) < 0).astype(int)
    return int(out) if out.ndim == 0 else out


def predict(clf: FittedClassifier, coef):
    return label_from_discriminant(discriminant(clf, coef))


def l2_norm(basis: SplineBasis, coef) -> float:
    c = np.asarray(coef, dtype=float)
    return float(math.sqrt(max(c @ basis.W @ c, 0.0)))


def classifier_from_direction(sample: SmoothedSample, direction, kind: Kind, p: int,
                              alpha: Optional[float] = None,
                              diagnostics: Optional[dict] = None) -> FittedClassifier:
    kind = Kind(kind)
    direction = np.asarray(direction, dtype=float)
    if not np.any(direction):
        raise InvalidInputError("projection direction is the zero function")
    if not kind.is_ccc:
        direction = direction / l2_norm(sample.basis, direction)
    return FittedClassifier(
        kind=kind,
        direction=direction,
        stats=group_stats(sample, direction),
        basis=sample.basis,
        p=int(p),
        alpha=None if alpha is None else float(alpha),
        theta0=sample.theta0,
        diagnostics=diagnostics or {},
    )


def continuum_diagnostics(model: continuum.ContinuumModel) -> dict:
    def num(v):
        if v is None:
            return None
        v = float(v)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")

    return {
        "components": [
            {"delta": num(d), "objective": num(o), "top_two_gap": num(g)}
            for d, o, g in zip(model.deltas, model.objectives, model.gaps)
        ],
    }


def fit_ccc(sample: SmoothedSample, p: int, alpha: float, kind="ccc-l",
            design: Optional[continuum.CenteredDesign] = None) -> FittedClassifier:
    """Continuum centroid classifier at fixed ``(p, alpha)``."""
    kind = Kind(kind)
    if not kind.is_ccc:
        raise InvalidInputError(f"fit_ccc needs ccc-l or ccc-q, got {kind.value}")
    check_groups(sample)
    if design is None:
        design = continuum.center_and_factor(sample)
    model = continuum.fit_continuum(design, min(p, design.r), alpha)
    return classifier_from_direction(sample, model.beta_coef, kind, model.p, alpha,
                                     continuum_diagnostics(model))


def within_covariance(sample: SmoothedSample) -> np.ndarray:
    """Pooled within-group covariance of the coefficients (group weights N_k/N)."""
    if sample.labels is None:
        raise InvalidInputError("sample has no labels")
    C = sample.coef
    S = np.zeros((C.shape[1], C.shape[1]))
    for k in (0, 1):
        Ck = C[sample.labels == k]
        if Ck.shape[0] == 0:
            continue
        D = Ck - Ck.mean(axis=0)
        S += D.T @ D
    return S / C.shape[0]


def within_spectrum(sample: SmoothedSample, design: Optional[continuum.CenteredDesign] = None):
    """Eigenvalues (descending) and eigenfunction coefficients of the
    within-group covariance operator."""
    if design is None:
        Whalf, WhalfInv = continuum.sym_sqrt(sample.basis.W)
    else:
        Whalf, WhalfInv = design.Whalf, design.WhalfInv
    K = Whalf @ within_covariance(sample) @ Whalf
    lam, E = np.linalg.eigh(0.5 * (K + K.T))
    order = np.argsort(lam)[::-1]
    lam = np.maximum(lam[order], 0.0)
    return lam, WhalfInv @ E[:, order]


def pcc_directions(sample: SmoothedSample, p_max: int) -> list:
    """Least-squares slopes on the first 1..p_max within-group FPC scores.

    The list is shorter than ``p_max`` when the within-group covariance has
    lower rank.
    """
    lam, phi = within_spectrum(sample)
    rank = int(np.sum(lam > continuum.RANK_TOL * lam[0])) if lam[0] > 0 else 0
    if rank == 0:
        raise DegenerateVarianceError("no within-group variation")
    Cc = sample.coef - sample.coef.mean(axis=0)
    y = sample.labels.astype(float)
    Z = Cc @ sample.basis.W @ phi[:, :min(p_max, rank)]
    out = []
    for p in range(1, Z.shape[1] + 1):
        gamma, *_ = np.linalg.lstsq(Z[:, :p], y - y.mean(), rcond=None)
        out.append(phi[:, :p] @ gamma)
    return out


def fit_pcc(sample: SmoothedSample, p: int) -> FittedClassifier:
    """Principal-component centroid classifier."""
    check_groups(sample)
    directions = pcc_directions(sample, p)
    if len(directions) < p:
        warnings.warn(f"p={p} exceeds the within-group rank {len(directions)}; "
                      f"using {len(directions)}", RuntimeWarning, stacklevel=2)
    return classifier_from_direction(sample, directions[-1], Kind.PCC, len(directions))


def fit_plcc(sample: SmoothedSample, p: int,
             design: Optional[continuum.CenteredDesign] = None) -> FittedClassifier:
    """Partial-least-squares centroid classifier (continuum slope at alpha = 1/2)."""
    check_groups(sample)
    if design is None:
        design = continuum.center_and_factor(sample)
    model = continuum.fit_continuum(design, min(p, design.r), 0.5)
    return classifier_from_direction(sample, model.beta_coef, Kind.PLCC, model.p, 0.5,
                                     continuum_diagnostics(model))


def fit(sample: SmoothedSample, kind, p: int, alpha: Optional[float] = None) -> FittedClassifier:
    kind = Kind(kind)
    if kind.is_ccc:
        if alpha is None:
            raise InvalidInputError(f"{kind.value} needs alpha")
        return fit_ccc(sample, p, alpha, kind)
    if kind is Kind.PCC:
        return fit_pcc(sample, p)
    return fit_plcc(sample, p)
