"""Cubic B-spline presmoothing of densely observed curves.

Every curve is replaced by a penalized least-squares spline fit on a common
clamped knot vector (one interior knot per grid point). A single roughness
parameter, shared by all curves, is picked by generalized cross-validation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.interpolate import BSpline

from .errors import DomainError, InvalidInputError

GAUSS_NODES = 5
DEFAULT_THETA_COUNT = 25


@dataclass(frozen=True)
class TimeGrid:
    """Equispaced observation grid ``t_min = t_1 < ... < t_{M+1} = t_max``."""

    t_min: float
    t_max: float
    M: int

    def __post_init__(self):
        if not (np.isfinite(self.t_min) and np.isfinite(self.t_max)):
            raise InvalidInputError("grid bounds must be finite")
        if self.t_max <= self.t_min:
            raise InvalidInputError(f"t_max ({self.t_max}) must exceed t_min ({self.t_min})")
        if int(self.M) != self.M or self.M < 1:
            raise InvalidInputError(f"M must be a positive integer, got {self.M}")

    @property
    def dt(self) -> float:
        return (self.t_max - self.t_min) / self.M

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.M + 1)

    @property
    def width(self) -> float:
        return self.t_max - self.t_min

    @classmethod
    def from_points(cls, points: Sequence[float], rtol: float = 1e-12) -> "TimeGrid":
        """Recover the grid from explicit points, checking equispacing."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise InvalidInputError("a grid needs at least two points")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("grid points must be finite")
        if np.any(np.diff(pts) <= 0):
            raise InvalidInputError("grid points must be strictly increasing")
        grid = cls(float(pts[0]), float(pts[-1]), pts.size - 1)
        dev = np.max(np.abs(pts - grid.points))
        # decimal files rarely hit 1e-12 exactly; allow a few ulps of the span
        tol = max(rtol * grid.width, 64 * np.finfo(float).eps * np.max(np.abs(pts)))
        if dev > tol:
            raise InvalidInputError(
                f"grid points are not equispaced (max deviation {dev:.3g})"
            )
        return grid

    def describe(self) -> dict:
        return {"t_min": self.t_min, "t_max": self.t_max, "M": self.M}


@dataclass(frozen=True, eq=False)
class SplineBasis:
    """Clamped B-spline system on a :class:`TimeGrid`.

    Attributes
    ----------
    grid : TimeGrid
    degree : int
        Polynomial degree (3 for the smoothing basis; lower degrees arise
        when differentiating fitted curves).
    knots : ndarray
        Grid points with boundary knots repeated ``degree + 1`` times.
    W : ndarray, shape (L, L)
        Gram matrix of the basis functions.
    Pen : ndarray, shape (L, L)
        Gram matrix of second derivatives (zero when ``degree < 2``).
    Psi : ndarray, shape (M + 1, L)
        Basis functions evaluated at the grid points.
    """

    grid: TimeGrid
    degree: int
    knots: np.ndarray
    W: np.ndarray
    Pen: np.ndarray
    Psi: np.ndarray

    @property
    def L(self) -> int:
        return self.knots.size - self.degree - 1

    def design_matrix(self, t) -> np.ndarray:
        """Basis values at arbitrary points of the domain, shape (len(t), L)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        _check_domain(self.grid, t)
        return BSpline.design_matrix(t, self.knots, self.degree).toarray()

    def describe(self) -> dict:
        return {**self.grid.describe(), "L": self.L, "degree": self.degree}

    def compatible_with(self, other: "SplineBasis") -> bool:
        return self.degree == other.degree and self.grid == other.grid


def _check_domain(grid: TimeGrid, t: np.ndarray) -> None:
    slack = 1e-12 * grid.width
    if np.any(t < grid.t_min - slack) or np.any(t > grid.t_max + slack) or np.any(~np.isfinite(t)):
        raise DomainError(f"evaluation point outside [{grid.t_min}, {grid.t_max}]")


def clamped_knots(grid: TimeGrid, degree: int = 3) -> np.ndarray:
    pts = grid.points
    return np.concatenate([np.full(degree, pts[0]), pts, np.full(degree, pts[-1])])


def build_basis(grid: TimeGrid, degree: int = 3) -> SplineBasis:
    """Build the B-spline system with one interior knot per grid point.

    ``W`` and ``Pen`` are assembled with a 5-node Gauss-Legendre rule on
    every knot interval, which integrates the piecewise polynomial products
    exactly.
    """
    if grid.M < 4:
        raise InvalidInputError(f"grid too coarse: need M >= 4, got M={grid.M}")
    if degree not in (1, 2, 3):
        raise InvalidInputError(f"unsupported spline degree {degree}")
    knots = clamped_knots(grid, degree)
    L = knots.size - degree - 1
    pts = grid.points

    x, w = np.polynomial.legendre.leggauss(GAUSS_NODES)
    half = 0.5 * np.diff(pts)
    mid = 0.5 * (pts[:-1] + pts[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()

    identity = BSpline(knots, np.eye(L), degree, extrapolate=False)
    B = identity(nodes)
    W = B.T @ (weights[:, None] * B)
    if degree >= 2:
        B2 = identity.derivative(2)(nodes)
        Pen = B2.T @ (weights[:, None] * B2)
    else:
        Pen = np.zeros((L, L))
    W = 0.5 * (W + W.T)
    Pen = 0.5 * (Pen + Pen.T)
    Psi = BSpline.design_matrix(pts, knots, degree).toarray()
    return SplineBasis(grid=grid, degree=degree, knots=knots, W=W, Pen=Pen, Psi=Psi)


def default_theta_grid(grid: TimeGrid, count: int = DEFAULT_THETA_COUNT) -> np.ndarray:
    scale = grid.width ** 3
    return np.logspace(-10, 2, count) * scale


@dataclass(frozen=True, eq=False)
class SmoothedSample:
    """Spline coefficients of a set of curves plus the basis interpreting them.

    ``coef[i]`` holds the coefficients of the i-th fitted curve; ``labels``
    is ``None`` for unlabeled data.
    """

    basis: SplineBasis
    coef: np.ndarray
    theta0: float
    labels: Optional[np.ndarray] = None
    gcv: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.coef.shape[0]

    def subset(self, idx) -> "SmoothedSample":
        idx = np.asarray(idx)
        labels = None if self.labels is None else self.labels[idx]
        return SmoothedSample(self.basis, self.coef[idx], self.theta0, labels)

    def with_labels(self, labels) -> "SmoothedSample":
        return SmoothedSample(self.basis, self.coef, self.theta0, _as_labels(labels, self.N))

    def values(self) -> np.ndarray:
        """Fitted curves at the grid points, shape (N, M + 1)."""
        return self.coef @ self.basis.Psi.T


def _as_labels(labels, n: int) -> Optional[np.ndarray]:
    if labels is None:
        return None
    y = np.asarray(labels)
    if y.shape != (n,):
        raise InvalidInputError(f"expected {n} labels, got shape {y.shape}")
    if not np.all((y == 0) | (y == 1)):
        raise InvalidInputError("labels must be 0 or 1")
    return y.astype(int)


def _factor(A: np.ndarray):
    """Cholesky factor of A, or ``None`` when A is not numerically PD."""
    try:
        return scipy.linalg.cho_factor(A, lower=False, check_finite=False)
    except np.linalg.LinAlgError:
        return None


def _solve(A: np.ndarray, rhs: np.ndarray, theta: float) -> np.ndarray:
    cf = _factor(A)
    if cf is not None:
        return scipy.linalg.cho_solve(cf, rhs, check_finite=False)
    warnings.warn(
        f"penalized normal equations not positive definite at theta={theta:.3g}; "
        "using a least-squares solve",
        RuntimeWarning,
        stacklevel=3,
    )
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return sol


def _check_raw(raw, basis: SplineBasis) -> np.ndarray:
    X = np.atleast_2d(np.asarray(raw, dtype=float))
    if X.shape[1] != basis.grid.M + 1:
        raise InvalidInputError(
            f"curves have {X.shape[1]} points but the grid has {basis.grid.M + 1}"
        )
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("raw curves contain non-finite values")
    return X


def hat_trace(basis: SplineBasis, theta: float) -> float:
    """``trace{Psi (Psi'Psi + theta Pen)^{-1} Psi'}``."""
    PtP = basis.Psi.T @ basis.Psi
    A = PtP + theta * basis.Pen
    return float(np.trace(_solve(A, PtP, theta)))


def smoothing_gcv(X: np.ndarray, basis: SplineBasis, theta: float):
    """Pooled GCV score and coefficients at one smoothing level.

    Returns ``(score, coef)``; ``coef`` has one row per curve.
    """
    Psi = basis.Psi
    PtP = Psi.T @ Psi
    A = PtP + theta * basis.Pen
    cf = _factor(A)
    if cf is None:
        raise np.linalg.LinAlgError(f"singular penalized system at theta={theta:.3g}")
    coef = scipy.linalg.cho_solve(cf, Psi.T @ X.T, check_finite=False).T
    tr = np.trace(scipy.linalg.cho_solve(cf, PtP, check_finite=False))
    rss = float(np.sum((X - coef @ Psi.T) ** 2))
    denom = (basis.grid.M + 1 - tr) ** 2
    return rss / denom, coef


def smooth_curves(raw, grid: TimeGrid, theta_grid=None, labels=None,
                  basis: Optional[SplineBasis] = None) -> SmoothedSample:
    """Smooth all curves with a common GCV-selected roughness parameter.

    Parameters
    ----------
    raw : array_like, shape (N, M + 1)
        Curves observed on ``grid``.
    grid : TimeGrid
    theta_grid : array_like, optional
        Candidate smoothing parameters; defaults to
        :func:`default_theta_grid`.
    labels : array_like, optional
        0/1 group labels carried along with the coefficients.
    basis : SplineBasis, optional
        Reuse an already-built cubic basis on ``grid``.

    Returns
    -------
    SmoothedSample
    """
    if basis is None:
        basis = build_basis(grid)
    elif basis.grid != grid:
        raise InvalidInputError("basis was built on a different grid")
    X = _check_raw(raw, basis)
    thetas = default_theta_grid(grid) if theta_grid is None else np.atleast_1d(
        np.asarray(theta_grid, dtype=float))
    if thetas.size == 0:
        raise InvalidInputError("theta_grid is empty")
    if np.any(~np.isfinite(thetas)) or np.any(thetas <= 0):
        raise InvalidInputError("smoothing parameters must be positive and finite")

    scores = np.full(thetas.size, np.inf)
    best = None
    for k, theta in enumerate(thetas):
        try:
            score, coef = smoothing_gcv(X, basis, theta)
        except np.linalg.LinAlgError:
            warnings.warn(f"skipping theta={theta:.3g}: singular system", RuntimeWarning,
                          stacklevel=2)
            continue
        scores[k] = score
        if best is None or score < scores[best[0]]:
            best = (k, coef)
    if best is None:
        raise np.linalg.LinAlgError("penalized system singular for every theta")
    k, coef = best
    return SmoothedSample(basis, coef, float(thetas[k]), _as_labels(labels, X.shape[0]),
                          gcv=np.column_stack([thetas, scores]))


def smooth_fixed(raw, basis: SplineBasis, theta: float, labels=None) -> SmoothedSample:
    """Smooth curves at a given roughness parameter (e.g. test curves)."""
    X = _check_raw(raw, basis)
    A = basis.Psi.T @ basis.Psi + theta * basis.Pen
    coef = _solve(A, basis.Psi.T @ X.T, theta).T
    return SmoothedSample(basis, coef, float(theta), _as_labels(labels, X.shape[0]))


def evaluate(sample: SmoothedSample, curve_index: int, t):
    """Value of fitted curve ``curve_index`` at ``t`` (scalar or array)."""
    t_arr = np.asarray(t, dtype=float)
    _check_domain(sample.basis.grid, np.atleast_1d(t_arr))
    spl = BSpline(sample.basis.knots, sample.coef[curve_index], sample.basis.degree)
    out = spl(np.clip(t_arr, sample.basis.grid.t_min, sample.basis.grid.t_max))
    return float(out) if np.ndim(out) == 0 else out


def derivative_coefficients(sample: SmoothedSample, order: int) -> SmoothedSample:
    """Exact derivatives of the fitted splines.

    The result lives in the clamped basis of degree ``degree - order`` on the
    same breakpoints.
    """
    if order not in (1, 2):
        raise InvalidInputError(f"derivative order must be 1 or 2, got {order}")
    degree = sample.basis.degree
    if degree - order < 1:
        raise InvalidInputError(f"cannot take derivative {order} of a degree-{degree} spline")
    spl = BSpline(sample.basis.knots, sample.coef.T, degree).derivative(order)
    new_basis = build_basis(sample.basis.grid, degree - order)
    coef = np.asarray(spl.c).T
    # scipy pads the coefficient array to len(knots) - 1; keep the active part
    coef = coef[:, :new_basis.L]
    return SmoothedSample(new_basis, coef, sample.theta0, sample.labels)
