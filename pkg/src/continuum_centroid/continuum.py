"""Functional continuum basis and the projection direction built on it.

The curves enter through their spline coefficients. After centering and a
thin SVD of ``C_c W^{1/2}`` the search for each unit-norm weight function
reduces to an ``r``-dimensional problem

    maximize  (b' G_j' Yc)^2 (b' G_j' G_j b)^{alpha/(1-alpha) - 1},  |b| = 1,

whose maximizer has the ridge form ``b ∝ (G_j'G_j + (zeta/delta) I)^{-1} G_j' Yc``
with ``zeta`` the top eigenvalue of ``G_j'G_j``. Only the scalar ``delta`` is
searched numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import DeflationExhaustedError, DegenerateDesignError, InvalidInputError
from .splines import SmoothedSample

RANK_TOL = 1e-10
EIG_CLIP = 1e-14
GRID_POINTS = 40
LOG_SPAN = 6.0
GOLDEN_TOL = 1e-10

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def sym_sqrt(W: np.ndarray):
    """Symmetric square root of a PD matrix and its inverse."""
    lam, Q = np.linalg.eigh(W)
    lam = np.maximum(lam, EIG_CLIP * lam.max())
    root = np.sqrt(lam)
    return (Q * root) @ Q.T, (Q / root) @ Q.T


@dataclass(frozen=True, eq=False)
class CenteredDesign:
    """Centered coefficients factored as ``C_c W^{1/2} = G1 V'``.

    ``G1 = U R`` holds the scores on the ``r`` retained right-singular
    directions; ``V`` maps them back to (whitened) coefficient space.
    """

    G1: np.ndarray
    V: np.ndarray
    singular_values: np.ndarray
    Whalf: np.ndarray
    WhalfInv: np.ndarray
    Yc: np.ndarray
    coef_mean: np.ndarray
    W: np.ndarray = field(repr=False, default=None)

    @property
    def r(self) -> int:
        return self.G1.shape[1]

    @property
    def N(self) -> int:
        return self.G1.shape[0]


def center_and_factor(sample: SmoothedSample, rank_tol: float = RANK_TOL) -> CenteredDesign:
    if sample.labels is None:
        raise InvalidInputError("sample has no labels")
    if sample.N < 2:
        raise InvalidInputError("need at least two curves")
    y = sample.labels.astype(float)
    Yc = y - y.mean()
    if np.all(Yc == 0):
        raise DegenerateDesignError("all labels identical; centered response is zero")
    mean = sample.coef.mean(axis=0)
    Cc = sample.coef - mean
    Whalf, WhalfInv = sym_sqrt(sample.basis.W)
    U, s, Vt = np.linalg.svd(Cc @ Whalf, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        raise DegenerateDesignError("all curves identical after centering")
    r = int(np.sum(s > rank_tol * s[0]))
    return CenteredDesign(
        G1=U[:, :r] * s[:r],
        V=Vt[:r].T.copy(),
        singular_values=s[:r],
        Whalf=Whalf,
        WhalfInv=WhalfInv,
        Yc=Yc,
        coef_mean=mean,
        W=sample.basis.W,
    )


def continuum_objective(b, Gj, Yc, alpha: float) -> float:
    """``(b'G'Yc)^2 (b'G'Gb)^{alpha/(1-alpha) - 1}`` for a unit vector ``b``."""
    _check_alpha(alpha)
    Gb = np.asarray(Gj) @ np.asarray(b)
    cov = float(Gb @ Yc)
    var = float(Gb @ Gb)
    expo = alpha / (1.0 - alpha) - 1.0
    if expo == 0.0:
        return cov * cov
    if var == 0.0 or cov == 0.0:
        return 0.0
    try:
        return cov * cov * var ** expo
    except OverflowError:
        return math.inf


def log_objective(b, Gj, Yc, alpha: float) -> float:
    """Natural log of :func:`continuum_objective`, stable for alpha near 1."""
    Gb = np.asarray(Gj) @ np.asarray(b)
    cov = abs(float(Gb @ Yc))
    var = float(Gb @ Gb)
    if cov == 0.0 or var == 0.0:
        return -np.inf
    return 2.0 * math.log(cov) + (alpha / (1.0 - alpha) - 1.0) * math.log(var)


def _check_alpha(alpha: float) -> None:
    if not (0.0 <= alpha < 1.0):
        raise InvalidInputError(f"alpha must lie in [0, 1), got {alpha}")


@dataclass(frozen=True)
class WeightSolution:
    """Unit weight vector for one component plus search diagnostics.

    ``delta`` is ``None`` for the closed forms (alpha = 0 and alpha = 1/2).
    ``top_two_gap`` is the relative log-objective gap between the best and
    the runner-up local maximum met on the search grid (``None`` when only
    one was found). ``boundary`` flags a maximum sitting at the edge of the
    searched range.
    """

    b: np.ndarray
    delta: Optional[float]
    objective: float
    log_objective: float
    top_two_gap: Optional[float] = None
    boundary: bool = False


class _RidgePath:
    """Log objective of the ridge-form vector as a function of delta."""

    def __init__(self, Gj: np.ndarray, Yc: np.ndarray, alpha: float):
        lam, Q = np.linalg.eigh(Gj.T @ Gj)
        self.lam = np.maximum(lam, 0.0)
        self.Q = Q
        self.zeta = float(self.lam[-1])
        self.g = Q.T @ (Gj.T @ Yc)
        self.gamma = alpha / (1.0 - alpha)

    def coords(self, delta):
        """Ridge vectors in eigen-coordinates, one row per delta."""
        delta = np.atleast_1d(np.asarray(delta, dtype=float))
        kappa = self.zeta / delta
        return self.g[None, :] / (self.lam[None, :] + kappa[:, None])

    def log_q(self, delta) -> np.ndarray:
        bt = self.coords(delta)
        cov = np.abs(bt @ self.g)
        var = (bt * bt) @ self.lam
        nrm = np.einsum("ij,ij->i", bt, bt)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (2.0 * np.log(cov) + (self.gamma - 1.0) * np.log(var)
                   - self.gamma * np.log(nrm))
        return np.where(np.isfinite(out), out, -np.inf)

    def unit(self, delta) -> np.ndarray:
        bt = self.coords(delta)[0]
        b = self.Q @ bt
        b /= np.linalg.norm(b)
        return b


def _positive_delta(u):
    return 10.0 ** np.asarray(u)


def _negative_delta(v):
    e = 10.0 ** np.asarray(v)
    return -e / (1.0 + e)


def golden_section_max(f, a: float, b: float, tol: float = GOLDEN_TOL):
    """Maximize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _local_maxima(vals: np.ndarray) -> List[int]:
    n = vals.size
    idx = []
    for i in range(n):
        left = vals[i - 1] if i > 0 else -np.inf
        right = vals[i + 1] if i < n - 1 else -np.inf
        if np.isfinite(vals[i]) and vals[i] >= left and vals[i] >= right:
            if i > 0 and vals[i] == left:
                continue  # plateau already represented
            idx.append(i)
    return idx


def _oriented(b: np.ndarray, Gj, Yc) -> np.ndarray:
    return -b if float((Gj @ b) @ Yc) < 0 else b


def _solution(b, Gj, Yc, alpha, delta=None, gap=None, boundary=False) -> WeightSolution:
    b = _oriented(b / np.linalg.norm(b), Gj, Yc)
    return WeightSolution(
        b=b,
        delta=delta,
        objective=continuum_objective(b, Gj, Yc, alpha),
        log_objective=log_objective(b, Gj, Yc, alpha),
        top_two_gap=gap,
        boundary=boundary,
    )


def solve_weight(Gj, Yc, alpha: float) -> WeightSolution:
    """Unit vector maximizing the continuum objective for one component.

    Raises
    ------
    DeflationExhaustedError
        If ``Gj'Yc`` vanishes, i.e. no covariance with the response is left.
    """
    _check_alpha(alpha)
    Gj = np.asarray(Gj, dtype=float)
    Yc = np.asarray(Yc, dtype=float)
    g = Gj.T @ Yc
    scale = np.linalg.norm(Gj) * np.linalg.norm(Yc)
    if scale == 0 or np.linalg.norm(g) <= 1e-12 * scale:
        raise DeflationExhaustedError("no covariance with the response remains")

    if alpha == 0.5:
        return _solution(g, Gj, Yc, alpha)
    if alpha == 0.0:
        b, *_ = np.linalg.lstsq(Gj, Yc, rcond=RANK_TOL)
        return _solution(b, Gj, Yc, alpha, delta=math.inf)

    path = _RidgePath(Gj, Yc, alpha)
    grid = np.linspace(-LOG_SPAN, LOG_SPAN, GRID_POINTS)
    step = grid[1] - grid[0]
    candidates = []
    for to_delta in (_positive_delta, _negative_delta):
        vals = path.log_q(to_delta(grid))
        for i in _local_maxima(vals):
            lo = grid[max(i - 1, 0)]
            hi = grid[min(i + 1, grid.size - 1)]
            x, fx = golden_section_max(lambda s: float(path.log_q(to_delta(s))[0]), lo, hi)
            if vals[i] > fx:
                x, fx = grid[i], vals[i]
            at_edge = (i == 0 or i == grid.size - 1) and abs(abs(x) - LOG_SPAN) < step
            candidates.append((fx, float(to_delta(x)), at_edge))
    if not candidates:
        # Q is -inf everywhere on the grid; fall back to the covariance direction
        return _solution(g, Gj, Yc, alpha, boundary=True)

    candidates.sort(key=lambda c: c[0], reverse=True)
    fbest, delta, edge = candidates[0]
    gap = None
    for fx, _, _ in candidates[1:]:
        if fbest - fx > 1e-9 * max(1.0, abs(fbest)):
            gap = (fbest - fx) / max(1.0, abs(fbest))
            break
    sol = _solution(path.unit(delta), Gj, Yc, alpha, delta=delta, gap=gap, boundary=edge)
    # the delta -> 0 limit (covariance direction) is not on the grid itself
    pls = _solution(g, Gj, Yc, alpha)
    if pls.log_objective > sol.log_objective:
        return WeightSolution(pls.b, 0.0, pls.objective, pls.log_objective, gap, True)
    return sol


@dataclass(frozen=True, eq=False)
class ContinuumModel:
    """Fitted continuum components and the projection direction.

    ``B`` stacks the unit vectors ``b_j`` as columns; ``beta_coef`` holds
    the spline coefficients of the least-squares slope built on the first
    ``p`` components.
    """

    alpha: float
    B: np.ndarray
    deltas: tuple
    objectives: tuple
    gaps: tuple
    beta_coef: np.ndarray
    design: CenteredDesign = field(repr=False)
    requested_p: int = 0

    @property
    def p(self) -> int:
        return self.B.shape[1]

    def scores(self) -> np.ndarray:
        """Projected (centered) training scores ``H_p = G1 B``."""
        return self.design.G1 @ self.B

    def weight_coefficients(self) -> np.ndarray:
        """Spline coefficients of the weight functions, one column each."""
        return self.design.WhalfInv @ (self.design.V @ self.B)

    def truncated(self, p: int) -> "ContinuumModel":
        if not 1 <= p <= self.p:
            raise InvalidInputError(f"p must be in 1..{self.p}, got {p}")
        B = self.B[:, :p]
        return ContinuumModel(
            alpha=self.alpha,
            B=B,
            deltas=self.deltas[:p],
            objectives=self.objectives[:p],
            gaps=self.gaps[:p],
            beta_coef=_beta_coefficients(self.design, B),
            design=self.design,
            requested_p=p,
        )


def _beta_coefficients(design: CenteredDesign, B: np.ndarray) -> np.ndarray:
    H = design.G1 @ B
    coefs, *_ = np.linalg.lstsq(H, design.Yc, rcond=None)
    return design.WhalfInv @ (design.V @ (B @ coefs))


def _deflated(G1: np.ndarray, H: np.ndarray):
    """``P G1`` with ``P`` the projector off the columns of ``H``.

    Returns ``None`` when ``H`` is numerically rank deficient.
    """
    Qh, Rh = np.linalg.qr(H)
    d = np.abs(np.diag(Rh))
    if d.min() <= 1e-10 * max(d.max(), np.linalg.norm(G1)):
        return None
    return G1 - Qh @ (Qh.T @ G1)


def fit_continuum(design: CenteredDesign, p: int, alpha: float) -> ContinuumModel:
    """Extract up to ``p`` continuum components by sequential deflation.

    Stops early (the returned model has ``model.p < p``) when the deflated
    scores lose all covariance with the response or become collinear.
    """
    _check_alpha(alpha)
    if int(p) != p or p < 1:
        raise InvalidInputError(f"p must be a positive integer, got {p}")
    if p > design.r:
        raise InvalidInputError(f"p={p} exceeds the design rank r={design.r}")
    G1, Yc = design.G1, design.Yc
    bs, deltas, objs, gaps = [], [], [], []
    for j in range(p):
        if j == 0:
            Gj = G1
        else:
            Gj = _deflated(G1, G1 @ np.column_stack(bs))
            if Gj is None:
                break
        try:
            sol = solve_weight(Gj, Yc, alpha)
        except DeflationExhaustedError:
            if j == 0:
                raise
            break
        bs.append(sol.b)
        deltas.append(sol.delta)
        objs.append(sol.objective)
        gaps.append(sol.top_two_gap)
    B = np.column_stack(bs)
    return ContinuumModel(
        alpha=alpha,
        B=B,
        deltas=tuple(deltas),
        objectives=tuple(objs),
        gaps=tuple(gaps),
        beta_coef=_beta_coefficients(design, B),
        design=design,
        requested_p=p,
    )


def project(model_or_beta, coef, W: Optional[np.ndarray] = None):
    """L2 inner product of the direction with curve(s) given by ``coef``.

    Accepts a :class:`ContinuumModel` (``W`` taken from its design) or a raw
    coefficient vector together with ``W``.
    """
    if isinstance(model_or_beta, ContinuumModel):
        beta = model_or_beta.beta_coef
        if W is None:
            W = model_or_beta.design.W
    else:
        beta = np.asarray(model_or_beta, dtype=float)
        if W is None:
            raise InvalidInputError("W is required with a bare coefficient vector")
    out = np.asarray(coef, dtype=float) @ (W @ beta)
    return float(out) if np.ndim(out) == 0 else out
