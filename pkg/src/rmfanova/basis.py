"""Clamped B-spline bases and least-squares smoothing of sampled curves.

A basis is described by its order (degree + 1) and a clamped knot vector.
Sampled curves are projected onto the basis by ordinary least squares; the
resulting coefficient vectors are what the MANOVA machinery consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DomainError, InvalidConfigurationError, SingularFitError

__all__ = [
    "BSplineBasis",
    "SampledCurve",
    "build_basis",
    "eval_basis",
    "fit_curve",
    "fit_curves",
    "gcv_score",
    "gcv_select",
]

# Relative tolerance used to decide whether a point sits on the domain edge.
_EDGE_RTOL = 1e-12


@dataclass(frozen=True)
class BSplineBasis:
    """Clamped B-spline basis on ``[knots[0], knots[-1]]``.

    Parameters
    ----------
    order : int
        Polynomial degree plus one (4 for cubic splines).
    knots : array_like
        Full nondecreasing knot vector, with the first and last knot each
        repeated ``order`` times.
    """

    order: int
    knots: np.ndarray = field(repr=False)

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        k = self.order
        if k < 1:
            raise InvalidConfigurationError(f"order must be >= 1, got {k}")
        if knots.ndim != 1 or knots.size < 2 * k:
            raise InvalidConfigurationError(
                f"need at least {2 * k} knots for order {k}, got {knots.size}")
        if np.any(np.diff(knots) < 0):
            raise InvalidConfigurationError("knots must be nondecreasing")
        if not (np.all(knots[:k] == knots[0]) and np.all(knots[-k:] == knots[-1])):
            raise InvalidConfigurationError(
                "knot vector must be clamped (end knots repeated `order` times)")
        if knots[-1] <= knots[0]:
            raise InvalidConfigurationError("empty basis domain")

    @property
    def dimension(self) -> int:
        return self.knots.size - self.order

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    @property
    def interior_knots(self) -> np.ndarray:
        return self.knots[self.order:-self.order]

    def __call__(self, t) -> np.ndarray:
        """Evaluation matrix with one row per point in `t`."""
        return self.evaluate(t)

    def evaluate(self, t) -> np.ndarray:
        """Evaluate all basis functions at the points `t`.

        Returns an array of shape ``(len(t), dimension)``.  Points outside the
        domain raise :class:`DomainError`.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        a, b = self.domain
        tol = _EDGE_RTOL * (b - a)
        if np.any(~np.isfinite(t)) or np.any(t < a - tol) or np.any(t > b + tol):
            bad = t[~((t >= a - tol) & (t <= b + tol))]
            raise DomainError(f"points {bad[:5].tolist()} outside domain [{a}, {b}]")
        t = np.clip(t, a, b)
        return _cox_de_boor(self.knots, self.order, t)

    def __hash__(self):
        return hash((self.order, self.knots.tobytes()))

    def __eq__(self, other):
        if not isinstance(other, BSplineBasis):
            return NotImplemented
        return self.order == other.order and np.array_equal(self.knots, other.knots)


def _cox_de_boor(knots: np.ndarray, order: int, t: np.ndarray) -> np.ndarray:
    # Triangular Cox-de Boor scheme, vectorised over the evaluation points.
    deg = order - 1
    dim = knots.size - order
    span = np.searchsorted(knots, t, side="right") - 1
    span = np.clip(span, deg, dim - 1)
    npts = t.size
    vals = np.zeros((npts, order))
    vals[:, 0] = 1.0
    left = np.zeros((npts, order))
    right = np.zeros((npts, order))
    for j in range(1, order):
        left[:, j] = t - knots[span + 1 - j]
        right[:, j] = knots[span + j] - t
        saved = np.zeros(npts)
        for r in range(j):
            temp = vals[:, r] / (right[:, r + 1] + left[:, j - r])
            vals[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        vals[:, j] = saved
    out = np.zeros((npts, dim))
    rows = np.arange(npts)[:, None]
    cols = span[:, None] - deg + np.arange(order)[None, :]
    out[rows, cols] = vals
    return out


def build_basis(domain: Sequence[float], dimension: int, order: int = 4) -> BSplineBasis:
    """Clamped basis with equally spaced interior knots.

    The number of interior knots is ``dimension - order``, so the breakpoints
    (interior knots plus both ends) number ``dimension - order + 2``.

    Examples
    --------
    >>> build_basis((0.0, 1.0), 4).interior_knots.size
    0
    >>> build_basis((0.0, 1.0), 14).interior_knots.size
    10
    """
    a, b = (float(x) for x in domain)
    if not b > a:
        raise InvalidConfigurationError(f"empty domain [{a}, {b}]")
    if order < 1:
        raise InvalidConfigurationError(f"order must be >= 1, got {order}")
    if dimension < order:
        raise InvalidConfigurationError(
            f"dimension ({dimension}) must be >= order ({order})")
    n_interior = dimension - order
    breaks = np.linspace(a, b, n_interior + 2)
    knots = np.concatenate([np.full(order, a), breaks[1:-1], np.full(order, b)])
    return BSplineBasis(order=order, knots=knots)


def eval_basis(basis: BSplineBasis, t: float) -> np.ndarray:
    """Values of the `basis.dimension` basis functions at a single point."""
    return basis.evaluate([t])[0]


@dataclass(frozen=True)
class SampledCurve:
    """Discrete observations ``values[r]`` of a curve at ``grid[r]``."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or values.shape != grid.shape:
            raise InvalidConfigurationError(
                f"grid and values must be 1-d of equal length, got {grid.shape} and {values.shape}")
        if grid.size > 1 and np.any(np.diff(grid) <= 0):
            raise InvalidConfigurationError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)


def _qr_factor(basis: BSplineBasis, grid: np.ndarray):
    phi = basis.evaluate(grid)
    if grid.size < basis.dimension:
        raise SingularFitError(
            f"{grid.size} grid points cannot determine {basis.dimension} coefficients "
            f"(order {basis.order} basis on {basis.domain})")
    q, r = np.linalg.qr(phi)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * max(diag.max(), 1.0):
        empty = np.flatnonzero(phi.sum(axis=0) <= 0)
        detail = f"; basis functions {empty.tolist()} have no grid support" if empty.size else ""
        raise SingularFitError(
            f"rank-deficient evaluation matrix for dimension-{basis.dimension} basis "
            f"on a {grid.size}-point grid over [{grid[0]}, {grid[-1]}]{detail}")
    return q, r


def fit_curves(basis: BSplineBasis, grid, values) -> np.ndarray:
    """Least-squares coefficients for several curves sharing one grid.

    Parameters
    ----------
    basis : BSplineBasis
    grid : array_like, shape (r,)
    values : array_like, shape (r,) or (r, c)
        One column per curve.

    Returns
    -------
    ndarray, shape (dimension,) or (dimension, c)
    """
    grid = np.asarray(grid, dtype=float)
    q, r = _qr_factor(basis, grid)
    return solve_triangular(r, q.T @ np.asarray(values, dtype=float))


def fit_curve(basis: BSplineBasis, curve: SampledCurve) -> np.ndarray:
    """Least-squares coefficient vector of one sampled curve."""
    return fit_curves(basis, curve.grid, curve.values)


def _group_by_grid(curves: Iterable[SampledCurve]):
    groups: dict[bytes, list[int]] = {}
    curves = list(curves)
    for idx, c in enumerate(curves):
        groups.setdefault(c.grid.tobytes(), []).append(idx)
    return curves, groups


def gcv_score(basis: BSplineBasis, curves: Iterable[SampledCurve]) -> float:
    """Mean generalized cross-validation score of the LS fit over `curves`.

    For a curve with ``r`` points, ``GCV = r * RSS / (r - tr(H))**2`` where
    ``H`` is the hat matrix; for an unpenalized fit ``tr(H)`` is the basis
    dimension.
    """
    curves, groups = _group_by_grid(curves)
    if not curves:
        raise InvalidConfigurationError("no curves supplied")
    scores = np.empty(len(curves))
    for idxs in groups.values():
        grid = curves[idxs[0]].grid
        q, _ = _qr_factor(basis, grid)
        ys = np.column_stack([curves[i].values for i in idxs])
        resid = ys - q @ (q.T @ ys)
        rss = np.sum(resid**2, axis=0)
        nobs = grid.size
        edf = nobs - basis.dimension
        scores[idxs] = np.inf if edf <= 0 else nobs * rss / edf**2
    return float(scores.mean())


def gcv_select(domain: Sequence[float], candidate_dimensions: Sequence[int],
               curves: Sequence[SampledCurve], order: int = 4) -> int:
    """Pick the basis dimension with the smallest mean GCV score.

    Scores equal up to rounding are tied and resolved toward the smaller
    dimension.
    """
    cands = sorted(set(int(d) for d in candidate_dimensions))
    if not cands:
        raise InvalidConfigurationError("empty candidate list")
    curves = list(curves)
    if not curves:
        raise InvalidConfigurationError("empty curve list")
    scale = float(np.mean([np.mean(c.values**2) for c in curves]))
    scores = [gcv_score(build_basis(domain, d, order), curves) for d in cands]
    best = min(scores)
    tol = 1e-10 * max(abs(best), scale * 1e-6, np.finfo(float).tiny)
    return next(d for d, s in zip(cands, scores) if s <= best + tol)
