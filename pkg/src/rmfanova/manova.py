"""Classical MANOVA statistics from a pair of SSCP matrices.

Wilks' lambda, the Lawley-Hotelling trace, Pillai's trace and Roy's largest
root are all functions of the eigenvalues of ``S_h S_e^{-1}``.  These are
obtained from the symmetric matrix ``L^{-1} S_h L^{-T}`` where ``S_e = L L'``,
so the spectrum is real and nonnegative by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Literal

import numpy as np
from scipy import linalg, special

from .errors import InvalidConfigurationError, SingularErrorMatrixError

__all__ = [
    "STATISTIC_KINDS",
    "SSCPPair",
    "StatisticValue",
    "f_sf",
    "manova_statistics",
    "statistic_value",
    "sscp_eigenvalues",
    "wilks_pvalue",
]

Kind = Literal["W", "LH", "P", "R"]
STATISTIC_KINDS: tuple[str, ...] = ("W", "LH", "P", "R")


@dataclass(frozen=True)
class SSCPPair:
    """Hypothesis and error SSCP matrices with their degrees of freedom."""

    S_h: np.ndarray
    S_e: np.ndarray
    df_h: int
    df_e: int

    def __post_init__(self):
        sh = np.atleast_2d(np.asarray(self.S_h, dtype=float))
        se = np.atleast_2d(np.asarray(self.S_e, dtype=float))
        if sh.shape != se.shape or sh.shape[0] != sh.shape[1]:
            raise InvalidConfigurationError(
                f"S_h {sh.shape} and S_e {se.shape} must be square and conformable")
        object.__setattr__(self, "S_h", sh)
        object.__setattr__(self, "S_e", se)

    @property
    def dim(self) -> int:
        return self.S_e.shape[0]

    def scaled(self, c: float) -> "SSCPPair":
        return SSCPPair(c * self.S_h, c * self.S_e, self.df_h, self.df_e)


@dataclass(frozen=True)
class StatisticValue:
    """One MANOVA statistic with its F approximation.

    ``p_value_is_bound`` marks Roy's root, whose F is an upper bound so the
    p-value is a lower bound.  ``f_stat``/``p_value`` are NaN when the
    approximation has no valid degrees of freedom.
    """

    kind: str
    value: float
    f_stat: float
    df1: float
    df2: float
    p_value: float
    p_value_is_bound: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    def with_df_scale(self, eps: float) -> "StatisticValue":
        """Same F statistic with both degrees of freedom multiplied by `eps`."""
        df1, df2 = self.df1 * eps, self.df2 * eps
        return StatisticValue(self.kind, self.value, self.f_stat, df1, df2,
                              f_sf(self.f_stat, df1, df2), self.p_value_is_bound)


def f_sf(f: float, df1: float, df2: float) -> float:
    """Upper tail probability of the F(df1, df2) distribution.

    Uses ``P(F > f) = I_x(df2/2, df1/2)`` with ``x = df2 / (df2 + df1 f)``.
    Non-integer degrees of freedom are allowed.
    """
    if not (np.isfinite(f) and df1 > 0 and df2 > 0):
        return float("nan")
    if f <= 0:
        return 1.0
    x = df2 / (df2 + df1 * f)
    return float(min(1.0, max(0.0, special.betainc(df2 / 2.0, df1 / 2.0, x))))


def _cholesky_error(se: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(np.diag(se))) if se.size else 0.0
    if not np.all(np.isfinite(se)) or scale <= 0:
        raise SingularErrorMatrixError(
            "error SSCP matrix is zero or not finite; sample too small for the response dimension")
    try:
        chol = linalg.cholesky(se, lower=True)
    except linalg.LinAlgError as exc:
        raise SingularErrorMatrixError(
            f"error SSCP matrix ({se.shape[0]}x{se.shape[0]}) is not positive definite; "
            "sample too small for the response dimension") from exc
    if np.min(np.abs(np.diag(chol))) <= 1e-10 * np.sqrt(scale):
        raise SingularErrorMatrixError(
            f"error SSCP matrix ({se.shape[0]}x{se.shape[0]}) is numerically singular; "
            "sample too small for the response dimension")
    return chol


def sscp_eigenvalues(sscp: SSCPPair) -> np.ndarray:
    """Eigenvalues of ``S_h S_e^{-1}`` in decreasing order (clipped at 0)."""
    chol = _cholesky_error(sscp.S_e)
    a = linalg.solve_triangular(chol, sscp.S_h, lower=True)
    a = linalg.solve_triangular(chol, a.T, lower=True)
    a = 0.5 * (a + a.T)
    lam = linalg.eigvalsh(a)[::-1]
    return np.clip(lam, 0.0, None)


def _logdet_chol(mat: np.ndarray) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(linalg.cholesky(mat, lower=True)))))


def _check_df(d: int, df_h: float, df_e: float):
    if d <= 0 or df_h <= 0 or df_e <= 0:
        raise InvalidConfigurationError(
            f"degrees of freedom must be positive (d={d}, df_h={df_h}, df_e={df_e})")


def _rao_wilks(w: float, d: int, df_h: float, df_e: float) -> tuple[float, float, float]:
    denom = d**2 + df_h**2 - 5
    t = np.sqrt((d**2 * df_h**2 - 4) / denom) if denom > 0 else 1.0
    df1 = d * df_h
    df2 = (df_e + df_h - (d + df_h + 1) / 2.0) * t - (d * df_h - 2) / 2.0
    root = w ** (1.0 / t)
    f = (1.0 - root) / root * df2 / df1 if root > 0 else np.inf
    return f, df1, df2


def wilks_pvalue(w: float, d: int, df_h: int, df_e: int) -> float:
    """p-value of Wilks' lambda through Rao's F approximation.

    Exact whenever ``d <= 2`` or ``df_h <= 2``.
    """
    _check_df(d, df_h, df_e)
    if not 0 < w <= 1 + 1e-12:
        raise InvalidConfigurationError(f"Wilks lambda must lie in (0, 1], got {w}")
    f, df1, df2 = _rao_wilks(min(w, 1.0), d, df_h, df_e)
    if df2 <= 0:
        raise InvalidConfigurationError(
            f"Rao approximation undefined for d={d}, df_h={df_h}, df_e={df_e}")
    return f_sf(f, df1, df2)


def statistic_value(kind: Kind, lam: np.ndarray, d: int, df_h: float, df_e: float,
                    value: float | None = None) -> StatisticValue:
    """Build one statistic and its F approximation from the eigenvalues `lam`."""
    _check_df(d, df_h, df_e)
    s = min(d, df_h)
    mm = (abs(d - df_h) - 1) / 2.0
    nn = (df_e - d - 1) / 2.0
    bound = False
    if kind == "W":
        if value is None:
            value = float(np.prod(1.0 / (1.0 + lam)))
        f, df1, df2 = _rao_wilks(value, d, df_h, df_e)
    elif kind == "P":
        if value is None:
            value = float(np.sum(lam / (1.0 + lam)))
        df1 = s * (2 * mm + s + 1)
        df2 = s * (2 * nn + s + 1)
        f = (df2 / df1) * value / (s - value) if value < s else np.inf
    elif kind == "LH":
        if value is None:
            value = float(np.sum(lam))
        df1 = s * (2 * mm + s + 1)
        df2 = 2 * (s * nn + 1)
        f = df2 * value / (s**2 * (2 * mm + s + 1))
    elif kind == "R":
        if value is None:
            value = float(lam[0]) if lam.size else 0.0
        r = max(d, df_h)
        df1 = r
        df2 = df_e - r + df_h
        f = value * df2 / r
        bound = True
    else:
        raise InvalidConfigurationError(f"unknown statistic kind {kind!r}")
    if df1 <= 0 or df2 <= 0:
        return StatisticValue(kind, float(value), float("nan"), float(df1), float(df2),
                              float("nan"), bound)
    return StatisticValue(kind, float(value), float(f), float(df1), float(df2),
                          f_sf(f, df1, df2), bound)


def manova_statistics(sscp: SSCPPair) -> list[StatisticValue]:
    """Wilks, Lawley-Hotelling, Pillai and Roy statistics with F p-values.

    Raises
    ------
    SingularErrorMatrixError
        If ``S_e`` is not positive definite.
    """
    d = sscp.dim
    lam = sscp_eigenvalues(sscp)
    # log-determinant form keeps Wilks finite for large d
    w = float(np.exp(_logdet_chol(sscp.S_e) - _logdet_chol(sscp.S_e + sscp.S_h)))
    w = min(w, 1.0)
    return [statistic_value(k, lam, d, sscp.df_h, sscp.df_e,
                            value=w if k == "W" else None)
            for k in STATISTIC_KINDS]

