"""Doubly multivariate model.

Each subject contributes one ``p*m`` response row (treatment-major, then
basis coefficient).  The general linear hypothesis ``G' B (T kron I_p) = 0`` is
tested with the usual MANOVA statistics on the restricted response
``Y (T kron I_p)``.  The Kronecker product is never formed: ``T`` is applied
treatment-wise on the ``(n, m, p)`` view of ``Y``.
"""

from __future__ import annotations

import numpy as np

from .design import (ContrastPair, RMDataset, build_design_matrix, contrast_for)
from .errors import DimensionError, InvalidConfigurationError, InvalidDatasetError
from .manova import SSCPPair, manova_statistics
from .report import TestReport

__all__ = [
    "assemble_wide",
    "dmm_sscp",
    "dmm_test",
    "fit_b",
    "restrict",
    "restricted_sscp",
]


def assemble_wide(dataset: RMDataset) -> np.ndarray:
    """``Y[k, i*p + h] = y[k, i, h]``, shape ``(n, p*m)``."""
    return dataset.coefficients.reshape(dataset.n, dataset.m * dataset.p)


def _xtx_ginv(x: np.ndarray) -> np.ndarray:
    xtx = x.T @ x
    if np.linalg.matrix_rank(xtx) == xtx.shape[0]:
        return np.linalg.inv(xtx)
    return np.linalg.pinv(xtx)


def fit_b(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Least-squares parameter matrix ``(X'X)^- X'Y``, shape ``(g, p*m)``.

    With indicator coding, row ``j`` is the mean response of group ``j``.
    """
    x = np.asarray(x, dtype=float)
    empty = np.flatnonzero(~np.any(x != 0, axis=0))
    if empty.size:
        raise InvalidDatasetError(f"design has empty group column(s) {empty.tolist()}")
    return _xtx_ginv(x) @ (x.T @ np.asarray(y, dtype=float))


def restrict(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Compute ``Y (T kron I_p)`` for ``Y`` of shape ``(n, m*p)``; returns ``(n, q*p)``."""
    y = np.asarray(y, dtype=float)
    m, q = t.shape
    n, mp = y.shape
    if mp % m:
        raise InvalidConfigurationError(f"{mp} columns not divisible by m={m}")
    p = mp // m
    return np.einsum("nip,iq->nqp", y.reshape(n, m, p), t).reshape(n, q * p)


def restricted_sscp(y: np.ndarray, x: np.ndarray, contrasts: ContrastPair
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Hypothesis and error SSCP of the restricted response, each ``(q*p, q*p)``."""
    x = np.asarray(x, dtype=float)
    yr = restrict(y, contrasts.T)
    ginv = _xtx_ginv(x)
    b = ginv @ (x.T @ yr)
    resid = yr - x @ b
    s_e = resid.T @ resid
    gb = contrasts.G.T @ b
    middle = np.linalg.inv(contrasts.G.T @ ginv @ contrasts.G)
    s_h = gb.T @ middle @ gb
    return 0.5 * (s_h + s_h.T), 0.5 * (s_e + s_e.T)


def dmm_sscp(y: np.ndarray, x: np.ndarray, contrasts: ContrastPair) -> SSCPPair:
    """SSCP pair of the doubly multivariate test.

    Degrees of freedom are ``df_h = s`` (rank of ``G``) and
    ``df_e = n - rank(X)``.

    Raises
    ------
    DimensionError
        If ``n <= p*m``: the error matrix would be singular.
    """
    y = np.asarray(y, dtype=float)
    n, mp = y.shape
    if n <= mp:
        raise DimensionError(
            f"DMM requires n > p*m, got n={n} and p*m={mp}; the error SSCP matrix is singular "
            "(use MMM instead)")
    s_h, s_e = restricted_sscp(y, x, contrasts)
    rank_x = int(np.linalg.matrix_rank(x))
    return SSCPPair(s_h, s_e, contrasts.s, n - rank_x)


def dmm_test(dataset: RMDataset, hypothesis: str) -> TestReport:
    """Doubly multivariate test of one hypothesis, all four statistics."""
    contrasts = contrast_for(hypothesis, dataset.g, dataset.m)
    sscp = dmm_sscp(assemble_wide(dataset), build_design_matrix(dataset), contrasts)
    notes = ["F approximations: Rao (W), Pillai/Lawley-Hotelling standard forms; "
             "Roy F is an upper bound", f"df_h={sscp.df_h}, df_e={sscp.df_e}, d={sscp.dim}"]
    if not np.any(sscp.S_h) and not np.any(sscp.S_e):
        notes.append("degenerate data: both SSCP matrices are zero")
    return TestReport(hypothesis, "DMM", manova_statistics(sscp),
                      _dims(dataset, contrasts), notes)


def _dims(dataset: RMDataset, contrasts: ContrastPair) -> dict[str, int]:
    return {"n": dataset.n, "g": dataset.g, "m": dataset.m, "p": dataset.p,
            "s": contrasts.s, "q": contrasts.q}
