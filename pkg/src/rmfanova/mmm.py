"""Mixed multivariate model.

The response is stacked as an ``(n*m, p)`` matrix with one ``m x p`` block per
subject.  With orthonormal ``T`` the SSCP matrices of the mixed model are the
sums of the ``q`` diagonal ``p x p`` blocks of the doubly multivariate SSCP
matrices of ``Y (T kron I_p)``, which is how they are computed here.

Validity needs multivariate sphericity, ``Cov(Y (T kron I_p)) = I_q kron Gamma``.
:func:`sphericity_test` checks it with a likelihood ratio test and reports a
Box-type epsilon that shrinks the F degrees of freedom when it fails.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .design import ContrastPair, RMDataset, build_design_matrix, contrast_for
from .dmm import _dims, restricted_sscp
from .errors import DimensionError, InvalidConfigurationError, NotEstimableError
from .manova import SSCPPair, manova_statistics
from .report import TestReport

__all__ = [
    "SphericityResult",
    "box_epsilon",
    "block_sum",
    "mmm_sscp",
    "mmm_test",
    "rearrange",
    "sphericity_test",
    "unrearrange",
]


def rearrange(y: np.ndarray, m: int, p: int) -> np.ndarray:
    """Stack the wide ``(n, m*p)`` response into ``(n*m, p)``.

    Rows of each subject block are treatments, columns are coefficients, so
    that ``vec(Y_k*') = y_k``.
    """
    y = np.asarray(y)
    if y.ndim != 2 or y.shape[1] != m * p:
        raise InvalidConfigurationError(
            f"expected {m * p} columns for m={m}, p={p}; got shape {y.shape}")
    return y.reshape(y.shape[0] * m, p)


def unrearrange(y_star: np.ndarray, m: int) -> np.ndarray:
    """Inverse of :func:`rearrange`."""
    y_star = np.asarray(y_star)
    rows, p = y_star.shape
    if rows % m:
        raise InvalidConfigurationError(f"{rows} rows not divisible by m={m}")
    return y_star.reshape(rows // m, m * p)


def block_sum(mat: np.ndarray, q: int) -> np.ndarray:
    """Sum of the ``q`` diagonal blocks of a ``(q*p, q*p)`` matrix."""
    p = mat.shape[0] // q
    return np.einsum("kakb->ab", mat.reshape(q, p, q, p))


def mmm_sscp(y_star: np.ndarray, x: np.ndarray, contrasts: ContrastPair) -> SSCPPair:
    """SSCP pair of the mixed multivariate test, each ``p x p``.

    Degrees of freedom are ``df_h = q*s`` and ``df_e = q*(n - rank(X))``.

    Raises
    ------
    DimensionError
        If ``n*m <= p``.
    """
    x = np.asarray(x, dtype=float)
    m, q = contrasts.T.shape
    nm, p = np.shape(y_star)
    n = x.shape[0]
    if nm != n * m:
        raise InvalidConfigurationError(f"stacked response has {nm} rows, expected n*m={n * m}")
    if nm <= p:
        raise DimensionError(f"MMM requires n*m > p, got n*m={nm} and p={p}")
    s_h, s_e = restricted_sscp(unrearrange(y_star, m), x, contrasts)
    rank_x = int(np.linalg.matrix_rank(x))
    return SSCPPair(block_sum(s_h, q), block_sum(s_e, q), q * contrasts.s, q * (n - rank_x))


def box_epsilon(omega: np.ndarray, q: int) -> float:
    """Multivariate Box-type epsilon of a ``(q*p, q*p)`` contrast covariance.

    With ``O_kl`` the ``p x p`` blocks and ``S = sum_k O_kk``::

        eps = (tr(S @ S) + tr(S)**2) / (q * sum_kl (tr(O_kl @ O_lk) + tr(O_kl)**2))

    This equals 1 under ``I_q kron Gamma``, reduces to the univariate
    Greenhouse-Geisser form for ``p = 1``, and is clamped to ``[1/q, 1]``.
    """
    omega = np.asarray(omega, dtype=float)
    if q <= 1:
        return 1.0
    p = omega.shape[0] // q
    blocks = omega.reshape(q, p, q, p).transpose(0, 2, 1, 3)
    ssum = np.einsum("kkab->ab", blocks)
    num = np.trace(ssum @ ssum) + np.trace(ssum) ** 2
    traces = np.einsum("klaa->kl", blocks)
    den = q * (np.einsum("klab,klab->", blocks, blocks) + np.sum(traces**2))
    if den <= 0:
        return 1.0
    return float(np.clip(num / den, 1.0 / q, 1.0))


@dataclass(frozen=True)
class SphericityResult:
    """Likelihood ratio check of multivariate sphericity."""

    lr_statistic: float
    df: int
    p_value: float
    epsilon: float
    gamma_hat: np.ndarray

    def to_dict(self) -> dict:
        return {"lr_statistic": self.lr_statistic, "df": self.df,
                "p_value": self.p_value, "epsilon": self.epsilon}


def _residual_covariance(y_star, x, t):
    m, q = t.shape
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    dfe = n - int(np.linalg.matrix_rank(x))
    pair = ContrastPair(np.eye(x.shape[1]), t)
    _, s_e = restricted_sscp(unrearrange(y_star, m), x, pair)
    return s_e / dfe, dfe


def sphericity_test(y_star: np.ndarray, x: np.ndarray, t: np.ndarray) -> SphericityResult:
    """LR test of ``Omega = I_q kron Gamma`` on the contrast residuals.

    ``LR = df_e * (q * logdet(Gamma_hat) - logdet(Omega_hat))`` referred to a
    chi-square with ``(q-1) p (p+1)/2 + p^2 q (q-1)/2`` degrees of freedom,
    where ``Gamma_hat`` averages the diagonal blocks of ``Omega_hat``.

    Raises
    ------
    NotEstimableError
        If the residual degrees of freedom are below ``q*p``.
    """
    t = np.asarray(t, dtype=float)
    q = t.shape[1]
    p = np.shape(y_star)[1]
    omega, dfe = _residual_covariance(y_star, x, t)
    gamma = block_sum(omega, q) / q
    if q == 1:
        return SphericityResult(0.0, 0, 1.0, 1.0, gamma)
    if dfe < q * p:
        raise NotEstimableError(
            f"sphericity test needs residual df >= q*p; got {dfe} < {q * p}")
    sign_o, logdet_o = np.linalg.slogdet(omega)
    sign_g, logdet_g = np.linalg.slogdet(gamma)
    if sign_o <= 0 or sign_g <= 0:
        raise NotEstimableError("residual covariance of the contrasts is singular")
    lr = max(0.0, dfe * (q * logdet_g - logdet_o))
    df = (q - 1) * p * (p + 1) // 2 + p * p * q * (q - 1) // 2
    pval = float(stats.chi2.sf(lr, df))
    return SphericityResult(float(lr), int(df), pval, box_epsilon(omega, q), gamma)


def mmm_test(dataset: RMDataset, hypothesis: str, adjust: str = "auto",
             alpha: float = 0.05) -> TestReport:
    """Mixed multivariate test of one hypothesis.

    Parameters
    ----------
    adjust : {"none", "auto", "always"}
        ``auto`` runs the sphericity test and multiplies both F degrees of
        freedom by epsilon when it rejects at `alpha` (or when it cannot be
        computed).  ``always`` applies epsilon unconditionally.
    """
    if adjust not in ("none", "auto", "always"):
        raise InvalidConfigurationError(f"adjust must be none/auto/always, got {adjust!r}")
    contrasts = contrast_for(hypothesis, dataset.g, dataset.m)
    x = build_design_matrix(dataset)
    y_star = dataset.coefficients.reshape(dataset.n * dataset.m, dataset.p)
    sscp = mmm_sscp(y_star, x, contrasts)
    stats_ = manova_statistics(sscp)
    notes = ["F approximations: Rao (W), Pillai/Lawley-Hotelling standard forms; "
             "Roy F is an upper bound", f"df_h={sscp.df_h}, df_e={sscp.df_e}, d={sscp.dim}"]
    report = TestReport(hypothesis, "MMM", stats_, _dims(dataset, contrasts), notes)
    if adjust == "none":
        return report

    sph = None
    try:
        sph = sphericity_test(y_star, x, contrasts.T)
        eps = sph.epsilon
    except NotEstimableError as exc:
        omega, _ = _residual_covariance(y_star, x, contrasts.T)
        eps = box_epsilon(omega, contrasts.q)
        notes.append(f"sphericity LR test not estimable ({exc})")
    report.sphericity = sph
    if adjust == "always":
        apply = True
        notes.append("epsilon adjustment applied unconditionally")
    elif sph is None:
        apply = True
        notes.append("epsilon adjustment applied because sphericity could not be checked")
    elif sph.p_value < alpha:
        apply = True
        notes.append(f"sphericity rejected (p={sph.p_value:.4g} < {alpha}); epsilon adjustment applied")
    else:
        apply = False
        notes.append(f"sphericity not rejected (p={sph.p_value:.4g}); no adjustment")
    if apply:
        report.statistics = [s.with_df_scale(eps) for s in stats_]
        report.method = "MMM-adjusted"
        report.epsilon = eps
    return report
