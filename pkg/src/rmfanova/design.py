"""Repeated-measures layout, design/contrast matrices and effect estimates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .errors import InvalidDatasetError, InvalidHypothesisError

__all__ = [
    "HYPOTHESES",
    "ContrastPair",
    "EffectEstimates",
    "RMDataset",
    "build_design_matrix",
    "contrast_for",
    "estimate_effects",
    "orthonormal_contrasts",
]

Hypothesis = Literal["interaction", "group", "treatment"]
HYPOTHESES: tuple[str, ...] = ("interaction", "group", "treatment")


@dataclass(frozen=True)
class RMDataset:
    """Basis coefficients of a balanced repeated-measures design.

    Parameters
    ----------
    coefficients : array_like, shape (n, m, p)
        ``coefficients[k, i]`` is the coefficient vector of subject ``k``
        under treatment ``i``.  Subjects are ordered by group.
    group_sizes : sequence of int
        Number of subjects in each of the ``g`` groups; sums to ``n``.
    """

    coefficients: np.ndarray
    group_sizes: tuple[int, ...]
    subject_ids: tuple[str, ...] | None = None
    group_labels: tuple[str, ...] | None = None
    treatment_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        y = np.array(self.coefficients, dtype=float)
        if y.ndim != 3:
            raise InvalidDatasetError(
                f"coefficients must have shape (n, m, p), got {y.shape}")
        y.setflags(write=False)
        object.__setattr__(self, "coefficients", y)
        sizes = tuple(int(s) for s in self.group_sizes)
        object.__setattr__(self, "group_sizes", sizes)
        if not sizes:
            raise InvalidDatasetError("at least one group is required")
        if any(s <= 0 for s in sizes):
            raise InvalidDatasetError(f"empty group in sizes {sizes}")
        if sum(sizes) != y.shape[0]:
            raise InvalidDatasetError(
                f"group sizes {sizes} do not add up to {y.shape[0]} subjects")
        if y.shape[1] < 1 or y.shape[2] < 1:
            raise InvalidDatasetError(f"degenerate shape {y.shape}")
        for name, labels, size in (("subject_ids", self.subject_ids, y.shape[0]),
                                   ("group_labels", self.group_labels, len(sizes)),
                                   ("treatment_labels", self.treatment_labels, y.shape[1])):
            if labels is not None:
                labels = tuple(str(x) for x in labels)
                if len(labels) != size:
                    raise InvalidDatasetError(f"{name} has {len(labels)} entries, expected {size}")
                object.__setattr__(self, name, labels)

    @property
    def n(self) -> int:
        return self.coefficients.shape[0]

    @property
    def m(self) -> int:
        return self.coefficients.shape[1]

    @property
    def p(self) -> int:
        return self.coefficients.shape[2]

    @property
    def g(self) -> int:
        return len(self.group_sizes)

    @property
    def group_index(self) -> np.ndarray:
        """Group number (0-based) of each subject row."""
        return np.repeat(np.arange(self.g), self.group_sizes)

    def with_coefficients(self, coefficients, group_sizes=None) -> "RMDataset":
        return RMDataset(coefficients,
                         self.group_sizes if group_sizes is None else group_sizes,
                         subject_ids=None, group_labels=self.group_labels,
                         treatment_labels=self.treatment_labels)

    @classmethod
    def from_groups(cls, groups: Sequence[np.ndarray], **labels) -> "RMDataset":
        """Build from one ``(n_j, m, p)`` array per group."""
        arrs = [np.asarray(a, dtype=float) for a in groups]
        return cls(np.concatenate(arrs, axis=0), tuple(a.shape[0] for a in arrs), **labels)


def build_design_matrix(dataset: RMDataset) -> np.ndarray:
    """Cell-indicator between-group design matrix, shape ``(n, g)``."""
    x = np.zeros((dataset.n, dataset.g))
    x[np.arange(dataset.n), dataset.group_index] = 1.0
    return x


def orthonormal_contrasts(m: int) -> np.ndarray:
    """Orthonormal polynomial contrasts for `m` levels, shape ``(m, m - 1)``.

    Columns are orthogonal to the constant vector and to each other.  Signs are
    canonicalized so that the first nonzero entry of every column is positive.
    For ``m = 3`` this gives ``(1, 0, -1)/sqrt(2)`` and ``(1, -2, 1)/sqrt(6)``.
    """
    if m < 2:
        raise InvalidHypothesisError(f"need at least 2 treatments for contrasts, got {m}")
    x = np.arange(1, m + 1, dtype=float)
    x -= x.mean()
    vander = np.vander(x, m, increasing=True)
    q, _ = np.linalg.qr(vander)
    t = q[:, 1:]
    # exact zeros keep the sign rule stable
    t[np.abs(t) < 1e-14] = 0.0
    for j in range(t.shape[1]):
        first = t[np.flatnonzero(t[:, j])[0], j]
        if first < 0:
            t[:, j] = -t[:, j]
    return t


def _group_differences(g: int) -> np.ndarray:
    gmat = np.zeros((g, g - 1))
    for j in range(g - 1):
        gmat[j, j] = 1.0
        gmat[j + 1, j] = -1.0
    return gmat


@dataclass(frozen=True)
class ContrastPair:
    """Between-group matrix ``G`` (g x s) and within-treatment ``T`` (m x q)."""

    G: np.ndarray
    T: np.ndarray

    @property
    def s(self) -> int:
        return int(np.linalg.matrix_rank(self.G))

    @property
    def q(self) -> int:
        return int(np.linalg.matrix_rank(self.T))


def contrast_for(hypothesis: Hypothesis, g: int, m: int) -> ContrastPair:
    """Contrast matrices for the interaction, group or treatment hypothesis.

    * interaction: successive group differences, orthonormal treatment contrasts
    * group: successive group differences, ``T = I_m``
    * treatment: ``G = I_g``, orthonormal treatment contrasts
    """
    if hypothesis not in HYPOTHESES:
        raise InvalidHypothesisError(
            f"unknown hypothesis {hypothesis!r}; expected one of {HYPOTHESES}")
    if g < 1:
        raise InvalidHypothesisError(f"g must be >= 1, got {g}")
    if hypothesis in ("group", "interaction") and g < 2:
        raise InvalidHypothesisError(f"{hypothesis} test needs at least 2 groups")
    if hypothesis in ("treatment", "interaction") and m < 2:
        raise InvalidHypothesisError(f"{hypothesis} test needs at least 2 treatments")
    if hypothesis == "interaction":
        return ContrastPair(_group_differences(g), orthonormal_contrasts(m))
    if hypothesis == "group":
        return ContrastPair(_group_differences(g), np.eye(m))
    return ContrastPair(np.eye(g), orthonormal_contrasts(m))


@dataclass(frozen=True)
class EffectEstimates:
    """Coefficient-level estimates of the two-way functional effects.

    ``treatment_effects`` has shape (m, p), ``group_effects`` (g, p),
    ``interactions`` (m, g, p) and ``residuals`` (n, m, p).
    """

    grand_mean: np.ndarray
    treatment_effects: np.ndarray
    group_effects: np.ndarray
    interactions: np.ndarray
    residuals: np.ndarray = field(repr=False)


def estimate_effects(dataset: RMDataset) -> EffectEstimates:
    """Mean-based estimates, with groups weighted equally in the marginal means."""
    y = dataset.coefficients
    gi = dataset.group_index
    # cell means, shape (m, g, p)
    cell = np.stack([y[gi == j].mean(axis=0) for j in range(dataset.g)], axis=1)
    treat_mean = cell.mean(axis=1)
    group_mean = cell.mean(axis=0)
    grand = cell.mean(axis=(0, 1))
    alpha = treat_mean - grand
    beta = group_mean - grand
    theta = cell - treat_mean[:, None, :] - group_mean[None, :, :] + grand
    resid = y - cell.transpose(1, 0, 2)[gi]
    return EffectEstimates(grand, alpha, beta, theta, resid)
