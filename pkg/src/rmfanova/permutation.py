"""Permutation tests for repeated-measures FANOVA.

Each replicate shuffles the treatment order within every subject and, with
several groups, pools the subjects and redraws groups of the original sizes
without replacement.  Replicate ``f`` draws from its own random substream,
derived from the master seed and ``f``, so results do not depend on how the
replicates are scheduled.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .design import RMDataset, build_design_matrix, contrast_for
from .dmm import dmm_sscp
from .errors import InvalidConfigurationError
from .manova import STATISTIC_KINDS, SSCPPair, StatisticValue, sscp_eigenvalues
from .mmm import mmm_sscp
from .report import TestReport

__all__ = [
    "PermutationConfig",
    "permutation_pvalue",
    "permutation_test",
    "permute_dataset",
    "replicate_rng",
]


@dataclass(frozen=True)
class PermutationConfig:
    """Settings of a permutation test.

    ``corrected`` switches the p-value to ``(1 + count) / (1 + F)``.
    """

    replicates: int = 999
    seed: int = 0
    statistic_kind: str = "P"
    engine: str = "MMM"
    corrected: bool = False
    n_jobs: int = 1

    def __post_init__(self):
        if self.replicates < 1:
            raise InvalidConfigurationError(f"replicates must be >= 1, got {self.replicates}")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfigurationError("seed must be a 64-bit unsigned integer")
        if self.statistic_kind not in STATISTIC_KINDS:
            raise InvalidConfigurationError(f"unknown statistic {self.statistic_kind!r}")
        if self.engine not in ("DMM", "MMM"):
            raise InvalidConfigurationError(f"engine must be DMM or MMM, got {self.engine!r}")


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for replicate `index` under master `seed`."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def permute_coefficients(y: np.ndarray, rng: np.random.Generator, pool_groups: bool) -> np.ndarray:
    n, m, _ = y.shape
    order = np.argsort(rng.random((n, m)), axis=1)
    out = y[np.arange(n)[:, None], order]
    if pool_groups:
        out = out[rng.permutation(n)]
    return out


def permute_dataset(dataset: RMDataset, rng: np.random.Generator) -> RMDataset:
    """One random relabelling of `dataset`.

    Treatment blocks are shuffled within each subject first; then, when there
    is more than one group, the subjects are pooled and reassigned to groups
    with the original sizes.
    """
    y = permute_coefficients(dataset.coefficients, rng, dataset.g > 1)
    return dataset.with_coefficients(y)


def permutation_pvalue(kind: str, s0: float, samples, corrected: bool = False) -> float:
    """Proportion of permuted statistics at least as extreme as `s0`.

    Small values are extreme for Wilks (``W``); large values for the others.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise InvalidConfigurationError("no permutation samples")
    if kind == "W":
        count = int(np.sum(samples <= s0))
    elif kind in ("LH", "P", "R"):
        count = int(np.sum(samples >= s0))
    else:
        raise InvalidConfigurationError(f"unknown statistic kind {kind!r}")
    if corrected:
        return (1 + count) / (1 + samples.size)
    return count / samples.size


def _four_statistics(lam: np.ndarray) -> np.ndarray:
    return np.array([np.prod(1.0 / (1.0 + lam)), lam.sum(),
                     np.sum(lam / (1.0 + lam)), lam[0] if lam.size else 0.0])


class _Engine:
    # Captures everything that stays fixed across replicates.
    def __init__(self, dataset: RMDataset, hypothesis: str, engine: str):
        self.contrasts = contrast_for(hypothesis, dataset.g, dataset.m)
        self.x = build_design_matrix(dataset)
        self.engine = engine
        self.shape = dataset.coefficients.shape
        self.pool = dataset.g > 1

    def sscp(self, y: np.ndarray) -> SSCPPair:
        n, m, p = y.shape
        if self.engine == "DMM":
            return dmm_sscp(y.reshape(n, m * p), self.x, self.contrasts)
        return mmm_sscp(y.reshape(n * m, p), self.x, self.contrasts)

    def statistics(self, y: np.ndarray) -> np.ndarray:
        return _four_statistics(sscp_eigenvalues(self.sscp(y)))


def _run_chunk(args):
    engine, y, seed, indices = args
    out = np.empty((len(indices), len(STATISTIC_KINDS)))
    for row, f in enumerate(indices):
        yp = permute_coefficients(y, replicate_rng(seed, f), engine.pool)
        out[row] = engine.statistics(yp)
    return indices, out


def permutation_samples(dataset: RMDataset, hypothesis: str, config: PermutationConfig
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Observed statistics (W, LH, P, R) and the ``(F, 4)`` permuted ones."""
    engine = _Engine(dataset, hypothesis, config.engine)
    y = dataset.coefficients
    s0 = engine.statistics(y)
    samples = np.empty((config.replicates, len(STATISTIC_KINDS)))
    idx = np.arange(config.replicates)
    if config.n_jobs > 1 and config.replicates > 1:
        chunks = np.array_split(idx, config.n_jobs)
        with ProcessPoolExecutor(max_workers=config.n_jobs) as pool:
            for ids, vals in pool.map(_run_chunk, [(engine, y, config.seed, c) for c in chunks]):
                samples[ids] = vals
    else:
        ids, vals = _run_chunk((engine, y, config.seed, idx))
        samples[ids] = vals
    return s0, samples


def permutation_test(dataset: RMDataset, hypothesis: str,
                     config: PermutationConfig = PermutationConfig()) -> TestReport:
    """Permutation p-values for all four statistics.

    The statistic named in ``config.statistic_kind`` is listed first.
    """
    s0, samples = permutation_samples(dataset, hypothesis, config)
    values = []
    for col, kind in enumerate(STATISTIC_KINDS):
        pval = permutation_pvalue(kind, s0[col], samples[:, col], config.corrected)
        values.append(StatisticValue(kind, float(s0[col]), float("nan"), float("nan"),
                                     float("nan"), float(pval)))
    values.sort(key=lambda v: v.kind != config.statistic_kind)
    engine = _Engine(dataset, hypothesis, config.engine)
    c = engine.contrasts
    dims = {"n": dataset.n, "g": dataset.g, "m": dataset.m, "p": dataset.p, "s": c.s, "q": c.q}
    rule = "(1+count)/(1+F)" if config.corrected else "count/F"
    notes = [f"engine={config.engine}, F={config.replicates}, seed={config.seed}, "
             f"primary statistic={config.statistic_kind}, p-value rule {rule}"]
    return TestReport(hypothesis, "permutation", values, dims, notes)
