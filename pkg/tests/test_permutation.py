import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_dataset
from rmfanova.design import RMDataset
from rmfanova.errors import DimensionError, InvalidConfigurationError
from rmfanova.permutation import (PermutationConfig, permutation_pvalue, permutation_samples,
                                  permutation_test, permute_dataset, replicate_rng)


class TestPermuteDataset:
    def test_nothing_to_permute(self, rng):
        ds = random_dataset(rng, (5,), 1, 3)
        out = permute_dataset(ds, replicate_rng(0, 0))
        assert np.array_equal(out.coefficients, ds.coefficients)

    def test_swap_frequency(self):
        ds = RMDataset(np.array([[[1.0], [2.0]]]), (1,))
        swaps = sum(permute_dataset(ds, replicate_rng(3, f)).coefficients[0, 0, 0] == 2.0
                    for f in range(10000))
        assert abs(swaps / 10000 - 0.5) <= 0.02

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32))
    def test_sizes_and_blocks_preserved(self, seed):
        base = np.arange(5 * 3 * 2, dtype=float).reshape(5, 3, 2)
        ds = RMDataset(base, (2, 3))
        out = permute_dataset(ds, replicate_rng(seed, 0))
        assert out.group_sizes == (2, 3)
        # every permuted subject is one original subject with its treatments reordered
        used = []
        for row in out.coefficients:
            k = int(row.min() // 6)
            used.append(k)
            assert sorted(map(tuple, row)) == sorted(map(tuple, base[k]))
        assert sorted(used) == list(range(5))


class TestPValueRule:
    def test_wilks_half(self):
        assert permutation_pvalue("W", 0.75, [0.9, 0.8, 0.7, 0.6]) == 0.5

    def test_boundary_counts_ties(self):
        samples = [0.1, 0.3, 0.2, 0.3]
        assert permutation_pvalue("P", 0.3, samples) == 0.5
        assert permutation_pvalue("P", max(samples), samples) >= 1 / 4

    def test_wilks_below_everything(self):
        assert permutation_pvalue("W", 0.01, [0.2, 0.5, 0.9]) == 0.0

    @pytest.mark.parametrize("kind", ["LH", "P", "R"])
    def test_large_is_extreme(self, kind):
        assert permutation_pvalue(kind, 2.0, [1.0, 2.0, 3.0, 0.5, 4.0]) == 3 / 5

    def test_corrected_rule(self):
        assert permutation_pvalue("W", 0.01, [0.2, 0.5, 0.9], corrected=True) == 0.25

    def test_empty(self):
        with pytest.raises(InvalidConfigurationError):
            permutation_pvalue("W", 0.5, [])


class TestPermutationTest:
    def test_deterministic(self, rng):
        ds = random_dataset(rng, (6, 6), 3, 2)
        cfg = PermutationConfig(199, seed=42)
        a = permutation_test(ds, "interaction", cfg)
        b = permutation_test(ds, "interaction", cfg)
        assert a.to_json() == b.to_json()
        assert a.statistics[0].kind == "P"

    def test_parallel_matches_serial(self, rng):
        ds = random_dataset(rng, (5, 6), 2, 2)
        _, serial = permutation_samples(ds, "group", PermutationConfig(60, seed=9))
        _, parallel = permutation_samples(ds, "group", PermutationConfig(60, seed=9, n_jobs=2))
        assert np.array_equal(serial, parallel)

    def test_engine_dimension_gate(self, rng):
        ds = random_dataset(rng, (8,), 3, 4)
        with pytest.raises(DimensionError):
            permutation_test(ds, "treatment", PermutationConfig(10, engine="DMM"))

    def test_strong_treatment_effect_human_activity_shape(self):
        rng = np.random.default_rng(4)
        y = rng.standard_normal((29, 3, 27)) + 0.6 * rng.standard_normal((29, 1, 27))
        # smooth bump of 1.5 noise SDs on the first treatment
        y[:, 0] += 1.5 * np.exp(-0.5 * ((np.arange(27) - 8) / 3) ** 2)
        rep = permutation_test(RMDataset(y, (29,)), "treatment", PermutationConfig(999, seed=1))
        assert rep.p_value("P") <= 0.005

    def test_single_treatment_reduces_to_group_permutation(self):
        # m = 1: only group labels move, so compare with full enumeration of the splits
        y = np.array([0.3, 1.1, 0.9, 2.0, 2.6, 1.7])
        ds = RMDataset(y[:, None, None], (3, 3))

        def f_stat(a, b):
            pooled = np.concatenate([a, b])
            ssh = 3 * ((a.mean() - pooled.mean()) ** 2 + (b.mean() - pooled.mean()) ** 2)
            sse = ((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()
            return ssh / sse

        f0 = f_stat(y[:3], y[3:])
        splits = list(itertools.combinations(range(6), 3))
        exact = np.mean([f_stat(y[list(s)], np.delete(y, list(s))) >= f0 - 1e-12 for s in splits])
        rep = permutation_test(ds, "group", PermutationConfig(4000, seed=5, statistic_kind="LH"))
        assert abs(rep.p_value("LH") - exact) <= 0.02

    @pytest.mark.slow
    def test_nested_calibration(self):
        rng = np.random.default_rng(8)
        rejected = 0
        for r in range(200):
            ds = random_dataset(rng, (6, 6), 3, 2)
            rep = permutation_test(ds, "interaction", PermutationConfig(199, seed=r))
            rejected += rep.p_value("P") < 0.05
        assert 0.02 <= rejected / 200 <= 0.09


class TestConfig:
    @pytest.mark.parametrize("kwargs", [{"replicates": 0}, {"seed": -1}, {"statistic_kind": "T"},
                                        {"engine": "OLS"}])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidConfigurationError):
            PermutationConfig(**kwargs)
