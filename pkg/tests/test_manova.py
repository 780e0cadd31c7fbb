import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from rmfanova.errors import InvalidConfigurationError, SingularErrorMatrixError
from rmfanova.manova import SSCPPair, f_sf, manova_statistics, wilks_pvalue


def as_dict(values):
    return {v.kind: v for v in values}


def random_pair(rng, d, df_h, df_e):
    zh = rng.standard_normal((df_h, d))
    ze = rng.standard_normal((df_e, d)) @ rng.standard_normal((d, d))
    return SSCPPair(zh.T @ zh, ze.T @ ze, df_h, df_e)


def eig_forms(pair):
    # independent route: eigenvalues of the nonsymmetric product
    lam = np.sort(np.real(np.linalg.eigvals(pair.S_h @ np.linalg.inv(pair.S_e))))[::-1]
    lam = np.clip(lam, 0, None)
    return {"W": np.prod(1 / (1 + lam)), "LH": lam.sum(), "P": np.sum(lam / (1 + lam)),
            "R": lam[0]}


class TestStatistics:
    def test_null_hypothesis_matrix(self):
        vals = as_dict(manova_statistics(SSCPPair(np.zeros((3, 3)), np.eye(3), 2, 20)))
        assert vals["W"].value == 1.0
        assert vals["P"].value == vals["LH"].value == vals["R"].value == 0.0
        for v in vals.values():
            assert v.p_value == 1.0

    def test_scalar_case(self):
        vals = as_dict(manova_statistics(SSCPPair([[3.0]], [[2.0]], 1, 10)))
        assert vals["W"].value == pytest.approx(2 / 5, abs=1e-14)
        assert vals["LH"].value == pytest.approx(1.5, abs=1e-14)
        assert vals["R"].value == pytest.approx(1.5, abs=1e-14)
        assert vals["P"].value == pytest.approx(3 / 5, abs=1e-14)

    def test_identity_case(self):
        vals = as_dict(manova_statistics(SSCPPair(np.eye(2), np.eye(2), 3, 20)))
        assert vals["W"].value == pytest.approx(0.25, abs=1e-14)
        assert vals["P"].value == pytest.approx(1.0, abs=1e-14)
        assert vals["LH"].value == pytest.approx(2.0, abs=1e-14)
        assert vals["R"].value == pytest.approx(1.0, abs=1e-14)

    def test_roy_flagged_as_bound(self):
        vals = as_dict(manova_statistics(SSCPPair(np.eye(2), 3 * np.eye(2), 3, 20)))
        assert vals["R"].p_value_is_bound
        assert not vals["W"].p_value_is_bound

    def test_singular_error_matrix(self):
        with pytest.raises(SingularErrorMatrixError):
            manova_statistics(SSCPPair(np.eye(2), [[1.0, 1.0], [1.0, 1.0]], 1, 5))
        with pytest.raises(SingularErrorMatrixError):
            manova_statistics(SSCPPair(np.zeros((2, 2)), np.zeros((2, 2)), 1, 5))

    def test_eigenvalue_forms(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            d = int(rng.integers(1, 7))
            pair = random_pair(rng, d, int(rng.integers(1, 6)), int(rng.integers(d + 2, 40)))
            ref = eig_forms(pair)
            for v in manova_statistics(pair):
                assert v.value == pytest.approx(ref[v.kind], rel=1e-8, abs=1e-10)

    def test_pillai_f_matches_known_form(self):
        # s = 1 case: all four F statistics coincide and are exact
        rng = np.random.default_rng(2)
        pair = random_pair(rng, 3, 1, 25)
        vals = as_dict(manova_statistics(pair))
        fs = [vals[k].f_stat for k in ("W", "LH", "P", "R")]
        np.testing.assert_allclose(fs, fs[0], rtol=1e-10)
        assert vals["W"].df1 == 3 and vals["W"].df2 == 23


class TestInvariances:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 5), st.integers(1, 4), st.integers(0, 2**31),
           st.floats(1e-3, 1e3))
    def test_scale_invariance(self, d, df_h, seed, c):
        rng = np.random.default_rng(seed)
        pair = random_pair(rng, d, df_h, d + 15)
        a = manova_statistics(pair)
        b = manova_statistics(pair.scaled(c))
        for u, v in zip(a, b):
            assert v.value == pytest.approx(u.value, rel=1e-10, abs=1e-10)
            assert v.p_value == pytest.approx(u.p_value, rel=1e-8, abs=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 5), st.integers(0, 2**31))
    def test_inflating_hypothesis_matrix(self, d, seed):
        rng = np.random.default_rng(seed)
        pair = random_pair(rng, d, 3, d + 12)
        v = rng.standard_normal(d)
        bigger = SSCPPair(pair.S_h + np.outer(v, v), pair.S_e, 3, d + 12)
        a, b = as_dict(manova_statistics(pair)), as_dict(manova_statistics(bigger))
        assert b["W"].value <= a["W"].value + 1e-12
        for k in ("P", "LH", "R"):
            assert b[k].value >= a[k].value - 1e-12


class TestPValues:
    def test_f_sf_matches_scipy(self):
        for f, d1, d2 in [(0.5, 3, 20), (2.3, 1, 5), (10.0, 14.5, 80.2), (1e-3, 7, 7)]:
            assert f_sf(f, d1, d2) == pytest.approx(stats.f.sf(f, d1, d2), rel=1e-10)

    def test_no_effect(self):
        assert wilks_pvalue(1.0, 3, 2, 30) == 1.0

    @pytest.mark.parametrize("w,df_h,df_e", [(0.4, 1, 10), (0.8, 3, 25), (0.95, 5, 100)])
    def test_scalar_reduction(self, w, df_h, df_e):
        f = (1 - w) / w * df_e / df_h
        assert wilks_pvalue(w, 1, df_h, df_e) == pytest.approx(stats.f.sf(f, df_h, df_e), rel=1e-10)

    def test_invalid_df(self):
        with pytest.raises(InvalidConfigurationError):
            wilks_pvalue(0.5, 3, 0, 30)
        with pytest.raises(InvalidConfigurationError):
            wilks_pvalue(0.0, 3, 2, 30)

    def test_monte_carlo_calibration(self):
        # d=3, df_h=2: Rao's transformation is exact
        rng = np.random.default_rng(2024)
        rejections = 0
        draws = 2000
        for _ in range(draws):
            zh = rng.standard_normal((2, 3))
            ze = rng.standard_normal((30, 3))
            sh, se = zh.T @ zh, ze.T @ ze
            w = np.linalg.det(se) / np.linalg.det(se + sh)
            rejections += wilks_pvalue(w, 3, 2, 30) < 0.05
        assert abs(rejections / draws - 0.05) <= 0.02
