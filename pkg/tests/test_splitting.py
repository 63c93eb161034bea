"""Sample splitting and Taylor uniform-failure analysis."""

import math

import numpy as np
import pytest

from polyreward.estimators import taylor_bt_table
from polyreward.exact import DomainError, EstimatorTable, bernstein_row
from polyreward.splitting import (
    optimal_gamma,
    rao_blackwell_table,
    split_estimator_stats,
    taylor_uniform_failure,
)


def frequency_table(K):
    return EstimatorTable(
        K=K, beta=1.0, coeffs=np.arange(K + 1) / K, method="u_statistic"
    )


class TestOptimalGamma:
    def test_identity_table_closed_form(self):
        # Cov(p1_hat, delta)/Var(delta) = (1/K1)/(1/K1 + 1/K2) = K2/K.
        for K1, K2 in ((32, 32), (16, 48), (8, 8)):
            got = optimal_gamma(K1, K2, 0.37, frequency_table(K1))
            assert got == pytest.approx(K2 / (K1 + K2), abs=1e-10)

    def test_constant_table_gives_zero(self):
        const = EstimatorTable(
            K=16, beta=1.0, coeffs=np.full(17, 2.5), method="u_statistic"
        )
        assert optimal_gamma(16, 16, 0.4, const) == pytest.approx(0.0, abs=1e-12)

    def test_taylor_midpoint_near_leading_order(self):
        # Leading order beta*K2/(p*K) = 1 at the symmetric split, p = 1/2.
        gamma = optimal_gamma(32, 32, 0.5, taylor_bt_table(32, 1.0))
        assert gamma == pytest.approx(1.0, rel=0.15)

    def test_degenerate_p_rejected(self):
        with pytest.raises(DomainError):
            optimal_gamma(8, 8, 0.0, frequency_table(8))


class TestSplitStats:
    def test_variance_neutrality_band(self):
        for p in (0.1, 0.3, 0.5):
            rep = split_estimator_stats(64, 32, p)
            assert 0.9 <= rep.var_split / rep.var_full <= 1.1, (p, rep)

    def test_bias_inflation_where_asymptotics_hold(self):
        # The half-group pays the squared-rate constant: about 4x. Valid
        # outside the boundary layer p ~ 1/K1.
        for p in (0.3, 0.5):
            rep = split_estimator_stats(64, 32, p)
            assert 3.0 <= rep.bias_split / rep.bias_full <= 5.0, (p, rep)

    def test_boundary_layer_breaks_the_constant(self):
        # p*K1 = 3.2 sits in the boundary layer; the 4x law does not
        # describe the exact ratio there.  Regression-pinned.
        rep = split_estimator_stats(64, 32, 0.1)
        assert rep.bias_split / rep.bias_full > 5.0

    def test_gamma_zero_reduces_to_base_variance(self):
        base = taylor_bt_table(32, 1.0)
        rep = split_estimator_stats(64, 32, 0.3, gamma=0.0)
        w = bernstein_row(32, 0.3)
        mean = float(w @ base.coeffs)
        var = float(w @ base.coeffs**2) - mean * mean
        assert rep.var_split == pytest.approx(var, rel=1e-12)

    def test_monte_carlo_agreement(self):
        # 1e6 samples reproduce every exact moment within 4 standard errors.
        rng = np.random.default_rng(123)
        n = 1_000_000
        for p in (0.1, 0.3, 0.5):
            rep = split_estimator_stats(64, 32, p)
            base = taylor_bt_table(32, 1.0)
            x1 = rng.binomial(32, p, size=n)
            x2 = rng.binomial(32, p, size=n)
            vals = base.coeffs[x1] - rep.gamma * (x1 / 32 - x2 / 32)
            mc_mean = vals.mean()
            mc_var = vals.var()
            se_mean = vals.std() / math.sqrt(n)
            exact_mean = (rep.bias_split + p * math.log(p)) / p
            assert abs(mc_mean - exact_mean) <= 4 * se_mean
            se_var = np.abs(
                ((vals - mc_mean) ** 2).std()
            ) / math.sqrt(n)
            assert abs(mc_var - rep.var_split) <= 4 * se_var

    def test_invalid_partition(self):
        with pytest.raises(DomainError):
            split_estimator_stats(64, 64, 0.3)


class TestRaoBlackwell:
    def test_variance_reduction_and_mean_preservation(self):
        gamma = 1.0
        rb = rao_blackwell_table(64, 32, gamma=gamma)
        for p in (0.1, 0.3, 0.5):
            rep = split_estimator_stats(64, 32, p, gamma=gamma)
            w = bernstein_row(64, p)
            mean_rb = float(w @ rb.coeffs)
            var_rb = float(w @ rb.coeffs**2) - mean_rb**2
            split_mean = (rep.bias_split + p * math.log(p)) / p
            assert mean_rb == pytest.approx(split_mean, abs=1e-12)
            assert var_rb <= rep.var_split + 1e-12

    def test_origin_metadata(self):
        rb = rao_blackwell_table(16, 8)
        assert rb.meta["origin"] == "rao_blackwell"


class TestTaylorUniformFailure:
    def test_linear_rate_ratios(self):
        rows = taylor_uniform_failure([16, 32, 64, 128])
        for row in rows[1:]:
            assert 0.35 <= row["ratio_to_prev"] <= 0.65, row

    def test_sup_times_K_bounded_band(self):
        rows = taylor_uniform_failure([16, 32, 64, 128])
        vals = [row["sup_bias_times_K"] for row in rows]
        assert max(vals) / min(vals) <= 3.0

    def test_worst_point_in_boundary_layer(self):
        rows = taylor_uniform_failure([16, 32, 64, 128])
        for row in rows:
            assert 0 < row["worst_p"] <= 8.0 / row["K"], row

    def test_pointwise_midpoint_bounded(self):
        rows = taylor_uniform_failure([16, 32, 64, 128])
        vals = [row["pointwise_bias_half_times_K2"] for row in rows]
        assert max(vals) / min(vals) <= 4.0

    def test_unsorted_rejected(self):
        with pytest.raises(DomainError):
            taylor_uniform_failure([32, 16])
