"""Minimax synthesis: LP value, exchange oracle, table certification."""

import warnings

import numpy as np
import pytest

from polyreward.estimators import plugin_log_table, taylor_bt_table
from polyreward.exact import DomainError, bias_profile, build_grid
from polyreward.minimax import (
    certification_grid,
    check_equioscillation,
    remez_epsilon,
    scaling_study,
    solve_minimax,
    _chebyshev_rows,
    _weighted_rows,
)

#: Repository golden values of the LP optimum (boundary grid, M = 4096).
GOLDEN_EPS_LP = {
    1: 7.7201973e-02,
    2: 3.5236536e-02,
    4: 1.2882066e-02,
    8: 4.0015758e-03,
    16: 1.1239284e-03,
}


class TestLpValue:
    def test_golden_values(self, minimax_cache):
        for K, golden in GOLDEN_EPS_LP.items():
            assert minimax_cache(K).epsilon_lp == pytest.approx(
                golden, rel=1e-6
            )

    def test_chebyshev_and_bernstein_rows_span_same_space(self):
        # Identical LP data up to a basis change: residuals of a random
        # function on both row sets must match after least squares.
        rng = np.random.default_rng(3)
        grid = build_grid(6, 200, "boundary")
        _, A_b, t = _weighted_rows(6, grid.points)
        _, A_c, t_c = _chebyshev_rows(6, grid.points)
        np.testing.assert_allclose(t, t_c)
        y = rng.normal(size=len(t))
        r_b = y - A_b @ np.linalg.lstsq(A_b, y, rcond=None)[0]
        r_c = y - A_c @ np.linalg.lstsq(A_c, y, rcond=None)[0]
        np.testing.assert_allclose(r_b, r_c, atol=1e-8)


class TestOracleAgreement:
    def test_exchange_matches_lp(self, minimax_cache):
        for K in (1, 4, 8, 16):
            _, eps_oracle = remez_epsilon(K)
            eps_lp = minimax_cache(K).epsilon_lp
            assert abs(eps_oracle - eps_lp) / eps_lp < 1e-2

    def test_exchange_K1_three_parameter_problem(self):
        # Weighted fit of p log p by p(c0(1-p) + c1 p): the oracle resolves
        # the 3-parameter equioscillation on its own.
        coeffs, eps = remez_epsilon(1)
        assert eps == pytest.approx(GOLDEN_EPS_LP[1], rel=1e-6)
        grid = build_grid(1, 4096, "boundary")
        _, A, t = _weighted_rows(1, grid.points)
        assert np.max(np.abs(A @ coeffs - t)) == pytest.approx(eps, rel=1e-12)


class TestTableSynthesis:
    def test_feasibility_on_grid(self, minimax_cache):
        for K in (4, 16):
            res = minimax_cache(K)
            grid = build_grid(K, 4096, "boundary")
            prof = bias_profile(res.table, grid)
            assert prof.sup_bias <= res.epsilon * (1 + 1e-9)

    def test_certification_band(self, minimax_cache):
        for K in (8, 16, 32):
            res = minimax_cache(K)
            assert res.epsilon_certified <= 1.05 * res.epsilon
            assert res.epsilon_certified >= res.epsilon * (1 - 1e-9)

    def test_budget_multiple_recorded(self, minimax_cache):
        res = minimax_cache(16)
        assert res.table.meta["budget_multiple"] == pytest.approx(2.0)
        assert res.epsilon == pytest.approx(2.0 * res.epsilon_lp, rel=1e-6)

    def test_moderate_coefficients(self, minimax_cache):
        # The shipped table must be game-safe: values on the log scale.
        table = minimax_cache(16).table
        assert np.max(np.abs(table.coeffs)) < 12.0
        assert table.meta["second_moment"] < 50.0

    def test_dominates_closed_forms(self, minimax_cache):
        for K in (4, 8, 16, 32):
            res = minimax_cache(K)
            grid = certification_grid(K, 20_000)
            c0 = float(res.table.coeffs[0])
            competitors = [taylor_bt_table(K, 1.0, c0)]
            competitors += [
                plugin_log_table(K, 1.0, alpha, 2)
                for alpha in (0.25, 0.5, 1.0)
            ]
            for comp in competitors:
                sup = bias_profile(comp, grid).sup_bias
                assert res.epsilon_lp <= sup, (K, comp.method, comp.meta)

    def test_determinism(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            first = solve_minimax(4)
            second = solve_minimax(4)
        assert list(first.table.coeffs) == list(second.table.coeffs)
        assert first.epsilon_lp == second.epsilon_lp

    def test_equioscillation_count_of_lp_optimum(self, minimax_cache):
        # The LP error curve alternates at K+2 or more grid points.
        K = 8
        grid = build_grid(K, 4096, "boundary")
        pts, A, t = _chebyshev_rows(K, grid.points)
        from polyreward.minimax import _lp_epsilon

        eps, sol = _lp_epsilon(A, t, pts, 1e-9)
        err = A @ (-sol.duals[:-1]) - t
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            count = check_equioscillation(err, eps, K)
        assert count >= K + 2


class TestScalingStudy:
    def test_doubling_ratios(self, minimax_cache):
        eps = {K: minimax_cache(K).epsilon_lp for K in (8, 16, 32, 64)}
        for K in (8, 16, 32):
            ratio = eps[2 * K] / eps[K]
            assert 0.18 <= ratio <= 0.35, (K, ratio)

    def test_report_rows(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rows = scaling_study([2, 4])
        assert rows[0]["ratio_to_prev"] is None
        assert rows[1]["ratio_to_prev"] == pytest.approx(
            rows[1]["epsilon"] / rows[0]["epsilon"]
        )

    def test_single_K(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rows = scaling_study([4])
        assert len(rows) == 1 and rows[0]["ratio_to_prev"] is None

    def test_empty_list(self):
        assert scaling_study([]) == []

    def test_unsorted_rejected(self):
        with pytest.raises(DomainError):
            scaling_study([16, 8])
