"""Exact binomial machinery: bases, moments, profiles, grids."""

import math
from fractions import Fraction

import numpy as np
import pytest

from polyreward.exact import (
    DomainError,
    EstimatorTable,
    Grid,
    bernstein_basis,
    bernstein_matrix,
    bernstein_row,
    bias_profile,
    build_grid,
    expected_value,
    expected_value_exact,
    gradient_weighted_bias,
    second_moment,
)


def table_of(coeffs, beta=1.0, method="minimax"):
    coeffs = np.asarray(coeffs, dtype=float)
    return EstimatorTable(
        K=len(coeffs) - 1, beta=beta, coeffs=coeffs, method=method
    )


class TestBernsteinBasis:
    def test_boundary_values(self):
        assert bernstein_basis(4, 0, 0.0) == 1.0
        assert bernstein_basis(4, 2, 0.0) == 0.0
        assert bernstein_basis(4, 4, 1.0) == 1.0

    def test_binomial_center(self):
        assert bernstein_basis(4, 2, 0.5) == pytest.approx(6 / 16, abs=1e-16)

    def test_pure_power(self):
        # B_{K,K}(p) = p^K; 0.9^16 by repeated squaring as the oracle.
        oracle = 0.9
        for _ in range(4):
            oracle *= oracle
        assert bernstein_basis(16, 16, 0.9) == pytest.approx(oracle, rel=1e-14)

    def test_relative_error_against_exact_rationals(self):
        # Exact binomial pmf via Fractions, K up to 256.
        for K in (8, 64, 256):
            for p_frac in (Fraction(1, 8), Fraction(1, 2), Fraction(7, 8)):
                p = float(p_frac)
                for k in (0, 1, K // 2, K - 1, K):
                    exact = (
                        math.comb(K, k)
                        * Fraction(p)**k
                        * (1 - Fraction(p)) ** (K - k)
                    )
                    got = bernstein_basis(K, k, p)
                    assert got == pytest.approx(float(exact), rel=1e-13)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            bernstein_basis(4, 5, 0.5)
        with pytest.raises(DomainError):
            bernstein_basis(4, 2, 1.5)

    def test_partition_of_unity(self):
        rng = np.random.default_rng(42)
        for K in (1, 2, 3, 7, 33, 100, 256):
            for p in rng.uniform(0.0, 1.0, size=8):
                assert bernstein_row(K, p).sum() == pytest.approx(
                    1.0, abs=1e-12
                )

    def test_matrix_matches_rows(self):
        pts = np.array([0.0, 1e-9, 0.25, 0.5, 1.0 - 1e-9, 1.0])
        B = bernstein_matrix(12, pts)
        for i, p in enumerate(pts):
            np.testing.assert_allclose(B[i], bernstein_row(12, p), rtol=1e-13)


class TestExpectedValue:
    def test_frequency_table_gives_p(self):
        t = table_of(np.arange(9) / 8)
        for p in (0.0, 0.123, 0.5, 0.77, 1.0):
            assert expected_value(t, p) == pytest.approx(p, abs=1e-14)

    def test_top_indicator_gives_power(self):
        t = table_of([0, 0, 0, 0, 1])
        assert expected_value(t, 0.3) == pytest.approx(0.3**4, rel=1e-13)

    def test_constant_table(self):
        t = table_of([7.0] * 6)
        assert expected_value(t, 0.3) == pytest.approx(7.0, abs=1e-12)

    def test_linearity(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            K = int(rng.integers(1, 12))
            c1 = rng.normal(size=K + 1)
            c2 = rng.normal(size=K + 1)
            a, b = rng.normal(size=2)
            p = float(rng.uniform())
            lhs = expected_value(table_of(a * c1 + b * c2), p)
            rhs = a * expected_value(table_of(c1), p) + b * expected_value(
                table_of(c2), p
            )
            assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_exact_rational_oracle_agreement(self):
        rng = np.random.default_rng(3)
        for K in range(1, 13):
            coeffs = rng.normal(size=K + 1)
            t = table_of(coeffs)
            for p in (Fraction(0), Fraction(1, 4), Fraction(1, 2),
                      Fraction(3, 4), Fraction(1)):
                exact = expected_value_exact(
                    [Fraction(c) for c in coeffs], K, p
                )
                assert expected_value(t, float(p)) == pytest.approx(
                    float(exact), abs=1e-13, rel=1e-13
                )

    def test_exact_oracle_refuses_large_K(self):
        with pytest.raises(DomainError):
            expected_value_exact([0] * 14, 13, Fraction(1, 2))


class TestSecondMoment:
    def test_constant_table_has_zero_variance(self):
        t = table_of([3.0, 3.0, 3.0])
        for p in (0.0, 0.4, 1.0):
            s = second_moment(t, p)
            assert s == pytest.approx(9.0, abs=1e-12)

    def test_indicator_brute_force(self):
        # K=2, coeffs (0,0,1), p=0.5: direct enumeration over 3 outcomes.
        t = table_of([0.0, 0.0, 1.0])
        s = second_moment(t, 0.5)
        assert s == pytest.approx(0.25, abs=1e-15)
        var = s - expected_value(t, 0.5) ** 2
        assert var == pytest.approx(0.1875, abs=1e-14)

    def test_frequency_second_moment(self):
        # c_k = k/K, K=4, p=0.5: E[X^2]/16 = (Kpq + (Kp)^2)/16 = 5/16.
        t = table_of(np.arange(5) / 4)
        assert second_moment(t, 0.5) == pytest.approx(5 / 16, abs=1e-14)

    def test_variance_nonnegative(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            K = int(rng.integers(1, 32))
            t = table_of(rng.normal(scale=5.0, size=K + 1))
            p = float(rng.uniform())
            var = second_moment(t, p) - expected_value(t, p) ** 2
            assert var >= -1e-12


class TestGradientWeightedBias:
    def test_zero_table_at_one(self):
        t = table_of([0.0, 0.0, 0.0])
        assert gradient_weighted_bias(t, 1.0) == 0.0

    def test_zero_table_at_inverse_e(self):
        t = table_of([0.0, 0.0, 0.0])
        p = math.exp(-1.0)
        assert gradient_weighted_bias(t, p) == pytest.approx(
            math.exp(-1.0), rel=1e-12
        )

    def test_limit_at_zero(self):
        t = table_of([5.0, -2.0, 3.0])
        assert gradient_weighted_bias(t, 0.0) == 0.0


class TestBiasProfile:
    def test_zero_table_uniform_grid(self):
        t = table_of([0.0] * 3)
        grid = build_grid(2, 11, "uniform")
        prof = bias_profile(t, grid)
        assert prof.sup_bias == pytest.approx(0.4 * abs(math.log(0.4)), rel=1e-12)

    def test_two_point_grid_reads_top_coefficient(self):
        t = table_of([0.3, -0.7, 2.5])
        grid = Grid(np.array([0.0, 1.0]), "uniform")
        prof = bias_profile(t, grid)
        assert prof.sup_bias == pytest.approx(2.5, abs=1e-15)

    def test_unit_interval_coefficients_bound_second_moment(self):
        t = table_of([1.0, 0.75, 0.5, 0.25, 0.0], method="euclid")
        prof = bias_profile(t, build_grid(4, 101, "uniform"))
        assert prof.sup_second_moment <= 1.0 + 1e-12

    def test_sup_matches_stored_points(self):
        t = table_of(np.linspace(-2, 0, 9))
        prof = bias_profile(t, build_grid(8, 257, "boundary"))
        assert prof.sup_bias == pytest.approx(
            np.max(np.abs(prof.weighted_bias))
        )
        assert prof.sup_second_moment == pytest.approx(
            np.max(prof.second_moment)
        )


class TestGrids:
    def test_uniform_11(self):
        g = build_grid(16, 11, "uniform")
        np.testing.assert_allclose(g.points, np.linspace(0, 1, 11))

    def test_boundary_grid_density(self):
        g = build_grid(16, 4096, "boundary")
        assert np.sum(g.points <= 4 / 16) >= 32

    def test_boundary_grid_tail(self):
        g = build_grid(64, 4096, "boundary")
        nonzero = g.points[g.points > 0]
        assert nonzero[0] <= 2.0**-10 / 64

    def test_invariants_enforced(self):
        with pytest.raises(DomainError):
            Grid(np.array([0.0, 0.5, 0.4, 1.0]), "uniform")
        with pytest.raises(DomainError):
            Grid(np.array([0.1, 1.0]), "uniform")
        with pytest.raises(DomainError):
            Grid(np.array([0.0, 1.0]), "boundary", K=None)


class TestJensenGapLaw:
    """Conditional plug-in bias shrinks quadratically once corrected.

    |E[log(X/K) | X>=1] - log p + (1-p)/(2Kp)| at p = 1/2 must fall by
    roughly 4x per doubling of K.
    """

    @staticmethod
    def _error(K: int) -> float:
        p = 0.5
        w = bernstein_row(K, p)
        mass = 1.0 - w[0]
        mean = math.fsum(
            w[x] * math.log(x / K) for x in range(1, K + 1)
        ) / mass
        return abs(mean - math.log(p) + (1 - p) / (2 * K * p))

    def test_quadratic_decay_ratios(self):
        for K in (64, 128, 256):
            ratio = self._error(2 * K) / self._error(K)
            assert 0.15 <= ratio <= 0.35, f"K={K}: ratio {ratio}"
