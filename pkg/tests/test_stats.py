import math

import numpy as np
import pytest
from scipy import stats as sps

from pnsim.errors import InvalidParameterError
from pnsim.stats import binomial_z, chi_square_gof, two_sided_alpha, two_sided_critical_z


class TestBinomialZ:
    def test_simple_value(self):
        assert binomial_z(600, 1000, 0.5) == pytest.approx(6.324555320336759)

    def test_zero_at_expectation(self):
        assert binomial_z(250, 1000, 0.25) == 0.0

    def test_sign(self):
        assert binomial_z(10, 1000, 0.05) < 0.0

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1])
    def test_degenerate_rate_rejected(self, p):
        with pytest.raises(InvalidParameterError):
            binomial_z(5, 10, p)

    def test_count_out_of_range_rejected(self):
        with pytest.raises(InvalidParameterError):
            binomial_z(11, 10, 0.5)
        with pytest.raises(InvalidParameterError):
            binomial_z(0, 0, 0.5)


class TestChiSquareGof:
    def test_matches_scipy_without_pooling(self):
        observed = [210, 190, 205, 195, 200]
        probs = [0.2] * 5
        got = chi_square_gof(observed, probs)
        want = sps.chisquare(observed, [200] * 5)
        assert got.statistic == pytest.approx(want.statistic, rel=1e-12)
        assert got.pvalue == pytest.approx(want.pvalue, rel=1e-12)
        assert got.dof == 4
        assert got.bins == 5

    def test_uniform_fit_accepts(self):
        got = chi_square_gof([100, 98, 102, 100], [0.25] * 4)
        assert got.pvalue > 0.9

    def test_shifted_distribution_rejects(self):
        got = chi_square_gof([400, 100], [0.25, 0.75])
        assert got.pvalue < 1e-6

    def test_sparse_tail_pooled(self):
        observed = [950, 40, 8, 1, 1, 0]
        probs = [0.95, 0.04, 0.008, 0.0015, 0.0004, 0.0001]
        got = chi_square_gof(observed, probs)
        # 1000 * probs puts the last three bins below 5 expected counts.
        assert got.bins == 3
        assert got.dof == 2

    def test_residual_probability_goes_to_last_bin(self):
        # The missing 0.05 of probability tops up the final bin, which
        # here makes the fit exact again.
        got = chi_square_gof([500, 400, 100], [0.5, 0.4, 0.05])
        assert got.statistic == pytest.approx(0.0, abs=1e-20)
        skewed = chi_square_gof([500, 400, 100], [0.5, 0.45, 0.02])
        assert skewed.statistic > 1.0

    def test_everything_pooled_is_inconclusive(self):
        got = chi_square_gof([2, 1], [0.5, 0.5])
        assert got.dof == 0
        assert got.pvalue == 1.0

    def test_shape_mismatch_rejected(self):
        with pytest.raises(InvalidParameterError):
            chi_square_gof([1, 2, 3], [0.5, 0.5])

    def test_negative_counts_rejected(self):
        with pytest.raises(InvalidParameterError):
            chi_square_gof([-1, 2], [0.5, 0.5])


class TestNormalTails:
    def test_alpha_of_z4(self):
        assert two_sided_alpha(4.0) == pytest.approx(6.334248366623996e-05, rel=1e-9)

    def test_round_trip(self):
        for z in (1.0, 2.5, 4.0):
            assert two_sided_critical_z(two_sided_alpha(z)) == pytest.approx(z)

    def test_bad_alpha_rejected(self):
        with pytest.raises(InvalidParameterError):
            two_sided_critical_z(0.0)
