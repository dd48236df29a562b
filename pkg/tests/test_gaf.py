import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypgaf import gaf
from hypgaf.gaf import (
    EigSpectrum,
    GafParams,
    VarianceRegime,
    coefficient_sq,
    coefficient_sq_prefix,
    eigen_spectrum,
    evaluate,
    expected_zero_count,
    sample_gaf,
    spectrum_bounds_check,
    variance_l1,
    variance_regime,
)


def gamma_form(L, n):
    # direct product L(L+1)...(L+n-1)/n!
    out = 1.0
    for k in range(n):
        out *= (L + k) / (k + 1)
    return out


class TestCoefficients:
    @pytest.mark.parametrize("L", [0.25, 0.5, 1.0, 2.0, 5.0])
    def test_recurrence_matches_product(self, L):
        for n in range(21):
            assert coefficient_sq(L, n) == pytest.approx(gamma_form(L, n), rel=1e-12)

    def test_l1_all_ones(self):
        assert np.all(coefficient_sq_prefix(1.0, 50) == 1.0)

    def test_empty_product(self):
        assert coefficient_sq(3.7, 0) == 1.0

    def test_hand_value(self):
        assert coefficient_sq(2.0, 3) == pytest.approx(4.0, rel=1e-15)

    def test_prefix_matches_scalar(self):
        pre = coefficient_sq_prefix(0.7, 30)
        for n in (0, 1, 7, 30):
            assert pre[n] == pytest.approx(coefficient_sq(0.7, n), rel=1e-14)


class TestParamsValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"L": 0.0, "r": 0.5},
            {"L": -1.0, "r": 0.5},
            {"L": 1.0, "r": 0.0},
            {"L": 1.0, "r": 1.0},
            {"L": 1.0, "r": 0.5, "epsilon_tail": 0.0},
            {"L": 1.0, "r": 0.5, "epsilon_tail": 1.0},
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            GafParams(**kwargs)


class TestSampling:
    def test_determinism(self):
        p = GafParams(L=1.0, r=0.9, epsilon_tail=1e-8)
        s1 = sample_gaf(p, 42)
        s2 = sample_gaf(p, 42)
        assert np.array_equal(s1.coeffs, s2.coeffs)
        assert s1.truncation_degree == s2.truncation_degree

    def test_different_seeds_differ(self):
        p = GafParams(L=1.0, r=0.9, epsilon_tail=1e-8)
        assert not np.array_equal(sample_gaf(p, 1).coeffs, sample_gaf(p, 2).coeffs)

    def test_tail_budget(self):
        p = GafParams(L=0.5, r=0.5, epsilon_tail=1e-8)
        s = sample_gaf(p, 3)
        assert s.tail_sigma2 <= 1e-8 * (1.0 - 0.25) ** -0.5

    def test_tail_bound_dominates_true_tail(self):
        L, r, eps = 2.0, 0.95, 1e-8
        s = sample_gaf(GafParams(L=L, r=r, epsilon_tail=eps), 0)
        N = s.truncation_degree
        n = np.arange(N + 1, N + 6001)
        a2_hi = coefficient_sq_prefix(L, N + 6000)[N + 1 :]
        true_tail = float(np.sum(a2_hi * r ** (2 * n)))
        assert true_tail <= s.tail_sigma2 <= eps * (1.0 - r * r) ** -L

    def test_xi_second_moment_is_one(self):
        rng = gaf._philox(7)
        xi = gaf.standard_complex_gaussians(rng, 10**5)
        mean_sq = float(np.mean(np.abs(xi) ** 2))
        assert abs(mean_sq - 1.0) <= 0.02

    def test_truncation_cap(self):
        with pytest.raises(gaf.ResourceLimitError):
            gaf._truncation(1.0, 0.999999, 1e-300, cap=10**4)


class TestEvaluate:
    def test_at_origin(self):
        s = sample_gaf(GafParams(L=1.0, r=0.9), 5)
        assert evaluate(s, 0.0) == s.coeffs[0]

    def test_linearity(self):
        p = GafParams(L=1.0, r=0.9)
        s1, s2 = sample_gaf(p, 10), sample_gaf(p, 11)
        summed = gaf.GafSample(
            coeffs=s1.coeffs + s2.coeffs,
            truncation_degree=s1.truncation_degree,
            seed=0,
            tail_sigma2=s1.tail_sigma2,
            params=p,
        )
        z = 0.4 + 0.3j
        lhs = evaluate(summed, z)
        rhs = evaluate(s1, z) + evaluate(s2, z)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))

    def test_domain_error(self):
        s = sample_gaf(GafParams(L=1.0, r=0.9), 5)
        with pytest.raises(gaf.EvaluationDomainError):
            evaluate(s, 0.95)

    def test_covariance_and_variance_100k_seeds(self):
        # E[f(z) conj(f(w))] = (1 - z wbar)^-L and E|f(z)|^2 = (1-|z|^2)^-L
        L, z, w = 1.0, 0.5, 0.3
        p = GafParams(L=L, r=0.9, epsilon_tail=1e-8)
        n_seeds = 10**5
        prod_sum = 0.0
        var_sum = 0.0
        zw = np.array([z, w], dtype=np.complex128)
        for lo in range(0, n_seeds, 10**4):
            coeffs = np.array(
                [sample_gaf(p, seed).coeffs for seed in range(lo, lo + 10**4)]
            )
            powers = zw[None, :] ** np.arange(coeffs.shape[1])[:, None]
            vals = coeffs @ powers
            prod_sum += float(np.sum(vals[:, 0] * np.conj(vals[:, 1])).real)
            var_sum += float(np.sum(np.abs(vals[:, 0]) ** 2))
        cov_hat = prod_sum / n_seeds
        target = (1.0 - z * w) ** -L
        # |f(z) f(w)| has second moment bounded by sigma(z)^2 sigma(w)^2 * const
        se = math.sqrt(2.0) * (1 - z * z) ** (-L / 2) * (1 - w * w) ** (-L / 2) / math.sqrt(n_seeds)
        assert abs(cov_hat - target) <= 3.0 * se
        var_hat = var_sum / n_seeds
        sigma2 = (1.0 - z * z) ** -L
        assert abs(var_hat - sigma2) <= 4.0 * sigma2 / math.sqrt(n_seeds)


class TestMomentFormulas:
    def test_expected_zero_count_values(self):
        assert expected_zero_count(1.0, 0.9) == pytest.approx(0.81 / 0.19, rel=1e-15)
        assert expected_zero_count(2.0, 0.5) == pytest.approx(2.0 / 3.0, rel=1e-15)
        assert expected_zero_count(5.0, 1e-9) == pytest.approx(0.0, abs=1e-15)

    def test_variance_l1(self):
        assert variance_l1(0.9) == pytest.approx(0.81 / (1 - 0.9**4), rel=1e-15)
        assert variance_l1(1e-9) == pytest.approx(0.0, abs=1e-15)

    def test_variance_regimes(self):
        assert variance_regime(1.0) == (VarianceRegime.SUPER, 1.0)
        assert variance_regime(0.5) == (VarianceRegime.CRITICAL, 1.0)
        assert variance_regime(0.25) == (VarianceRegime.SUB, 1.5)


class TestEigenSpectrum:
    def test_single_point_geometric_sum(self):
        spec = eigen_spectrum(1.0, 0.7, 1)
        assert spec.lambdas[0] == pytest.approx(1.0 / (1.0 - 0.49), rel=1e-14)

    @pytest.mark.parametrize("L", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("r0", [0.8, 0.95])
    @pytest.mark.parametrize("N", [4, 8, 32])
    def test_trace_identity(self, L, r0, N):
        spec = eigen_spectrum(L, r0, N)
        nmax = 20000
        a2 = coefficient_sq_prefix(L, nmax)
        w = a2 * r0 ** (2 * np.arange(nmax + 1))
        assert spec.lambdas.sum() == pytest.approx(N * w.sum(), rel=1e-12)

    def test_dft_quadratic_form_oracle(self):
        L, r0, N = 1.0, 0.9, 8
        spec = eigen_spectrum(L, r0, N)
        lam_oracle = dft_eigenvalues(L, r0, N)
        assert np.max(np.abs(spec.lambdas - lam_oracle) / lam_oracle) <= 1e-10

    def test_all_nonnegative(self):
        spec = eigen_spectrum(0.5, 0.95, 16)
        assert np.all(spec.lambdas > 0.0)


def dft_eigenvalues(L, r0, N):
    """Quadratic forms of the covariance matrix against discrete-Fourier vectors."""
    nmax = 200
    a2 = coefficient_sq_prefix(L, nmax)
    w = a2 * r0 ** (2 * np.arange(nmax + 1))
    while w[-1] > 1e-22 * w.sum():
        nmax *= 2
        a2 = coefficient_sq_prefix(L, nmax)
        w = a2 * r0 ** (2 * np.arange(nmax + 1))
    n = np.arange(nmax + 1)
    j = np.arange(N)
    sigma = np.zeros((N, N), dtype=np.complex128)
    for a in range(N):
        for b in range(N):
            sigma[a, b] = np.sum(w * np.exp(2j * np.pi * (a - b) * n / N))
    out = np.empty(N)
    for m in range(N):
        v = np.exp(2j * np.pi * j * m / N) / math.sqrt(N)
        out[m] = float((np.conj(v) @ sigma @ v).real)
    return out


class TestSpectrumBounds:
    def test_l1_case(self):
        spec = eigen_spectrum(1.0, 0.9, 8)
        res = spectrum_bounds_check(spec, 1.0 - 0.9)
        assert res.lambda_ok
        assert res.logdet >= res.logdet_lower

    def test_single_point_logdet(self):
        spec = eigen_spectrum(1.0, 0.9, 1)
        res = spectrum_bounds_check(spec, 1.0 - 0.9)
        assert res.logdet == pytest.approx(math.log(1.0 / (1.0 - 0.81)), rel=1e-12)

    def test_l2_wide(self):
        spec = eigen_spectrum(2.0, 0.99, 32)
        res = spectrum_bounds_check(spec, 0.01)
        assert res.lambda_ok
        assert res.logdet >= res.logdet_lower

    def test_delta_consistency_enforced(self):
        spec = eigen_spectrum(1.0, 0.9, 4)
        with pytest.raises(ValueError):
            spectrum_bounds_check(spec, 0.2)

    def test_degenerate_spectrum_rejected(self):
        bad = EigSpectrum(lambdas=np.array([1.0, 0.0]), N=2, r0=0.5, L=1.0)
        with pytest.raises(gaf.DegenerateSpectrumError):
            spectrum_bounds_check(bad, 0.5)


@given(
    st.floats(min_value=0.3, max_value=4.0),
    st.floats(min_value=0.2, max_value=0.97),
    st.integers(min_value=0),
)
@settings(max_examples=60, deadline=None)
def test_sampling_pure_in_seed(L, r, seed):
    p = GafParams(L=L, r=r, epsilon_tail=1e-8)
    assert np.array_equal(sample_gaf(p, seed).coeffs, sample_gaf(p, seed).coeffs)
