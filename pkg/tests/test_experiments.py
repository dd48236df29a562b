import math

import numpy as np
import pytest

from hypgaf import exact_l1
from hypgaf.experiments import (
    CertificateFailed,
    TailMethod,
    TiltInfeasible,
    build_certificate,
    deviation_scaling_l1,
    empirical_moments,
    overcrowding_scaling_l1,
    replicate_seed,
    tail_exact_estimate,
    tail_plain_mc,
    tail_tilted_l1,
)
from hypgaf.gaf import expected_zero_count, variance_l1
from hypgaf.zeros import CountConfig, count_winding


class TestSeedStreams:
    def test_deterministic(self):
        assert replicate_seed(5, 17) == replicate_seed(5, 17)

    def test_distinct_across_indices_and_attempts(self):
        seen = {replicate_seed(5, i, a) for i in range(200) for a in range(3)}
        assert len(seen) == 600


class TestEmpiricalMoments:
    def test_l1_mean_and_variance(self):
        res = empirical_moments(1.0, 0.9, 4000, 42)
        mu = expected_zero_count(1.0, 0.9)
        assert abs(res.mean - mu) <= 3.0 * res.stderr_mean
        assert abs(res.variance - variance_l1(0.9)) <= 0.1 * variance_l1(0.9)

    def test_small_half_integer_case(self):
        res = empirical_moments(0.5, 0.5, 1000, 7)
        mu = expected_zero_count(0.5, 0.5)
        assert abs(res.mean - mu) <= 3.0 * res.stderr_mean

    def test_pure_function_of_seed(self):
        assert empirical_moments(1.0, 0.8, 300, 3) == empirical_moments(1.0, 0.8, 300, 3)

    def test_worker_partitioning_is_invisible(self):
        a = empirical_moments(1.0, 0.8, 400, 11, threads=1)
        b = empirical_moments(1.0, 0.8, 400, 11, threads=4)
        assert a == b

    def test_trials_floor(self):
        with pytest.raises(ValueError):
            empirical_moments(1.0, 0.5, 99, 0)


class TestPlainMc:
    def test_v_zero_certain(self):
        est = tail_plain_mc(1.0, 0.8, 0, 1000, 5)
        assert est.p_hat == 1.0
        assert est.method is TailMethod.PLAIN_MC

    def test_within_wilson_of_exact(self):
        est = tail_plain_mc(1.0, 0.9, 10, 20000, 5)
        exact = math.exp(exact_l1.tail_exact(exact_l1.build_model(0.9, 1e-12), 10))
        assert est.ci_low <= exact <= est.ci_high

    def test_far_tail_zero_hits_flagged(self):
        V = round(3 * expected_zero_count(2.0, 0.8))
        est = tail_plain_mc(2.0, 0.8, V, 2000, 6)
        assert est.p_hat <= 0.05
        assert est.ci_high < 0.5
        if est.p_hat == 0.0:
            assert est.flag is not None
            assert est.log_p == -math.inf

    def test_coverage_of_repeated_experiments(self):
        # exact value inside the 95% Wilson interval in >= 93 of 100 runs
        model = exact_l1.build_model(0.5, 1e-12)
        exact = math.exp(exact_l1.tail_exact(model, 2))
        hits = 0
        for rep in range(100):
            est = tail_plain_mc(1.0, 0.5, 2, 1200, 1000 + rep)
            hits += est.ci_low <= exact <= est.ci_high
        assert hits >= 93


class TestTiltedIs:
    def test_near_mean_threshold(self):
        m = exact_l1.build_model(0.9, 1e-12)
        V = math.ceil(m.mean)
        est = tail_tilted_l1(m, V, 4000, 9)
        exact = math.exp(exact_l1.tail_exact(m, V))
        assert 0.2 <= est.p_hat <= 0.8
        assert abs(est.p_hat - exact) <= 3.0 * est.stderr

    def test_deep_threshold_log_accuracy(self):
        m = exact_l1.build_model(0.9, 1e-12)
        est = tail_tilted_l1(m, 25, 20000, 123)
        assert abs(est.log_p - exact_l1.tail_exact(m, 25)) <= 0.05

    def test_small_k_unbiased_over_20_seeds(self):
        m = exact_l1.truncated_model(0.8, 12)
        truth = float(exact_l1.pmf(m).values[7:].sum())
        for seed in range(20):
            est = tail_tilted_l1(m, 7, 3000, seed)
            assert abs(est.p_hat - truth) <= 3.0 * est.stderr

    def test_importance_weights_mean_one(self):
        # the bare likelihood ratio is unbiased for 1 (indicator dropped:
        # that's the V = 0 estimate)
        m = exact_l1.truncated_model(0.8, 12)
        est = tail_tilted_l1(m, 0, 4000, 3)
        assert abs(est.p_hat - 1.0) <= 3.0 * max(est.stderr, 1e-12)

    def test_threshold_beyond_truncation(self):
        m = exact_l1.truncated_model(0.8, 12)
        with pytest.raises(ValueError):
            tail_tilted_l1(m, 13, 100, 0)

    def test_tilt_infeasible(self):
        m = exact_l1.truncated_model(0.8, 12)
        from hypgaf.experiments import _solve_tilt

        with pytest.raises(TiltInfeasible):
            _solve_tilt(m, 1e9, hi=5.0)


class TestExactEstimate:
    def test_packaging(self):
        est = tail_exact_estimate(0.9, 10)
        assert est.method is TailMethod.EXACT_DP
        assert est.replicates == 0
        assert est.ci_low == est.p_hat == est.ci_high
        assert est.log_p == pytest.approx(
            exact_l1.tail_exact(exact_l1.build_model(0.9, 1e-12), 10), abs=1e-12
        )

    def test_threshold_beyond_tv_truncation_still_finite(self):
        est = tail_exact_estimate(0.5, 60)
        assert math.isfinite(est.log_p)
        assert est.log_p < -100.0


class TestDeviationScaling:
    def test_alpha_one_ratios_approach_one(self):
        rows = deviation_scaling_l1(1.0, 1.0, range(4, 9))
        ratios = [row.ratio for row in rows]
        assert all(b < a for a, b in zip(ratios, ratios[1:]))
        assert abs(ratios[-1] - 1.0) < abs(ratios[0] - 1.0)

    def test_alpha_two_thresholds_beyond_tv_truncation(self):
        rows = deviation_scaling_l1(2.0, 1.0, [6])
        (row,) = rows
        assert row.threshold_high > exact_l1.build_model(row.r, 1e-12).K
        assert math.isfinite(row.log_p)
        assert 0.9 < row.ratio < 1.6

    def test_outer_rounding(self):
        rows = deviation_scaling_l1(1.0, 1.0, [5])
        (row,) = rows
        mu = row.r**2 / (1 - row.r**2)
        assert row.threshold_high == math.ceil(mu + row.v1)
        assert row.threshold_low == math.floor(mu - row.v1)

    def test_validation(self):
        with pytest.raises(ValueError):
            deviation_scaling_l1(0.5, 1.0, [4])
        with pytest.raises(ValueError):
            deviation_scaling_l1(1.0, 0.0, [4])


class TestOvercrowdingScaling:
    def test_normalized_column_tight(self):
        rule = lambda r: 2.0 / (1.0 - r) * math.log(1.0 / (1.0 - r))
        rows = overcrowding_scaling_l1([1 - 2.0**-j for j in range(3, 7)], rule)
        norms = [row.normalized for row in rows]
        assert max(norms) / min(norms) <= 8.0

    def test_fixed_r_doubling_v(self):
        # V = 16 sits below the default admissibility floor at r = 0.9, so
        # the floor constant is relaxed for this sweep
        values = iter((16.0, 32.0, 64.0, 128.0))
        rows = overcrowding_scaling_l1(
            [0.9] * 4, lambda r: next(values), rule_constant=0.6
        )
        norms = [row.normalized for row in rows]
        assert max(norms) / min(norms) <= 4.0

    def test_rule_floor_enforced(self):
        with pytest.raises(ValueError):
            overcrowding_scaling_l1([0.9], lambda r: 0.0)


class TestCertificate:
    def test_forces_exact_count(self):
        rep = build_certificate(1.0, 0.97, 200, 2024)
        assert rep.rouche_margin > 0.0
        assert rep.verified_count == rep.m == 200

    def test_recount_on_stored_coefficients(self):
        rep = build_certificate(1.0, 0.96, 120, 7)
        assert rep.verified_count == 120
        # an independent recount of the reported vector agrees
        from hypgaf.gaf import GafParams, GafSample

        sample = GafSample(
            coeffs=rep.coeffs,
            truncation_degree=len(rep.coeffs) - 1,
            seed=7,
            tail_sigma2=1e-28,
            params=GafParams(L=1.0, r=0.98),
        )
        assert count_winding(sample, CountConfig(r=0.96, initial_nodes=4096)).count == 120

    def test_below_admissible_regime(self):
        with pytest.raises(CertificateFailed):
            build_certificate(1.0, 0.9, 2, 1)

    def test_small_radius_rejected(self):
        with pytest.raises(CertificateFailed):
            build_certificate(1.0, 0.4, 100, 1)

    def test_deterministic(self):
        a = build_certificate(0.5, 0.96, 100, 5)
        b = build_certificate(0.5, 0.96, 100, 5)
        assert np.array_equal(a.coeffs, b.coeffs)
        assert a.rouche_margin == b.rouche_margin
