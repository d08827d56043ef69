"""Exactly solvable lattice chain: transition rules, certified trace,
spectrum, and the discrete Monte Carlo power-trace estimator.

The closed forms here act as the oracle for the continuous estimator's
design, so everything is cross-checked at tight tolerances.
"""

import math
import warnings

import numpy as np
import pytest
from scipy import special

from pggap.birth_death import (
    BirthDeathSpec,
    _demo_log_a,
    _demo_log_b,
    _log_u,
    _u_tail_bounds,
    build_truncated,
    demo_sequences,
    exact_power_trace,
    exact_spectrum,
    log_stationary,
    mc_estimate_s_l_discrete,
    pqr,
    trace_sum,
)


@pytest.fixture(scope="module")
def spec():
    return demo_sequences()


class TestTransitionRules:
    def test_rows_sum_to_one(self, spec):
        x = np.arange(1, 201)
        p, q, r = pqr(spec, x)
        np.testing.assert_allclose(p + q + r, 1.0, rtol=0, atol=1e-14)

    def test_level_one_has_no_death(self, spec):
        p, q, r = pqr(spec, np.array([1]))
        assert q[0] == 0.0
        assert abs(p[0] + r[0] - 1.0) < 1e-15

    def test_probabilities_in_range(self, spec):
        p, q, r = pqr(spec, np.arange(1, 500))
        for arr in (p, q, r):
            assert np.all(arr >= 0.0) and np.all(arr <= 1.0)

    def test_hold_probability_bound(self, spec):
        """r_x <= 1 / (2 (x-1)^2) for x >= 2."""
        x = np.arange(2, 101)
        _, _, r = pqr(spec, x)
        assert np.all(r <= 0.5 / (x - 1.0) ** 2)

    def test_rejects_levels_below_one(self, spec):
        with pytest.raises(ValueError):
            pqr(spec, np.array([0, 1]))

    def test_detailed_balance(self, spec):
        """pi(x) p_x = pi(x+1) q_{x+1} across many levels."""
        x = np.arange(1, 120)
        p, _, _ = pqr(spec, x)
        _, q_next, _ = pqr(spec, x + 1)
        log_pi = log_stationary(spec, np.arange(1, 121))
        lhs = log_pi[:-1] + np.log(p)
        rhs = log_pi[1:] + np.log(q_next)
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)

    def test_stationary_mass_sums_to_one(self, spec):
        log_pi = log_stationary(spec, np.arange(1, 400))
        assert abs(np.exp(special.logsumexp(log_pi)) - 1.0) < 1e-14


class TestTailBounds:
    @pytest.mark.parametrize("j0", (100, 257, 1000))
    def test_u_tail_bracket_encloses_direct_sum(self, j0):
        """The zeta-function bracket contains sum_{j >= j0} U(j).

        The direct sum stops at a finite J, so the comparison allows
        for the remainder beyond J, which is below
        e^{-2} e^{1/J} / J because U(j) <= e^{-2+1/j} (j+1)^{-2}.
        """
        top = j0 + 300_000
        js = np.arange(j0, top + 1)
        direct = float(np.sum(np.exp(_log_u(js))))
        remainder_cap = math.exp(-2.0 + 1.0 / top) / top
        lo, hi = _u_tail_bounds(j0)
        assert lo <= direct + remainder_cap
        assert direct <= hi
        assert hi - lo < 1e-4 * hi

    def test_r_tail_bracket_encloses_direct_sum(self, spec):
        m = 150
        top = 80_000
        xs = np.arange(m + 1, top + 1)
        _, _, r = pqr(spec, xs)
        direct = float(np.sum(r))
        # beyond the direct sum, r_x <= U(2x-3) + U(2x-2), so the
        # remainder is below the U-tail cap at 2 top - 1
        remainder_cap = math.exp(-2.0 + 1.0 / (2 * top)) / (2 * top - 1)
        lo, hi = spec.r_tail(m)
        assert lo <= direct + remainder_cap
        assert direct <= hi
        assert hi - lo < 1e-12

    def test_trace_sum_is_certified(self, spec):
        ts = trace_sum(spec)
        assert ts.is_trace_class
        assert ts.tail_half_width < 1e-10
        x = np.arange(1, ts.n_terms + 1)
        p, q, r = pqr(spec, x)
        direct = 1.0 - p[0] + float(np.sum(r[1:]))
        lo, hi = spec.r_tail(ts.n_terms)
        expected = direct + 0.5 * (lo + hi)
        assert abs(ts.value - expected) <= ts.tail_half_width + 1e-13

    def test_trace_sum_without_tail_bound_warns(self, spec):
        bare = BirthDeathSpec(
            log_a=spec.log_a, log_b=spec.log_b, log_c=spec.log_c, r_tail=None
        )
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            ts = trace_sum(bare, max_terms=5_000)
        assert not ts.is_trace_class
        assert math.isinf(ts.tail_half_width)
        assert any("partial sum" in str(w.message) for w in caught)
        # the partial sum differs from the certified value by exactly
        # the mass beyond the cutoff
        lo, hi = spec.r_tail(5_000)
        residual = trace_sum(spec).value - ts.value
        assert lo - 1e-13 <= residual <= hi + 1e-13


class TestTruncatedKernel:
    def test_rows_stochastic_with_reflection(self, spec):
        tk = build_truncated(spec, 200)
        np.testing.assert_allclose(tk.K.sum(axis=1), 1.0, rtol=0, atol=1e-14)
        assert tk.K.shape == (200, 200)

    def test_tridiagonal_structure(self, spec):
        tk = build_truncated(spec, 50)
        off = np.abs(tk.K.copy())
        for k in (-1, 0, 1):
            off -= np.diag(np.diag(off, k=k), k=k)
        assert np.all(off == 0.0)

    def test_reflection_adds_escape_mass(self, spec):
        m = 60
        tk = build_truncated(spec, m)
        p, _, r = pqr(spec, np.arange(1, m + 1))
        assert abs(tk.K[m - 1, m - 1] - (r[m - 1] + p[m - 1])) < 1e-16

    def test_rejects_tiny_truncation(self, spec):
        with pytest.raises(ValueError):
            build_truncated(spec, 1)


class TestSpectrum:
    def test_top_eigenvalue_is_one(self, spec):
        eigs = exact_spectrum(spec, 200).eigenvalues
        assert abs(eigs[0] - 1.0) < 1e-12
        assert eigs[1] < 1.0 - 1e-3

    def test_matches_independent_symmetrization(self, spec):
        """Log-ratio symmetrization vs the direct sqrt(p q) route.

        Detailed balance makes sqrt(p_x q_{x+1}) the off-diagonal of the
        measure-symmetrized kernel without ever touching the stationary
        weights, so a dense eigh of that matrix is an independent check
        on the log-domain construction.  (A dense nonsymmetric eig of K
        itself is useless here: the kernel's extreme non-normality makes
        those eigenvalues numerically meaningless.)
        """
        m = 200
        x = np.arange(1, m + 1)
        p, q, r = pqr(spec, x)
        S = np.diag(r)
        S[m - 1, m - 1] += p[m - 1]
        off = np.sqrt(p[:-1] * q[1:])
        S += np.diag(off, k=1) + np.diag(off, k=-1)
        dense = np.linalg.eigvalsh(S)[::-1]
        fast = exact_spectrum(spec, m).eigenvalues
        np.testing.assert_allclose(fast, dense, rtol=0, atol=1e-12)

    def test_lambda_star_stable_in_truncation(self, spec):
        a = exact_spectrum(spec, 100).lambda_star
        b = exact_spectrum(spec, 200).lambda_star
        assert abs(a - b) < 1e-12

    @pytest.mark.parametrize("l", (3, 4, 5, 6))
    def test_power_sums_stable_in_truncation(self, spec, l):
        """Truncation level does not move s_l once the reflected tail
        mass is negligible relative to lambda_*^l (true for l >= 3)."""
        a = exact_spectrum(spec, 100).power_sum(l)
        b = exact_spectrum(spec, 200).power_sum(l)
        assert abs(a - b) < 1e-12

    def test_trace_identity_with_tail_correction(self, spec):
        """Sum of eigenvalues = certified diagonal sum, after removing
        the reflected escape mass and adding the certified tail."""
        m = 200
        ts = trace_sum(spec)
        eigs = exact_spectrum(spec, m).eigenvalues
        p_m = float(pqr(spec, np.array([m]))[0][0])
        lo, hi = spec.r_tail(m)
        reconstructed = float(np.sum(eigs)) - p_m + 0.5 * (lo + hi)
        assert abs(reconstructed - ts.value) < 1e-10

    def test_u_values_decrease_toward_lambda_star(self, spec):
        spectrum = exact_spectrum(spec, 200)
        us = [spectrum.u_value(l) for l in range(1, 9)]
        assert all(b < a for a, b in zip(us, us[1:]))
        assert all(u >= spectrum.lambda_star for u in us)

    def test_u_value_avoids_unit_eigenvalue_cancellation(self, spec):
        """At large l the naive (s_l - 1) difference is pure roundoff;
        the direct form must stay positive and above lambda_*."""
        spectrum = exact_spectrum(spec, 200)
        u8 = spectrum.u_value(8)
        assert spectrum.lambda_star <= u8 < spectrum.lambda_star * 1.0001

    def test_power_trace_helpers_validate(self, spec):
        spectrum = exact_spectrum(spec, 100)
        with pytest.raises(ValueError):
            spectrum.u_value(0)
        with pytest.raises(ValueError):
            exact_power_trace(spectrum.eigenvalues, 0)


class TestDiscreteEstimator:
    @pytest.mark.parametrize("l", (1, 2, 3, 5))
    def test_unbiased_against_spectrum(self, spec, l):
        spectrum = exact_spectrum(spec, 200)
        est, se = mc_estimate_s_l_discrete(
            spec, 200, l, 40_000, np.random.default_rng(500 + l)
        )
        assert abs(est - spectrum.power_sum(l)) < 4.0 * se

    def test_custom_pmf_matches_uniform_target(self, spec):
        """A non-uniform importance pmf estimates the same quantity."""
        spectrum = exact_spectrum(spec, 120)
        pmf = 1.0 / np.arange(1, 121)
        est, se = mc_estimate_s_l_discrete(
            spec, 120, 2, 60_000, np.random.default_rng(8), h_pmf=pmf
        )
        assert abs(est - spectrum.power_sum(2)) < 4.0 * se

    def test_stationary_pmf_shrinks_error(self, spec):
        """Sampling levels from the stationary law concentrates work
        where the kernel mass lives and cuts the standard error.

        The stationary weights underflow to exact zeros above level
        ~35, so the comparison runs on a low truncation, where the
        discarded mass is far below roundoff anyway.
        """
        m = 30
        pmf = np.exp(log_stationary(spec, np.arange(1, m + 1)))
        _, se_pi = mc_estimate_s_l_discrete(
            spec, m, 3, 30_000, np.random.default_rng(9), h_pmf=pmf
        )
        _, se_unif = mc_estimate_s_l_discrete(
            spec, m, 3, 30_000, np.random.default_rng(9)
        )
        assert se_pi < se_unif

    def test_rejects_bad_pmf(self, spec):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            mc_estimate_s_l_discrete(spec, 10, 1, 100, rng, h_pmf=np.ones(9))
        with pytest.raises(ValueError):
            mc_estimate_s_l_discrete(
                spec, 10, 1, 100, rng, h_pmf=np.append(np.ones(9), 0.0)
            )
        with pytest.raises(ValueError):
            mc_estimate_s_l_discrete(spec, 10, 0, 100, rng)
        with pytest.raises(ValueError):
            mc_estimate_s_l_discrete(spec, 10, 1, 0, rng)

    def test_single_sample_has_nan_se(self, spec):
        est, se = mc_estimate_s_l_discrete(
            spec, 50, 1, 1, np.random.default_rng(1)
        )
        assert math.isfinite(est)
        assert math.isnan(se)

    def test_seeded_reproducibility(self, spec):
        a = mc_estimate_s_l_discrete(spec, 100, 3, 5_000, np.random.default_rng(4))
        b = mc_estimate_s_l_discrete(spec, 100, 3, 5_000, np.random.default_rng(4))
        assert a == b


class TestDemoSequences:
    def test_log_sequences_match_closed_forms(self):
        x = np.array([1.0, 2.0, 5.0, 30.0])
        np.testing.assert_allclose(
            _demo_log_a(x), -(4.0 * x - 2.0) * np.log(2.0 * x - 1.0), rtol=1e-15
        )
        np.testing.assert_allclose(
            _demo_log_b(x), -4.0 * x * np.log(2.0 * x), rtol=1e-15
        )

    def test_adjacent_ratio_collapses_to_u(self):
        """b_x / a_x and a_x / b_{x-1} are both values of the single
        sequence U(j) = j^{2j} / (j+1)^{2j+2} at consecutive j, which is
        what makes the ratio-sum tail cap a plain sum over U."""
        x = np.arange(2.0, 40.0)
        np.testing.assert_allclose(
            _demo_log_b(x) - _demo_log_a(x), _log_u(2.0 * x - 1.0), rtol=1e-13
        )
        np.testing.assert_allclose(
            _demo_log_a(x) - _demo_log_b(x - 1.0), _log_u(2.0 * x - 2.0), rtol=1e-13
        )
        np.testing.assert_allclose(
            _demo_log_b(x - 1.0) - _demo_log_a(x - 1.0),
            _log_u(2.0 * x - 3.0),
            rtol=1e-13,
        )

    def test_normalizer_covers_both_sequences(self, spec):
        x = np.arange(1.0, 60.0)
        total = np.exp(
            special.logsumexp(np.concatenate([_demo_log_a(x), _demo_log_b(x)]))
            - spec.log_c
        )
        assert abs(total - 1.0) < 1e-14
