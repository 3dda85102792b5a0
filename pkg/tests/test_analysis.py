import numpy as np
import pytest
from scipy import stats

from dosp import NetworkConfig, PerturbationSpec, StepSizeSchedule
from dosp.core import ActionBounds, RngStream
from dosp.analysis import (
    ModelConstants,
    asymptotic_exponent,
    averaged_steps,
    bias_diagnostics,
    binomial_average,
    binomial_weights,
    chernoff_step_bound,
    compute_K0,
    mc_gradient_bias,
    mc_step_average,
    rate_envelope,
    rate_params,
    recurrence_envelope,
    verify_asymptotic_bounds,
    verify_lemma4,
)
from dosp.objectives import QuadraticModel

from conftest import reference_schedule


def _gen(stream, seed=2718):
    return RngStream(seed, stream).generator()


class TestBinomialAverage:
    def test_single_slot(self):
        x = lambda l: 3.0 * np.asarray(l, dtype=float)
        assert binomial_average(x, 1, 0.3) == pytest.approx(0.3 * 3.0, rel=1e-14)

    def test_two_slot_expansion(self):
        q = 0.3
        x = lambda l: np.asarray(l, dtype=float) ** 2
        expected = q * (1 - q) * 1.0 + q * q * 4.0
        assert binomial_average(x, 2, q) == pytest.approx(expected, rel=1e-14)

    def test_weights_match_binomial_pmf(self):
        # independent oracle: scipy's binomial pmf, scaled by q_a
        for k, q in ((7, 0.3), (500, 0.05), (5000, 0.6)):
            ell, w = binomial_weights(k, q)
            ref = q * stats.binom.pmf(ell - 1, k - 1, q)
            np.testing.assert_allclose(w, ref, rtol=1e-10)
            assert w.sum() == pytest.approx(q, rel=1e-10)

    def test_cost_guard(self):
        with pytest.raises(ValueError):
            binomial_average(lambda l: l, 2_000_000, 0.5)

    def test_partial_sum_tracks_transport_oracle(self):
        # sum_{k<=K} of the averaged sequence equals sum_l x_l * P(l-th
        # activation happens within K slots); the negative-binomial CDF is the
        # independent oracle for that transport probability
        s = reference_schedule()
        q = 0.05
        K = 2000
        x = lambda l: s.beta(l) * s.gamma(l)
        avg_sum = sum(binomial_average(x, k, q) for k in range(1, K + 1))
        l = np.arange(1, K + 1)
        transported = stats.nbinom.cdf(K - l, l, q)
        oracle = float(np.sum(x(l) * transported))
        assert avg_sum == pytest.approx(oracle, rel=5e-3)
        assert avg_sum == pytest.approx(oracle, rel=1e-10)  # agreement is tight


class TestAveragedSteps:
    def test_first_slot_closed_form(self):
        s = reference_schedule()
        got = averaged_steps(s, 1, 0.05)
        assert got.bg == pytest.approx(0.05 * 0.025 * 10.0, rel=1e-14)
        assert got.b == pytest.approx(0.05 * 0.025, rel=1e-14)
        assert got.g2 == pytest.approx(0.05 * 100.0, rel=1e-14)

    @pytest.mark.parametrize("k", [10, 100, 1000])
    def test_jensen_lower_bound(self, k):
        s = reference_schedule()
        q = 0.05
        got = averaged_steps(s, k, q)
        k_mean = 1.0 + q * (k - 1)
        assert got.bg >= q * s.beta(k_mean) * s.gamma(k_mean)

    @pytest.mark.parametrize("k", [10, 100, 1000])
    def test_all_moments_match_simulation(self, k):
        s = reference_schedule()
        q = 0.05
        got = averaged_steps(s, k, q)
        rng = _gen(1)
        for name, fn in [
            ("bg", lambda l: s.beta(l) * s.gamma(l)),
            ("b", s.beta),
            ("g", s.gamma),
            ("b2", lambda l: s.beta(l) ** 2),
            ("g2", lambda l: s.gamma(l) ** 2),
            ("bg2", lambda l: s.beta(l) * s.gamma(l) ** 2),
        ]:
            est, err = mc_step_average(fn, k, q, 400_000, rng)
            assert abs(est - getattr(got, name)) <= 3 * err, (name, k)

    def test_monte_carlo_cross_check_large(self):
        s = reference_schedule()
        got = averaged_steps(s, 200, 0.05)
        est, err = mc_step_average(lambda l: s.beta(l) * s.gamma(l), 200, 0.05,
                                   1_000_000, _gen(2))
        assert abs(est - got.bg) <= 3 * err

    def test_sum_inheritance(self):
        # the bg partial sums keep growing while the b2 sums go Cauchy
        s = reference_schedule()
        q = 0.05
        ks = np.arange(1, 8001)
        bg = np.array([averaged_steps(s, int(k), q).bg for k in ks])
        b2 = np.array([averaged_steps(s, int(k), q).b2 for k in ks])
        bg_sum = np.cumsum(bg)
        b2_sum = np.cumsum(b2)
        bg_blocks = (bg_sum[3999] - bg_sum[1999], bg_sum[7999] - bg_sum[3999])
        b2_blocks = (b2_sum[3999] - b2_sum[1999], b2_sum[7999] - b2_sum[3999])
        # doubling blocks of the squared-step sums shrink geometrically
        # (tail ~ K**-0.5 here, so the block ratio tends to 2**-0.5)
        assert b2_blocks[1] < 0.75 * b2_blocks[0]
        # while the product sums keep adding near-constant log-style blocks
        assert bg_blocks[1] > 0.9 * bg_blocks[0]


class TestLemma4:
    def test_zero_sequence(self):
        rep = verify_lemma4(lambda l: np.zeros_like(np.asarray(l, dtype=float)),
                            0.3, 50)
        assert rep.sum_raw == 0.0 and rep.sum_averaged == 0.0 and rep.rel_gap == 0.0

    def test_degenerate_activity_is_exact(self):
        s = reference_schedule()
        rep = verify_lemma4(lambda l: s.beta(l) ** 2, 1.0, 400)
        assert rep.gap == 0.0

    def test_gap_shrinks_with_horizon(self):
        s = reference_schedule()
        x = lambda l: s.beta(l) ** 2
        gaps = [verify_lemma4(x, 0.05, K).rel_gap for K in (2000, 8000, 20_000)]
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 0.02


class TestChernoffBound:
    def test_first_slot_value(self):
        z = lambda l: 1.0 / np.sqrt(np.asarray(l, dtype=float))
        q = 0.4
        assert chernoff_step_bound(z, 1, q, 0.5) == pytest.approx(
            q * (z(1) + z(2)), rel=1e-14)

    def test_dominates_simulation(self):
        s = reference_schedule()
        rng = _gen(3)
        for k in (500, 2000):
            bound = chernoff_step_bound(s.gamma, k, 0.05, 0.5)
            est, err = mc_step_average(s.gamma, k, 0.05, 1_000_000, rng)
            assert est <= bound

    def test_vanishes_along_grid(self):
        s = reference_schedule()
        vals = [chernoff_step_bound(s.gamma, k, 0.05, 0.5)
                for k in (100, 1000, 10_000, 100_000)]
        assert vals[0] > vals[1] > vals[2] > vals[3]

    def test_xi_validated(self):
        s = reference_schedule()
        for xi in (0.0, 1.0, -0.2):
            with pytest.raises(ValueError):
                chernoff_step_bound(s.gamma, 10, 0.5, xi)


class TestBiasDiagnostics:
    def test_envelope_dominates_moment_bound(self):
        s = reference_schedule()
        net = NetworkConfig(50, 0.05, 1.0)
        grid = np.unique(np.geomspace(1, 100_000, 40).astype(int))
        diag = bias_diagnostics(s, net, PerturbationSpec.rademacher(), 2.0, grid)
        assert np.all(diag.omega >= diag.w_bound)
        assert diag.omega[-1] < 0.1 * diag.omega[0]

    def test_moment_bound_decreases(self):
        s = reference_schedule()
        net = NetworkConfig(50, 0.05, 1.0)
        grid = np.array([1, 10, 100, 1000, 10_000, 100_000])
        diag = bias_diagnostics(s, net, PerturbationSpec.rademacher(), 2.0, grid)
        assert np.all(np.diff(diag.w_bound) < 0)

    def test_single_always_active_node_reduces_to_hand_formula(self):
        # N = 1, q_a = 1: the moment combination collapses to 3 * gamma_k
        s = reference_schedule()
        net = NetworkConfig(1, 1.0, 1.0)
        ks = np.array([1, 5, 50, 500])
        diag = bias_diagnostics(s, net, PerturbationSpec.rademacher(), 2.0, ks)
        np.testing.assert_allclose(diag.w_bound, 3.0 * s.gamma(ks), rtol=1e-12)

    def test_gradient_bias_simulation_stays_below_bound(self):
        targets = np.linspace(-1.5, 1.5, 10)
        model = QuadraticModel(targets)
        s = StepSizeSchedule(0.5, 2.0, 0.75, 0.25)
        net = NetworkConfig(10, 0.2, 1.0)
        pert = PerturbationSpec.rademacher()
        a = targets + 0.4
        bias, err = mc_gradient_bias(model, s, net, pert, 0.5, a, node=3, k=50,
                                     n_samples=40_000, rng=_gen(4))
        bound = bias_diagnostics(s, net, pert, model.alpha_G, [50]).b_bound[0]
        assert abs(bias) <= bound + 3 * err


class TestK0:
    def test_wide_bounds(self):
        s = reference_schedule()
        pert = PerturbationSpec.rademacher()
        bounds = ActionBounds.uniform(3, -20.0, 20.0)
        assert compute_K0(s, pert, bounds, np.zeros(3)) == 1

    def test_tight_bounds(self):
        s = reference_schedule()
        pert = PerturbationSpec.rademacher()
        bounds = ActionBounds.uniform(3, -5.0, 5.0)
        assert compute_K0(s, pert, bounds, np.zeros(3)) == 16

    def test_off_center_optimum(self):
        s = reference_schedule()
        pert = PerturbationSpec.rademacher()
        bounds = ActionBounds.uniform(3, -5.0, 5.0)
        assert compute_K0(s, pert, bounds, np.full(3, 3.0)) == 3

    def test_boundary_optimum_rejected(self):
        s = reference_schedule()
        with pytest.raises(ValueError):
            compute_K0(s, PerturbationSpec.rademacher(),
                       ActionBounds.uniform(2, -1.0, 1.0), np.array([1.0, 0.0]))


def _quadratic_params(k_max=4000, q_a=0.2, n=5, sigma_eta=0.5):
    s = StepSizeSchedule(0.25, 2.0, 0.75, 0.25)
    net = NetworkConfig(n, q_a, 1.0)
    bounds = ActionBounds.uniform(n, -3.0, 3.0)
    targets = np.linspace(-1.0, 1.0, n)
    model = QuadraticModel(targets)
    consts = ModelConstants(
        alpha_F=model.alpha_F(q_a), alpha_G=model.alpha_G,
        lipschitz=model.lipschitz(bounds), sigma_eta=sigma_eta,
        sigma_a_sq=bounds.sigma_a_sq)
    params = rate_params(s, net, consts, PerturbationSpec.rademacher(), k_max,
                         bounds=bounds, a_star=targets)
    return s, net, params


class TestRateParams:
    def test_theta_matches_average(self):
        s, net, params = _quadratic_params()
        q = net.q_activity
        for k in (1, 10, 100, 1000):
            assert params.theta[k - 1] * q == pytest.approx(
                averaged_steps(s, k, q).bg, rel=1e-12)

    def test_psi_recombines_from_averages(self):
        s, net, params = _quadratic_params()
        n = net.n_nodes
        for k in (3, 30, 300):
            m = averaged_steps(s, k, net.q_activity)
            manual = 2 * n * m.bg * m.g + m.bg2 + (n - 1) ** 2 * m.b * m.g2
            assert params.psi[k - 1] == pytest.approx(manual, rel=1e-12)

    def test_balanced_exponents_enable_both_envelopes(self):
        # c1 = 3 * c2 keeps both ratio families bounded
        _, _, params = _quadratic_params()
        assert params.envelope_a_valid and params.envelope_b_valid
        assert params.vartheta is not None and params.varrho is not None
        assert params.status == "applicable"

    def test_exponent_selector(self):
        assert asymptotic_exponent(0.75, 0.25) == pytest.approx(0.5)
        assert asymptotic_exponent(0.9, 0.1) == pytest.approx(0.2)
        assert asymptotic_exponent(0.6, 0.4) == pytest.approx(0.2)

    def test_unbalanced_exponents_keep_one_envelope(self):
        # c1 > 3*c2: only the squared-ratio family stays bounded
        s = StepSizeSchedule(0.25, 2.0, 0.9, 0.1)
        net = NetworkConfig(5, 0.2, 1.0)
        bounds = ActionBounds.uniform(5, -3.0, 3.0)
        targets = np.linspace(-1.0, 1.0, 5)
        model = QuadraticModel(targets)
        consts = ModelConstants(
            alpha_F=model.alpha_F(0.2), alpha_G=model.alpha_G,
            lipschitz=model.lipschitz(bounds), sigma_eta=0.5,
            sigma_a_sq=bounds.sigma_a_sq)
        params = rate_params(s, net, consts, PerturbationSpec.rademacher(),
                             3000, bounds=bounds, a_star=targets)
        assert params.envelope_a_valid and not params.envelope_b_valid
        assert params.vartheta is not None and params.varrho is None
        table = rate_envelope(params, np.arange(params.K2, 3000))
        assert np.all(np.isnan(table.envelope_b))
        assert np.all(np.isfinite(table.envelope_a))

    def test_envelope_nonincreasing_beyond_k2(self):
        _, _, params = _quadratic_params()
        grid = np.arange(params.K2, 4000)
        table = rate_envelope(params, grid)
        assert np.all(np.diff(table.envelope) <= 1e-12)
        assert table.xi_fit is not None and table.xi_fit > 0

    def test_asymptotic_display_tracks_envelope_order(self):
        _, _, params = _quadratic_params()
        grid = np.unique(np.geomspace(100, 4000, 25).astype(int))
        table = rate_envelope(params, grid)
        ratio = table.envelope / table.asymptotic
        assert np.all(np.isfinite(ratio))
        assert ratio.max() / ratio.min() < 3.0


class TestRecurrenceEnvelope:
    def test_pure_contraction_product(self):
        _, _, params = _quadratic_params(k_max=200)
        import dataclasses
        frozen = dataclasses.replace(params, B=0.0, C=0.0)
        out = recurrence_envelope(frozen, 2.0, 1, 150)
        product = 2.0 * np.cumprod(1.0 - params.A * params.theta[:149])
        np.testing.assert_allclose(out[1:], product, rtol=1e-12)
        assert np.all(np.diff(out) < 0)

    def test_injection_only_tail_positive(self):
        _, _, params = _quadratic_params(k_max=200)
        import dataclasses
        frozen = dataclasses.replace(params, B=0.0)
        out = recurrence_envelope(frozen, 0.0, 1, 150)
        assert out[0] == 0.0
        assert np.all(out[1:] > 0)


class TestAsymptoticRatioBounds:
    def test_reference_schedule_bounds_engage(self):
        s = reference_schedule()
        net = NetworkConfig(50, 0.05, 1.0)
        grid = np.unique(np.geomspace(1, 100_000, 60).astype(int))
        checks = verify_asymptotic_bounds(s, net, 0.5, 0.5, grid)
        for check in checks:
            assert check.k_prime is not None, check.name

    def test_squared_ratio_decay_order(self):
        from dosp.harness import fit_loglog_slope

        s = reference_schedule()
        net = NetworkConfig(50, 0.05, 1.0)
        grid = np.unique(np.geomspace(1000, 100_000, 40).astype(int))
        checks = {c.name: c for c in verify_asymptotic_bounds(s, net, 0.5, 0.5, grid)}
        ratio = checks["psi2_over_theta2"].ratio
        slope, _ = fit_loglog_slope(grid, ratio, k_min=1000)
        assert slope == pytest.approx(-0.5, abs=0.05)

    def test_degenerate_activity_reduces_to_raw_sequences(self):
        s = reference_schedule()
        net = NetworkConfig(4, 1.0, 1.0)
        grid = np.array([1, 10, 100])
        checks = {c.name: c for c in verify_asymptotic_bounds(s, net, 0.5, 0.5, grid)}
        theta_raw = s.beta(grid) * s.gamma(grid)
        upsilon_raw = s.beta(grid) ** 2
        np.testing.assert_allclose(checks["upsilon_over_theta"].ratio,
                                   upsilon_raw / theta_raw, rtol=1e-12)
