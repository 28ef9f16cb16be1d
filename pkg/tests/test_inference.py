import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paneldebias.design import build_design
from paneldebias.estimators import FixedEffects
from paneldebias.exceptions import TooManyFailedReplicates, UnitRootDenominator
from paneldebias.inference import (
    CovarianceEstimate,
    cluster_bootstrap,
    delta_method_lr,
    long_run_effect,
    long_run_gradient,
    small_bias_diagnostic,
)
from paneldebias.panel import BalancedPanel
from paneldebias.simulate import DGPConfig, simulate_dgp

from conftest import random_panel


class TestLongRunEffect:
    def test_arithmetic(self):
        assert long_run_effect(0.1, [0.5, 0, 0, 0]) == pytest.approx(0.2)

    def test_table_style_rounding(self):
        # displayed-precision inputs: 1.89 / (1 - 0.88) = 15.75
        value = long_run_effect(1.89, [1.15, -0.12, -0.07, -0.08])
        assert value == pytest.approx(1.89 / 0.12, rel=1e-12)
        assert value == pytest.approx(15.75, abs=1e-10)

    def test_unit_root(self):
        with pytest.raises(UnitRootDenominator):
            long_run_effect(0.5, [1.0, 0, 0, 0])

    @given(
        alpha=st.floats(-5, 5),
        b1=st.floats(-0.4, 0.4),
        b2=st.floats(-0.4, 0.4),
    )
    @settings(max_examples=50, deadline=None)
    def test_gradient_matches_finite_differences(self, alpha, b1, b2):
        beta = np.array([b1, b2])
        g = long_run_gradient(alpha, beta)
        eps = 1e-6
        fd = np.empty(3)
        fd[0] = (
            long_run_effect(alpha + eps, beta) - long_run_effect(alpha - eps, beta)
        ) / (2 * eps)
        for j in range(2):
            hi, lo = beta.copy(), beta.copy()
            hi[j] += eps
            lo[j] -= eps
            fd[j + 1] = (
                long_run_effect(alpha, hi) - long_run_effect(alpha, lo)
            ) / (2 * eps)
        np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-8)


class TestDeltaMethod:
    def test_beta_block_zero_collapses_to_alpha_se(self):
        v = np.zeros((3, 3))
        v[0, 0] = 0.04
        cov = CovarianceEstimate(
            matrix=v, names=("d", "lag1", "lag2"), provenance="analytic", n_clusters=10
        )
        se = delta_method_lr(0.5, [0.3, 0.1], cov)
        assert se == pytest.approx(0.2 / abs(1 - 0.4))

    def test_simulation_propagation_oracle(self):
        # push a Gaussian sample through the ratio and compare its SD with
        # the delta-method SE (small covariance keeps the map near-linear)
        alpha, beta = 0.8, np.array([0.35])
        v = np.array([[2.5e-5, 4e-6], [4e-6, 1.6e-5]])
        cov = CovarianceEstimate(
            matrix=v, names=("d", "lag1"), provenance="analytic", n_clusters=50
        )
        se = delta_method_lr(alpha, beta, cov)

        rng = np.random.default_rng(99)
        draws = rng.multivariate_normal([alpha, beta[0]], v, size=1_000_000)
        sim = draws[:, 0] / (1.0 - draws[:, 1])
        assert se == pytest.approx(sim.std(ddof=1), rel=0.02)


class TestScaleEquivariance:
    def test_long_run_value_and_se_scale_with_outcome(self, rng):
        # scaling the outcome by c scales alpha by c and leaves the lag
        # coefficients unchanged, so the long-run effect and its SE scale by c
        panel = random_panel(rng, 10, 8, dynamics=(0.8, 0.4))
        sample = build_design(panel, "y", ("d",), 1)
        est = FixedEffects().fit(sample)

        c = 7.25
        scaled_panel = BalancedPanel(
            units=panel.units,
            periods=panel.periods,
            series={"y": c * panel.values("y"), "d": panel.values("d")},
        )
        scaled = FixedEffects().fit(build_design(scaled_panel, "y", ("d",), 1))
        assert scaled.long_run_[0] == pytest.approx(c * est.long_run_[0], rel=1e-8)
        assert scaled.long_run_se_[0] == pytest.approx(
            c * est.long_run_se_[0], rel=1e-8
        )


class TestSmallBiasDiagnostic:
    def test_many_moment_configuration(self):
        diag = small_bias_diagnostic(n=2646, p=169, m=632)
        assert diag.ratio == 632**2 / 2646
        assert round(diag.ratio) == 151
        assert diag.flagged

    def test_many_parameter_configuration(self):
        diag = small_bias_diagnostic(n=2793, p=170, m=0)
        assert diag.ratio == 170**2 / 2793
        assert round(diag.ratio, 1) == 10.3
        assert diag.flagged

    def test_small_ratio_unflagged(self):
        diag = small_bias_diagnostic(n=100_000, p=10, m=0)
        assert diag.ratio == pytest.approx(0.001)
        assert not diag.flagged
        assert "plausible" in diag.text


class TestClusterBootstrap:
    def test_noiseless_panel_zero_se(self, rng):
        d = rng.uniform(size=(6, 5)).round()
        panel = BalancedPanel(
            units=tuple(f"u{i}" for i in range(6)),
            periods=tuple(range(5)),
            series={"y": 2.0 * d, "d": d},
        )
        sample = build_design(panel, "y", ("d",), 0)
        result = cluster_bootstrap(sample, FixedEffects(), n_boot=20, seed=1)
        assert result.se_for("d") == pytest.approx(0.0, abs=1e-10)
        assert result.n_failed == 0

    def test_determinism_and_parallel_equality(self, rng):
        panel = random_panel(rng, 10, 7, dynamics=(0.5, 0.4))
        sample = build_design(panel, "y", ("d",), 1)
        r1 = cluster_bootstrap(sample, FixedEffects(), n_boot=16, seed=5)
        r2 = cluster_bootstrap(sample, FixedEffects(), n_boot=16, seed=5)
        np.testing.assert_array_equal(r1.estimates, r2.estimates)
        r3 = cluster_bootstrap(sample, FixedEffects(), n_boot=16, seed=5, n_jobs=2)
        np.testing.assert_array_equal(r1.estimates, r3.estimates)
        assert np.all(r1.se[: 2] > 0)

    def test_se_tracks_monte_carlo_sd(self):
        # bootstrap SE should land within 25% of the across-dataset SD
        config = DGPConfig(
            n_units=60,
            n_periods=8,
            alpha=1.0,
            rho=(0.4,),
            sigma_unit=1.0,
            sigma_time=0.2,
            sigma_noise=1.0,
            stay_prob=0.7,
            loading=0.5,
        )
        alphas = []
        for r in range(400):
            panel = simulate_dgp(config, seed=[7, r])
            sample = build_design(panel, "y", ("d",), 1)
            alphas.append(FixedEffects().fit(sample).alpha_[0])
        mc_sd = np.std(alphas, ddof=1)

        panel = simulate_dgp(config, seed=[7, 1000])
        sample = build_design(panel, "y", ("d",), 1)
        boot = cluster_bootstrap(sample, FixedEffects(), n_boot=500, seed=3)
        assert abs(boot.se_for("d") - mc_sd) <= 0.25 * mc_sd

    def test_too_many_failures(self, rng):
        class Exploding(FixedEffects):
            def fit(self, sample, y=None):
                from paneldebias.exceptions import EstimationError

                super().fit(sample)
                if sample.unit_ids != self._ref:
                    raise EstimationError("boom")
                return self

        panel = random_panel(rng, 6, 6, dynamics=(0.5, 0.4))
        sample = build_design(panel, "y", ("d",), 1)
        est = Exploding()
        est._ref = sample.unit_ids
        # clone() drops _ref, so set it via a subclass attribute instead
        Exploding._ref = sample.unit_ids
        with pytest.raises(TooManyFailedReplicates):
            cluster_bootstrap(sample, est, n_boot=10, seed=0)
