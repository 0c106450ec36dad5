import numpy as np
import pytest
from joblib import Parallel, delayed
from hdsvar.bootstrap import BootstrapDistribution
from hdsvar.dgp import DgpSpec, GeneratedDgp, generate, simulate
from hdsvar.errors import NumericalError, UsageError
from hdsvar.inference import (
    FevdEstimate,
    FevdInference,
    ci_boot,
    ci_gaussian,
    fevd,
    fevd_grid,
    fevd_network,
    fevd_test_delta,
    fevd_test_zero,
)
from hdsvar.model_core import SparseVarModel, ma_coefficients
from hdsvar.pipeline import PipelineConfig, Target, estimate

grid = np.linspace(-1.96, 1.96, 401)
spec = DgpSpec(p=5, n=300, lags=1, k_a=2, radius=0.5, n_shocks=2, shock=0, k_b=3, k_d=2)
config = PipelineConfig(lags=1, shock_index=(0, 1), horizon=4)
estimates = estimate(simulate(generate(spec, 8), rng=9), config)


def random_scale(k):
    root = np.random.default_rng(k).normal(size=(k, k))
    return root @ root.T + np.eye(k)


class Test_ci_boot:
    def test_symmetric_replicates(self):
        ci = ci_boot(0.0, grid, 100, 0.05)
        assert ci.lower == pytest.approx(-ci.upper)
        assert ci.upper == pytest.approx(np.quantile(grid, 0.975) / 10)
        assert ci.method == "boot"
        assert ci.level == pytest.approx(0.95)

    def test_center_shift(self):
        de = ci_boot(0.3, grid + 0.5, 100, 0.05, "de")
        re = ci_boot(0.1, grid + 0.5, 100, 0.05, "re")
        assert de.lower - re.lower == pytest.approx(0.2)
        assert de.upper - re.upper == pytest.approx(0.2)
        assert de.length == re.length

    def test_from_distribution(self):
        target = Target(1, 0, 0)
        indices = np.arange(grid.size)
        dist = BootstrapDistribution(
            (target,), grid[:, None], indices, np.zeros(1), 100
        )
        expected = ci_boot(0.0, grid, 100, 0.1).width
        assert ci_boot(0.0, dist, 100, 0.1, target=target).width == expected

    def test_bad_center(self):
        with pytest.raises(UsageError):
            ci_boot(0.0, grid, 100, 0.05, center_kind="mean")


class Test_ci_gaussian:
    def test_half_width(self):
        ci = ci_gaussian(1.0, 2.0, 100, 0.05)
        assert ci.upper - 1.0 == pytest.approx(2.0 * 1.959964 / 10, abs=1e-6)
        assert ci.covers(1.0)

    def test_point_interval(self):
        ci = ci_gaussian(1.0, 0.0, 100, 0.05)
        assert ci.lower == ci.upper == 1.0

    def test_level_monotone(self):
        wide = ci_gaussian(0.0, 1.0, 50, 0.01)
        narrow = ci_gaussian(0.0, 1.0, 50, 0.05)
        assert wide.lower <= narrow.lower and narrow.upper <= wide.upper

    def test_negative_se(self):
        with pytest.raises(UsageError):
            ci_gaussian(0.0, -1.0, 100, 0.05)

    def test_coverage_of_exact_normal_errors(self):
        rng = np.random.default_rng(21)
        n, se, truth = 400, 1.7, 0.3
        centers = truth + se * rng.standard_normal(10000) / np.sqrt(n)
        hits = [ci_gaussian(c, se, n, 0.05).covers(truth) for c in centers]
        assert abs(np.mean(hits) - 0.95) <= 0.02


class Test_fevd:
    psi = [np.eye(2), np.array([[0.5, 0.1], [0.0, 0.4]])]
    sigma = np.array([[1.0, 0.3], [0.3, 2.0]])
    impact = np.linalg.cholesky(sigma)

    def test_single_variable_is_one(self):
        psi = [np.eye(1), np.array([[0.6]]), np.array([[0.36]])]
        impulses = [m * 1.5 for m in psi]
        result = fevd(impulses, psi, np.array([[2.25]]), 0, 0, 3)
        assert result.value == pytest.approx(1.0)

    def test_shares_sum_to_one(self):
        impulses = [m @ self.impact for m in self.psi]
        shares = [fevd(impulses, self.psi, self.sigma, 0, j, 2) for j in range(2)]
        total = sum(share.value for share in shares)
        assert total == pytest.approx(1.0)

    def test_hand_ratio(self):
        impulses = [m @ self.impact for m in self.psi]
        numerator = impulses[0][1, 1] ** 2 + impulses[1][1, 1] ** 2
        denominator = self.sigma[1, 1] + self.psi[1][1] @ self.sigma @ self.psi[1][1]
        result = fevd(impulses, self.psi, self.sigma, 1, 1, 2)
        assert result.value == pytest.approx(numerator / denominator)

    def test_zero_column(self):
        first = [m @ self.impact[:, 0] for m in self.psi]
        impulses = [np.column_stack([column, np.zeros(2)]) for column in first]
        assert fevd(impulses, self.psi, self.sigma, 0, 1, 2).value == 0.0

    def test_horizon(self):
        with pytest.raises(UsageError):
            fevd([np.eye(2)], self.psi, self.sigma, 0, 0, 0)

    def test_denominator(self):
        with pytest.raises(NumericalError):
            fevd([np.eye(2)], [np.zeros((2, 2))], self.sigma, 0, 0, 1)


class Test_fevd_tests:
    def test_zero_theta(self):
        result = fevd_test_zero(np.zeros(3), np.eye(3), 100, 0.05)
        assert result.statistic == 0.0
        assert not result.reject
        assert result.p_value == 1.0

    @pytest.mark.parametrize("theta, reject", [(0.2, True), (0.19, False)])
    def test_chi2_oracle(self, theta, reject):
        result = fevd_test_zero(np.array([theta]), np.array([[1.0]]), 100, 0.05)
        assert result.critical_value == pytest.approx(3.8415 / 100, abs=1e-6)
        assert result.reject == reject

    @pytest.mark.parametrize("c", [1e-3, 0.5, 7.0])
    def test_chi2_rescaling(self, c):
        theta = np.array([0.2, -0.1, 0.05])
        scale = random_scale(3)
        base = fevd_test_zero(theta, scale, 100, 0.05)
        scaled = fevd_test_zero(c * theta, c**2 * scale, 100, 0.05)
        assert scaled.statistic == pytest.approx(base.statistic, rel=1e-10)
        assert scaled.reject == base.reject

    def test_ridge_repair(self):
        result = fevd_test_zero(np.array([0.1, 0.1]), np.zeros((2, 2)) + 1.0, 100, 0.05)
        assert np.isfinite(result.statistic)

    def test_delta_zero_theta(self):
        result = fevd_test_delta(np.zeros(2), 1.0, np.eye(3), 0.2, 100, 0.05)
        assert result.statistic == 0.0
        assert not result.reject

    def test_delta_oracle(self):
        sandwich = np.array([[2.0, 0.5], [0.5, 1.0]])
        result = fevd_test_delta(np.array([0.5]), 0.5, sandwich, 0.2, 100, 0.05)
        assert result.statistic == pytest.approx(0.5)
        assert float(result.scale) == pytest.approx(np.sqrt(2.0))
        expected = 0.2 + 1.644854 * np.sqrt(2.0) / 10
        assert result.critical_value == pytest.approx(expected, abs=1e-6)
        assert result.reject

    @pytest.mark.parametrize("delta", [0.0, 1.0])
    def test_delta_range(self, delta):
        with pytest.raises(UsageError):
            fevd_test_delta(np.ones(1), 1.0, np.eye(2), delta, 100, 0.05)

    def test_delta_variance(self):
        with pytest.raises(NumericalError):
            fevd_test_delta(np.ones(1), 0.0, np.eye(2), 0.3, 100, 0.05)


class Test_fevd_inference:
    fevds = FevdInference(estimates)

    def test_scale_shape(self):
        scale = self.fevds.scale(2, 0, 3)
        assert scale.shape == (3, 3)
        assert np.allclose(scale, scale.T)

    @pytest.mark.parametrize("delta", [0.0, 0.3])
    def test_dispatch(self, delta):
        result = self.fevds.test(2, 0, 3, delta, 0.05)
        assert result.variant == ("zero" if delta == 0 else "delta")
        assert 0.0 <= result.p_value <= 1.0

    @pytest.mark.parametrize("delta, horizon", [(1.0, 2), (-0.1, 2), (0.2, 0)])
    def test_invalid(self, delta, horizon):
        with pytest.raises(UsageError):
            self.fevds.test(2, 0, horizon, delta, 0.05)

    def test_spectral_zero_positive(self):
        assert self.fevds.spectral_zero(3, 2) > 0

    @pytest.mark.parametrize("delta", [0.0, 0.3])
    def test_pairs_in_parallel(self, delta):
        pairs = [(i, j) for i in range(3) for j in range(2)]
        results = self.fevds.test_grid(pairs, 3, delta, 0.05, n_jobs=2)
        assert len(results) == len(pairs)
        for (i, j), result in zip(pairs, results):
            serial = self.fevds.test(i, j, 3, delta, 0.05)
            assert result.statistic == pytest.approx(serial.statistic)
            assert result.p_value == pytest.approx(serial.p_value)

    def test_grid(self):
        table = fevd_grid(estimates, [0, 1, 2], [0, 1], 3)
        assert set(table) == {(i, j) for i in range(3) for j in range(2)}
        assert all(w.value >= 0 for w in table.values())


class Test_fevd_network:
    weights = [0.3, 0.05, 0.5, 0.12, 0.01]
    estimates = [FevdEstimate(i, 0, 2, w, 1.0) for i, w in enumerate(weights)]

    def test_threshold(self):
        edges = fevd_network(self.estimates, threshold=0.1)
        assert [e.variable for e in edges] == [0, 2, 3]

    def test_benjamini_hochberg(self):
        p_values = [0.01, 0.04, 0.03, 0.005, 0.2]
        edges = fevd_network(self.estimates, p_values=p_values, fdr=0.1)
        assert [e.variable for e in edges] == [0, 1, 2, 3]

    @pytest.mark.parametrize(
        "kwargs",
        [{}, {"threshold": 0.1, "p_values": [0.1] * 5}, {"p_values": [0.1]}],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(UsageError):
            fevd_network(self.estimates, **kwargs)


def block_dgp(loading):
    """Two blocks {0, 1} and {2, 3}; shock 0 hits the first, shock 1 the second."""
    block_spec = DgpSpec(
        p=4,
        n=400,
        lags=1,
        k_a=2,
        radius=0.5,
        n_shocks=2,
        shock=1,
        k_b=2,
        k_d=1,
        shock_index=(0, 2),
    )
    slopes = np.zeros((4, 4))
    slopes[:2, :2] = [[0.5, 0.0], [0.3, 0.4]]
    slopes[2:, 2:] = [[0.4, 0.2], [0.0, 0.3]]
    impact = np.array([[1.0, 0.0], [loading, 0.0], [0.0, 1.0], [0.0, 0.6]])
    return GeneratedDgp(
        block_spec, 0, SparseVarModel((slopes,)), impact, np.diag([0, 1.0, 0, 1.0])
    )


def rejects(dgp, seed, variable, shock, delta):
    panel = simulate(dgp, rng=seed)
    fitted = estimate(panel, PipelineConfig(lags=1, shock_index=(0, 2), horizon=2))
    return FevdInference(fitted).test(variable, shock, 2, delta, 0.05).reject


@pytest.mark.slow
class Test_fevd_acceptance:
    """Rejection rates of the FEVD tests; runs for several minutes."""

    def test_size_under_block_separation(self):
        dgp = block_dgp(0.5)
        assert dgp.impulse_responses(2)[1][1, 1] == 0.0
        hits = Parallel(n_jobs=-1)(
            delayed(rejects)(dgp, seed, 1, 1, 0.0) for seed in range(500)
        )
        assert abs(np.mean(hits) - 0.05) <= 0.03

    def test_power_above_delta(self):
        dgp = block_dgp(1.2)
        impulses = dgp.impulse_responses(2)
        psi = ma_coefficients(dgp.model, 2).psi
        share = fevd(impulses, psi, dgp.sigma_eps, 1, 0, 2).value
        assert share == pytest.approx(0.6, abs=0.05)
        hits = Parallel(n_jobs=-1)(
            delayed(rejects)(dgp, seed, 1, 0, 0.2) for seed in range(200)
        )
        assert np.mean(hits) > 0.8
