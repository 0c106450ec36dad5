import dataclasses

import numpy as np
import pytest
import scipy.stats
from joblib import Parallel, delayed
from hdsvar.errors import DataError, DegenerateProjectionError, UsageError
from hdsvar.dgp import DgpSpec, generate, simulate
from hdsvar.desparsified import (
    Desparsifier,
    ImpactInfluence,
    PsiVariance,
    cholesky_gradient,
    commutation_matrix,
    cov_psi,
    desparsified_theta,
    desparsify_psi,
    elimination_matrix,
    local_projection_psi,
    projection_vector,
    se_b_closed_form,
    se_psi,
    se_theta,
    vec,
    vech,
)
from hdsvar.model_core import (
    GammaSolver,
    SparseVarModel,
    TimeSeriesPanel,
    companion,
    ma_coefficients,
    stacked_autocovariance,
)
from hdsvar.pipeline import PipelineConfig, Target, estimate, evaluate
from hdsvar.structural_id import StructuralSpec, cholesky_factor, identify

scalar_ar1 = SparseVarModel((np.array([[0.5]]),))
scalar_gamma = stacked_autocovariance(companion(scalar_ar1), np.eye(1)).matrix
scalar_solver = GammaSolver(scalar_gamma)

var2_first = np.array([[0.4, 0.1, 0.0], [0.0, 0.3, 0.2], [0.1, 0.0, 0.5]])
var2 = SparseVarModel((var2_first, np.diag([0.2, 0.0, -0.1])))
var2_comp = companion(var2)
var2_gamma = stacked_autocovariance(var2_comp, np.eye(3)).matrix
var2_solver = GammaSolver(var2_gamma)
var2_panel = var2.simulate(np.random.default_rng(2).normal(size=(700, 3)), burn_in=200)


def random_spd(k, seed):
    root = np.random.default_rng(seed).normal(size=(k, k))
    return root @ root.T + k * np.eye(k)


class Test_projection_vector:
    def test_projection_normalized(self):
        projection = projection_vector(var2_gamma, 4)
        assert projection.beta[4] == pytest.approx(1.0)
        direction = var2_gamma @ projection.beta
        assert np.allclose(np.delete(direction, 4), 0.0, atol=1e-10)

    def test_projection_scores(self):
        states = var2_panel.states(2)
        projection = projection_vector(GammaSolver(var2_gamma), 1, states)
        assert np.allclose(projection.scores, states @ projection.beta)


class Test_desparsifier:
    def test_true_plug_in_is_consistent(self):
        innovations = np.random.default_rng(0).normal(size=(5200, 1))
        panel = scalar_ar1.simulate(innovations, burn_in=200)
        ma = ma_coefficients(scalar_ar1, 3)
        result = desparsify_psi(panel, ma, scalar_gamma, 2, [(0, 0)])
        assert result.regularized[0] == pytest.approx(0.25)
        assert result[0, 0] == pytest.approx(0.25, abs=0.05)

    def test_zero_plug_in_is_local_projection(self):
        ma = ma_coefficients(SparseVarModel.zeros(3, 2), 4)
        pairs = [(0, 0), (1, 2), (2, 4)]
        desparsified = desparsify_psi(var2_panel, ma, var2_gamma, 3, pairs)
        projected = local_projection_psi(var2_panel, ma, var2_gamma, 3, pairs)
        assert np.allclose(desparsified.values, projected)

    def test_bias_correction_moves_toward_truth(self):
        truth = ma_coefficients(var2, 2).psi[2]
        shrunk = SparseVarModel(tuple(0.5 * a for a in var2.slopes))
        ma = ma_coefficients(shrunk, 2)
        solver = var2_solver
        desparsifier = Desparsifier(var2_panel, ma, solver)
        corrected = desparsifier.psi_matrix(2, 0, [0, 1, 2])
        assert abs(corrected[0, 0] - truth[0, 0]) < abs(ma.psi[2][0, 0] - truth[0, 0])
        assert np.array_equal(corrected[1:], ma.psi[2][1:])

    def test_forecast_errors_shape(self):
        desparsifier = Desparsifier(var2_panel, ma_coefficients(var2, 3), var2_solver)
        assert desparsifier.usable(3) == var2_panel.n - 2 + 1 - 3
        assert desparsifier.forecast_errors(3).shape == (var2_panel.n - 4, 3)

    def test_correction_needs_positive_horizon(self):
        desparsifier = Desparsifier(var2_panel, ma_coefficients(var2, 3), var2_solver)
        with pytest.raises(UsageError):
            desparsifier.correction(0, 0, 0)

    def test_short_sample(self):
        panel = TimeSeriesPanel(np.random.default_rng(1).normal(size=(14, 3)))
        desparsifier = Desparsifier(panel, ma_coefficients(var2, 5), var2_solver)
        with pytest.raises(DataError):
            desparsifier.entry(5, 0, 0)

    def test_degenerate_projection(self):
        panel = TimeSeriesPanel(np.zeros((40, 1)))
        ma = ma_coefficients(scalar_ar1, 1)
        desparsifier = Desparsifier(panel, ma, scalar_solver)
        with pytest.raises(DegenerateProjectionError):
            desparsifier.entry(1, 0, 0)

    def test_dimension_mismatch(self):
        with pytest.raises(DataError):
            Desparsifier(var2_panel, ma_coefficients(var2, 1), scalar_solver)


class Test_psi_variance:
    ma = ma_coefficients(var2, 6)
    variance = PsiVariance(ma, np.eye(3), var2_comp, var2_solver, 200)

    def test_kernel_matches_definition(self):
        v = np.array([0.3, -1.0, 0.5])
        lifted = var2_comp.selector @ v
        inverse = np.linalg.inv(var2_gamma)
        for k, value in enumerate(self.variance.kernel(v, 4)):
            gamma_k = np.linalg.matrix_power(var2_comp.matrix, k) @ var2_gamma
            assert value == pytest.approx(lifted @ inverse @ gamma_k @ inverse @ lifted)

    def test_scalar_first_horizon(self):
        ma = ma_coefficients(scalar_ar1, 2)
        comp = companion(scalar_ar1)
        value = se_psi(ma, np.eye(1), comp, scalar_gamma, 0, 1, np.ones(1), 100)
        assert value ** 2 == pytest.approx((1 - 2 / 100) * 0.75)

    def test_zero_direction(self):
        assert self.variance.se(0, 3, np.zeros(3)) == 0.0
        assert self.variance.cov(0, np.zeros(3), 2, 3) == 0.0

    def test_se_needs_positive_horizon(self):
        with pytest.raises(UsageError):
            self.variance.se(0, 0, np.ones(3))

    def test_cov_diagonal_is_unweighted_variance(self):
        v = np.array([1.0, 0.5, 0.0])
        big = PsiVariance(self.ma, np.eye(3), var2_comp, var2_solver, 10 ** 12)
        expected = self.variance.cov(1, v, 4, 4)
        assert big.se(1, 4, v) ** 2 == pytest.approx(expected, rel=1e-9)

    def test_cov_symmetric(self):
        v = np.array([1.0, 0.5, 0.2])
        args = (self.ma, np.eye(3), var2_comp, var2_gamma, 2, v)
        forward = cov_psi(*args, 2, 5, 200)
        backward = cov_psi(*args, 5, 2, 200)
        assert forward == pytest.approx(backward)


class Test_matrix_helpers:
    @pytest.mark.parametrize("k", [1, 2, 4])
    def test_elimination(self, k):
        matrix = random_spd(k, k)
        assert np.allclose(elimination_matrix(k) @ vec(matrix), vech(matrix))

    @pytest.mark.parametrize("k", [1, 3])
    def test_commutation(self, k):
        matrix = np.arange(k * k, dtype=float).reshape(k, k)
        assert np.allclose(commutation_matrix(k) @ vec(matrix), vec(matrix.T))

    def test_vech_order(self):
        assert np.array_equal(vech(np.array([[1.0, 9.0], [2.0, 3.0]])), [1.0, 2.0, 3.0])


class Test_cholesky_gradient:
    def test_scalar(self):
        gradient = cholesky_gradient(np.array([[2.0]]), 0)
        assert gradient[0, 0] == pytest.approx(-1 / 16)

    @pytest.mark.parametrize("seed", range(100))
    def test_finite_differences(self, seed):
        k = 1 + seed % 4
        sigma = random_spd(k, seed)
        rows, cols = np.tril_indices(k)
        order = np.lexsort((rows, cols))
        rows, cols = rows[order], cols[order]
        r = seed % k

        def target(matrix):
            return np.linalg.inv(cholesky_factor(matrix).T)[:, r]

        gradient = cholesky_gradient(cholesky_factor(sigma), r)
        step = 1e-6
        for s, (a, b) in enumerate(zip(rows, cols)):
            bump = np.zeros((k, k))
            bump[a, b] = bump[b, a] = step
            numeric = (target(sigma + bump) - target(sigma - bump)) / (2 * step)
            scale = max(np.max(np.abs(numeric)), 1e-8)
            assert np.max(np.abs(gradient[:, s] - numeric)) / scale < 1e-5


class Test_impact_influence:
    rng = np.random.default_rng(9)
    residuals = rng.normal(size=(500, 2)) @ np.array([[1.0, 0.0], [0.6, 0.8]]).T
    residuals = residuals - residuals.mean(axis=0)
    structure = identify(residuals, StructuralSpec((0, 1)))

    @pytest.mark.parametrize("r", [0, 1])
    def test_closed_form_full_shock_set(self, r):
        v = np.array([0.7, -0.2])
        influence = ImpactInfluence(self.residuals, self.structure)
        expected = se_b_closed_form(self.residuals, v, r)
        assert influence.se(v, r) == pytest.approx(expected, rel=1e-8)

    def test_influence_is_centered(self):
        influence = ImpactInfluence(self.residuals, self.structure)
        assert abs(np.mean(influence.series(np.array([1.0, 1.0]), 1))) < 1e-10

    def test_non_cholesky_refused(self):
        structure = dataclasses.replace(self.structure, factor=None)
        with pytest.raises(UsageError):
            ImpactInfluence(self.residuals, structure)


class Test_desparsified_theta:
    impact = np.array([[1.0, 0.2], [0.5, 0.0], [0.0, 0.3]])
    impact_re = np.array([[1.0, 0.0], [0.4, 0.0], [0.0, 0.3]])

    def test_impact_horizon(self):
        value = desparsified_theta(None, None, self.impact, self.impact_re, 1, 0, 0)
        assert value == 0.5

    def test_formula(self):
        psi_re = np.eye(3) * 0.5
        psi_de = psi_re + 0.1
        gap = (psi_de[0] - psi_re[0]) @ (self.impact - self.impact_re)[:, 1]
        expected = psi_de[0] @ self.impact[:, 1] - gap
        value = desparsified_theta(psi_de, psi_re, self.impact, self.impact_re, 0, 1, 2)
        assert value == pytest.approx(expected)

    def test_regularized_plug_in(self):
        psi = np.eye(3) * 0.5
        value = desparsified_theta(psi, psi, self.impact, self.impact_re, 2, 1, 1)
        assert value == pytest.approx(psi[2] @ self.impact[:, 1])

    def test_se_theta(self):
        assert se_theta(3.0, 4.0) == 5.0


normality_spec = DgpSpec(
    p=10, n=400, lags=1, k_a=2, radius=0.5, n_shocks=2, shock=0, k_b=3, k_d=2
)


def standardized_errors(dgp, seed):
    """√n(Θ̂^{(de)} − Θ)/ŝe_Θ at (h, j, r) = (1..4, 𝓘_r, r) for every shock r."""
    index = dgp.spec.shock_index
    config = PipelineConfig(lags=1, shock_index=index, horizon=4)
    fitted = estimate(simulate(dgp, rng=seed), config)
    targets = [Target(h, index[r], r) for r in range(len(index)) for h in range(1, 5)]
    table = evaluate(fitted, targets)
    truth = dgp.impulse_responses(4)
    values = np.array([truth[t.horizon][t.variable, t.shock] for t in targets])
    return np.sqrt(fitted.n) * (table.theta_de - values) / table.se


def impact_errors(impact, v, r, n, seed):
    rng = np.random.default_rng(seed)
    residuals = rng.standard_normal((n, 2)) @ impact.T
    residuals = residuals - residuals.mean(axis=0)
    structure = identify(residuals, StructuralSpec((0, 1)))
    deviation = np.sqrt(n) * v @ (structure.impact - impact)[:, r]
    se = ImpactInfluence(residuals, structure).se(v, r)
    return deviation, se, se_b_closed_form(residuals, v, r)


@pytest.mark.slow
class Test_desparsified_acceptance:
    """Monte Carlo checks of the limiting laws; runs for several minutes."""

    def test_standardized_errors_are_normal(self):
        cells = []
        for dgp_seed in (0, 1):
            dgp = generate(normality_spec, dgp_seed)
            draws = Parallel(n_jobs=-1)(
                delayed(standardized_errors)(dgp, seed) for seed in range(500)
            )
            cells.extend(np.array(draws).T)

        passed = []
        for cell in cells:
            assert abs(np.mean(cell)) < 0.15
            assert 0.8 <= np.var(cell) <= 1.25
            passed.append(scipy.stats.kstest(cell, "norm").pvalue > 0.01)
        assert np.mean(passed) >= 0.9

    @pytest.mark.parametrize("r", [0, 1])
    def test_impact_standard_error(self, r):
        impact = np.array([[1.0, 0.0], [0.6, 0.8]])
        v = np.array([0.7, -0.2])
        draws = Parallel(n_jobs=-1)(
            delayed(impact_errors)(impact, v, r, 2000, seed) for seed in range(1000)
        )
        deviations, ses, closed = (np.array(column) for column in zip(*draws))
        assert abs(np.mean(ses) / np.std(deviations) - 1) <= 0.15
        assert np.all(np.abs(ses / closed - 1) <= 0.05)
