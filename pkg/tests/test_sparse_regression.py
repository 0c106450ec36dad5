import numpy as np
import pytest
from hdsvar.config import DEFAULTS
from hdsvar.errors import DataError, UsageError
from hdsvar.model_core import SparseVarModel, TimeSeriesPanel
from hdsvar.sparse_regression import (
    GramLasso,
    LassoProblem,
    adaptive_lasso_row,
    coordinate_descent,
    fit_var,
    penalty_grid,
    soft_threshold,
)


def random_problem(seed, n=80, q=12, penalty=0.1):
    rng = np.random.default_rng(seed)
    design = rng.normal(size=(n, q))
    truth = np.zeros(q)
    truth[:3] = [1.5, -2.0, 0.5]
    response = design @ truth + rng.normal(size=n)
    return LassoProblem(response, design, penalty)


penalties = (0.01, 0.1, 0.5)
problems = [random_problem(seed, penalty=penalties[seed % 3]) for seed in range(100)]

ar_panel = SparseVarModel((np.diag([0.7, -0.5, 0.6, 0.0]),)).simulate(
    np.random.default_rng(11).normal(size=(500, 4)), burn_in=100
)
noise_panel = TimeSeriesPanel(np.random.default_rng(12).normal(size=(300, 3)))


class Test_soft_threshold:
    @pytest.mark.parametrize(
        "value, level, expected",
        [(3.0, 1.0, 2.0), (-3.0, 1.0, -2.0), (0.5, 1.0, 0.0), (-1.0, 1.0, 0.0)],
    )
    def test_soft_threshold(self, value, level, expected):
        assert soft_threshold(value, level) == expected


class Test_coordinate_descent:
    def test_orthonormal_closed_form(self):
        rng = np.random.default_rng(0)
        n, q = 50, 6
        basis, _ = np.linalg.qr(rng.normal(size=(n, q)))
        design = basis * np.sqrt(n)
        response = rng.normal(size=n) * 3
        penalty = 0.4
        solution = coordinate_descent(LassoProblem(response, design, penalty))
        xty = design.T @ response / n
        expected = np.array([soft_threshold(v, penalty / 2) for v in xty])
        assert solution.converged
        assert np.max(np.abs(solution.coefficients - expected)) < 1e-8

    @pytest.mark.parametrize("problem", problems)
    def test_kkt(self, problem):
        solver = GramLasso(problem.design)
        xty = solver.correlations(problem.response)
        solution = solver.solve(xty, problem.penalty, problem.weights)
        assert solution.converged
        violation = solver.kkt_violation(
            xty, solution.coefficients, problem.penalty, problem.weights
        )
        assert violation <= 1e-6

    def test_lambda_max_gives_zero(self):
        problem = problems[0]
        solver = GramLasso(problem.design)
        penalty = solver.lambda_max(problem.response)
        at_max = LassoProblem(problem.response, problem.design, penalty)
        solution = coordinate_descent(at_max)
        assert np.count_nonzero(solution.coefficients) == 0

    def test_zero_penalty_is_least_squares(self):
        problem = problems[0]
        zero = LassoProblem(problem.response, problem.design, 0.0)
        solution = coordinate_descent(zero)
        expected, *_ = np.linalg.lstsq(problem.design, problem.response, rcond=None)
        assert np.allclose(solution.coefficients, expected, atol=1e-5)

    def test_infinite_weight_pins_coordinate(self):
        problem = problems[0]
        weights = np.ones(problem.design.shape[1])
        weights[0] = np.inf
        weighted = LassoProblem(problem.response, problem.design, 0.1, weights)
        solution = coordinate_descent(weighted)
        assert solution.coefficients[0] == 0.0

    def test_sweep_cap(self):
        problem = problems[0]
        settings = DEFAULTS.replace(lasso_max_iter=1, lasso_tol=0.0)
        solution = coordinate_descent(problem, settings)
        assert not solution.converged
        assert solution.iterations == 1

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"response": np.ones(3), "design": np.ones((4, 2)), "penalty": 0.1},
            {"response": np.ones(4), "design": np.ones((4, 2)), "penalty": -1.0},
            {
                "response": np.ones(4),
                "design": np.ones((4, 2)),
                "penalty": 0.1,
                "weights": -np.ones(2),
            },
        ],
    )
    def test_problem_invalid(self, kwargs):
        with pytest.raises(ValueError):
            LassoProblem(**kwargs)


class Test_penalty_grid:
    def test_grid_shape(self):
        grid = penalty_grid(2.0)
        assert grid.size == DEFAULTS.n_lambda
        assert grid[0] == pytest.approx(2.0)
        assert grid[-1] == pytest.approx(2.0 * DEFAULTS.lambda_ratio)
        assert np.all(np.diff(grid) < 0)

    def test_grid_zero(self):
        assert np.array_equal(penalty_grid(0.0), [0.0])


class Test_adaptive_lasso:
    def test_adaptive_row_selects_support(self):
        problem = random_problem(7, n=200)
        solver = GramLasso(problem.design - problem.design.mean(axis=0))
        response = problem.response - problem.response.mean()
        grid = penalty_grid(solver.lambda_max(response))
        fit = adaptive_lasso_row(solver, response, grid)
        assert fit.converged
        assert set(np.flatnonzero(fit.coefficients)) >= {0, 1}
        assert np.isfinite(fit.bic)

    def test_single_penalty_is_frozen(self):
        problem = random_problem(8)
        solver = GramLasso(problem.design)
        fit = adaptive_lasso_row(solver, problem.response, [0.2])
        assert fit.penalty == 0.2


class Test_fit_var:
    def test_fit_recovers_diagonal(self):
        fit = fit_var(ar_panel, 1)
        slopes = fit.model.slopes[0]
        assert fit.converged
        assert np.allclose(np.diag(slopes)[:3], [0.7, -0.5, 0.6], atol=0.15)
        assert np.max(np.abs(slopes - np.diag(np.diag(slopes)))) < 0.15

    def test_fit_white_noise_near_zero(self):
        fit = fit_var(noise_panel, 1)
        assert np.max(np.abs(fit.model.stacked)) < 0.2

    def test_fit_deterministic_across_workers(self):
        serial = fit_var(ar_panel, 2)
        parallel = fit_var(ar_panel, 2, n_jobs=2)
        assert np.array_equal(serial.model.stacked, parallel.model.stacked)
        assert np.array_equal(serial.penalties, parallel.penalties)

    def test_fit_frozen_penalties(self):
        fit = fit_var(ar_panel, 1)
        frozen = fit_var(ar_panel, 1, penalties=fit.penalties)
        assert np.array_equal(frozen.penalties, fit.penalties)
        assert np.allclose(frozen.model.stacked, fit.model.stacked, atol=1e-4)

    def test_fit_shared_grid(self):
        fit = fit_var(ar_panel, 1, lambda_grid=[0.5, 0.1, 0.01])
        assert set(fit.penalties) <= {0.5, 0.1, 0.01}

    def test_fit_degenerate_row(self):
        noise = np.random.default_rng(1).normal(size=50)
        data = np.column_stack([noise, np.full(50, 2.0)])
        fit = fit_var(TimeSeriesPanel(data), 1)
        assert fit.rows[1].note == "degenerate response"
        assert np.count_nonzero(fit.model.stacked[1]) == 0

    @pytest.mark.parametrize("grid", [[], [0.1, 0.5], [0.5, -0.1]])
    def test_fit_bad_grid(self, grid):
        with pytest.raises(UsageError):
            fit_var(ar_panel, 1, lambda_grid=grid)

    def test_fit_bad_penalties(self):
        with pytest.raises(UsageError):
            fit_var(ar_panel, 1, penalties=[0.1])

    def test_fit_too_short(self):
        with pytest.raises(DataError):
            fit_var(TimeSeriesPanel(np.zeros((3, 2))), 2)
