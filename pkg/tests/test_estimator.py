"""Tests for the two-stage estimator."""

import logging
from unittest import mock

import numpy as np
import pytest
from pydantic import ValidationError

from weibull_ce import estimator
from weibull_ce.const import DEFAULT_DV
from weibull_ce.data import Dataset, Observation, TestPlan
from weibull_ce.estimator import (
    DAMPING_UNDERFLOW,
    INFEASIBLE_START,
    ITERATION_CAP,
    SINGULAR_JACOBIAN,
    FitConfig,
    FitResult,
    NewtonResult,
    damped_newton,
    fit,
    fit_summary,
    guard_ok,
    profile_stage,
    solve_fixed_threshold,
)
from weibull_ce.exceptions import (
    EstimationError,
    ModelDomainError,
    NewtonConvergenceError,
)

from .common import FITTED, FITTED_LOGLIK

NEAR_FIT = FitConfig(
    init=(FITTED.beta, FITTED.n, FITTED.zeta, FITTED.v_th),
    profile_start=0.94,
    profile_end=0.95,
    profile_step=0.001,
)


def _sqrt2(x: np.ndarray) -> np.ndarray:
    return np.array([x[0] ** 2 - 2.0])


def _sqrt2_jacobian(x: np.ndarray) -> np.ndarray:
    return np.array([[2.0 * x[0]]])


class TestFitConfig:
    """Test cases for FitConfig."""

    def test_default_grid(self) -> None:
        """Test the default sweep covers [0.5, 0.999] in steps of 0.001."""
        grid = FitConfig().profile_grid()
        assert grid.size == 500
        assert (grid[0], grid[1], grid[-1]) == (0.5, 0.501, 0.999)

    def test_single_point_grid(self) -> None:
        """Test a window of zero width is one grid point."""
        config = FitConfig(profile_start=0.9, profile_end=0.9)
        assert config.profile_grid().tolist() == [0.9]

    @pytest.mark.parametrize(
        "settings",
        [
            {"profile_start": 0.9, "profile_end": 0.8},
            {"init": (0.0, 2.0, 1.0, 0.5)},
            {"profile_end": 1.0},
            {"profile_step": 0.0},
            {"max_iter": 0},
        ],
    )
    def test_invalid(self, settings: dict) -> None:
        """Test invalid settings are rejected."""
        with pytest.raises(ValidationError):
            FitConfig(**settings)


class TestDampedNewton:
    """Test cases for damped_newton."""

    def test_scalar_root(self) -> None:
        """Test the residual norms of accepted iterates strictly decrease."""
        result = damped_newton(_sqrt2, _sqrt2_jacobian, [10.0], FitConfig())
        assert result.converged
        assert result.reason is None
        assert result.x[0] == pytest.approx(np.sqrt(2.0))
        assert result.residual_norm <= 1e-8
        assert all(b < a for a, b in zip(result.history, result.history[1:]))
        assert len(result.history) == result.iterations + 1

    def test_coupled_system(self) -> None:
        """Test a two-equation system converges to its positive root."""

        def residual(x: np.ndarray) -> np.ndarray:
            return np.array([x[0] ** 2 + x[1] ** 2 - 4.0, x[0] - x[1]])

        def jacobian(x: np.ndarray) -> np.ndarray:
            return np.array([[2.0 * x[0], 2.0 * x[1]], [1.0, -1.0]])

        result = damped_newton(residual, jacobian, [1.0, 2.0], FitConfig())
        np.testing.assert_allclose(result.x, [np.sqrt(2.0)] * 2, atol=1e-8)

    def test_cubic_root(self) -> None:
        """Test x^3 - 1 converges to its real root from x0 = 2."""
        result = damped_newton(
            lambda x: np.array([x[0] ** 3 - 1.0]),
            lambda x: np.array([[3.0 * x[0] ** 2]]),
            [2.0],
            FitConfig(),
        )
        assert result.converged
        assert result.x[0] == pytest.approx(1.0, abs=1e-10)

    def test_damping_needed(self) -> None:
        """Test (atan x, y) from (2, 1) needs damping to reach the origin."""

        def residual(x: np.ndarray) -> np.ndarray:
            return np.array([np.arctan(x[0]), x[1]])

        def jacobian(x: np.ndarray) -> np.ndarray:
            return np.array([[1.0 / (1.0 + x[0] ** 2), 0.0], [0.0, 1.0]])

        result = damped_newton(residual, jacobian, [2.0, 1.0], FitConfig())
        assert result.converged
        np.testing.assert_allclose(result.x, [0.0, 0.0], atol=1e-10)

        with pytest.raises(NewtonConvergenceError) as excinfo:
            damped_newton(residual, jacobian, [2.0, 1.0], FitConfig(min_damping=1.0))
        assert excinfo.value.result.reason == DAMPING_UNDERFLOW
        assert excinfo.value.result.x.tolist() == [2.0, 1.0]

    def test_singular_jacobian(self) -> None:
        """Test a singular Jacobian stops the solve."""
        with pytest.raises(NewtonConvergenceError) as excinfo:
            damped_newton(
                lambda x: np.array([x[0] ** 2 + 1.0]),
                lambda x: np.array([[2.0 * x[0]]]),
                [0.0],
                FitConfig(),
            )
        assert excinfo.value.result.reason == SINGULAR_JACOBIAN
        assert excinfo.value.result.x.tolist() == [0.0]

    def test_iteration_cap(self) -> None:
        """Test the iteration cap returns the last iterate."""
        config = FitConfig(max_iter=1)
        with pytest.raises(NewtonConvergenceError) as excinfo:
            damped_newton(_sqrt2, _sqrt2_jacobian, [10.0], config)
        result = excinfo.value.result
        assert result.reason == ITERATION_CAP
        assert result.iterations == 1
        assert result.x[0] == pytest.approx(5.1)
        assert not result.converged

    def test_damping_underflow(self) -> None:
        """Test an ascent direction exhausts the damping factor."""
        with pytest.raises(NewtonConvergenceError) as excinfo:
            damped_newton(
                lambda x: np.array([x[0]]),
                lambda x: np.array([[-1.0]]),
                [1.0],
                FitConfig(),
            )
        assert excinfo.value.result.reason == DAMPING_UNDERFLOW

    def test_infeasible_start(self) -> None:
        """Test an infeasible or failing starting point."""
        with pytest.raises(NewtonConvergenceError) as excinfo:
            damped_newton(
                _sqrt2, _sqrt2_jacobian, [1.0], FitConfig(), lambda x: x[0] > 2
            )
        assert excinfo.value.result.reason == INFEASIBLE_START

        def failing(x: np.ndarray) -> np.ndarray:
            raise ModelDomainError("outside the domain")

        with pytest.raises(NewtonConvergenceError) as excinfo:
            damped_newton(failing, _sqrt2_jacobian, [1.0], FitConfig())
        assert excinfo.value.result.reason == INFEASIBLE_START

    def test_feasible_region_respected(self) -> None:
        """Test steps never leave the feasible region."""
        with pytest.raises(NewtonConvergenceError) as excinfo:
            damped_newton(
                lambda x: np.array([x[0] + 1.0]),
                lambda x: np.array([[1.0]]),
                [1.0],
                FitConfig(max_iter=20),
                lambda x: x[0] > 0,
            )
        result = excinfo.value.result
        assert result.x[0] > 0
        assert all(b < a for a, b in zip(result.history, result.history[1:]))


class TestProfile:
    """Test cases for the v_th profile stage."""

    @pytest.mark.parametrize(
        ("v_th", "plan", "expected"),
        [
            (0.5, TestPlan(), True),
            (0.78, TestPlan(dv=0.39), True),
            (0.78 - 1e-13, TestPlan(dv=0.39), False),
            (2 * DEFAULT_DV - 1e-13, TestPlan(), False),
            (2 * DEFAULT_DV, TestPlan(), True),
            (0.95, TestPlan(vs=0.9), False),
            (1.0, TestPlan(), False),
        ],
    )
    def test_guard(self, v_th: float, plan: TestPlan, expected: bool) -> None:
        """Test thresholds too close to a stress level are refused."""
        assert guard_ok(v_th, plan) is expected

    def test_fixed_threshold(self, table2: Dataset) -> None:
        """Test the sub-solve at the published threshold."""
        x0 = 1.05 * FITTED.as_vector()[:3]
        result = solve_fixed_threshold(table2, FITTED.v_th, x0, FitConfig())
        assert result.converged
        np.testing.assert_allclose(
            result.x, [FITTED.beta, FITTED.n, FITTED.zeta], rtol=1e-3
        )

    def test_narrow_window(self, table2: Dataset) -> None:
        """Test the sweep picks the grid point nearest the estimate."""
        profile = profile_stage(table2, NEAR_FIT)
        assert len(profile.points) == 11
        assert profile.best.v_th == pytest.approx(0.944)
        assert profile.best.loglik == max(point.loglik for point in profile.points)

    def test_every_point_fails(self, caplog: pytest.LogCaptureFixture) -> None:
        """Test the sweep fails when no threshold admits the data."""
        data = Dataset(observations=[Observation(ts=0, fail_stage_start=0)])
        config = FitConfig(profile_start=0.5, profile_end=0.52, profile_step=0.01)
        with (
            caplog.at_level(logging.WARNING, logger="weibull_ce"),
            pytest.raises(EstimationError),
        ):
            profile_stage(data, config)
        assert caplog.text.count("Skipping v_th") == 3


class TestFit:
    """Test cases for fit."""

    def test_published_estimates(self, table2_fit: FitResult) -> None:
        """Test the bundled data set reproduces the published fit."""
        assert table2_fit.converged
        assert table2_fit.warnings == []
        params = table2_fit.params
        np.testing.assert_allclose(
            params.as_vector(), FITTED.as_vector(), rtol=1e-3
        )
        assert table2_fit.loglik == pytest.approx(FITTED_LOGLIK, abs=1e-3)
        assert table2_fit.residual_norm <= 1e-8
        best = max(point.loglik for point in table2_fit.profile_trace)
        assert best <= table2_fit.loglik + 1e-9

    def test_narrow_window(self, table2: Dataset) -> None:
        """Test a fit started near the estimate lands on it."""
        result = fit(table2, NEAR_FIT)
        np.testing.assert_allclose(
            result.params.as_vector(), FITTED.as_vector(), rtol=1e-3
        )

    def test_refit_from_estimate(self, table2: Dataset) -> None:
        """Test a fit started at its own estimate needs at most one step."""
        config = FitConfig(init=NEAR_FIT.init, profile_start=0.944, profile_end=0.944)
        first = fit(table2, config)
        assert first.converged
        params = first.params
        again = fit(
            table2,
            FitConfig(
                init=(params.beta, params.n, params.zeta, params.v_th),
                profile_start=params.v_th,
                profile_end=params.v_th,
            ),
        )
        assert again.converged
        assert again.iterations <= 1
        np.testing.assert_allclose(
            again.params.as_vector(), params.as_vector(), rtol=1e-9
        )

    def test_profile_step_independent(self, table2: Dataset) -> None:
        """Test halving the profile step leaves the estimate unchanged."""
        window = {"init": NEAR_FIT.init, "profile_start": 0.93, "profile_end": 0.96}
        coarse = fit(table2, FitConfig(**window, profile_step=0.001))
        fine = fit(table2, FitConfig(**window, profile_step=0.0005))
        np.testing.assert_allclose(
            fine.params.as_vector(), coarse.params.as_vector(), rtol=1e-4
        )

    def test_empty(self) -> None:
        """Test an empty data set cannot be fitted."""
        with pytest.raises(EstimationError):
            fit(Dataset())

    def test_not_converged(self, table2: Dataset) -> None:
        """Test a failed full solve is reported, not raised."""
        real = estimator.damped_newton

        def full_fails(residual, jacobian, x0, config, feasible=None):
            if len(x0) < 4:
                return real(residual, jacobian, x0, config, feasible)
            result = NewtonResult(
                x=np.array(x0, dtype=float),
                residual=np.ones(4),
                iterations=config.max_iter,
                converged=False,
                reason=ITERATION_CAP,
            )
            raise NewtonConvergenceError("Damped Newton failed", result)

        with mock.patch.object(estimator, "damped_newton", full_fails):
            result = fit(table2, NEAR_FIT)
        assert not result.converged
        assert result.warnings == ["Damped Newton failed"]
        assert result.params.v_th == pytest.approx(0.944)

    def test_small_beta_warning(self, table2: Dataset) -> None:
        """Test an estimated shape below one is flagged."""
        real = estimator.damped_newton

        def full_small_beta(residual, jacobian, x0, config, feasible=None):
            if len(x0) < 4:
                return real(residual, jacobian, x0, config, feasible)
            return NewtonResult(
                x=np.array([0.8, 1.5, 0.5, 0.9]),
                residual=np.zeros(4),
                iterations=2,
                converged=True,
            )

        with mock.patch.object(estimator, "damped_newton", full_small_beta):
            result = fit(table2, NEAR_FIT)
        assert result.converged
        assert len(result.warnings) == 1
        assert "spurious root" in result.warnings[0]

    def test_summary(self, table2_fit: FitResult) -> None:
        """Test the flat report carries the estimates and the trace."""
        summary = fit_summary(table2_fit)
        assert summary["beta"] == table2_fit.params.beta
        assert summary["k0"] == 1e4
        assert summary["converged"] is True
        assert len(summary["profile"]) == len(table2_fit.profile_trace)
        assert set(summary["profile"][0]) == {
            "v_th",
            "loglik",
            "beta",
            "n",
            "zeta",
            "iterations",
        }

