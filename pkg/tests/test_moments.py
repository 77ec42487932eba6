"""Tests for the moment series."""

import math
import sys
from unittest import mock

import numpy as np
import pytest
from scipy.integrate import quad

from weibull_ce.data import ModelParams, TestPlan
from weibull_ce.exceptions import (
    ConfigError,
    ModelDomainError,
    QuadratureError,
    SeriesTruncationError,
)
from weibull_ce.model import exposure, first_effective_stage, inv_scale, survival
from weibull_ce.moments import (
    a_func,
    b_func,
    curve,
    mean_norm,
    moments,
    scaled_upper_gamma,
    second_norm,
    table1_grid,
)
from weibull_ce.simulate import open_uniforms, sample_failure_times

from .common import FITTED

# Every other setting of the published grid with K~ up to 1e4, plus the fit
ORACLE_POINTS = [
    (params, (0.0, 1e5)[index % 2])
    for index, params in enumerate(table1_grid()[:36:2])
] + [(FITTED, 0.0), (FITTED, 157680.0)]


def _point_id(point: tuple[ModelParams, float]) -> str:
    params, ts = point
    return (
        f"b{params.beta:g}-n{params.n:g}-v{params.v_th:g}"
        f"-k{params.k_tilde:g}-ts{ts:g}"
    )


def _survival_integral(
    ts: float, params: ModelParams, plan: TestPlan, power: int
) -> float:
    """Integrate power * tau^(power - 1) * S(tau) one step at a time."""
    total = 0.0
    start = 0
    while survival(start, ts, params, plan) > 1e-18:
        piece, _ = quad(
            lambda tau: power * tau ** (power - 1) * survival(tau, ts, params, plan),
            start,
            start + 1,
            epsabs=0.0,
            epsrel=1e-12,
        )
        total += piece
        start += 1
    return total


def _kernel_oracle(s: float, x: float) -> float:
    value, _ = quad(
        lambda u: (u + x) ** (s - 1.0) * math.exp(-u),
        0.0,
        math.inf,
        epsabs=0.0,
        epsrel=1e-13,
    )
    return value


def test_package_keeps_submodule() -> None:
    """Test the package attribute is the module, so its settings can be patched."""
    package = sys.modules["weibull_ce"]
    assert package.moments is sys.modules["weibull_ce.moments"]
    assert package.mean_norm is mean_norm


class TestScaledUpperGamma:
    """Test cases for scaled_upper_gamma."""

    @pytest.mark.parametrize("x", [5.0, 24.5, 25.5, 40.0, 300.0])
    def test_matches_adaptive_quadrature(self, x: float) -> None:
        """Test both evaluation branches against adaptive quadrature."""
        s = 1.0 / 5.016812
        values, _ = scaled_upper_gamma(s, np.array([x]))
        assert values[0] == pytest.approx(_kernel_oracle(s, x), rel=1e-10)

    def test_node_count(self) -> None:
        """Test quadrature nodes are only reported for large offsets."""
        _, nodes = scaled_upper_gamma(0.5, np.array([0.0, 3.0]))
        assert nodes == 0
        _, nodes = scaled_upper_gamma(0.5, np.array([3.0, 60.0]))
        assert nodes >= 64

    def test_non_convergence(self) -> None:
        """Test quadrature failure carries the estimate and its error bound."""
        with (
            mock.patch("weibull_ce.moments.QUADRATURE_RTOL", 0.0),
            mock.patch("weibull_ce.moments.QUADRATURE_MAX_NODES", 64),
            pytest.raises(QuadratureError) as excinfo,
        ):
            scaled_upper_gamma(0.5, np.array([30.0]))
        assert excinfo.value.estimate == pytest.approx(_kernel_oracle(0.5, 30.0))
        assert excinfo.value.error_bound >= 0


class TestAFunc:
    """Test cases for a_func."""

    def test_exponential(self, fitted: ModelParams, plan: TestPlan) -> None:
        """Test the integrand is constant when the shape is one."""
        params = fitted.model_copy(update={"beta": 1.0})
        tau, ts = 12.5, 157680
        eps0 = exposure(0, ts, params, plan)
        expected = math.exp(eps0 - exposure(tau, ts, params, plan))
        assert a_func(tau, ts, params, plan) == pytest.approx(expected, rel=1e-12)

    def test_gamma_half(self, plan: TestPlan) -> None:
        """Test zero exposure with shape two gives Gamma(1/2)."""
        params = ModelParams(beta=2, n=1, zeta=1, v_th=0.5)
        assert a_func(1.0, 0.0, params, plan) == pytest.approx(math.sqrt(math.pi))

    def test_before_first_effective_stage(
        self, fitted: ModelParams, plan: TestPlan
    ) -> None:
        """Test times before stage k are rejected."""
        with pytest.raises(ModelDomainError):
            a_func(1.0, 0.0, fitted, plan)


class TestBFunc:
    """Test cases for b_func."""

    def test_gamma_two(self, plan: TestPlan) -> None:
        """Test the exponential case with nothing accrued gives Gamma(2)."""
        params = ModelParams(beta=1, n=1, zeta=1, v_th=0.0)
        assert b_func(2, 0.0, 0.0, params, plan) == pytest.approx(1.0)

    def test_fitted_first_stage(self, fitted: ModelParams, plan: TestPlan) -> None:
        """Test B_k at the end of stage k against adaptive quadrature."""
        ts = 157680
        k = first_effective_stage(fitted, plan)
        tau = k - 1
        beta = fitted.beta
        z0 = exposure(0, ts, fitted, plan) ** beta
        x = exposure(tau, ts, fitted, plan) ** beta
        c_i = exposure(k - 2, ts, fitted, plan) - (k - 2) * inv_scale(k, fitted, plan)

        def integrand(u: float) -> float:
            return (
                ((u + x) ** (1 / beta) - c_i) * (u + x) ** (1 / beta - 1) * math.exp(-u)
            )

        head, _ = quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1e-12)
        tail, _ = quad(integrand, 1.0, math.inf, epsabs=0.0, epsrel=1e-12)
        expected = math.exp(z0 - x) * (head + tail)
        assert b_func(k, tau, ts, fitted, plan) == pytest.approx(expected, rel=1e-8)

    def test_outside_stage(self, fitted: ModelParams, plan: TestPlan) -> None:
        """Test tau must lie within stage i."""
        with pytest.raises(ModelDomainError):
            b_func(5, 4.5, 0.0, fitted, plan)


class TestMoments:
    """Test cases for the mean and second moment."""

    def test_mean_survival_integral(self) -> None:
        """Test the mean against the integrated survival function."""
        params = ModelParams(beta=2, n=1, zeta=1, v_th=0.0, k0=1e3)
        plan = TestPlan(dv=0.39)
        expected = _survival_integral(0.0, params, plan, 1)
        assert mean_norm(0.0, params, plan) == pytest.approx(expected, rel=1e-6)

    def test_second_survival_integral(self) -> None:
        """Test the second moment against 2 * int tau S(tau) dtau."""
        params = ModelParams(beta=2, n=2, zeta=1, v_th=0.5, k0=1e4)
        plan = TestPlan(dv=0.39)
        expected = _survival_integral(1e5, params, plan, 2)
        assert second_norm(1e5, params, plan) == pytest.approx(expected, rel=1e-6)

    @pytest.mark.parametrize("point", ORACLE_POINTS, ids=map(_point_id, ORACLE_POINTS))
    def test_survival_integral_grid(self, point: tuple[ModelParams, float]) -> None:
        """Test both moments against the survival integral."""
        params, ts = point
        plan = TestPlan()
        result = moments(ts, params, plan)
        assert result.mean_norm == pytest.approx(
            _survival_integral(ts, params, plan, 1), rel=1e-6
        )
        assert result.second_norm == pytest.approx(
            _survival_integral(ts, params, plan, 2), rel=1e-6
        )

    @pytest.mark.parametrize("point", ORACLE_POINTS, ids=map(_point_id, ORACLE_POINTS))
    def test_monte_carlo(
        self, point: tuple[ModelParams, float], plan: TestPlan
    ) -> None:
        """Test both moments against a million inversion samples."""
        params, ts = point
        rng = np.random.default_rng(20240611)
        samples = sample_failure_times(ts, params, plan, open_uniforms(rng, 1_000_000))
        result = moments(ts, params, plan)
        se_mean = samples.std(ddof=1) / math.sqrt(samples.size)
        se_second = (samples**2).std(ddof=1) / math.sqrt(samples.size)
        assert abs(result.mean_norm - samples.mean()) < 4 * se_mean
        assert abs(result.second_norm - np.mean(samples**2)) < 4 * se_second

    def test_invariants(self, fitted: ModelParams, plan: TestPlan) -> None:
        """Test the mean lies past stage k - 2 and the variance is nonnegative."""
        result = moments(946080, fitted, plan)
        k = first_effective_stage(fitted, plan)
        assert result.mean_norm >= k - 2
        assert result.second_norm >= result.mean_norm**2 * (1 - 1e-10)
        assert result.sd_norm == pytest.approx(
            math.sqrt(result.second_norm - result.mean_norm**2)
        )

    def test_memoryless(self, plan: TestPlan) -> None:
        """Test the exponential case is unaffected by prior use."""
        params = ModelParams(beta=1, n=1.6, zeta=0.55, v_th=0.2)
        fresh = moments(0.0, params, plan)
        used = moments(1e6, params, plan)
        assert used.mean_norm == pytest.approx(fresh.mean_norm, rel=1e-9)
        assert used.sd_norm == pytest.approx(fresh.sd_norm, rel=1e-6)

    def test_single_stage(self, plan: TestPlan) -> None:
        """Test a sharp stage k confines the failure time to one step."""
        params = ModelParams(beta=2, n=1, zeta=1, v_th=0.5, k0=1e-3)
        result = moments(0.0, params, plan)
        k = first_effective_stage(params, plan)
        assert k - 2 <= result.mean_norm <= k - 1
        assert result.sd_norm**2 <= 0.25
        assert result.stages_used == k

    def test_truncation(self, plan: TestPlan) -> None:
        """Test the stage cap stops a slowly converging series."""
        params = ModelParams(beta=2, n=1, zeta=1, v_th=0.0, k0=1e6)
        with (
            mock.patch("weibull_ce.moments.SERIES_STAGE_CAP", 256),
            pytest.raises(SeriesTruncationError) as excinfo,
        ):
            moments(0.0, params, plan)
        assert excinfo.value.partial_sum > 0


class TestCurve:
    """Test cases for curve and the published grid."""

    def test_single_point(self, plan: TestPlan) -> None:
        """Test a one-point grid gives one nondegenerate row."""
        params = ModelParams(beta=3, n=2, zeta=1, v_th=0.5, k0=1e4)
        rows = curve([0.0], params, plan)
        assert len(rows) == 1
        assert rows[0].sd_norm > 0

    def test_empty_grid(self, fitted: ModelParams, plan: TestPlan) -> None:
        """Test an empty grid is a configuration error."""
        with pytest.raises(ConfigError):
            curve([], fitted, plan)

    def test_table1_grid(self) -> None:
        """Test the published grid has 54 settings in K~, v_th, beta, n order."""
        grid = table1_grid()
        assert len(grid) == 54
        assert grid[0] == ModelParams(beta=2, n=1, zeta=1, v_th=0.0, k0=1e3)
        assert grid[-1] == ModelParams(beta=3, n=3, zeta=1, v_th=0.9, k0=1e5)
        assert {params.zeta for params in grid} == {1.0}

    def test_table1_curves(self, plan: TestPlan) -> None:
        """Test every published setting yields a curve that never rises."""
        ts_grid = [0.0, 1e3, 1e4, 1e5, 1e6]
        for params in table1_grid():
            means = [row.mean_norm for row in curve(ts_grid, params, plan)]
            assert all(b <= a * (1 + 1e-9) for a, b in zip(means, means[1:]))

    def test_exponential_curve_is_flat(self, plan: TestPlan) -> None:
        """Test the exponential case gives a constant curve."""
        params = ModelParams(beta=1, n=2, zeta=1, v_th=0.5, k0=1e4)
        rows = curve([0.0, 1e4, 1e5], params, plan)
        assert rows[2].mean_norm == pytest.approx(rows[0].mean_norm, rel=1e-9)
        assert rows[2].sd_norm == pytest.approx(rows[0].sd_norm, rel=1e-6)
