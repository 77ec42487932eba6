"""Two-stage maximum likelihood estimation: v_th profile, then full Newton."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .const import (
    DEFAULT_INIT,
    DEFAULT_K0,
    DEFAULT_MAX_ITER,
    DEFAULT_MIN_DAMPING,
    DEFAULT_NEWTON_TOL,
    DEFAULT_PROFILE,
    GUARD_BAND,
    LOGGER,
)
from .data import ModelParams
from .exceptions import EstimationError, NewtonConvergenceError, WeibullCeError
from .likelihood import log_likelihood, score_equations, score_jacobian
from .model import first_effective_stage

if TYPE_CHECKING:
    from collections.abc import Callable

    from .data import Dataset, TestPlan

# Newton failure reasons
SINGULAR_JACOBIAN = "singular jacobian"
DAMPING_UNDERFLOW = "damping underflow"
ITERATION_CAP = "iteration cap"
INFEASIBLE_START = "infeasible start"


class FitConfig(BaseModel):
    """Settings of the profile sweep and the Newton solves."""

    model_config = ConfigDict(frozen=True)

    init: tuple[float, float, float, float] = DEFAULT_INIT
    profile_start: float = Field(default=DEFAULT_PROFILE[0], ge=0, lt=1)
    profile_end: float = Field(default=DEFAULT_PROFILE[1], ge=0, lt=1)
    profile_step: float = Field(default=DEFAULT_PROFILE[2], gt=0)
    newton_tol: float = Field(default=DEFAULT_NEWTON_TOL, gt=0)
    max_iter: int = Field(default=DEFAULT_MAX_ITER, ge=1)
    min_damping: float = Field(default=DEFAULT_MIN_DAMPING, gt=0, le=1)
    k0: float = Field(default=DEFAULT_K0, gt=0)

    @model_validator(mode="after")
    def check_window(self) -> FitConfig:
        if self.profile_end < self.profile_start:
            msg = (
                f"Profile window [{self.profile_start}, {self.profile_end}] "
                "is reversed"
            )
            raise ValueError(msg)
        if min(self.init[:3]) <= 0:
            msg = f"Initial beta, n and zeta must be positive, got {self.init}"
            raise ValueError(msg)
        return self

    def profile_grid(self) -> np.ndarray:
        """v_th values alpha_0, alpha_0 + step, ... not exceeding alpha_1."""
        count = math.floor(
            (self.profile_end - self.profile_start) / self.profile_step + 1e-9
        )
        return np.round(
            self.profile_start + self.profile_step * np.arange(count + 1), 12
        )


@dataclass(frozen=True)
class NewtonResult:
    """Outcome of one damped Newton solve."""

    x: np.ndarray
    residual: np.ndarray
    iterations: int
    converged: bool
    reason: str | None = None
    # Euclidean residual norm at each accepted iterate
    history: list[float] = field(default_factory=list)

    @property
    def residual_norm(self) -> float:
        return float(np.max(np.abs(self.residual)))


class ProfilePoint(BaseModel):
    """Sub-estimates and profiled ln L at one fixed v_th."""

    v_th: float
    loglik: float
    beta: float
    n: float
    zeta: float
    iterations: int


@dataclass(frozen=True)
class Profile:
    """Best grid point of a v_th sweep with the full trace."""

    best: ProfilePoint
    points: list[ProfilePoint]


class FitResult(BaseModel):
    """Result of fit."""

    params: ModelParams
    loglik: float
    converged: bool
    iterations: int
    residual_norm: float
    profile_trace: list[ProfilePoint] = []
    warnings: list[str] = []


def _evaluate(
    function: Callable[[np.ndarray], np.ndarray], x: np.ndarray
) -> np.ndarray | None:
    """Evaluate function, mapping model errors and non-finite values to None."""
    try:
        with np.errstate(all="ignore"):
            value = np.asarray(function(x), dtype=float)
    except WeibullCeError as exception:
        LOGGER.debug(f"Evaluation failed at {x}: {exception}")
        return None
    if not np.all(np.isfinite(value)):
        return None
    return value


def damped_newton(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray | list[float],
    config: FitConfig,
    feasible: Callable[[np.ndarray], bool] | None = None,
) -> NewtonResult:
    """
    Solve residual(x) = 0 by Newton steps damped with step halving.

    A step of length s is accepted once
    ||F(x + s d)||_2 < (1 - s/2) ||F(x)||_2 at a feasible point; the solve
    converges when ||F||_inf <= config.newton_tol. Failures raise
    NewtonConvergenceError carrying the last iterate.
    """
    feasible = feasible or (lambda _: True)
    x = np.array(x0, dtype=float)
    history: list[float] = []

    def fail(reason: str, f: np.ndarray, iterations: int) -> NewtonConvergenceError:
        result = NewtonResult(
            x=x,
            residual=f,
            iterations=iterations,
            converged=False,
            reason=reason,
            history=history,
        )
        msg = f"Damped Newton failed ({reason}) after {iterations} iterations"
        return NewtonConvergenceError(msg, result)

    f = _evaluate(residual, x) if feasible(x) else None
    if f is None:
        raise fail(INFEASIBLE_START, np.full(x.shape, np.nan), 0)

    for iteration in range(config.max_iter + 1):
        history.append(float(np.linalg.norm(f)))
        if np.max(np.abs(f)) <= config.newton_tol:
            return NewtonResult(
                x=x, residual=f, iterations=iteration, converged=True, history=history
            )
        if iteration == config.max_iter:
            break

        jac = _evaluate(jacobian, x)
        try:
            if jac is None:
                raise np.linalg.LinAlgError
            direction = -np.linalg.solve(jac, f)
        except np.linalg.LinAlgError:
            raise fail(SINGULAR_JACOBIAN, f, iteration) from None
        if not np.all(np.isfinite(direction)):
            raise fail(SINGULAR_JACOBIAN, f, iteration)

        norm = history[-1]
        step = 1.0
        while True:
            if step < config.min_damping:
                raise fail(DAMPING_UNDERFLOW, f, iteration)
            trial = x + step * direction
            f_trial = _evaluate(residual, trial) if feasible(trial) else None
            if (
                f_trial is not None
                and np.linalg.norm(f_trial) < (1.0 - step / 2.0) * norm
            ):
                break
            step /= 2.0

        LOGGER.debug(
            f"Newton iteration {iteration + 1}: step={step}, "
            f"|F|={float(np.max(np.abs(f_trial)))}"
        )
        x, f = trial, f_trial

    raise fail(ITERATION_CAP, f, config.max_iter)


def guard_ok(v_th: float, plan: TestPlan) -> bool:
    """Whether the first effective stage clears the threshold by the guard band."""
    if not 0 <= v_th < 1:
        return False
    unit = ModelParams(beta=1.0, n=1.0, zeta=1.0, v_th=v_th)
    k = first_effective_stage(unit, plan)
    return (k - 1) * plan.dv - v_th >= GUARD_BAND and plan.vs > v_th


def _feasible_full(plan: TestPlan) -> Callable[[np.ndarray], bool]:
    def feasible(x: np.ndarray) -> bool:
        return bool(np.all(x[:3] > 0)) and guard_ok(float(x[3]), plan)

    return feasible


def _feasible_sub(x: np.ndarray) -> bool:
    return bool(np.all(x > 0))


def solve_fixed_threshold(
    data: Dataset, v_th: float, x0: np.ndarray, config: FitConfig
) -> NewtonResult:
    """Solve the (beta, n, zeta) equations with v_th held fixed."""

    def params_at(x: np.ndarray) -> ModelParams:
        return ModelParams.from_vector([*x, v_th], config.k0)

    return damped_newton(
        lambda x: score_equations(data, params_at(x))[:3],
        lambda x: score_jacobian(data, params_at(x))[:3, :3],
        x0,
        config,
        _feasible_sub,
    )


def profile_stage(data: Dataset, config: FitConfig) -> Profile:
    """Sweep v_th over the profile grid and keep the ln L maximizer."""
    grid = config.profile_grid()
    LOGGER.info(
        f"Profiling v_th over {grid.size} points "
        f"[{config.profile_start}, {config.profile_end}]"
    )
    x = np.array(config.init[:3], dtype=float)
    points: list[ProfilePoint] = []
    for v_th in grid:
        if not guard_ok(float(v_th), data.plan):
            LOGGER.warning(f"Skipping v_th={v_th}: too close to a stress level")
            continue
        try:
            result = solve_fixed_threshold(data, float(v_th), x, config)
            params = ModelParams.from_vector([*result.x, v_th], config.k0)
            loglik = log_likelihood(data, params)
        except WeibullCeError as exception:
            LOGGER.warning(f"Skipping v_th={v_th}: {exception}")
            continue
        x = result.x
        points.append(
            ProfilePoint(
                v_th=float(v_th),
                loglik=loglik,
                beta=params.beta,
                n=params.n,
                zeta=params.zeta,
                iterations=result.iterations,
            )
        )
        LOGGER.debug(f"Profile v_th={v_th}: lnL={loglik}, x={result.x}")

    if not points:
        msg = "Every profile grid point failed"
        raise EstimationError(msg)
    best = max(points, key=lambda point: point.loglik)
    LOGGER.info(f"Profile maximum at v_th={best.v_th} (lnL={best.loglik})")
    return Profile(best=best, points=points)


def fit(data: Dataset, config: FitConfig | None = None) -> FitResult:
    """Profile v_th, then solve all four equations from the best grid point."""
    config = config or FitConfig()
    if len(data) == 0:
        msg = "Cannot fit an empty data set"
        raise EstimationError(msg)

    profile = profile_stage(data, config)
    start = profile.best
    x0 = [start.beta, start.n, start.zeta, start.v_th]
    warnings: list[str] = []

    def params_at(x: np.ndarray) -> ModelParams:
        return ModelParams.from_vector(x, config.k0)

    try:
        result = damped_newton(
            lambda x: score_equations(data, params_at(x)),
            lambda x: score_jacobian(data, params_at(x)),
            x0,
            config,
            _feasible_full(data.plan),
        )
    except NewtonConvergenceError as exception:
        result = exception.result
        warnings.append(str(exception))
        LOGGER.warning(f"Full fit did not converge: {exception}")

    params = params_at(result.x)
    if params.beta < 1:
        warning = f"Estimated beta={params.beta} < 1; possibly a spurious root"
        warnings.append(warning)
        LOGGER.warning(warning)

    LOGGER.info(
        f"Fit {'converged' if result.converged else 'stopped'}: "
        f"{params.model_dump(exclude={'k0'})}"
    )
    return FitResult(
        params=params,
        loglik=log_likelihood(data, params),
        converged=result.converged,
        iterations=result.iterations,
        residual_norm=result.residual_norm,
        profile_trace=profile.points,
        warnings=warnings,
    )


def fit_summary(result: FitResult) -> dict[str, Any]:
    """Flat report of a fit."""
    return {
        **result.params.model_dump(),
        "loglik": result.loglik,
        "converged": result.converged,
        "iterations": result.iterations,
        "residual_norm": result.residual_norm,
        "warnings": result.warnings,
        "profile": [point.model_dump() for point in result.profile_trace],
    }
