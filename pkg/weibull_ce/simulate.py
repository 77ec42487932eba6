"""Inversion sampling and the parametric bootstrap goodness-of-fit test."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from pydantic import BaseModel

from .const import (
    ATTEMPT_FACTOR,
    GROUP_SURVIVAL_TOL,
    LOGGER,
    PARAM_NAMES,
    SERIES_CHUNK,
    SERIES_STAGE_CAP,
)
from .coordinator import ReplicateCoordinator
from .data import (
    BinSpec,
    Dataset,
    DesignTemplate,
    ModelParams,
    Observation,
    TestPlan,
    format_ts,
)
from .estimator import FitConfig, fit
from .exceptions import (
    ModelDomainError,
    SeriesTruncationError,
    SimulationError,
    WeibullCeError,
)
from .model import exposure_at, first_effective_stage, prior_rate

if TYPE_CHECKING:
    from collections.abc import Sequence

type Seed = int | np.random.SeedSequence | np.random.Generator


def open_uniforms(rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniform draws on the open interval (0, 1)."""
    u = rng.random(size)
    zeros = u == 0
    while np.any(zeros):
        u[zeros] = rng.random(int(zeros.sum()))
        zeros = u == 0
    return u


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for replicate `index` of a study seeded with `seed`."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _test_exposure(
    ts: float, params: ModelParams, plan: TestPlan, u: np.ndarray
) -> np.ndarray:
    """Exposure the test must add before failure, q - eps(0), per uniform."""
    eps0 = prior_rate(params, plan) * ts
    hazard = -np.log1p(-u)
    if eps0 == 0:
        return hazard ** (1.0 / params.beta)
    z0 = eps0**params.beta
    return eps0 * np.expm1(np.log1p(hazard / z0) / params.beta)


def _stage_cumulative(
    params: ModelParams, plan: TestPlan, k: int, needed: float
) -> np.ndarray:
    """Cumulative rates of stages k, k+1, ... until the total reaches `needed`."""
    cum = np.zeros(0)
    first = k
    while cum.size == 0 or cum[-1] < needed:
        if first - k >= SERIES_STAGE_CAP:
            msg = f"Exposure {needed} not reached within {SERIES_STAGE_CAP} stages"
            raise SeriesTruncationError(msg, partial_sum=float(cum[-1]))
        stages = np.arange(first, first + SERIES_CHUNK, dtype=float)
        rates = ((stages - 1) * plan.dv - params.v_th) ** params.n / params.k_tilde
        base = cum[-1] if cum.size else 0.0
        cum = np.concatenate((cum, base + np.cumsum(rates)))
        first += SERIES_CHUNK
    return cum


def _check_uniforms(u: np.ndarray) -> None:
    if np.any((u <= 0) | (u >= 1)):
        msg = "Uniform draws must lie in the open interval (0, 1)"
        raise ModelDomainError(msg)


def sample_failures(
    ts: float, params: ModelParams, plan: TestPlan, u: np.ndarray | Sequence[float]
) -> np.ndarray:
    """Stage-start values t_{l-1}/dt obtained by inverting the conditional CDF."""
    u = np.asarray(u, dtype=float)
    _check_uniforms(u)
    k = first_effective_stage(params, plan)
    target = _test_exposure(ts, params, plan, u)
    cum = _stage_cumulative(params, plan, k, float(target.max(initial=0.0)))
    return k - 2 + np.searchsorted(cum, target, side="left")


def sample_failure(ts: float, params: ModelParams, plan: TestPlan, u: float) -> int:
    """Stage-start value for a single uniform u in (0, 1)."""
    return int(sample_failures(ts, params, plan, [u])[0])


def sample_failure_times(
    ts: float, params: ModelParams, plan: TestPlan, u: np.ndarray | Sequence[float]
) -> np.ndarray:
    """Continuous normalized failure times; exposure is linear within a stage."""
    u = np.asarray(u, dtype=float)
    _check_uniforms(u)
    k = first_effective_stage(params, plan)
    target = _test_exposure(ts, params, plan, u)
    cum = _stage_cumulative(params, plan, k, float(target.max(initial=0.0)))
    index = np.searchsorted(cum, target, side="left")
    before = np.where(index > 0, cum[np.maximum(index - 1, 0)], 0.0)
    rates = cum[index] - before
    return (k - 2 + index) + (target - before) / rates


def generate_dataset(
    template: DesignTemplate, params: ModelParams, plan: TestPlan, seed: Seed
) -> Dataset:
    """Simulate one observation per template slot."""
    rng = np.random.default_rng(seed)
    observations = []
    for row in template.rows:
        starts = sample_failures(row.ts, params, plan, open_uniforms(rng, row.count))
        observations += [
            Observation(ts=row.ts, fail_stage_start=int(start)) for start in starts
        ]
    return Dataset(observations=observations, plan=plan)


def expected_stage_start(ts: float, params: ModelParams, plan: TestPlan) -> float:
    """E[t_{l-1}/dt], the mean recorded stage start, as sum_s P(start >= s)."""
    k = first_effective_stage(params, plan)
    z0 = (prior_rate(params, plan) * ts) ** params.beta
    total = float(k - 2)
    first = k - 1
    while True:
        bounds = np.arange(first, first + SERIES_CHUNK)
        surv = np.exp(z0 - exposure_at(bounds, ts, params, plan) ** params.beta)
        total += float(surv.sum())
        if surv[-1] < GROUP_SURVIVAL_TOL:
            return total
        first += SERIES_CHUNK
        if first - k > SERIES_STAGE_CAP:
            msg = f"Stage-start series did not converge for ts={ts}"
            raise SeriesTruncationError(msg, partial_sum=total)


def group_probabilities(
    ts: float, params: ModelParams, plan: TestPlan, bins: BinSpec
) -> np.ndarray:
    """
    Probability of each bin of stage-start values.

    Bin i covers normalized times (e_{i-1}, e_i] with e_0 = 0, evaluated
    through the conditional cdf at the edges; the tail is the exact survival
    past the last edge.
    """
    edges = np.asarray(bins.edges[ts], dtype=float)
    x = exposure_at(np.concatenate(([0.0], edges)), ts, params, plan) ** params.beta
    surv = np.exp(x[0] - x)
    inner = surv[:-1] * -np.expm1(x[:-1] - x[1:])
    return np.append(inner, surv[-1])


def chi_square_stat(
    counts: np.ndarray | Sequence[int], probs: np.ndarray | Sequence[float], n_d: int
) -> float:
    """Pearson statistic sum (m_i - N p_i)^2 / (N p_i)."""
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if counts.sum() != n_d:
        msg = f"Bin counts sum to {int(counts.sum())}, expected {n_d}"
        raise ModelDomainError(msg)
    if np.any((probs <= 0) & (counts > 0)):
        msg = "Observed count in a bin of zero probability"
        raise ModelDomainError(msg)
    expected = n_d * probs
    used = probs > 0
    return float(np.sum((counts[used] - expected[used]) ** 2 / expected[used]))


class GroupStatistic(BaseModel):
    """Binned counts, model probabilities and statistic at one prior exposure."""

    ts: float
    labels: list[str]
    counts: list[int]
    probabilities: list[float]
    statistic: float


def group_statistics(
    data: Dataset, params: ModelParams, bins: BinSpec
) -> list[GroupStatistic]:
    """Chi-square statistic of each binned prior exposure of data."""
    groups = []
    for ts in bins.ts_values:
        starts = data.starts_for(ts)
        if starts.size == 0:
            msg = f"No observations at ts={format_ts(ts)} for the requested bins"
            raise ModelDomainError(msg)
        counts = bins.counts(ts, starts)
        probs = group_probabilities(ts, params, data.plan, bins)
        groups.append(
            GroupStatistic(
                ts=ts,
                labels=bins.labels(ts),
                counts=counts.tolist(),
                probabilities=probs.tolist(),
                statistic=chi_square_stat(counts, probs, starts.size),
            )
        )
    return groups


class ParameterSpread(BaseModel):
    """Bias and variance of one parameter over the bootstrap estimates."""

    name: str
    fitted: float
    mean: float
    bias: float
    variance: float | None


class GofReport(BaseModel):
    """Observed statistics and the parametric bootstrap comparison."""

    groups: list[GroupStatistic]
    replicates_requested: int = 0
    replicates_used: int = 0
    failed_fits: int = 0
    refit_probabilities: bool = True
    exceedances: dict[str, int] = {}
    simultaneous: int = 0
    # simultaneous exceedances over replicates used
    p_value_bound: float | None = None
    # (simultaneous + 1) over replicates used, capped at one
    p_value_conservative: float | None = None
    spread: list[ParameterSpread] = []


@dataclass(frozen=True)
class ReplicateOutcome:
    """Refitted parameters and statistics of one bootstrap replicate."""

    index: int
    estimate: np.ndarray | None = None
    statistics: np.ndarray | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.estimate is not None


@dataclass(frozen=True)
class ReplicateTask:
    """Simulate, refit and test one bootstrap data set."""

    seed: int
    template: DesignTemplate
    fitted: ModelParams
    plan: TestPlan
    bins: BinSpec
    fit_config: FitConfig
    refit_probabilities: bool = True

    def __call__(self, index: int) -> ReplicateOutcome:
        """Run replicate `index`."""
        rng = replicate_rng(self.seed, index)
        data = generate_dataset(self.template, self.fitted, self.plan, rng)
        try:
            result = fit(data, self.fit_config)
            if not result.converged:
                return ReplicateOutcome(index=index, error="not converged")
            params = result.params if self.refit_probabilities else self.fitted
            groups = group_statistics(data, params, self.bins)
        except WeibullCeError as exception:
            LOGGER.debug(f"Replicate {index} failed: {exception}")
            return ReplicateOutcome(index=index, error=str(exception))
        return ReplicateOutcome(
            index=index,
            estimate=result.params.as_vector(),
            statistics=np.array([group.statistic for group in groups]),
        )


def _replicate_ok(outcome: ReplicateOutcome) -> bool:
    return outcome.ok


def gof_monte_carlo(  # noqa: PLR0913
    data: Dataset,
    fitted: ModelParams,
    bins: BinSpec,
    template: DesignTemplate,
    replicates: int,
    seed: int,
    fit_config: FitConfig,
    *,
    refit_probabilities: bool = True,
    workers: int | None = 1,
) -> GofReport:
    """
    Chi-square goodness of fit with a parametric bootstrap p-value.

    Replicates are simulated at `fitted` and refitted until `replicates`
    refits succeed; failed refits are counted and left out.
    """
    groups = group_statistics(data, fitted, bins)
    report = GofReport(groups=groups, refit_probabilities=refit_probabilities)
    if replicates == 0:
        return report

    task = ReplicateTask(
        seed=seed,
        template=template,
        fitted=fitted,
        plan=data.plan,
        bins=bins,
        fit_config=fit_config,
        refit_probabilities=refit_probabilities,
    )
    coordinator = ReplicateCoordinator(task, _replicate_ok, workers)
    collected = coordinator.collect(replicates, ATTEMPT_FACTOR * replicates)
    used = len(collected.successes)
    if used == 0:
        msg = f"No successful refit in {collected.attempts} bootstrap replicates"
        raise SimulationError(msg)
    if used < replicates:
        LOGGER.warning(
            f"Only {used} of {replicates} replicates succeeded "
            f"within {collected.attempts} attempts"
        )

    observed = np.array([group.statistic for group in groups])
    simulated = np.array([outcome.statistics for outcome in collected.successes])
    exceed = simulated >= observed[None, :]
    simultaneous = int(np.sum(np.all(exceed, axis=1)))

    estimates = np.array([outcome.estimate for outcome in collected.successes])
    means = estimates.mean(axis=0)
    variances = estimates.var(axis=0, ddof=1) if used > 1 else [None] * 4
    spread = [
        ParameterSpread(
            name=name,
            fitted=float(value),
            mean=float(mean),
            bias=float(mean - value),
            variance=None if var is None else float(var),
        )
        for name, value, mean, var in zip(
            PARAM_NAMES, fitted.as_vector(), means, variances, strict=True
        )
    ]

    return report.model_copy(
        update={
            "replicates_requested": replicates,
            "replicates_used": used,
            "failed_fits": collected.failures,
            "exceedances": {
                format_ts(group.ts): int(count)
                for group, count in zip(groups, exceed.sum(axis=0), strict=True)
            },
            "simultaneous": simultaneous,
            "p_value_bound": simultaneous / used,
            "p_value_conservative": min(1.0, (simultaneous + 1) / used),
            "spread": spread,
        }
    )


def most_variable(report: GofReport) -> tuple[str, str]:
    """Names of the parameters with the largest |bias| and the largest variance."""
    if not report.spread or any(item.variance is None for item in report.spread):
        msg = "Report has no bootstrap spread"
        raise SimulationError(msg)
    bias = max(report.spread, key=lambda item: abs(item.bias))
    variance = max(report.spread, key=lambda item: item.variance or -math.inf)
    return bias.name, variance.name
