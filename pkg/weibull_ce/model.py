"""
Normalized Weibull cumulative exposure model with a threshold.

All times are in units of the step length: tau = 0 is the start of the test
and stage i (i >= 2) covers (i - 2, i - 1] at stress (i - 1) * dv. Stages
below the first effective stage k add no exposure.
"""

from __future__ import annotations

import math
from typing import Literal, NewType

import numpy as np

from .data import ModelParams, TestPlan
from .exceptions import ModelDomainError

Exposure = NewType("Exposure", float)

PRIOR: Literal["prior"] = "prior"


def first_effective_stage(params: ModelParams, plan: TestPlan) -> int:
    """Return the least k >= 2 with (k - 1) * dv > v_th."""
    k = max(2, math.floor(params.v_th / plan.dv) + 2)
    # floor can be off by one at exact multiples
    while k > 2 and (k - 2) * plan.dv > params.v_th:
        k -= 1
    while (k - 1) * plan.dv <= params.v_th:
        k += 1
    return k


def prior_rate(params: ModelParams, plan: TestPlan) -> float:
    """Exposure per unit of prior-use time at the normal stress."""
    margin = plan.vs - params.v_th
    if margin <= 0:
        msg = f"Normal stress {plan.vs} does not exceed the threshold {params.v_th}"
        raise ModelDomainError(msg)
    return margin**params.n / params.k_tilde


def inv_scale(
    stage: int | Literal["prior"], params: ModelParams, plan: TestPlan
) -> float:
    """Return dt / phi(V) for the prior use or for stage m."""
    if stage == PRIOR:
        return prior_rate(params, plan)
    k = first_effective_stage(params, plan)
    if stage < k:
        msg = f"Stage {stage} is below the first effective stage {k}"
        raise ModelDomainError(msg)
    return ((stage - 1) * plan.dv - params.v_th) ** params.n / params.k_tilde


def stage_rates(params: ModelParams, plan: TestPlan, last_stage: int) -> np.ndarray:
    """
    Rates of stages 2..last_stage.

    Element j belongs to stage j + 2; stages below k have rate 0.
    """
    m = np.arange(2, last_stage + 1, dtype=float)
    margin = (m - 1.0) * plan.dv - params.v_th
    active = margin > 0
    rates = np.zeros_like(m)
    rates[active] = margin[active] ** params.n / params.k_tilde
    return rates


def _check_ts(ts: float) -> None:
    if ts < 0:
        msg = f"Prior exposure must be nonnegative, got {ts}"
        raise ModelDomainError(msg)


def exposure_at(
    taus: np.ndarray | list[float], ts: float, params: ModelParams, plan: TestPlan
) -> np.ndarray:
    """Vectorized exposure at normalized times taus."""
    _check_ts(ts)
    taus = np.asarray(taus, dtype=float)
    if np.any(taus < 0):
        msg = "Normalized time must be nonnegative"
        raise ModelDomainError(msg)
    whole = np.floor(taus).astype(int)
    frac = taus - whole
    last = int(whole.max(initial=0)) + 2
    rates = stage_rates(params, plan, last)
    # cum[j] is the exposure added by the first j full steps
    cum = np.concatenate(([0.0], np.cumsum(rates)))
    return prior_rate(params, plan) * ts + cum[whole] + rates[whole] * frac


def exposure(tau: float, ts: float, params: ModelParams, plan: TestPlan) -> Exposure:
    """Cumulative exposure at normalized time tau for prior exposure ts."""
    return Exposure(float(exposure_at([tau], ts, params, plan)[0]))


def survival(tau: float, ts: float, params: ModelParams, plan: TestPlan) -> float:
    """Probability of surviving past tau given survival to the test start."""
    eps = exposure_at([0.0, tau], ts, params, plan)
    return math.exp(eps[0] ** params.beta - eps[1] ** params.beta)


def cdf_conditional(
    tau: float, ts: float, params: ModelParams, plan: TestPlan
) -> float:
    """G(tau | tau > 0) = 1 - exp(eps(0)^beta - eps(tau)^beta)."""
    eps = exposure_at([0.0, tau], ts, params, plan)
    return -math.expm1(eps[0] ** params.beta - eps[1] ** params.beta)


def stage_probability(
    stage: int, ts: float, params: ModelParams, plan: TestPlan
) -> float:
    """Probability that a specimen fails in the given stage."""
    k = first_effective_stage(params, plan)
    if stage < k:
        msg = f"Stage {stage} is below the first effective stage {k}"
        raise ModelDomainError(msg)
    eps = exposure_at([0.0, stage - 2, stage - 1], ts, params, plan)
    z0, za, zb = eps**params.beta
    return math.exp(z0 - za) * -math.expm1(za - zb)
