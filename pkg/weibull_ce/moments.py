"""Mean and second moment of T/dt under the conditional distribution."""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import product
from typing import TYPE_CHECKING

import numpy as np
from numpy.polynomial.laguerre import laggauss
from pydantic import BaseModel
from scipy.special import gamma, gammaincc

from .const import (
    LOGGER,
    QUADRATURE_MAX_NODES,
    QUADRATURE_RTOL,
    QUADRATURE_START_NODES,
    QUADRATURE_SWITCH,
    SERIES_CHUNK,
    SERIES_STAGE_CAP,
    SERIES_SURVIVAL_TOL,
    TABLE1_BETA,
    TABLE1_K_TILDE,
    TABLE1_N,
    TABLE1_V_TH,
    VARIANCE_SLACK,
)
from .data import ModelParams
from .exceptions import (
    ConfigError,
    ModelDomainError,
    QuadratureError,
    SeriesTruncationError,
)
from .model import exposure, first_effective_stage, inv_scale, prior_rate

if TYPE_CHECKING:
    from collections.abc import Iterable

    from .data import TestPlan


class MomentResult(BaseModel):
    """Moments of the normalized failure time for one prior exposure."""

    ts: float
    mean_norm: float
    second_norm: float
    sd_norm: float
    stages_used: int
    quadrature_nodes: int


@lru_cache(maxsize=8)
def laguerre_rule(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Laguerre nodes and weights for the weight e^-u."""
    return laggauss(nodes)


def _laguerre_kernel(s: float, x: np.ndarray) -> tuple[np.ndarray, int]:
    nodes = QUADRATURE_START_NODES
    u, w = laguerre_rule(nodes)
    previous = ((u[None, :] + x[:, None]) ** (s - 1.0)) @ w
    while nodes < QUADRATURE_MAX_NODES:
        nodes *= 2
        u, w = laguerre_rule(nodes)
        estimate = ((u[None, :] + x[:, None]) ** (s - 1.0)) @ w
        change = np.abs(estimate - previous) / np.abs(estimate)
        if np.all(change < QUADRATURE_RTOL):
            LOGGER.debug(f"Laguerre kernel s={s} converged with {nodes} nodes")
            return estimate, nodes
        previous = estimate

    worst = int(np.nanargmax(change))
    msg = (
        f"Gauss-Laguerre quadrature did not reach rtol {QUADRATURE_RTOL} "
        f"with {nodes} nodes (s={s}, x={x[worst]})"
    )
    raise QuadratureError(
        msg,
        estimate=float(estimate[worst]),
        error_bound=float(abs(estimate[worst] - previous[worst])),
    )


def scaled_upper_gamma(s: float, x: np.ndarray) -> tuple[np.ndarray, int]:
    """
    Evaluate int_0^inf (u + x)^(s - 1) e^-u du = e^x Gamma(s, x).

    Small offsets go through the regularized incomplete gamma function, which
    is exact at the u^(s - 1) endpoint singularity; larger offsets use
    Gauss-Laguerre with node doubling. Returns the values and the largest
    node count used (0 when no quadrature was needed).
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    near = x < QUADRATURE_SWITCH
    out[near] = gamma(s) * gammaincc(s, x[near]) * np.exp(x[near])
    nodes = 0
    if np.any(~near):
        out[~near], nodes = _laguerre_kernel(s, x[~near])
    return out, nodes


def _check_tau(tau: float, k: int) -> None:
    if tau < k - 2:
        msg = f"tau={tau} lies before the first effective stage boundary {k - 2}"
        raise ModelDomainError(msg)


def a_func(tau: float, ts: float, params: ModelParams, plan: TestPlan) -> float:
    """A(tau) = exp(eps(0)^b - eps(tau)^b) * int (u + eps(tau)^b)^(1/b - 1) e^-u du."""
    _check_tau(tau, first_effective_stage(params, plan))
    z0 = exposure(0.0, ts, params, plan) ** params.beta
    x = exposure(tau, ts, params, plan) ** params.beta
    kernel, _ = scaled_upper_gamma(1.0 / params.beta, np.array([x]))
    return float(math.exp(z0 - x) * kernel[0])


def b_func(
    i: int, tau: float, ts: float, params: ModelParams, plan: TestPlan
) -> float:
    """B_i(tau), the second-moment analogue of A for stage i."""
    if not i - 2 <= tau <= i - 1:
        msg = f"tau={tau} lies outside stage {i} = [{i - 2}, {i - 1}]"
        raise ModelDomainError(msg)
    rate = inv_scale(i, params, plan)
    c_i = exposure(i - 2, ts, params, plan) - (i - 2) * rate
    z0 = exposure(0.0, ts, params, plan) ** params.beta
    x = np.array([exposure(tau, ts, params, plan) ** params.beta])
    k1, _ = scaled_upper_gamma(1.0 / params.beta, x)
    k2, _ = scaled_upper_gamma(2.0 / params.beta, x)
    return float(math.exp(z0 - x[0]) * (k2[0] - c_i * k1[0]))


def moments(ts: float, params: ModelParams, plan: TestPlan) -> MomentResult:
    """Sum the stage series for E[T/dt] and E[(T/dt)^2]."""
    beta = params.beta
    k = first_effective_stage(params, plan)
    eps0 = prior_rate(params, plan) * ts
    z0 = eps0**beta
    s1, s2 = 1.0 / beta, 2.0 / beta

    mean = float(k - 2)
    second = float((k - 2) ** 2)
    nodes = 0
    eps_start = eps0
    first = k
    while True:
        stages = np.arange(first, first + SERIES_CHUNK)
        rates = ((stages - 1) * plan.dv - params.v_th) ** params.n / params.k_tilde
        eps_b = eps_start + np.cumsum(rates)
        eps_a = np.concatenate(([eps_start], eps_b[:-1]))
        surv_b = np.exp(z0 - eps_b**beta)
        done = np.flatnonzero(surv_b < SERIES_SURVIVAL_TOL)
        stop = int(done[0]) + 1 if done.size else SERIES_CHUNK
        stages, rates = stages[:stop], rates[:stop]
        eps_a, eps_b, surv_b = eps_a[:stop], eps_b[:stop], surv_b[:stop]
        x_a = eps_a**beta
        x_b = eps_b**beta
        surv_a = np.exp(z0 - x_a)

        k1_a, n1 = scaled_upper_gamma(s1, x_a)
        k1_b, n2 = scaled_upper_gamma(s1, x_b)
        k2_a, n3 = scaled_upper_gamma(s2, x_a)
        k2_b, n4 = scaled_upper_gamma(s2, x_b)
        nodes = max(nodes, n1, n2, n3, n4)

        c = eps_a - (stages - 2) * rates
        a_diff = surv_a * k1_a - surv_b * k1_b
        b_diff = surv_a * (k2_a - c * k1_a) - surv_b * (k2_b - c * k1_b)
        flat = rates == 0
        safe = np.where(flat, 1.0, rates)
        mean_terms = np.where(flat, surv_a, a_diff / (beta * safe))
        second_terms = np.where(
            flat,
            surv_a * ((stages - 1.0) ** 2 - (stages - 2.0) ** 2),
            2.0 * b_diff / (beta * safe**2),
        )

        mean += float(np.sum(mean_terms))
        second += float(np.sum(second_terms))
        last = int(stages[-1])
        if done.size:
            break
        if last >= SERIES_STAGE_CAP:
            msg = f"Moment series did not converge within {SERIES_STAGE_CAP} stages"
            raise SeriesTruncationError(msg, partial_sum=mean)
        eps_start = float(eps_b[-1])
        first = last + 1

    variance = second - mean**2
    if variance < 0:
        if variance < -VARIANCE_SLACK * second:
            msg = f"Negative variance {variance} for ts={ts}"
            raise QuadratureError(
                msg, estimate=variance, error_bound=VARIANCE_SLACK * second
            )
        variance = 0.0

    LOGGER.debug(
        f"Moments at ts={ts}: mean={mean}, second={second}, stages={last}, "
        f"nodes={nodes}"
    )
    return MomentResult(
        ts=ts,
        mean_norm=mean,
        second_norm=second,
        sd_norm=math.sqrt(variance),
        stages_used=last,
        quadrature_nodes=nodes,
    )


def mean_norm(ts: float, params: ModelParams, plan: TestPlan) -> float:
    """E[T]/dt."""
    return moments(ts, params, plan).mean_norm


def second_norm(ts: float, params: ModelParams, plan: TestPlan) -> float:
    """E[T^2]/dt^2."""
    return moments(ts, params, plan).second_norm


def curve(
    ts_grid: Iterable[float], params: ModelParams, plan: TestPlan
) -> list[MomentResult]:
    """One MomentResult per prior exposure, in grid order."""
    grid = list(ts_grid)
    if not grid:
        msg = "Curve grid is empty"
        raise ConfigError(msg)
    return [moments(ts, params, plan) for ts in grid]


def table1_grid() -> list[ModelParams]:
    """
    The 54 published curve settings.

    zeta is 1 and k0 carries K~, ordered by K~, v_th, beta, n.
    """
    return [
        ModelParams(beta=beta, n=n, zeta=1.0, v_th=v_th, k0=k_tilde)
        for k_tilde, v_th, beta, n in product(
            TABLE1_K_TILDE, TABLE1_V_TH, TABLE1_BETA, TABLE1_N
        )
    ]
