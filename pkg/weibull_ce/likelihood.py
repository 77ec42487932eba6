"""
Conditional log-likelihood of interval-censored step-stress data.

The score equations are the simplified ones: component theta equals
(1 / C_theta) * d(ln L)/d(theta) with C = (1, beta/zeta, -beta/zeta,
-beta*n/zeta), so their zero set is the likelihood's stationary set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import numpy.typing as npt

from .const import PARAM_NAMES
from .exceptions import InfeasibleObservationError, ModelDomainError
from .model import first_effective_stage, prior_rate

if TYPE_CHECKING:
    from .data import Dataset, ModelParams, TestPlan

type ScoreVector = npt.NDArray[np.float64]
type ScoreJacobian = npt.NDArray[np.float64]


@dataclass(frozen=True)
class ExposureSums:
    """
    Exposure and its parameter sums at a set of stage boundaries.

    With c_m = (m - 1) * dv - v_th over the effective stages and the prior
    term weighted by ts, s1 = sum c^n ln c, s2 = sum c^n (ln c)^2,
    p0 = sum c^(n-1), p1 = sum c^(n-1) ln c and q0 = sum c^(n-2).
    """

    eps: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    p0: np.ndarray
    p1: np.ndarray
    q0: np.ndarray


def exposure_sums(
    ts: np.ndarray, tau: np.ndarray, params: ModelParams, plan: TestPlan
) -> ExposureSums:
    """Evaluate ExposureSums at integer boundaries tau for prior exposures ts."""
    ts = np.asarray(ts, dtype=float)
    tau = np.asarray(tau, dtype=int)
    prior_rate(params, plan)  # rejects vs <= v_th
    last = int(tau.max(initial=0))

    m = np.arange(2, last + 2, dtype=float)
    c = (m - 1.0) * plan.dv - params.v_th
    active = c > 0
    c_safe = np.where(active, c, 1.0)
    log_c = np.log(c_safe)

    def cumulative(values: np.ndarray) -> np.ndarray:
        return np.concatenate(([0.0], np.cumsum(np.where(active, values, 0.0))))

    n = params.n
    cn = c_safe**n
    cn1 = c_safe ** (n - 1.0)
    cn2 = c_safe ** (n - 2.0)

    cs = plan.vs - params.v_th
    log_cs = np.log(cs)

    s0 = ts * cs**n + cumulative(cn)[tau]
    return ExposureSums(
        eps=s0 / params.k_tilde,
        s1=ts * cs**n * log_cs + cumulative(cn * log_c)[tau],
        s2=ts * cs**n * log_cs**2 + cumulative(cn * log_c**2)[tau],
        p0=ts * cs ** (n - 1.0) + cumulative(cn1)[tau],
        p1=ts * cs ** (n - 1.0) * log_cs + cumulative(cn1 * log_c)[tau],
        q0=ts * cs ** (n - 2.0) + cumulative(cn2)[tau],
    )


def coefficients(params: ModelParams) -> np.ndarray:
    """C_theta with d(eps^beta)/d(theta) = C_theta * delta_theta."""
    beta, n, zeta = params.beta, params.n, params.zeta
    return np.array([1.0, beta / zeta, -beta / zeta, -beta * n / zeta])


def _deltas(sums: ExposureSums, params: ModelParams) -> np.ndarray:
    """Delta functions, shape (4, points); zero where the exposure is zero."""
    beta, k0 = params.beta, params.k0
    positive = sums.eps > 0
    eps = np.where(positive, sums.eps, 1.0)
    eb = eps**beta
    e1 = eps ** (beta - 1.0)
    out = np.stack(
        [eb * np.log(eps), e1 * sums.s1 / k0, eb, e1 * sums.p0 / k0],
    )
    return np.where(positive, out, 0.0)


def _delta_derivatives(sums: ExposureSums, params: ModelParams) -> np.ndarray:
    """d(delta_t1)/d(theta_t2), shape (4, 4, points)."""
    beta, n, zeta, k0 = params.beta, params.n, params.zeta, params.k0
    _, c_n, c_zeta, c_v = coefficients(params)
    positive = sums.eps > 0
    eps = np.where(positive, sums.eps, 1.0)
    log_eps = np.log(eps)
    e1 = eps ** (beta - 1.0)
    e2 = eps ** (beta - 2.0)
    s1 = sums.s1 / k0
    p0 = sums.p0 / k0

    d_beta, d_n, d_zeta, d_v = _deltas(sums, params)

    out = np.empty((4, 4, eps.size))
    out[0] = [
        d_beta * log_eps,
        (c_n * log_eps + 1.0 / zeta) * d_n,
        (c_zeta * log_eps - 1.0 / zeta) * d_zeta,
        (c_v * log_eps - n / zeta) * d_v,
    ]
    out[1] = [
        d_n * log_eps,
        (c_n - 1.0 / zeta) * e2 * s1**2 + e1 * sums.s2 / k0,
        (c_zeta + 1.0 / zeta) * d_n,
        (c_v + n / zeta) * e2 * p0 * s1 - d_v - n * e1 * sums.p1 / k0,
    ]
    out[2] = [d_beta, c_n * d_n, c_zeta * d_zeta, c_v * d_v]
    out[3] = [
        d_v * log_eps,
        (c_n - 1.0 / zeta) * e2 * s1 * p0 + e1 * sums.p1 / k0,
        (c_zeta + 1.0 / zeta) * d_v,
        (c_v + n / zeta) * e2 * p0**2 - (n - 1.0) * e1 * sums.q0 / k0,
    ]
    return np.where(positive, out, 0.0)


@dataclass(frozen=True)
class _Boundaries:
    """Sums at the test start and at both ends of each failure stage."""

    start: ExposureSums
    lower: ExposureSums
    upper: ExposureSums


def _boundaries(data: Dataset, params: ModelParams) -> _Boundaries:
    k = first_effective_stage(params, data.plan)
    starts = data.start_array
    bad = np.flatnonzero(starts < k - 2)
    if bad.size:
        row = int(data.active_rows[bad[0]])
        msg = (
            f"Observation {row} fails in stage {int(starts[bad[0]]) + 2}, "
            f"before the first effective stage {k}"
        )
        raise InfeasibleObservationError(msg, row)

    ts = data.ts_array
    return _Boundaries(
        start=exposure_sums(ts, np.zeros_like(starts), params, data.plan),
        lower=exposure_sums(ts, starts, params, data.plan),
        upper=exposure_sums(ts, starts + 1, params, data.plan),
    )


def _stage_terms(
    bounds: _Boundaries, params: ModelParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Return (x0, xa, xb, 1 - E) with x = eps^beta and E = exp(xa - xb)."""
    x0 = bounds.start.eps**params.beta
    xa = bounds.lower.eps**params.beta
    xb = bounds.upper.eps**params.beta
    one_minus_e = -np.expm1(xa - xb)
    if np.any(one_minus_e <= 0):
        msg = "Failure stage with zero probability (eps^beta does not increase)"
        raise ModelDomainError(msg)
    return x0, xa, xb, one_minus_e


def log_likelihood(data: Dataset, params: ModelParams) -> float:
    """ln L over the active observations of data."""
    if len(data) == 0:
        return 0.0
    bounds = _boundaries(data, params)
    x0, xa, _, one_minus_e = _stage_terms(bounds, params)
    return float(np.sum((x0 - xa) + np.log(one_minus_e)))


def observation_log_likelihood(data: Dataset, params: ModelParams) -> np.ndarray:
    """Per-observation contributions to ln L, aligned with data.active."""
    if len(data) == 0:
        return np.zeros(0)
    bounds = _boundaries(data, params)
    x0, xa, _, one_minus_e = _stage_terms(bounds, params)
    return (x0 - xa) + np.log(one_minus_e)


def delta(
    theta: str, tau_index: int, ts: float, params: ModelParams, plan: TestPlan
) -> float:
    """delta_theta at the stage boundary tau_index for prior exposure ts."""
    if theta not in PARAM_NAMES:
        msg = f"Unknown parameter {theta!r}, expected one of {PARAM_NAMES}"
        raise ValueError(msg)
    if tau_index < 0:
        msg = f"Stage boundary must be nonnegative, got {tau_index}"
        raise ModelDomainError(msg)
    sums = exposure_sums(np.array([ts]), np.array([tau_index]), params, plan)
    if theta == "beta" and sums.eps[0] == 0:
        msg = f"delta_beta needs positive exposure (ln 0) at tau={tau_index}"
        raise ModelDomainError(msg)
    return float(_deltas(sums, params)[PARAM_NAMES.index(theta), 0])


@dataclass(frozen=True)
class _Lambdas:
    """lambda_theta / d_j with the deltas and E_j they are built from."""

    ratio: np.ndarray
    start: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    e: np.ndarray
    one_minus_e: np.ndarray


def _lambdas(bounds: _Boundaries, params: ModelParams) -> _Lambdas:
    _, xa, xb, one_minus_e = _stage_terms(bounds, params)
    e = np.exp(xa - xb)
    da = _deltas(bounds.lower, params)
    db = _deltas(bounds.upper, params)
    return _Lambdas(
        ratio=(-da + db * e) / one_minus_e,
        start=_deltas(bounds.start, params),
        lower=da,
        upper=db,
        e=e,
        one_minus_e=one_minus_e,
    )


def score_equations(data: Dataset, params: ModelParams) -> ScoreVector:
    """Left-hand sides of the four simplified likelihood equations."""
    if len(data) == 0:
        return np.zeros(4)
    lam = _lambdas(_boundaries(data, params), params)
    return np.sum(lam.ratio + lam.start, axis=1)


def score_jacobian(data: Dataset, params: ModelParams) -> ScoreJacobian:
    """
    Jacobian of score_equations, entry [t1, t2] = d(F_t1)/d(theta_t2).

    Not symmetric in general.
    """
    if len(data) == 0:
        return np.zeros((4, 4))
    bounds = _boundaries(data, params)
    lam = _lambdas(bounds, params)
    c = coefficients(params)[None, :, None]

    dd0 = _delta_derivatives(bounds.start, params)
    dda = _delta_derivatives(bounds.lower, params)
    ddb = _delta_derivatives(bounds.upper, params)

    cross = -c * lam.ratio[:, None, :] * lam.ratio[None, :, :]
    lower = dda - c * lam.lower[:, None, :] * lam.lower[None, :, :]
    upper = ddb - c * lam.upper[:, None, :] * lam.upper[None, :, :]
    jac = np.sum(
        cross + (-lower + upper * lam.e) / lam.one_minus_e + dd0,
        axis=2,
    )

    if not np.all(np.isfinite(jac)):
        msg = "Score Jacobian has non-finite entries"
        raise ModelDomainError(msg)
    return jac
