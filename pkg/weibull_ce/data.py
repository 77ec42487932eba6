"""Domain types for weibull-ce."""

from __future__ import annotations

import math
from functools import cached_property
from typing import Any, ClassVar

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    model_serializer,
    model_validator,
)

from .const import DEFAULT_DV, DEFAULT_K0, DEFAULT_VS, PARAM_NAMES


class ModelParams(BaseModel):
    """
    Parameters of the normalized Weibull CE model.

    beta, n, zeta and v_th are estimated; k0 is the fixed normalizer, so the
    scale constant is K = k0 * zeta.
    """

    model_config = ConfigDict(frozen=True)

    beta: float = Field(gt=0)
    n: float = Field(gt=0)
    zeta: float = Field(gt=0)
    v_th: float = Field(ge=0, lt=1)
    k0: float = Field(default=DEFAULT_K0, gt=0)

    @property
    def k_tilde(self) -> float:
        return self.k0 * self.zeta

    def as_vector(self) -> np.ndarray:
        """Return (beta, n, zeta, v_th) as an array."""
        return np.array([self.beta, self.n, self.zeta, self.v_th], dtype=float)

    @classmethod
    def from_vector(cls, x: np.ndarray | list[float], k0: float) -> ModelParams:
        """Build parameters from a (beta, n, zeta, v_th) vector."""
        return cls(**dict(zip(PARAM_NAMES, map(float, x), strict=True)), k0=k0)


class TestPlan(BaseModel):
    """
    Normalized step plan.

    Time is measured in steps (tau = t / dt, tau = 0 at test start); stage i
    covers (i - 2, i - 1] at stress (i - 1) * dv. vs is the normal-use stress
    relative to the reference stress.
    """

    __test__: ClassVar[bool] = False

    model_config = ConfigDict(frozen=True)

    dv: float = Field(default=DEFAULT_DV, gt=0)
    vs: float = Field(default=DEFAULT_VS, gt=0)


class Observation(BaseModel):
    """One specimen of a step-stress data set."""

    model_config = ConfigDict(frozen=True)

    ts: float = Field(ge=0)
    fail_stage_start: int = Field(ge=0, strict=True)
    excluded: bool = False

    @property
    def failure_stage(self) -> int:
        return self.fail_stage_start + 2


class RowSummary(BaseModel):
    """Average and spread of the stage starts recorded at one prior exposure."""

    ts: float
    count: int
    mean: float
    sd: float | None


class Dataset(BaseModel):
    """Step-stress observations with their test plan."""

    model_config = ConfigDict(frozen=True)

    observations: list[Observation] = []
    plan: TestPlan = TestPlan()

    @cached_property
    def active(self) -> list[Observation]:
        """Observations that take part in estimation."""
        return [obs for obs in self.observations if not obs.excluded]

    @cached_property
    def active_rows(self) -> np.ndarray:
        """Indices of active observations in the full observation list."""
        return np.array(
            [idx for idx, obs in enumerate(self.observations) if not obs.excluded],
            dtype=int,
        )

    @cached_property
    def ts_array(self) -> np.ndarray:
        return np.array([obs.ts for obs in self.active], dtype=float)

    @cached_property
    def start_array(self) -> np.ndarray:
        return np.array([obs.fail_stage_start for obs in self.active], dtype=int)

    def __len__(self) -> int:
        return len(self.active)

    def ts_values(self) -> list[float]:
        """Distinct prior exposures of the active observations, ascending."""
        return sorted({obs.ts for obs in self.active})

    def starts_for(self, ts: float) -> np.ndarray:
        """Stage starts recorded at the given prior exposure."""
        return self.start_array[self.ts_array == ts]

    def with_excluded(self, index: int, *, excluded: bool) -> Dataset:
        """Return a copy with one observation's exclusion flag changed."""
        observations = list(self.observations)
        observations[index] = observations[index].model_copy(
            update={"excluded": excluded}
        )
        return Dataset(observations=observations, plan=self.plan)

    def summary(self) -> list[RowSummary]:
        """Per prior exposure count, mean and SD of the stage starts."""
        rows = []
        for ts in self.ts_values():
            starts = self.starts_for(ts).astype(float)
            sd = float(np.std(starts, ddof=1)) if starts.size > 1 else None
            rows.append(
                RowSummary(ts=ts, count=starts.size, mean=float(starts.mean()), sd=sd)
            )
        return rows


class TemplateRow(BaseModel):
    """Number of specimens to simulate at one prior exposure."""

    ts: float = Field(ge=0)
    count: int = Field(ge=1)


class DesignTemplate(BaseModel):
    """Layout of a simulated data set."""

    rows: list[TemplateRow]

    @model_validator(mode="before")
    @classmethod
    def validate_rows(cls, data: Any) -> Any:
        if isinstance(data, list):
            return {"rows": data}

        return data

    @model_serializer
    def serialize_rows(self) -> Any:
        return [row.model_dump() for row in self.rows]

    @property
    def total(self) -> int:
        return sum(row.count for row in self.rows)

    @classmethod
    def from_dataset(cls, data: Dataset) -> DesignTemplate:
        """Template with the active row counts of a data set, in first-seen order."""
        counts: dict[float, int] = {}
        for obs in data.active:
            counts[obs.ts] = counts.get(obs.ts, 0) + 1
        return cls(rows=[TemplateRow(ts=ts, count=c) for ts, c in counts.items()])


class BinSpec(BaseModel):
    """
    Grouping of stage starts per prior exposure.

    Each entry lists the upper edges e_1 < ... < e_{k-1}; the bins are
    [0, e_1], (e_1, e_2], ..., (e_{k-1}, inf).
    """

    edges: dict[float, list[float]]

    @model_validator(mode="before")
    @classmethod
    def validate_mapping(cls, data: Any) -> Any:
        if isinstance(data, dict) and "edges" not in data:
            return {"edges": data}

        return data

    @model_validator(mode="after")
    def check_partition(self) -> BinSpec:
        for ts, edges in self.edges.items():
            if not edges:
                msg = f"Bins for ts={ts} need at least one edge"
                raise ValueError(msg)
            if any(not math.isfinite(edge) or edge < 0 for edge in edges):
                msg = f"Bin edges for ts={ts} must be finite and nonnegative"
                raise ValueError(msg)
            if any(b <= a for a, b in zip(edges, edges[1:], strict=False)):
                msg = f"Bin edges for ts={ts} must be strictly increasing"
                raise ValueError(msg)
        return self

    @model_serializer
    def serialize_edges(self) -> Any:
        return {format_ts(ts): edges for ts, edges in self.edges.items()}

    @property
    def ts_values(self) -> list[float]:
        return list(self.edges)

    def labels(self, ts: float) -> list[str]:
        """Human-readable interval labels."""
        edges = self.edges[ts]
        labels = [f"[0,{format_ts(edges[0])}]"]
        labels += [
            f"({format_ts(a)},{format_ts(b)}]"
            for a, b in zip(edges, edges[1:], strict=False)
        ]
        labels.append(f"({format_ts(edges[-1])},inf)")
        return labels

    def counts(self, ts: float, starts: np.ndarray) -> np.ndarray:
        """Number of stage starts falling in each bin."""
        edges = np.asarray(self.edges[ts], dtype=float)
        idx = np.searchsorted(edges, np.asarray(starts, dtype=float), side="left")
        return np.bincount(idx, minlength=edges.size + 1)


def format_ts(value: float) -> str:
    """Text form of a prior exposure, without a trailing .0 for whole values."""
    return str(int(value)) if float(value).is_integer() else repr(float(value))
