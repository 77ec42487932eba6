"""Run diagnostics attached to every output."""

from __future__ import annotations

import time
from datetime import UTC, datetime
from pathlib import Path
from typing import TYPE_CHECKING, Any

from pydantic import BaseModel, Field

from .const import NAME, VERSION

if TYPE_CHECKING:
    from argparse import Namespace

# argparse plumbing that is not part of the run configuration
TO_REDACT = {"func", "log_level"}
INPUT_FLAGS = {"data", "template", "bins"}


class RunManifest(BaseModel):
    """What produced an output file."""

    tool: str = NAME
    version: str = VERSION
    command: str
    inputs: dict[str, str] = {}
    config: dict[str, Any] = {}
    seed: int | None = None
    started_at: datetime
    wall_time_s: float = Field(ge=0)


class RunClock:
    """Start time of a command, for its manifest."""

    def __init__(self) -> None:
        """Start the clock."""
        self.started_at = datetime.now(UTC)
        self._start = time.perf_counter()

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self._start


def _plain(value: Any) -> Any:
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, tuple | list):
        return [_plain(item) for item in value]
    return value


def get_run_diagnostics(args: Namespace, clock: RunClock) -> RunManifest:
    """Return the manifest of a CLI run."""
    options = {
        key: _plain(value)
        for key, value in vars(args).items()
        if key not in TO_REDACT and value is not None
    }
    command = options.pop("command")
    inputs = {key: options.pop(key) for key in sorted(INPUT_FLAGS & options.keys())}
    return RunManifest(
        command=command,
        inputs=inputs,
        config=options,
        seed=options.get("seed"),
        started_at=clock.started_at,
        wall_time_s=clock.elapsed,
    )
