"""Replicate coordinator for simulation studies."""

from __future__ import annotations

from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .const import LOGGER

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence


@dataclass
class Collected[T]:
    """Successful replicate outcomes in index order, with the failure tally."""

    successes: list[T] = field(default_factory=list)
    failures: int = 0
    attempts: int = 0


class ReplicateCoordinator[T]:
    """
    Class to manage running independent replicates.

    task(index) must be a picklable, deterministic function of the index, so
    results do not depend on the worker count.
    """

    def __init__(
        self,
        task: Callable[[int], T],
        succeeded: Callable[[T], bool],
        workers: int | None = 1,
    ) -> None:
        """Replicate coordinator; workers > 1 runs replicates in processes."""
        self._task = task
        self._succeeded = succeeded
        self._workers = workers

    def run(self, indices: Sequence[int], executor: Executor | None = None) -> list[T]:
        """Run the task on each index, returning outcomes in index order."""
        if executor is None:
            return [self._task(index) for index in indices]
        chunksize = max(1, len(indices) // (4 * (self._workers or 1)))
        return list(executor.map(self._task, indices, chunksize=chunksize))

    def collect(self, wanted: int, max_attempts: int) -> Collected[T]:
        """
        Run replicates until `wanted` succeed or `max_attempts` are used.

        Each batch asks for exactly the number of successes still missing, so
        the accepted set is the first `wanted` successes by index.
        """
        collected: Collected[T] = Collected()
        if self._workers is not None and self._workers <= 1:
            self._collect(collected, wanted, max_attempts, None)
            return collected

        with ProcessPoolExecutor(max_workers=self._workers) as executor:
            self._collect(collected, wanted, max_attempts, executor)
        return collected

    def _collect(
        self,
        collected: Collected[T],
        wanted: int,
        max_attempts: int,
        executor: Executor | None,
    ) -> None:
        while len(collected.successes) < wanted and collected.attempts < max_attempts:
            batch = min(
                wanted - len(collected.successes),
                max_attempts - collected.attempts,
            )
            indices = range(collected.attempts, collected.attempts + batch)
            for outcome in self.run(indices, executor):
                if self._succeeded(outcome):
                    collected.successes.append(outcome)
                else:
                    collected.failures += 1
            collected.attempts += batch
            LOGGER.info(
                f"Replicates: {len(collected.successes)}/{wanted} succeeded, "
                f"{collected.failures} failed, {collected.attempts} attempted"
            )
