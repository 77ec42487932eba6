"""Readers and writers for data sets, templates, bins and reports."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import TYPE_CHECKING, Any

from pydantic import ValidationError

from .const import LOGGER
from .data import (
    BinSpec,
    Dataset,
    DesignTemplate,
    Observation,
    TemplateRow,
    TestPlan,
    format_ts,
)
from .exceptions import ConfigError, DatasetParseError

if TYPE_CHECKING:
    from collections.abc import Iterable, Iterator, Sequence

    from .diagnostics import RunManifest

DATASET_HEADER = ["ts_tilde", "stage_start", "excluded"]
TEMPLATE_HEADER = ["ts_tilde", "count"]


def _rows(path: Path, header: list[str]) -> Iterator[tuple[int, list[str]]]:
    """Yield (line number, fields) after checking the header."""
    try:
        handle = path.open(encoding="utf-8", newline="")
    except OSError as exception:
        msg = f"Cannot read {path}: {exception}"
        raise DatasetParseError(msg, path) from exception

    with handle:
        reader = csv.reader(handle)
        first = next(reader, None)
        if first is None or [field.strip() for field in first] != header:
            msg = f"Expected header {','.join(header)}"
            raise DatasetParseError(msg, path, 1)
        for fields in reader:
            fields = [field.strip() for field in fields]  # noqa: PLW2901
            if not any(fields):
                continue
            if fields == header:
                msg = "Duplicate header"
                raise DatasetParseError(msg, path, reader.line_num)
            if len(fields) != len(header):
                msg = f"Expected {len(header)} fields, got {len(fields)}"
                raise DatasetParseError(msg, path, reader.line_num)
            yield reader.line_num, fields


def _parse_ts(text: str, path: Path, line: int) -> float:
    try:
        value = float(text)
    except ValueError as exception:
        msg = f"Invalid ts_tilde {text!r}"
        raise DatasetParseError(msg, path, line) from exception
    if not math.isfinite(value) or value < 0:
        msg = f"ts_tilde must be finite and nonnegative, got {text!r}"
        raise DatasetParseError(msg, path, line)
    return value


def _parse_count(text: str, name: str, path: Path, line: int) -> int:
    if not (text.isascii() and text.isdigit()):
        msg = f"{name} must be a nonnegative integer, got {text!r}"
        raise DatasetParseError(msg, path, line)
    return int(text)


def ingest(path: Path | str, plan: TestPlan | None = None) -> Dataset:
    """Read a data set CSV with header ts_tilde,stage_start,excluded."""
    path = Path(path)
    observations = []
    for line, (ts, start, excluded) in _rows(path, DATASET_HEADER):
        if excluded not in {"0", "1"}:
            msg = f"excluded must be 0 or 1, got {excluded!r}"
            raise DatasetParseError(msg, path, line)
        try:
            observations.append(
                Observation(
                    ts=_parse_ts(ts, path, line),
                    fail_stage_start=_parse_count(start, "stage_start", path, line),
                    excluded=excluded == "1",
                )
            )
        except ValidationError as exception:
            msg = f"Invalid observation: {exception}"
            raise DatasetParseError(msg, path, line) from exception

    data = Dataset(observations=observations, plan=plan or TestPlan())
    LOGGER.info(
        f"Read {len(data.observations)} observations ({len(data)} active) "
        f"from {path}"
    )
    return data


def write_dataset(data: Dataset, path: Path | str) -> None:
    """Write a data set in the format read by ingest."""
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(DATASET_HEADER)
        writer.writerows(
            [format_ts(obs.ts), obs.fail_stage_start, int(obs.excluded)]
            for obs in data.observations
        )
    LOGGER.info(f"Wrote {len(data.observations)} observations to {path}")


def read_template(path: Path | str) -> DesignTemplate:
    """Read a design template CSV with header ts_tilde,count."""
    path = Path(path)
    rows = []
    for line, (ts, count) in _rows(path, TEMPLATE_HEADER):
        try:
            rows.append(
                TemplateRow(
                    ts=_parse_ts(ts, path, line),
                    count=_parse_count(count, "count", path, line),
                )
            )
        except ValidationError as exception:
            msg = f"Invalid template row: {exception}"
            raise DatasetParseError(msg, path, line) from exception
    if not rows:
        msg = "Template has no rows"
        raise DatasetParseError(msg, path)
    return DesignTemplate(rows=rows)


def read_bins(path: Path | str) -> BinSpec:
    """Read a bins JSON mapping ts to upper bin edges."""
    path = Path(path)
    try:
        content = path.read_text(encoding="utf-8")
    except OSError as exception:
        msg = f"Cannot read {path}: {exception}"
        raise DatasetParseError(msg, path) from exception
    try:
        json.loads(content)
    except json.JSONDecodeError as exception:
        msg = f"Malformed JSON: {exception.msg}"
        raise DatasetParseError(msg, path, exception.lineno) from exception
    try:
        return BinSpec.model_validate_json(content)
    except ValidationError as exception:
        msg = f"Invalid bins in {path}: {exception}"
        raise ConfigError(msg) from exception


def write_report(
    report: dict[str, Any], path: Path | str, manifest: RunManifest
) -> None:
    """Write a JSON report with its manifest embedded."""
    payload = {"manifest": manifest.model_dump(mode="json"), **report}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    LOGGER.info(f"Wrote report to {path}")


def write_table(
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    path: Path | str,
    manifest: RunManifest,
) -> None:
    """Write a CSV table and its manifest as <path>.manifest.json."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows([_cell(value) for value in row] for row in rows)
    LOGGER.info(f"Wrote {path}")
    write_sidecar(path, manifest)


def write_sidecar(path: Path | str, manifest: RunManifest) -> Path:
    """Write the manifest that accompanies an output file."""
    path = Path(path)
    sidecar = path.with_name(f"{path.name}.manifest.json")
    sidecar.write_text(
        json.dumps(manifest.model_dump(mode="json"), indent=2) + "\n",
        encoding="utf-8",
    )
    return sidecar


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)
