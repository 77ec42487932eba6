"""Helpers for loading test fixtures."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from weibull_ce.data import ModelParams

FIXTURES = Path(__file__).parent / "fixtures"
DATA = Path(__file__).parent.parent / "data"

# Published estimates for the bundled data set
FITTED = ModelParams(
    beta=5.016812, n=1.603875, zeta=0.548237, v_th=0.944054, k0=1e4
)
FITTED_LOGLIK = -244.4626


def get_fixture_path(filename: str) -> Path:
    """Return the path of a fixture file."""
    return FIXTURES / filename


def load_fixture(filename: str) -> str:
    """Load a fixture as text."""
    return get_fixture_path(filename).read_text(encoding="utf-8")


def load_json_value_fixture(filename: str) -> Any:
    """Load a JSON fixture."""
    return json.loads(load_fixture(filename))


def load_json_object_fixture(filename: str) -> dict[str, Any]:
    """Load a JSON fixture that must hold an object."""
    value = load_json_value_fixture(filename)
    if not isinstance(value, dict):
        msg = f"Fixture {filename} is not a JSON object"
        raise TypeError(msg)
    return value


def load_json_array_fixture(filename: str) -> list[Any]:
    """Load a JSON fixture that must hold an array."""
    value = load_json_value_fixture(filename)
    if not isinstance(value, list):
        msg = f"Fixture {filename} is not a JSON array"
        raise TypeError(msg)
    return value
