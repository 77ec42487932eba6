"""Fixtures for testing."""

import pytest

from weibull_ce.data import BinSpec, Dataset, DesignTemplate, ModelParams, TestPlan
from weibull_ce.estimator import FitConfig, FitResult, fit
from weibull_ce.fileio import ingest, read_bins, read_template

from .common import DATA, FITTED


@pytest.fixture
def plan() -> TestPlan:
    """Default step plan, dv = 5*sqrt(3)/22."""
    return TestPlan()


@pytest.fixture
def fitted() -> ModelParams:
    """Published estimates."""
    return FITTED


@pytest.fixture(scope="session")
def table2() -> Dataset:
    """The bundled step-stress data set."""
    return ingest(DATA / "table2.csv")


@pytest.fixture(scope="session")
def template() -> DesignTemplate:
    """Row layout of the bundled data set."""
    return read_template(DATA / "table2_template.csv")


@pytest.fixture(scope="session")
def bins() -> BinSpec:
    """Published grouping of stage starts."""
    return read_bins(DATA / "table3_bins.json")


@pytest.fixture(scope="session")
def table2_fit(table2: Dataset) -> FitResult:
    """Fit of the bundled data set with default settings."""
    return fit(table2, FitConfig())
