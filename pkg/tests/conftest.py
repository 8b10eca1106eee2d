"""Shared fixtures for the peaks solver tests."""

import os
import sys

import pytest

# Add the repository root to Python path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.core.gallery import ExampleParams, closed_forms, worked_example_system  # noqa: E402
from src.core.settings import SolverSettings  # noqa: E402


@pytest.fixture
def worked_params():
    return ExampleParams.from_text(30, "1/3")


@pytest.fixture
def worked_forms(worked_params):
    return closed_forms(worked_params)


@pytest.fixture
def worked_system(worked_params):
    return worked_example_system(worked_params)


@pytest.fixture
def fast_settings():
    """Coarse static solves, enough for the worked example."""
    return SolverSettings(grid=300, refine_rounds=3, horizon=30, samples=200)


@pytest.fixture
def golden_dir():
    return os.path.join(os.path.dirname(os.path.abspath(__file__)), "golden")
