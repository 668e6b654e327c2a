"""
Shared pytest fixtures
"""

import os
import sys
from pathlib import Path

import pytest

# Add current directory to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from services.graph_service import expand_capacities, load_network  # noqa: E402

FIXTURES = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def load():
    """Load a shipped network fixture by name"""
    def _load(name: str):
        return load_network(FIXTURES / f"{name}.json")
    return _load


@pytest.fixture
def butterfly(load):
    return load("butterfly")


@pytest.fixture
def butterfly_unit(butterfly):
    return expand_capacities(butterfly)


@pytest.fixture
def database_url(tmp_path) -> str:
    return f"sqlite:///{tmp_path / 'runs.db'}"
