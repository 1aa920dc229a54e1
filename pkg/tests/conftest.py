"""Test fixtures and utilities."""

import json
import logging
from unittest.mock import Mock

import pytest

from eureka.client import ChatClient

from .common import OCCUPANCY_HEADER, occupancy_like_rows, write_table


@pytest.fixture
def occupancy_csv(tmp_path):
    """Write a small occupancy-style CSV file."""
    path = tmp_path / "occupancy.csv"
    return write_table(path, OCCUPANCY_HEADER, occupancy_like_rows())


@pytest.fixture
def config_doc(tmp_path, occupancy_csv):
    """A mock-judge run configuration over the occupancy-style file."""
    return {
        "data": {"path": str(occupancy_csv), "exclude": ["date"]},
        "task": {"preset": "occupancy", "label_name": "Occupancy"},
        "judge": {"mode": "mock", "dominance": ["Weekday", "Noise", "Light"]},
        "ranking": {"N": 60},
        "bench": {"Ns": [8, 16], "truth_n": 64, "repeats": 3, "stability_runs": 4},
        "seed": 7,
        "output": str(tmp_path / "runs"),
    }


@pytest.fixture
def config_file(tmp_path, config_doc):
    """Write ``config_doc`` as a JSON config file."""
    path = tmp_path / "eureka.json"
    path.write_text(json.dumps(config_doc), encoding="utf-8")
    return path


@pytest.fixture
def mock_client():
    """Create a mock chat client."""
    client = Mock(spec=ChatClient)
    client.model = "test-model"
    client.complete.return_value = "A"
    return client


@pytest.fixture(autouse=True)
def quiet_logging(caplog):
    """Capture EUREKA debug logs for assertions."""
    caplog.set_level(logging.DEBUG, logger="eureka")
