import logging
from pathlib import Path

import numpy as np
import pytest

from core.config import reset_config
from core.waiting_time import Erlang, Exponential, build

REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture(autouse=True)
def _isolated_logging():
    """Drop handlers that setup_logging attached during a test"""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    for h in root.handlers:
        if h not in handlers:
            root.removeHandler(h)
            h.close()
    root.setLevel(level)


@pytest.fixture(autouse=True)
def _fresh_config():
    reset_config()
    yield
    reset_config()


@pytest.fixture
def erlang2():
    return build(Erlang(2, 1.0))


@pytest.fixture
def exponential():
    return build(Exponential(1.0))


@pytest.fixture
def plus_state():
    return 0.5 * np.ones((2, 2), dtype=complex)


@pytest.fixture
def repo_root():
    return REPO_ROOT
