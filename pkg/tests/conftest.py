from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("suite", max_examples=50, deadline=None)
settings.load_profile("suite")

ASSETS = Path(__file__).resolve().parent.parent / "assets"
DATA = Path(__file__).resolve().parent / "data"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def assets() -> Path:
    return ASSETS


@pytest.fixture
def data_dir() -> Path:
    return DATA
