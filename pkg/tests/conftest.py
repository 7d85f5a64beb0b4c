import json
from pathlib import Path

import numpy as np
import pytest

from hss_stab import scenario_from_dict

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def scenario_path(name: str) -> Path:
    return SCENARIO_DIR / f"{name}.json"


def load_raw(name: str) -> dict:
    return json.loads(scenario_path(name).read_text())


@pytest.fixture
def two_node():
    return scenario_from_dict(load_raw("two_node"), source=str(scenario_path("two_node")))


@pytest.fixture
def rlc_grid():
    return scenario_from_dict(load_raw("rlc_grid"), source=str(scenario_path("rlc_grid")))


@pytest.fixture
def toy_gain():
    return scenario_from_dict(load_raw("toy_gain"), source=str(scenario_path("toy_gain")))


def random_stable_lti(rng, dim: int, margin: float = 0.5) -> np.ndarray:
    """Random real system matrix with all eigenvalues strictly left of -margin."""
    a = rng.standard_normal((dim, dim))
    shift = np.max(np.linalg.eigvals(a).real)
    return a - (shift + margin) * np.eye(dim)
