import numpy as np
import pytest

from hss_stab import (
    ConfigurationError,
    HarmonicIndexSet,
    HssModel,
    ShapeError,
    eigen_decompose,
    hss_from_lti,
    match_eigenvalues,
    regrid_model,
)
from tests.conftest import random_stable_lti


def test_lti_lift_ladder():
    rng = np.random.default_rng(0)
    a = random_stable_lti(rng, 4)
    iset = HarmonicIndexSet(2, 50.0)
    model = hss_from_lti(a, {"w": np.eye(4)}, np.eye(4), {"w": np.zeros((4, 4))}, iset)
    sol = eigen_decompose(model)
    base = np.linalg.eigvals(a)
    expected = np.concatenate([base - 1j * 2 * np.pi * 50.0 * h for h in iset.orders])
    perm, _ = match_eigenvalues(sol.eigenvalues, expected)
    scale = np.max(np.abs(expected))
    assert np.max(np.abs(sol.eigenvalues - expected[perm])) <= 1e-8 * scale


def test_state_labels_h_major():
    iset = HarmonicIndexSet(1, 50.0)
    model = hss_from_lti(
        -np.eye(2), {"w": np.eye(2)}, np.eye(2), {"w": np.zeros((2, 2))}, iset,
        state_names=("x", "y"),
    )
    labels = model.state_labels()
    assert labels[0] == ("x", -1)
    assert labels[1] == ("y", -1)
    assert labels[2] == ("x", 0)
    assert labels[-1] == ("y", 1)


def test_regrid_model_roundtrip():
    iset = HarmonicIndexSet(1, 50.0)
    model = hss_from_lti(
        [[-2.0]], {"w": [[1.0]]}, [[1.0]], {"w": [[0.0]]}, iset
    )
    grown = regrid_model(model, 3)
    assert grown.index_set.hmax == 3
    assert np.array_equal(grown.a, -2.0 * np.eye(7))
    assert regrid_model(model, 1) is model


def test_regrid_without_series_rejected():
    iset = HarmonicIndexSet(1, 50.0)
    base = hss_from_lti([[-1.0]], {"w": [[1.0]]}, [[1.0]], {"w": [[0.0]]}, iset)
    stripped = HssModel(
        index_set=iset,
        a=base.a,
        e=dict(base.e),
        c=base.c,
        f=dict(base.f),
        state_names=base.state_names,
    )
    with pytest.raises(ConfigurationError):
        regrid_model(stripped, 2)


def test_port_consistency_checked():
    iset = HarmonicIndexSet(0, 50.0)
    with pytest.raises(ShapeError):
        HssModel(
            index_set=iset,
            a=np.zeros((1, 1), complex),
            e={"w": np.zeros((1, 2), complex)},
            c=np.zeros((1, 1), complex),
            f={"w": np.zeros((1, 3), complex)},  # width mismatch with E
            state_names=("x",),
        )
