import numpy as np
import pytest

from gfmnet.controllers import (
    ControllerSpec,
    DroopLaw,
    control_matrices,
    normalize_gains,
    state_layout,
)
from gfmnet.errors import ModelError, NonConformingGains


def test_normalize_gains():
    assert normalize_gains(0.05, 0.0025, 0.05) == pytest.approx(0.05)
    with pytest.raises(NonConformingGains):
        normalize_gains(0.05, 0.01, 0.05)


def test_kbal_only_on_generalized():
    with pytest.raises(ModelError):
        ControllerSpec("1", "PositiveSequenceDroop", 0.05, 0.05, k_bal=1.0)


@pytest.mark.parametrize(
    "law, dim", [("SinglePhaseDroop", 2), ("PositiveSequenceDroop", 2), ("GeneralizedDroop", 6)]
)
def test_state_dimensions(law, dim):
    cm = control_matrices(ControllerSpec("1", law, 0.05, 0.05))
    assert cm.state_dim == dim
    L = cm.local_term
    np.testing.assert_allclose(L, L.T)
    assert np.linalg.eigvalsh(L).min() >= -1e-14


def test_positive_sequence_averages_phases():
    cm = control_matrices(ControllerSpec("1", DroopLaw.PositiveSequenceDroop, 0.05, 0.05))
    assert cm.E.shape == (6, 2)
    np.testing.assert_allclose(cm.E[:3, 0], 1.0)


def test_balancing_term_kills_balanced_direction():
    cm = control_matrices(ControllerSpec("1", "GeneralizedDroop", 0.05, 0.05, k_bal=3.0))
    np.testing.assert_allclose(cm.S[:3, :3].sum(axis=0), 0.0, atol=1e-14)


def test_layout_follows_exterior_order(docs):
    doc = docs["feeder_single"]
    layout = state_layout(reversed(doc.converters), doc.model)
    assert [b.node for b in layout.blocks] == doc.model.exterior_ids
    assert layout.dim == sum(layout.dims)


def test_layout_rejects_interior_converter(docs):
    doc = docs["radial_ygd"]
    with pytest.raises(ModelError):
        state_layout([ControllerSpec("3", "PositiveSequenceDroop", 0.05, 0.05)], doc.model)
