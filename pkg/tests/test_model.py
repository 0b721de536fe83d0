import math

import numpy as np
import pytest

from qfbsim import (BlochVector, PhysicalParams, TargetState,
                    bloch_from_angles, fidelity)


def test_poles():
    assert bloch_from_angles(TargetState(0.0, 0.0)).as_array() == pytest.approx([0, 0, 1])
    assert bloch_from_angles(TargetState(math.pi, 0.0)).as_array() == pytest.approx(
        [0, 0, -1], abs=1e-15)


def test_equator_y_target():
    # |e> + i|g> superposition points along +y
    n = bloch_from_angles(TargetState(math.pi / 2, math.pi / 2))
    assert n.as_array() == pytest.approx([0, 1, 0], abs=1e-15)


def test_unit_norm_everywhere():
    rng = np.random.default_rng(1)
    for _ in range(500):
        t = TargetState(rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi))
        assert abs(bloch_from_angles(t).norm() - 1.0) < 1e-12


def test_angle_range_rejected():
    with pytest.raises(ValueError):
        TargetState(-0.1, 0.0)
    with pytest.raises(ValueError):
        TargetState(math.pi + 0.1, 0.0)
    with pytest.raises(ValueError):
        TargetState(1.0, 2 * math.pi)


def test_fidelity_values():
    assert fidelity(BlochVector(0, 0, 1), TargetState(0.0)) == pytest.approx(1.0)
    assert fidelity(BlochVector(0, 0, 0), TargetState(1.1, 2.2)) == pytest.approx(0.5)
    # measured steady coherence 0.22 along +y gives F = 0.61
    f = fidelity(BlochVector(0.0, 0.22, 0.0), TargetState(math.pi / 2, math.pi / 2))
    assert f == pytest.approx(0.61, abs=1e-12)


def test_fidelity_monotone_in_overlap():
    rng = np.random.default_rng(2)
    t = TargetState(1.0, 2.0)
    n = bloch_from_angles(t).as_array()
    lam = np.sort(rng.uniform(-1, 1, 50))
    f = [fidelity(BlochVector(*(l * n)), t) for l in lam]
    assert np.all(np.diff(f) > 0)


def test_fidelity_rejects_unphysical():
    with pytest.raises(ValueError):
        fidelity(BlochVector(1.2, 0, 0.8), TargetState(0.0))


def test_physical_params_validation():
    with pytest.raises(ValueError):
        PhysicalParams(eta=1.2)
    with pytest.raises(ValueError):
        PhysicalParams(gamma1=-1.0)
    with pytest.raises(ValueError):
        PhysicalParams(B=1e6, B_f=2e6)  # FM path wider than detection


def test_paper_defaults(params):
    assert params.gamma1 == pytest.approx(1 / 4.7e-6)
    assert params.gamma_phi == pytest.approx(1 / 22e-6)
    assert params.eta == 0.35
    assert params.B == 3.3e6
    assert params.B_f == 2.0e6
    assert params.T_d == 0.12e-6
    assert params.gamma_m == pytest.approx(1 / 84e-6)
    assert params.thermal_state().as_array() == pytest.approx([0, 0, -1])


def test_purity():
    assert BlochVector(0, 0, 1).purity() == pytest.approx(1.0)
    assert BlochVector(0, 0, 0).purity() == pytest.approx(0.5)
