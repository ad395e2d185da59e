import cmath
import math

import numpy as np
import pytest
from hypothesis import given

from conftest import simplex_params
from timebin_epp.channels import (
    BELL_ORDER,
    CHANNELS,
    NoiseParams,
    apply_bell_error,
    bell_diagonal_channel,
    collective_phase_channel,
    reprepare_polarization,
    side_phases,
    timebin_dephasing_channel,
)
from timebin_epp.state import (
    BellKind,
    Ensemble,
    H,
    PureState,
    bell_state,
    dof_product,
    ensemble_fidelity,
    fidelity,
    ket,
)

SQ = 1 / math.sqrt(2)
AB = ("A", "B")
PHI_T = PureState({ket(("A", H, 0), ("B", H, 0)): SQ, ket(("A", H, 1), ("B", H, 1)): SQ})
PHI_PLUS_FULL = dof_product(bell_state("PhiPlus", AB), PHI_T)


# -- NoiseParams -------------------------------------------------------------------------

@pytest.mark.parametrize("weights", [(0.7, 0.7, 0, 0), (0.5, 0.2, 0.2, 0.0), (1.1, -0.1, 0, 0)])
def test_noise_params_enforce_simplex(weights):
    with pytest.raises(ValueError):
        NoiseParams(*weights)


def test_noise_params_accept_rounding():
    NoiseParams(0.1, 0.2, 0.3, 0.4 + 5e-13)


# -- Bell-diagonal channel ---------------------------------------------------------------------

def test_noiseless_channel_is_identity():
    e = bell_diagonal_channel(Ensemble.pure(PHI_PLUS_FULL), NoiseParams())
    assert len(e) == 1 and e.components[0][1] == PHI_PLUS_FULL


@pytest.mark.parametrize("kind", list(BellKind))
def test_pauli_realizes_each_bell_state(kind):
    s = apply_bell_error(bell_state("PhiPlus", AB), kind)
    assert fidelity(s, bell_state(kind, AB)) == pytest.approx(1, abs=1e-12)


def test_general_params_give_four_components():
    p = NoiseParams(0.4, 0.3, 0.2, 0.1)
    e = bell_diagonal_channel(Ensemble.pure(PHI_PLUS_FULL), p)
    assert [w for w, _ in e] == pytest.approx([0.4, 0.3, 0.2, 0.1])
    for (_, s), kind in zip(e, BELL_ORDER):
        expected = dof_product(bell_state(kind, AB), PHI_T)
        assert fidelity(s, expected) == pytest.approx(1, abs=1e-12)


@given(simplex_params)
def test_channel_fidelity_equals_f_and_keeps_labels(p):
    e = bell_diagonal_channel(Ensemble.pure(PHI_PLUS_FULL), p)
    assert math.fsum(w for w, _ in e) == pytest.approx(1, abs=1e-12)
    assert ensemble_fidelity(e, PHI_PLUS_FULL) == pytest.approx(p.F, abs=1e-12)
    for _, s in e:
        assert s.modes() == PHI_PLUS_FULL.modes()
        assert {tuple((q.mode, q.delay) for q in k) for k in s} == \
            {tuple((q.mode, q.delay) for q in k) for k in PHI_PLUS_FULL}


def test_channel_rejects_bad_pair():
    with pytest.raises(ValueError):
        bell_diagonal_channel(Ensemble.pure(PHI_PLUS_FULL), NoiseParams(), photon_pair=(0, 2))


def test_reprepare_polarization_keeps_timebins():
    e = reprepare_polarization(Ensemble.pure(PHI_T), bell_state("PsiMinus", AB))
    assert fidelity(e.components[0][1], dof_product(bell_state("PsiMinus", AB), PHI_T)) == pytest.approx(1)


# -- collective phases -------------------------------------------------------------------------

def test_collective_phase_is_global():
    out = collective_phase_channel(PHI_T, side_phases(0.7, 1.1, ["A"], ["B"]))
    assert out.isclose(PHI_T.scaled(cmath.exp(1.8j)))
    assert fidelity(out, PHI_T) == pytest.approx(1, abs=1e-12)


def test_zero_phases_identity():
    assert collective_phase_channel(PHI_PLUS_FULL, {"A": 0.0, "B": 0.0}).isclose(PHI_PLUS_FULL)


def test_random_phases_keep_fidelity():
    rng = np.random.default_rng(20240611)
    for _ in range(100):
        ta, tb = rng.uniform(0, 2 * math.pi, size=2)
        out = collective_phase_channel(PHI_PLUS_FULL, {"A": ta, "B": tb})
        assert fidelity(out, PHI_PLUS_FULL) == pytest.approx(1, abs=1e-12)


# -- time-bin dephasing ------------------------------------------------------------------------

def test_dephasing_zero_identity():
    e = Ensemble.pure(PHI_T)
    assert timebin_dephasing_channel(e, 0.0) is e


def test_dephasing_pi_flips_late_term():
    out = timebin_dephasing_channel(Ensemble.pure(PHI_T), math.pi).components[0][1]
    expected = PureState({ket(("A", H, 0), ("B", H, 0)): SQ, ket(("A", H, 1), ("B", H, 1)): -SQ})
    assert out.isclose(expected)
    assert fidelity(out, PHI_T) == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("phi", [0.3, math.pi / 3, 2.0])
def test_dephasing_fidelity_cos_squared(phi):
    out = timebin_dephasing_channel(Ensemble.pure(PHI_T), phi).components[0][1]
    assert fidelity(out, PHI_T) == pytest.approx(math.cos(phi / 2) ** 2, abs=1e-12)


def test_registry_has_no_bit_flip_channel():
    assert set(CHANNELS) == {"bell_diagonal", "collective_phase", "timebin_dephasing"}
    assert not any("flip" in name for name in CHANNELS)
