import cmath
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from timebin_epp.state import (
    BellKind,
    Ensemble,
    H,
    PhotonBasis,
    Polarization,
    PureState,
    V,
    basis_state,
    bell_state,
    canonical_phase,
    dof_product,
    ensemble_fidelity,
    fidelity,
    ghz_state,
    inner,
    ket,
    project_modes,
    tensor,
)
from timebin_epp.protocol import encoded_state

SQ = 1 / math.sqrt(2)
AB = ("A", "B")


# -- strategies ------------------------------------------------------------------------

amplitudes = st.complex_numbers(min_magnitude=0.05, max_magnitude=2, allow_nan=False, allow_infinity=False)
labels_a = st.builds(PhotonBasis, st.sampled_from(["A", "A2"]), st.sampled_from([H, V]), st.integers(0, 2))
labels_b = st.builds(PhotonBasis, st.sampled_from(["B", "B2"]), st.sampled_from([H, V]), st.integers(0, 2))


@st.composite
def two_photon_states(draw):
    kets = draw(st.lists(st.tuples(labels_a, labels_b), min_size=1, max_size=6, unique=True))
    return PureState({k: draw(amplitudes) for k in kets}, normalize=True)


# -- domain types ----------------------------------------------------------------------

def test_polarization_flip_is_involution():
    assert set(Polarization) == {H, V}
    for p in Polarization:
        assert p.flipped().flipped() is p
        assert p.flipped() is not p


@pytest.mark.parametrize("terms, message", [
    ({}, "no nonzero"),
    ({ket(("A", H)): 0.5}, "norm"),
    ({ket(("A", H)): SQ, ket(("A", H), ("B", H)): SQ}, "photon counts"),
    ({ket(("A", H, -1)): 1.0}, "negative delay"),
])
def test_purestate_rejects_invalid(terms, message):
    with pytest.raises(ValueError, match=message):
        PureState(terms)


def test_purestate_prunes_tiny_amplitudes():
    s = PureState({ket(("A", H)): 1.0, ket(("A", V)): 1e-16})
    assert len(s) == 1 and s.amplitude([("A", V, 0)]) == 0


@pytest.mark.parametrize("weights", [(0.5, 0.6), (1.0, 0.0), (-0.1, 1.1)])
def test_ensemble_rejects_bad_weights(weights):
    s = basis_state(("A", H))
    with pytest.raises(ValueError):
        Ensemble(tuple((w, s) for w in weights))


def test_ensemble_rejects_mixed_photon_counts():
    with pytest.raises(ValueError, match="photon counts"):
        Ensemble(((0.5, basis_state(("A", H))), (0.5, basis_state(("A", H), ("B", H)))))


# -- bell_state ------------------------------------------------------------------------

def test_phi_plus_on_source_modes():
    s = bell_state(BellKind.PHI_PLUS, AB, 0)
    assert s.amplitude([("A", H), ("B", H)]) == pytest.approx(SQ, abs=1e-12)
    assert s.amplitude([("A", V), ("B", V)]) == pytest.approx(SQ, abs=1e-12)
    assert len(s) == 2


def test_psi_minus_signs():
    s = bell_state("PsiMinus", AB)
    assert s.amplitude([("A", H), ("B", V)]) == pytest.approx(SQ)
    assert s.amplitude([("A", V), ("B", H)]) == pytest.approx(-SQ)


def test_bell_states_are_orthonormal():
    states = [bell_state(k, AB, 1) for k in BellKind]
    for i, s in enumerate(states):
        for j, t in enumerate(states):
            assert fidelity(s, t) == pytest.approx(float(i == j), abs=1e-12)


def test_bell_state_rejects_duplicate_modes():
    with pytest.raises(ValueError, match="distinct"):
        bell_state("PhiPlus", ("A", "A"))


def test_bell_state_delay():
    assert bell_state("PhiPlus", AB, 3).delays() == {3}


def test_ghz_state_two_terms():
    g = ghz_state(["A", "B", "C"], delay=1, sign=-1)
    assert g.amplitude([("A", V, 1), ("B", V, 1), ("C", V, 1)]) == pytest.approx(-SQ)
    with pytest.raises(ValueError):
        ghz_state(["A", "A"])


# -- tensor ----------------------------------------------------------------------------

def test_tensor_of_basis_kets():
    s = tensor(basis_state(("A", H)), basis_state(("B", H)))
    assert s.amplitude([("A", H), ("B", H)]) == 1


def test_dof_product_builds_four_term_state():
    pol = bell_state("PhiPlus", AB)
    tb = PureState({ket(("A", H, 0), ("B", H, 0)): SQ, ket(("A", H, 1), ("B", H, 1)): SQ})
    s = dof_product(pol, tb)
    assert len(s) == 4
    assert all(abs(a - 0.5) < 1e-12 for _, a in s.items())
    assert s.delays() == {0, 1}


def test_tensor_rejects_shared_modes():
    with pytest.raises(ValueError, match="share"):
        tensor(basis_state(("A", H)), basis_state(("A", V)))


@given(two_photon_states(), st.sampled_from(list(BellKind)))
def test_tensor_norm_is_one(s, kind):
    t = bell_state(kind, ("C", "D"))
    out = tensor(s, t)
    assert out.photon_count == 4
    assert abs(out.norm() - 1) < 1e-12


# -- fidelity --------------------------------------------------------------------------

@given(two_photon_states(), st.floats(0, 2 * math.pi))
def test_fidelity_is_phase_invariant(s, theta):
    assert fidelity(s.scaled(cmath.exp(1j * theta)), s) == pytest.approx(1, abs=1e-12)


@given(two_photon_states(), two_photon_states())
def test_fidelity_symmetric_and_canonical_invariant(s, t):
    if s.modes() != t.modes():
        with pytest.raises(ValueError, match="mode sets"):
            fidelity(s, t)
        return
    f = fidelity(s, t)
    assert 0 <= f <= 1
    assert fidelity(t, s) == pytest.approx(f, abs=1e-12)
    assert fidelity(canonical_phase(s), t) == pytest.approx(f, abs=1e-12)
    assert fidelity(s, canonical_phase(t)) == pytest.approx(f, abs=1e-12)


def test_fidelity_orthogonal_bell_states():
    assert fidelity(bell_state("PhiPlus", AB), bell_state("PsiPlus", AB)) == 0


def test_inner_is_conjugate_symmetric():
    s = PureState({ket(("A", H)): SQ, ket(("A", V)): 1j * SQ})
    t = basis_state(("A", V))
    assert inner(s, t) == pytest.approx(inner(t, s).conjugate())


# -- project_modes ---------------------------------------------------------------------

@pytest.mark.parametrize("ports, sign", [(("a1", "a2"), 1), (("a1", "b2"), -1)])
def test_project_encoder_output(ports, sign):
    prob, cond = project_modes(encoded_state(), dict(enumerate(ports)))
    assert prob == pytest.approx(0.25, abs=1e-12)
    expected = PureState({
        ket((ports[0], H, 0), (ports[1], H, 0)): SQ,
        ket((ports[0], H, 1), (ports[1], H, 1)): sign * SQ,
    })
    assert cond.isclose(expected)


def test_project_modes_probabilities_sum_to_one():
    s = encoded_state()
    total = 0.0
    for p0 in ("a1", "b1"):
        for p1 in ("a2", "b2"):
            prob, _ = project_modes(s, {0: p0, 1: p1})
            assert prob == pytest.approx(0.25, abs=1e-12)
            total += prob
    assert total == pytest.approx(1, abs=1e-12)


def test_project_onto_own_branch_is_identity():
    s = bell_state("PsiPlus", AB)
    prob, cond = project_modes(s, {0: "A", 1: "B"})
    assert prob == pytest.approx(1)
    assert cond.isclose(s)


def test_project_zero_branch_is_flagged():
    assert project_modes(bell_state("PhiPlus", AB), {0: "X", 1: "B"}) == (0.0, None)


def test_project_requires_full_assignment():
    with pytest.raises(ValueError):
        project_modes(bell_state("PhiPlus", AB), {0: "A"})


# -- canonical_phase -------------------------------------------------------------------

@pytest.mark.parametrize("theta", [0.0, 0.3, math.pi / 2, math.pi, 5.0])
def test_canonical_phase_removes_global_phase(theta):
    phi = bell_state("PhiPlus", AB)
    out = canonical_phase(phi.scaled(cmath.exp(1j * theta)))
    assert out.isclose(phi)


def test_canonical_phase_fixes_minus_sign():
    phim = bell_state("PhiMinus", AB)
    out = canonical_phase(phim.scaled(-1))
    assert out.isclose(phim)
    assert out.amplitude([("A", H), ("B", H)]) == pytest.approx(SQ)


@given(two_photon_states())
def test_canonical_phase_idempotent(s):
    once = canonical_phase(s)
    assert canonical_phase(once).isclose(once)
    assert fidelity(once, s) == pytest.approx(1, abs=1e-12)


# -- ensemble_fidelity -----------------------------------------------------------------

def test_ensemble_fidelity_pure():
    phi = bell_state("PhiPlus", AB)
    assert ensemble_fidelity(Ensemble.pure(phi), phi) == pytest.approx(1)


@pytest.mark.parametrize("weights", [(0.25, 0.25, 0.25, 0.25), (0.7, 0.1, 0.1, 0.1), (0.0, 0.5, 0.5, 0.0)])
def test_ensemble_fidelity_bell_mixture(weights):
    kinds = ("PhiPlus", "PhiMinus", "PsiPlus", "PsiMinus")
    e = Ensemble.from_weighted((w, bell_state(k, AB)) for w, k in zip(weights, kinds))
    assert ensemble_fidelity(e, bell_state("PhiPlus", AB)) == pytest.approx(weights[0], abs=1e-12)


def test_ensemble_fidelity_mode_mismatch():
    with pytest.raises(ValueError):
        ensemble_fidelity(Ensemble.pure(bell_state("PhiPlus", AB)), bell_state("PhiPlus", ("A", "C")))
