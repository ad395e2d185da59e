"""Noise applied to the photons between the encoder and the purifier.

Three channels are provided:

* a Bell-diagonal polarization channel with weights ``(F, a, b, c)``,
  realized as identity / Z / X / XZ on the second photon of a pair;
* a collective phase channel: each photon picks up a phase that depends on
  where it travels but not on its time bin;
* an adversarial time-bin dephasing channel that imprints a phase per unit
  of delay on one photon.  Real fibres do not do this to time bins; the
  channel exists to check that the simulator is not trivially always pure.

There is deliberately no time-bin bit-flip channel (equal propagation speed
of both bins rules it out).
"""

from __future__ import annotations

import cmath
import math
from collections.abc import Mapping
from dataclasses import dataclass

from .state import (
    ATOL,
    BellKind,
    Ensemble,
    PhotonBasis,
    PureState,
    V,
    dof_product,
)


@dataclass(frozen=True)
class NoiseParams:
    """Bell-diagonal weights plus per-side collective phases (radians)."""

    F: float = 1.0
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    theta_a: float = 0.0
    theta_b: float = 0.0

    def __post_init__(self):
        for name in ("F", "a", "b", "c"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be a non-negative probability, got {value!r}")
        total = math.fsum(self.weights)
        if abs(total - 1) > ATOL:
            raise ValueError(f"F + a + b + c must equal 1, got {total!r}")

    @property
    def weights(self) -> tuple[float, float, float, float]:
        return (self.F, self.a, self.b, self.c)

    def bell_weights(self) -> dict[BellKind, float]:
        return dict(zip(BELL_ORDER, self.weights))


BELL_ORDER = (BellKind.PHI_PLUS, BellKind.PHI_MINUS, BellKind.PSI_PLUS, BellKind.PSI_MINUS)

# Pauli on the second photon mapping |Phi+> to each Bell state: (bit flip, phase flip)
_PAULI = {
    BellKind.PHI_PLUS: (False, False),
    BellKind.PHI_MINUS: (False, True),
    BellKind.PSI_PLUS: (True, False),
    BellKind.PSI_MINUS: (True, True),
}


def apply_bell_error(s: PureState, kind: BellKind | str, photon: int = 1) -> PureState:
    """Apply the Pauli that takes |Phi+> to ``kind`` on one photon's polarization.

    The phase flip acts first, then the bit flip.
    """
    bit, phase_flip = _PAULI[BellKind(kind)]
    if not bit and not phase_flip:
        return s
    out = {}
    for k, amp in s.items():
        p = k[photon]
        if phase_flip and p.pol is V:
            amp = -amp
        if bit:
            k = k[:photon] + (PhotonBasis(p.mode, p.pol.flipped(), p.delay),) + k[photon + 1:]
        out[k] = amp
    return PureState._trusted(out)


def bell_diagonal_channel(e: Ensemble, p: NoiseParams, photon_pair: tuple[int, int] = (0, 1)) -> Ensemble:
    """Split every component four ways with weights ``F, a, b, c``.

    Only the polarization of ``photon_pair[1]`` is touched; modes and delays
    are left alone.
    """
    _, target = photon_pair
    for _, s in e:
        if not 0 <= target < s.photon_count or photon_pair[0] == target:
            raise ValueError(f"invalid photon pair {photon_pair} for {s.photon_count} photons")
    return Ensemble.from_weighted(
        (w * q, apply_bell_error(s, kind, target))
        for w, s in e
        for kind, q in zip(BELL_ORDER, p.weights)
    )


def reprepare_polarization(e: Ensemble, polarization: PureState) -> Ensemble:
    """Replace the polarization part of every component, keeping modes and delays."""
    return e.map(lambda s: dof_product(polarization, s))


def collective_phase_channel(s: PureState, theta_per_location: Mapping[str, float]) -> PureState:
    """Each photon acquires ``exp(i theta[mode])`` independent of its time bin."""
    cache = {m: cmath.exp(1j * t) for m, t in theta_per_location.items()}
    out = {}
    for k, amp in s.items():
        for p in k:
            f = cache.get(p.mode)
            if f is not None:
                amp *= f
        out[k] = amp
    return PureState._trusted(out)


def side_phases(theta_a: float, theta_b: float, alice_modes, bob_modes) -> dict[str, float]:
    """Per-mode phase map for independent fibre fluctuations on each side."""
    phases = {m: theta_a for m in alice_modes}
    phases.update({m: theta_b for m in bob_modes})
    return phases


def timebin_dephasing_channel(e: Ensemble, phi: float, photon: int = 1) -> Ensemble:
    """Multiply each amplitude by ``exp(i phi * delay)`` of one photon."""
    if phi == 0:
        return e

    def dephase(s: PureState) -> PureState:
        return PureState._trusted({k: amp * cmath.exp(1j * phi * k[photon].delay) for k, amp in s.items()})

    return e.map(dephase)


CHANNELS = {
    "bell_diagonal": bell_diagonal_channel,
    "collective_phase": collective_phase_channel,
    "timebin_dephasing": timebin_dephasing_channel,
}
