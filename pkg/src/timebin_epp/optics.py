"""Linear-optical elements acting on :class:`~timebin_epp.state.PureState`.

Every element acts on single photons and is therefore written as a map on
one photon label at a time.  The 50:50 beam splitter uses the real Hadamard
convention::

    in1 -> (out1 + out2) / sqrt(2)
    in2 -> (out1 - out2) / sqrt(2)
"""

from __future__ import annotations

import enum
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any

from .state import SQRT1_2, H, PhotonBasis, PureState


class ElementError(ValueError):
    """An element was wired or used in a way the representation cannot express."""


class Kind(str, enum.Enum):
    PBS = "PBS"
    HWP = "HWP"
    BS = "BS"
    DELAY = "Delay"
    POL_DELAY = "PolDelay"
    POCKELS = "Pockels"


@dataclass(frozen=True)
class Element:
    """One optical element.

    ``modes`` lists the wired modes in a kind-specific order:

    ======== ==================================== =====================
    kind     modes                                params
    ======== ==================================== =====================
    PBS      (in, transmit, reflect)
    HWP      (mode,)
    BS       (in1, in2, out1, out2)
    Delay    (mode,)                              (shift,)
    PolDelay (in, out)                            (shift_H, shift_V)
    Pockels  (mode,)                              (gate_delay,)
    ======== ==================================== =====================

    PolDelay models an unbalanced interferometer built from polarizing
    splitters, so it is deterministic; ``out`` names its exit port and may
    equal ``in``.
    """

    kind: Kind
    modes: tuple[str, ...]
    params: tuple[int, ...] = ()

    _ARITY = {
        Kind.PBS: (3, 0),
        Kind.HWP: (1, 0),
        Kind.BS: (4, 0),
        Kind.DELAY: (1, 1),
        Kind.POL_DELAY: (2, 2),
        Kind.POCKELS: (1, 1),
    }

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "params", tuple(int(p) for p in self.params))
        n_modes, n_params = self._ARITY[self.kind]
        if len(self.modes) != n_modes or len(self.params) != n_params:
            raise ElementError(f"{self.kind.value} takes {n_modes} modes and {n_params} params")
        if any(p < 0 for p in self.params):
            raise ElementError(f"{self.kind.value}: delays must be non-negative, got {self.params}")
        distinct = self.modes if self.kind is not Kind.POL_DELAY else ()
        if len(set(distinct)) != len(distinct):
            raise ElementError(f"{self.kind.value}: wired modes must be distinct, got {self.modes}")

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "modes": list(self.modes), "params": list(self.params)}


def pbs(in_mode: str, transmit_mode: str, reflect_mode: str) -> Element:
    return Element(Kind.PBS, (in_mode, transmit_mode, reflect_mode))


def hwp(mode: str) -> Element:
    return Element(Kind.HWP, (mode,))


def bs(in1: str, in2: str, out1: str, out2: str) -> Element:
    return Element(Kind.BS, (in1, in2, out1, out2))


def delay(mode: str, shift: int) -> Element:
    return Element(Kind.DELAY, (mode,), (shift,))


def pol_delay(mode: str, shift_h: int, shift_v: int, out_mode: str | None = None) -> Element:
    return Element(Kind.POL_DELAY, (mode, out_mode or mode), (shift_h, shift_v))


def pockels(mode: str, gate_delay: int) -> Element:
    return Element(Kind.POCKELS, (mode,), (gate_delay,))


@dataclass(frozen=True)
class Circuit:
    """Ordered element list over a declared mode set."""

    mode_set: frozenset[str]
    elements: tuple[Element, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "mode_set", frozenset(self.mode_set))
        object.__setattr__(self, "elements", tuple(self.elements))
        for i, el in enumerate(self.elements):
            missing = set(el.modes) - self.mode_set
            if missing:
                raise ElementError(f"element {i} ({el.kind.value}) wires undeclared modes {sorted(missing)}")

    @classmethod
    def from_elements(cls, elements: Iterable[Element], extra_modes: Iterable[str] = ()) -> Circuit:
        elements = tuple(elements)
        modes = {m for el in elements for m in el.modes} | set(extra_modes)
        return cls(frozenset(modes), elements)

    def __add__(self, other: Circuit) -> Circuit:
        return Circuit(self.mode_set | other.mode_set, self.elements + other.elements)

    def __len__(self) -> int:
        return len(self.elements)


def _relabel(state: PureState, fn) -> PureState:
    """Apply a per-photon map ``fn(photon) -> [(photon', factor), ...]``."""

    def on_ket(k):
        branches = [((), 1.0)]
        for p in k:
            images = fn(p)
            branches = [(prefix + (q,), f * g) for prefix, f in branches for q, g in images]
        return branches

    return state.transform(on_ket)


def _check_free(state: PureState, targets: Sequence[str], source: str) -> None:
    for k in state:
        occupied = [p.mode for p in k]
        if source in occupied:
            for t in targets:
                if t in occupied:
                    raise ElementError(f"photon routed from {source!r} into occupied mode {t!r}")


def apply_pbs(state: PureState, in_mode: str, transmit_mode: str, reflect_mode: str) -> PureState:
    """Polarizing splitter: H goes to ``transmit_mode``, V to ``reflect_mode``."""
    _check_free(state, (transmit_mode, reflect_mode), in_mode)

    def fn(p):
        if p.mode != in_mode:
            return ((p, 1.0),)
        out = transmit_mode if p.pol is H else reflect_mode
        return ((PhotonBasis(out, p.pol, p.delay), 1.0),)

    return _relabel(state, fn)


def apply_hwp(state: PureState, mode: str) -> PureState:
    """Half-wave plate at 45 degrees: H <-> V on ``mode``."""

    def fn(p):
        if p.mode != mode:
            return ((p, 1.0),)
        return ((PhotonBasis(p.mode, p.pol.flipped(), p.delay), 1.0),)

    return _relabel(state, fn)


def apply_bs(state: PureState, in1: str, in2: str, out1: str, out2: str) -> PureState:
    """Balanced splitter with the real Hadamard convention (minus on in2 -> out2)."""
    _check_free(state, (out1, out2), in1)
    _check_free(state, (out1, out2), in2)

    def fn(p):
        if p.mode == in1:
            sign = 1.0
        elif p.mode == in2:
            sign = -1.0
        else:
            return ((p, 1.0),)
        return (
            (PhotonBasis(out1, p.pol, p.delay), SQRT1_2),
            (PhotonBasis(out2, p.pol, p.delay), sign * SQRT1_2),
        )

    return _relabel(state, fn)


def apply_delay(state: PureState, mode: str, shift: int) -> PureState:
    if shift < 0:
        raise ElementError(f"delay shift must be non-negative, got {shift}")

    def fn(p):
        if p.mode != mode:
            return ((p, 1.0),)
        return ((PhotonBasis(p.mode, p.pol, p.delay + shift), 1.0),)

    return _relabel(state, fn)


def apply_pol_delay(state: PureState, mode: str, shift_h: int, shift_v: int,
                    out_mode: str | None = None) -> PureState:
    """Polarization-dependent delay; the photon leaves on ``out_mode``."""
    if shift_h < 0 or shift_v < 0:
        raise ElementError("polarization delays must be non-negative")
    out_mode = out_mode or mode
    if out_mode != mode:
        _check_free(state, (out_mode,), mode)

    def fn(p):
        if p.mode != mode:
            return ((p, 1.0),)
        shift = shift_h if p.pol is H else shift_v
        return ((PhotonBasis(out_mode, p.pol, p.delay + shift), 1.0),)

    return _relabel(state, fn)


def apply_pockels(state: PureState, mode: str, gate_delay: int) -> PureState:
    """Flip H <-> V for photons in ``mode`` arriving exactly at ``gate_delay``."""

    def fn(p):
        if p.mode != mode or p.delay != gate_delay:
            return ((p, 1.0),)
        return ((PhotonBasis(p.mode, p.pol.flipped(), p.delay), 1.0),)

    return _relabel(state, fn)


def apply_element(state: PureState, el: Element) -> PureState:
    m, q = el.modes, el.params
    if el.kind is Kind.PBS:
        return apply_pbs(state, *m)
    if el.kind is Kind.HWP:
        return apply_hwp(state, m[0])
    if el.kind is Kind.BS:
        return apply_bs(state, *m)
    if el.kind is Kind.DELAY:
        return apply_delay(state, m[0], q[0])
    if el.kind is Kind.POL_DELAY:
        return apply_pol_delay(state, m[0], q[0], q[1], m[1])
    return apply_pockels(state, m[0], q[0])


def apply_circuit(state: PureState, circuit: Circuit) -> PureState:
    """Apply the elements in order.

    Raises
    ------
    ElementError
        If the state occupies undeclared modes, or an element is misused;
        the message names the failing element index.
    """
    stray = state.modes() - circuit.mode_set
    if stray:
        raise ElementError(f"state occupies modes outside the circuit: {sorted(stray)}")
    for i, el in enumerate(circuit.elements):
        try:
            state = apply_element(state, el)
        except ElementError as exc:
            raise ElementError(f"element {i} ({el.kind.value}): {exc}") from exc
    return state
