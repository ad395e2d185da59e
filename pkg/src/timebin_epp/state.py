"""Sparse amplitude algebra for few-photon states.

Each photon carries three labels: a spatial mode (opaque string), a
polarization and an integer time-bin delay counted in units of the
interferometer imbalance (short arm 0, long arm 1, accumulating).  Photons
are distinguishable by their index in the ket, so a ket is simply a tuple
of per-photon labels and a state is a map from kets to amplitudes.
"""

from __future__ import annotations

import cmath
import enum
import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

PRUNE = 1e-15
ATOL = 1e-12
SQRT1_2 = 1 / math.sqrt(2)


class Polarization(enum.IntEnum):
    H = 0
    V = 1

    def flipped(self) -> Polarization:
        return Polarization.V if self is Polarization.H else Polarization.H


H = Polarization.H
V = Polarization.V


class PhotonBasis(NamedTuple):
    """Classical label of one photon: spatial mode, polarization, delay."""

    mode: str
    pol: Polarization
    delay: int = 0


BasisKet = tuple  # tuple[PhotonBasis, ...], one entry per photon


def _photon(p) -> PhotonBasis:
    if type(p) is PhotonBasis and type(p.pol) is Polarization:
        return p
    mode, pol, *rest = p
    return PhotonBasis(str(mode), Polarization(pol), int(rest[0]) if rest else 0)


class BellKind(str, enum.Enum):
    PHI_PLUS = "PhiPlus"
    PHI_MINUS = "PhiMinus"
    PSI_PLUS = "PsiPlus"
    PSI_MINUS = "PsiMinus"


class PureState:
    """Immutable sparse pure state.

    Parameters
    ----------
    terms : mapping
        ``BasisKet -> complex`` amplitudes. Entries below ``1e-15`` in
        magnitude are dropped.
    normalize : bool
        Rescale to unit norm instead of requiring it.

    Raises
    ------
    ValueError
        On an empty state, mixed photon counts or (without ``normalize``) a
        norm that differs from one by more than ``1e-12``.
    """

    __slots__ = ("_terms", "photon_count", "_hash")

    def __init__(self, terms: Mapping[BasisKet, complex], normalize: bool = False):
        kept = {}
        for ket, amp in terms.items():
            amp = complex(amp)
            if abs(amp) > PRUNE:
                kept[tuple(_photon(p) for p in ket)] = amp
        if not kept:
            raise ValueError("state has no nonzero amplitude")
        counts = {len(k) for k in kept}
        if len(counts) != 1:
            raise ValueError(f"kets have different photon counts: {sorted(counts)}")
        for ket in kept:
            for p in ket:
                if p.delay < 0:
                    raise ValueError(f"negative delay in {p}")
        norm2 = math.fsum(abs(a) ** 2 for a in kept.values())
        if normalize:
            scale = 1 / math.sqrt(norm2)
            kept = {k: a * scale for k, a in kept.items()}
        elif abs(norm2 - 1) > ATOL:
            raise ValueError(f"state norm^2 is {norm2!r}, expected 1")
        self._terms = kept
        self.photon_count = counts.pop()
        self._hash = None

    @classmethod
    def _trusted(cls, terms: dict, normalize: bool = False) -> PureState:
        # Internal constructor for kets already made of PhotonBasis labels.
        self = object.__new__(cls)
        kept = {k: a for k, a in terms.items() if abs(a) > PRUNE}
        if not kept:
            raise ValueError("state has no nonzero amplitude")
        norm2 = math.fsum(abs(a) ** 2 for a in kept.values())
        if normalize:
            scale = 1 / math.sqrt(norm2)
            kept = {k: a * scale for k, a in kept.items()}
        elif abs(norm2 - 1) > ATOL:
            raise ValueError(f"state norm^2 is {norm2!r}, expected 1")
        self._terms = kept
        self.photon_count = len(next(iter(kept)))
        self._hash = None
        return self

    @property
    def terms(self) -> Mapping[BasisKet, complex]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def amplitude(self, ket: Sequence) -> complex:
        return self._terms.get(tuple(_photon(p) for p in ket), 0j)

    def norm(self) -> float:
        return math.sqrt(math.fsum(abs(a) ** 2 for a in self._terms.values()))

    def modes(self) -> frozenset[str]:
        return frozenset(p.mode for ket in self._terms for p in ket)

    def delays(self) -> frozenset[int]:
        return frozenset(p.delay for ket in self._terms for p in ket)

    def scaled(self, factor: complex) -> PureState:
        """Multiply by a unit-modulus factor (a global phase)."""
        return PureState._trusted({k: a * factor for k, a in self._terms.items()})

    def transform(self, fn: Callable[[BasisKet], Iterable[tuple[BasisKet, complex]]]) -> PureState:
        """Apply a linear map given by its action on basis kets.

        ``fn(ket)`` yields ``(new_ket, factor)`` pairs; contributions landing
        on the same ket are summed.
        """
        out: dict = {}
        for ket, amp in self._terms.items():
            for new_ket, factor in fn(ket):
                out[new_ket] = out.get(new_ket, 0j) + amp * factor
        return PureState._trusted(out)

    def sorted_items(self) -> list[tuple[BasisKet, complex]]:
        return sorted(self._terms.items(), key=lambda kv: kv[0])

    def isclose(self, other: PureState, atol: float = ATOL) -> bool:
        """Amplitude-by-amplitude comparison (phase sensitive)."""
        keys = self._terms.keys() | other._terms.keys()
        return all(abs(self._terms.get(k, 0j) - other._terms.get(k, 0j)) <= atol for k in keys)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PureState):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __repr__(self) -> str:
        parts = []
        for ket, amp in self.sorted_items():
            label = ",".join(f"{p.mode}:{p.pol.name}{p.delay}" for p in ket)
            parts.append(f"({amp:.6g})|{label}>")
        return "PureState(" + " + ".join(parts) + ")"


@dataclass(frozen=True)
class Ensemble:
    """Probability-weighted list of pure states (a mixed state)."""

    components: tuple[tuple[float, PureState], ...]

    def __post_init__(self):
        comps = tuple((float(w), s) for w, s in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("ensemble needs at least one component")
        if any(w <= 0 for w, _ in comps):
            raise ValueError("ensemble weights must be positive")
        total = math.fsum(w for w, _ in comps)
        if abs(total - 1) > ATOL:
            raise ValueError(f"ensemble weights sum to {total!r}, expected 1")
        if len({s.photon_count for _, s in comps}) != 1:
            raise ValueError("ensemble components have different photon counts")

    @classmethod
    def pure(cls, state: PureState) -> Ensemble:
        return cls(((1.0, state),))

    @classmethod
    def from_weighted(cls, pairs: Iterable[tuple[float, PureState]]) -> Ensemble:
        """Build from pairs, dropping zero weights."""
        return cls(tuple((w, s) for w, s in pairs if w > 0))

    @property
    def photon_count(self) -> int:
        return self.components[0][1].photon_count

    def map(self, fn: Callable[[PureState], PureState]) -> Ensemble:
        return Ensemble(tuple((w, fn(s)) for w, s in self.components))

    def __iter__(self):
        return iter(self.components)

    def __len__(self) -> int:
        return len(self.components)


def ket(*photons) -> BasisKet:
    """Shorthand: ``ket(("A", H), ("B", V, 1))``."""
    return tuple(_photon(p) for p in photons)


def basis_state(*photons) -> PureState:
    return PureState({ket(*photons): 1.0})


_BELL_SIGNS = {
    BellKind.PHI_PLUS: ((H, H), (V, V), 1),
    BellKind.PHI_MINUS: ((H, H), (V, V), -1),
    BellKind.PSI_PLUS: ((H, V), (V, H), 1),
    BellKind.PSI_MINUS: ((H, V), (V, H), -1),
}


def bell_state(kind: BellKind | str, modes: tuple[str, str], delay: int = 0) -> PureState:
    """Two-photon polarization Bell state, both photons at ``delay``."""
    kind = BellKind(kind)
    m0, m1 = modes
    if m0 == m1:
        raise ValueError(f"Bell state needs two distinct modes, got {modes}")
    first, second, sign = _BELL_SIGNS[kind]
    return PureState({
        ket((m0, first[0], delay), (m1, first[1], delay)): SQRT1_2,
        ket((m0, second[0], delay), (m1, second[1], delay)): sign * SQRT1_2,
    })


@lru_cache(maxsize=1024)
def _ghz(modes: tuple[str, ...], delay: int, sign: int) -> PureState:
    return PureState({
        ket(*((m, H, delay) for m in modes)): SQRT1_2,
        ket(*((m, V, delay) for m in modes)): sign * SQRT1_2,
    })


def ghz_state(modes: Sequence[str], delay: int = 0, sign: int = 1) -> PureState:
    """``(|H...H> + sign |V...V>)/sqrt(2)`` on the given modes."""
    if len(set(modes)) != len(modes):
        raise ValueError(f"GHZ modes must be distinct, got {modes}")
    return _ghz(tuple(modes), int(delay), int(sign))


def tensor(s: PureState, t: PureState) -> PureState:
    """Product state; photons of ``t`` are appended after those of ``s``."""
    overlap = s.modes() & t.modes()
    if overlap:
        raise ValueError(f"tensor factors share modes {sorted(overlap)}")
    return PureState({ks + kt: a * b for ks, a in s.items() for kt, b in t.items()})


def dof_product(polarization: PureState, timebin: PureState) -> PureState:
    """Combine a polarization part and a mode/time-bin part photon by photon.

    Each photon of the result takes its polarization from ``polarization``
    and its mode and delay from ``timebin``; the labels those states carry
    for the other degree of freedom are ignored.  This is the product
    ``rho_P (x) rho_T`` for a fixed photon set.
    """
    if polarization.photon_count != timebin.photon_count:
        raise ValueError("polarization and time-bin parts differ in photon count")
    pol_amps: dict = {}
    for k, a in polarization.items():
        key = tuple(p.pol for p in k)
        pol_amps[key] = pol_amps.get(key, 0j) + a
    out = {}
    for kt, b in timebin.items():
        for pols, a in pol_amps.items():
            new = tuple(PhotonBasis(p.mode, pol, p.delay) for p, pol in zip(kt, pols))
            out[new] = out.get(new, 0j) + a * b
    return PureState._trusted(out, normalize=True)


def inner(s: PureState, t: PureState) -> complex:
    """``<s|t>``."""
    if len(s) > len(t):
        return sum((a.conjugate() * t._terms[k] for k, a in s.items() if k in t._terms), 0j)
    return sum((s._terms[k].conjugate() * b for k, b in t.items() if k in s._terms), 0j)


def _check_compatible(s: PureState, t: PureState) -> None:
    if s.photon_count != t.photon_count:
        raise ValueError(f"photon counts differ: {s.photon_count} vs {t.photon_count}")
    if s.modes() != t.modes():
        raise ValueError(f"mode sets differ: {sorted(s.modes())} vs {sorted(t.modes())}")


def fidelity(s: PureState, t: PureState) -> float:
    """``|<s|t>|^2``; raises ``ValueError`` if the mode sets differ."""
    _check_compatible(s, t)
    return min(1.0, abs(inner(s, t)) ** 2)


def ensemble_fidelity(e: Ensemble, target: PureState) -> float:
    return math.fsum(w * fidelity(s, target) for w, s in e)


def project_modes(s: PureState, assignment: Mapping[int, str]) -> tuple[float, PureState | None]:
    """Condition on photon ``i`` being found in mode ``assignment[i]``.

    Returns the branch probability and the renormalized conditional state,
    or ``(0.0, None)`` when no ket matches.
    """
    if set(assignment) != set(range(s.photon_count)):
        raise ValueError("assignment must cover every photon index")
    wanted = tuple(assignment[i] for i in range(s.photon_count))
    kept = {k: a for k, a in s.items() if tuple(p.mode for p in k) == wanted}
    prob = math.fsum(abs(a) ** 2 for a in kept.values())
    if prob <= PRUNE**2 or not kept:
        return 0.0, None
    return prob, PureState._trusted(kept, normalize=True)


def canonical_phase(s: PureState) -> PureState:
    """Fix the global phase so the smallest ket has a real positive amplitude."""
    lead = min(s)
    amp = s._terms[lead]
    return s.scaled(abs(amp) / amp)


def global_phase_between(s: PureState, t: PureState) -> complex | None:
    """Return ``c`` with ``t == c * s`` (|c| = 1) if one exists, else None."""
    if s._terms.keys() != t._terms.keys():
        return None
    lead = min(s)
    c = t._terms[lead] / s._terms[lead]
    if abs(abs(c) - 1) > 1e-9 or not t.isclose(s.scaled(c / abs(c))):
        return None
    return c / abs(c)


def phase(theta: float) -> complex:
    return cmath.exp(1j * theta)
