"""Encode, distribute, purify and herald.

Mode naming for party ``i`` (0-based) out of ``n``:

==============  ===================================================
``A``, ``B``..  source mode of the party's photon
``A_S/A_L``     short / long arm of the encoding interferometer
``a{i+1}``      first output of the recombining beam splitter
``b{i+1}``      second output
``c{i+1}``      H rail after the purifier's polarizing splitter
``d{i+1}``      V rail (turned to H by a half-wave plate)
``D{i+1}``      detector port fed by the c rail
``D{n+i+1}``    detector port fed by the d rail
==============  ===================================================

For two parties this reproduces the labels a1, b1, a2, b2, c1, c2, d1, d2
and D1..D4 of the bipartite setup.
"""

from __future__ import annotations

import enum
import math
import re
from collections.abc import Sequence
from dataclasses import dataclass
from functools import lru_cache

from . import optics
from .channels import (
    NoiseParams,
    apply_bell_error,
    collective_phase_channel,
    timebin_dephasing_channel,
)
from .optics import Circuit
from .state import (
    BellKind,
    Ensemble,
    PureState,
    V,
    canonical_phase,
    dof_product,
    fidelity,
    ghz_state,
    project_modes,
)

MAX_PARTIES = 8
PARTY_NAMES = "ABCDEFGH"
ACCEPTING_PATTERNS = ("D1D2", "D1D4", "D2D3", "D3D4")
_PORT = re.compile(r"D(\d+)$")


class InternalConsistencyError(RuntimeError):
    """The evolved state violates a structural guarantee of the element model."""


def _check_parties(n: int) -> None:
    if not isinstance(n, int) or not 2 <= n <= MAX_PARTIES:
        raise ValueError(f"number of parties must be an integer in [2, {MAX_PARTIES}], got {n!r}")


def source_mode(i: int) -> str:
    return PARTY_NAMES[i]


def port_modes(i: int, n: int) -> tuple[str, str]:
    """Detector ports (c-rail port, d-rail port) of party ``i``."""
    return f"D{i + 1}", f"D{n + i + 1}"


# -- encoder -----------------------------------------------------------------

def encoder_arms(n: int = 2) -> Circuit:
    """Polarizing splitter, half-wave plate and one unit of delay on the long arm."""
    _check_parties(n)
    els = []
    for i in range(n):
        src = source_mode(i)
        els += [
            optics.pbs(src, f"{src}_S", f"{src}_L"),
            optics.hwp(f"{src}_L"),
            optics.delay(f"{src}_L", 1),
        ]
    return Circuit.from_elements(els)


def encoder_splitters(n: int = 2) -> Circuit:
    """Recombining beam splitters: short arm into in1, long arm into in2."""
    _check_parties(n)
    els = [
        optics.bs(f"{source_mode(i)}_S", f"{source_mode(i)}_L", f"a{i + 1}", f"b{i + 1}")
        for i in range(n)
    ]
    return Circuit.from_elements(els)


def encoder_circuit(n: int = 2) -> Circuit:
    return encoder_arms(n) + encoder_splitters(n)


@lru_cache(maxsize=None)
def source_state(n: int = 2) -> PureState:
    """Polarization GHZ state on the source modes (|Phi+> for two parties)."""
    _check_parties(n)
    return ghz_state([source_mode(i) for i in range(n)])


def ghz_encode(n: int) -> PureState:
    """``|H...H> (x) (|0...0> + |1...1>)/sqrt(2)`` on the interferometer arms."""
    return optics.apply_circuit(source_state(n), encoder_arms(n))


def encode_source_pair() -> PureState:
    return ghz_encode(2)


@lru_cache(maxsize=None)
def encoded_state(n: int = 2) -> PureState:
    """Full encoder output after the recombining beam splitters."""
    return optics.apply_circuit(ghz_encode(n), encoder_splitters(n))


# -- branches ----------------------------------------------------------------

def branch_label(ports: Sequence[str]) -> str:
    """``a`` ports first, each group in party order: ``('b1', 'a2') -> 'a2b1'``."""
    return "".join(sorted(ports, key=lambda m: (m[0], int(m[1:]))))


def branch_sign(ports: Sequence[str]) -> int:
    """Sign of the |L...L> term: one minus per party that exited through ``b``."""
    return -1 if sum(m.startswith("b") for m in ports) % 2 else 1


class Branch(str, enum.Enum):
    """Spatial branch of the bipartite encoder output."""

    A1A2 = "a1a2"
    A1B2 = "a1b2"
    A2B1 = "a2b1"
    B1B2 = "b1b2"

    @property
    def ports(self) -> tuple[str, str]:
        """Encoder output mode of photon A and of photon B."""
        return _BRANCH_PORTS[self]

    @property
    def timebin_sign(self) -> int:
        return branch_sign(self.ports)

    @classmethod
    def from_ports(cls, ports: Sequence[str]) -> Branch:
        return cls(branch_label(ports))


_BRANCH_PORTS = {
    Branch.A1A2: ("a1", "a2"),
    Branch.A1B2: ("a1", "b2"),
    Branch.A2B1: ("b1", "a2"),
    Branch.B1B2: ("b1", "b2"),
}


def all_port_choices(n: int) -> list[tuple[str, ...]]:
    """Every per-party choice of encoder output, party 0 varying slowest."""
    choices = [()]
    for i in range(n):
        choices = [c + (f"{x}{i + 1}",) for c in choices for x in "ab"]
    return choices


def distribute_ports(s: PureState) -> list[tuple[tuple[str, ...], float, PureState | None]]:
    n = s.photon_count
    out = []
    for ports in all_port_choices(n):
        prob, cond = project_modes(s, dict(enumerate(ports)))
        out.append((ports, prob, cond))
    return out


def distribute(s: PureState) -> list[tuple[Branch, float, PureState | None]]:
    """Condition the two-photon encoder output on each of the four branches.

    Zero-probability branches are kept with ``None`` as their state.
    """
    if s.photon_count != 2:
        raise ValueError("distribute expects a two-photon state")
    rows = [(Branch.from_ports(ports), p, c) for ports, p, c in distribute_ports(s)]
    return sorted(rows, key=lambda r: list(Branch).index(r[0]))


@lru_cache(maxsize=None)
def branch_state(ports: tuple[str, ...]) -> PureState:
    """Conditional state of the encoder output on the given per-party ports."""
    prob, cond = project_modes(encoded_state(len(ports)), dict(enumerate(ports)))
    if cond is None:
        raise InternalConsistencyError(f"encoder never populates {ports}")
    return cond


# -- purifier ----------------------------------------------------------------

def party_purifier(i: int, n: int, in_mode: str) -> list[optics.Element]:
    c, d = f"c{i + 1}", f"d{i + 1}"
    port_c, port_d = port_modes(i, n)
    return [
        optics.pbs(in_mode, c, d),
        optics.hwp(d),
        optics.pockels(c, 0),
        optics.pockels(d, 0),
        optics.pol_delay(c, 0, 1, out_mode=port_c),
        optics.pol_delay(d, 0, 1, out_mode=port_d),
    ]


def purifier_for_ports(ports: Sequence[str]) -> Circuit:
    n = len(ports)
    els = []
    for i, m in enumerate(ports):
        els += party_purifier(i, n, m)
    return Circuit.from_elements(els)


def build_purifier(branch: Branch | str) -> Circuit:
    return purifier_for_ports(Branch(branch).ports)


# -- detection ---------------------------------------------------------------

def pattern_label(ports: Sequence[str]) -> str:
    return "".join(sorted(ports, key=lambda m: int(m[1:])))


@dataclass(frozen=True)
class Outcome:
    """One detector coincidence pattern and the state heralded by it."""

    pattern: str
    ports: tuple[str, ...]
    heralded: PureState
    common_delay: int
    probability: float = 1.0

    def to_dict(self) -> dict:
        return {"pattern": self.pattern, "ports": list(self.ports),
                "common_delay": self.common_delay, "probability": self.probability}


def detection_outcomes(s: PureState) -> tuple[Outcome, ...]:
    """Group a purifier output by which port each photon reached.

    Raises
    ------
    InternalConsistencyError
        If a photon is not on a detector port or photons of one outcome do
        not share a single arrival time.
    """
    groups: dict[tuple[str, ...], dict] = {}
    for k, amp in s.items():
        ports = tuple(p.mode for p in k)
        groups.setdefault(ports, {})[k] = amp
    outcomes = []
    for ports, terms in groups.items():
        bad = [m for m in ports if not _PORT.match(m)]
        if bad:
            raise InternalConsistencyError(f"photons left the purifier on non-detector modes {bad}")
        delays = {p.delay for k in terms for p in k}
        if len(delays) != 1:
            raise InternalConsistencyError(
                f"pattern {pattern_label(ports)} has amplitude at mismatched delays {sorted(delays)}")
        prob = math.fsum(abs(a) ** 2 for a in terms.values())
        heralded = canonical_phase(PureState._trusted(terms, normalize=True))
        outcomes.append(Outcome(pattern_label(ports), ports, heralded, delays.pop(), prob))
    return tuple(sorted(outcomes, key=lambda o: [int(m[1:]) for m in sorted(o.ports, key=lambda m: int(m[1:]))]))


@lru_cache(maxsize=4096)
def purify_distribution(s: PureState, ports: tuple[str, ...]) -> tuple[Outcome, ...]:
    """Evolve a branch state through the purifier and split it by pattern."""
    out = optics.apply_circuit(s, purifier_for_ports(ports))
    return detection_outcomes(out)


def _pick(outcomes: Sequence[Outcome], rng=None, u: float | None = None) -> Outcome:
    if len(outcomes) == 1:
        return outcomes[0]
    if u is None:
        if rng is None:
            raise ValueError(
                f"input spreads over {len(outcomes)} detector patterns; pass rng to sample one")
        u = rng.random()
    acc = 0.0
    for o in outcomes:
        acc += o.probability
        if u < acc:
            return o
    return outcomes[-1]


def purify_and_detect(s: PureState, branch: Branch | str, rng=None) -> Outcome:
    """Run the purifier for ``branch`` and report the clicking pattern.

    A polarization basis item reaches exactly one pattern.  A superposition
    of items (a Bell state, say) reaches several with the returned
    probabilities; then ``rng`` (a ``numpy.random.Generator``) picks one.
    """
    return _pick(purify_distribution(s, Branch(branch).ports), rng)


def ghz_purify(s: PureState, ports: Sequence[str], rng=None) -> Outcome:
    """Multipartite version of :func:`purify_and_detect`; ``ports`` per party."""
    ports = tuple(ports)
    _check_parties(len(ports))
    return _pick(purify_distribution(s, ports), rng)


def _lowest_port_photon(ports: Sequence[str]) -> int:
    return min(range(len(ports)), key=lambda i: int(ports[i][1:]))


def phase_flip(s: PureState, photon: int) -> PureState:
    out = {}
    for k, amp in s.items():
        out[k] = -amp if k[photon].pol is V else amp
    return PureState._trusted(out)


def correct(o: Outcome, branch: Branch | str | Sequence[str], photon: int | None = None) -> PureState:
    """Undo the branch sign with a phase flip.

    ``branch`` is a :class:`Branch` or a per-party port tuple.  When the
    sign is -1 the flip is applied to ``photon`` (default: the photon at the
    lowest-numbered port).
    """
    ports = Branch(branch).ports if isinstance(branch, (Branch, str)) else tuple(branch)
    if branch_sign(ports) == 1:
        return o.heralded
    if photon is None:
        photon = _lowest_port_photon(o.ports)
    return canonical_phase(phase_flip(o.heralded, photon))


def target_state(o: Outcome) -> PureState:
    """``(|H...H> + |V...V>)/sqrt(2)`` on the outcome's ports and delay."""
    return ghz_state(o.ports, delay=o.common_delay)


def corrected_fidelity(o: Outcome, branch) -> float:
    return fidelity(correct(o, branch), target_state(o))


# -- transmission --------------------------------------------------------------

def transmit(state: PureState, kind: BellKind | str = BellKind.PHI_PLUS, *,
             noisy_pair: tuple[int, int] = (0, 1), phases: dict[str, float] | None = None,
             dephasing: float = 0.0) -> PureState:
    """Pass one branch state through the noisy link as a single Bell component.

    The polarization part becomes the source GHZ state hit by the Pauli
    error ``kind`` on ``noisy_pair[1]``; then location phases and optional
    time-bin dephasing of photon 1 are applied.
    """
    n = state.photon_count
    s = dof_product(source_state(n), state)
    s = apply_bell_error(s, kind, noisy_pair[1])
    if phases:
        s = collective_phase_channel(s, phases)
    if dephasing:
        s = timebin_dephasing_channel(Ensemble.pure(s), dephasing).components[0][1]
    return s


def transmitted_ensemble(ports: Sequence[str], params: NoiseParams, *,
                         phases: dict[str, float] | None = None, dephasing: float = 0.0,
                         noisy_pair: tuple[int, int] = (0, 1)) -> Ensemble:
    """Mixed state arriving at the purifier for one branch (weights F, a, b, c)."""
    base = branch_state(tuple(ports))
    return Ensemble.from_weighted(
        (w, transmit(base, kind, noisy_pair=noisy_pair, phases=phases, dephasing=dephasing))
        for kind, w in params.bell_weights().items()
    )


@lru_cache(maxsize=4096)
def _transmitted_fixed(ports: tuple[str, ...], kind: BellKind, dephasing: float) -> PureState:
    return transmit(branch_state(ports), kind, dephasing=dephasing)


def location_phases(ports: Sequence[str], thetas: Sequence[float]) -> dict[str, float]:
    """Phase per party, attached to every mode that party's photon can occupy."""
    out = {}
    for i, theta in enumerate(thetas):
        for m in (f"a{i + 1}", f"b{i + 1}"):
            out[m] = theta
    return out


@dataclass(frozen=True)
class BranchEvaluation:
    """Exact (ensemble-level) statistics of one branch."""

    ports: tuple[str, ...]
    pattern_probabilities: dict[str, float]
    pattern_fidelities: dict[str, float]
    success_probability: float
    mean_corrected_fidelity: float


def evaluate_ensemble(e: Ensemble, ports: Sequence[str]) -> BranchEvaluation:
    ports = tuple(ports)
    probs: dict[str, list[float]] = {}
    fids: dict[str, list[float]] = {}
    for w, s in e:
        for o in purify_distribution(s, ports):
            probs.setdefault(o.pattern, []).append(w * o.probability)
            fids.setdefault(o.pattern, []).append(w * o.probability * corrected_fidelity(o, ports))
    p = {k: math.fsum(v) for k, v in sorted(probs.items())}
    f = {k: math.fsum(fids[k]) / p[k] for k in p}
    n = len(ports)
    accepting = {pattern_label(c) for c in _accepting_port_sets(n)}
    success = math.fsum(v for k, v in p.items() if k in accepting)
    mean_fid = math.fsum(math.fsum(v) for v in fids.values())
    return BranchEvaluation(ports, p, f, success, mean_fid)


def evaluate_branch(params: NoiseParams, branch: Branch | str | Sequence[str], *,
                    dephasing: float = 0.0) -> BranchEvaluation:
    """Exact pattern probabilities and corrected fidelities for one branch.

    The per-side phases ``params.theta_a`` / ``params.theta_b`` are applied
    to the first two parties.
    """
    ports = Branch(branch).ports if isinstance(branch, (Branch, str)) else tuple(branch)
    thetas = [params.theta_a, params.theta_b] + [0.0] * (len(ports) - 2)
    phases = location_phases(ports, thetas) if (params.theta_a or params.theta_b) else None
    e = transmitted_ensemble(ports, params, phases=phases, dephasing=dephasing)
    return evaluate_ensemble(e, ports)


def _accepting_port_sets(n: int) -> list[tuple[str, ...]]:
    sets = [()]
    for i in range(n):
        sets = [s + (p,) for s in sets for p in port_modes(i, n)]
    return sets


def accepting_patterns(n: int = 2) -> tuple[str, ...]:
    return tuple(sorted({pattern_label(s) for s in _accepting_port_sets(n)},
                        key=lambda lab: [int(x) for x in lab.split("D")[1:]]))


# -- single trial ----------------------------------------------------------------

def _sample_component(p: NoiseParams, u: float) -> BellKind:
    candidates = [(k, w) for k, w in p.bell_weights().items() if w > 0]
    acc = 0.0
    for k, w in candidates:
        acc += w
        if u < acc:
            return k
    return candidates[-1][0]


@dataclass(frozen=True)
class TrialRecord:
    input_component: BellKind
    branch: str
    outcome: Outcome
    corrected_fidelity: float


def run_trial(p: NoiseParams, rng, *, parties: int = 2, branch: Branch | str | None = None,
              theta_dist: str = "zero", dephasing: float = 0.0) -> TrialRecord:
    """Sample one run of encode -> channel -> purify -> correct.

    Draw order from ``rng``: Bell component, per-party branch bits, detector
    pattern, then per-party phases (only for ``theta_dist="uniform"``).  The
    phases come last so that switching them on leaves every other draw, and
    hence every statistic they cannot influence, unchanged.
    """
    _check_parties(parties)
    kind = _sample_component(p, rng.random())
    bits = rng.random(parties) < 0.5
    if branch is not None:
        if parties != 2:
            raise ValueError("a fixed branch is only defined for two parties")
        ports = Branch(branch).ports
    else:
        ports = tuple(("a", "b")[int(x)] + str(i + 1) for i, x in enumerate(bits))
    u_pattern = rng.random()
    if theta_dist == "uniform":
        thetas = rng.uniform(0.0, 2 * math.pi, size=parties)
        phases = location_phases(ports, [float(t) for t in thetas])
    elif theta_dist == "zero":
        phases = None
    else:
        raise ValueError(f"unknown theta distribution {theta_dist!r}")
    if phases is None:
        s = _transmitted_fixed(ports, kind, dephasing)
    else:
        s = transmit(branch_state(ports), kind, phases=phases, dephasing=dephasing)
    outcome = _pick(purify_distribution(s, ports), u=u_pattern)
    fid = corrected_fidelity(outcome, ports)
    return TrialRecord(kind, branch_label(ports), outcome, fid)
