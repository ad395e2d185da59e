"""Brute-force density-matrix reference.

This module shares only the *descriptions* of circuits (``Element`` /
``Circuit``) and the label types with the sparse engine.  Every element is
rebuilt here as an explicit single-photon matrix (permutations and a
Hadamard block) over the enumerated basis ``mode x {H, V} x {0..d_max}``,
and states are dense vectors / matrices.

Delays are stored modulo ``d_max + 1`` inside the element matrices so that
they stay unitary; the actual support of the state is tracked alongside and
any shift that would wrap raises ``ValueError`` naming the ``d_max`` needed.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .channels import NoiseParams
from .optics import Circuit, Element, Kind
from .protocol import (
    Branch,
    encoder_circuit,
    evaluate_branch,
    pattern_label,
    purifier_for_ports,
)
from .state import BasisKet, Ensemble, PhotonBasis, Polarization

D_MAX = 3
UNITARITY_TOL = 1e-10
_POLS = (Polarization.H, Polarization.V)


def local_basis(modes: Sequence[str], d_max: int = D_MAX) -> tuple[PhotonBasis, ...]:
    return tuple(PhotonBasis(m, p, t) for m in sorted(modes) for p in _POLS for t in range(d_max + 1))


@dataclass(frozen=True)
class DensityMatrix:
    """Dense density matrix over a product of per-photon label lists.

    ``locals[i]`` enumerates the labels photon ``i`` may take; the global
    basis is their Cartesian product with photon 0 varying slowest (the
    ``numpy.kron`` order).
    """

    locals: tuple[tuple[PhotonBasis, ...], ...]
    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def basis(self) -> list[BasisKet]:
        return list(itertools.product(*self.locals))

    def validate(self, atol: float = 1e-12) -> None:
        rho = self.entries
        if rho.shape != (self.dim, self.dim) or self.dim != math.prod(len(l) for l in self.locals):
            raise ValueError("entries do not match the basis")
        if np.max(np.abs(rho - rho.conj().T)) > atol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > atol:
            raise ValueError(f"trace is {np.trace(rho).real!r}, expected 1")
        if np.linalg.eigvalsh(rho).min() < -1e-10:
            raise ValueError("density matrix has a negative eigenvalue")

    def expectation(self, vec: np.ndarray) -> float:
        return float(np.real(vec.conj() @ self.entries @ vec))


def _index(labels: Sequence[PhotonBasis]) -> dict[PhotonBasis, int]:
    return {lab: i for i, lab in enumerate(labels)}


def vector_from_state(s, locs) -> np.ndarray:
    """Dense vector of a ``PureState`` over the product basis ``locs``."""
    idx = [_index(l) for l in locs]
    dims = [len(l) for l in locs]
    vec = np.zeros(math.prod(dims), dtype=complex)
    for k, amp in s.items():
        try:
            pos = np.ravel_multi_index(tuple(idx[i][p] for i, p in enumerate(k)), dims)
        except KeyError as exc:
            raise ValueError(f"label {exc.args[0]} lies outside the enumerated basis") from None
        vec[pos] += amp
    return vec


def dm_from_ensemble(e: Ensemble, d_max: int = D_MAX) -> DensityMatrix:
    """``sum_k w_k |psi_k><psi_k|`` over each photon's occupied modes."""
    n = e.photon_count
    top = max(p.delay for _, s in e for k in s for p in k)
    if top > d_max:
        raise ValueError(f"delay {top} exceeds the basis; need d_max >= {top}")
    modes = [sorted({k[i].mode for _, s in e for k in s}) for i in range(n)]
    locs = tuple(local_basis(m, d_max) for m in modes)
    rho = 0
    for w, s in e:
        v = vector_from_state(s, locs)
        rho = rho + w * np.outer(v, v.conj())
    return DensityMatrix(locs, rho)


# -- single-photon element matrices ------------------------------------------------

def _perm_matrix(labels, image) -> np.ndarray:
    """Permutation matrix sending ``labels[j]`` to ``image(labels[j])``."""
    idx = _index(labels)
    m = np.zeros((len(labels), len(labels)))
    for j, lab in enumerate(labels):
        m[idx[image(lab)], j] = 1.0
    return m


def element_matrix(el: Element, labels: Sequence[PhotonBasis], d_max: int) -> np.ndarray:
    """Unitary of ``el`` on one photon's enumerated basis."""
    mod = d_max + 1
    kind, modes, prm = el.kind, el.modes, el.params
    if kind is Kind.PBS:
        src, tr, rf = modes

        def image(l):
            partner = tr if l.pol is Polarization.H else rf
            if l.mode == src:
                return PhotonBasis(partner, l.pol, l.delay)
            if l.mode == partner:
                return PhotonBasis(src, l.pol, l.delay)
            return l
        return _perm_matrix(labels, image)
    if kind is Kind.HWP:
        return _perm_matrix(labels, lambda l: PhotonBasis(l.mode, Polarization(1 - l.pol), l.delay) if l.mode == modes[0] else l)
    if kind is Kind.POCKELS:
        gate = prm[0]
        return _perm_matrix(
            labels,
            lambda l: PhotonBasis(l.mode, Polarization(1 - l.pol), l.delay) if l.mode == modes[0] and l.delay == gate else l)
    if kind is Kind.DELAY:
        return _perm_matrix(
            labels,
            lambda l: PhotonBasis(l.mode, l.pol, (l.delay + prm[0]) % mod) if l.mode == modes[0] else l)
    if kind is Kind.POL_DELAY:
        src, dst = modes

        def swap(l):
            if src != dst and l.mode in (src, dst):
                return PhotonBasis(dst if l.mode == src else src, l.pol, l.delay)
            return l

        def shift(l):
            if l.mode != dst:
                return l
            return PhotonBasis(l.mode, l.pol, (l.delay + prm[int(l.pol)]) % mod)
        return _perm_matrix(labels, shift) @ _perm_matrix(labels, swap)
    # beam splitter: Hadamard block from inputs to outputs and back
    in1, in2, out1, out2 = modes
    idx = _index(labels)
    h = 1 / math.sqrt(2)
    m = np.eye(len(labels), dtype=float)
    block = np.array([[0, 0, h, h], [0, 0, h, -h], [h, h, 0, 0], [h, -h, 0, 0]]).T
    for p in _POLS:
        for t in range(mod):
            pos = [idx[PhotonBasis(x, p, t)] for x in (in1, in2, out1, out2)]
            m[np.ix_(pos, pos)] = block
    return m


def _reachable_modes(start: set[str], circuit: Circuit) -> list[str]:
    modes = set(start)
    changed = True
    while changed:
        changed = False
        for el in circuit.elements:
            if modes & set(el.modes) and not set(el.modes) <= modes:
                modes |= set(el.modes)
                changed = True
    return sorted(modes)


def _shift_of(el: Element, lab: PhotonBasis) -> int:
    if el.kind is Kind.DELAY and lab.mode == el.modes[0]:
        return el.params[0]
    if el.kind is Kind.POL_DELAY and lab.mode == el.modes[0]:
        return el.params[int(lab.pol)]
    return 0


def photon_propagator(circuit: Circuit, start_modes: set[str], support: set[PhotonBasis],
                      d_max: int = D_MAX):
    """Single-photon circuit unitary on the photon's reachable labels.

    Returns ``(labels, unitary, final_support)``.
    """
    reach = _reachable_modes(start_modes, circuit)
    labels = local_basis(reach, d_max)
    idx = _index(labels)
    u = np.eye(len(labels))
    supp = np.zeros(len(labels), dtype=bool)
    for lab in support:
        supp[idx[lab]] = True
    for el in circuit.elements:
        if not set(el.modes) & set(reach):
            continue
        for j in np.flatnonzero(supp):
            need = labels[j].delay + _shift_of(el, labels[j])
            if need > d_max:
                raise ValueError(f"delay overflow at {el.kind.value} on {labels[j].mode}: need d_max >= {need}")
        m = element_matrix(el, labels, d_max)
        u = m @ u
        supp = (np.abs(m) @ supp) > 0
    if np.max(np.abs(u.conj().T @ u - np.eye(len(labels)))) > UNITARITY_TOL:
        raise RuntimeError("assembled single-photon matrix is not unitary")
    return labels, u, {labels[j] for j in np.flatnonzero(supp)}


def _photon_supports(d: DensityMatrix) -> list[set[PhotonBasis]]:
    diag = np.abs(np.real(np.diag(d.entries))).reshape([len(l) for l in d.locals])
    supports = []
    for i, labs in enumerate(d.locals):
        axes = tuple(a for a in range(len(d.locals)) if a != i)
        marginal = diag.sum(axis=axes) if axes else diag
        supports.append({labs[j] for j in np.flatnonzero(marginal > 1e-14)})
    return supports


def evolve_dm(d: DensityMatrix, circuit: Circuit, d_max: int = D_MAX) -> DensityMatrix:
    """``V rho V^dagger`` with ``V`` the circuit restricted to the occupied support.

    The output basis of each photon is the set of labels its support can
    reach; columns outside the input support are dropped.  Both
    restrictions are exact because the discarded blocks multiply zeros.
    """
    blocks, out_locals = [], []
    for labs, supp in zip(d.locals, _photon_supports(d)):
        full, u, final = photon_propagator(circuit, {l.mode for l in labs}, supp, d_max)
        fidx = _index(full)
        cols = [fidx[l] for l in labs]
        out = tuple(l for l in full if l in final)
        rows = [fidx[l] for l in out]
        v = u[np.ix_(rows, cols)]
        sup_cols = [c for c, l in enumerate(labs) if l in supp]
        gram = v[:, sup_cols].conj().T @ v[:, sup_cols]
        if np.max(np.abs(gram - np.eye(len(sup_cols)))) > UNITARITY_TOL:
            raise RuntimeError("restricted propagator is not an isometry on the support")
        blocks.append(v)
        out_locals.append(out)
    v = reduce(np.kron, blocks)
    rho = v @ d.entries @ v.conj().T
    return DensityMatrix(tuple(out_locals), rho)


def evolve_vector(vec: np.ndarray, locs, circuit: Circuit, d_max: int = D_MAX):
    """Evolve a dense pure state photon by photon; returns ``(vector, locals)``."""
    tensor = vec.reshape([len(l) for l in locs])
    new_locs = []
    for i, labs in enumerate(locs):
        marg = np.abs(np.moveaxis(tensor, i, 0).reshape(len(labs), -1)) ** 2
        supp = {labs[j] for j in np.flatnonzero(marg.sum(axis=1) > 1e-14)}
        full, u, _ = photon_propagator(circuit, {l.mode for l in labs}, supp, d_max)
        fidx = _index(full)
        v = u[:, [fidx[l] for l in labs]]
        tensor = np.moveaxis(np.tensordot(v, tensor, axes=([1], [i])), 0, i)
        new_locs.append(full)
    return tensor.reshape(-1), tuple(new_locs)


# -- detection on dense matrices ----------------------------------------------------

def pattern_blocks(d: DensityMatrix) -> dict[tuple[str, ...], tuple[float, np.ndarray, list[BasisKet]]]:
    """Split ``d`` by the mode tuple of the photons.

    Returns ``ports -> (probability, normalized block, block basis)``.
    """
    groups: dict[tuple[str, ...], list[int]] = {}
    for j, k in enumerate(d.basis):
        groups.setdefault(tuple(p.mode for p in k), []).append(j)
    basis = d.basis
    out = {}
    for ports, ids in groups.items():
        block = d.entries[np.ix_(ids, ids)]
        prob = float(np.real(np.trace(block)))
        if prob > 1e-14:
            out[ports] = (prob, block / prob, [basis[j] for j in ids])
    return out


def _ghz_vector(basis: list[BasisKet], ports: Sequence[str], delay: int) -> np.ndarray:
    vec = np.zeros(len(basis), dtype=complex)
    for j, k in enumerate(basis):
        if all(p.delay == delay and p.mode == m for p, m in zip(k, ports)):
            pols = {p.pol for p in k}
            if len(pols) == 1:
                vec[j] = 1 / math.sqrt(2)
    return vec


def corrected_block_fidelity(block: np.ndarray, basis: list[BasisKet], ports: Sequence[str],
                             sign: int, delay: int = 1) -> float:
    """Fidelity with the GHZ target after a Z on the lowest-numbered port (if ``sign`` < 0)."""
    if sign < 0:
        flip = min(range(len(ports)), key=lambda i: int(ports[i][1:]))
        z = np.array([-1.0 if k[flip].pol == Polarization.V else 1.0 for k in basis])
        block = z[:, None] * block * z[None, :]
    target = _ghz_vector(basis, ports, delay)
    return float(np.real(target.conj() @ block @ target))


# -- reference pipeline -------------------------------------------------------------

def _pauli_string(n: int, target: int, bit: bool, phase: bool) -> np.ndarray:
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    z = np.diag([1.0, -1.0]).astype(complex)
    op = np.eye(2, dtype=complex)
    if phase:
        op = z @ op
    if bit:
        op = x @ op
    return reduce(np.kron, [op if i == target else np.eye(2) for i in range(n)])


def polarization_dm(params: NoiseParams, n: int, noisy: int = 1) -> np.ndarray:
    """Bell-diagonal (GHZ-based for n > 2) polarization density matrix, qubit order H=0, V=1."""
    ghz = np.zeros(2**n, dtype=complex)
    ghz[0] = ghz[-1] = 1 / math.sqrt(2)
    rho = np.zeros((2**n, 2**n), dtype=complex)
    paulis = ((False, False), (False, True), (True, False), (True, True))
    for w, (bit, phase) in zip(params.weights, paulis):
        if w:
            v = _pauli_string(n, noisy, bit, phase) @ ghz
            rho += w * np.outer(v, v.conj())
    return rho


def timebin_vector(ports: Sequence[str], d_max: int = D_MAX) -> np.ndarray:
    """Time-bin amplitudes of one encoder branch, computed from the dense encoder.

    Returned as a vector over ``{0..d_max}^n`` delays (photon 0 slowest).
    """
    n = len(ports)
    src = [chr(ord("A") + i) for i in range(n)]
    locs = tuple(local_basis([m], d_max) for m in src)
    ghz = np.zeros(math.prod(len(l) for l in locs), dtype=complex)
    dims = [len(l) for l in locs]
    for pol in _POLS:
        pos = np.ravel_multi_index(tuple(_index(l)[PhotonBasis(m, pol, 0)] for l, m in zip(locs, src)), dims)
        ghz[pos] = 1 / math.sqrt(2)
    out, out_locs = evolve_vector(ghz, locs, encoder_circuit(n), d_max)
    tensor = out.reshape([len(l) for l in out_locs])
    amps = np.zeros([d_max + 1] * n, dtype=complex)
    for combo in itertools.product(*[list(enumerate(l)) for l in out_locs]):
        js = tuple(j for j, _ in combo)
        labs = [lab for _, lab in combo]
        if all(lab.mode == m for lab, m in zip(labs, ports)):
            if any(lab.pol != Polarization.H for lab in labs):
                if abs(tensor[js]) > 1e-14:
                    raise RuntimeError("encoder left a V photon on its output")
                continue
            amps[tuple(lab.delay for lab in labs)] += tensor[js]
    norm = np.linalg.norm(amps)
    return (amps / norm).reshape(-1)


def branch_input_dm(params: NoiseParams, ports: Sequence[str], dephasing: float = 0.0,
                    d_max: int = D_MAX, noisy: int = 1) -> DensityMatrix:
    """``rho'_P (x) rho_T`` placed on the branch modes, plus phases.

    ``params.theta_a`` / ``theta_b`` act on photons 0 and 1; ``dephasing``
    multiplies photon 1's amplitude by ``exp(i phi delay)``.
    """
    n = len(ports)
    d = d_max + 1
    rho_p = polarization_dm(params, n, noisy).reshape([2] * (2 * n))
    tau = timebin_vector(ports, d_max).reshape([d] * n)
    delays = np.arange(d)
    phase = np.exp(1j * dephasing * delays)
    tau = tau * phase.reshape([d if i == 1 else 1 for i in range(n)])
    tau = tau * np.exp(1j * (params.theta_a + params.theta_b))
    rho_t = np.multiply.outer(tau, tau.conj())
    # interleave to (pol_0, delay_0, pol_1, delay_1, ...) for rows and columns
    full = np.multiply.outer(rho_p, rho_t)
    row_p, col_p = list(range(n)), list(range(n, 2 * n))
    row_t, col_t = list(range(2 * n, 3 * n)), list(range(3 * n, 4 * n))
    order = [ax for i in range(n) for ax in (row_p[i], row_t[i])] + \
            [ax for i in range(n) for ax in (col_p[i], col_t[i])]
    full = full.transpose(order)
    dim = (2 * d) ** n
    locs = tuple(local_basis([m], d_max) for m in ports)
    return DensityMatrix(locs, full.reshape(dim, dim))


@dataclass(frozen=True)
class OracleResult:
    pattern_probabilities: dict[str, float]
    pattern_fidelities: dict[str, float]
    success_probability: float
    mean_corrected_fidelity: float


def oracle_evaluate(params: NoiseParams, ports: Sequence[str], dephasing: float = 0.0,
                    d_max: int = D_MAX) -> OracleResult:
    ports = tuple(ports)
    rho = branch_input_dm(params, ports, dephasing, d_max)
    out = evolve_dm(rho, purifier_for_ports(ports), d_max)
    out.validate(atol=1e-10)
    sign = -1 if sum(m.startswith("b") for m in ports) % 2 else 1
    probs, fids = {}, {}
    for det_ports, (prob, block, basis) in pattern_blocks(out).items():
        label = pattern_label(det_ports)
        probs[label] = prob
        fids[label] = corrected_block_fidelity(block, basis, det_ports, sign)
    n = len(ports)
    accepting = {pattern_label(c) for c in itertools.product(*[(f"D{i + 1}", f"D{n + i + 1}") for i in range(n)])}
    success = math.fsum(p for k, p in probs.items() if k in accepting)
    mean = math.fsum(probs[k] * fids[k] for k in probs)
    return OracleResult(dict(sorted(probs.items())), dict(sorted(fids.items())), success, mean)


def cross_check(p: NoiseParams, branch: Branch | str | Sequence[str], dephasing: float = 0.0) -> float:
    """Largest disagreement between the sparse engine and the dense oracle.

    Compared quantities: every pattern probability, every per-pattern
    corrected fidelity, the success probability and the mean fidelity.
    """
    ports = Branch(branch).ports if isinstance(branch, (Branch, str)) else tuple(branch)
    eng = evaluate_branch(p, ports, dephasing=dephasing)
    ora = oracle_evaluate(p, ports, dephasing)
    keys = set(eng.pattern_probabilities) | set(ora.pattern_probabilities)
    devs = [abs(eng.success_probability - ora.success_probability),
            abs(eng.mean_corrected_fidelity - ora.mean_corrected_fidelity)]
    for k in keys:
        devs.append(abs(eng.pattern_probabilities.get(k, 0.0) - ora.pattern_probabilities.get(k, 0.0)))
        if k in eng.pattern_fidelities and k in ora.pattern_fidelities:
            devs.append(abs(eng.pattern_fidelities[k] - ora.pattern_fidelities[k]))
        else:
            devs.append(1.0)
    return max(devs)


def random_draw(rng: np.random.Generator) -> tuple[NoiseParams, Branch, float]:
    """One randomized (noise, branch, dephasing) case; phases uniform on [0, 2pi)."""
    w = rng.dirichlet(np.ones(4))
    w[-1] = 1 - w[:3].sum()
    theta = rng.uniform(0, 2 * math.pi, size=2)
    params = NoiseParams(*(float(x) for x in w), theta_a=float(theta[0]), theta_b=float(theta[1]))
    branch = list(Branch)[int(rng.integers(4))]
    dephasing = float(rng.choice([0.0, math.pi, rng.uniform(0, 2 * math.pi)]))
    return params, branch, dephasing


def randomized_cross_check(seed: int, draws: int = 100) -> float:
    rng = np.random.default_rng(seed)
    return max(cross_check(*random_draw(rng)) for _ in range(draws))
