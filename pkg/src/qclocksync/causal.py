"""Decoherence superoperators on a time slice and whether they allow signaling.

A superoperator ``rho -> sum_a E_a rho E_a`` is causal from Alice to Bob when
Bob's reduced state after it acts cannot depend on a unitary Alice applied
just before.  The marginal is linear in the conjugated input, so the checker
scans a complete operator basis of product inputs against a spanning family
of local unitaries.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .qcore import (
    BELL_STATES,
    HADAMARD,
    PAULI_MATRICES,
    PSI_MINUS,
    DecoherenceSuperop,
    DensityMatrix,
    _num_qubits_for,
    random_unitary,
    trace_distance,
)
from .rng import substream

__all__ = [
    "DecoherenceSuperop", "CausalityReport", "Witness", "apply_superop", "bob_marginal",
    "alice_marginal", "causality_check", "make_superop", "pauli_twirl", "product_observable_superop",
    "stabilizer_superop", "bell_basis_superop", "sorkin_superop", "replay_witness",
]


def apply_superop(rho: DensityMatrix, s: DecoherenceSuperop) -> DensityMatrix:
    if rho.matrix.shape[0] != s.dim:
        raise ValueError(f"state dimension {rho.matrix.shape[0]} does not match superoperator dimension {s.dim}")
    return DensityMatrix.from_unnormalized(s.apply(rho.matrix))


def _partial_trace_bipartite(m: np.ndarray, dims: tuple[int, int], keep: str) -> np.ndarray:
    da, db = dims
    t = m.reshape(da, db, da, db)
    return np.einsum("ijik->jk", t) if keep == "B" else np.einsum("ijkj->ik", t)


def _check_unitary(u: np.ndarray, d: int) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (d, d):
        raise ValueError(f"local unitary must be {d}x{d}")
    if np.max(np.abs(u.conj().T @ u - np.eye(d))) > 1e-10:
        raise ValueError("local operation is not unitary")
    return u


def _as_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def bob_marginal(rho, alice_unitary: np.ndarray, s: DecoherenceSuperop) -> np.ndarray:
    """Bob's reduced state after Alice's unitary and then the superoperator."""
    da, db = s.dims
    u = np.kron(_check_unitary(alice_unitary, da), np.eye(db))
    m = _as_matrix(rho)
    return _partial_trace_bipartite(s.apply(u @ m @ u.conj().T), s.dims, "B")


def alice_marginal(rho, bob_unitary: np.ndarray, s: DecoherenceSuperop) -> np.ndarray:
    da, db = s.dims
    u = np.kron(np.eye(da), _check_unitary(bob_unitary, db))
    m = _as_matrix(rho)
    return _partial_trace_bipartite(s.apply(u @ m @ u.conj().T), s.dims, "A")


# -- superoperator catalog ------------------------------------------------------


def sorkin_superop() -> DecoherenceSuperop:
    """Two-outcome incomplete Bell measurement ``{|psi-><psi-|, I - |psi-><psi-|}``."""
    e1 = PSI_MINUS.dm().matrix
    return DecoherenceSuperop([e1, np.eye(4) - e1], (2, 2))


def bell_basis_superop() -> DecoherenceSuperop:
    return DecoherenceSuperop([b.dm().matrix for b in BELL_STATES.values()], (2, 2))


def _eigenspace_projectors(a: np.ndarray, atol: float = 1e-9) -> list[tuple[float, np.ndarray]]:
    w, v = np.linalg.eigh(a)
    groups: list[tuple[float, list[int]]] = []
    for i, lam in enumerate(w):
        for g in groups:
            if abs(g[0] - lam) < atol:
                g[1].append(i)
                break
        else:
            groups.append((lam, [i]))
    return [(lam, v[:, idx] @ v[:, idx].conj().T) for lam, idx in groups]


def product_observable_superop(a: np.ndarray, b: np.ndarray, atol: float = 1e-9) -> DecoherenceSuperop:
    """Decoherence in the eigenspaces of ``A (x) B`` for Hermitian ``A``, ``B``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    for m in (a, b):
        if np.max(np.abs(m - m.conj().T)) > 1e-12:
            raise ValueError("observables must be Hermitian")
    merged: list[tuple[float, np.ndarray]] = []
    for (la, pa), (lb, pb) in itertools.product(_eigenspace_projectors(a, atol), _eigenspace_projectors(b, atol)):
        lam, proj = la * lb, np.kron(pa, pb)
        for k, (mu, q) in enumerate(merged):
            if abs(mu - lam) < atol:
                merged[k] = (mu, q + proj)
                break
        else:
            merged.append((lam, proj))
    return DecoherenceSuperop([p for _, p in merged], (a.shape[0], b.shape[0]))


def _pauli_matrix(label: str) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for ch in label:
        out = np.kron(out, PAULI_MATRICES[ch])
    return out


def stabilizer_superop(generators: Sequence[str], alice_qubits: int | None = None) -> DecoherenceSuperop:
    """Decoherence in the joint eigenbasis of commuting Pauli strings.

    Projectors are ``prod_k (I + s_k P_k)/2`` over sign patterns ``s``; empty
    patterns (dependent generators) are dropped.
    """
    if not generators:
        raise ValueError("at least one generator is required")
    n = len(generators[0])
    if any(len(g) != n for g in generators):
        raise ValueError("generators must act on the same number of qubits")
    if n > 4:
        raise ValueError("at most 4 qubits are supported")
    mats = [_pauli_matrix(g) for g in generators]
    for (i, p), (j, q) in itertools.combinations(enumerate(mats), 2):
        if np.max(np.abs(p @ q - q @ p)) > 1e-12:
            raise ValueError(f"generators {generators[i]} and {generators[j]} do not commute")
    d = 2**n
    projs = []
    for signs in itertools.product((1, -1), repeat=len(mats)):
        proj = np.eye(d, dtype=complex)
        for s, m in zip(signs, mats):
            proj = proj @ (0.5 * (np.eye(d) + s * m))
        if np.trace(proj).real > 0.5:
            projs.append(proj)
    na = alice_qubits if alice_qubits is not None else max(1, n // 2)
    return DecoherenceSuperop(projs, (2**na, 2 ** (n - na)))


def make_superop(kind: str, *args, **kwargs) -> DecoherenceSuperop:
    """Build a catalog superoperator.

    ``kind`` is ``"sorkin"``, ``"bell_complete"``, ``"product_observable"``
    (args: ``A, B``) or ``"stabilizer_products"`` (args: list of Pauli strings).
    """
    if kind == "sorkin":
        return sorkin_superop()
    if kind == "bell_complete":
        return bell_basis_superop()
    if kind == "product_observable":
        return product_observable_superop(*args, **kwargs)
    if kind == "stabilizer_products":
        return stabilizer_superop(*args, **kwargs)
    raise ValueError(f"unknown superoperator kind {kind!r}")


def pauli_twirl(rho: DensityMatrix) -> DensityMatrix:
    """Average of ``(s (x) s) rho (s (x) s)`` over ``s`` in ``{I, X, Y, Z}``."""
    if rho.num_qubits != 2:
        raise ValueError("the twirl acts on two qubits")
    acc = np.zeros((4, 4), dtype=complex)
    for p in PAULI_MATRICES.values():
        pp = np.kron(p, p)
        acc += pp @ rho.matrix @ pp
    return DensityMatrix.from_unnormalized(acc / 4)


# -- causality checking ----------------------------------------------------------


def _qubit_probe_states() -> list[tuple[str, np.ndarray]]:
    s = 1 / math.sqrt(2)
    kets = {
        "0": np.array([1, 0]), "1": np.array([0, 1]),
        "+": np.array([s, s]), "-": np.array([s, -s]),
        "+i": np.array([s, 1j * s]), "-i": np.array([s, -1j * s]),
    }
    return [(k, np.outer(v, np.conj(v)).astype(complex)) for k, v in kets.items()]


def _probe_states(d: int) -> list[tuple[str, np.ndarray]]:
    """Products of Pauli eigenstate projectors; these span all operators on ``d`` dims."""
    n = _num_qubits_for(d) if d > 1 else 0
    out = []
    for combo in itertools.product(_qubit_probe_states(), repeat=n):
        label = "".join(f"|{c[0]}>" for c in combo)
        m = np.ones((1, 1), dtype=complex)
        for _, p in combo:
            m = np.kron(m, p)
        out.append((label, m))
    return out


def _probe_unitaries(d: int, rng: np.random.Generator, n_random: int) -> list[tuple[str, np.ndarray]]:
    n = _num_qubits_for(d)
    gates = dict(PAULI_MATRICES)
    gates["H"] = HADAMARD
    out = []
    for labels in itertools.product(gates, repeat=n):
        m = np.ones((1, 1), dtype=complex)
        for g in labels:
            m = np.kron(m, gates[g])
        out.append(("".join(labels), m))
    for k in range(n_random):
        out.append((f"random[{k}]", random_unitary(d, rng)))
    return out


@dataclass(frozen=True)
class Witness:
    input_label: str
    input_state: np.ndarray = field(repr=False)
    unitary_label: str
    unitary: np.ndarray = field(repr=False)
    direction: str
    deviation: float

    def to_dict(self) -> dict:
        return {
            "input_label": self.input_label,
            "input_state": {"real": self.input_state.real.tolist(), "imag": self.input_state.imag.tolist()},
            "unitary_label": self.unitary_label,
            "unitary": {"real": self.unitary.real.tolist(), "imag": self.unitary.imag.tolist()},
            "direction": self.direction,
            "deviation": self.deviation,
        }


@dataclass(frozen=True)
class CausalityReport:
    a_to_b_causal: bool
    b_to_a_causal: bool
    max_deviation: float
    a_to_b_deviation: float
    b_to_a_deviation: float
    witness: Witness | None
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "a_to_b_causal": self.a_to_b_causal,
            "b_to_a_causal": self.b_to_a_causal,
            "max_deviation": self.max_deviation,
            "a_to_b_deviation": self.a_to_b_deviation,
            "b_to_a_deviation": self.b_to_a_deviation,
            "tolerance": self.tolerance,
            "witness": None if self.witness is None else self.witness.to_dict(),
        }


def _scan(s: DecoherenceSuperop, direction: str, rng: np.random.Generator, n_random: int):
    da, db = s.dims
    sender_dim, receiver_dim = (da, db) if direction == "A->B" else (db, da)
    marginal = bob_marginal if direction == "A->B" else alice_marginal
    unitaries = _probe_unitaries(sender_dim, rng, n_random)
    best = (-1.0, None)
    for sa_label, sa in _probe_states(da):
        for sb_label, sb in _probe_states(db):
            rho = np.kron(sa, sb)
            ref = marginal(rho, np.eye(sender_dim), s)
            for u_label, u in unitaries:
                dev = trace_distance(marginal(rho, u, s), ref)
                # strict comparison: ties keep the first witness in scan order
                if dev > best[0] + 1e-12:
                    best = (dev, (sa_label + sb_label, rho, u_label, u))
    return best


def causality_check(s: DecoherenceSuperop, tolerance: float = 1e-9, seed: int = 0,
                    n_random: int = 32) -> CausalityReport:
    rng = substream(seed, "causality")
    dev_ab, w_ab = _scan(s, "A->B", rng, n_random)
    dev_ba, w_ba = _scan(s, "B->A", rng, n_random)
    witness = None
    if dev_ab > tolerance or dev_ba > tolerance:
        direction, dev, w = ("A->B", dev_ab, w_ab) if dev_ab >= dev_ba else ("B->A", dev_ba, w_ba)
        witness = Witness(w[0], w[1], w[2], w[3], direction, dev)
    return CausalityReport(
        a_to_b_causal=dev_ab <= tolerance,
        b_to_a_causal=dev_ba <= tolerance,
        max_deviation=max(dev_ab, dev_ba),
        a_to_b_deviation=dev_ab,
        b_to_a_deviation=dev_ba,
        witness=witness,
        tolerance=tolerance,
    )


def replay_witness(s: DecoherenceSuperop, w: Witness) -> float:
    """Recompute a witness' deviation from its stored input and unitary."""
    if w.direction == "A->B":
        ref = bob_marginal(w.input_state, np.eye(s.dims[0]), s)
        return trace_distance(bob_marginal(w.input_state, w.unitary, s), ref)
    ref = alice_marginal(w.input_state, np.eye(s.dims[1]), s)
    return trace_distance(alice_marginal(w.input_state, w.unitary, s), ref)
