"""Repetition-code protection of a precessing cat state, and DFS phase locking.

The 3-qubit repetition code corrects X errors with exact parity projections
(no ancillas).  Z errors commute with the parity checks, so they pass
undetected and flip the cat's relative phase.

The decoherence-free subspace ``span{|01>, |10>}`` is the zero eigenspace of
``Z(x)I + I(x)Z`` and is unchanged by identical Z rotations of both qubits.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np

from .channels import collective_z_rotation
from .estimation import periodic_argmax
from .qcore import (
    X,
    Y,
    Z,
    DensityMatrix,
    StateVector,
    lift,
    pauli_string,
)
from .rng import substream

REPETITION_QUBITS = 3


@dataclass(frozen=True)
class CatState:
    n_qubits: int
    phase: float

    def __post_init__(self):
        if not (1 <= self.n_qubits <= 4):
            raise ValueError("cat states are supported for 1 to 4 qubits")

    def state(self) -> StateVector:
        amps = np.zeros(2**self.n_qubits, dtype=complex)
        amps[0] = 1 / math.sqrt(2)
        amps[-1] = cmath.exp(1j * self.phase) / math.sqrt(2)
        return StateVector(amps)


def cat_encode_evolve(n_qubits: int, omega: float, t: float) -> CatState:
    """Cat state after every qubit precesses for ``t``; relative phase ``n omega t``."""
    return CatState(n_qubits, n_qubits * omega * t)


def relative_phase(state: StateVector) -> float:
    """Phase of the ``|1...1>`` amplitude relative to ``|0...0>``."""
    a = state.amplitudes
    return cmath.phase(a[-1] / a[0])


# -- repetition code -------------------------------------------------------------


@dataclass(frozen=True)
class RepetitionOutcome:
    corrected: DensityMatrix
    syndrome: tuple[int, int]
    flagged: bool
    code_space_weight: float


def _code_projector() -> np.ndarray:
    p = np.zeros((8, 8), dtype=complex)
    p[0, 0] = p[7, 7] = 1.0
    return p


_SYNDROME_TO_FLIP = {(1, 1): None, (-1, 1): 0, (-1, -1): 1, (1, -1): 2}


def repetition_correct(state: DensityMatrix | StateVector,
                       error: tuple[str, int] | None = None) -> RepetitionOutcome:
    """Measure ``Z1Z2`` and ``Z2Z3`` and undo the indicated single X flip.

    ``error`` optionally injects a Pauli (``("X", 1)`` etc.) first.  If the
    input is not in the code space (a pre-existing error plus the injected
    one is a double error) or the syndrome is not definite, the result is
    flagged rather than silently returned.
    """
    if isinstance(state, StateVector):
        state = state.dm()
    if state.num_qubits != REPETITION_QUBITS:
        raise ValueError("the repetition code acts on 3 qubits")
    rho = state.matrix
    weight = float(np.trace(_code_projector() @ rho).real)
    if error is not None:
        label, q = error
        op = lift({"X": X, "Y": Y, "Z": Z, "I": np.eye(2)}[label].astype(complex), [q], 3)
        rho = op @ rho @ op.conj().T
    z12 = pauli_string("ZZI")
    z23 = pauli_string("IZZ")
    out = np.zeros_like(rho)
    best, best_p, branches = (1, 1), -1.0, 0
    for s1 in (1, -1):
        for s2 in (1, -1):
            proj = 0.25 * (np.eye(8) + s1 * z12) @ (np.eye(8) + s2 * z23)
            branch = proj @ rho @ proj
            p = float(np.trace(branch).real)
            if p < 1e-14:
                continue
            branches += 1
            flip = _SYNDROME_TO_FLIP[(s1, s2)]
            if flip is not None:
                fx = lift(X, [flip], 3)
                branch = fx @ branch @ fx
            out = out + branch
            if p > best_p:
                best, best_p = (s1, s2), p
    flagged = weight < 1 - 1e-9 or branches > 1
    return RepetitionOutcome(DensityMatrix.from_unnormalized(out), best, flagged, weight)


# -- decoherence-free subspace ------------------------------------------------------


@dataclass(frozen=True)
class DfsLogical:
    a: complex
    b: complex

    def __post_init__(self):
        norm = abs(self.a) ** 2 + abs(self.b) ** 2
        if abs(norm - 1) > 1e-12:
            raise ValueError(f"logical amplitudes are not normalized (|a|^2+|b|^2 = {norm})")

    def state(self) -> StateVector:
        return StateVector([self.a, self.b])


class LeakageError(ValueError):
    pass


def dfs_encode(logical: DfsLogical) -> StateVector:
    """``a|0> + b|1>  ->  a|01> + b|10>``."""
    return StateVector([0, logical.a, logical.b, 0])


def dfs_decode(state: DensityMatrix | StateVector) -> tuple[DensityMatrix, float]:
    """Project onto ``span{|01>, |10>}``; return the logical qubit and the leaked weight."""
    if isinstance(state, StateVector):
        state = state.dm()
    if state.num_qubits != 2:
        raise ValueError("DFS decoding expects two qubits")
    block = state.matrix[np.ix_([1, 2], [1, 2])]
    inside = float(np.trace(block).real)
    leakage = max(0.0, 1.0 - inside)
    if inside < 1e-14:
        raise LeakageError("state has no support in the decoherence-free subspace")
    return DensityMatrix.from_unnormalized(block), leakage


def total_z(num_qubits: int = 2) -> np.ndarray:
    return sum(lift(Z, [q], num_qubits) for q in range(num_qubits))


# -- phase lock ----------------------------------------------------------------------


@dataclass(frozen=True)
class CollectiveDephasing:
    kind: Literal["none", "uniform", "gaussian"] = "uniform"
    sigma: float = 0.0

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "none":
            return np.zeros(n)
        if self.kind == "uniform":
            return rng.random(n) * 2 * math.pi
        if self.kind == "gaussian":
            return rng.normal(0.0, self.sigma, n)
        raise ValueError(f"unknown dephasing model {self.kind!r}")

    def label(self) -> str:
        return self.kind if self.kind != "gaussian" else f"gaussian(sigma={self.sigma})"


@dataclass(frozen=True)
class PhaseLockReport:
    delta_true: float
    delta_hat: float
    n: int
    noise_model: str
    seed: int
    encoded: bool
    information_lr: float

    def to_dict(self) -> dict:
        return asdict(self)


_DFS_SLOTS = np.array([1, 2])


def _carrier_plus_probabilities(delta: float, thetas: np.ndarray, bases: np.ndarray,
                                encoded: bool) -> np.ndarray:
    """P(+1) for each carrier when Bob reads logical X (basis 0) or Y (basis 1).

    Carriers are simulated as batched state vectors.
    """
    n = thetas.size
    half = np.exp(-0.5j * thetas)
    if encoded:
        vec = np.zeros((n, 4), dtype=complex)
        vec[:, 1] = 1 / math.sqrt(2)
        vec[:, 2] = cmath.exp(1j * delta) / math.sqrt(2)
        # identical exp(-i theta Z/2) on both qubits: diag phases per basis state
        diag = np.stack([half * half, np.ones(n), np.ones(n), np.conj(half) ** 2], axis=1)
        vec = vec * diag
        logical = vec[:, _DFS_SLOTS]
    else:
        logical = np.zeros((n, 2), dtype=complex)
        logical[:, 0] = half / math.sqrt(2)
        logical[:, 1] = np.conj(half) * cmath.exp(1j * delta) / math.sqrt(2)
    norm = np.sum(np.abs(logical) ** 2, axis=1)
    # <+|v> for X, <+i|v> for Y
    plus_x = (logical[:, 0] + logical[:, 1]) / math.sqrt(2)
    plus_y = (logical[:, 0] - 1j * logical[:, 1]) / math.sqrt(2)
    amp = np.where(bases == 0, plus_x, plus_y)
    return np.abs(amp) ** 2 / norm


def _phase_log_likelihood(counts: np.ndarray, delta, visibility: float = 1.0) -> np.ndarray:
    delta = np.asarray(delta, dtype=float)
    px = 0.5 * (1 + visibility * np.cos(delta))
    py = 0.5 * (1 + visibility * np.sin(delta))
    total = np.zeros_like(delta)
    for k, p in ((counts[0, 0], px), (counts[0, 1], 1 - px), (counts[1, 0], py), (counts[1, 1], 1 - py)):
        if k:
            total = total + k * np.log(np.maximum(p, 1e-300))
    return total


def estimate_phase(counts: np.ndarray) -> tuple[float, float, float]:
    """Joint MLE of phase and visibility from X/Y readout counts.

    ``counts[b] = (plus, minus)`` for basis ``b`` (0 = X, 1 = Y).  Returns
    ``(delta_hat, visibility_hat, lr)`` where ``lr`` is twice the log-likelihood
    gain over the zero-visibility (no information) model.
    """
    tot = counts.sum(axis=1)
    if np.any(tot == 0):
        raise ValueError("both readout bases need at least one carrier")
    x = 2 * counts[0, 0] / tot[0] - 1
    y = 2 * counts[1, 0] / tot[1] - 1
    v = math.hypot(x, y)
    if v <= 1:
        delta_hat = math.atan2(y, x) % (2 * math.pi)
    else:
        # unconstrained optimum outside the Bloch disc: restrict to unit visibility
        delta_hat = periodic_argmax(lambda d: _phase_log_likelihood(counts, d), 2 * math.pi)
        v = 1.0
    best = float(_phase_log_likelihood(counts, np.array([delta_hat]), v)[0])
    flat = float(counts.sum() * math.log(0.5))
    return delta_hat, v, 2.0 * (best - flat)


def phase_lock_run(delta: float, n: int, noise: CollectiveDephasing | None = None, seed: int = 0,
                   encoded: bool = True) -> PhaseLockReport:
    """Alice sends ``n`` carriers of ``|0> + e^{i delta}|1>``; Bob estimates ``delta``.

    With ``encoded`` the logical state rides in the DFS; otherwise a bare
    qubit carries it.  Bob alternates logical X and Y readouts.  Only the
    phase is reported: sharing a phase convention says nothing about clock
    offsets.
    """
    if n < 2:
        raise ValueError("n must be at least 2 (one carrier per readout basis)")
    noise = noise or CollectiveDephasing()
    rng = substream(seed, "phase-lock")
    thetas = noise.sample(n, rng)
    bases = np.arange(n) % 2
    p_plus = _carrier_plus_probabilities(delta, thetas, bases, encoded)
    plus = rng.random(n) < p_plus
    counts = np.array([[np.sum(plus & (bases == b)), np.sum(~plus & (bases == b))] for b in (0, 1)])
    delta_hat, _, lr = estimate_phase(counts)
    return PhaseLockReport(float(delta), float(delta_hat), int(n), noise.label(), int(seed), encoded, lr)


def circular_distance(a: float, b: float) -> float:
    d = (a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


__all__ = [
    "CatState", "cat_encode_evolve", "relative_phase", "RepetitionOutcome", "repetition_correct",
    "DfsLogical", "dfs_encode", "dfs_decode", "LeakageError", "total_z", "collective_z_rotation",
    "CollectiveDephasing", "PhaseLockReport", "phase_lock_run", "estimate_phase", "circular_distance",
]
