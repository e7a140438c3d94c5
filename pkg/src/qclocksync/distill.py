"""Recurrence purification of phase errors, its analytic recursions, and hashing yield.

Circuit rounds act on two i.i.d. copies of a pair state, ordered
``A1 B1 A2 B2``.  A round keeps pair 1 when the bilateral comparison

    (X_A X_B)_1 * (X_A X_B)_2 = +1

("agreement": Alice's and Bob's pair-2 readouts coincide).  Two
realizations are provided:

``projective``
    project onto the +1 eigenspace of the product observable and discard
    pair 2.  This is the reference path.
``gates``
    Hadamards on all four qubits, bilateral CNOT (pair 1 controls pair 2),
    Hadamards back on pair 1, Z readout of pair 2 and a Pauli-frame X on
    Bob's pair-1 qubit (the circuit swaps the pair's Z parity).

When Bob's operations lag Alice's by ``Delta`` every Bob-side operation is
conjugated by the free evolution ``U_Delta``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .protocols import ClockFrame, LikelihoodModel, estimate_offset, run_qcs
from .qcore import (
    HADAMARD,
    PSI_MINUS,
    X,
    DensityMatrix,
    FreeEvolutionParams,
    StateVector,
    evolve_free,
    fidelity,
    lift,
    partial_trace,
    pauli_string,
)
from .rng import substream

KEEP_FLOOR = 1e-14


class DistillationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PairEnsemble:
    n: float
    F: float = 1.0
    delta: float = 0.0
    Delta: float = 0.0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be non-negative")
        if not (0.0 <= self.F <= 1.0):
            raise ValueError("F must lie in [0, 1]")
        if not (-math.pi < self.delta <= math.pi):
            raise ValueError("delta must lie in (-pi, pi]")

    def state(self, omega: float = 1.0) -> DensityMatrix:
        """``F |psi_d-><psi_d-| + (1-F) |psi_d+><psi_d+|`` with systematic phase and lag applied.

        ``|psi_d-+> = (|01> -+ e^{i delta}|10>)/sqrt2``.
        """
        e = np.exp(1j * self.delta)
        minus = StateVector(np.array([0, 1, -e, 0]) / math.sqrt(2))
        plus = StateVector(np.array([0, 1, e, 0]) / math.sqrt(2))
        rho = DensityMatrix(self.F * minus.dm().matrix + (1 - self.F) * plus.dm().matrix)
        if self.Delta:
            rho = evolve_free(rho, FreeEvolutionParams(omega, -self.Delta), [1])
        return rho


@dataclass(frozen=True)
class RecurrenceResult:
    survival: float
    F_out: float
    delta_out: float = 0.0
    kept_state: DensityMatrix | None = None

    def __post_init__(self):
        if not (-1e-12 <= self.survival <= 0.5 + 1e-12):
            raise ValueError(f"survival {self.survival} outside [0, 1/2]")


# -- analytic recursions ---------------------------------------------------------


def recurrence_round_analytic(F: float) -> RecurrenceResult:
    if not (0.0 <= F <= 1.0):
        raise ValueError("F must lie in [0, 1]")
    agree = F * F + (1 - F) ** 2
    return RecurrenceResult(0.5 * agree, F * F / agree, phase_from_fidelity(F * F / agree))


def systematic_phase_round(delta: float) -> RecurrenceResult:
    if abs(delta) > math.pi:
        raise ValueError("|delta| must not exceed pi")
    c2, s2 = math.cos(delta / 2) ** 2, math.sin(delta / 2) ** 2
    agree = c2 * c2 + s2 * s2
    # delta = pi is the fixed point tan -> infinity
    delta_out = math.pi if abs(delta) == math.pi else 2 * math.atan(math.tan(delta / 2) ** 2)
    return RecurrenceResult(0.5 * agree, c2 * c2 / agree, delta_out)


def phase_from_fidelity(F: float) -> float:
    """Magnitude of the phase ``delta`` whose pure pair ``|01> - e^{i delta}|10>`` has fidelity ``F``."""
    F = min(max(F, 0.0), 1.0)
    return 2 * math.atan2(math.sqrt(1 - F), math.sqrt(F))


def accuracy_ratio_after_round(F: float) -> float:
    """Offset-accuracy ratio after one round versus before (>1 means worse)."""
    if not (0.5 < F <= 1.0):
        raise ValueError("F must lie in (1/2, 1]")
    return math.sqrt(2) * math.sqrt(F * F + (1 - F) ** 2)


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def hashing_yield(n: float, F: float) -> float:
    """Asymptotic hashing yield ``n (1 - H2(F))``."""
    if n < 0 or not (0.0 <= F <= 1.0):
        raise ValueError("need n >= 0 and F in [0, 1]")
    return n * (1.0 - binary_entropy(F))


# -- circuit rounds -----------------------------------------------------------------


@lru_cache(maxsize=1)
def _agreement_projector() -> np.ndarray:
    return 0.5 * (np.eye(16) + pauli_string("XXXX"))


def _cnot(control: int, target: int) -> np.ndarray:
    p0 = lift(np.diag([1.0, 0.0]).astype(complex), [control], 4)
    p1 = lift(np.diag([0.0, 1.0]).astype(complex), [control], 4)
    return p0 + p1 @ lift(X, [target], 4)


@lru_cache(maxsize=1)
def _gate_unitary() -> np.ndarray:
    h_all = lift(np.kron(np.kron(HADAMARD, HADAMARD), np.kron(HADAMARD, HADAMARD)), [0, 1, 2, 3], 4)
    h_pair1 = lift(np.kron(HADAMARD, HADAMARD), [0, 1], 4)
    frame = lift(X, [1], 4)
    return frame @ h_pair1 @ _cnot(0, 2) @ _cnot(1, 3) @ h_all


def _kept_projective(rho4: np.ndarray) -> np.ndarray:
    p = _agreement_projector()
    return p @ rho4 @ p


def _kept_gates(rho4: np.ndarray) -> np.ndarray:
    u = _gate_unitary()
    r = u @ rho4 @ u.conj().T
    out = np.zeros_like(r)
    for m in (0, 1):
        z = np.diag([1.0 - m, float(m)]).astype(complex)
        proj = lift(np.kron(z, z), [2, 3], 4)
        out = out + proj @ r @ proj
    return out


def recurrence_round_circuit(pair_state: DensityMatrix, bob_lag: float = 0.0, omega: float = 1.0,
                             method: Literal["projective", "gates"] = "projective",
                             target: StateVector | None = None) -> RecurrenceResult:
    """One recurrence round on two i.i.d. copies of ``pair_state``.

    ``F_out`` is measured against ``target`` (default ``|psi-(bob_lag)>``, the
    state a lagged round actually distills).
    """
    if pair_state.num_qubits != 2:
        raise ValueError("pair_state must be a two-qubit density matrix")
    rho = pair_state
    if bob_lag:
        # conjugating Bob's operations by U_lag == moving his qubit forward by lag first
        rho = evolve_free(rho, FreeEvolutionParams(omega, bob_lag), [1])
    rho4 = np.kron(rho.matrix, rho.matrix)
    kept = _kept_projective(rho4) if method == "projective" else _kept_gates(rho4)
    keep = float(np.trace(kept).real)
    if keep < KEEP_FLOOR:
        raise DistillationError(f"keep probability {keep:.3e} is below {KEEP_FLOOR}; the ensemble never agrees")
    pair1 = partial_trace(DensityMatrix.from_unnormalized(kept), [0, 1])
    if bob_lag:
        pair1 = evolve_free(pair1, FreeEvolutionParams(omega, -bob_lag), [1])
    if target is None:
        target = evolve_free(PSI_MINUS, FreeEvolutionParams(omega, -bob_lag), [1]) if bob_lag else PSI_MINUS
    f_out = fidelity(pair1, target)
    return RecurrenceResult(0.5 * keep, f_out, phase_from_fidelity(f_out), pair1)


# -- iteration ---------------------------------------------------------------------------


def iterate_distillation(ensemble: PairEnsemble, rounds: int,
                         mode: Literal["analytic", "circuit"] = "analytic",
                         omega: float = 1.0) -> list[tuple[PairEnsemble, RecurrenceResult]]:
    """Apply ``rounds`` recurrence rounds, threading the expected pair count forward.

    Returns ``(ensemble after round, round result)`` per round.  Analytic mode
    covers the two closed-form families: phase-error mixtures (``delta == 0``)
    and pure pairs with a systematic phase (``F == 1``).
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    out = []
    if mode == "analytic":
        if ensemble.delta and ensemble.F != 1.0:
            raise ValueError("analytic mode needs delta == 0 or F == 1; use circuit mode for mixed inputs")
        cur = ensemble
        for _ in range(rounds):
            if cur.delta:
                res = systematic_phase_round(cur.delta)
                cur = replace(cur, n=cur.n * res.survival, delta=res.delta_out)
            else:
                res = recurrence_round_analytic(cur.F)
                cur = replace(cur, n=cur.n * res.survival, F=res.F_out)
            out.append((cur, res))
        return out
    if mode != "circuit":
        raise ValueError(f"unknown mode {mode!r}")
    state = ensemble.state(omega)
    n = ensemble.n
    for _ in range(rounds):
        res = recurrence_round_circuit(state, ensemble.Delta, omega)
        state = res.kept_state
        n *= res.survival
        out.append((PairEnsemble(n, res.F_out, 0.0, ensemble.Delta), res))
    return out


def write_trace_csv(trace: Sequence[tuple[PairEnsemble, RecurrenceResult]], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "n", "F", "delta", "survival"])
        for k, (ens, res) in enumerate(trace, start=1):
            w.writerow([k, repr(ens.n), repr(ens.F), repr(res.delta_out), repr(res.survival)])


# -- Monte Carlo check of the accuracy ratio -------------------------------------------------


def purification_accuracy_monte_carlo(F: float, n: int, reps: int, omega: float = 1.0,
                                      t: float | None = None, seed: int = 0) -> dict:
    """Spread of QCS offset estimates with raw pairs versus once-purified pairs.

    The raw supply of ``n`` pairs at fidelity ``F`` is grouped into ``n // 2``
    couples; each survives with the agreement probability and then carries
    fidelity ``F'``.  Default offset is the most sensitive point ``pi/(2 omega)``.
    """
    if t is None:
        t = math.pi / (2 * omega)
    frame = ClockFrame(true_offset=t)
    rng = substream(seed, "purification-mc")
    res = recurrence_round_analytic(F)
    keep = 2 * res.survival
    before, after, kept_counts = [], [], []
    for _ in range(reps):
        raw = run_qcs(n, frame, omega, F=F, rng=rng)
        before.append(estimate_offset(raw, omega, LikelihoodModel.qcs(F=F)).t_hat)
        n_kept = int(rng.binomial(n // 2, keep))
        kept_counts.append(n_kept)
        pur = run_qcs(n_kept, frame, omega, F=res.F_out, rng=rng)
        after.append(estimate_offset(pur, omega, LikelihoodModel.qcs(F=res.F_out)).t_hat)
    sd_before = float(np.std(before, ddof=1))
    sd_after = float(np.std(after, ddof=1))
    return {
        "std_before": sd_before,
        "std_after": sd_after,
        "ratio": sd_after / sd_before,
        "predicted": accuracy_ratio_after_round(F),
        "mean_kept": float(np.mean(kept_counts)),
    }
