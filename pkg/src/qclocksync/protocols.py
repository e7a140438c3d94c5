"""Clock-synchronization protocols: QCS, slow clock transport, product pairs.

Every protocol reduces to pairs of X outcomes ``(a, b)`` with

    P(b = +1 | a) = (1 - a * c * cos(omega * t)) / 2

for a protocol-dependent contrast ``c``: ``eta * (2F - 1)`` for QCS,
``1/2`` for the product protocol and ``-eta`` for slow transport (a
prepared ``|+>`` is correlated rather than anticorrelated with Bob's
outcome).  The offset estimator works on that single family.

Offsets are only identified modulo the precession period, and because the
statistics depend on ``cos(omega t)`` the values ``t`` and ``-t`` cannot be
told apart.  Estimates are reported in ``[0, pi/omega]`` together with the
mirror mode.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import qcore
from .channels import apply_channel, dephasing_channel
from .estimation import periodic_argmax
from .qcore import (
    BELL_STATES,
    KET_MINUS,
    KET_PLUS,
    PAULIS,
    PSI_MINUS,
    DensityMatrix,
    FreeEvolutionParams,
    PauliOp,
    StateVector,
    evolve_free,
    free_unitary,
)
from .rng import substream


class DegenerateLikelihoodError(ValueError):
    """The samples carry no information about the offset."""


@dataclass(frozen=True)
class ClockFrame:
    """Scalar clock bookkeeping.

    true_offset: the offset ``t`` to be estimated.
    bob_lag: systematic lag of Bob's pair preparation (flawed pairs); shifts
        the offset seen by pair-based protocols to ``t - bob_lag``.
    transit_proper_time: proper time accumulated by transported qubits (SCT).
    """

    true_offset: float = 0.0
    bob_lag: float = 0.0
    transit_proper_time: float = 0.0

    def __post_init__(self):
        for v in (self.true_offset, self.bob_lag, self.transit_proper_time):
            if not math.isfinite(v):
                raise ValueError("ClockFrame fields must be finite")

    @property
    def pair_elapsed(self) -> float:
        return self.true_offset - self.bob_lag

    @property
    def transport_elapsed(self) -> float:
        return self.transit_proper_time + self.true_offset


@dataclass(frozen=True)
class SampleRecord:
    alice_outcome: int
    bob_outcome: int
    pair_index: int


class SampleSet(Sequence[SampleRecord]):
    """Column-stored outcome records; behaves as a sequence of :class:`SampleRecord`."""

    def __init__(self, alice: np.ndarray, bob: np.ndarray):
        alice = np.asarray(alice, dtype=np.int8)
        bob = np.asarray(bob, dtype=np.int8)
        if alice.shape != bob.shape or alice.ndim != 1:
            raise ValueError("alice and bob outcome arrays must be 1-d and equal length")
        if not (np.all(np.abs(alice) == 1) and np.all(np.abs(bob) == 1)):
            raise ValueError("outcomes must be +1 or -1")
        alice.setflags(write=False)
        bob.setflags(write=False)
        self.alice = alice
        self.bob = bob

    def __len__(self) -> int:
        return int(self.alice.size)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return SampleSet(self.alice[i], self.bob[i])
        i = range(len(self))[i]
        return SampleRecord(int(self.alice[i]), int(self.bob[i]), i)

    def __iter__(self) -> Iterator[SampleRecord]:
        for i in range(len(self)):
            yield SampleRecord(int(self.alice[i]), int(self.bob[i]), i)

    def __eq__(self, other) -> bool:
        return (isinstance(other, SampleSet) and np.array_equal(self.alice, other.alice)
                and np.array_equal(self.bob, other.bob))

    @classmethod
    def from_records(cls, records: Sequence[SampleRecord]) -> "SampleSet":
        if isinstance(records, SampleSet):
            return records
        return cls(np.array([r.alice_outcome for r in records]), np.array([r.bob_outcome for r in records]))

    def counts(self) -> np.ndarray:
        """``k[i, j]`` with ``i, j = 0`` for outcome +1 and 1 for -1 (Alice row, Bob column)."""
        k = np.zeros((2, 2), dtype=np.int64)
        ai = (self.alice < 0).astype(int)
        bi = (self.bob < 0).astype(int)
        np.add.at(k, (ai, bi), 1)
        return k

    def conditional_plus(self, alice: int) -> tuple[float, int]:
        """Empirical ``P(b=+1 | a=alice)`` and the number of conditioning samples."""
        mask = self.alice == alice
        m = int(mask.sum())
        return (float(np.mean(self.bob[mask] == 1)) if m else float("nan")), m

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["pair_index", "alice", "bob"])
            for i, (a, b) in enumerate(zip(self.alice.tolist(), self.bob.tolist())):
                w.writerow([i, a, b])

    @classmethod
    def from_csv(cls, path: str | Path) -> "SampleSet":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        rows.sort(key=lambda r: int(r["pair_index"]))
        return cls(np.array([int(r["alice"]) for r in rows]), np.array([int(r["bob"]) for r in rows]))


# -- closed-form statistics ---------------------------------------------------


def _check_unit(name: str, v: float) -> None:
    if not (0.0 <= v <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {v}")


def qcs_outcome_prob(alice: int, t: float, omega: float, eta: float = 1.0, F: float = 1.0) -> float:
    """``P(b = +1 | a)`` for QCS on dephased, imperfect singlets."""
    if alice not in (1, -1):
        raise ValueError("alice outcome must be +1 or -1")
    _check_unit("eta", eta)
    _check_unit("F", F)
    return 0.5 * (1.0 - alice * eta * (2 * F - 1) * math.cos(omega * t))


def qcs_accuracy(n: int, omega: float, F: float = 1.0) -> float:
    """Offset accuracy ``1 / ((2F - 1) omega sqrt(n))``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if F <= 0.5 or F > 1:
        raise ValueError("F must lie in (1/2, 1]; at F <= 1/2 the pairs carry no offset information")
    return 1.0 / ((2 * F - 1) * omega * math.sqrt(n))


def make_flawed_pair(Delta: float, omega: float) -> StateVector:
    """Singlet with Bob's half run backwards by ``Delta``."""
    return evolve_free(PSI_MINUS, FreeEvolutionParams(omega, -Delta), [1])


def phase_error_mixture(F: float, Delta: float = 0.0, omega: float = 1.0) -> DensityMatrix:
    """``F |psi-(D)><psi-(D)| + (1-F) |psi+(D)><psi+(D)|`` with Bob's half lagged by ``D``."""
    _check_unit("F", F)
    rho = F * PSI_MINUS.dm().matrix + (1 - F) * qcore.PSI_PLUS.dm().matrix
    rho = DensityMatrix(rho)
    if Delta:
        rho = evolve_free(rho, FreeEvolutionParams(omega, -Delta), [1])
    return rho


def _x_projector(sign: int) -> np.ndarray:
    v = (KET_PLUS if sign > 0 else KET_MINUS).amplitudes
    return np.outer(v, v.conj())


def pair_joint_distribution(rho: DensityMatrix, t: float, omega: float, eta: float = 1.0) -> np.ndarray:
    """Joint X-outcome table from a two-qubit state.

    Bob's qubit is dephased by ``eta`` and then evolves for ``t`` longer than
    Alice's before both measure X.  Returns ``P[i, j]`` indexed as in
    :meth:`SampleSet.counts`.
    """
    if eta != 1.0:
        rho = apply_channel(rho, dephasing_channel(eta), [1])
    rho = evolve_free(rho, FreeEvolutionParams(omega, t), [1])
    p = np.empty((2, 2))
    for i, a in enumerate((1, -1)):
        for j, b in enumerate((1, -1)):
            proj = np.kron(_x_projector(a), _x_projector(b))
            p[i, j] = np.trace(proj @ rho.matrix).real
    return p


def product_joint_distribution(t: float, omega: float, quad_points: int = 32) -> np.ndarray:
    """Joint X-outcome table for ``|+>|->`` pairs of unknown age.

    The preparation age is averaged over one precession period with a
    uniform periodic rule, exact for the low-order trigonometric integrand.
    """
    period = 2 * math.pi / omega
    start = qcore.tensor_product(KET_PLUS, KET_MINUS).dm()
    acc = np.zeros((2, 2))
    for age in np.arange(quad_points) * (period / quad_points):
        aged = evolve_free(start, FreeEvolutionParams(omega, float(age)), [0, 1])
        acc += pair_joint_distribution(aged, t, omega)
    return acc / quad_points


# -- likelihood models -------------------------------------------------------


@dataclass(frozen=True)
class LikelihoodModel:
    kind: str
    contrast: float

    @classmethod
    def qcs(cls, eta: float = 1.0, F: float = 1.0) -> "LikelihoodModel":
        _check_unit("eta", eta)
        _check_unit("F", F)
        return cls("qcs", eta * (2 * F - 1))

    @classmethod
    def product(cls) -> "LikelihoodModel":
        return cls("product", 0.5)

    @classmethod
    def sct(cls, eta: float = 1.0) -> "LikelihoodModel":
        _check_unit("eta", eta)
        return cls("sct", -eta)

    def conditional_plus(self, alice: int, theta) -> np.ndarray:
        return 0.5 * (1.0 - alice * self.contrast * np.cos(theta))

    def joint(self, theta: float) -> np.ndarray:
        """Joint table ``P[i, j]``; Alice's marginal is uniform in every model."""
        p = np.empty((2, 2))
        for i, a in enumerate((1, -1)):
            q = float(self.conditional_plus(a, theta))
            p[i] = (0.5 * q, 0.5 * (1 - q))
        return p

    def fisher_information(self, theta: float) -> float:
        """Per-pair Fisher information about ``theta = omega t``."""
        c = self.contrast
        den = 1.0 - (c * math.cos(theta)) ** 2
        return (c * math.sin(theta)) ** 2 / den if den > 0 else 0.0


def fisher_information_numeric(joint_fn, theta: float, h: float = 1e-5) -> float:
    """``sum (dP/dtheta)^2 / P`` from a joint-probability function by central differences."""
    p = joint_fn(theta)
    dp = (joint_fn(theta + h) - joint_fn(theta - h)) / (2 * h)
    mask = p > 1e-15
    return float(np.sum(dp[mask] ** 2 / p[mask]))


def product_to_qcs_information_ratio(omega: float = 1.0, scan_points: int = 65) -> dict:
    """Compare per-pair Fisher information of QCS and product pairs at the product's best offset.

    Both likelihoods are built from state-level simulation (density matrices),
    not from the closed forms.
    """
    singlet = PSI_MINUS.dm()

    def qcs_joint(theta):
        return pair_joint_distribution(singlet, theta / omega, omega)

    def product_joint(theta):
        return product_joint_distribution(theta / omega, omega)

    thetas = np.linspace(0.05, math.pi - 0.05, scan_points)
    prod_info = [fisher_information_numeric(product_joint, th) for th in thetas]
    k = int(np.argmax(prod_info))
    theta_star = float(thetas[k])
    qcs_info = fisher_information_numeric(qcs_joint, theta_star)
    return {
        "theta": theta_star,
        "qcs_information": qcs_info,
        "product_information": prod_info[k],
        "ratio": qcs_info / prod_info[k],
    }


# -- sampling ----------------------------------------------------------------


def _sample_conditional(n: int, contrast: float, theta: float, rng: np.random.Generator) -> SampleSet:
    alice = np.where(rng.random(n) < 0.5, 1, -1)
    p_plus = 0.5 * (1.0 - alice * contrast * math.cos(theta))
    bob = np.where(rng.random(n) < p_plus, 1, -1)
    return SampleSet(alice, bob)


def run_qcs(n: int, frame: ClockFrame, omega: float, eta: float = 1.0, F: float = 1.0,
            seed: int = 0, rng: np.random.Generator | None = None) -> SampleSet:
    """Sample ``n`` QCS pairs; Bob's lag enters as an offset shift ``t - lag``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    model = LikelihoodModel.qcs(eta, F)
    rng = rng or substream(seed, "qcs")
    return _sample_conditional(n, model.contrast, omega * frame.pair_elapsed, rng)


def run_sct(n: int, frame: ClockFrame, omega: float, eta: float = 1.0, seed: int = 0,
            rng: np.random.Generator | None = None) -> SampleSet:
    """Slow clock transport with precessing qubits.

    Alice prepares ``|+>`` or ``|->`` (recorded as ``alice_outcome`` = +1 or -1)
    at her time zero; the qubit is dephased by ``eta`` in transit and precesses
    for ``transit_proper_time + true_offset`` before Bob measures X.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    _check_unit("eta", eta)
    rng = rng or substream(seed, "sct")
    elapsed = FreeEvolutionParams(omega, frame.transport_elapsed)
    p_plus = {}
    for a, ket in ((1, KET_PLUS), (-1, KET_MINUS)):
        rho = apply_channel(ket.dm(), dephasing_channel(eta), [0])
        rho = evolve_free(rho, elapsed, [0])
        p_plus[a] = float(np.trace(_x_projector(1) @ rho.matrix).real)
    alice = np.where(rng.random(n) < 0.5, 1, -1)
    probs = np.where(alice == 1, p_plus[1], p_plus[-1])
    bob = np.where(rng.random(n) < probs, 1, -1)
    return SampleSet(alice, bob)


def run_product_protocol(n: int, frame: ClockFrame, omega: float, seed: int = 0,
                         rng: np.random.Generator | None = None) -> SampleSet:
    """Product pairs ``|+>_A |->_B`` of uniformly random age.

    After age ``T`` Alice's qubit gives +1 with probability
    ``(1 + cos wT)/2``; Bob's, measured ``t`` later, ``(1 - cos w(T+t))/2``.
    The two outcomes are independent given ``T``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = rng or substream(seed, "product")
    age = rng.random(n) * (2 * math.pi / omega)
    pa = 0.5 * (1 + np.cos(omega * age))
    pb = 0.5 * (1 - np.cos(omega * (age + frame.pair_elapsed)))
    alice = np.where(rng.random(n) < pa, 1, -1)
    bob = np.where(rng.random(n) < pb, 1, -1)
    return SampleSet(alice, bob)


# -- estimation ----------------------------------------------------------------


@dataclass(frozen=True)
class OffsetEstimate:
    t_hat: float
    std_error: float
    n_used: int
    log_likelihood: float
    mirror: float
    period: float

    def to_dict(self) -> dict:
        return asdict(self)


def _log_likelihood(counts: np.ndarray, contrast: float, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    total = np.zeros_like(theta)
    for i, a in enumerate((1, -1)):
        p = 0.5 * (1.0 - a * contrast * np.cos(theta))
        for k, prob in ((counts[i, 0], p), (counts[i, 1], 1.0 - p)):
            if k:
                total = total + k * np.log(np.maximum(prob, 1e-300))
    return total


def _observed_information(counts: np.ndarray, contrast: float, theta: float) -> float:
    info = 0.0
    for i, a in enumerate((1, -1)):
        s = a * contrast
        for k, sign in ((counts[i, 0], 1.0), (counts[i, 1], -1.0)):
            if not k:
                continue
            p = 0.5 * (1.0 - sign * s * math.cos(theta))
            d1 = 0.5 * sign * s * math.sin(theta)
            d2 = 0.5 * sign * s * math.cos(theta)
            if p <= 0:
                return math.inf
            info -= k * (d2 / p - (d1 / p) ** 2)
    return info


def estimate_offset(samples: Sequence[SampleRecord], omega: float, model: LikelihoodModel,
                    grid_size: int = 1024) -> OffsetEstimate:
    """Maximum-likelihood offset.

    Scans ``[0, 2 pi / omega)`` on a grid, refines by golden section, then folds
    the mode into ``[0, pi / omega]``.  ``std_error`` comes from the observed
    Fisher information at the mode.
    """
    samples = SampleSet.from_records(samples)
    if len(samples) < 2:
        raise ValueError("at least two samples are required")
    if abs(model.contrast) < 1e-15:
        raise DegenerateLikelihoodError(f"{model.kind} model has zero contrast; outcomes are uninformative")
    counts = samples.counts()
    ll = lambda th: _log_likelihood(counts, model.contrast, th)  # noqa: E731
    grid = np.arange(grid_size) * (2 * math.pi / grid_size)
    vals = ll(grid)
    if np.ptp(vals) < 1e-12:
        raise DegenerateLikelihoodError("log-likelihood is flat over the whole period")
    theta = periodic_argmax(ll, 2 * math.pi, grid_size)
    if theta > math.pi:
        theta = 2 * math.pi - theta
    info = _observed_information(counts, model.contrast, theta)
    if not (info > 0 and math.isfinite(info)):
        raise DegenerateLikelihoodError(f"observed information {info!r} at the mode is not positive and finite")
    period = 2 * math.pi / omega
    t_hat = theta / omega
    return OffsetEstimate(
        t_hat=float(t_hat),
        std_error=1.0 / (omega * math.sqrt(info)),
        n_used=len(samples),
        log_likelihood=float(ll(np.array([theta]))[0]),
        mirror=float((period - t_hat) % period),
        period=period,
    )


def fold_offset(t: float, omega: float) -> float:
    """Map an offset to its representative in ``[0, pi/omega]``."""
    theta = (omega * t) % (2 * math.pi)
    return (2 * math.pi - theta if theta > math.pi else theta) / omega


# -- teleportation -------------------------------------------------------------

_BELL_ORDER = ("psi-", "psi+", "phi+", "phi-")


@lru_cache(maxsize=1)
def _correction_table() -> dict:
    """Which Pauli Bob holds for each Bell outcome when the resource is a perfect singlet."""
    table = {}
    for name in _BELL_ORDER:
        bra = BELL_STATES[name].amplitudes.conj()
        cols = []
        for j in range(2):
            full = np.kron(np.eye(2)[j], PSI_MINUS.amplitudes).reshape(4, 2)
            cols.append(bra @ full)
        m = np.array(cols).T
        for label, p in PAULIS.items():
            c = np.trace(p.matrix.conj().T @ m) / 2
            if np.allclose(m, c * p.matrix, atol=1e-12) and abs(c) > 1e-12:
                table[name] = label
                break
        else:  # pragma: no cover - algebraic impossibility
            raise RuntimeError(f"outcome {name} does not map to a Pauli")
    return table


@dataclass(frozen=True)
class TeleportResult:
    outcome: str
    probability: float
    raw_state: DensityMatrix
    bob_state: DensityMatrix
    sigma: PauliOp
    fidelity: float


def teleport_branches(psi: StateVector, Delta: float, omega: float,
                      compensate: bool = True) -> list[TeleportResult]:
    """All four Bell-outcome branches of teleportation through ``|psi-(Delta)>``.

    Qubit 0 carries ``psi``, qubits 1 and 2 the resource pair (Bob holds 2).
    With ``compensate`` Bob waits out his lag (free evolution for ``Delta``)
    before applying the Pauli correction.
    """
    if psi.num_qubits != 1:
        raise ValueError("teleport a single-qubit state")
    full = qcore.tensor_product(psi, make_flawed_pair(Delta, omega)).dm()
    lag = free_unitary(omega, Delta)
    out = []
    for name in _BELL_ORDER:
        proj = qcore.lift(BELL_STATES[name].dm().matrix, [0, 1], 3)
        branch = proj @ full.matrix @ proj
        prob = float(np.trace(branch).real)
        raw = qcore.partial_trace(DensityMatrix.from_unnormalized(branch), [2])
        sigma = PAULIS[_correction_table()[name]]
        op = sigma.matrix @ (lag if compensate else np.eye(2))
        bob = DensityMatrix.from_unnormalized(op @ raw.matrix @ op.conj().T)
        out.append(TeleportResult(name, prob, raw, bob, sigma, qcore.fidelity(bob, psi)))
    return out


def teleport_with_offset(psi: StateVector, Delta: float, omega: float, seed: int = 0,
                         compensate: bool = True) -> TeleportResult:
    """One sampled teleportation run through a lagged resource pair."""
    branches = teleport_branches(psi, Delta, omega, compensate)
    probs = np.array([b.probability for b in branches])
    k = int(substream(seed, "teleport").choice(len(branches), p=probs / probs.sum()))
    return branches[k]


__all__ = [
    "ClockFrame", "SampleRecord", "SampleSet", "OffsetEstimate", "LikelihoodModel",
    "DegenerateLikelihoodError", "qcs_outcome_prob", "qcs_accuracy", "make_flawed_pair",
    "phase_error_mixture", "pair_joint_distribution", "product_joint_distribution",
    "fisher_information_numeric", "product_to_qcs_information_ratio", "run_qcs", "run_sct",
    "run_product_protocol", "estimate_offset", "fold_offset", "teleport_branches",
    "teleport_with_offset", "TeleportResult",
]
