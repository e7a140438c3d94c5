"""Dense pure/mixed state simulation for 1 to 4 qubits.

Conventions
-----------
* Qubit 0 is the most significant bit of the basis index, so ``|01>`` is
  index 1 and ``|10>`` is index 2.
* Free evolution uses ``H = omega Z / 2`` and ``U_t = exp(-i H t)``.
* Bell states: ``|psi+->  = (|01> +- |10>)/sqrt2`` and
  ``|phi+-> = (|00> +- |11>)/sqrt2``.

States are immutable: the wrapped arrays are marked read-only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.stats import unitary_group

MAX_QUBITS = 4
NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = 1e-10


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


def _num_qubits_for(dim: int) -> int:
    n = int(round(np.log2(dim))) if dim > 0 else -1
    if n < 1 or 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two >= 2")
    if n > MAX_QUBITS:
        raise ValueError(f"{n} qubits requested; at most {MAX_QUBITS} are supported")
    return n


class StateVector:
    """Normalized pure state. Equality is up to a global phase."""

    __slots__ = ("amplitudes", "num_qubits")

    def __init__(self, amplitudes: Sequence[complex] | np.ndarray):
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        n = _num_qubits_for(amps.size)
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        object.__setattr__(self, "amplitudes", _frozen(amps))
        object.__setattr__(self, "num_qubits", n)

    def __setattr__(self, key, value):
        raise AttributeError("StateVector is immutable")

    @classmethod
    def normalized(cls, amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(amps / norm)

    @classmethod
    def basis(cls, bits: str) -> "StateVector":
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(amps)

    def dm(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def equiv(self, other: "StateVector", atol: float = 1e-10) -> bool:
        """True when the states agree up to a global phase."""
        if self.num_qubits != other.num_qubits:
            return False
        return abs(abs(self.overlap(other)) - 1.0) <= atol

    def __repr__(self) -> str:
        return f"StateVector({np.array2string(self.amplitudes, precision=4)})"


class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite operator."""

    __slots__ = ("matrix", "num_qubits")

    def __init__(self, matrix: np.ndarray, *, validate: bool = True):
        mat = np.asarray(matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {mat.shape}")
        n = _num_qubits_for(mat.shape[0])
        if validate:
            if np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_TOL:
                raise ValueError("density matrix is not Hermitian")
            tr = np.trace(mat).real
            if abs(tr - 1.0) > TRACE_TOL:
                raise ValueError(f"density matrix trace is {tr!r}, expected 1")
            if np.linalg.eigvalsh(mat).min() < -POSITIVITY_TOL:
                raise ValueError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "matrix", _frozen(mat))
        object.__setattr__(self, "num_qubits", n)

    def __setattr__(self, key, value):
        raise AttributeError("DensityMatrix is immutable")

    @classmethod
    def from_unnormalized(cls, matrix: np.ndarray) -> "DensityMatrix":
        """Hermitize and trace-normalize; for outputs of numerically exact maps."""
        mat = np.asarray(matrix, dtype=complex)
        mat = 0.5 * (mat + mat.conj().T)
        tr = np.trace(mat).real
        if tr <= 0:
            raise ValueError("operator has non-positive trace")
        return cls(mat / tr)

    @classmethod
    def maximally_mixed(cls, num_qubits: int) -> "DensityMatrix":
        d = 2**num_qubits
        return cls(np.eye(d) / d)

    def allclose(self, other: "DensityMatrix", atol: float = 1e-12) -> bool:
        return self.matrix.shape == other.matrix.shape and bool(
            np.allclose(self.matrix, other.matrix, atol=atol, rtol=0)
        )

    def expectation(self, op: np.ndarray) -> float:
        return float(np.trace(op @ self.matrix).real)

    def __repr__(self) -> str:
        return f"DensityMatrix(num_qubits={self.num_qubits})"


State = Union[StateVector, DensityMatrix]


# -- standard operators and states ------------------------------------------

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


@dataclass(frozen=True)
class PauliOp:
    label: str
    matrix: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def from_label(cls, label: str) -> "PauliOp":
        try:
            mat = PAULI_MATRICES[label]
        except KeyError:
            raise ValueError(f"unknown Pauli label {label!r}") from None
        return cls(label, mat)


PAULI_MATRICES = {"I": I2, "X": X, "Y": Y, "Z": Z}
PAULIS = {k: PauliOp(k, v) for k, v in PAULI_MATRICES.items()}

_S2 = 1 / np.sqrt(2)
KET_0 = StateVector([1, 0])
KET_1 = StateVector([0, 1])
KET_PLUS = StateVector([_S2, _S2])
KET_MINUS = StateVector([_S2, -_S2])
PSI_MINUS = StateVector([0, _S2, -_S2, 0])
PSI_PLUS = StateVector([0, _S2, _S2, 0])
PHI_PLUS = StateVector([_S2, 0, 0, _S2])
PHI_MINUS = StateVector([_S2, 0, 0, -_S2])
BELL_STATES = {"psi-": PSI_MINUS, "psi+": PSI_PLUS, "phi+": PHI_PLUS, "phi-": PHI_MINUS}


def pauli_string(labels: str) -> np.ndarray:
    """Matrix of a Pauli string such as ``"XZ"`` (leftmost acts on qubit 0)."""
    out = np.ones((1, 1), dtype=complex)
    for ch in labels:
        out = np.kron(out, PAULI_MATRICES[ch])
    return out


# -- composition and reduction ----------------------------------------------


def tensor_product(a: State, b: State) -> State:
    """Kronecker composition; ``a`` occupies the leading qubits."""
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector(np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(np.kron(a.matrix, b.matrix))
    raise TypeError("tensor_product operands must be the same kind of state")


def _check_qubits(qubits: Iterable[int], n: int) -> list[int]:
    qs = list(qubits)
    if not qs:
        raise ValueError("qubit index set is empty")
    if len(set(qs)) != len(qs):
        raise ValueError(f"repeated qubit index in {qs}")
    for q in qs:
        if not (0 <= q < n):
            raise ValueError(f"qubit index {q} out of range for {n} qubits")
    return qs


def lift(op: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Embed a k-qubit operator acting on ``qubits`` (in that order) into n qubits."""
    qs = _check_qubits(qubits, n)
    k = len(qs)
    if op.shape != (2**k, 2**k):
        raise ValueError(f"operator shape {op.shape} does not act on {k} qubits")
    rest = [q for q in range(n) if q not in qs]
    full = np.kron(op, np.eye(2 ** (n - k)))
    order = qs + rest
    inv = [order.index(q) for q in range(n)]
    t = full.reshape([2] * (2 * n)).transpose(inv + [n + i for i in inv])
    return t.reshape(2**n, 2**n)


def apply_unitary(state: State, op: np.ndarray, qubits: Sequence[int]) -> State:
    full = lift(np.asarray(op, dtype=complex), qubits, state.num_qubits)
    if isinstance(state, StateVector):
        return StateVector.normalized(full @ state.amplitudes)
    return DensityMatrix.from_unnormalized(full @ state.matrix @ full.conj().T)


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on ``keep`` (kept qubits stay in ascending order)."""
    n = rho.num_qubits
    kept = sorted(_check_qubits(keep, n))
    traced = [q for q in range(n) if q not in kept]
    t = rho.matrix.reshape([2] * (2 * n))
    # trace highest index first so remaining axis numbers stay valid
    for q in sorted(traced, reverse=True):
        m = t.ndim // 2
        t = np.trace(t, axis1=q, axis2=q + m)
    d = 2 ** len(kept)
    return DensityMatrix.from_unnormalized(t.reshape(d, d))


# -- free evolution ----------------------------------------------------------


@dataclass(frozen=True)
class FreeEvolutionParams:
    omega: float
    duration: float

    def __post_init__(self):
        if not (np.isfinite(self.omega) and np.isfinite(self.duration)):
            raise ValueError("omega and duration must be finite")

    def unitary(self) -> np.ndarray:
        phase = 0.5 * self.omega * self.duration
        return np.diag([np.exp(-1j * phase), np.exp(1j * phase)])


def free_unitary(omega: float, duration: float) -> np.ndarray:
    return FreeEvolutionParams(omega, duration).unitary()


def evolve_free(state: State, params: FreeEvolutionParams, qubits: Iterable[int]) -> State:
    """Apply ``exp(-i omega Z t / 2)`` to each listed qubit; negative t runs backwards."""
    qs = _check_qubits(qubits, state.num_qubits)
    u = params.unitary()
    for q in qs:
        state = apply_unitary(state, u, [q])
    return state


# -- measurement -------------------------------------------------------------


class DecoherenceSuperop:
    """Orthogonal projector family ``{E_a}`` on a bipartite space.

    ``dims`` is ``(dim_A, dim_B)``; Alice holds the leading qubits.
    """

    def __init__(self, projectors: Sequence[np.ndarray], dims: tuple[int, int] | None = None,
                 atol: float = 1e-12):
        projs = [np.asarray(p, dtype=complex) for p in projectors]
        if not projs:
            raise ValueError("at least one projector is required")
        d = projs[0].shape[0]
        if dims is None:
            n = _num_qubits_for(d)
            dims = (2 ** (n // 2 if n > 1 else 1), 2 ** (n - (n // 2 if n > 1 else 1)))
        if dims[0] * dims[1] != d:
            raise ValueError(f"dims {dims} do not multiply to {d}")
        for p in projs:
            if p.shape != (d, d):
                raise ValueError("projectors must share one square shape")
            if np.max(np.abs(p - p.conj().T)) > atol or np.max(np.abs(p @ p - p)) > atol:
                raise ValueError("each E_a must be a Hermitian idempotent")
        for i in range(len(projs)):
            for j in range(i + 1, len(projs)):
                if np.max(np.abs(projs[i] @ projs[j])) > atol:
                    raise ValueError(f"projectors {i} and {j} are not orthogonal")
        if np.max(np.abs(sum(projs) - np.eye(d))) > atol:
            raise ValueError("projectors do not sum to the identity")
        for p in projs:
            p.setflags(write=False)
        self.projectors = tuple(projs)
        self.dims = (int(dims[0]), int(dims[1]))

    @property
    def dim(self) -> int:
        return self.dims[0] * self.dims[1]

    def apply(self, matrix: np.ndarray) -> np.ndarray:
        return sum(p @ matrix @ p for p in self.projectors)

    def __len__(self) -> int:
        return len(self.projectors)


@dataclass(frozen=True)
class MeasurementResult:
    probabilities: np.ndarray
    post_states: tuple  # DensityMatrix or None when the outcome has zero weight
    decohered: DensityMatrix


def measure_projective(state: DensityMatrix, superop: DecoherenceSuperop,
                       sampler: np.random.Generator | None = None):
    """Projective measurement described by an orthogonal projector family.

    Without ``sampler`` a :class:`MeasurementResult` with the full outcome
    distribution is returned; with one, a sampled ``(outcome, post_state)``.
    """
    if isinstance(state, StateVector):
        state = state.dm()
    if superop.dim != state.matrix.shape[0]:
        raise ValueError(f"superoperator acts on dimension {superop.dim}, "
                         f"state has dimension {state.matrix.shape[0]}")
    rho = state.matrix
    probs = np.array([max(np.trace(p @ rho).real, 0.0) for p in superop.projectors])
    probs = probs / probs.sum()
    posts = []
    for p, pr in zip(superop.projectors, probs):
        posts.append(DensityMatrix.from_unnormalized(p @ rho @ p) if pr > 1e-15 else None)
    if sampler is not None:
        k = int(sampler.choice(len(probs), p=probs))
        return k, posts[k]
    return MeasurementResult(probs, tuple(posts), DensityMatrix.from_unnormalized(superop.apply(rho)))


def z_measurement(num_qubits: int, qubit: int) -> DecoherenceSuperop:
    p0 = lift(np.diag([1, 0]).astype(complex), [qubit], num_qubits)
    return DecoherenceSuperop([p0, np.eye(2**num_qubits) - p0])


def x_measurement(num_qubits: int, qubit: int) -> DecoherenceSuperop:
    """Direct projection onto ``|+>`` (outcome 0) and ``|->`` (outcome 1)."""
    plus = np.outer(KET_PLUS.amplitudes, KET_PLUS.amplitudes.conj())
    p_plus = lift(plus, [qubit], num_qubits)
    return DecoherenceSuperop([p_plus, np.eye(2**num_qubits) - p_plus])


def measure_x_via_pulse(state: DensityMatrix, qubit: int) -> MeasurementResult:
    """X measurement as a pi/2 pulse (Hadamard) followed by a Z measurement.

    Post-states are rotated back into the original frame so they can be
    compared with :func:`x_measurement`.
    """
    n = state.num_qubits
    rotated = apply_unitary(state, HADAMARD, [qubit])
    res = measure_projective(rotated, z_measurement(n, qubit))
    back = [None if s is None else apply_unitary(s, HADAMARD, [qubit]) for s in res.post_states]
    return MeasurementResult(res.probabilities, tuple(back),
                             apply_unitary(res.decohered, HADAMARD, [qubit]))


def fidelity(rho: DensityMatrix | StateVector, target: StateVector) -> float:
    """``<target| rho |target>``."""
    if isinstance(rho, StateVector):
        rho = rho.dm()
    if rho.matrix.shape[0] != target.amplitudes.size:
        raise ValueError("fidelity dimension mismatch")
    v = target.amplitudes
    return float(np.clip(np.vdot(v, rho.matrix @ v).real, 0.0, 1.0))


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.linalg.eigvalsh(a - b)).sum())


# -- random states for property tests -----------------------------------------


def random_state_vector(num_qubits: int, rng: np.random.Generator) -> StateVector:
    d = 2**num_qubits
    return StateVector.normalized(rng.normal(size=d) + 1j * rng.normal(size=d))


def random_density_matrix(num_qubits: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    d = 2**num_qubits
    k = rank or d
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    return DensityMatrix.from_unnormalized(g @ g.conj().T)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    return unitary_group.rvs(dim, random_state=rng)
