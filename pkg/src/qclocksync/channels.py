"""Kraus noise channels and Bloch-vector master-equation evolution.

Rate convention: a Lindblad jump operator ``sqrt(gamma) * sigma`` damps the two
Bloch components that anticommute with ``sigma`` as ``exp(-2 gamma t)``.  At the
channel layer an exposure ``T`` to rate ``gamma`` gives the damping factor
``eta = exp(-gamma T)``.
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .qcore import I2, X, Y, Z, DensityMatrix, StateVector, lift, _check_qubits


@dataclass(frozen=True)
class KrausChannel:
    operators: tuple
    arity: int

    def __post_init__(self):
        if not self.operators:
            raise ValueError("a channel needs at least one Kraus operator")
        d = 2**self.arity
        acc = np.zeros((d, d), dtype=complex)
        for k in self.operators:
            if k.shape != (d, d):
                raise ValueError(f"Kraus operator shape {k.shape} does not match arity {self.arity}")
            acc += k.conj().T @ k
        if np.max(np.abs(acc - np.eye(d))) > 1e-12:
            raise ValueError("Kraus operators are not trace preserving")

    @classmethod
    def from_operators(cls, operators: Sequence[np.ndarray]) -> "KrausChannel":
        ops = tuple(np.asarray(k, dtype=complex) for k in operators)
        arity = int(round(math.log2(ops[0].shape[0])))
        return cls(ops, arity)

    def compose(self, other: "KrausChannel") -> "KrausChannel":
        """``other`` after ``self``."""
        return KrausChannel.from_operators([b @ a for a in self.operators for b in other.operators])


@dataclass(frozen=True)
class NoiseParams:
    gamma: float
    exposure: float

    def __post_init__(self):
        if self.gamma < 0 or self.exposure < 0:
            raise ValueError("gamma and exposure must be non-negative")

    @property
    def eta(self) -> float:
        return math.exp(-self.gamma * self.exposure)


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if self.norm() > 1 + 1e-10:
            raise ValueError(f"Bloch vector length {self.norm()} exceeds 1")

    def norm(self) -> float:
        return math.sqrt(self.x**2 + self.y**2 + self.z**2)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @classmethod
    def from_density(cls, rho: DensityMatrix) -> "BlochVector":
        if rho.num_qubits != 1:
            raise ValueError("Bloch vectors describe single qubits")
        return cls(rho.expectation(X), rho.expectation(Y), rho.expectation(Z))

    def to_density(self) -> DensityMatrix:
        return DensityMatrix.from_unnormalized(0.5 * (I2 + self.x * X + self.y * Y + self.z * Z))


def _check_eta(eta: float) -> None:
    if not (0.0 <= eta <= 1.0):
        raise ValueError(f"eta must lie in [0, 1], got {eta}")


def dephasing_channel(eta: float) -> KrausChannel:
    _check_eta(eta)
    return KrausChannel((math.sqrt((1 + eta) / 2) * I2, math.sqrt((1 - eta) / 2) * Z), 1)


def bitflip_channel(eta: float) -> KrausChannel:
    _check_eta(eta)
    return KrausChannel((math.sqrt((1 + eta) / 2) * I2, math.sqrt((1 - eta) / 2) * X), 1)


def apply_channel(rho: DensityMatrix, ch: KrausChannel, qubits: Sequence[int]) -> DensityMatrix:
    qs = _check_qubits(qubits, rho.num_qubits)
    if len(qs) != ch.arity:
        raise ValueError(f"channel arity {ch.arity} does not match {len(qs)} target qubits")
    out = np.zeros_like(rho.matrix)
    for k in ch.operators:
        full = lift(k, qs, rho.num_qubits)
        out = out + full @ rho.matrix @ full.conj().T
    return DensityMatrix.from_unnormalized(out)


def collective_z_rotation(rho: DensityMatrix | StateVector, theta: float, qubits: Sequence[int]):
    """Identical ``exp(-i theta Z / 2)`` on both qubits of ``qubits``."""
    qs = _check_qubits(qubits, rho.num_qubits)
    if len(qs) != 2:
        raise ValueError("collective rotation acts on exactly two qubits")
    r = np.diag([cmath.exp(-0.5j * theta), cmath.exp(0.5j * theta)])
    full = lift(np.kron(r, r), qs, rho.num_qubits)
    if isinstance(rho, StateVector):
        return StateVector.normalized(full @ rho.amplitudes)
    return DensityMatrix.from_unnormalized(full @ rho.matrix @ full.conj().T)


# -- master equation ---------------------------------------------------------

NoiseKind = Literal["bitflip", "dephasing"]


def bloch_generator(omega: float, kind: NoiseKind, gamma: float) -> np.ndarray:
    """Linear generator ``db/dt = G b`` for precession about z plus Pauli damping."""
    g = np.array([[0.0, -omega, 0.0], [omega, 0.0, 0.0], [0.0, 0.0, 0.0]])
    if kind == "bitflip":
        g[1, 1] -= 2 * gamma
        g[2, 2] -= 2 * gamma
    elif kind == "dephasing":
        g[0, 0] -= 2 * gamma
        g[1, 1] -= 2 * gamma
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    return g


def _analytic(b0: np.ndarray, omega: float, kind: NoiseKind, gamma: float, t: float) -> np.ndarray:
    x0, y0, z0 = b0
    if kind == "dephasing":
        c = complex(x0, y0) * cmath.exp(complex(-2 * gamma, omega) * t)
        return np.array([c.real, c.imag, z0])
    # bitflip: z decays alone; (x, y) obey [[0, -w], [w, -2g]]
    # exp(Mt) = e^{-gt} [cosh(st) I + sinh(st)/s (M + g I)],  s^2 = g^2 - w^2
    s = cmath.sqrt(gamma * gamma - omega * omega)
    st = s * t
    ch = cmath.cosh(st)
    sh_over_s = t if abs(st) < 1e-12 else cmath.sinh(st) / s
    m_plus = np.array([[gamma, -omega], [omega, -gamma]])
    prop = math.exp(-gamma * t) * (ch * np.eye(2) + sh_over_s * m_plus)
    xy = (prop @ np.array([x0, y0])).real
    return np.array([xy[0], xy[1], z0 * math.exp(-2 * gamma * t)])


def _rk4(b0: np.ndarray, gen: np.ndarray, t: float, dt: float) -> np.ndarray:
    steps = max(1, int(math.ceil(t / dt - 1e-9)))
    h = t / steps
    b = b0.astype(float).copy()
    start = np.linalg.norm(b0)
    for _ in range(steps):
        k1 = gen @ b
        k2 = gen @ (b + 0.5 * h * k1)
        k3 = gen @ (b + 0.5 * h * k2)
        k4 = gen @ (b + h * k3)
        b = b + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(b)) or np.linalg.norm(b) > start + 1e-10:
            raise FloatingPointError("RK4 step size produced a growing or divergent solution")
    return b


def default_step(omega: float, gamma: float) -> float:
    """Fixed RK4 step: ``gamma * dt = 1e-3`` (or the same fraction of the precession rate)."""
    rate = gamma if gamma > 0 else abs(omega)
    return 1e-3 / rate if rate > 0 else 1e-3


def bloch_evolve(b: BlochVector, omega: float, kind: NoiseKind, gamma: float, t: float,
                 method: Literal["analytic", "integrator"] = "analytic",
                 dt: float | None = None) -> BlochVector:
    if gamma < 0 or t < 0:
        raise ValueError("gamma and t must be non-negative")
    b0 = b.as_array()
    if method == "analytic":
        out = _analytic(b0, omega, kind, gamma, t)
    elif method == "integrator":
        out = b0 if t == 0 else _rk4(b0, bloch_generator(omega, kind, gamma), t,
                                      dt or default_step(omega, gamma))
    else:
        raise ValueError(f"unknown method {method!r}")
    return BlochVector(*map(float, out))


def bloch_trajectory(b: BlochVector, omega: float, kind: NoiseKind, gamma: float,
                     times: Sequence[float], method: Literal["analytic", "integrator"] = "analytic",
                     dt: float | None = None) -> np.ndarray:
    """Rows of ``(t, x, y, z)``. The integrator path steps continuously between samples."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or (times.size and times[0] < 0):
        raise ValueError("times must be non-negative and non-decreasing")
    rows = []
    cur, t_prev = b, 0.0
    for t in times:
        if method == "analytic":
            cur = bloch_evolve(b, omega, kind, gamma, float(t), "analytic")
        else:
            cur = bloch_evolve(cur, omega, kind, gamma, float(t - t_prev), "integrator", dt)
            t_prev = float(t)
        rows.append((float(t), cur.x, cur.y, cur.z))
    return np.array(rows)


def write_trajectory_csv(rows: np.ndarray, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "y", "z"])
        for r in rows:
            w.writerow([repr(float(v)) for v in r])
