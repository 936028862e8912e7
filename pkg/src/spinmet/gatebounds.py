"""Gate-based reference bounds on METs and the constructive two-qubit transition.

A clocked gate model executes every single-qubit gate in the time of the
slowest one.  Any single-qubit transition needs at most 2.5 pi-gate times,
and any two-qubit transition needs at most two layers of single-qubit gates
around one power-of-SWAP.  The construction below realizes such a transition
explicitly: local unitaries bring the initial state into the canonical form
``cos(t)|01> + sin(t)|10>``, a phase-dressed ``SWAP**alpha`` rotates the
Schmidt angle, and a second layer of local unitaries rotates into the target's
Schmidt bases.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


@dataclass(frozen=True)
class GateTimeBudget:
    """Clocked-gate durations (ns) and the derived MET bounds."""

    pi_gate_time: float = 200.0
    swap_alpha_max_time: float = 0.5

    @property
    def one_qubit_max(self) -> float:
        return 2.5 * self.pi_gate_time

    @property
    def two_qubit_max(self) -> float:
        return 2 * self.one_qubit_max + self.swap_alpha_max_time

    @property
    def two_qubit_from_01_max(self) -> float:
        return self.one_qubit_max + self.swap_alpha_max_time

    @property
    def two_qubit_min(self) -> float:
        return self.pi_gate_time + self.swap_alpha_max_time

    def as_tuple(self) -> tuple:
        return (self.one_qubit_max, self.two_qubit_max, self.two_qubit_from_01_max,
                self.two_qubit_min)

    def to_dict(self) -> dict:
        return {"pi_gate_time": self.pi_gate_time,
                "swap_alpha_max_time": self.swap_alpha_max_time,
                "one_qubit_max": self.one_qubit_max, "two_qubit_max": self.two_qubit_max,
                "two_qubit_from_01_max": self.two_qubit_from_01_max,
                "two_qubit_min": self.two_qubit_min}


def reference_bounds(pi_gate_time: float = 200.0, swap_time: float = 0.5) -> GateTimeBudget:
    if pi_gate_time < 0 or swap_time < 0:
        raise ValueError("durations must be non-negative")
    return GateTimeBudget(float(pi_gate_time), float(swap_time))


def _normalized(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (4,):
        raise ValueError("expected a two-qubit state (4 amplitudes)")
    if abs(np.linalg.norm(psi) - 1) > 1e-12:
        raise ValueError("state is not normalized")
    return psi


def schmidt_decompose(psi) -> tuple:
    """``psi = cos(theta) a0 b0 + sin(theta) a1 b1`` with ``theta`` in ``[0, pi/4]``.

    Returns ``(theta, basis_a, basis_b)`` where the columns of the unitary
    ``basis_a`` are ``a0, a1`` and likewise for ``basis_b``.
    """
    m = _normalized(psi).reshape(2, 2)
    u, s, vh = np.linalg.svd(m)
    theta = float(np.arctan2(s[1], s[0]))
    return theta, u, vh.T


def swap_power(alpha: float) -> np.ndarray:
    """``SWAP**alpha`` with the principal branch ``(-1)**alpha = exp(i pi alpha)``."""
    e = np.exp(1j * np.pi * alpha)
    return 0.5 * (1 + e) * np.eye(4) + 0.5 * (1 - e) * SWAP


@dataclass
class TransitionCircuit:
    """``last_local @ SWAP**alpha @ first_local`` mapping ``psi0`` to ``phi`` up to phase."""

    first_local: tuple   # (U_A, U_B) single-qubit unitaries
    alpha: float
    last_local: tuple    # (V_A, V_B)
    overlap: float

    def unitary(self) -> np.ndarray:
        return (np.kron(*self.last_local) @ swap_power(self.alpha)
                @ np.kron(*self.first_local))

    def apply(self, psi) -> np.ndarray:
        return self.unitary() @ np.asarray(psi, dtype=complex)


def construct_transition(psi0, phi) -> TransitionCircuit:
    """Two layers of single-qubit gates around one power-of-SWAP connecting ``psi0`` to ``phi``.

    The SWAP power acts on the ``|01>, |10>`` block as
    ``exp(i pi alpha/2) * exp(-i (pi alpha/2) X)``; dressing it with the phase
    gate ``diag(1, exp(-+i pi/2))`` on the first qubit turns it into a real
    rotation by ``+-pi alpha / 2``, which moves the canonical Schmidt angle
    from ``theta`` to ``theta'``.  Hence ``alpha = 2 |theta' - theta| / pi``,
    which lies in ``[0, 1/2]``.
    """
    psi0, phi = _normalized(psi0), _normalized(phi)
    th0, ua, ub = schmidt_decompose(psi0)
    th1, va, vb = schmidt_decompose(phi)
    flip = np.array([[0, 1], [1, 0]], dtype=complex)
    # a0 -> |0>, a1 -> |1>;  b0 -> |1>, b1 -> |0>
    to_canon_a = ua.conj().T
    to_canon_b = flip @ ub.conj().T
    from_canon_a = va
    from_canon_b = vb @ flip
    delta = th1 - th0
    alpha = 2 * abs(delta) / np.pi
    # block of D^dag SWAP**alpha D equals exp(i pi alpha/2) R(sign * pi alpha/2) for
    # D = diag(1, exp(i phase)) on qubit A with phase = -sign * pi / 2
    phase = -np.pi / 2 if delta >= 0 else np.pi / 2
    dress = np.diag([1, np.exp(1j * phase)])
    first = (dress @ to_canon_a, to_canon_b)
    last = (from_canon_a @ dress.conj().T, from_canon_b)
    circuit = TransitionCircuit(first, float(alpha), last, 0.0)
    out = circuit.apply(psi0)
    circuit.overlap = float(abs(np.vdot(phi, out)))
    if not 0.0 <= alpha <= 1.0:
        raise AssertionError(f"SWAP power {alpha} outside [0, 1]")
    return circuit
