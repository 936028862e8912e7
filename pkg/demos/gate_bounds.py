"""Gate-based upper bounds on METs, and the explicit two-qubit construction behind them.

Any single-qubit state can be reached with 2.5 pi-gate times of single-qubit
rotations; any two-qubit state with two such layers around one power of
SWAP.  ``construct_transition`` builds the circuit for a concrete pair and
checks that it really maps one state onto the other.

    python3 demos/gate_bounds.py
"""
import numpy as np

from spinmet import construct_transition, reference_bounds, schmidt_decompose

bounds = reference_bounds(pi_gate_time=200.0, swap_time=0.5)
for name, value in bounds.to_dict().items():
    print(f"  {name:22s} {value:8.1f} ns")

rng = np.random.default_rng(1)
psi0, phi = (v / np.linalg.norm(v) for v in rng.normal(size=(2, 4)) + 1j * rng.normal(size=(2, 4)))
theta0, theta1 = schmidt_decompose(psi0)[0], schmidt_decompose(phi)[0]
circuit = construct_transition(psi0, phi)
print(f"Schmidt angles {theta0:.4f} -> {theta1:.4f}; SWAP power {circuit.alpha:.4f}")
print(f"|<phi| circuit |psi0>| = {circuit.overlap:.15f}")
