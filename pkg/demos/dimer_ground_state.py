"""Preparing a two-qubit molecular ground state from its Hartree-Fock bitstring.

The bundled ``dimer`` Hamiltonian is a small illustrative Pauli sum (not
chemistry data).  Any Hamiltonian written in the same JSON format can be
dropped in instead; the scan finds the shortest duration at which optimized
pulses reach the exact ground-state energy within 1e-7 Hartree.

    python3 demos/dimer_ground_state.py
"""
import json
import tempfile
from pathlib import Path

from spinmet import CostFunction, MetScanConfig, OptimizerConfig, PauliSum, scan_met, table_one
from spinmet.costs import bundled_hamiltonian, ground_truth
from spinmet.metscan import hf_state

ham = bundled_hamiltonian("dimer")
energy, _ = ground_truth(ham)
print(f"{len(ham.words)} Pauli terms; HF state |{ham.hf_state}>; exact ground energy {energy:.10f}")

# the ingestion path: write the Hamiltonian to disk and read it back
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "dimer.json"
    ham.save(path)
    print("file format:", json.dumps(json.loads(path.read_text()))[:120], "...")
    ham = PauliSum.load(path)

device = table_one(2)
scan = MetScanConfig([0, 1, 2, 3, 4, 5, 6, 8, 10], n_segments=10, threshold=1e-7)
result = scan_met(device, CostFunction.expectation(ham), hf_state(ham), scan,
                  OptimizerConfig(n_random_restarts=2, seed=0))
for row in result.to_rows():
    print(f"  T = {row['T']:5.1f} ns  Delta = {row['delta']:.3e}  passed = {row['passed']}")
print(f"MET between {result.met_bracket[0]} and {result.met_bracket[1]} ns")
