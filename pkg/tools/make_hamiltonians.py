"""Regenerate the synthetic Hamiltonians bundled in src/spinmet/data/hamiltonians."""
from pathlib import Path

import numpy as np

from spinmet.costs import PauliSum

OUT = Path(__file__).resolve().parents[1] / "src" / "spinmet" / "data" / "hamiltonians"


def dimer(h, k, g, e0, meta):
    """``e0 + (h/2)(IZ - ZI) + k ZZ + g (XX + YY)``: ground state near HF |01>."""
    terms = [("II", e0), ("IZ", h / 2), ("ZI", -h / 2), ("ZZ", k), ("XX", g), ("YY", g)]
    p = PauliSum(terms, metadata=dict(meta, hf_state="01"))
    p.metadata["fci_energy"] = float(np.linalg.eigvalsh(p.matrix)[0])
    return p


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    dimer(0.5, 0.3, 0.05, -1.0, {"description": "synthetic two-qubit dimer"}).save(
        OUT / "dimer.json")
    for r in (0.6, 0.8, 1.0, 1.2, 1.4):
        e0 = (1 - np.exp(-1.5 * (r - 0.75))) ** 2 - 1.0
        g = 0.02 + 0.04 * (r - 0.6)
        dimer(0.5, 0.3, round(g, 6), round(e0, 12), {
            "description": "synthetic dimer bond series", "bond_distance_angstrom": r,
        }).save(OUT / f"dimerseries_{r:.2f}.json")
    one = PauliSum([("Z", 1.0)], metadata={"description": "single qubit, HF |0>",
                                          "hf_state": "0"})
    one.metadata["fci_energy"] = -1.0
    one.save(OUT / "qubit_z.json")


if __name__ == "__main__":
    main()
