"""Cost Hamiltonians, Hamiltonian-file ingestion and shot allocation.

A cost is either the expectation value of a real-weighted Pauli sum (molecular
ground-state preparation) or the infidelity ``1 - |<phi|psi>|^2`` to a target
state.  Both are quadratic forms ``<psi|C|psi>``, which is all the optimizer
needs.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property, reduce
from pathlib import Path

import numpy as np

from .device import DATA_DIR

PAULI_LETTERS = "IXYZ"
_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
HAMILTONIAN_DIR = DATA_DIR / "hamiltonians"
FCI_CHECK_MAX_QUBITS = 4
FCI_TOL = 1e-9
DEGENERACY_GAP = 1e-10


class HamiltonianFormatError(ValueError):
    """Malformed Hamiltonian document; the message names the offending location."""


class DegenerateGroundStateWarning(UserWarning):
    """The ground space is degenerate; the returned eigenvector is arbitrary."""


def pauli_matrix(word: str) -> np.ndarray:
    """Dense matrix of a Pauli word; the first letter acts on qubit 0 (most significant)."""
    return reduce(np.kron, (_PAULI[c] for c in word))


def _pauli_diagonal_action(word: str, psi: np.ndarray) -> np.ndarray:
    """``P |psi>`` using the bit-flip/phase structure of Pauli words."""
    n = len(word)
    idx = np.arange(2 ** n)
    flip = 0
    phase = np.ones(2 ** n, dtype=complex)
    for q, c in enumerate(word):
        bit = (idx >> (n - 1 - q)) & 1
        if c in "XY":
            flip |= 1 << (n - 1 - q)
        if c == "Z":
            phase *= 1 - 2 * bit
        elif c == "Y":
            # Y|0> = i|1>, Y|1> = -i|0>: phase by the source bit
            phase *= 1j * (1 - 2 * bit)
    out = np.empty_like(psi)
    out[idx ^ flip] = phase * psi
    return out


@dataclass
class PauliSum:
    """Real-weighted sum of Pauli words.

    ``metadata`` may carry ``molecule``, ``bond_distance_angstrom``,
    ``fci_energy`` and the Hartree-Fock bitstring ``hf_state``.
    """

    terms: list
    unit: str = "hartree"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.terms = [(str(w), float(c)) for w, c in self.terms]
        if not self.terms:
            raise ValueError("PauliSum needs at least one term")
        n = len(self.terms[0][0])
        seen = set()
        for pos, (w, _) in enumerate(self.terms):
            if len(w) != n or n == 0:
                raise ValueError(f"term {pos}: word {w!r} has length {len(w)}, expected {n}")
            bad = [i for i, c in enumerate(w) if c not in PAULI_LETTERS]
            if bad:
                raise ValueError(f"term {pos}: invalid letter {w[bad[0]]!r} at position {bad[0]}")
            if w in seen:
                raise ValueError(f"term {pos}: duplicate Pauli word {w!r}")
            seen.add(w)

    @property
    def n_qubits(self) -> int:
        return len(self.terms[0][0])

    @property
    def words(self) -> list:
        return [w for w, _ in self.terms]

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for _, c in self.terms])

    @cached_property
    def matrix(self) -> np.ndarray:
        d = 2 ** self.n_qubits
        out = np.zeros((d, d), dtype=complex)
        for w, c in self.terms:
            out += c * pauli_matrix(w)
        return out

    def apply(self, psi: np.ndarray) -> np.ndarray:
        return self.matrix @ psi

    def expectation(self, psi: np.ndarray) -> float:
        return float(np.real(np.vdot(psi, self.apply(psi))))

    def term_expectations(self, psi: np.ndarray) -> np.ndarray:
        return np.array([np.real(np.vdot(psi, _pauli_diagonal_action(w, psi)))
                         for w in self.words])

    @property
    def hf_state(self) -> str | None:
        return self.metadata.get("hf_state")

    @property
    def bond_distance(self) -> float | None:
        return self.metadata.get("bond_distance_angstrom")

    def to_dict(self) -> dict:
        return {"n_qubits": self.n_qubits, "unit": self.unit,
                "terms": [{"pauli": w, "coeff": c} for w, c in self.terms],
                "metadata": dict(self.metadata)}

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def from_dict(cls, data, source: str = "<hamiltonian>") -> "PauliSum":
        """Parse and validate a Hamiltonian document with positional diagnostics."""
        def fail(where, msg):
            raise HamiltonianFormatError(f"{source}: {where}: {msg}")

        if not isinstance(data, dict):
            fail("top level", "expected a JSON object")
        for key in ("n_qubits", "terms"):
            if key not in data:
                fail("top level", f"missing field {key!r}")
        n = data["n_qubits"]
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            fail("n_qubits", f"expected a positive integer, got {n!r}")
        terms = data["terms"]
        if not isinstance(terms, list) or not terms:
            fail("terms", "expected a nonempty list")
        parsed, seen = [], {}
        for pos, term in enumerate(terms):
            where = f"terms[{pos}]"
            if not isinstance(term, dict) or "pauli" not in term or "coeff" not in term:
                fail(where, "expected an object with 'pauli' and 'coeff'")
            word, coeff = term["pauli"], term["coeff"]
            if not isinstance(word, str):
                fail(f"{where}.pauli", f"expected a string, got {word!r}")
            if len(word) != n:
                fail(f"{where}.pauli", f"word {word!r} has length {len(word)}, expected {n}")
            for i, c in enumerate(word):
                if c not in PAULI_LETTERS:
                    fail(f"{where}.pauli[{i}]", f"invalid letter {c!r} (allowed: I, X, Y, Z)")
            if isinstance(coeff, (dict, list)) or isinstance(coeff, bool) \
                    or not isinstance(coeff, (int, float)):
                fail(f"{where}.coeff", f"coefficient must be a real number, got {coeff!r} "
                     "(complex weights make the operator non-Hermitian)")
            if not math.isfinite(coeff):
                fail(f"{where}.coeff", "coefficient is not finite")
            if word in seen:
                fail(f"{where}.pauli", f"duplicate word {word!r} (first at terms[{seen[word]}])")
            seen[word] = pos
            parsed.append((word, float(coeff)))
        meta = data.get("metadata", {}) or {}
        if not isinstance(meta, dict):
            fail("metadata", "expected an object")
        hf = meta.get("hf_state")
        if hf is not None and (not isinstance(hf, str) or len(hf) != n
                               or set(hf) - {"0", "1"}):
            fail("metadata.hf_state", f"expected a bitstring of length {n}, got {hf!r}")
        out = cls(parsed, unit=str(data.get("unit", "hartree")), metadata=dict(meta))
        fci = meta.get("fci_energy")
        if fci is not None and n <= FCI_CHECK_MAX_QUBITS:
            e0 = float(np.linalg.eigvalsh(out.matrix)[0])
            if abs(e0 - float(fci)) > FCI_TOL:
                fail("metadata.fci_energy",
                     f"{fci!r} differs from the minimum eigenvalue {e0!r}")
        return out

    @classmethod
    def load(cls, path) -> "PauliSum":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise HamiltonianFormatError(f"{path}: cannot read file ({exc.strerror})") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise HamiltonianFormatError(
                f"{path}: line {exc.lineno} column {exc.colno}: invalid JSON ({exc.msg})") from exc
        return cls.from_dict(data, source=str(path))


def bundled_hamiltonian(name: str) -> PauliSum:
    """Load one of the synthetic Hamiltonians shipped with the package."""
    return PauliSum.load(HAMILTONIAN_DIR / f"{name}.json")


def bundled_series(prefix: str) -> list:
    """All bundled Hamiltonians named ``prefix_*.json``, sorted by bond distance."""
    series = [PauliSum.load(p) for p in sorted(HAMILTONIAN_DIR.glob(f"{prefix}_*.json"))]
    return sorted(series, key=lambda h: h.bond_distance)


def ground_truth(pauli: PauliSum) -> tuple:
    """Minimum eigenvalue and an eigenvector of the dense matrix.

    Emits :class:`DegenerateGroundStateWarning` when the gap to the next
    level is below 1e-10.
    """
    if pauli.n_qubits > 12:
        raise ValueError("dense diagonalization is limited to 12 qubits")
    evals, evecs = np.linalg.eigh(pauli.matrix)
    if len(evals) > 1 and evals[1] - evals[0] < DEGENERACY_GAP:
        warnings.warn(f"degenerate ground space (gap {evals[1] - evals[0]:.3g})",
                      DegenerateGroundStateWarning, stacklevel=2)
    state = evecs[:, 0]
    # fix the global phase: first non-negligible amplitude real and positive
    k = int(np.argmax(np.abs(state) > 1e-12))
    state = state * np.exp(-1j * np.angle(state[k]))
    return float(evals[0]), state


@dataclass
class CostFunction:
    """Quadratic cost ``<psi|C|psi>``.

    ``kind`` is ``"pauli_expectation"`` (payload: :class:`PauliSum`) or
    ``"infidelity"`` (payload: normalized target state, ``C = 1 - |phi><phi|``).
    ``reference_floor`` is the minimum attainable cost (ground energy or 0).
    """

    kind: str
    payload: object
    reference_floor: float = 0.0

    def __post_init__(self):
        if self.kind == "pauli_expectation":
            if not isinstance(self.payload, PauliSum):
                raise TypeError("pauli_expectation cost needs a PauliSum payload")
        elif self.kind == "infidelity":
            phi = np.asarray(self.payload, dtype=complex)
            if phi.ndim != 1 or abs(np.linalg.norm(phi) - 1) > 1e-12:
                raise ValueError("infidelity target must be a normalized state vector")
            self.payload = phi
        else:
            raise ValueError(f"unknown cost kind {self.kind!r}")

    @classmethod
    def expectation(cls, pauli: PauliSum, reference_floor: float | None = None):
        if reference_floor is None:
            reference_floor = float(np.linalg.eigvalsh(pauli.matrix)[0])
        return cls("pauli_expectation", pauli, reference_floor)

    @classmethod
    def infidelity(cls, target):
        return cls("infidelity", target, 0.0)

    @property
    def dim(self) -> int:
        if self.kind == "infidelity":
            return self.payload.shape[0]
        return 2 ** self.payload.n_qubits

    def _check(self, psi):
        psi = np.asarray(psi, dtype=complex)
        if psi.shape != (self.dim,):
            raise ValueError(f"state dimension {psi.shape} does not match cost dimension {self.dim}")
        return psi

    def evaluate(self, psi) -> float:
        psi = self._check(psi)
        if self.kind == "infidelity":
            return float(1.0 - abs(np.vdot(self.payload, psi)) ** 2)
        return self.payload.expectation(psi)

    def apply(self, psi) -> np.ndarray:
        """``C |psi>``, the terminal condition of the adjoint sweep."""
        psi = self._check(psi)
        if self.kind == "infidelity":
            return psi - self.payload * np.vdot(self.payload, psi)
        return self.payload.apply(psi)

    def gap(self, psi) -> float:
        """Distance ``Delta = C - C_0`` above the floor."""
        return self.evaluate(psi) - self.reference_floor


def evaluate(cost: CostFunction, psi) -> float:
    """Exact statevector cost (no sampling)."""
    return cost.evaluate(psi)


# -- shot allocation -----------------------------------------------------------

@dataclass
class ShotPlan:
    """Per-term shot counts for estimating a Pauli-sum expectation.

    ``exact_shots`` are the unrounded Hoeffding allocations, proportional to
    ``|c_P|``; ``shots`` rounds them up.
    """

    words: list
    coefficients: np.ndarray
    exact_shots: np.ndarray
    shots: np.ndarray
    epsilon: float
    delta: float

    @property
    def total(self) -> int:
        return int(self.shots.sum())

    @property
    def guarantee(self) -> str:
        return (f"|estimate - <C>| <= {self.epsilon:g} with probability >= "
                f"{1 - self.delta:g} (Hoeffding over all {self.total} shots)")


def plan_shots(pauli: PauliSum, epsilon: float, delta: float) -> ShotPlan:
    """Hoeffding allocation ``N_P = |c_P| * sum|c| * (2 / eps^2) * ln(2 / delta)``.

    Applying Hoeffding's inequality to the full estimator (a sum of
    independent bounded shots, shot of term P bounded in ``+-|c_P|/N_P``)
    shows this allocation gives the joint guarantee directly:
    ``sum_P 4 c_P^2 / N_P = 2 eps^2 / ln(2/delta)``, hence failure
    probability ``<= delta`` without a union bound.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    c = np.abs(pauli.coefficients)
    if not c.sum() > 0:
        raise ValueError("Pauli sum has no nonzero coefficients")
    exact = c * c.sum() * (2.0 / epsilon ** 2) * math.log(2.0 / delta)
    # guard against float noise pushing an integer-valued allocation up by one
    shots = np.ceil(exact - 1e-9).astype(np.int64)
    shots = np.where(c > 0, np.maximum(shots, 1), 0)
    return ShotPlan(pauli.words, pauli.coefficients, exact, shots, float(epsilon), float(delta))


def simulate_measurement_estimate(pauli: PauliSum, psi, plan: ShotPlan, seed) -> float:
    """Sampled estimator ``sum_P c_P (N_P+ - N_P-) / N_P``.

    Each term's +-1 outcomes are drawn from the exact eigenspace
    probabilities ``(1 +- <P>) / 2``; terms with zero shots contribute
    nothing.
    """
    if plan.words != pauli.words:
        raise ValueError("shot plan does not cover the Pauli sum's terms")
    rng = np.random.default_rng(seed)
    psi = np.asarray(psi, dtype=complex)
    exp = np.clip(pauli.term_expectations(psi), -1.0, 1.0)
    p_plus = 0.5 * (1.0 + exp)
    n = plan.shots
    n_plus = rng.binomial(n, p_plus)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(n > 0, (2 * n_plus - n) / np.maximum(n, 1), 0.0)
    return float(np.dot(pauli.coefficients, means))
