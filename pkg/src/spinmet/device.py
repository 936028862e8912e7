"""Silicon spin-chain device model.

A linear chain of ``n`` electron spins with Zeeman splittings ``B_i``, a global
microwave antenna carrying ``S`` IQ-modulated tones and nearest-neighbour
exchange couplings ``J_i(t)``.  Energies are linear frequencies with h = 1
(GHz), times are in ns, so a generator ``H`` evolves states as
``exp(-2j*pi*H*t)``.

Computational basis convention: ``|0> = spin up`` (sigma_z = +1), qubit 0 is
the most significant bit of the basis index.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MHZ = 1e-3  # GHz per MHz

# Table I bounds: |I|, |Q| <= 20 MHz / (2 sqrt 2), J in [0, 1] GHz,
# carriers in 27-29 GHz, mean splitting 28 GHz, offsets spanning +-30 MHz.
TABLE_I_IQ_MAX_MHZ = 20.0 / (2.0 * np.sqrt(2.0))
TABLE_I_OFFSET_SPAN_MHZ = (-30.0, 30.0)

DATA_DIR = Path(__file__).parent / "data"


def equally_spaced_offsets(n_qubits: int, span_mhz=TABLE_I_OFFSET_SPAN_MHZ) -> tuple:
    """Zeeman offsets equally spaced over ``span_mhz`` (a single dot sits at 0)."""
    if n_qubits == 1:
        return (0.0,)
    lo, hi = span_mhz
    return tuple(float(x) for x in np.linspace(lo, hi, n_qubits))


@dataclass(frozen=True)
class DeviceParams:
    """Device parameterization of the spin chain.

    Parameters
    ----------
    n_qubits : int
        Chain length.
    b_ghz : float
        Mean Zeeman splitting ``B``.
    zeeman_offsets_mhz : tuple of float, optional
        Offsets ``Delta B_i``; they must average to zero.  Defaults to equal
        spacing over -30..30 MHz.
    iq_max_mhz : float
        Bound on every ``|I_k(t)|`` and ``|Q_k(t)|``.
    j_max_ghz : float
        Exchange bound, ``0 <= J_i(t) <= j_max_ghz``.
    omega_window_ghz : (float, float)
        Allowed carrier frequencies ``omega_k / 2 pi``.
    n_signals : int, optional
        Number of microwave tones on the line.  Defaults to one tone per qubit.
    drive_coupling : float
        Lab-frame drive term is ``drive_coupling * g(t) * sum_i sigma_x``.  The
        default 1/4 calibrates a single resonant tone at ``I = Q = iq_max`` to
        a 200 ns pi rotation.
    """

    n_qubits: int = 1
    b_ghz: float = 28.0
    zeeman_offsets_mhz: tuple | None = None
    iq_max_mhz: float = TABLE_I_IQ_MAX_MHZ
    j_max_ghz: float = 1.0
    omega_window_ghz: tuple = (27.0, 29.0)
    n_signals: int | None = None
    drive_coupling: float = 0.25

    def __post_init__(self):
        if int(self.n_qubits) != self.n_qubits or self.n_qubits < 1:
            raise ValueError(f"n_qubits must be a positive integer, got {self.n_qubits!r}")
        object.__setattr__(self, "n_qubits", int(self.n_qubits))
        for name in ("b_ghz", "iq_max_mhz", "j_max_ghz", "drive_coupling"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.zeeman_offsets_mhz is None:
            object.__setattr__(self, "zeeman_offsets_mhz", equally_spaced_offsets(self.n_qubits))
        else:
            object.__setattr__(self, "zeeman_offsets_mhz",
                               tuple(float(x) for x in self.zeeman_offsets_mhz))
        if self.n_signals is None:
            object.__setattr__(self, "n_signals", self.n_qubits)
        object.__setattr__(self, "omega_window_ghz", tuple(float(x) for x in self.omega_window_ghz))

        if len(self.zeeman_offsets_mhz) != self.n_qubits:
            raise ValueError(
                f"expected {self.n_qubits} Zeeman offsets, got {len(self.zeeman_offsets_mhz)}")
        if abs(np.mean(self.zeeman_offsets_mhz)) > 1e-9:
            raise ValueError("Zeeman offsets must average to zero (B is the mean splitting)")
        if not self.iq_max_mhz > 0:
            raise ValueError("iq_max_mhz must be positive")
        if not self.j_max_ghz >= 0:
            raise ValueError("j_max_ghz must be non-negative")
        lo, hi = self.omega_window_ghz
        if not lo < hi:
            raise ValueError("carrier window must satisfy low < high")
        if int(self.n_signals) != self.n_signals or self.n_signals < 1:
            raise ValueError("n_signals must be a positive integer")
        if not self.drive_coupling > 0:
            raise ValueError("drive_coupling must be positive")

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    @property
    def qubit_frequencies_ghz(self) -> np.ndarray:
        return self.b_ghz + np.asarray(self.zeeman_offsets_mhz) * MHZ

    @property
    def bond_detunings_ghz(self) -> np.ndarray:
        """``B_{i+1} - B_i`` for every exchange bond."""
        return np.diff(self.qubit_frequencies_ghz)

    def scaled(self, axis: str, factor: float) -> "DeviceParams":
        """Copy with one control bound (or the Zeeman inhomogeneity) rescaled."""
        if not factor > 0:
            raise ValueError("scale factor must be positive")
        if axis == "iq_max":
            return self._replace(iq_max_mhz=self.iq_max_mhz * factor)
        if axis == "j_max":
            return self._replace(j_max_ghz=self.j_max_ghz * factor)
        if axis == "delta_b":
            return self._replace(
                zeeman_offsets_mhz=tuple(x * factor for x in self.zeeman_offsets_mhz))
        raise ValueError(f"unknown sweep axis {axis!r}")

    def _replace(self, **changes) -> "DeviceParams":
        d = self.to_dict()
        d.update(changes)
        return DeviceParams(**d)

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "b_ghz": self.b_ghz,
            "zeeman_offsets_mhz": list(self.zeeman_offsets_mhz),
            "iq_max_mhz": self.iq_max_mhz,
            "j_max_ghz": self.j_max_ghz,
            "omega_window_ghz": list(self.omega_window_ghz),
            "n_signals": self.n_signals,
            "drive_coupling": self.drive_coupling,
        }

    @classmethod
    def from_dict(cls, data: dict, n_qubits: int | None = None) -> "DeviceParams":
        """Build from a JSON document with unit-suffixed keys.

        ``zeeman_offset_span_mhz`` (a ``[low, high]`` pair) may replace an
        explicit offset list; ``iq_max_mhz`` may be given as the expression
        ``{"drive_mhz": 40, "n_signals_norm": 4}`` meaning
        ``drive / (sqrt(2) * n_signals_norm)``.
        """
        known = {"n_qubits", "b_ghz", "zeeman_offsets_mhz", "zeeman_offset_span_mhz",
                 "iq_max_mhz", "j_max_ghz", "omega_window_ghz", "n_signals",
                 "drive_coupling", "description"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown device keys: {sorted(unknown)}")
        kw = {k: v for k, v in data.items()
              if k not in ("zeeman_offset_span_mhz", "description")}
        if n_qubits is not None:
            kw["n_qubits"] = n_qubits
            if "zeeman_offsets_mhz" in kw and len(kw["zeeman_offsets_mhz"]) != n_qubits:
                raise ValueError("explicit offsets do not match the requested n_qubits")
        iq = kw.get("iq_max_mhz")
        if isinstance(iq, dict):
            kw["iq_max_mhz"] = float(iq["drive_mhz"]) / (np.sqrt(2.0) * float(iq["n_signals_norm"]))
        if "zeeman_offset_span_mhz" in data and "zeeman_offsets_mhz" not in data:
            kw["zeeman_offsets_mhz"] = equally_spaced_offsets(
                int(kw.get("n_qubits", 1)), tuple(data["zeeman_offset_span_mhz"]))
        return cls(**kw)

    @classmethod
    def load(cls, path, n_qubits: int | None = None) -> "DeviceParams":
        with open(path) as fh:
            return cls.from_dict(json.load(fh), n_qubits=n_qubits)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def table_one(n_qubits: int = 1) -> DeviceParams:
    """Default device from the bundled Table I file."""
    return DeviceParams.load(DATA_DIR / "device_table1.json", n_qubits=n_qubits)


@dataclass
class ControlSchedule:
    """Piecewise-constant controls on ``M`` equal segments.

    Arrays: ``i_mhz`` and ``q_mhz`` are ``(S, M)``, ``j_ghz`` is ``(n-1, M)``,
    ``carriers_ghz`` holds the ``S`` carrier frequencies ``omega_k / 2 pi``.
    """

    total_time_ns: float
    i_mhz: np.ndarray
    q_mhz: np.ndarray
    j_ghz: np.ndarray
    carriers_ghz: np.ndarray

    def __post_init__(self):
        self.total_time_ns = float(self.total_time_ns)
        self.i_mhz = np.atleast_2d(np.asarray(self.i_mhz, dtype=float))
        self.q_mhz = np.atleast_2d(np.asarray(self.q_mhz, dtype=float))
        self.j_ghz = np.asarray(self.j_ghz, dtype=float)
        if self.j_ghz.ndim == 1:
            self.j_ghz = self.j_ghz.reshape(0 if self.j_ghz.size == 0 else 1, -1)
        self.carriers_ghz = np.atleast_1d(np.asarray(self.carriers_ghz, dtype=float))
        m = self.i_mhz.shape[1]
        if self.q_mhz.shape != self.i_mhz.shape:
            raise ValueError("i_mhz and q_mhz must have the same shape")
        if self.j_ghz.size and self.j_ghz.shape[1] != m:
            raise ValueError("j_ghz must have one column per segment")
        if self.j_ghz.size == 0:
            self.j_ghz = np.zeros((self.j_ghz.shape[0] if self.j_ghz.ndim == 2 else 0, m))
        if self.carriers_ghz.shape != (self.i_mhz.shape[0],):
            raise ValueError("one carrier per tone required")
        if self.total_time_ns < 0:
            raise ValueError("total time must be non-negative")

    @property
    def n_segments(self) -> int:
        return self.i_mhz.shape[1]

    @property
    def n_signals(self) -> int:
        return self.i_mhz.shape[0]

    @property
    def segment_duration(self) -> float:
        return self.total_time_ns / self.n_segments

    @classmethod
    def zeros(cls, params: DeviceParams, total_time_ns: float, n_segments: int,
              carriers_ghz: Sequence[float] | None = None) -> "ControlSchedule":
        s, n = params.n_signals, params.n_qubits
        if carriers_ghz is None:
            carriers_ghz = default_carriers(params)
        return cls(total_time_ns, np.zeros((s, n_segments)), np.zeros((s, n_segments)),
                   np.zeros((n - 1, n_segments)), np.array(carriers_ghz, dtype=float))

    def copy(self) -> "ControlSchedule":
        return ControlSchedule(self.total_time_ns, self.i_mhz.copy(), self.q_mhz.copy(),
                               self.j_ghz.copy(), self.carriers_ghz.copy())

    def with_time(self, total_time_ns: float) -> "ControlSchedule":
        out = self.copy()
        out.total_time_ns = float(total_time_ns)
        return out

    def resampled(self, n_segments: int) -> "ControlSchedule":
        """Nearest-segment transfer onto ``n_segments`` equal segments."""
        m = self.n_segments
        if n_segments == m:
            return self.copy()
        centres = (np.arange(n_segments) + 0.5) / n_segments
        idx = np.minimum((centres * m).astype(int), m - 1)
        return ControlSchedule(self.total_time_ns, self.i_mhz[:, idx], self.q_mhz[:, idx],
                               self.j_ghz[:, idx], self.carriers_ghz.copy())

    def padded(self, total_time_ns: float, n_segments: int) -> "ControlSchedule":
        """Same pulse on the original clock followed by idling, on ``n_segments`` segments.

        Each new segment takes the value of the old segment at its centre, or
        zero past the old end.  Zero controls generate no evolution in the
        rotating frame, so this approximates the original evolution.
        """
        if total_time_ns < self.total_time_ns:
            raise ValueError("padding cannot shorten a schedule")
        centres = (np.arange(n_segments) + 0.5) * (total_time_ns / n_segments)
        if self.total_time_ns > 0:
            idx = (centres / self.segment_duration).astype(int)
        else:
            idx = np.full(n_segments, self.n_segments)
        inside = idx < self.n_segments
        idx = np.minimum(idx, self.n_segments - 1)

        def take(arr):
            return np.where(inside[None, :], arr[:, idx], 0.0)

        return ControlSchedule(total_time_ns, take(self.i_mhz), take(self.q_mhz),
                               take(self.j_ghz), self.carriers_ghz.copy())

    def split(self, n_first: int) -> tuple:
        """Cut after ``n_first`` segments; returns the two halves and the cut time."""
        dt = self.segment_duration
        a = ControlSchedule(dt * n_first, self.i_mhz[:, :n_first], self.q_mhz[:, :n_first],
                            self.j_ghz[:, :n_first], self.carriers_ghz.copy())
        b = ControlSchedule(dt * (self.n_segments - n_first), self.i_mhz[:, n_first:],
                            self.q_mhz[:, n_first:], self.j_ghz[:, n_first:],
                            self.carriers_ghz.copy())
        return a, b, dt * n_first

    def to_dict(self) -> dict:
        return {
            "total_time_ns": self.total_time_ns,
            "i_mhz": self.i_mhz.tolist(),
            "q_mhz": self.q_mhz.tolist(),
            "j_ghz": self.j_ghz.tolist(),
            "carriers_ghz": self.carriers_ghz.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ControlSchedule":
        j = np.asarray(data["j_ghz"], dtype=float)
        m = np.asarray(data["i_mhz"], dtype=float).reshape(len(data["carriers_ghz"]), -1).shape[1]
        if j.size == 0:
            j = np.zeros((0, m))
        return cls(data["total_time_ns"], data["i_mhz"], data["q_mhz"], j, data["carriers_ghz"])


def default_carriers(params: DeviceParams) -> np.ndarray:
    """Tone ``k`` resonant with qubit ``k mod n``, clipped into the window."""
    freqs = params.qubit_frequencies_ghz
    idx = np.arange(params.n_signals) % params.n_qubits
    lo, hi = params.omega_window_ghz
    return np.clip(freqs[idx], lo, hi)


@dataclass(frozen=True)
class Violation:
    channel: str  # "I", "Q", "J", "carrier", "shape"
    index: int  # tone or bond index (0-based)
    segment: int | None
    value: float
    bound: tuple

    def __str__(self):
        where = f"{self.channel}[{self.index}]"
        if self.segment is not None:
            where += f" segment {self.segment}"
        return f"{where}: {self.value:g} outside {self.bound}"


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "schedule valid"
        return "\n".join(str(v) for v in self.violations)


def validate(params: DeviceParams, sched: ControlSchedule, atol: float = 1e-12) -> ValidationReport:
    """Report every bound violation of ``sched`` under ``params``."""
    report = ValidationReport()
    out = report.violations
    s, n = params.n_signals, params.n_qubits
    if sched.i_mhz.shape[0] != s or sched.carriers_ghz.shape[0] != s:
        out.append(Violation("shape", 0, None, float(sched.i_mhz.shape[0]), (s, s)))
        return report
    if sched.j_ghz.shape[0] != n - 1:
        out.append(Violation("shape", 0, None, float(sched.j_ghz.shape[0]), (n - 1, n - 1)))
        return report

    a = params.iq_max_mhz
    for name, arr in (("I", sched.i_mhz), ("Q", sched.q_mhz)):
        for k, m in zip(*np.nonzero(np.abs(arr) > a + atol)):
            out.append(Violation(name, int(k), int(m), float(arr[k, m]), (-a, a)))
    jm = params.j_max_ghz
    bad = (sched.j_ghz < -atol) | (sched.j_ghz > jm + atol)
    for j, m in zip(*np.nonzero(bad)):
        out.append(Violation("J", int(j), int(m), float(sched.j_ghz[j, m]), (0.0, jm)))
    lo, hi = params.omega_window_ghz
    for k, f in enumerate(sched.carriers_ghz):
        if f < lo - atol or f > hi + atol:
            out.append(Violation("carrier", k, None, float(f), (lo, hi)))
    return report


# -- operators -----------------------------------------------------------------

class ChainOperators:
    """Cached operator basis for an ``n``-spin chain.

    Sparse 0/1 operators are stored as index pairs so projections of dense
    sensitivity matrices onto them are cheap gathers.
    """

    def __init__(self, n_qubits: int):
        self.n = n_qubits
        self.dim = 2 ** n_qubits
        idx = np.arange(self.dim)
        # bit value of qubit i in basis state idx (qubit 0 most significant)
        self.bits = np.array([(idx >> (n_qubits - 1 - i)) & 1 for i in range(n_qubits)])
        # sigma_plus_i = |0><1| on qubit i: rows with bit 0, cols with bit 1
        self.sp_rows, self.sp_cols = [], []
        for i in range(n_qubits):
            cols = idx[self.bits[i] == 1]
            self.sp_cols.append(cols)
            self.sp_rows.append(cols ^ (1 << (n_qubits - 1 - i)))
        # flip-flop |01><10| on bond (i, i+1): |up_i down_{i+1}><down_i up_{i+1}|
        self.ff_rows, self.ff_cols, self.zz = [], [], []
        for i in range(n_qubits - 1):
            mask = (self.bits[i] == 1) & (self.bits[i + 1] == 0)
            cols = idx[mask]
            rows = cols ^ (1 << (n_qubits - 1 - i)) ^ (1 << (n_qubits - 2 - i))
            self.ff_rows.append(rows)
            self.ff_cols.append(cols)
            self.zz.append(np.where(self.bits[i] == self.bits[i + 1], 1.0, -1.0))
        self.zz = np.array(self.zz).reshape(n_qubits - 1, self.dim)
        self.magnetization = (1 - 2 * self.bits).sum(axis=0)

    def sigma_plus(self, i: int) -> np.ndarray:
        out = np.zeros((self.dim, self.dim))
        out[self.sp_rows[i], self.sp_cols[i]] = 1.0
        return out

    def flip_flop(self, i: int) -> np.ndarray:
        out = np.zeros((self.dim, self.dim))
        out[self.ff_rows[i], self.ff_cols[i]] = 1.0
        return out


_OPS_CACHE: dict = {}


def chain_operators(n_qubits: int) -> ChainOperators:
    ops = _OPS_CACHE.get(n_qubits)
    if ops is None:
        ops = _OPS_CACHE[n_qubits] = ChainOperators(n_qubits)
    return ops


def segment_index(sched: ControlSchedule, times: np.ndarray) -> np.ndarray:
    dt = sched.segment_duration
    return np.minimum((np.asarray(times) / dt).astype(int), sched.n_segments - 1)


def drive_coefficients(params: DeviceParams, sched: ControlSchedule, times, seg,
                       rwa: bool = True, t_offset: float = 0.0) -> tuple:
    """Coefficients ``a_i(t)`` of ``sigma_plus_i`` in the rotating-frame drive.

    Returns ``(a, per_tone)`` where ``a`` has shape ``(N, n)`` and ``per_tone``
    is a dict of the per-tone factors needed for derivatives:
    ``phase_co`` = ``exp(i (w_k - 2 pi B_i) t)`` with shape ``(N, S, n)`` and,
    outside the RWA, ``phase_counter`` = ``exp(-i (w_k + 2 pi B_i) t)``.
    ``times`` are local to the schedule; ``t_offset`` shifts the clock.
    """
    alpha = 0.5 * params.drive_coupling * MHZ
    t_abs = np.asarray(times) + t_offset
    f = sched.carriers_ghz
    b = params.qubit_frequencies_ghz
    iq_co = alpha * (sched.i_mhz[:, seg] - 1j * sched.q_mhz[:, seg]).T  # (N, S)
    phase_co = np.exp(2j * np.pi * (f[None, :, None] - b[None, None, :]) * t_abs[:, None, None])
    a = np.einsum("ns,nsi->ni", iq_co, phase_co)
    extra = {"phase_co": phase_co, "iq_co": iq_co}
    if not rwa:
        iq_counter = alpha * (sched.i_mhz[:, seg] + 1j * sched.q_mhz[:, seg]).T
        phase_counter = np.exp(-2j * np.pi * (f[None, :, None] + b[None, None, :])
                               * t_abs[:, None, None])
        a = a + np.einsum("ns,nsi->ni", iq_counter, phase_counter)
        extra["phase_counter"] = phase_counter
        extra["iq_counter"] = iq_counter
    return a, extra


def exchange_phases(params: DeviceParams, times, t_offset: float = 0.0) -> np.ndarray:
    """``exp(i 2 pi (B_{i+1} - B_i) t)`` per bond, shape ``(N, n-1)``."""
    t_abs = np.asarray(times) + t_offset
    return np.exp(2j * np.pi * params.bond_detunings_ghz[None, :] * t_abs[:, None])


def assemble(ops: ChainOperators, drive: np.ndarray, j_vals: np.ndarray,
             ex_phase: np.ndarray) -> np.ndarray:
    """Dense Hamiltonians from coefficient arrays.

    ``drive``: ``(N, n)`` sigma_plus coefficients; ``j_vals``: ``(N, n-1)``;
    ``ex_phase``: ``(N, n-1)``.  Returns ``(N, d, d)`` complex.
    """
    n_t = drive.shape[0]
    h = np.zeros((n_t, ops.dim, ops.dim), dtype=complex)
    for i in range(ops.n):
        h[:, ops.sp_rows[i], ops.sp_cols[i]] += drive[:, i, None]
    for j in range(ops.n - 1):
        # -(J/4) [ZZ + 2 e^{i dB t} |ud><du| + h.c.]
        h[:, ops.ff_rows[j], ops.ff_cols[j]] += (-0.5 * j_vals[:, j] * ex_phase[:, j])[:, None]
    h = h + np.conj(np.swapaxes(h, 1, 2))
    if ops.n > 1:
        diag = -0.25 * j_vals @ ops.zz  # (N, d)
        idx = np.arange(ops.dim)
        h[:, idx, idx] += diag
    return h


def hamiltonians(params: DeviceParams, sched: ControlSchedule, times, rwa: bool = True,
                 t_offset: float = 0.0) -> np.ndarray:
    """Rotating-frame generators at the local ``times`` (vectorized)."""
    times = np.asarray(times, dtype=float)
    seg = segment_index(sched, times)
    ops = chain_operators(params.n_qubits)
    drive, _ = drive_coefficients(params, sched, times, seg, rwa, t_offset)
    j_vals = sched.j_ghz[:, seg].T
    ex = exchange_phases(params, times, t_offset)
    return assemble(ops, drive, j_vals, ex)


def rotating_frame_hamiltonian(params: DeviceParams, sched: ControlSchedule, t: float,
                               rwa: bool = True) -> np.ndarray:
    """Generator at time ``t`` in the frame of ``-(1/2) sum_i B_i sigma_z``.

    The drive ``g(t) = sum_k I_k cos(w_k t) + Q_k sin(w_k t)`` enters through
    ``drive_coupling * g(t) * sigma_x``; with ``rwa`` the sum-frequency terms
    (~56 GHz) are dropped.  Exchange contributes ``-(J/4) E_{i,i+1}(t)``.
    """
    if not 0 <= t < sched.total_time_ns:
        raise ValueError(f"t={t} outside [0, {sched.total_time_ns})")
    return hamiltonians(params, sched, np.array([t]), rwa)[0]


def lab_frame_hamiltonian(params: DeviceParams, sched: ControlSchedule, t: float) -> np.ndarray:
    """Lab-frame generator, including the Zeeman drift."""
    ops = chain_operators(params.n_qubits)
    seg = int(segment_index(sched, np.array([t]))[0])
    w = 2 * np.pi * sched.carriers_ghz
    g = np.sum(sched.i_mhz[:, seg] * np.cos(w * t) + sched.q_mhz[:, seg] * np.sin(w * t)) * MHZ
    h = np.zeros((ops.dim, ops.dim), dtype=complex)
    sz = 1.0 - 2.0 * ops.bits  # (n, d)
    h[np.diag_indices(ops.dim)] = -0.5 * params.qubit_frequencies_ghz @ sz
    for i in range(ops.n):
        sp = ops.sigma_plus(i)
        h += params.drive_coupling * g * (sp + sp.T)
    for j in range(ops.n - 1):
        ff = ops.flip_flop(j)
        h += -0.25 * sched.j_ghz[j, seg] * (np.diag(ops.zz[j]) + 2 * (ff + ff.T))
    return h


def drift_hamiltonian(params: DeviceParams) -> np.ndarray:
    ops = chain_operators(params.n_qubits)
    sz = 1.0 - 2.0 * ops.bits
    return np.diag(-0.5 * params.qubit_frequencies_ghz @ sz).astype(complex)


def random_schedule(params: DeviceParams, total_time_ns: float, n_segments: int,
                    rng: np.random.Generator, fraction: float = 1.0,
                    carrier_spread: float | None = None) -> ControlSchedule:
    """Uniformly random feasible schedule (amplitudes within ``fraction`` of each bound).

    Carriers are drawn within ``carrier_spread`` GHz of their default resonant
    placement, or anywhere in the window when ``carrier_spread`` is None.
    """
    s, n = params.n_signals, params.n_qubits
    a = params.iq_max_mhz * fraction
    i = rng.uniform(-a, a, (s, n_segments))
    q = rng.uniform(-a, a, (s, n_segments))
    j = rng.uniform(0.0, params.j_max_ghz * fraction, (n - 1, n_segments))
    lo, hi = params.omega_window_ghz
    if carrier_spread is None:
        f = rng.uniform(lo, hi, s)
    else:
        f = np.clip(default_carriers(params) + rng.uniform(-carrier_spread, carrier_spread, s),
                    lo, hi)
    return ControlSchedule(total_time_ns, i, q, j, f)


def as_ket(bits: str | Iterable[int]) -> np.ndarray:
    """Computational basis state from a bitstring such as ``"01"``."""
    bits = [int(b) for b in bits]
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int("".join(map(str, bits)), 2) if bits else 0] = 1.0
    return v
