"""Time evolution over piecewise-constant control schedules.

Every segment is cut into equal substeps.  Each substep is advanced with the
fourth-order Magnus integrator on the two Gauss-Legendre nodes: with
``H1 = H(t + (1/2 - sqrt3/6) h)`` and ``H2 = H(t + (1/2 + sqrt3/6) h)``,

    Heff = (H1 + H2) / 2 - i (sqrt3 / 12) (2 pi h) [H2, H1],
    U    = exp(-2 pi i h Heff),

and the exponential is taken exactly by Hermitian eigendecomposition.  The
rotating-frame generator oscillates at detunings up to ~1 GHz inside a
segment, so sub-segment stepping is required.

The analytic exchange unitaries of a single bond serve as independent
oracles for the integrator.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import device
from .device import MHZ, ControlSchedule, DeviceParams

GAUSS_OFFSET = np.sqrt(3.0) / 6.0
MAGNUS_BETA = np.sqrt(3.0) / 12.0
NORM_TOL = 1e-12
_CHUNK_NODES = 1 << 15


@dataclass
class PropagationResult:
    """Final state and optional per-segment propagators."""

    final_state: np.ndarray
    segment_propagators: np.ndarray | None
    substeps_per_segment: int


def phase_rate_bound(params: DeviceParams, sched: ControlSchedule, rwa: bool = True) -> float:
    """Upper estimate (GHz) of how fast the rotating-frame generator rotates.

    Sum of the largest carrier detuning, the largest bond detuning and
    norm bounds of the drive and exchange terms at the device limits.  It
    depends on the carriers but not on the amplitudes, so the substep count
    stays fixed while amplitudes are optimized.
    """
    b = params.qubit_frequencies_ghz
    f = sched.carriers_ghz
    rate = float(np.max(np.abs(f[:, None] - b[None, :]))) if f.size else 0.0
    if not rwa and f.size:
        rate = max(rate, float(np.max(np.abs(f[:, None] + b[None, :]))))
    if params.n_qubits > 1:
        rate += float(np.max(np.abs(params.bond_detunings_ghz)))
        rate += 0.75 * params.j_max_ghz * (params.n_qubits - 1)
    drive = params.drive_coupling * MHZ * np.sqrt(2.0) * params.iq_max_mhz * params.n_signals
    rate += drive * (1.0 if rwa else 2.0)
    return rate


def substep_count(params: DeviceParams, sched: ControlSchedule, rwa: bool = True,
                  max_phase: float = 0.03, min_substeps: int = 4) -> int:
    """Substeps per segment keeping the phase advance per substep below ``max_phase``."""
    dt = sched.segment_duration
    n = int(np.ceil(2 * np.pi * phase_rate_bound(params, sched, rwa) * dt / max_phase))
    return max(int(min_substeps), n)


def node_times(sched: ControlSchedule, n_sub: int) -> tuple:
    """Gauss nodes of every substep.

    Returns ``(t1, t2, h)`` where ``t1``, ``t2`` have shape ``(M, n_sub)``
    (local times) and ``h`` is the substep length.
    """
    dt = sched.segment_duration
    h = dt / n_sub
    starts = (np.arange(sched.n_segments)[:, None] * dt + np.arange(n_sub)[None, :] * h)
    return starts + (0.5 - GAUSS_OFFSET) * h, starts + (0.5 + GAUSS_OFFSET) * h, h


def magnus_generator(h1: np.ndarray, h2: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order Magnus effective generator for stacks of node Hamiltonians."""
    comm = h2 @ h1 - h1 @ h2
    return 0.5 * (h1 + h2) - 1j * MAGNUS_BETA * 2 * np.pi * h * comm


def expm_hermitian(heff: np.ndarray, h: float) -> tuple:
    """``exp(-2 pi i h Heff)`` by eigendecomposition; returns ``(U, evals, evecs)``."""
    evals, evecs = np.linalg.eigh(heff)
    phases = np.exp(-2j * np.pi * h * evals)
    u = (evecs * phases[..., None, :]) @ np.conj(np.swapaxes(evecs, -1, -2))
    return u, evals, evecs


def substep_propagators(params: DeviceParams, sched: ControlSchedule, n_sub: int,
                        rwa: bool = True, t_offset: float = 0.0) -> np.ndarray:
    """All substep unitaries, shape ``(M, n_sub, d, d)``."""
    t1, t2, h = node_times(sched, n_sub)
    d = params.dim
    out = np.empty((t1.size, d, d), dtype=complex)
    flat1, flat2 = t1.ravel(), t2.ravel()
    chunk = max(1, _CHUNK_NODES // (d * d))
    for lo in range(0, flat1.size, chunk):
        hi = min(lo + chunk, flat1.size)
        h1 = device.hamiltonians(params, sched, flat1[lo:hi], rwa, t_offset)
        h2 = device.hamiltonians(params, sched, flat2[lo:hi], rwa, t_offset)
        out[lo:hi] = expm_hermitian(magnus_generator(h1, h2, h), h)[0]
    return out.reshape(sched.n_segments, n_sub, d, d)


def _check_inputs(params: DeviceParams, sched: ControlSchedule, psi0: np.ndarray,
                  check_schedule: bool) -> np.ndarray:
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (params.dim,):
        raise ValueError(f"state has shape {psi0.shape}, expected ({params.dim},)")
    if abs(np.linalg.norm(psi0) - 1.0) > NORM_TOL:
        raise ValueError(f"initial state is not normalized (norm {np.linalg.norm(psi0):.15g})")
    if check_schedule:
        report = device.validate(params, sched)
        if not report.ok:
            raise ValueError(f"invalid schedule:\n{report}")
    return psi0


def propagate(params: DeviceParams, sched: ControlSchedule, psi0, *, rwa: bool = True,
              t_offset: float = 0.0, substeps: int | None = None,
              return_segment_propagators: bool = False, max_phase: float = 0.03,
              min_substeps: int = 4, check_schedule: bool = True) -> PropagationResult:
    """Evolve ``psi0`` through ``sched``.

    ``t_offset`` is the absolute time of the schedule start; all carrier and
    exchange phases are referenced to absolute time, so a schedule split at
    ``t_c`` and propagated in two parts with ``t_offset = t_c`` for the
    second reproduces the unsplit evolution.  ``substeps`` overrides the
    automatic substep policy.
    """
    psi0 = _check_inputs(params, sched, psi0, check_schedule)
    if sched.total_time_ns == 0:
        props = (np.broadcast_to(np.eye(params.dim, dtype=complex),
                                 (sched.n_segments, params.dim, params.dim)).copy()
                 if return_segment_propagators else None)
        return PropagationResult(psi0.copy(), props, 0)
    n_sub = substeps if substeps is not None else substep_count(
        params, sched, rwa, max_phase, min_substeps)
    steps = substep_propagators(params, sched, n_sub, rwa, t_offset)
    # multiply the substeps of all segments in parallel
    seg_u = steps[:, 0].copy()
    for k in range(1, n_sub):
        seg_u = steps[:, k] @ seg_u
    psi = psi0
    for m in range(sched.n_segments):
        psi = seg_u[m] @ psi
    return PropagationResult(psi, seg_u if return_segment_propagators else None, n_sub)


def evolve_states(params: DeviceParams, sched: ControlSchedule, states, **kw) -> np.ndarray:
    """Apply the schedule's propagator to each column of ``states``."""
    res = propagate(params, sched, device.as_ket("0" * params.n_qubits), **kw,
                    return_segment_propagators=True)
    u = np.eye(params.dim, dtype=complex)
    for m in range(sched.n_segments):
        u = res.segment_propagators[m] @ u
    return u @ np.asarray(states, dtype=complex)


# -- analytic single-bond exchange --------------------------------------------

def exchange_unitary_exact(j_ghz: float, db_ghz: float, t0: float, dt: float) -> np.ndarray:
    """Exact rotating-frame propagator of constant exchange on one bond.

    Basis ``|uu>, |ud>, |du>, |dd>`` (``|0> = up``); ``db_ghz`` is the
    splitting of the second spin minus the first; the exchange switches on
    at absolute time ``t0`` and stays on for ``dt``.  With h = 1 the
    closed-form phases ``x / hbar`` become ``2 pi x``.
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    jt = np.hypot(j_ghz, db_ghz)
    c = np.cos(np.pi * jt * dt)
    # sin(pi jt dt) / jt, finite as jt -> 0
    s_over = np.pi * dt * np.sinc(jt * dt)
    u = np.zeros((4, 4), dtype=complex)
    u[0, 0] = u[3, 3] = np.exp(2j * np.pi * j_ghz * dt / 4)
    p1 = np.exp(-2j * np.pi * (j_ghz / 4 - db_ghz / 2) * dt)
    p2 = np.exp(-2j * np.pi * (j_ghz / 4 + db_ghz / 2) * dt)
    u[1, 1] = (c - 1j * db_ghz * s_over) * p1
    u[2, 2] = (c + 1j * db_ghz * s_over) * p2
    u[1, 2] = 1j * j_ghz * s_over * np.exp(2j * np.pi * db_ghz * t0) * p1
    u[2, 1] = 1j * j_ghz * s_over * np.exp(-2j * np.pi * db_ghz * t0) * p2
    return u


def exchange_unitary_limit(j_ghz: float, db_ghz: float, t0: float, dt: float) -> np.ndarray:
    """Power-of-SWAP approximation of :func:`exchange_unitary_exact`.

    ``exp(i 2 pi Jt dt / 4) * P**alpha`` with ``alpha = 2 Jt dt`` and ``P``
    the phase-dressed SWAP on the ``|ud>, |du>`` block (eigenvalues +-1;
    the power uses ``(-1)**alpha = exp(-i pi alpha)``).  Exact at
    ``db = 0``; the error grows as ``O(db * dt)``.
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    jt = np.hypot(j_ghz, db_ghz)
    alpha = 2 * jt * dt
    phi = 2 * np.pi * db_ghz * t0
    minus = np.exp(-1j * np.pi * alpha)
    u = np.zeros((4, 4), dtype=complex)
    u[0, 0] = u[3, 3] = 1.0
    u[1, 1] = u[2, 2] = 0.5 * (1 + minus)
    u[1, 2] = 0.5 * (1 - minus) * np.exp(1j * phi)
    u[2, 1] = 0.5 * (1 - minus) * np.exp(-1j * phi)
    return np.exp(2j * np.pi * jt * dt / 4) * u


def rabi_pi_time(params: DeviceParams, n_tones: int = 1) -> float:
    """Resonant pi time (ns) of one qubit driven by ``n_tones`` tones at
    ``I = Q = iq_max`` under the RWA convention of the device model.

    Each tone contributes Rabi frequency ``2 * (c / 2) * sqrt2 * iq_max``
    (GHz, with ``c`` the drive coupling), so ``t_pi = 1 / (2 * that)``.
    """
    rabi = params.drive_coupling * np.sqrt(2.0) * params.iq_max_mhz * MHZ * n_tones
    return 1.0 / (2.0 * rabi)
