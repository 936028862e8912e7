"""Gradient-based pulse optimization (GRAPE).

``cost_and_gradient`` differentiates the discretized evolution exactly: the
forward sweep stores the state before every Magnus substep, the adjoint sweep
carries ``lambda = C psi(T)`` backwards, and each substep's exponential is
differentiated through its eigendecomposition (Frechet derivative of the
matrix exponential).  Sensitivities with respect to the two Gauss-node
Hamiltonians are then projected onto the control operators, including the
explicit time dependence of the carrier phases.

``optimize`` runs bound-constrained L-BFGS-B (SciPy) on normalized variables
from several starts and keeps the best result.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import device
from .costs import CostFunction
from .device import MHZ, ControlSchedule, DeviceParams
from .propagation import (MAGNUS_BETA, _check_inputs, expm_hermitian, magnus_generator,
                          node_times, substep_count)


@dataclass
class ScheduleGradient:
    """Partial derivatives of the cost, shaped like the schedule's arrays."""

    i_mhz: np.ndarray
    q_mhz: np.ndarray
    j_ghz: np.ndarray
    carriers_ghz: np.ndarray

    def norm(self) -> float:
        return float(np.sqrt(sum(np.sum(a ** 2) for a in
                                 (self.i_mhz, self.q_mhz, self.j_ghz, self.carriers_ghz))))


def _segment_sum(values: np.ndarray, seg: np.ndarray, n_segments: int) -> np.ndarray:
    """``2 Re`` of per-node contributions summed per segment; ``values`` is ``(N, K)``."""
    out = np.empty((values.shape[1], n_segments))
    for k in range(values.shape[1]):
        out[k] = np.bincount(seg, weights=2 * values[:, k].real, minlength=n_segments)
    return out


def cost_and_gradient(params: DeviceParams, sched: ControlSchedule, cost: CostFunction,
                      psi0, *, rwa: bool = True, t_offset: float = 0.0,
                      substeps: int | None = None, max_phase: float = 0.03,
                      check_schedule: bool = True) -> tuple:
    """Cost of the evolved state and its exact gradient.

    Returns ``(value, ScheduleGradient)``.  Derivatives are those of the
    discretized propagator at the substep count in use (``substeps`` fixes
    it; otherwise the propagation policy chooses it from the carriers).
    """
    psi0 = _check_inputs(params, sched, psi0, check_schedule)
    zero = ScheduleGradient(np.zeros_like(sched.i_mhz), np.zeros_like(sched.q_mhz),
                            np.zeros_like(sched.j_ghz), np.zeros_like(sched.carriers_ghz))
    if sched.total_time_ns == 0:
        return cost.evaluate(psi0), zero
    n_sub = substeps if substeps is not None else substep_count(params, sched, rwa, max_phase)
    m_seg = sched.n_segments
    t1, t2, h = node_times(sched, n_sub)
    n_steps = t1.size
    seg = np.repeat(np.arange(m_seg), n_sub)
    times = np.concatenate([t1.ravel(), t2.ravel()])
    seg2 = np.concatenate([seg, seg])

    ops = device.chain_operators(params.n_qubits)
    drive, extra = device.drive_coefficients(params, sched, times, seg2, rwa, t_offset)
    j_vals = sched.j_ghz[:, seg2].T
    ex = device.exchange_phases(params, times, t_offset)
    ham = device.assemble(ops, drive, j_vals, ex)
    h1, h2 = ham[:n_steps], ham[n_steps:]
    u, evals, evecs = expm_hermitian(magnus_generator(h1, h2, h), h)

    # forward and adjoint sweeps
    psis = np.empty((n_steps + 1, params.dim), dtype=complex)
    psis[0] = psi0
    for s in range(n_steps):
        psis[s + 1] = u[s] @ psis[s]
    value = cost.evaluate(psis[-1])
    lams = np.empty((n_steps, params.dim), dtype=complex)
    lam = cost.apply(psis[-1])
    u_dag = np.conj(np.swapaxes(u, 1, 2))
    for s in range(n_steps - 1, -1, -1):
        lams[s] = lam
        lam = u_dag[s] @ lam

    # <lam_s| dU_s |psi_s> = sum_kl Gamma_kl dX_kl with X = -2 pi i h Heff
    v_dag = np.conj(np.swapaxes(evecs, 1, 2))
    lt = np.einsum("sij,sj->si", v_dag, lams)
    pt = np.einsum("sij,sj->si", v_dag, psis[:-1])
    phase = np.exp(-2j * np.pi * h * evals)
    y = -2 * np.pi * h * (evals[:, :, None] - evals[:, None, :])
    frechet = phase[:, None, :] * (-2j * np.pi * h) * np.exp(0.5j * y) * np.sinc(y / (2 * np.pi))
    k_mat = np.conj(lt)[:, :, None] * frechet * pt[:, None, :]
    gamma = np.conj(evecs) @ k_mat @ np.swapaxes(evecs, 1, 2)
    # chain rule through the Magnus commutator to the node Hamiltonians
    beta = MAGNUS_BETA * 2 * np.pi * h
    h1t, h2t = np.swapaxes(h1, 1, 2), np.swapaxes(h2, 1, 2)
    s1 = 0.5 * gamma - 1j * beta * (h2t @ gamma - gamma @ h2t)
    s2 = 0.5 * gamma - 1j * beta * (gamma @ h1t - h1t @ gamma)
    sens = np.concatenate([s1, s2])

    # projections onto the drive operators sigma_+ and sigma_-
    n = params.n_qubits
    p_plus = np.stack([sens[:, ops.sp_rows[i], ops.sp_cols[i]].sum(-1) for i in range(n)], 1)
    p_minus = np.stack([sens[:, ops.sp_cols[i], ops.sp_rows[i]].sum(-1) for i in range(n)], 1)
    alpha = 0.5 * params.drive_coupling * MHZ
    t_abs = times + t_offset
    pc = extra["phase_co"]
    a_co = np.einsum("nsi,ni->ns", pc, p_plus)
    b_co = np.einsum("nsi,ni->ns", np.conj(pc), p_minus)
    iq = extra["iq_co"]
    g_i = alpha * (a_co + b_co)
    g_q = -1j * alpha * (a_co - b_co)
    g_f = 2j * np.pi * t_abs[:, None] * (iq * a_co - np.conj(iq) * b_co)
    if not rwa:
        pk = extra["phase_counter"]
        a_k = np.einsum("nsi,ni->ns", pk, p_plus)
        b_k = np.einsum("nsi,ni->ns", np.conj(pk), p_minus)
        iqk = extra["iq_counter"]
        g_i = g_i + alpha * (a_k + b_k)
        g_q = g_q + 1j * alpha * (a_k - b_k)
        g_f = g_f - 2j * np.pi * t_abs[:, None] * (iqk * a_k - np.conj(iqk) * b_k)

    grad_i = _segment_sum(g_i, seg2, m_seg)
    grad_q = _segment_sum(g_q, seg2, m_seg)
    grad_f = 2 * g_f.real.sum(axis=0)
    grad_j = np.zeros_like(sched.j_ghz)
    if n > 1:
        diag = np.einsum("nkk->nk", sens)
        g_j = np.stack([
            -0.5 * (ex[:, j] * sens[:, ops.ff_rows[j], ops.ff_cols[j]].sum(-1)
                    + np.conj(ex[:, j]) * sens[:, ops.ff_cols[j], ops.ff_rows[j]].sum(-1))
            - 0.25 * diag @ ops.zz[j]
            for j in range(n - 1)], 1)
        grad_j = _segment_sum(g_j, seg2, m_seg)
    return value, ScheduleGradient(grad_i, grad_q, grad_j, grad_f)


# -- optimizer -----------------------------------------------------------------

@dataclass
class OptimizerConfig:
    """Settings of the multi-start L-BFGS-B optimizer.

    ``target_cost`` stops a run as soon as ``cost - floor`` drops to it (and
    skips the remaining starts).  ``carrier_mode`` is ``"optimize"``
    (carriers are free parameters), ``"fixed"`` (keep the starting
    carriers) or ``"grid"`` (freeze them on a uniform grid across the
    window).  Random starts draw amplitudes within ``init_fraction`` of each
    bound and carriers within ``carrier_jitter`` times
    ``max(offset span, 2 iq_max)`` of resonance.
    """

    max_iterations: int = 2000
    gradient_norm_tol: float = 1e-9
    relative_cost_tol: float = 1e-13
    n_random_restarts: int = 2
    seed: int = 0
    lbfgs_memory: int = 20
    max_line_search: int = 40
    target_cost: float | None = None
    optimize_iq: bool = True
    optimize_j: bool = True
    carrier_mode: str = "optimize"
    init_fraction: float = 0.25
    carrier_jitter: float = 0.02
    max_phase: float = 0.03
    rwa: bool = True

    def __post_init__(self):
        if not (self.gradient_norm_tol > 0 and self.relative_cost_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.n_random_restarts < 0:
            raise ValueError("n_random_restarts must be >= 0")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.carrier_mode not in ("optimize", "fixed", "grid"):
            raise ValueError(f"unknown carrier_mode {self.carrier_mode!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "OptimizerConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown optimizer keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class OptimizationOutcome:
    best_schedule: ControlSchedule
    best_cost: float
    cost_history: list
    gradient_norm_final: float
    restart_index_of_best: int
    converged: bool
    n_iterations: int = 0
    n_evaluations: int = 0
    start_costs: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "best_schedule": self.best_schedule.to_dict(),
            "best_cost": self.best_cost,
            "cost_history": list(self.cost_history),
            "gradient_norm_final": self.gradient_norm_final,
            "restart_index_of_best": self.restart_index_of_best,
            "converged": self.converged,
            "n_iterations": self.n_iterations,
            "n_evaluations": self.n_evaluations,
            "start_costs": list(self.start_costs),
        }


class _Packer:
    """Maps schedules to normalized optimizer variables and back."""

    def __init__(self, params: DeviceParams, template: ControlSchedule, config: OptimizerConfig):
        self.params = params
        self.template = template
        self.iq = config.optimize_iq
        self.j = config.optimize_j and params.n_qubits > 1 and params.j_max_ghz > 0
        self.carriers = config.carrier_mode == "optimize"
        # one unit of a carrier variable is one full turn of phase over the pulse,
        # which keeps carrier and amplitude variables similarly conditioned
        lo, hi = params.omega_window_ghz
        self.mid = 0.5 * (lo + hi)
        self.f_scale = 1.0 / template.total_time_ns
        self.f_bounds = ((lo - self.mid) / self.f_scale, (hi - self.mid) / self.f_scale)

    def pack(self, sched: ControlSchedule) -> np.ndarray:
        parts = []
        if self.iq:
            parts += [sched.i_mhz.ravel() / self.params.iq_max_mhz,
                      sched.q_mhz.ravel() / self.params.iq_max_mhz]
        if self.j:
            parts.append(sched.j_ghz.ravel() / self.params.j_max_ghz)
        if self.carriers:
            parts.append((sched.carriers_ghz - self.mid) / self.f_scale)
        return np.concatenate(parts) if parts else np.zeros(0)

    def bounds(self) -> list:
        t = self.template
        b = []
        if self.iq:
            b += [(-1.0, 1.0)] * (2 * t.i_mhz.size)
        if self.j:
            b += [(0.0, 1.0)] * t.j_ghz.size
        if self.carriers:
            b += [self.f_bounds] * t.carriers_ghz.size
        return b

    def unpack(self, x: np.ndarray, base: ControlSchedule) -> ControlSchedule:
        out = base.copy()
        pos = 0
        if self.iq:
            k = base.i_mhz.size
            out.i_mhz = x[pos:pos + k].reshape(base.i_mhz.shape) * self.params.iq_max_mhz
            out.q_mhz = x[pos + k:pos + 2 * k].reshape(base.q_mhz.shape) * self.params.iq_max_mhz
            pos += 2 * k
        if self.j:
            k = base.j_ghz.size
            out.j_ghz = x[pos:pos + k].reshape(base.j_ghz.shape) * self.params.j_max_ghz
            pos += k
        if self.carriers:
            out.carriers_ghz = self.mid + self.f_scale * x[pos:pos + base.carriers_ghz.size]
        return out

    def pack_gradient(self, g: ScheduleGradient) -> np.ndarray:
        parts = []
        if self.iq:
            parts += [g.i_mhz.ravel() * self.params.iq_max_mhz,
                      g.q_mhz.ravel() * self.params.iq_max_mhz]
        if self.j:
            parts.append(g.j_ghz.ravel() * self.params.j_max_ghz)
        if self.carriers:
            parts.append(g.carriers_ghz * self.f_scale)
        return np.concatenate(parts) if parts else np.zeros(0)


class _TargetReached(Exception):
    pass


def random_start(params: DeviceParams, total_time: float, n_segments: int,
                 rng: np.random.Generator, config: OptimizerConfig,
                 carriers: np.ndarray | None = None) -> ControlSchedule:
    """Feasible random start: amplitudes within ``init_fraction`` of the bounds."""
    spread = config.carrier_jitter * max(
        np.ptp(params.zeeman_offsets_mhz) * MHZ, 2 * params.iq_max_mhz * MHZ)
    sched = device.random_schedule(params, total_time, n_segments, rng,
                                   fraction=config.init_fraction, carrier_spread=spread)
    if carriers is not None:
        sched.carriers_ghz = np.array(carriers, dtype=float)
    return sched


def grid_carriers(params: DeviceParams) -> np.ndarray:
    lo, hi = params.omega_window_ghz
    s = params.n_signals
    return np.full(1, 0.5 * (lo + hi)) if s == 1 else np.linspace(lo, hi, s)


def initial_schedules(params: DeviceParams, total_time: float, n_segments: int, init,
                      config: OptimizerConfig) -> list:
    """Deterministic list of starting schedules for ``optimize``."""
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_random_restarts + 1)
    fixed = grid_carriers(params) if config.carrier_mode == "grid" else None
    starts = []
    if isinstance(init, ControlSchedule):
        init = [init]
    if isinstance(init, (list, tuple)):
        for warm in init:
            starts.append(warm.resampled(n_segments).with_time(total_time))
    elif init == "zero":
        starts.append(ControlSchedule.zeros(params, total_time, n_segments, fixed))
    elif init == "random":
        starts.append(random_start(params, total_time, n_segments,
                                   np.random.default_rng(seeds[0]), config, fixed))
    elif init is not None:
        raise ValueError(f"unknown init {init!r}")
    for k in range(config.n_random_restarts):
        starts.append(random_start(params, total_time, n_segments,
                                   np.random.default_rng(seeds[k + 1]), config, fixed))
    if fixed is not None:
        for s in starts:
            s.carriers_ghz = fixed.copy()
    return starts


def optimize(params: DeviceParams, cost: CostFunction, psi0, total_time: float,
             n_segments: int, init="random", config: OptimizerConfig | None = None
             ) -> OptimizationOutcome:
    """Minimize the cost of ``psi0`` evolved for ``total_time`` over schedules.

    ``init`` is ``"zero"``, ``"random"``, a warm-start :class:`ControlSchedule`
    or a list of them (each resampled onto ``n_segments`` by nearest segment
    and stretched to ``total_time``) or ``None`` (random restarts only).  ``config.n_random_restarts`` random starts follow.  The
    best evaluated point over all starts is returned; every evaluated point
    lies inside the box bounds.
    """
    config = config or OptimizerConfig()
    psi0 = np.asarray(psi0, dtype=complex)
    if total_time == 0:
        sched = ControlSchedule.zeros(params, 0.0, n_segments)
        c0 = cost.evaluate(psi0)
        done = config.target_cost is not None and c0 - cost.reference_floor <= config.target_cost
        return OptimizationOutcome(sched, c0, [c0], 0.0, 0, bool(done), 0, 1, [c0])
    if total_time < 0:
        raise ValueError("total time must be non-negative")

    starts = initial_schedules(params, total_time, n_segments, init, config)
    if not starts:
        raise ValueError("no starting schedule: pass init or n_random_restarts > 0")
    best = None
    start_costs = []
    total_iter = total_eval = 0
    for index, start in enumerate(starts):
        packer = _Packer(params, start, config)
        state = {"best_cost": np.inf, "best_x": None, "best_grad": 0.0, "evals": 0}
        history = []

        def fun(x, packer=packer, start=start, state=state):
            sched = packer.unpack(x, start)
            value, grad = cost_and_gradient(params, sched, cost, psi0, rwa=config.rwa,
                                            max_phase=config.max_phase, check_schedule=False)
            g = packer.pack_gradient(grad)
            state["evals"] += 1
            if value < state["best_cost"]:
                state.update(best_cost=value, best_x=x.copy(), best_grad=float(np.linalg.norm(g)))
            if (config.target_cost is not None
                    and value - cost.reference_floor <= config.target_cost):
                raise _TargetReached
            return value, g

        x0 = np.clip(packer.pack(start), *np.array(packer.bounds()).T) \
            if packer.bounds() else packer.pack(start)
        reached = False
        n_iter = 0
        if x0.size == 0:
            value = cost.evaluate(_final_state(params, start, psi0, config))
            state.update(best_cost=value, best_x=x0)
            history.append(value)
            reached = (config.target_cost is not None
                       and value - cost.reference_floor <= config.target_cost)
            ok = True
        else:
            try:
                res = minimize(
                    fun, x0, jac=True, method="L-BFGS-B", bounds=packer.bounds(),
                    callback=lambda xk, *a: history.append(state["best_cost"]),
                    options={"maxiter": config.max_iterations, "maxcor": config.lbfgs_memory,
                             "gtol": config.gradient_norm_tol, "ftol": config.relative_cost_tol,
                             "maxls": config.max_line_search, "maxfun": 20 * max(
                                 config.max_iterations, 1)})
                ok = bool(res.success)
                n_iter = int(res.nit)
            except _TargetReached:
                reached = True
                ok = True
                n_iter = len(history)
                history.append(state["best_cost"])
        total_iter += n_iter
        total_eval += state["evals"]
        start_costs.append(state["best_cost"])
        if not history or history[-1] != state["best_cost"]:
            history.append(state["best_cost"])
        history = list(np.minimum.accumulate(history))
        sched = packer.unpack(state["best_x"], start)
        converged = reached or (ok and config.target_cost is None)
        outcome = OptimizationOutcome(sched, state["best_cost"], history, state["best_grad"],
                                      index, converged)
        if best is None or outcome.best_cost < best.best_cost:
            best = outcome
        if reached:
            break
    best.n_iterations = total_iter
    best.n_evaluations = total_eval
    best.start_costs = start_costs
    if config.target_cost is not None:
        best.converged = best.best_cost - cost.reference_floor <= config.target_cost
    return best


def _final_state(params, sched, psi0, config):
    from .propagation import propagate
    return propagate(params, sched, psi0, rwa=config.rwa, max_phase=config.max_phase,
                     check_schedule=False).final_state


def recompute_cost(params: DeviceParams, outcome: OptimizationOutcome, cost: CostFunction,
                   psi0, config: OptimizerConfig | None = None) -> float:
    """Cost of ``outcome.best_schedule`` from a fresh propagation."""
    config = config or OptimizerConfig()
    if outcome.best_schedule.total_time_ns == 0:
        return cost.evaluate(psi0)
    return cost.evaluate(_final_state(params, outcome.best_schedule, psi0, config))


__all__ = ["ScheduleGradient", "cost_and_gradient", "OptimizerConfig", "OptimizationOutcome",
           "optimize", "initial_schedules", "random_start", "recompute_cost"]
