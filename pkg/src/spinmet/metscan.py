"""Minimal-evolution-time scans.

``scan_met`` optimizes the schedule at every duration of a grid (each run
warm-started from its neighbour) and reports the smallest duration whose
optimized cost gap reaches the threshold.  Because controls that are switched
off generate no evolution in the rotating frame, a target reached in time
``T`` is also reachable in any longer time by idling afterwards; the scan
therefore reports the running-minimum envelope of the gap over ascending
``T`` alongside the raw per-``T`` optimum.

``bond_distance_sweep`` chains warm starts across a series of molecular
Hamiltonians and ``parameter_sweep`` repeats a task over rescaled devices.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .costs import CostFunction, PauliSum
from .device import ControlSchedule, DeviceParams, as_ket
from .grape import OptimizationOutcome, OptimizerConfig, optimize


@dataclass
class MetScanConfig:
    """Grid and protocol of a MET scan.

    ``early_stop`` ends each optimization once the gap reaches the
    threshold; ``stop_when_passed`` (ascending scans) skips grid points
    above the first passing one, whose envelope is implied; ``refine``
    bisects the bracket down to ``refine_resolution``.
    """

    t_grid: list
    threshold: float = 1e-7
    n_segments: int = 10
    scan_direction: str = "ascending"
    warm_start: bool = True
    refine: bool = False
    refine_resolution: float = 0.1
    early_stop: bool = True
    stop_when_passed: bool = False

    def __post_init__(self):
        self.t_grid = [float(t) for t in self.t_grid]
        if not self.t_grid:
            raise ValueError("T grid must be nonempty")
        if any(b <= a for a, b in zip(self.t_grid, self.t_grid[1:])):
            raise ValueError("T grid must be strictly increasing")
        if self.t_grid[0] < 0:
            raise ValueError("durations must be non-negative")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if self.scan_direction not in ("ascending", "descending"):
            raise ValueError("scan_direction must be 'ascending' or 'descending'")
        if self.n_segments < 1:
            raise ValueError("n_segments must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "MetScanConfig":
        data = dict(data)
        if "t_grid" not in data and "t_range" in data:
            data["t_grid"] = time_grid(**data.pop("t_range"))
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scan keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def time_grid(t_min: float, t_max: float, points_per_decade: int = 64,
              include_zero: bool = True, linear_step: float | None = None) -> list:
    """Log-spaced grid (``points_per_decade``) or linear grid (``linear_step``)."""
    if linear_step is not None:
        grid = list(np.round(np.arange(t_min, t_max + 0.5 * linear_step, linear_step), 10))
    else:
        n = max(2, int(math.ceil(points_per_decade * math.log10(t_max / t_min))) + 1)
        grid = list(np.geomspace(t_min, t_max, n))
    grid = [float(t) for t in grid if t > 0]
    return ([0.0] if include_zero else []) + grid


@dataclass
class MetScanResult:
    """Per-duration records and the MET estimate.

    ``records`` rows: ``T``, ``cost``, ``delta`` (gap above the floor),
    ``envelope`` (running minimum over ascending T), ``passed``,
    ``converged``, ``restart`` (index of the winning start), ``iterations``
    and ``source`` (``"grid"``, ``"refine"`` or ``"implied"``).
    """

    records: list
    threshold: float
    met_estimate: float | None
    met_bracket: tuple
    outcomes: dict = field(default_factory=dict, repr=False)
    key: dict = field(default_factory=dict)

    @property
    def t_values(self) -> np.ndarray:
        return np.array([r["T"] for r in self.records])

    @property
    def deltas(self) -> np.ndarray:
        return np.array([r["delta"] for r in self.records])

    def schedule_at(self, t: float) -> ControlSchedule | None:
        out = self.outcomes.get(float(t))
        return out.best_schedule if out is not None else None

    def to_rows(self) -> list:
        rows = []
        for r in self.records:
            row = dict(self.key)
            row.update(r)
            rows.append(row)
        return rows

    def to_dict(self, include_schedules: bool = False) -> dict:
        out = {"key": dict(self.key), "threshold": self.threshold,
               "met_estimate": self.met_estimate, "met_bracket": list(self.met_bracket),
               "records": self.records}
        if include_schedules:
            out["schedules"] = {repr(t): o.best_schedule.to_dict()
                                for t, o in sorted(self.outcomes.items())}
        return out


def _record(t, outcome: OptimizationOutcome, cost: CostFunction, threshold, source) -> dict:
    delta = outcome.best_cost - cost.reference_floor
    return {"T": float(t), "cost": float(outcome.best_cost), "delta": float(delta),
            "passed": bool(delta <= threshold), "converged": bool(outcome.converged),
            "restart": int(outcome.restart_index_of_best),
            "iterations": int(outcome.n_iterations), "source": source}


def _grape_config(config: MetScanConfig, grape_config: OptimizerConfig | None,
                  cost: CostFunction) -> OptimizerConfig:
    grape_config = grape_config or OptimizerConfig()
    if config.early_stop and grape_config.target_cost is None:
        grape_config = OptimizerConfig(**{**grape_config.to_dict(),
                                          "target_cost": config.threshold})
    return grape_config


def _finalize(records: list, outcomes: dict, threshold: float, key: dict) -> MetScanResult:
    records.sort(key=lambda r: r["T"])
    env = np.inf
    for r in records:
        env = min(env, r["delta"])
        r["envelope"] = float(env)
    passing = [r["T"] for r in records if r["envelope"] <= threshold]
    met = passing[0] if passing else None
    if met is None:
        bracket = (records[-1]["T"], None)
    else:
        below = [r["T"] for r in records if r["T"] < met]
        bracket = (below[-1] if below else None, met)
    return MetScanResult(records, threshold, met, bracket, outcomes, dict(key))


def scan_met(params: DeviceParams, cost: CostFunction, psi0, config: MetScanConfig,
             grape_config: OptimizerConfig | None = None, warm_starts: dict | None = None,
             key: dict | None = None) -> MetScanResult:
    """Optimize at every grid duration and locate the MET.

    Each optimization starts from the neighbouring duration's optimum (when
    ``warm_start``) plus the configured random restarts.  ``warm_starts``
    maps durations to schedules from another chain (for example the
    previous bond distance); those take precedence.  A duration at which
    the optimizer fails to reach the threshold counts as failing.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    gcfg = _grape_config(config, grape_config, cost)
    grid = list(config.t_grid)
    order = grid if config.scan_direction == "ascending" else grid[::-1]
    records, outcomes = [], {}
    previous = None
    passed_at = None
    for t in order:
        if passed_at is not None and config.stop_when_passed and t > passed_at:
            continue
        init = "random"
        if warm_starts and warm_starts.get(t) is not None:
            init = warm_starts[t]
        elif config.warm_start and previous is not None and previous.total_time_ns > 0:
            init = [previous]
            if t > previous.total_time_ns:
                # idling is free: the shorter pulse followed by zeros, then the stretched pulse
                init = [previous.padded(t, config.n_segments), previous]
        outcome = optimize(params, cost, psi0, t, config.n_segments, init, gcfg)
        outcomes[t] = outcome
        rec = _record(t, outcome, cost, config.threshold, "grid")
        records.append(rec)
        previous = outcome.best_schedule
        if rec["passed"] and passed_at is None:
            passed_at = t
    if config.stop_when_passed and passed_at is not None:
        for t in grid:
            if t > passed_at:
                records.append({"T": t, "cost": math.nan, "delta": math.nan, "passed": True,
                                "converged": True, "restart": -1, "iterations": 0,
                                "source": "implied"})
    result = _finalize(records, outcomes, config.threshold, key or {})
    if config.refine and result.met_estimate is not None and result.met_bracket[0] is not None:
        result = _refine(params, cost, psi0, config, gcfg, result)
    return result


def _refine(params, cost, psi0, config, gcfg, result: MetScanResult) -> MetScanResult:
    lo, hi = result.met_bracket
    records = [r for r in result.records if r["source"] != "implied"]
    implied = [r for r in result.records if r["source"] == "implied"]
    outcomes = dict(result.outcomes)
    warm = outcomes[hi].best_schedule
    while hi - lo > config.refine_resolution:
        mid = 0.5 * (lo + hi)
        outcome = optimize(params, cost, psi0, mid, config.n_segments, warm, gcfg)
        outcomes[mid] = outcome
        rec = _record(mid, outcome, cost, config.threshold, "refine")
        records.append(rec)
        if rec["passed"]:
            hi, warm = mid, outcome.best_schedule
        else:
            lo = mid
    out = _finalize(records + implied, outcomes, config.threshold, result.key)
    # refinement narrows the bracket around the first passing grid point
    out.met_bracket = (lo, hi)
    out.met_estimate = hi
    return out


# -- molecular bond-distance protocol -----------------------------------------

def hf_state(pauli: PauliSum) -> np.ndarray:
    bits = pauli.hf_state
    if bits is None:
        raise ValueError("Hamiltonian lacks the 'hf_state' metadata needed as initial state")
    return as_ket(bits)


def _bond_chain(args) -> list:
    """Chain over bond distances at one fixed duration (top-level for pickling)."""
    params, series, t, config, gcfg = args
    out = []
    previous = None
    for pauli in series:
        cost = CostFunction.expectation(pauli)
        init = previous if (previous is not None and t > 0) else "random"
        outcome = optimize(params, cost, hf_state(pauli), t, config.n_segments, init, gcfg)
        out.append(outcome)
        previous = outcome.best_schedule
    return out


def bond_distance_sweep(params: DeviceParams, series: list, config: MetScanConfig,
                        grape_config: OptimizerConfig | None = None,
                        direction: str = "ascending", map_fn=map) -> list:
    """MET scan along a bond-distance series with chained warm starts.

    At every duration the optimizer moves bond by bond in ``direction``,
    starting each bond from the previous bond's optimum plus the random
    restarts.  Chains at different durations are independent and run
    through ``map_fn``.  Returns one :class:`MetScanResult` per Hamiltonian
    in the original series order.
    """
    if not series:
        raise ValueError("empty Hamiltonian series")
    for pos, pauli in enumerate(series):
        if pauli.hf_state is None:
            raise ValueError(f"series entry {pos} lacks the 'hf_state' metadata")
    if direction not in ("ascending", "descending"):
        raise ValueError("direction must be 'ascending' or 'descending'")
    idx = sorted(range(len(series)), key=lambda i: series[i].bond_distance or 0.0)
    if direction == "descending":
        idx = idx[::-1]
    ordered = [series[i] for i in idx]
    probe = CostFunction.expectation(ordered[0])
    gcfg = _grape_config(config, grape_config, probe)
    grid = list(config.t_grid)
    chains = list(map_fn(_bond_chain, [(params, ordered, t, config, gcfg) for t in grid]))
    results = [None] * len(series)
    for pos, i in enumerate(idx):
        pauli = series[i]
        cost = CostFunction.expectation(pauli)
        outcomes = {t: chains[k][pos] for k, t in enumerate(grid)}
        records = [_record(t, o, cost, config.threshold, "grid") for t, o in outcomes.items()]
        key = {"bond_distance_angstrom": pauli.bond_distance}
        results[i] = _finalize(records, outcomes, config.threshold, key)
    return results


def dissociation_table(series: list, results: list) -> list:
    """Rows ``(bond, T, cost, delta)``: the cost landscape versus bond distance per T."""
    rows = []
    for pauli, res in zip(series, results):
        for r in res.records:
            rows.append({"bond_distance_angstrom": pauli.bond_distance, "T": r["T"],
                         "cost": r["cost"], "delta": r["delta"]})
    return rows


# -- device-parameter sweeps ---------------------------------------------------

def _sweep_point(args):
    base, axis, factor, inner = args
    return inner(base.scaled(axis, factor))


def parameter_sweep(base: DeviceParams, axis: str, factors, inner, map_fn=map) -> list:
    """Run ``inner(params)`` on devices with one bound rescaled.

    ``axis`` is ``"iq_max"``, ``"j_max"`` or ``"delta_b"`` (all Zeeman
    offsets scaled jointly).  Returns ``[(factor, inner_result), ...]``;
    ``inner`` must be picklable when ``map_fn`` spawns processes.
    """
    factors = [float(f) for f in factors]
    if any(not f > 0 for f in factors):
        raise ValueError("sweep factors must be positive")
    if axis not in ("iq_max", "j_max", "delta_b"):
        raise ValueError(f"unknown sweep axis {axis!r}")
    results = list(map_fn(_sweep_point, [(base, axis, f, inner) for f in factors]))
    return list(zip(factors, results))


@dataclass
class MetTask:
    """Picklable MET-scan task for :func:`parameter_sweep`."""

    cost: CostFunction
    psi0: np.ndarray
    config: MetScanConfig
    grape_config: OptimizerConfig | None = None

    def __call__(self, params: DeviceParams) -> MetScanResult:
        return scan_met(params, self.cost, self.psi0, self.config, self.grape_config)


# -- output --------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def rows_to_csv(rows: list, columns: list | None = None) -> str:
    """Deterministic CSV text (floats printed with ``repr`` for round-tripping)."""
    if not rows:
        return ""
    if columns is None:
        columns = []
        for r in rows:
            for k in r:
                if k not in columns:
                    columns.append(k)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, rows: list, columns: list | None = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows, columns))
