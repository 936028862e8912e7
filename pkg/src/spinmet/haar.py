"""Haar-random state-pair campaigns and empirical MET distributions.

Pairs of Haar-random states are connected by optimized pulses at a descending
grid of durations (each duration warm-started from the previous one).  The
empirical cumulative distribution ``P(MET <= T)`` is the fraction of pairs
whose infidelity falls below the threshold at some grid duration ``<= T``.
Bootstrap resampling of pairs provides variances and confidence bands.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .costs import CostFunction
from .device import DeviceParams
from .grape import OptimizerConfig, optimize


# -- sampling ------------------------------------------------------------------

@dataclass
class StatePairSample:
    """Independent Haar-random pairs ``(psi0, phi)``; arrays of shape ``(n_pairs, d)``."""

    psi0: np.ndarray
    phi: np.ndarray
    n_qubits: int
    seed: int

    @property
    def n_pairs(self) -> int:
        return self.psi0.shape[0]

    @property
    def dim(self) -> int:
        return self.psi0.shape[1]

    def overlaps(self) -> np.ndarray:
        """``|<psi0|phi>|`` per pair."""
        return np.abs(np.einsum("pi,pi->p", np.conj(self.psi0), self.phi))

    def pairs(self):
        return list(zip(self.psi0, self.phi))

    def subset(self, index) -> "StatePairSample":
        return StatePairSample(self.psi0[index], self.phi[index], self.n_qubits, self.seed)


def haar_states(dim: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Normalized complex-Gaussian vectors (Haar-distributed pure states)."""
    z = rng.normal(size=(n, dim)) + 1j * rng.normal(size=(n, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def sample_pairs(n_qubits: int, n_pairs: int, seed: int) -> StatePairSample:
    """Deterministic sample of independent Haar-random state pairs."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    rng = np.random.default_rng(seed)
    d = 2 ** n_qubits
    states = haar_states(d, 2 * n_pairs, rng)
    return StatePairSample(states[:n_pairs], states[n_pairs:], n_qubits, seed)


def appendix_overlap_density(o, d: int) -> np.ndarray:
    """Initial-overlap density ``2 (1 - o^2)^(d-2) / B(d-1, 1/2)`` as printed.

    This is the law of the first coordinate of a uniform vector on the real
    ``(2d-2)``-sphere; for genuine Haar pairs see :func:`haar_overlap_cdf`.
    """
    o = np.asarray(o, dtype=float)
    from scipy.special import beta
    return 2 * (1 - o ** 2) ** (d - 2) / beta(d - 1, 0.5)


def appendix_overlap_cdf(o, d: int) -> np.ndarray:
    """CDF of :func:`appendix_overlap_density` (``o^2 ~ Beta(1/2, d-1)``)."""
    return stats.beta(0.5, d - 1).cdf(np.asarray(o, dtype=float) ** 2)


def haar_overlap_cdf(o, d: int) -> np.ndarray:
    """Exact CDF of ``|<psi|phi>|`` for independent Haar states: ``1 - (1 - o^2)^(d-1)``."""
    o = np.clip(np.asarray(o, dtype=float), 0.0, 1.0)
    return 1.0 - (1.0 - o ** 2) ** (d - 1)


def haar_geodesic_cdf(t, v: float, d: int) -> np.ndarray:
    """MET distribution of Haar pairs under an exactly homogeneous, isotropic speed ``v``.

    With ``MET = (2/v) arccos|<psi|phi>|`` this is ``sin(vT/2)^(2d-2)``
    on ``0 <= T <= pi/v``.
    """
    x = np.clip(0.5 * v * np.asarray(t, dtype=float), 0.0, 0.5 * np.pi)
    return np.sin(x) ** (2 * d - 2)


# KS critical values: asymptotic c(alpha) / sqrt(n) with the Stephens finite-size
# correction c / (sqrt(n) + 0.12 + 0.11 / sqrt(n)).
_KS_C = {0.01: 1.628, 0.05: 1.358}
KS_CRITICAL = {(n, a): c / (math.sqrt(n) + 0.12 + 0.11 / math.sqrt(n))
               for n in (64, 1024) for a, c in _KS_C.items()}


def ks_critical_value(n: int, alpha: float = 0.01) -> float:
    if (n, alpha) in KS_CRITICAL:
        return KS_CRITICAL[(n, alpha)]
    if alpha not in _KS_C:
        raise ValueError("alpha must be 0.01 or 0.05")
    return _KS_C[alpha] / (math.sqrt(n) + 0.12 + 0.11 / math.sqrt(n))


def ks_statistic(samples, cdf) -> float:
    """One-sample Kolmogorov-Smirnov distance to a continuous ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    f = cdf(x)
    return float(max(np.max(np.arange(1, n + 1) / n - f), np.max(f - np.arange(n) / n)))


# -- campaigns -----------------------------------------------------------------

@dataclass
class CdfEstimate:
    """Empirical MET distribution of a pair campaign.

    ``infidelities`` is ``(n_pairs, n_T)`` with NaN where a duration was not
    optimized (chain stopped early); ``pair_mets`` is the smallest passing
    grid duration per pair (``inf`` if none).  Bootstrap fields are filled
    by :func:`bootstrap_cdf`.
    """

    t_grid: np.ndarray
    pair_mets: np.ndarray
    threshold: float
    infidelities: np.ndarray | None = None
    excluded: list = field(default_factory=list)
    variances: np.ndarray | None = None
    ci_low: np.ndarray | None = None
    ci_high: np.ndarray | None = None
    n_resamples: int | None = None
    confidence: float | None = None
    bootstrap_seed: int | None = None

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        self.pair_mets = np.asarray(self.pair_mets, dtype=float)
        if np.any(np.diff(self.t_grid) <= 0):
            raise ValueError("t_grid must be strictly increasing")

    @classmethod
    def from_mets(cls, t_grid, mets, threshold: float = 1e-7) -> "CdfEstimate":
        """Estimate from known per-pair METs (synthetic data, tests)."""
        t_grid = np.asarray(t_grid, dtype=float)
        mets = np.asarray(mets, dtype=float)
        # snap each MET up to the grid (pass/fail is only known at grid points)
        idx = np.searchsorted(t_grid, mets, side="left")
        snapped = np.where(idx < t_grid.size, t_grid[np.minimum(idx, t_grid.size - 1)], np.inf)
        return cls(t_grid, snapped, threshold)

    @property
    def n_pairs(self) -> int:
        return self.pair_mets.size

    @property
    def passes(self) -> np.ndarray:
        """``(n_pairs, n_T)`` indicator of ``MET <= T`` (monotone in T by construction)."""
        return self.pair_mets[:, None] <= self.t_grid[None, :]

    @property
    def cdf_values(self) -> np.ndarray:
        return self.passes.mean(axis=0)

    @property
    def max_met(self) -> float:
        """Largest per-pair MET (``inf`` if some pair never passed)."""
        return float(self.pair_mets.max()) if self.n_pairs else math.nan

    def pair_brackets(self) -> list:
        """``(largest failing grid T, smallest passing grid T)`` per pair."""
        out = []
        for met in self.pair_mets:
            below = self.t_grid[self.t_grid < met]
            lo = float(below[-1]) if below.size else None
            out.append((lo, float(met) if np.isfinite(met) else None))
        return out

    def to_rows(self) -> list:
        rows = []
        cdf = self.cdf_values
        for k, t in enumerate(self.t_grid):
            row = {"T": float(t), "cdf": float(cdf[k])}
            if self.variances is not None:
                row.update(variance=float(self.variances[k]), ci_low=float(self.ci_low[k]),
                           ci_high=float(self.ci_high[k]))
            rows.append(row)
        return rows

    def pair_rows(self) -> list:
        rows = []
        for p in range(self.n_pairs):
            for k, t in enumerate(self.t_grid):
                val = math.nan if self.infidelities is None else float(self.infidelities[p, k])
                rows.append({"pair": p, "T": float(t), "infidelity": val,
                             "passed": bool(self.pair_mets[p] <= t)})
        return rows

    def to_dict(self) -> dict:
        out = {"t_grid": self.t_grid.tolist(), "pair_mets": [
            None if not np.isfinite(m) else float(m) for m in self.pair_mets],
            "threshold": self.threshold, "cdf": self.cdf_values.tolist(),
            "excluded": list(self.excluded)}
        if self.variances is not None:
            out.update(variances=self.variances.tolist(), ci_low=self.ci_low.tolist(),
                       ci_high=self.ci_high.tolist(), n_resamples=self.n_resamples,
                       confidence=self.confidence, bootstrap_seed=self.bootstrap_seed)
        return out


@dataclass
class _PairTask:
    params: DeviceParams
    psi0: np.ndarray
    phi: np.ndarray
    t_desc: list
    n_segments: int
    threshold: float
    config: OptimizerConfig
    stop_after_failures: int | None


def run_pair_chain(task: _PairTask) -> dict:
    """Descending-T chain for one pair; returns ``{T: infidelity}`` or an error."""
    cost = CostFunction.infidelity(task.phi)
    cfg = OptimizerConfig(**{**task.config.to_dict(), "target_cost": task.threshold})
    out = {}
    previous = None
    failures = 0
    try:
        for t in task.t_desc:
            if t == 0:
                out[t] = cost.evaluate(task.psi0)
                continue
            init = previous if previous is not None else "random"
            outcome = optimize(task.params, cost, task.psi0, t, task.n_segments, init, cfg)
            out[t] = outcome.best_cost
            previous = outcome.best_schedule
            if outcome.best_cost <= task.threshold:
                failures = 0
            else:
                failures += 1
                if task.stop_after_failures is not None and failures >= task.stop_after_failures:
                    break
    except (ValueError, np.linalg.LinAlgError) as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}
    return {"infidelities": out}


def estimate_cdf(sample: StatePairSample, params: DeviceParams, t_grid, n_segments: int = 40,
                 threshold: float = 1e-7, grape_config: OptimizerConfig | None = None,
                 stop_after_failures: int | None = None, map_fn=map) -> CdfEstimate:
    """Run the descending-T warm-start chain for every pair and build the CDF.

    ``t_grid`` may be given in any order; the chain runs from the largest
    duration down.  A pair passing at ``T`` counts as passing at every
    larger grid duration.  With ``stop_after_failures = k`` a chain ends
    after ``k`` consecutive failing durations (smaller ones count as
    failing).  Pairs whose optimization raises are excluded with a notice.
    """
    grape_config = grape_config or OptimizerConfig()
    t_asc = np.unique(np.asarray(t_grid, dtype=float))
    t_desc = [float(t) for t in t_asc[::-1]]
    tasks = [_PairTask(params, p0, ph, t_desc, n_segments, threshold,
                       OptimizerConfig(**{**grape_config.to_dict(),
                                          "seed": grape_config.seed + 7919 * k}),
                       stop_after_failures)
             for k, (p0, ph) in enumerate(sample.pairs())]
    results = list(map_fn(run_pair_chain, tasks))
    infid = np.full((sample.n_pairs, t_asc.size), np.nan)
    mets = np.full(sample.n_pairs, np.inf)
    excluded = []
    keep = []
    for p, res in enumerate(results):
        if "error" in res:
            excluded.append({"pair": p, "error": res["error"]})
            warnings.warn(f"pair {p} excluded: {res['error']}", RuntimeWarning, stacklevel=2)
            continue
        keep.append(p)
        for k, t in enumerate(t_asc):
            val = res["infidelities"].get(float(t))
            if val is not None:
                infid[p, k] = val
        passing = t_asc[infid[p] <= threshold]
        if passing.size:
            mets[p] = passing[0]
    keep = np.array(keep, dtype=int)
    return CdfEstimate(t_asc, mets[keep], threshold, infid[keep], excluded)


def bootstrap_cdf(estimate: CdfEstimate, n_resamples: int = 100_000, confidence: float = 0.9999,
                  seed: int = 0, chunk: int = 10_000) -> CdfEstimate:
    """Resample pairs with replacement; fill variances and percentile CI bands.

    Variances are floored at ``1 / n_pairs^2`` (the resolution of the
    empirical CDF).  Deterministic given ``seed``.
    """
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    n = estimate.n_pairs
    if n == 0:
        raise ValueError("no pairs to resample")
    passes = estimate.passes.astype(float)
    rng = np.random.default_rng(seed)
    draws = np.empty((n_resamples, estimate.t_grid.size))
    for lo in range(0, n_resamples, chunk):
        hi = min(lo + chunk, n_resamples)
        counts = rng.multinomial(n, np.full(n, 1.0 / n), size=hi - lo)
        draws[lo:hi] = counts @ passes / n
    alpha = 1.0 - confidence
    low, high = np.quantile(draws, [alpha / 2, 1 - alpha / 2], axis=0)
    var = np.maximum(draws.var(axis=0, ddof=1), 1.0 / n ** 2)
    out = CdfEstimate(estimate.t_grid, estimate.pair_mets, estimate.threshold,
                      estimate.infidelities, list(estimate.excluded))
    out.variances, out.ci_low, out.ci_high = var, low, high
    out.n_resamples, out.confidence, out.bootstrap_seed = n_resamples, confidence, seed
    return out


# -- infidelity distributions --------------------------------------------------

def infidelity_cdf_table(estimate: CdfEstimate, levels) -> np.ndarray:
    """``P(C(T) <= level | T)`` for every grid T (rows) and level (columns).

    Durations a chain skipped count as not reaching the level.
    """
    if estimate.infidelities is None:
        raise ValueError("estimate carries no per-pair infidelities")
    inf = np.nan_to_num(estimate.infidelities, nan=np.inf)
    levels = np.asarray(levels, dtype=float)
    return (inf[:, :, None] <= levels[None, None, :]).mean(axis=0)


def extrapolate_infidelity_cdf(t_grid, table: np.ndarray, t_extra, n_average: int = 10) -> dict:
    """Extend an infidelity-CDF table beyond the computed durations.

    Rows at ``t_extra`` are the average of the ``n_average`` computed rows
    with the largest durations; the result is flagged per row.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    order = np.argsort(t_grid)
    k = min(n_average, t_grid.size)
    mean_row = table[order[-k:]].mean(axis=0)
    t_extra = np.asarray(t_extra, dtype=float)
    if np.any(t_extra <= t_grid.max()):
        raise ValueError("extrapolated durations must exceed the computed ones")
    return {
        "T": np.concatenate([t_grid[order], t_extra]),
        "table": np.vstack([table[order], np.repeat(mean_row[None], t_extra.size, 0)]),
        "extrapolated": np.concatenate([np.zeros(t_grid.size, bool), np.ones(t_extra.size, bool)]),
        "n_average": k,
    }
