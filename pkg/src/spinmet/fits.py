"""Analytic models of the MET distribution and weighted least-squares fits.

Homogeneous/isotropic (HI) model, with ``x = v T / 2``::

    P(MET <= T) = (2 / B(d-1, 1/2)) * I_{2d-3}(x),   I_n(x) = int_0^x sin^n

Sin-power expansion with edge speed ``vt = pi / T*``::

    P(MET <= T) = sum_{n=2d-3}^{L} c_n I_n(vt T / 2)

subject to normalization ``P(T*) = 1`` and a vanishing density at ``T*``
(``sum c_n = 0``).  Both constraints are eliminated analytically by solving
for ``c_{L-1}`` and ``c_L``.  ``L = 2d-3`` (a single term) is the HI model.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.special import beta

# Appendix F reference: qubits -> (terms, parameters, chi2 / N_DoF)
REFERENCE_SELECTION = {1: (7, 6, 0.62), 2: (5, 4, 0.77), 3: (6, 5, 1.16), 4: (8, 7, 7.53)}

_HALF_PI = 0.5 * np.pi


def sin_power_integrals(x, n_max: int) -> np.ndarray:
    """``I_n(x) = int_0^x sin(t)^n dt`` for ``n = 0..n_max``; shape ``(n_max+1,) + x.shape``.

    Uses the reduction formula
    ``I_n = -sin^(n-1) x cos x / n + (n-1)/n I_{n-2}``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    s, c = np.sin(x), np.cos(x)
    out[0] = x
    if n_max >= 1:
        out[1] = 2.0 * np.sin(0.5 * x) ** 2  # 1 - cos x without cancellation
    for n in range(2, n_max + 1):
        out[n] = -s ** (n - 1) * c / n + (n - 1) / n * out[n - 2]
    return out


def sin_power_integral(x, n: int) -> np.ndarray:
    return sin_power_integrals(x, n)[n]


def _hi(t, v: float, d: int) -> np.ndarray:
    x = np.clip(0.5 * v * np.asarray(t, dtype=float), 0.0, _HALF_PI)
    return 2.0 / beta(d - 1, 0.5) * sin_power_integral(x, 2 * d - 3)


def hi_cdf(t, v: float, d: int) -> np.ndarray:
    """HI-model CDF of the MET for speed ``v`` (rad/ns) and Hilbert dimension ``d``.

    Durations outside ``[0, pi/v]`` are clamped (CDF 0 below, 1 above)
    with a warning.
    """
    if d < 2 or int(d) != d:
        raise ValueError("d must be an integer >= 2")
    if v <= 0:
        raise ValueError("v must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > np.pi / v * (1 + 1e-12)):
        warnings.warn("durations outside [0, pi/v] clamped", RuntimeWarning, stacklevel=2)
    return _hi(t, v, int(d))


def _hi_dv(t, v: float, d: int) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    x = 0.5 * v * t
    return np.where(x < _HALF_PI, 2.0 / beta(d - 1, 0.5) * np.sin(x) ** (2 * d - 3) * 0.5 * t, 0.0)


class _Expansion:
    """Constrained sin-power expansion with free coefficients ``c_{n0} .. c_{L-2}``."""

    def __init__(self, d: int, L: int):
        self.d, self.L, self.n0 = d, L, 2 * d - 3
        if L < self.n0:
            raise ValueError(f"L must be >= 2d-3 = {self.n0}")
        self.n_free = max(0, L - self.n0 - 1)
        edge = sin_power_integrals(_HALF_PI, L)
        self.edge = edge
        if L > self.n0:
            self.a = edge[self.n0:L - 1] - edge[L]  # A_n for free n
            self.dd = edge[L - 1] - edge[L]

    def coefficients(self, free) -> np.ndarray:
        """All ``c_n`` for ``n = n0..L``."""
        free = np.asarray(free, dtype=float)
        if self.L == self.n0:
            return np.array([1.0 / self.edge[self.n0]])
        c_lm1 = (1.0 - np.dot(free, self.a)) / self.dd
        c_l = -free.sum() - c_lm1
        return np.concatenate([free, [c_lm1, c_l]])

    def value_and_jac(self, t, vt: float, free):
        t = np.asarray(t, dtype=float)
        x = np.clip(0.5 * vt * t, 0.0, _HALF_PI)
        ints = sin_power_integrals(x, self.L)[self.n0:]
        c = self.coefficients(free)
        p = c @ ints
        inside = 0.5 * vt * t < _HALF_PI
        powers = np.sin(x)[None, :] ** np.arange(self.n0, self.L + 1)[:, None]
        dv = np.where(inside, 0.5 * t * (c @ powers), 0.0)
        if self.L == self.n0:
            return p, dv[:, None]
        base = ints[:-2] - ints[-1]            # (I_k - I_L)(x)
        last = ints[-2] - ints[-1]             # (I_{L-1} - I_L)(x)
        dc = base - (self.a / self.dd)[:, None] * last[None, :]
        return p, np.column_stack([dv, dc.T])


@dataclass
class CdfFit:
    """Result of a CDF fit.  ``params`` holds ``v`` (HI) or ``vt`` and ``c`` (expansion)."""

    model: str
    d: int
    params: dict
    chi2: float
    n_dof: int
    covariance: np.ndarray
    L: int | None = None
    in_range: bool = True
    trace: list = field(default_factory=list)

    @property
    def reduced_chi2(self) -> float:
        return self.chi2 / self.n_dof if self.n_dof > 0 else math.nan

    @property
    def n_params(self) -> int:
        return self.covariance.shape[0]

    @property
    def n_terms(self) -> int:
        return 1 if self.model == "hi" else self.L - (2 * self.d - 3) + 1

    @property
    def speed(self) -> float:
        return self.params["v"] if self.model == "hi" else self.params["vt"]

    def cdf(self, t) -> np.ndarray:
        if self.model == "hi":
            return _hi(t, self.params["v"], self.d)
        exp = _Expansion(self.d, self.L)
        c = np.asarray(self.params["c"])
        x = np.clip(0.5 * self.params["vt"] * np.asarray(t, dtype=float), 0.0, _HALF_PI)
        return c @ sin_power_integrals(x, self.L)[exp.n0:]

    def to_dict(self) -> dict:
        params = {k: (list(map(float, v)) if isinstance(v, (list, np.ndarray)) else float(v))
                  for k, v in self.params.items()}
        return {"model": self.model, "d": self.d, "L": self.L, "n_terms": self.n_terms,
                "params": params, "chi2": self.chi2, "n_dof": self.n_dof,
                "reduced_chi2": self.reduced_chi2, "covariance": self.covariance.tolist(),
                "in_range": self.in_range, "trace": list(self.trace)}


@dataclass
class CdfData:
    """Tabulated CDF values with variances, e.g. synthetic data with independent noise."""

    t_grid: np.ndarray
    cdf_values: np.ndarray
    variances: np.ndarray
    edge_time: float

    @classmethod
    def binomial(cls, t_grid, cdf, n_pairs: int, rng: np.random.Generator) -> "CdfData":
        """Independent ``Binomial(n_pairs, cdf(T)) / n_pairs`` draws at every grid point.

        Variances are the plug-in binomial values floored at ``1 / n_pairs^2``;
        the edge time is the first grid point where ``cdf`` reaches 1.
        """
        t = np.asarray(t_grid, dtype=float)
        p = np.clip(cdf(t), 0.0, 1.0)
        y = rng.binomial(n_pairs, p) / n_pairs
        var = np.maximum(y * (1 - y) / n_pairs, 1.0 / n_pairs ** 2)
        full = np.nonzero(p >= 1.0 - 1e-12)[0]
        edge = float(t[full[0]]) if full.size else float(t[-1])
        return cls(t, y, var, edge)


def _data(estimate):
    if estimate.variances is None:
        raise ValueError("estimate has no bootstrap variances; run bootstrap_cdf first")
    y = estimate.cdf_values
    if np.all(y == 0) or np.all(y == 1):
        raise ValueError("degenerate data: CDF is identically 0 or 1")
    return estimate.t_grid, y, np.sqrt(estimate.variances)


def _edge_time(estimate) -> float:
    if getattr(estimate, "edge_time", None) is not None:
        return float(estimate.edge_time)
    finite = estimate.pair_mets[np.isfinite(estimate.pair_mets)]
    return float(finite.max()) if finite.size else float(estimate.t_grid[-1])


def _covariance(jac: np.ndarray) -> np.ndarray:
    return np.linalg.pinv(jac.T @ jac)


def fit_hi(estimate, d: int) -> CdfFit:
    """Weighted least-squares fit of the HI speed ``v``."""
    t, y, sigma = _data(estimate)
    t_star = max(_edge_time(estimate), 1e-12)

    def resid(p):
        return (_hi(t, p[0], d) - y) / sigma

    def jac(p):
        return (_hi_dv(t, p[0], d) / sigma)[:, None]

    best = None
    for s in (0.8, 0.9, 1.0, 1.1, 1.25):
        sol = least_squares(resid, [s * np.pi / t_star], jac=jac, bounds=([1e-12], [np.inf]),
                            x_scale=[np.pi / t_star], xtol=1e-14, ftol=1e-14, gtol=1e-14)
        if best is None or sol.cost < best.cost:
            best = sol
    chi2 = float(2 * best.cost)
    return CdfFit("hi", d, {"v": float(best.x[0])}, chi2, t.size - 1, _covariance(best.jac))


def fit_expansion(estimate, d: int, L: int) -> CdfFit:
    """Weighted least-squares fit of the constrained sin-power expansion of order ``L``."""
    exp = _Expansion(d, L)
    t, y, sigma = _data(estimate)
    n_par = 1 + exp.n_free
    if t.size <= n_par:
        raise ValueError(f"underdetermined fit: {t.size} points for {n_par} parameters")
    t_star = max(_edge_time(estimate), 1e-12)

    def resid(p):
        return (exp.value_and_jac(t, p[0], p[1:])[0] - y) / sigma

    def jac(p):
        return exp.value_and_jac(t, p[0], p[1:])[1] / sigma[:, None]

    scale = np.concatenate([[np.pi / t_star], np.ones(exp.n_free)])
    lower = np.concatenate([[1e-12], np.full(exp.n_free, -np.inf)])
    best = None
    for s in (0.8, 0.9, 1.0, 1.1, 1.25):
        p0 = np.concatenate([[s * np.pi / t_star], np.zeros(exp.n_free)])
        sol = least_squares(resid, p0, jac=jac, bounds=(lower, np.full(n_par, np.inf)),
                            x_scale=scale, xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=2000)
        if best is None or sol.cost < best.cost:
            best = sol
    coeffs = exp.coefficients(best.x[1:])
    fit = CdfFit("expansion", d, {"vt": float(best.x[0]), "c": coeffs.tolist()},
                 float(2 * best.cost), t.size - n_par, _covariance(best.jac), L=L)
    grid = np.linspace(0, np.pi / best.x[0], 1001)
    vals = fit.cdf(grid)
    fit.in_range = bool(vals.min() >= -1e-9 and vals.max() <= 1 + 1e-9)
    return fit


def select_expansion(estimate, d: int, max_terms: int = 12) -> CdfFit:
    """Add expansion terms until ``chi2/N_DoF < 1`` or it stops decreasing.

    Starts at two terms.  When the reduced chi^2 fails to decrease, the
    previous fit is returned.  The trace ``[(terms, L, reduced_chi2), ...]``
    of every fit tried is attached to the result.
    """
    n0 = 2 * d - 3
    trace = []
    best = None
    for terms in range(2, max_terms + 1):
        try:
            fit = fit_expansion(estimate, d, n0 + terms - 1)
        except ValueError:
            break
        trace.append({"terms": terms, "L": fit.L, "n_params": fit.n_params,
                      "reduced_chi2": fit.reduced_chi2})
        if best is not None and not fit.reduced_chi2 < best.reduced_chi2:
            break
        best = fit
        if fit.reduced_chi2 < 1:
            break
    if best is None:
        raise ValueError("no expansion could be fitted")
    best.trace = trace
    return best


def synthetic_hi_mets(v: float, d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw METs distributed exactly as the HI model (``o^2 ~ Beta(1/2, d-1)``)."""
    o = np.sqrt(rng.beta(0.5, d - 1, size=n))
    return 2.0 / v * np.arccos(np.clip(o, 0.0, 1.0))
