"""Acceptance criteria 1-14.

Each test prints one ``CRITERION n: PASS|FAIL ...`` line (visible even under
output capture) and then asserts.  Criteria 4, 9 and 13 run the bundled demo
configurations through the CLI so criterion 14 can rerun them and compare the
CSV outputs byte for byte.

Set ``SPINMET_NIGHTLY=1`` to run the bootstrap check at 10^5 resamples.
"""
import csv
import inspect
import json
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad
from scipy.special import beta

from conftest import NIGHTLY, random_state
from test_grape import fd_check
from spinmet import cli, fits, gatebounds, grape, haar, metscan
from spinmet import device as dv
from spinmet import propagation as pr
from spinmet.costs import CostFunction, bundled_hamiltonian, plan_shots, \
    simulate_measurement_estimate

CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"


@pytest.fixture
def verdict(capsys):
    def report(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, f"criterion {n}: {detail}"
    return report


def run_demo(name, out_dir: Path) -> Path:
    """Run ``demos/configs/<name>.json`` with its output redirected into ``out_dir``."""
    cfg = json.loads((CONFIGS / f"{name}.json").read_text())
    cfg["output_dir"] = str(out_dir / name)
    path = out_dir / f"{name}.json"
    path.write_text(json.dumps(cfg))
    t0 = time.perf_counter()
    code = cli.main(["run", str(path)])
    assert code == 0, f"{name} exited with {code}"
    cfg["_elapsed"] = time.perf_counter() - t0
    (out_dir / name / "elapsed.txt").write_text(f"{cfg['_elapsed']}\n")
    return out_dir / name


def elapsed(run_dir: Path) -> float:
    return float((run_dir / "elapsed.txt").read_text())


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def first_runs(tmp_path_factory):
    """Criteria 4, 9 and 13 configurations, each run once through the CLI (lazily)."""
    root = tmp_path_factory.mktemp("run1")
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = run_demo(name, root)
        return cache[name]
    return get


# -- 1 ----------------------------------------------------------------------

def test_criterion_01_propagator(verdict):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst_unitary = worst_doubling = 0.0
    for k in range(50):
        n = 1 + k % 4
        p = dv.table_one(n)
        s = dv.random_schedule(p, rng.uniform(5, 15), int(rng.integers(2, 7)), rng)
        assert dv.validate(p, s).ok
        psi = random_state(rng, p.dim)
        res = pr.propagate(p, s, psi, return_segment_propagators=True)
        eye = np.eye(p.dim)
        for u in res.segment_propagators:
            worst_unitary = max(worst_unitary, np.abs(u.conj().T @ u - eye).max())
        fine = pr.propagate(p, s, psi, substeps=2 * res.substeps_per_segment)
        worst_doubling = max(worst_doubling, np.abs(fine.final_state - res.final_state).max())
    dt = time.perf_counter() - t0
    ok = worst_unitary < 1e-12 and worst_doubling < 1e-9 and dt < 60
    verdict(1, ok, f"max|U^dag U - 1| = {worst_unitary:.2e}, substep doubling "
                   f"{worst_doubling:.2e}, {dt:.1f} s")


# -- 2 ----------------------------------------------------------------------

def test_criterion_02_exchange_oracle(verdict):
    rng = np.random.default_rng(202)
    t_start = time.perf_counter()
    worst = 0.0
    j_values = np.concatenate([[1.0, 1.0], 10 ** rng.uniform(-3, 0, 198)])
    for j in j_values:
        db = rng.uniform(-0.1, 0.1)          # GHz
        t0, dt = rng.uniform(0, 50), rng.uniform(0.01, 5)
        p = dv.DeviceParams(n_qubits=2, zeeman_offsets_mhz=(-500 * db, 500 * db))
        s = dv.ControlSchedule(dt, np.zeros((2, 1)), np.zeros((2, 1)), [[j]],
                               dv.default_carriers(p))
        u = pr.evolve_states(p, s, np.eye(4), t_offset=t0)
        worst = max(worst, np.abs(u - pr.exchange_unitary_exact(j, db, t0, dt)).max())
    worst_limit = 0.0
    for _ in range(200):
        j, dt = rng.uniform(0, 1), rng.uniform(0.001, 1)
        db = rng.uniform(-1, 1) * 1e-4 / dt
        t0 = rng.uniform(0, 50)
        worst_limit = max(worst_limit, np.abs(pr.exchange_unitary_limit(j, db, t0, dt)
                                              - pr.exchange_unitary_exact(j, db, t0, dt)).max())
    el = time.perf_counter() - t_start
    ok = worst < 1e-9 and worst_limit < 1e-3 and el < 60
    verdict(2, ok, f"numeric vs exact {worst:.2e} over 200 tuples (J up to 1 GHz); "
                   f"limit form {worst_limit:.2e} at dB*dt < 1e-4; {el:.1f} s")


# -- 3 ----------------------------------------------------------------------

def test_criterion_03_gradient(verdict):
    rng = np.random.default_rng(303)
    t0 = time.perf_counter()
    p = dv.table_one(2)
    worst = {}
    for k in range(10):
        s = dv.random_schedule(p, rng.uniform(1, 3), 3, rng, carrier_spread=0.05)
        psi = random_state(rng, 4)
        cost = (CostFunction.infidelity(random_state(rng, 4)) if k % 2 == 0
                else CostFunction.expectation(bundled_hamiltonian("dimer")))
        _, w = fd_check(p, s, cost, psi, pr.substep_count(p, s))
        for name, err in w.items():
            worst[name] = max(worst.get(name, 0.0), err)
    el = time.perf_counter() - t0
    ok = max(worst.values()) < 1e-6 and len(worst) == 4 and el < 120
    detail = ", ".join(f"{k}: {v:.1e}" for k, v in worst.items())
    verdict(3, ok, f"worst relative FD error {detail}; {el:.1f} s")


# -- 4, 5 -------------------------------------------------------------------

def test_criterion_04_single_qubit_met(verdict, first_runs):
    run = first_runs("met_scan_1q")
    met = json.loads((run / "result.json").read_text())["met_estimate"]
    t_pi = pr.rabi_pi_time(dv.table_one(1))
    el = elapsed(run)
    ok = abs(met / t_pi - 1) < 0.02 and 1 / 1.25 <= met / 200 <= 1.25 and el < 300
    verdict(4, ok, f"MET {met:.2f} ns vs Rabi pi time {t_pi:.2f} ns "
                   f"(paper clock 200 ns); {el:.1f} s")


def test_criterion_05_amplitude_scaling(verdict, first_runs):
    met1 = json.loads((first_runs("met_scan_1q") / "result.json").read_text())["met_estimate"]
    t0 = time.perf_counter()
    cfg = json.loads((CONFIGS / "met_scan_1q.json").read_text())
    scan = metscan.MetScanConfig.from_dict(cfg["scan"])
    gcfg = grape.OptimizerConfig.from_dict({**cfg["optimizer"], "seed": cfg["seed"]})
    p2 = dv.table_one(1).scaled("iq_max", 2.0)
    res = metscan.scan_met(p2, CostFunction.infidelity(dv.as_ket("1")), dv.as_ket("0"),
                           scan, gcfg)
    el = time.perf_counter() - t0
    ratio = met1 / res.met_estimate
    ok = abs(ratio / 2 - 1) < 0.02 and el < 600
    verdict(5, ok, f"MET {met1:.2f} -> {res.met_estimate:.2f} ns when iq_max doubles "
                   f"(ratio {ratio:.4f}); {el:.1f} s")


# -- 6 ----------------------------------------------------------------------

def _block_rotation_met(j_max):
    p = dv.DeviceParams(n_qubits=2, zeeman_offsets_mhz=(0.0, 0.0), j_max_ghz=j_max)
    psi0 = dv.as_ket("01")
    target = pr.exchange_unitary_exact(1.0, 0.0, 0.0, 0.25) @ psi0
    scan = metscan.MetScanConfig(list(np.round(np.arange(0, 1.0001, 0.05), 10)),
                                 n_segments=4, refine=True, refine_resolution=0.005,
                                 stop_when_passed=True)
    gcfg = grape.OptimizerConfig(optimize_iq=False, carrier_mode="fixed", seed=0)
    return metscan.scan_met(p, CostFunction.infidelity(target), psi0, scan, gcfg).met_estimate


def test_criterion_06_exchange_scaling(verdict):
    t0 = time.perf_counter()
    full, half = _block_rotation_met(1.0), _block_rotation_met(0.5)
    el = time.perf_counter() - t0
    ratio = half / full
    ok = abs(ratio / 2 - 1) < 0.05 and el < 300
    verdict(6, ok, f"MET {full:.4f} -> {half:.4f} ns when j_max halves "
                   f"(ratio {ratio:.4f}); {el:.1f} s")


# -- 7 ----------------------------------------------------------------------

def test_criterion_07_overlap_law(verdict):
    t0 = time.perf_counter()
    o = haar.sample_pairs(1, 1024, seed=7).overlaps()
    crit = haar.ks_critical_value(1024, 0.01)
    ks_stated = haar.ks_statistic(o, lambda x: haar.appendix_overlap_cdf(x, 2))
    ks_haar = haar.ks_statistic(o, lambda x: haar.haar_overlap_cdf(x, 2))
    o4 = haar.sample_pairs(2, 1024, seed=8).overlaps() ** 2
    z = (o4.mean() - 0.25) / (o4.std(ddof=1) / np.sqrt(o4.size))
    el = time.perf_counter() - t0
    ok = ks_stated < crit and abs(z) < 3 and el < 10
    verdict(7, ok, f"d=2 KS vs stated uniform density D={ks_stated:.3f} (critical {crit:.3f}); "
                   f"Haar law 1-(1-o^2)^(d-1) gives D={ks_haar:.3f}; "
                   f"d=4 mean |o|^2 z-score {z:+.2f}; {el:.2f} s")


# -- 8 ----------------------------------------------------------------------

def test_criterion_08_hi_closed_form(verdict):
    t0 = time.perf_counter()
    v = 0.37
    t = np.linspace(0, np.pi / v, 1000)
    worst = 0.0
    for d in (2, 4, 8, 16):
        norm = 2 / beta(d - 1, 0.5)

        def integrand(x, d=d, norm=norm):  # HI density in the half-geodesic variable
            return norm * np.sin(x) ** (2 * d - 3)
        closed = fits.hi_cdf(t, v, d)
        ref = np.array([quad(integrand, 0, v * ti / 2, epsabs=1e-14, epsrel=1e-13)[0]
                        for ti in t])
        worst = max(worst, np.abs(closed - ref).max())
    d2 = np.abs(fits.hi_cdf(t, v, 2) - (1 - np.cos(v * t / 2))).max()
    el = time.perf_counter() - t0
    ok = worst < 1e-10 and d2 < 1e-15 and el < 10
    verdict(8, ok, f"max |closed form - quadrature| {worst:.1e}; d=2 vs 1-cos(vT/2) "
                   f"{d2:.1e}; {el:.2f} s")


# -- 9 ----------------------------------------------------------------------

def _synthetic_estimate(speeds, d=4, n=1024, seed=0, n_boot=4000):
    rng = np.random.default_rng(seed)
    mets = np.concatenate([fits.synthetic_hi_mets(v, d, n // len(speeds), rng)
                           for v in speeds])
    grid = np.linspace(0, np.pi / min(speeds), 64)
    return haar.bootstrap_cdf(haar.CdfEstimate.from_mets(grid, mets), n_boot, seed=seed + 1)


def test_criterion_09_fit_recovery(verdict):
    t0 = time.perf_counter()
    single = fits.fit_hi(_synthetic_estimate([0.1]), 4)
    t = np.linspace(0, np.pi / 0.1, 200)[1:-1]
    binom = fits.fit_hi(fits.CdfData.binomial(t, lambda x: fits.hi_cdf(x, 0.1, 4), 1024,
                                              np.random.default_rng(9)), 4)
    mix = _synthetic_estimate([0.1, 0.2])
    hi = fits.fit_hi(mix, 4)
    sel = fits.select_expansion(mix, 4)
    chis = [s["reduced_chi2"] for s in sel.trace]
    below = [i for i, c in enumerate(chis) if c < 1]
    if below:
        rule = len(chis) == below[0] + 1 and sel.reduced_chi2 == chis[-1]
    else:
        rule = (len(chis) >= 2 and chis[-1] >= chis[-2] and sel.reduced_chi2 == chis[-2]
                and all(b < a for a, b in zip(chis[:-2], chis[1:-1])))
    el = time.perf_counter() - t0
    err = max(abs(single.speed / 0.1 - 1), abs(binom.speed / 0.1 - 1))
    ok = err < 0.02 and sel.reduced_chi2 < hi.reduced_chi2 and rule and el < 60
    verdict(9, ok, f"v recovered {single.speed:.5f} (pair sample), {binom.speed:.5f} "
                   f"(binomial); mixture chi2/NDoF HI {hi.reduced_chi2:.2f} -> expansion "
                   f"{sel.reduced_chi2:.2f} with {sel.n_terms} terms; trace "
                   f"{[round(c, 2) for c in chis]}; {el:.1f} s")


# -- 10 ---------------------------------------------------------------------

def test_criterion_10_bootstrap(verdict):
    t0 = time.perf_counter()
    sig = inspect.signature(haar.bootstrap_cdf).parameters
    defaults = (sig["n_resamples"].default, sig["confidence"].default)
    n = 1024
    est = haar.CdfEstimate.from_mets([0, 2, 4], np.r_[np.full(512, 1.0), np.full(512, 3.0)])
    floor_est = haar.bootstrap_cdf(haar.CdfEstimate.from_mets([0, 2], np.full(n, 1.0)), 200)
    floor = floor_est.variances.min()
    n_resamples = 100_000 if NIGHTLY else 10_000
    boot = haar.bootstrap_cdf(est, n_resamples, seed=10)
    width = boot.ci_high[1] - boot.ci_low[1]
    alpha = 1 - defaults[1]
    oracle = (stats.binom.isf(alpha / 2, n, 0.5) - stats.binom.ppf(alpha / 2, n, 0.5)) / n
    el = time.perf_counter() - t0
    ok = (defaults == (100_000, 0.9999) and floor == 1 / n ** 2
          and abs(width / oracle - 1) < 0.15 and el < 120)
    verdict(10, ok, f"defaults {defaults}, variance floor {floor:.3e} (1/1024^2 = "
                    f"{1 / n ** 2:.3e}); CI width at CDF 0.5 {width:.4f} vs binomial "
                    f"{oracle:.4f} ({n_resamples} resamples); {el:.1f} s")


# -- 11 ---------------------------------------------------------------------

def test_criterion_11_gate_bounds(verdict):
    t0 = time.perf_counter()
    bounds = gatebounds.reference_bounds(200, 0.5).as_tuple()
    rng = np.random.default_rng(11)
    worst = 1.0
    for _ in range(100):
        c = gatebounds.construct_transition(random_state(rng, 4), random_state(rng, 4))
        worst = min(worst, c.overlap)
    el = time.perf_counter() - t0
    ok = bounds == (500.0, 1000.5, 500.5, 200.5) and worst >= 1 - 1e-9 and el < 10
    verdict(11, ok, f"bounds {bounds}; worst construct_transition overlap "
                    f"1 - {1 - worst:.1e}; {el:.2f} s")


# -- 12 ---------------------------------------------------------------------

def test_criterion_12_shots(verdict):
    t0 = time.perf_counter()
    pauli = bundled_hamiltonian("dimer")
    plan = plan_shots(pauli, 0.1, 0.05)
    c = np.abs(pauli.coefficients)
    mask = c > 0
    ratios = plan.exact_shots[mask] / c[mask]
    ratio_err = np.abs(ratios / ratios[0] - 1).max()
    psi = random_state(np.random.default_rng(12), 4)
    exact = pauli.expectation(psi)
    hits = sum(abs(simulate_measurement_estimate(pauli, psi, plan, seed) - exact) <= 0.1
               for seed in range(200))
    el = time.perf_counter() - t0
    ok = ratio_err < 1e-14 and hits / 200 >= 0.95 and el < 60
    verdict(12, ok, f"shots/|c_P| spread {ratio_err:.1e}; coverage {hits}/200 at "
                    f"eps=0.1, delta=0.05 ({plan.total} shots); {el:.2f} s")


# -- 13 ---------------------------------------------------------------------

def test_criterion_13_haar_campaign(verdict, first_runs):
    run = first_runs("haar_1q")
    rows = read_csv(run / "cdf.csv")
    cdf = np.array([float(r["cdf"]) for r in rows])
    result = json.loads((run / "result.json").read_text())
    max_met = result["max_met"]
    t_pi = pr.rabi_pi_time(dv.table_one(1))
    el = elapsed(run)
    ok = (len(read_csv(run / "pairs.csv")) > 0 and np.all(np.diff(cdf) >= 0)
          and cdf[-1] == 1.0 and abs(max_met / t_pi - 1) <= 0.25 and el < 1800)
    verdict(13, ok, f"64 pairs, CDF monotone={bool(np.all(np.diff(cdf) >= 0))}, final "
                    f"{cdf[-1]:.3f}, maximal MET {max_met} ns vs pi time {t_pi:.1f} ns; "
                    f"{el:.0f} s")


# -- 14 ---------------------------------------------------------------------

def test_criterion_14_determinism(verdict, first_runs, tmp_path):
    differing, compared = [], 0
    for name in ("met_scan_1q", "fit_synthetic", "haar_1q"):
        first, second = first_runs(name), run_demo(name, tmp_path)
        for path in sorted(first.glob("*.csv")):
            compared += 1
            if path.read_bytes() != (second / path.name).read_bytes():
                differing.append(f"{name}/{path.name}")
    ok = compared > 0 and not differing
    verdict(14, ok, f"{compared} CSV files compared across two runs; differing: "
                    f"{differing or 'none'}")
