import numpy as np
import pytest
from scipy import stats

from spinmet import device as dv
from spinmet import haar
from spinmet.grape import OptimizerConfig


def test_sample_pairs_normalized_and_deterministic():
    a = haar.sample_pairs(2, 50, seed=3)
    b = haar.sample_pairs(2, 50, seed=3)
    assert np.array_equal(a.psi0, b.psi0) and np.array_equal(a.phi, b.phi)
    assert np.abs(np.linalg.norm(a.psi0, axis=1) - 1).max() < 1e-12
    assert np.abs(np.linalg.norm(a.phi, axis=1) - 1).max() < 1e-12
    assert not np.array_equal(a.psi0, haar.sample_pairs(2, 50, seed=4).psi0)
    with pytest.raises(ValueError):
        haar.sample_pairs(1, 0, seed=0)


@pytest.mark.parametrize("d", [2, 4, 8])
def test_haar_overlap_law(d):
    """|<psi|phi>|^2 ~ Beta(1, d-1) for independent Haar states."""
    s = haar.sample_pairs(int(np.log2(d)), 1024, seed=11)
    o = s.overlaps()
    assert haar.ks_statistic(o, lambda x: haar.haar_overlap_cdf(x, d)) < haar.ks_critical_value(1024)
    assert stats.kstest(o ** 2, stats.beta(1, d - 1).cdf).pvalue > 0.01


def test_overlap_squared_uniform_for_one_qubit():
    o = haar.sample_pairs(1, 1024, seed=5).overlaps()
    assert haar.ks_statistic(o ** 2, lambda x: np.clip(x, 0, 1)) < haar.ks_critical_value(1024)


def test_appendix_density_normalized_and_cdf():
    from scipy.integrate import quad
    for d in (2, 3, 4, 8):
        total = quad(lambda o: haar.appendix_overlap_density(o, d), 0, 1)[0]
        assert np.isclose(total, 1.0)
        x = 0.37
        assert np.isclose(haar.appendix_overlap_cdf(x, d),
                          quad(lambda o: haar.appendix_overlap_density(o, d), 0, x)[0])
    assert np.allclose(haar.appendix_overlap_density(np.linspace(0, 1, 5), 2), 1.0)


def test_ks_helpers_agree_with_scipy(rng):
    x = rng.uniform(size=200)
    assert np.isclose(haar.ks_statistic(x, lambda t: t), stats.kstest(x, "uniform").statistic)
    assert np.isclose(haar.KS_CRITICAL[(1024, 0.01)], 1.628 / (32 + 0.12 + 0.11 / 32))
    assert haar.ks_critical_value(64, 0.05) > haar.ks_critical_value(1024, 0.05)


def test_geodesic_cdf_matches_sampled_mets():
    v, d = 0.1, 4
    s = haar.sample_pairs(2, 2048, seed=1)
    mets = 2 / v * np.arccos(s.overlaps())
    d_ks = haar.ks_statistic(mets, lambda t: haar.haar_geodesic_cdf(t, v, d))
    assert d_ks < haar.ks_critical_value(2048)


def test_cdf_estimate_from_mets_and_brackets():
    est = haar.CdfEstimate.from_mets([0, 1, 2, 3], [0.5, 2.0, 7.0])
    assert list(est.pair_mets) == [1.0, 2.0, np.inf]
    assert np.allclose(est.cdf_values, [0, 1 / 3, 2 / 3, 2 / 3])
    assert est.pair_brackets() == [(0.0, 1.0), (1.0, 2.0), (3.0, None)]
    assert est.max_met == np.inf


def test_bootstrap_degenerate_and_floor():
    est = haar.CdfEstimate.from_mets([0, 1, 2], [1.0] * 10)
    boot = haar.bootstrap_cdf(est, n_resamples=500, seed=0)
    assert np.array_equal(boot.ci_low, boot.ci_high)
    assert np.allclose(boot.variances, 1 / 100)
    assert boot.n_resamples == 500 and boot.confidence == 0.9999


def test_bootstrap_deterministic_and_binomial():
    rng = np.random.default_rng(0)
    est = haar.CdfEstimate.from_mets([0.5], rng.uniform(0, 1, 1024))
    a = haar.bootstrap_cdf(est, 4000, 0.95, seed=9)
    b = haar.bootstrap_cdf(est, 4000, 0.95, seed=9)
    assert np.array_equal(a.ci_low, b.ci_low) and np.array_equal(a.variances, b.variances)
    p = est.cdf_values[0]
    assert np.isclose(np.sqrt(a.variances[0]), np.sqrt(p * (1 - p) / 1024), rtol=0.1)


def test_estimate_cdf_identical_pairs():
    s = haar.sample_pairs(1, 3, seed=0)
    same = haar.StatePairSample(s.psi0, s.psi0.copy(), 1, 0)
    est = haar.estimate_cdf(same, dv.table_one(1), [0, 50], n_segments=4)
    assert np.allclose(est.cdf_values, 1.0)


def test_estimate_cdf_small_campaign():
    s = haar.sample_pairs(1, 3, seed=2)
    est = haar.estimate_cdf(s, dv.table_one(1), [0, 100, 200, 300], n_segments=10,
                            grape_config=OptimizerConfig(n_random_restarts=1))
    assert est.cdf_values[0] == 0.0 and est.cdf_values[-1] == 1.0
    assert np.all(np.diff(est.cdf_values) >= 0)
    assert est.infidelities.shape == (3, 4)
    rows = est.pair_rows()
    assert len(rows) == 12 and {"pair", "T", "infidelity", "passed"} <= set(rows[0])


def test_failing_pair_is_excluded(monkeypatch):
    def boom(task):
        if task.psi0[0] == s.psi0[1][0]:
            return {"error": "LinAlgError: synthetic failure"}
        return {"infidelities": {t: 0.0 for t in task.t_desc}}

    s = haar.sample_pairs(1, 3, seed=0)
    monkeypatch.setattr(haar, "run_pair_chain", boom)
    with pytest.warns(RuntimeWarning, match="pair 1 excluded"):
        est = haar.estimate_cdf(s, dv.table_one(1), [0, 1])
    assert est.n_pairs == 2 and est.excluded[0]["pair"] == 1


def test_infidelity_table_and_extrapolation():
    est = haar.CdfEstimate([0, 1, 2], [1.0, 2.0], 1e-7,
                           infidelities=np.array([[0.5, 0.0, 0.0], [0.9, 0.2, 0.0]]))
    table = haar.infidelity_cdf_table(est, [1e-7, 0.3, 1.0])
    assert np.allclose(table[0], [0, 0, 1]) and np.allclose(table[1], [0.5, 1, 1]) and np.allclose(table[2], [1, 1, 1])
    ext = haar.extrapolate_infidelity_cdf(est.t_grid, table, [3, 4], n_average=2)
    assert ext["extrapolated"].tolist() == [False, False, False, True, True]
    assert np.allclose(ext["table"][3], table[1:].mean(axis=0))
    with pytest.raises(ValueError):
        haar.extrapolate_infidelity_cdf(est.t_grid, table, [1.5])
