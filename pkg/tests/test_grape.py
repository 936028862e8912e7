import numpy as np
import pytest

import extended_precision as xp
from spinmet import device as dv
from spinmet import grape
from spinmet.costs import CostFunction, bundled_hamiltonian
from spinmet.propagation import propagate
from conftest import random_state

CLASSES = (("i_mhz", "iq"), ("q_mhz", "iq"), ("j_ghz", "j"), ("carriers_ghz", "f"))


def fd_check(p, s, cost, psi, n_sub, rwa=True, rel=1e-6):
    """Worst per-entry relative error of the analytic gradient vs long-double central FD."""
    value, g = grape.cost_and_gradient(p, s, cost, psi, substeps=n_sub, rwa=rwa,
                                       check_schedule=False)
    scales = {"iq": p.iq_max_mhz, "j": p.j_max_ghz,
              "f": max(np.ptp(p.zeeman_offsets_mhz), 2 * p.iq_max_mhz) * 1e-3}
    worst = {}
    for name, kind in CLASSES:
        arr, ga = getattr(s, name), getattr(g, name)
        for idx in np.ndindex(arr.shape):
            step = 1e-6 * scales[kind]
            sp, sm = s.copy(), s.copy()
            getattr(sp, name)[idx] += step
            getattr(sm, name)[idx] -= step
            fd = float((xp.cost(p, sp, cost, psi, n_sub, rwa) - xp.cost(p, sm, cost, psi, n_sub, rwa))
                       / (2 * np.longdouble(step)))
            err = abs(fd - ga[idx]) / max(abs(fd), abs(ga[idx]), 1e-300)
            worst[name] = max(worst.get(name, 0.0), err)
    return value, worst


def test_value_matches_propagation(rng):
    p = dv.table_one(2)
    s = dv.random_schedule(p, 40, 5, rng, carrier_spread=0.05)
    psi, phi = random_state(rng, 4), random_state(rng, 4)
    cost = CostFunction.infidelity(phi)
    v, _ = grape.cost_and_gradient(p, s, cost, psi)
    assert abs(v - cost.evaluate(propagate(p, s, psi).final_state)) < 1e-14


def test_gradient_single_qubit_energy(rng):
    p = dv.table_one(1)
    s = dv.random_schedule(p, 60, 4, rng, carrier_spread=0.05)
    cost = CostFunction.expectation(bundled_hamiltonian("qubit_z"))
    _, worst = fd_check(p, s, cost, dv.as_ket("0"), 30)
    assert worst["i_mhz"] < 1e-6 and worst["q_mhz"] < 1e-6 and worst["carriers_ghz"] < 1e-6


def test_gradient_without_rwa(rng):
    p = dv.table_one(1)
    s = dv.random_schedule(p, 0.5, 2, rng, carrier_spread=0.05)
    s.i_mhz *= 50  # strong drive (schedule validity is not needed for the derivative)
    s.q_mhz *= 50
    cost = CostFunction.infidelity(random_state(rng, 2))
    from spinmet.propagation import substep_count
    n_sub = substep_count(p, s, rwa=False)
    _, worst = fd_check(p, s, cost, random_state(rng, 2), n_sub, rwa=False)
    assert max(worst.values()) < 1e-6, worst


def test_config_validation():
    with pytest.raises(ValueError, match="unknown optimizer keys"):
        grape.OptimizerConfig.from_dict({"bogus": 1})
    with pytest.raises(ValueError):
        grape.OptimizerConfig(carrier_mode="sometimes")
    cfg = grape.OptimizerConfig(seed=3)
    assert grape.OptimizerConfig.from_dict(cfg.to_dict()) == cfg


def test_single_qubit_speed_limit():
    p = dv.table_one(1)
    cost = CostFunction.infidelity(dv.as_ket("1"))
    cfg = grape.OptimizerConfig(n_random_restarts=2, seed=0)
    below = grape.optimize(p, cost, dv.as_ket("0"), 190.0, 10, "random", cfg)
    # the fastest rotation covers 190/200 of the way: residual sin^2(pi/40)
    assert np.isclose(below.best_cost, np.sin(np.pi / 40) ** 2, rtol=1e-3)
    above = grape.optimize(p, cost, dv.as_ket("0"), 205.0, 10, "random", cfg)
    assert above.best_cost < 1e-8
    assert np.all(np.diff(above.cost_history) <= 0)
    assert dv.validate(p, above.best_schedule).ok


def test_deterministic_given_seed():
    p = dv.table_one(1)
    cost = CostFunction.infidelity(dv.as_ket("1"))
    cfg = grape.OptimizerConfig(n_random_restarts=1, seed=7, max_iterations=30)
    a = grape.optimize(p, cost, dv.as_ket("0"), 100.0, 5, "random", cfg)
    b = grape.optimize(p, cost, dv.as_ket("0"), 100.0, 5, "random", cfg)
    assert a.best_cost == b.best_cost
    assert np.array_equal(a.best_schedule.i_mhz, b.best_schedule.i_mhz)


def test_frozen_channels_stay_fixed():
    p = dv.DeviceParams(n_qubits=2, zeeman_offsets_mhz=(0.0, 0.0))
    cfg = grape.OptimizerConfig(optimize_iq=False, carrier_mode="fixed", n_random_restarts=0)
    start = dv.ControlSchedule.zeros(p, 0.3, 3)
    start.j_ghz[:] = 0.1  # J = 0 is a stationary point of this cost
    cost = CostFunction.infidelity(dv.as_ket("10"))
    out = grape.optimize(p, cost, dv.as_ket("01"), 0.3, 3, start, cfg)
    assert np.all(out.best_schedule.i_mhz == 0) and np.all(out.best_schedule.q_mhz == 0)
    assert np.array_equal(out.best_schedule.carriers_ghz, start.carriers_ghz)
    # J can only partially swap in 0.3 ns (a full swap needs 0.5 ns at 1 GHz)
    assert np.isclose(out.best_cost, np.cos(np.pi * 0.3) ** 2, atol=1e-6)


def test_zero_time_and_target_stop():
    p = dv.table_one(1)
    cost = CostFunction.infidelity(dv.as_ket("0"))
    out = grape.optimize(p, cost, dv.as_ket("0"), 0.0, 10)
    assert out.best_cost == 0.0
    cfg = grape.OptimizerConfig(target_cost=1e-3, n_random_restarts=3)
    out = grape.optimize(p, CostFunction.infidelity(dv.as_ket("1")), dv.as_ket("0"), 250.0, 10,
                         "random", cfg)
    assert out.converged and out.best_cost <= 1e-3
    assert len(out.start_costs) <= 4
