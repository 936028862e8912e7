"""Minimal evolution times of state preparation on silicon spin-qubit chains.

Modules: ``device`` (Hamiltonian and control bounds), ``propagation``
(time evolution), ``costs`` (Pauli-sum energies and infidelities), ``grape``
(gradient pulse optimization), ``metscan`` (MET scans and sweeps), ``haar``
and ``fits`` (random-pair campaigns and MET distributions), ``gatebounds``
(gate-based reference bounds) and ``cli``.
"""
from .costs import CostFunction, PauliSum, bundled_hamiltonian, bundled_series, plan_shots
from .device import ControlSchedule, DeviceParams, table_one
from .fits import fit_expansion, fit_hi, hi_cdf, select_expansion
from .gatebounds import construct_transition, reference_bounds, schmidt_decompose
from .grape import OptimizerConfig, cost_and_gradient, optimize
from .haar import bootstrap_cdf, estimate_cdf, sample_pairs
from .metscan import MetScanConfig, bond_distance_sweep, parameter_sweep, scan_met
from .propagation import exchange_unitary_exact, exchange_unitary_limit, propagate

__all__ = [
    "ControlSchedule", "CostFunction", "DeviceParams", "MetScanConfig", "OptimizerConfig",
    "PauliSum", "bond_distance_sweep", "bootstrap_cdf", "bundled_hamiltonian", "bundled_series",
    "construct_transition", "cost_and_gradient", "estimate_cdf", "exchange_unitary_exact",
    "exchange_unitary_limit", "fit_expansion", "fit_hi", "hi_cdf", "optimize",
    "parameter_sweep", "plan_shots", "propagate", "reference_bounds", "sample_pairs",
    "scan_met", "schmidt_decompose", "select_expansion", "table_one",
]
