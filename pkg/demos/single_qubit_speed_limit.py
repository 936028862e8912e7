"""How fast can one spin flip?  MET of |0> -> |1> under the default device bounds.

Under the rotating-wave convention a single resonant tone at I = Q = iq_max
rotates the spin at a fixed Rabi frequency, so no pulse shape can beat the
resonant pi time.  The MET scan should land on it, and doubling the drive
bound should halve it.

    python3 demos/single_qubit_speed_limit.py
"""
import numpy as np

from spinmet import CostFunction, MetScanConfig, OptimizerConfig, scan_met, table_one
from spinmet.device import as_ket
from spinmet.metscan import time_grid
from spinmet.propagation import rabi_pi_time

device = table_one(1)
cost = CostFunction.infidelity(as_ket("1"))
scan = MetScanConfig(time_grid(0, 300, linear_step=10), n_segments=10,
                     stop_when_passed=True, refine=True, refine_resolution=0.05)
optimizer = OptimizerConfig(n_random_restarts=2, seed=0)

print(f"resonant pi time: {rabi_pi_time(device):.2f} ns")
for factor in (1.0, 2.0):
    params = device.scaled("iq_max", factor)
    result = scan_met(params, cost, as_ket("0"), scan, optimizer)
    print(f"iq_max x{factor:g}: MET = {result.met_estimate:.2f} ns, "
          f"bracket {result.met_bracket}")
    # the scan records every optimized duration; the envelope never increases
    for row in result.to_rows()[:3]:
        print("   ", {k: row[k] for k in ("T", "delta", "envelope", "passed")})
    best = result.schedule_at(result.met_estimate)
    print(f"    optimal pulse: |I| mean {np.abs(best.i_mhz).mean():.3f} MHz, "
          f"carrier {best.carriers_ghz[0]:.6f} GHz (qubit at "
          f"{params.qubit_frequencies_ghz[0]:.6f} GHz)")
