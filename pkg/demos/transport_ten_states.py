"""Ten eigenstates carried from the paramagnet to the critical point.

At g=2 excited-state DMRG finds the ten lowest even-parity states cheaply.
Each step then rotates all ten by the gauge potential and touches them up
with a short DMRG. A final tight DMRG at g=1 is compared with the exact
free-fermion levels, together with how much it changed the states.

Run: python3 demos/transport_ten_states.py   (a few minutes)
"""

import numpy as np

from agpmps.models import ModelFamily, SectorSpec
from agpmps.mps import inner
from agpmps.oracle import ff_low_energies
from agpmps.transport import TransportPlan, transport

L = 12
plan = TransportPlan(model=ModelFamily("TFIM", L), sector=SectorSpec("even"), lambda_i=2.0, lambda_f=1.0, k=10)
res = transport(plan)

exact = ff_low_energies(L, 1.0, "even", 10)
print(f"{'n':>3} {'transported':>16} {'refined':>16} {'exact':>16} {'rel. error':>10} {'overlap':>10}")
for n in range(10):
    ov = abs(inner(res.prefinal_states[n], res.states[n]))
    err = abs(res.energies[n] - exact[n]) / abs(exact[n])
    print(f"{n:3d} {res.prefinal_energies[n]:16.10f} {res.energies[n]:16.10f} {exact[n]:16.10f} {err:10.1e} {ov:10.6f}")

print("\nstage times (s):", {k: round(v, 1) for k, v in res.timings.items()})
print(f"grid: {np.round(res.lambdas, 3).tolist()}")
