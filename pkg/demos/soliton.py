"""Send a KdV soliton once around a periodic box and report the shape error."""

import sys

from dshierarchy import generate_flow_kdv, make_sln
from dshierarchy.numeric import soliton_transit

n = int(sys.argv[1]) if len(sys.argv) > 1 else 512
run = soliton_transit(generate_flow_kdv(make_sln(2), 3), k=1.0, n=n, length=100.0, dt=2e-3 if n >= 512 else 4e-3)
d = run.trajectory.diagnostics
print(f"N={run.n} L={run.length} dt={run.dt:.3g} t_end={run.t_end:g}")
print(f"max error vs travelling wave: {run.linf_error:.3e}")
print(f"mass drift {d.mass_drift()['v']:.2e}, L2 drift {d.energy_drift()['v']:.2e}")
