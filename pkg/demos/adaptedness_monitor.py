"""Curvature-adapted versus perturbed hypersurfaces of CP^2.

The geodesic sphere stays adapted along its parallel family (gap zero,
Jacobi spectrum {1, 1, 4}). A small random bump breaks adaptedness at
once, which the gap monitor reports as t_min = 0.
"""

from curvflow.catalog import build, spectrum_for
from curvflow.flow import FlowTrace, gap_monitor, pairing_gate
from curvflow.parallel import ParallelFamily, flow_ode, invariance_monitor

fam = ParallelFamily(spectrum_for("cp2-geodesic-sphere", r0=0.7))
for direction in ("forward", "backward"):
    traj = flow_ode(fam, 0.2, 1e-3, direction)
    rep = invariance_monitor(fam, traj)
    end = "collapse at t = %.6f" % traj.collapse_time if traj.collapse_time else "reached t = 0.2"
    print(f"{direction:8s} max rho {rep.rho_max:.1e}, nu constant {rep.nu_constant}, {end}")

trace = FlowTrace()
trace.append(0.0, build("cp2-perturbed", m=13, amplitude=0.05))
mon = gap_monitor(trace)
gate = pairing_gate(mon)
print(f"perturbed: max rho {mon.max_rho[0]:.3f} (tol {mon.rho_tol:.1e}), t_min = {mon.t_min}, "
      f"started adapted {gate.initially_adapted}")
