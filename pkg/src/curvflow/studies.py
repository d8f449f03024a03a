"""Refinement studies shared by the test-suite, the command line and the demos.

A time study halves ``dt`` with the comparison time held fixed; a space
study refines nested grids with the dropped margin doubling in points, so
every level covers the same parameter box and the coarse nodes are shared.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convergence import ConvergenceResult, coarse_samples, error_study, richardson_study
from .flow import EvolutionEquation, pushforward_field, residual_field
from .immersion import DEFAULT_MARGIN, gauss_codazzi_residual, second_order_identities, fundamental_forms

EPS = np.finfo(float).eps
# Residual fields are assembled from a few hundred floating-point operations
# and then differenced in time, so their noise is some 1e3-1e4 ulps of the
# input magnitude divided by dt. Successive differences below this floor are
# treated as exact zeros.
ROUNDOFF_ULPS = 1e4


@dataclass
class Check:
    """A residual evaluated on a trace at one snapshot index."""

    key: str
    field: object  # (trace, index) -> signed residual field
    size: object  # (trace, index) -> typical magnitude of the differenced quantity


def _input_size(eq, st):
    # S and rho can vanish identically while A and j do not; their noise
    # scales with the operands
    if eq.tag in ("commutator", "gap"):
        aj = float(np.abs(st.A).max()) * float(np.abs(st.j).max())
        return aj if eq.tag == "commutator" else aj * aj
    return float(np.abs(eq.quantity(st)).max())


def equation_check(eq: EvolutionEquation) -> Check:
    key = eq.tag if eq.variant == "rederived" else f"{eq.tag}/printed"
    return Check(key, lambda tr, k: residual_field(tr, eq, k), lambda tr, k: _input_size(eq, tr.state(k)))


def pushforward_check() -> Check:
    def fld(tr, k):
        n = tr.state(k).n
        return np.stack([pushforward_field(tr, ax, k) for ax in range(n)], axis=-1)

    return Check("pushforward", fld, lambda tr, k: float(np.abs(tr.state(k).tangents).max()))


def default_checks(variants=("rederived", "printed")):
    from .flow import TAGS

    out = [equation_check(EvolutionEquation(t, v)) for v in variants for t in TAGS]
    return out + [pushforward_check()]


@dataclass
class StudyEntry:
    result: ConvergenceResult
    absolute: float  # max residual on the coarsest level
    kind: str = "space"  # in a "time" study the limit is the spatial error

    def passed(self, min_order=1.8) -> bool:
        return self.result.passed(min_order, require_limit=self.kind != "time")

    def summary(self) -> str:
        return f"{self.result.summary()} | abs {self.absolute:.2e}"


def time_study(make_trace, dt0, checks, levels=3, margin=DEFAULT_MARGIN) -> dict:
    """``make_trace(dt, steps)`` returns a trace with snapshots ``k * dt``;
    residuals are compared at ``t = dt0``."""
    traces = [make_trace(dt0 / 2**k, 2 ** (k + 1)) for k in range(levels)]
    dt_min = dt0 / 2 ** (levels - 1)
    out = {}
    for c in checks:
        fields = []
        for k, tr in enumerate(traces):
            sl = tr.state(2**k).interior(margin)
            fields.append(c.field(tr, 2**k)[sl])
        floor = ROUNDOFF_ULPS * EPS * c.size(traces[-1], 2 ** (levels - 1)) / dt_min
        res = richardson_study(c.key, fields, floor=floor)
        out[c.key] = StudyEntry(res, float(np.abs(fields[0]).max()), "time")
    return out


def space_study(make_trace, checks, levels=3, margin0=3, t_index=1) -> dict:
    """``make_trace(k)`` returns the trace on refinement level ``k`` (nested
    grids, level 0 coarsest)."""
    traces = [make_trace(k) for k in range(levels)]
    sl = traces[0].state(t_index).interior(margin0)
    ndim = traces[0].state(t_index).n
    out = {}
    for c in checks:
        fields = [coarse_samples(c.field(tr, t_index), 2, k, ndim)[sl] for k, tr in enumerate(traces)]
        dt = traces[-1].dt
        floor = ROUNDOFF_ULPS * EPS * c.size(traces[-1], t_index) / dt
        res = richardson_study(c.key, fields, floor=floor)
        out[c.key] = StudyEntry(res, float(np.abs(fields[0]).max()))
    return out


def identity_study(make_immersion, levels=3, margin0=3) -> dict:
    """Structural identities on nested grids; the exact residual is zero,
    so orders come straight from the residual sizes."""
    per_level = []
    sl = None
    ndim = None
    for k in range(levels):
        st = fundamental_forms(make_immersion(k))
        fields = dict(gauss_codazzi_residual(st).fields)
        fields.update(second_order_identities(st).fields)
        if sl is None:
            ndim = st.n
            sl = st.interior(margin0)
        per_level.append({name: coarse_samples(f, 2, k, ndim)[sl] for name, f in fields.items()})
    out = {}
    for name in per_level[0]:
        vals = [float(np.abs(lv[name]).max()) for lv in per_level]
        scale = max(1.0, vals[0])
        out[name] = StudyEntry(error_study(name, vals, scale=scale), vals[0])
    return out


def trace_from_steps(im, method="rk2", direction="forward"):
    """``make_trace`` for :func:`time_study` built on the explicit stepper."""
    from .flow import run_pde_flow

    return lambda dt, steps: run_pde_flow(im, dt, steps, direction, method)


def trace_from_family(family, builder, direction="forward"):
    """``make_trace`` for :func:`time_study` along a reduced parallel flow;
    ``builder(r)`` gives the grid immersion at offset ``r``."""
    from .flow import parallel_trace
    from .parallel import flow_ode

    def make(dt, steps):
        traj = flow_ode(family, steps * dt * (1 + 1e-9), dt, direction)
        if len(traj.ts) < steps + 1:
            raise ValueError("reduced flow stopped before the requested horizon")
        traj.ts, traj.rs, traj.spectra = traj.ts[: steps + 1], traj.rs[: steps + 1], traj.spectra[: steps + 1]
        return parallel_trace(builder, traj)

    return make


__all__ = [
    "Check", "StudyEntry", "default_checks", "equation_check", "identity_study",
    "pushforward_check", "space_study", "time_study", "trace_from_family", "trace_from_steps",
]
