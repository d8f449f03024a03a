"""Mean curvature flow of grid immersions and residual checks of the
evolution equations along flows.

Two kinds of traces are produced here: short explicit PDE runs
(:func:`run_pde_flow`) and traces of parallel families
(:func:`parallel_trace`), where each snapshot is an exact end-point
immersion at the offset given by the reduced ODE. Time derivatives in the
residual checks are differences between stored snapshots, so their order
does not depend on the stepper that produced them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor_algebra as ta
from .immersion import (
    DEFAULT_MARGIN,
    DegenerateImmersionError,
    HypersurfaceState,
    ParametrizedImmersion,
    fundamental_forms,
)

TAGS = ("metric", "normal", "shape", "mean", "jacobi", "commutator", "gap")

TITLES = {
    "metric": "metric evolution",
    "normal": "unit normal evolution",
    "shape": "shape operator evolution",
    "mean": "mean curvature evolution",
    "jacobi": "normal Jacobi operator evolution",
    "commutator": "commutator evolution",
    "gap": "gap function evolution",
    "pushforward": "pushed-forward coordinate field evolution",
}


class StabilityError(ValueError):
    pass


class SnapshotError(ValueError):
    pass


# -- stepping --------------------------------------------------------------

def _sigma(direction):
    if direction == "forward":
        return -1.0
    if direction == "backward":
        return 1.0
    raise ValueError(f"direction must be forward or backward, not {direction!r}")


def physical_spacing(state: HypersurfaceState) -> float:
    """Smallest metric length of a grid step."""
    hs = state.grid.spacing
    lens = [np.sqrt(state.g[..., i, i]) * hs[i] for i in range(state.n)]
    return float(min(l.min() for l in lens))


def stability_bound(state: HypersurfaceState, kappa=0.25) -> float:
    return kappa * physical_spacing(state) ** 2


def normal_velocity(state: HypersurfaceState, direction="forward"):
    return _sigma(direction) * state.H[..., None] * state.xi


def step_immersion(im: ParametrizedImmersion, dt, direction="forward", method="euler",
                   kappa=0.25, state=None) -> ParametrizedImmersion:
    """One explicit step of ``dF/dt = -H xi`` (``+H xi`` backward)."""
    st = state if state is not None else fundamental_forms(im)
    bound = stability_bound(st, kappa)
    if dt > bound:
        raise StabilityError(f"dt = {dt:g} exceeds the stability bound {bound:g}")
    v1 = normal_velocity(st, direction)
    if method == "euler":
        new = im.points + dt * v1
    elif method == "rk2":
        mid = im.with_points(im.points + dt * v1)
        v2 = normal_velocity(fundamental_forms(mid), direction)
        new = im.points + 0.5 * dt * (v1 + v2)
    else:
        raise ValueError(f"unknown stepper {method!r}")
    out = im.with_points(new)
    g = np.einsum("...ia,...ab,...jb->...ij", *_tangent_gram(out), optimize=True)
    if np.any(np.linalg.det(g) <= im.gram_eps):
        raise DegenerateImmersionError("immersion degenerated during the step")
    return out


def _tangent_gram(im):
    from .immersion import grid_gradient

    dF = grid_gradient(im.points, im.grid)
    return dF, im.ambient.metric(im.points), dF


# -- traces ----------------------------------------------------------------

@dataclass
class FlowTrace:
    """Snapshots of a flow; states are built lazily and cached."""

    times: list = field(default_factory=list)
    immersions: list = field(default_factory=list)
    spectra: list = field(default_factory=list)
    residuals: dict = field(default_factory=dict)
    c1: float | None = None
    label: str = ""
    direction: str = "forward"
    _states: dict = field(default_factory=dict, repr=False)

    def append(self, t, immersion=None, spectrum=None):
        if self.times and not t > self.times[-1]:
            raise ValueError("times must be strictly increasing")
        self.times.append(float(t))
        self.immersions.append(immersion)
        self.spectra.append(spectrum)

    def __len__(self):
        return len(self.times)

    def state(self, k) -> HypersurfaceState:
        if self.immersions[k] is None:
            raise SnapshotError("trace has no immersion at this index")
        if k not in self._states:
            self._states[k] = fundamental_forms(self.immersions[k])
        return self._states[k]

    def forget(self, keep=()):
        for k in list(self._states):
            if k not in keep:
                del self._states[k]

    @property
    def dt(self) -> float:
        d = np.diff(self.times)
        if len(d) == 0:
            raise SnapshotError("need at least two snapshots")
        if np.ptp(d) > 1e-9 * d.mean():
            raise SnapshotError("snapshots are not equally spaced")
        return float(d.mean())


def run_pde_flow(im, dt, steps, direction="forward", method="rk2", kappa=0.25, label="") -> FlowTrace:
    if steps > 200:
        raise ValueError("PDE runs are limited to 200 steps; use the reduced flow for long horizons")
    trace = FlowTrace(label=label or im.name, direction=direction)
    trace.append(0.0, im)
    for k in range(steps):
        im = step_immersion(im, dt, direction, method, kappa, state=trace.state(k))
        trace.append((k + 1) * dt, im)
        trace.forget(keep=(k + 1,))
    trace.forget()
    return trace


def parallel_trace(builder, trajectory, label="") -> FlowTrace:
    """Trace of ``f_t = f^{r(t)}`` with ``builder(r)`` the grid immersion at offset r."""
    trace = FlowTrace(label=label, direction=trajectory.direction)
    for t, r, spec in zip(trajectory.ts, trajectory.rs, trajectory.spectra):
        trace.append(t, builder(float(r)), spec)
    return trace


# -- evolution equations ---------------------------------------------------

def _tr(x):
    return np.trace(x, axis1=-2, axis2=-1)


def _sc(x):
    return np.asarray(x)[..., None, None]


@dataclass(frozen=True)
class EvolutionEquation:
    """One evolution equation; ``variant`` picks the form of the right-hand
    side ("printed" as commonly stated, "rederived" in this package's
    conventions) and ``divisor`` the reading of the Einstein constant
    (scalar curvature over the ambient or the hypersurface dimension)."""

    tag: str
    variant: str = "printed"
    divisor: str = "ambient"

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown equation tag {self.tag!r}")
        if self.variant not in ("printed", "rederived"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.divisor not in ("ambient", "hypersurface"):
            raise ValueError(f"unknown divisor reading {self.divisor!r}")

    @property
    def title(self):
        return TITLES[self.tag]

    def einstein(self, st: HypersurfaceState) -> float:
        d = st.ambient.dim if self.divisor == "ambient" else st.n
        return st.ambient.scalar_curvature / d

    def quantity(self, st: HypersurfaceState):
        return {
            "metric": lambda: st.g,
            "normal": lambda: st.xi,
            "shape": lambda: st.A,
            "mean": lambda: st.H,
            "jacobi": lambda: st.j,
            "commutator": lambda: st.S,
            "gap": lambda: st.rho,
        }[self.tag]()

    def rhs(self, st: HypersurfaceState):
        return getattr(self, "_rhs_" + self.tag)(st)

    def _rhs_metric(self, st):
        return -2 * st.H[..., None, None] * st.h

    def _rhs_normal(self, st):
        grad_h = np.einsum("...ij,...j->...i", st.ginv, st.partial(st.H))
        push = np.einsum("...i,...ia->...a", grad_h, st.tangents)
        return -push if self.variant == "printed" else push

    def _rhs_shape(self, st):
        A, j = st.A, st.j
        tr_a2 = _tr(A @ A)
        K = self.einstein(st)
        inner = ta.curvature_trace_inner(st.riemann, A, st.g)
        return (
            st.lap_a
            + _sc(tr_a2 + _tr(j)) * A
            + 2 * A @ A @ A
            - 2 * _sc(tr_a2) * A
            - 2 * K * A
            + A @ j
            + j @ A
            + 2 * inner
        )

    def _rhs_mean(self, st):
        return st.lap_h + (_tr(st.A @ st.A) + _tr(st.j)) * st.H

    def _rhs_jacobi(self, st):
        A, j, H = st.A, st.j, st.H
        A2 = A @ A
        tr_a2, tr_a3 = _tr(A2), _tr(A2 @ A)
        twisted = ta.curvature_trace_twisted(st.riemann, A, st.g)
        base = st.lap_j + _sc(H) * st.S - j @ A2 + 2 * _sc(tr_a2) * j - 2 * twisted
        if self.variant == "printed":
            r_tau = np.einsum("...iyb,...b->...iy", st.r3 - st.r1, st.tau)
            return base - 2 * r_tau - 2 * _sc(tr_a3) * A + 2 * A2 @ A2
        return base - A2 @ j + 2 * _sc(tr_a3) * A - 2 * A2 @ A2

    def _commutator_parts(self, st):
        A, j = st.A, st.j
        return A, j, st.S, st.H, _tr(A @ A), _tr(j)

    def _rhs_commutator(self, st):
        A, j, S, H, tr_a2, tr_j = self._commutator_parts(st)
        if self.variant == "printed":
            sh = st.s_hat("printed")
        else:
            sh = ta.s_hat_commutator_form(A, j, st.grad_a, st.grad_j, st.riemann, st.g)
        return st.lap_s + ta.commutator_rhs(A, j, S, sh, H, tr_a2, tr_j, self.einstein(st), self.variant)

    def reaction(self, st):
        A, j, S, H, tr_a2, tr_j = self._commutator_parts(st)
        return ta.reaction_term(A, j, S, st.s_hat(self.variant), H, tr_a2, tr_j, variant=self.variant)

    def _rhs_gap(self, st):
        P = self.reaction(st)
        S = st.S
        gs = st.grad_s
        grad_sq = np.einsum("...kl,...kip,...lpi->...", st.ginv, gs, gs, optimize=True)
        return st.lap_rho + 2 * _tr(P @ S) + 2 * grad_sq


def equations(variant="printed", divisor="ambient"):
    return [EvolutionEquation(t, variant, divisor) for t in TAGS]


def _time_derivative(trace: FlowTrace, k, fd_order, getter):
    if fd_order == 2:
        if not 0 < k < len(trace) - 1:
            raise SnapshotError("central differences need snapshots on both sides")
        return (getter(k + 1) - getter(k - 1)) / (trace.times[k + 1] - trace.times[k - 1])
    if fd_order == 1:
        if not k < len(trace) - 1:
            raise SnapshotError("forward differences need a later snapshot")
        return (getter(k + 1) - getter(k)) / (trace.times[k + 1] - trace.times[k])
    raise ValueError("fd_order must be 1 or 2")


def residual_field(trace: FlowTrace, eq: EvolutionEquation, t_index, fd_order=2):
    """Signed residual ``dQ/dt - RHS`` at every grid point.

    Right-hand sides are those of the forward flow; a backward trace read
    in reversed time is a forward flow, so there the residual is
    ``dQ/dt + RHS``."""
    trace.dt  # equal spacing
    k = t_index
    st = trace.state(k)
    dq = _time_derivative(trace, k, fd_order, lambda i: eq.quantity(trace.state(i)))
    if eq.tag == "normal":
        # covariant derivative along t of the ambient vector field xi
        dF = _time_derivative(trace, k, fd_order, lambda i: trace.immersions[i].points)
        dq = dq + np.einsum("...abc,...b,...c->...a", st.ambient_christoffel, dF, st.xi, optimize=True)
    return dq + _sigma(trace.direction) * eq.rhs(st)


def residual_check(trace: FlowTrace, eq: EvolutionEquation, t_index, fd_order=2, margin=DEFAULT_MARGIN) -> float:
    res = residual_field(trace, eq, t_index, fd_order)
    sl = trace.state(t_index).interior(margin)
    return float(np.abs(res[sl]).max())


def pushforward_field(trace: FlowTrace, axis: int, t_index, fd_order=2):
    """Residual of ``D_t(F_* Z) = F_*(dZ/dt) - (Z H) xi - H F_*(A Z)`` for the
    coordinate field ``Z = d/du_axis`` (so ``dZ/dt = 0``)."""
    k = t_index
    st = trace.state(k)
    dF = _time_derivative(trace, k, fd_order, lambda i: trace.immersions[i].points)
    dFz = _time_derivative(trace, k, fd_order, lambda i: trace.state(i).tangents[..., axis, :])
    lhs = dFz + np.einsum("...abc,...b,...c->...a", st.ambient_christoffel, dF, st.tangents[..., axis, :], optimize=True)
    zh = st.partial(st.H)[..., axis]
    az = np.einsum("...i,...ia->...a", st.A[..., :, axis], st.tangents)
    rhs = -zh[..., None] * st.xi - st.H[..., None] * az
    return lhs + _sigma(trace.direction) * rhs


def pushforward_derivative_check(trace: FlowTrace, axis: int, t_index, fd_order=2, margin=DEFAULT_MARGIN) -> float:
    res = pushforward_field(trace, axis, t_index, fd_order)
    sl = trace.state(t_index).interior(margin)
    return float(np.abs(res[sl]).max())


# -- monitors --------------------------------------------------------------

def default_rho_tol(n, max_a_norm) -> float:
    return 1e-8 * n * (1 + max_a_norm**4)


@dataclass
class GapMonitor:
    times: np.ndarray
    max_rho: np.ndarray
    sup_mu: np.ndarray
    max_s_hat: np.ndarray
    h_min: np.ndarray
    h_max: np.ndarray
    max_a_norm: np.ndarray
    min_pairing: np.ndarray  # min over points of <Shat, S>
    rho_tol: float
    t_min: float | None
    mu_diverging: bool

    def rows(self):
        return [
            dict(t=t, max_rho=r, sup_mu=m, max_s_hat=s, h_min=a, h_max=b)
            for t, r, m, s, a, b in zip(self.times, self.max_rho, self.sup_mu, self.max_s_hat,
                                        self.h_min, self.h_max)
        ]

    def figure_dataset(self):
        """Two curves, max rho_t and sup mu_t against t."""
        return {"t": list(map(float, self.times)),
                "max_rho": list(map(float, self.max_rho)),
                "sup_mu": list(map(float, self.sup_mu))}


def _spectrum_monitor_row(spec):
    a, j = spec.operators()
    return dict(rho=spec.rho(), mu=0.0, s_hat=0.0, h=spec.mean_curvature,
                a_norm=float(np.sqrt(np.sum(a * a))), pairing=0.0)


def gap_monitor(trace: FlowTrace, rho_tol=None, variant="rederived", margin=DEFAULT_MARGIN,
                use_grid=True) -> GapMonitor:
    cols = {k: [] for k in ("rho", "mu", "s_hat", "h_min", "h_max", "a_norm", "pairing")}
    n = None
    for k in range(len(trace)):
        if use_grid and trace.immersions[k] is not None:
            st = trace.state(k)
            n = st.n
            sl = st.interior(margin)
            sh = st.s_hat(variant)
            cols["rho"].append(float(st.rho[sl].max()))
            cols["mu"].append(float(st.mu(variant)[sl].max()))
            cols["s_hat"].append(float(np.sqrt(np.maximum(st.operator_norm2(sh), 0))[sl].max()))
            cols["h_min"].append(float(st.H[sl].min()))
            cols["h_max"].append(float(st.H[sl].max()))
            cols["a_norm"].append(float(np.sqrt(st.operator_norm2(st.A))[sl].max()))
            cols["pairing"].append(float(ta.inner(sh, st.S, st.g)[sl].min()))
            trace.forget()
        else:
            spec = trace.spectra[k]
            n = spec.n
            row = _spectrum_monitor_row(spec)
            cols["rho"].append(row["rho"])
            cols["mu"].append(row["mu"])
            cols["s_hat"].append(row["s_hat"])
            cols["h_min"].append(row["h"])
            cols["h_max"].append(row["h"])
            cols["a_norm"].append(row["a_norm"])
            cols["pairing"].append(row["pairing"])
    arr = {k: np.array(v) for k, v in cols.items()}
    tol = rho_tol if rho_tol is not None else default_rho_tol(n, float(arr["a_norm"].max()))
    above = np.nonzero(arr["rho"] > tol)[0]
    t_min = float(trace.times[above[0]]) if len(above) else None
    mu = arr["mu"]
    # heuristic: sup mu growing geometrically over the last samples
    tail = mu[-5:]
    diverging = bool(len(tail) == 5 and np.all(np.diff(tail) > 0) and tail[-1] > 10 * max(abs(tail[0]), 1.0))
    return GapMonitor(np.array(trace.times), arr["rho"], mu, arr["s_hat"], arr["h_min"], arr["h_max"],
                      arr["a_norm"], arr["pairing"], tol, t_min, diverging)


@dataclass
class GateReport:
    gate_held: bool  # min <Shat, S> >= 0 over the trace
    rho_stayed_small: bool
    initially_adapted: bool  # rho_0 <= rho_tol, so the implication applies
    implication_instance: bool
    counterexample_candidate: bool  # informational only
    gate_violated_with_growth: bool  # informational only
    sup_mu_nonpositive: bool


def pairing_gate(monitor: GapMonitor, tol=0.0) -> GateReport:
    """Co-occurrence record of the pairing gate and a small gap; nothing is proved."""
    gate = bool(np.all(monitor.min_pairing >= -tol))
    small = bool(np.all(monitor.max_rho <= monitor.rho_tol))
    start = bool(monitor.max_rho[0] <= monitor.rho_tol)
    return GateReport(
        gate_held=gate,
        rho_stayed_small=small,
        initially_adapted=start,
        implication_instance=start and gate and small,
        counterexample_candidate=start and gate and not small,
        gate_violated_with_growth=not gate and not small,
        sup_mu_nonpositive=bool(np.all(monitor.sup_mu <= 0)),
    )


def reduced_mean_check(family, trajectory, dr=1e-5) -> float:
    """Largest relative gap between the mean curvature equation in reduced
    form, ``(|A|^2 + Tr j) H`` (the Laplacian vanishes), and the chain rule
    ``dH/dr * dr/dt`` with ``dH/dr`` a central difference of the closed-form
    parallel mean curvature."""
    from .parallel import mean_curvature_profile

    sigma = _sigma(trajectory.direction)
    lo, hi = family.r_domain
    worst = 0.0
    for r, spec in zip(trajectory.rs, trajectory.spectra):
        if not lo + 2 * dr < r < hi - 2 * dr:
            continue
        H = spec.mean_curvature
        rhs = -sigma * float(np.sum(spec.lambdas**2) + np.sum(spec.nus)) * H
        dh_dr = (mean_curvature_profile(family, r + dr) - mean_curvature_profile(family, r - dr)) / (2 * dr)
        chain = dh_dr * sigma * H
        worst = max(worst, abs(rhs - chain) / max(abs(rhs), 1.0))
    return worst


# -- maximum principle -----------------------------------------------------

@dataclass
class BoundReport:
    c1: float
    passed: bool
    max_ratio: float  # max over steps of max rho_t / (max rho_0 e^{c1 t})
    rescaled_monotone: bool
    equality_error: float | None  # relative error when rho_0 is constant
    strict_after_start: bool
    steps: int
    times: np.ndarray = field(repr=False, default=None)
    maxima: np.ndarray = field(repr=False, default=None)

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


def periodic_laplacian(u, h):
    out = np.zeros_like(u)
    for ax in range(u.ndim):
        out += (np.roll(u, 1, ax) - 2 * u + np.roll(u, -1, ax)) / h**2
    return out


def max_principle_check(n, c1, rho0, t_max, dt, spacing=None, kappa=0.25) -> BoundReport:
    """Integrate ``d rho/dt = Lap rho + c1 rho`` on a flat periodic grid and
    compare with ``max(rho_0) e^{c1 t}``.

    Each step is an explicit diffusion step followed by the exact reaction
    factor ``e^{c1 dt}``; under the stability bound the diffusion step is a
    convex average, so the discrete maximum principle holds step by step.
    """
    rho = np.array(rho0, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rho_0 must be non-negative")
    h = spacing if spacing is not None else 2 * np.pi / rho.shape[0]
    d = rho.ndim
    if dt > kappa * h * h / (d / 2) + 1e-15:
        raise StabilityError(f"dt = {dt:g} violates the stability bound {kappa * h * h / (d / 2):g}")
    steps = int(round(t_max / dt))
    grow = math.exp(c1 * dt)
    m0 = float(rho.max())
    constant = bool(np.ptp(rho) == 0.0)
    ratios, maxima, times = [], [m0], [0.0]
    prev_hat = m0
    monotone = True
    strict = True
    for k in range(1, steps + 1):
        rho = (rho + dt * periodic_laplacian(rho, h)) * grow
        t = k * dt
        bound = m0 * math.exp(c1 * t)
        mx = float(rho.max())
        maxima.append(mx)
        times.append(t)
        ratios.append(mx / bound if bound > 0 else (0.0 if mx == 0 else math.inf))
        hat = mx * math.exp(-c1 * t)
        if hat > prev_hat * (1 + 1e-12) + 1e-300:
            monotone = False
        prev_hat = hat
        if bound > 0 and not mx < bound * (1 - 1e-12):
            strict = False
    max_ratio = max(ratios) if ratios else 0.0
    passed = max_ratio <= 1 + 1e-12 and monotone
    eq_err = None
    if constant:
        eq_err = abs(maxima[-1] - m0 * math.exp(c1 * times[-1])) / max(m0 * math.exp(c1 * times[-1]), 1e-300)
    return BoundReport(c1, passed, max_ratio, monotone, eq_err, strict, steps,
                       np.array(times), np.array(maxima))
