"""Parallel hypersurfaces of curvature-adapted, constant-eigenvalue families.

Along the normal geodesic ``t -> exp(t xi)`` of a curvature-adapted
hypersurface in a locally symmetric space, the Jacobi field generated by an
eigenvector ``e`` (``A e = lam e``, ``R(xi) e = nu e``) is
``c(t) P_t e`` with ``c(t) = cos(t sqrt(nu)) + lam sin(t sqrt(nu)) / sqrt(nu)``.
The end-point map ``f^r`` therefore has principal curvatures
``c'(r) / c(r)`` (same eigenvectors) and unchanged normal Jacobi
eigenvalues. ``r`` is measured along ``+xi``; focal points are zeros of ``c``.

Mean curvature flow of such a family stays in the family, ``f_t = f^{r(t)}``
with ``dr/dt = -H(r)`` (forward) or ``+H(r)`` (backward).
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

from .ambient import jacobi_closed_form, jacobi_closed_form_derivative
from .tensor_algebra import commutator, gap

FOCAL_DELTA = 1e-6


class FocalPointError(ArithmeticError):
    def __init__(self, message, r):
        super().__init__(message)
        self.r = r


def jacobi_coefficient(lam, nu, r):
    # c(r) with c(0) = 1, c'(0) = lam
    return jacobi_closed_form(-np.asarray(lam, float), nu, r)


def parallel_eigenvalue(lam, nu, r, delta=FOCAL_DELTA):
    """Principal curvature of ``f^r`` in the direction of a (lam, nu) eigenvector."""
    c = jacobi_coefficient(lam, nu, r)
    bad = np.abs(c) < delta
    if np.any(bad):
        rr = np.broadcast_to(np.asarray(r, float), np.shape(bad))
        r_bad = float(rr[bad].flat[0]) if np.ndim(bad) else float(r)
        raise FocalPointError(f"focal point at r = {r_bad:.12g}", r_bad)
    out = jacobi_closed_form_derivative(-np.asarray(lam, float), nu, r) / c
    return out


def focal_distance(lam, nu, direction=1):
    """First zero of ``c`` in the given direction of ``r`` (``inf`` if none)."""
    lam = float(lam) * direction
    nu = float(nu)
    if nu > 0:
        a = math.sqrt(nu)
        return direction * (math.pi - math.atan2(a, lam)) / a
    if nu == 0:
        return direction * (-1.0 / lam) if lam < 0 else direction * math.inf
    a = math.sqrt(-nu)
    if lam < -a:
        return direction * math.atanh(-a / lam) / a
    return direction * math.inf


@dataclass(frozen=True)
class IsoparametricSpectrum:
    entries: tuple  # ((lam, nu, mult), ...)
    ambient: str = ""

    def __post_init__(self):
        entries = tuple((float(l), float(v), int(m)) for l, v, m in self.entries)
        if not entries:
            raise ValueError("spectrum needs at least one entry")
        if any(m <= 0 for _, _, m in entries):
            raise ValueError("multiplicities must be positive")
        object.__setattr__(self, "entries", entries)

    @property
    def n(self) -> int:
        return sum(m for _, _, m in self.entries)

    @property
    def lambdas(self) -> np.ndarray:
        return np.repeat([e[0] for e in self.entries], [e[2] for e in self.entries])

    @property
    def nus(self) -> np.ndarray:
        return np.repeat([e[1] for e in self.entries], [e[2] for e in self.entries])

    @property
    def mean_curvature(self) -> float:
        return float(sum(m * l for l, _, m in self.entries))

    def operators(self):
        return np.diag(self.lambdas), np.diag(self.nus)

    def rho(self) -> float:
        a, j = self.operators()
        return float(gap(commutator(a, j)))

    @classmethod
    def from_text(cls, text: str, ambient: str = "") -> "IsoparametricSpectrum":
        entries = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = re.sub(r"[(),]", " ", line).split()
            if len(parts) != 3:
                raise ValueError(f"bad spectrum line {line!r}")
            entries.append((float(parts[0]), float(parts[1]), int(parts[2])))
        return cls(tuple(entries), ambient)

    @classmethod
    def load(cls, path, ambient: str = "") -> "IsoparametricSpectrum":
        return cls.from_text(Path(path).read_text(), ambient)

    def to_text(self) -> str:
        return "".join(f"({l:.17g} {v:.17g} {m})\n" for l, v, m in self.entries)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())


def jacobi_invariance(spectrum: IsoparametricSpectrum, r, delta=FOCAL_DELTA) -> IsoparametricSpectrum:
    return IsoparametricSpectrum(
        tuple((float(parallel_eigenvalue(l, v, r, delta)), v, m) for l, v, m in spectrum.entries),
        spectrum.ambient,
    )


@dataclass
class ParallelFamily:
    spectrum: IsoparametricSpectrum
    delta: float = FOCAL_DELTA
    _h_cache: dict = field(default_factory=dict, repr=False)

    @property
    def r_domain(self) -> tuple:
        lo = max((focal_distance(l, v, -1) for l, v, _ in self.spectrum.entries), default=-math.inf)
        hi = min((focal_distance(l, v, 1) for l, v, _ in self.spectrum.entries), default=math.inf)
        return lo, hi

    def at(self, r) -> IsoparametricSpectrum:
        return jacobi_invariance(self.spectrum, r, self.delta)


def mean_curvature_profile(family: ParallelFamily, r) -> float:
    key = float(r)
    if key not in family._h_cache:
        if len(family._h_cache) > 4096:
            family._h_cache.clear()
        family._h_cache[key] = float(
            sum(m * parallel_eigenvalue(l, v, r, family.delta) for l, v, m in family.spectrum.entries)
        )
    return family._h_cache[key]


# -- reduced flow ----------------------------------------------------------

@dataclass
class Trajectory:
    ts: np.ndarray
    rs: np.ndarray
    Hs: np.ndarray
    spectra: list
    direction: str
    stop_reason: str  # "t_max" | "focal"
    collapse_time: float | None = None
    collapse_bracket: tuple | None = None
    focal_radius: float | None = None

    def radius_offsets(self) -> np.ndarray:
        return self.rs


def _sigma(direction: str) -> float:
    if direction == "forward":
        return -1.0
    if direction == "backward":
        return 1.0
    raise ValueError(f"direction must be forward or backward, not {direction!r}")


def _focal_bracket(family: ParallelFamily, r_from: float, r_to: float, width=1e-13):
    """Bisect for the first zero of the product of Jacobi coefficients."""
    def prod(r):
        return float(np.prod([jacobi_coefficient(l, v, r) ** m for l, v, m in family.spectrum.entries]))

    lo, hi = r_from, r_to
    s_lo = np.sign(prod(lo))
    while abs(hi - lo) > width:
        mid = 0.5 * (lo + hi)
        if np.sign(prod(mid)) == s_lo and prod(mid) != 0:
            lo = mid
        else:
            hi = mid
    return lo, hi


def _time_to(family, sigma, r_a, r_b):
    """Flow time needed to move from ``r_a`` to ``r_b`` (dt = dr / (sigma H))."""
    def f(r):
        c = [jacobi_coefficient(l, v, r) for l, v, _ in family.spectrum.entries]
        dc = [jacobi_closed_form_derivative(-l, v, r) for l, v, _ in family.spectrum.entries]
        h = sum(m * d / cc for (_, _, m), d, cc in zip(family.spectrum.entries, dc, c))
        return 1.0 / (sigma * h)

    val, _ = integrate.quad(f, r_a, r_b, limit=200, epsabs=1e-14, epsrel=1e-12)
    return val


def mean_curvature_slope(family: ParallelFamily, r) -> float:
    """``dH/dr``; each eigenvalue obeys the Riccati law ``lam' = -nu - lam^2``."""
    lam = [parallel_eigenvalue(l, v, r, family.delta) for l, v, _ in family.spectrum.entries]
    return float(-sum(m * (v + x * x) for x, (_, v, m) in zip(lam, family.spectrum.entries)))


def flow_ode(family: ParallelFamily, t_max: float, dt: float, direction: str = "forward",
             stiffness=0.05, max_substeps=1024) -> Trajectory:
    """RK4 for ``dr/dt = sigma H(r)``; stops at ``t_max`` or on focal approach.

    When ``dt |dH/dr|`` exceeds ``stiffness`` the step is either split into
    substeps (output stays on the ``dt`` lattice) or, if a focal radius is
    close, the run stops. Close means the exact remaining time ``t_rem``
    satisfies ``t_rem |dH/dr| < 2``; near a focal pole that product tends to
    ``1/2`` whatever the multiplicity, while an oversized step far from any
    pole gives a large product. After a stop the remaining time to the
    focal radius is integrated exactly from the last accepted state.
    """
    if dt <= 0 or t_max < 0:
        raise ValueError("need dt > 0 and t_max >= 0")
    sigma = _sigma(direction)
    H = lambda r: mean_curvature_profile(family, r)  # noqa: E731
    lo, hi = family.r_domain

    def rk4(r, h):
        k1 = sigma * H(r)
        k2 = sigma * H(r + 0.5 * h * k1)
        k3 = sigma * H(r + 0.5 * h * k2)
        k4 = sigma * H(r + h * k3)
        r_new = r + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        if not lo < r_new < hi:
            raise FocalPointError("step crosses a focal radius", r_new)
        return r_new

    def near_focal(r, slope):
        target = hi if sigma * H(r) > 0 else lo
        if not math.isfinite(target):
            return False
        r_lo, _ = _focal_bracket(family, r, target)
        probe = [H(x) for x in np.linspace(r, r_lo, 65)[:-1]]
        if min(probe) <= 0 <= max(probe):
            return False  # H vanishes first: the flow never reaches the focal radius
        return abs(_time_to(family, sigma, r, r_lo)) * abs(slope) < 2.0

    ts, rs, hs = [0.0], [0.0], [H(0.0)]
    spectra = [family.at(0.0)]
    r, t = 0.0, 0.0
    steps = int(round(t_max / dt))
    stop = "t_max"
    for k in range(steps):
        try:
            slope = mean_curvature_slope(family, r)
            sub = 1
            while dt / sub * abs(slope) > stiffness:
                if sub == 1 and near_focal(r, slope):
                    raise FocalPointError("approaching a focal radius", r)
                sub *= 2
                if sub > max_substeps:
                    raise FocalPointError("step too stiff", r)
            r_new = r
            for _ in range(sub):
                r_new = rk4(r_new, dt / sub)
            h_new = H(r_new)
            spec = family.at(r_new)
        except FocalPointError:
            stop = "focal"
            break
        r, t = r_new, (k + 1) * dt
        ts.append(t)
        rs.append(r)
        hs.append(h_new)
        spectra.append(spec)
    traj = Trajectory(np.array(ts), np.array(rs), np.array(hs), spectra, direction, stop)
    if stop == "focal":
        heading = np.sign(sigma * hs[-1])
        target = hi if heading > 0 else lo
        r_lo, r_hi = _focal_bracket(family, r, target)
        t_lo = t + _time_to(family, sigma, r, r_lo)
        t_hi = t + _time_to(family, sigma, r, r_hi)
        traj.focal_radius = 0.5 * (r_lo + r_hi)
        traj.collapse_bracket = (min(t_lo, t_hi), max(t_lo, t_hi))
        traj.collapse_time = 0.5 * (t_lo + t_hi)
    return traj


@dataclass
class InvarianceReport:
    rho_max: float
    nu_constant: bool
    mult_constant: bool
    h_spread: float  # spatial spread of H (0 for spectrum-only families)
    h_monotone: bool
    rho_tol: float
    rows: list = field(repr=False, default_factory=list)

    @property
    def ok(self) -> bool:
        return (self.nu_constant and self.mult_constant and self.h_spread == 0.0
                and self.rho_max <= self.rho_tol)


def invariance_monitor(family: ParallelFamily, traj: Trajectory, rho_tol=None) -> InvarianceReport:
    nus0 = family.spectrum.nus
    mult0 = [m for _, _, m in family.spectrum.entries]
    rows, rho_max, nu_ok, mult_ok = [], 0.0, True, True
    for t, r, h, spec in zip(traj.ts, traj.rs, traj.Hs, traj.spectra):
        rho = spec.rho()
        rho_max = max(rho_max, rho)
        nu_ok &= bool(np.array_equal(spec.nus, nus0))
        mult_ok &= [m for _, _, m in spec.entries] == mult0
        rows.append((t, r, h, rho))
    dh = np.diff(traj.Hs)
    if rho_tol is None:
        a_max = max(float(np.abs(s.lambdas).max()) for s in traj.spectra)
        rho_tol = 1e-8 * family.spectrum.n * (1 + a_max**4)
    return InvarianceReport(rho_max, nu_ok, mult_ok, 0.0, bool(np.all(dh >= 0) or np.all(dh <= 0)),
                          rho_tol, rows)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    n = traj.spectra[0].n
    header = ["t", "r", "H"] + [f"lambda_{i + 1}" for i in range(n)] + [f"nu_{i + 1}" for i in range(n)] + ["rho"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for t, r, h, spec in zip(traj.ts, traj.rs, traj.Hs, traj.spectra):
            w.writerow([repr(float(x)) for x in (t, r, h, *spec.lambdas, *spec.nus, spec.rho())])


# -- end-point map on grids ------------------------------------------------

def endpoint_points(model, points, xi, r, steps=None):
    """Shoot normal geodesics ``exp(r xi)`` from every grid point (RK4)."""
    x = np.array(points, float)
    v = np.array(xi, float)
    if r == 0:
        return x
    steps = steps or max(16, int(math.ceil(abs(r) / 2e-3)))
    h = r / steps

    def acc(x, v):
        return -np.einsum("...abc,...b,...c->...a", model.christoffel(x), v, v)

    for _ in range(steps):
        k1x, k1v = v, acc(x, v)
        k2x, k2v = v + 0.5 * h * k1v, acc(x + 0.5 * h * k1x, v + 0.5 * h * k1v)
        k3x, k3v = v + 0.5 * h * k2v, acc(x + 0.5 * h * k2x, v + 0.5 * h * k2v)
        k4x, k4v = v + h * k3v, acc(x + h * k3x, v + h * k3v)
        x = x + h * (k1x + 2 * k2x + 2 * k3x + k4x) / 6
        v = v + h * (k1v + 2 * k2v + 2 * k3v + k4v) / 6
    return x


def endpoint_immersion(im, r, xi=None):
    """The parallel hypersurface ``f^r`` of a grid immersion."""
    from .immersion import fundamental_forms

    if xi is None:
        xi = fundamental_forms(im).xi
    return im.with_points(endpoint_points(im.ambient, im.points, xi, r))
