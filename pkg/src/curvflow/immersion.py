"""Finite-difference geometry of hypersurfaces given on structured grids.

A hypersurface patch is a map from a rectangular parameter lattice into an
ambient chart. All pointwise data (metric, unit normal, second fundamental
form, shape operator, normal Jacobi operator, slot tensors, intrinsic
curvature, covariant derivatives and Laplacians) are computed with centered
second-order differences; non-periodic axes fall back to one-sided
second-order stencils at the edges and reports drop a margin there.

Sign conventions: ``xi`` completes the coordinate tangents to a positively
oriented frame (times ``orientation``); the shape operator is
``A X = (D_X xi)^T`` and ``h(X, Y) = -<D_X Y, xi>`` (the data "for
-xi"), so a round sphere with outward ``xi`` has ``H > 0`` and shrinks
under ``dF/dt = -H xi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import tensor_algebra as ta
from .ambient import AmbientModel, ChartExitError

DEFAULT_MARGIN = 0.45  # parameter distance excluded at non-periodic edges


class DegenerateImmersionError(ValueError):
    pass


class StencilError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Rectangular parameter lattice; ``periodic`` axes exclude the endpoint."""

    lower: tuple
    upper: tuple
    shape: tuple
    periodic: tuple = None

    def __post_init__(self):
        n = len(self.shape)
        if self.periodic is None:
            object.__setattr__(self, "periodic", (False,) * n)
        if not (len(self.lower) == len(self.upper) == len(self.periodic) == n):
            raise ValueError("grid description has inconsistent lengths")
        if n not in (2, 3):
            raise ValueError("hypersurface dimension must be 2 or 3")

    @property
    def n(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> tuple:
        return tuple(
            (hi - lo) / (m if per else m - 1)
            for lo, hi, m, per in zip(self.lower, self.upper, self.shape, self.periodic)
        )

    def axes(self):
        return [
            lo + h * np.arange(m)
            for lo, h, m in zip(self.lower, self.spacing, self.shape)
        ]

    def mesh(self) -> np.ndarray:
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def refined(self, factor: int = 2) -> "Grid":
        shape = tuple(
            m * factor if per else (m - 1) * factor + 1
            for m, per in zip(self.shape, self.periodic)
        )
        return Grid(self.lower, self.upper, shape, self.periodic)

    def interior(self, margin=DEFAULT_MARGIN) -> tuple:
        """Slices dropping ``margin`` points from non-periodic ends; a float
        margin is a parameter distance, so refined grids cover the same box."""
        out = []
        for m, h, per in zip(self.shape, self.spacing, self.periodic):
            if per:
                out.append(slice(None))
                continue
            k = int(np.ceil(margin / h - 1e-9)) if isinstance(margin, float) else int(margin)
            out.append(slice(k, m - k))
        return tuple(out)


def diff(arr, axis, h, periodic):
    """First derivative along grid ``axis`` (leading axes are the grid)."""
    if periodic:
        return (np.roll(arr, -1, axis=axis) - np.roll(arr, 1, axis=axis)) / (2 * h)
    if arr.shape[axis] < 3:
        raise StencilError("grid too small for the stencil")
    return np.gradient(arr, h, axis=axis, edge_order=2)


def diff2(arr, axis, h, periodic):
    """Compact second derivative along one axis."""
    if periodic:
        return (np.roll(arr, -1, axis=axis) - 2 * arr + np.roll(arr, 1, axis=axis)) / h**2
    out = diff(diff(arr, axis, h, False), axis, h, False)
    sl = [slice(None)] * arr.ndim
    lo, mid, hi = list(sl), list(sl), list(sl)
    lo[axis], mid[axis], hi[axis] = slice(0, -2), slice(1, -1), slice(2, None)
    inner = list(sl)
    inner[axis] = slice(1, -1)
    out[tuple(inner)] = (arr[tuple(hi)] - 2 * arr[tuple(mid)] + arr[tuple(lo)]) / h**2
    return out


def grid_gradient(arr, grid: Grid):
    """Stack of partial derivatives, new axis inserted right after the grid axes."""
    n = grid.n
    parts = [diff(arr, k, grid.spacing[k], grid.periodic[k]) for k in range(n)]
    return np.stack(parts, axis=n)


@dataclass
class ParametrizedImmersion:
    grid: Grid
    points: np.ndarray  # grid.shape + (N,)
    ambient: AmbientModel
    orientation: int = 1
    gram_eps: float = 1e-12
    name: str = "custom"

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.shape != tuple(self.grid.shape) + (self.ambient.dim,):
            raise ValueError(
                f"points shape {self.points.shape} does not match grid {self.grid.shape}"
                f" and ambient dimension {self.ambient.dim}"
            )
        if self.ambient.dim != self.grid.n + 1:
            raise ValueError("ambient dimension must be hypersurface dimension + 1")
        if not np.all(self.ambient.in_domain(self.points)):
            raise ChartExitError("immersion leaves the chart domain")

    def with_points(self, points) -> "ParametrizedImmersion":
        return ParametrizedImmersion(
            self.grid, points, self.ambient, self.orientation, self.gram_eps, self.name
        )


def _cofactor_normal(tangents):
    """Covector annihilating the rows of ``tangents[..., n, N]`` such that
    ``det[t_1, ..., t_n, v] = <omega, v>``."""
    n, N = tangents.shape[-2:]
    omega = np.empty(tangents.shape[:-2] + (N,))
    for a in range(N):
        minor = np.delete(tangents, a, axis=-1)
        omega[..., a] = (-1) ** (a + N - 1) * np.linalg.det(minor)
    return omega


@dataclass
class HypersurfaceState:
    """All pointwise data of an immersion at one time.

    Array layout follows :mod:`curvflow.tensor_algebra`; leading axes are
    the grid axes.
    """

    immersion: ParametrizedImmersion
    tangents: np.ndarray  # [..., i, a] = d_i F^a
    g: np.ndarray
    ginv: np.ndarray
    xi: np.ndarray
    h: np.ndarray
    A: np.ndarray
    H: np.ndarray
    j: np.ndarray
    r1: np.ndarray
    r3: np.ndarray
    r_tan: np.ndarray  # tangential ambient curvature [..., l, a, b, c]
    christoffel: np.ndarray  # intrinsic [..., k, i, j] = Gamma^k_ij
    ambient_christoffel: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def grid(self) -> Grid:
        return self.immersion.grid

    @property
    def ambient(self) -> AmbientModel:
        return self.immersion.ambient

    @property
    def n(self) -> int:
        return self.grid.n

    def interior(self, margin=DEFAULT_MARGIN):
        return self.grid.interior(margin)

    # -- covariant calculus ---------------------------------------------
    def partial(self, arr):
        return grid_gradient(arr, self.grid)

    def nabla_11(self, T):
        """``out[..., k, i, j] = (nabla_k T)^i_j`` for a (1,1) field."""
        d = self.partial(T)
        G = self.christoffel
        return d + np.einsum("...ikm,...mj->...kij", G, T) - np.einsum(
            "...mkj,...im->...kij", G, T
        )

    def nabla_12(self, W):
        """Covariant derivative of ``W[..., k, i, j] = (nabla_k T)^i_j``:
        ``out[..., l, k, i, j] = (nabla_l nabla_k T)^i_j``."""
        d = self.partial(W)
        G = self.christoffel
        return (
            d
            - np.einsum("...mlk,...mij->...lkij", G, W)
            + np.einsum("...ilm,...kmj->...lkij", G, W)
            - np.einsum("...mlj,...kim->...lkij", G, W)
        )

    def laplacian_11(self, T, nabla_T=None):
        W = self.nabla_11(T) if nabla_T is None else nabla_T
        return np.einsum("...lk,...lkij->...ij", self.ginv, self.nabla_12(W))

    def gradient_scalar(self, f):
        return self.partial(f)

    def laplacian_scalar(self, f):
        df = self.partial(f)
        hess = self.partial(df) - np.einsum("...mkl,...m->...kl", self.christoffel, df)
        return np.einsum("...kl,...kl->...", self.ginv, hess)

    # -- cached derived data --------------------------------------------
    def _memo(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def riemann(self):
        """Intrinsic curvature ``[..., l, a, b, c]`` from differenced Christoffels."""

        def build():
            G = self.christoffel
            dG = self.partial(G)  # [..., a, l, b, c] = d_a Gamma^l_bc
            return (
                np.einsum("...albc->...labc", dG)
                - np.einsum("...blac->...labc", dG)
                + np.einsum("...lam,...mbc->...labc", G, G)
                - np.einsum("...lbm,...mac->...labc", G, G)
            )

        return self._memo("riemann", build)

    @property
    def grad_a(self):
        return self._memo("grad_a", lambda: self.nabla_11(self.A))

    @property
    def grad_j(self):
        return self._memo("grad_j", lambda: self.nabla_11(self.j))

    @property
    def lap_a(self):
        return self._memo("lap_a", lambda: self.laplacian_11(self.A, self.grad_a))

    @property
    def lap_j(self):
        return self._memo("lap_j", lambda: self.laplacian_11(self.j, self.grad_j))

    @property
    def hess_j(self):
        return self._memo("hess_j", lambda: self.nabla_12(self.grad_j))

    @property
    def S(self):
        return self._memo("S", lambda: ta.commutator(self.A, self.j))

    @property
    def grad_s(self):
        return self._memo("grad_s", lambda: self.nabla_11(self.S))

    @property
    def lap_s(self):
        return self._memo("lap_s", lambda: self.laplacian_11(self.S, self.grad_s))

    @property
    def rho(self):
        return self._memo("rho", lambda: ta.gap(self.S))

    @property
    def lap_h(self):
        return self._memo("lap_h", lambda: self.laplacian_scalar(self.H))

    @property
    def lap_rho(self):
        return self._memo("lap_rho", lambda: self.laplacian_scalar(self.rho))

    @property
    def tau(self):
        return self._memo("tau", lambda: ta.traced_gradient(self.grad_a, self.g))

    @property
    def curv_action(self):
        return self._memo(
            "curv_action", lambda: ta.curvature_trace_action(self.riemann, self.A, self.g)
        )

    def s_hat(self, variant="printed"):
        if variant == "printed":
            return self._memo(
                "s_hat_printed",
                lambda: ta.s_hat(
                    self.A, self.j, self.grad_a, self.grad_j, self.curv_action,
                    self.r3 - self.r1, self.g, check=False,
                ),
            )
        return self._memo(
            "s_hat_rederived",
            lambda: ta.s_hat_rederived(self.A, self.j, self.grad_a, self.grad_j, self.riemann, self.g),
        )

    def mu(self, variant="printed"):
        return ta.mu(self.s_hat(variant), self.S, self.g)

    def operator_norm2(self, T):
        return ta.inner(T, T, self.g)


def fundamental_forms(im: ParametrizedImmersion) -> HypersurfaceState:
    grid, model = im.grid, im.ambient
    F = im.points
    n = grid.n
    dF = grid_gradient(F, grid)  # [..., i, a]
    ddF = np.empty(F.shape[:-1] + (n, n, model.dim))
    for i in range(n):
        for k in range(n):
            if i == k:
                ddF[..., i, i, :] = diff2(F, i, grid.spacing[i], grid.periodic[i])
            elif k > i:
                ddF[..., i, k, :] = diff(dF[..., i, :], k, grid.spacing[k], grid.periodic[k])
                ddF[..., k, i, :] = ddF[..., i, k, :]
    G = model.metric(F)
    gam_amb = model.christoffel(F)
    g = np.einsum("...ia,...ab,...jb->...ij", dF, G, dF, optimize=True)
    det = np.linalg.det(g)
    if np.any(det <= im.gram_eps):
        raise DegenerateImmersionError("Gram determinant below threshold")
    ginv = np.linalg.inv(g)
    omega = _cofactor_normal(dF)
    v = np.linalg.solve(G, omega[..., None])[..., 0]
    xi = im.orientation * v / np.sqrt(np.einsum("...a,...a->...", omega, v))[..., None]
    # D_i F_j = F_ij + Gamma(F_i, F_j)
    DF = ddF + np.einsum("...abc,...ib,...jc->...ija", gam_amb, dF, dF, optimize=True)
    GDF = np.einsum("...ija,...ab->...ijb", DF, G)
    h = -np.einsum("...ijb,...b->...ij", GDF, xi)
    christ = np.einsum("...kl,...ijb,...lb->...kij", ginv, GDF, dF, optimize=True)
    A = ginv @ h
    H = np.trace(A, axis1=-2, axis2=-1)
    rm = model.riemann(F)
    # tangential projection of ambient vectors onto coordinate components
    proj = np.einsum("...il,...la,...ab->...ib", ginv, dF, G, optimize=True)
    j = np.einsum("...ib,...blcd,...kl,...c,...d->...ik", proj, rm, dF, xi, xi, optimize=True)
    r1 = np.einsum("...ib,...blcd,...l,...xc,...yd->...ixy", proj, rm, xi, dF, dF, optimize=True)
    r3 = np.einsum("...ib,...blcd,...xl,...yc,...d->...ixy", proj, rm, dF, dF, xi, optimize=True)
    r_tan = np.einsum("...ib,...blcd,...xl,...yc,...zd->...ixyz", proj, rm, dF, dF, dF, optimize=True)
    return HypersurfaceState(
        immersion=im, tangents=dF, g=g, ginv=ginv, xi=xi, h=h, A=A, H=H, j=j,
        r1=r1, r3=r3, r_tan=r_tan, christoffel=christ, ambient_christoffel=gam_amb,
    )


def covariant_derivatives(state: HypersurfaceState) -> HypersurfaceState:
    """Fill ``grad_a`` and ``grad_j`` (they are otherwise computed lazily)."""
    margin_needed = 3
    for m, per in zip(state.grid.shape, state.grid.periodic):
        if not per and m < 2 * margin_needed + 1:
            raise StencilError("grid margin too small for nested stencils")
    state.grad_a
    state.grad_j
    return state


# -- residual reports ------------------------------------------------------

@dataclass
class ResidualReport:
    residuals: dict  # name -> max residual over the interior
    fields: dict = field(default_factory=dict, repr=False)  # name -> signed field

    def __getitem__(self, key):
        return self.residuals[key]

    def max(self) -> float:
        return max(self.residuals.values()) if self.residuals else 0.0


def _interior_max(state, arr, margin):
    sl = state.interior(margin)
    return float(np.abs(arr[sl]).max()) if arr[sl].size else 0.0


def _report(state, fields, margin):
    return ResidualReport(
        {k: _interior_max(state, v, margin) for k, v in fields.items()}, fields
    )


def gauss_codazzi_residual(state: HypersurfaceState, margin=DEFAULT_MARGIN) -> ResidualReport:
    """Gauss equation and Codazzi equation (both sign readings)."""
    A, h = state.A, state.h
    AY = A  # column y of A is A e_y
    # Gauss: R~T(X,Y)Z - R(X,Y)Z - h(X,Z) A Y + h(Y,Z) A X
    gauss = (
        state.r_tan
        - state.riemann
        - np.einsum("...xz,...ly->...lxyz", h, AY)
        + np.einsum("...yz,...lx->...lxyz", h, A)
    )
    ga = state.grad_a  # [..., k, i, j]
    # (nabla_X A) Y - (nabla_Y A) X  with X = e_x, Y = e_y
    curl = np.einsum("...xiy->...ixy", ga) - np.einsum("...yix->...ixy", ga)
    fields = {
        "gauss": gauss,
        "codazzi": state.r3 - curl,
        "codazzi_printed": state.r3 + curl,
    }
    return _report(state, fields, margin)


def second_order_identities(state: HypersurfaceState, margin=DEFAULT_MARGIN) -> ResidualReport:
    """Derivative identities for the normal Jacobi operator and the mean
    curvature: first derivative of ``j``, second derivative along coordinate
    directions (printed and rederived), the traced Laplacian (printed and
    rederived), and ``grad H = sum_i (nabla_{e_i} A)(e_i)``."""
    A, j, h, g = state.A, state.j, state.h, state.g
    n = state.n
    r31 = state.r3 - state.r1
    # (nabla_X j)(Y) = (r3 - r1)(Y, A X)
    first = np.einsum("...kiy->...iyk", state.grad_j) - np.einsum("...iyb,...bk->...iyk", r31, A)
    hess = state.hess_j  # [..., l, k, i, y] = (nabla_l nabla_k j)^i_y
    diag = np.stack([hess[..., k, k, :, :] for k in range(n)], axis=-3)  # [..., x, i, y]
    riem = state.riemann
    ga = state.grad_a
    A2 = A @ A
    jA = j @ A
    # building blocks with X = e_x (index x), Y = e_y
    hXY_jAX = np.einsum("...xy,...ix->...xiy", h, jA)
    hXAX = np.einsum("...xz,...zx->...x", h, A)  # h(X, AX)
    t_jY = np.einsum("...x,...iy->...xiy", hXAX, j)
    gradX_AX = np.einsum("...xix->...xi", ga)  # (nabla_X A) X
    r_terms = np.einsum("...iyb,...xb->...xiy", r31, gradX_AX)
    RYAXAX = np.einsum("...iypq,...px,...qx->...xiy", riem, A, A, optimize=True)  # R(Y, AX) AX
    hAXAX = np.einsum("...px,...pq,...qx->...x", A, h, A, optimize=True)
    hYAX = np.einsum("...yz,...zx->...xy", h, A)  # h(Y, AX)
    A2X = A2  # column x
    jYAX = np.einsum("...py,...pq,...qx->...xy", j, g, A, optimize=True)  # <jY, AX>
    printed_second = (
        hXY_jAX - 2 * t_jY + r_terms + 2 * RYAXAX
        + 2 * np.einsum("...x,...iy->...xiy", hAXAX, A)
        - 2 * np.einsum("...xy,...ix->...xiy", hYAX, A2X)
    )
    rederived_second = (
        hXY_jAX - 2 * t_jY + r_terms + 2 * RYAXAX
        - 2 * np.einsum("...x,...iy->...xiy", hAXAX, A)
        + 2 * np.einsum("...xy,...ix->...xiy", hYAX, A2X)
        + np.einsum("...xy,...ix->...xiy", jYAX, A)
    )
    tr = lambda T: np.trace(T, axis1=-2, axis2=-1)[..., None, None]  # noqa: E731
    tau = state.tau
    r_tau = np.einsum("...iyb,...b->...iy", r31, tau)
    T2 = ta.curvature_trace_twisted(riem, A, g)
    A3 = A2 @ A
    A4 = A2 @ A2
    printed_lap = j @ A2 - 2 * tr(A2) * j + r_tau + 2 * T2 + 2 * tr(A3) * A - 2 * A4
    rederived_lap = j @ A2 + A2 @ j - 2 * tr(A2) * j + r_tau + 2 * T2 + 2 * A4 - 2 * tr(A3) * A
    lap_j = state.lap_j
    grad_h = np.einsum("...ij,...j->...i", state.ginv, state.partial(state.H))
    fields = {
        "jacobi_first": first,
        "jacobi_second_printed": diag - printed_second,
        "jacobi_second": diag - rederived_second,
        "jacobi_laplacian_printed": lap_j - printed_lap,
        "jacobi_laplacian": lap_j - rederived_lap,
        "mean_gradient": grad_h - tau,
    }
    return _report(state, fields, margin)


@dataclass
class AdaptednessReport:
    rho: np.ndarray
    mu: np.ndarray
    s_hat_norm: np.ndarray
    variant: str
    summary: dict


def adaptedness_report(state: HypersurfaceState, variant="printed", margin=DEFAULT_MARGIN) -> AdaptednessReport:
    sh = state.s_hat(variant)
    rho = state.rho
    mu = state.mu(variant)
    sh_norm = np.sqrt(np.maximum(state.operator_norm2(sh), 0.0))
    sl = state.interior(margin)
    summary = {
        "rho_max": float(rho[sl].max()),
        "rho_mean": float(rho[sl].mean()),
        "mu_max": float(mu[sl].max()),
        "s_hat_max": float(sh_norm[sl].max()),
        "s_hat_mean": float(sh_norm[sl].mean()),
    }
    return AdaptednessReport(rho, mu, sh_norm, variant, summary)


# -- tabulated grid files ---------------------------------------------------

def load_grid_file(path, ambient: AmbientModel, lower=None, upper=None, periodic=None, orientation=1) -> ParametrizedImmersion:
    """Read ``i j [k] x_1 ... x_{n+1}`` lines ('#' comments allowed)."""
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    if not rows:
        raise ValueError(f"{path}: no grid points")
    N = ambient.dim
    n = N - 1
    data = np.array(rows, dtype=float)
    if data.shape[1] != n + N:
        raise ValueError(f"{path}: expected {n + N} columns, found {data.shape[1]}")
    idx = data[:, :n].astype(int)
    shape = tuple(int(idx[:, k].max()) + 1 for k in range(n))
    pts = np.full(shape + (N,), np.nan)
    pts[tuple(idx.T)] = data[:, n:]
    if np.isnan(pts).any():
        raise ValueError(f"{path}: grid is incomplete")
    lower = tuple(lower) if lower is not None else (0.0,) * n
    upper = tuple(upper) if upper is not None else tuple(float(m - 1) for m in shape)
    grid = Grid(lower, upper, shape, tuple(periodic) if periodic else None)
    return ParametrizedImmersion(grid, pts, ambient, orientation, name=Path(path).stem)


def save_grid_file(im: ParametrizedImmersion, path) -> None:
    lines = [f"# {im.name} on {im.ambient.kind} c={im.ambient.c}"]
    for idx in np.ndindex(*im.grid.shape):
        coords = " ".join(f"{v:.17g}" for v in im.points[idx])
        lines.append(" ".join(str(i) for i in idx) + " " + coords)
    Path(path).write_text("\n".join(lines) + "\n")
