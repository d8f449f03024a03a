"""Rank-one locally symmetric model spaces in explicit charts.

Real space forms use the conformal chart ``g = 4 / (1 + c|x|^2)^2 dx^2``
(stereographic for ``c > 0``, Poincare ball for ``c < 0``); Euclidean space
uses the identity metric. Complex space forms use inhomogeneous coordinates
``z in C^m`` stored as ``(x1, y1, ..., xm, ym)`` with the Fubini-Study or
Bergman metric normalized to holomorphic sectional curvature ``c``.

The curvature sign convention is ``R(X,Y) = [D_X, D_Y] - D_[X,Y]``, so the
unit sphere has ``R(x, xi) xi = x`` for orthonormal ``x, xi``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import optimize
from scipy.integrate import solve_ivp

from .tensor_algebra import InputError

KINDS = ("euclidean", "sphere", "hyperbolic", "complex-projective", "complex-hyperbolic")
_CS_STEP = 1e-30


class ChartExitError(RuntimeError):
    def __init__(self, message, t_exit=None):
        super().__init__(message)
        self.t_exit = t_exit


@dataclass(frozen=True)
class AmbientModel:
    kind: str
    c: float = 0.0
    dim: int = 3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown model kind {self.kind!r}")
        if self.kind == "euclidean" and self.c != 0:
            raise InputError("euclidean model has c = 0")
        if self.kind in ("sphere", "complex-projective") and not self.c > 0:
            raise InputError(f"{self.kind} needs c > 0")
        if self.kind in ("hyperbolic", "complex-hyperbolic") and not self.c < 0:
            raise InputError(f"{self.kind} needs c < 0")
        if self.is_complex and self.dim % 2:
            raise InputError("complex space forms have even real dimension")

    # -- descriptors -----------------------------------------------------
    @property
    def is_complex(self) -> bool:
        return self.kind.startswith("complex")

    @property
    def complex_dim(self) -> int:
        return self.dim // 2

    def describe(self) -> dict:
        return {"kind": self.kind, "c": float(self.c), "dim": int(self.dim)}

    @classmethod
    def from_descriptor(cls, d: dict) -> "AmbientModel":
        return cls(kind=d["kind"], c=float(d.get("c", 0.0)), dim=int(d["dim"]))

    @cached_property
    def complex_structure(self) -> np.ndarray:
        J = np.zeros((self.dim, self.dim))
        for k in range(self.complex_dim):
            J[2 * k + 1, 2 * k] = 1.0
            J[2 * k, 2 * k + 1] = -1.0
        return J

    def in_domain(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        r2 = np.sum(p * p, axis=-1)
        if self.kind == "hyperbolic":
            return r2 < 1.0 / abs(self.c)
        if self.kind == "complex-hyperbolic":
            return r2 < 1.0
        return np.isfinite(r2)

    # -- metric ----------------------------------------------------------
    def metric(self, p) -> np.ndarray:
        """Metric components ``g_ab`` at chart points ``p[..., N]``.

        Written with analytic operations only so complex-step derivatives
        of it are exact.
        """
        p = np.asarray(p)
        N = self.dim
        eye = np.eye(N)
        r2 = np.sum(p * p, axis=-1)[..., None, None]
        if self.kind == "euclidean":
            return np.broadcast_to(eye, p.shape[:-1] + (N, N)).astype(p.dtype)
        if not self.is_complex:
            return 4.0 * eye / (1.0 + self.c * r2) ** 2
        s = np.sign(self.c)
        kappa = abs(self.c) / 4.0
        jz = p @ self.complex_structure.T
        outer = p[..., :, None] * p[..., None, :] + jz[..., :, None] * jz[..., None, :]
        return ((1.0 + s * r2) * eye - s * outer) / (kappa * (1.0 + s * r2) ** 2)

    def metric_derivative(self, p) -> np.ndarray:
        """``dg[..., k, a, b] = d_k g_ab`` by complex-step differentiation."""
        p = np.asarray(p, dtype=float)
        N = self.dim
        shifted = p[..., None, :] + 1j * _CS_STEP * np.eye(N)
        return self.metric(shifted).imag / _CS_STEP

    def christoffel(self, p) -> np.ndarray:
        """``gam[..., a, b, c] = Gamma^a_bc``."""
        g = self.metric(np.asarray(p, dtype=float))
        dg = self.metric_derivative(p)
        # lower[d, b, c] = 1/2 (d_b g_dc + d_c g_db - d_d g_bc)
        lower = 0.5 * (
            np.einsum("...bdc->...dbc", dg) + np.einsum("...cdb->...dbc", dg) - dg
        )
        return np.einsum("...ad,...dbc->...abc", np.linalg.inv(g), lower)

    # -- curvature -------------------------------------------------------
    def riemann(self, p) -> np.ndarray:
        """Closed-form ``Rm[..., l, a, b, c]``: the ``l`` component of
        ``R(e_a, e_b) e_c``."""
        p = np.asarray(p, dtype=float)
        N = self.dim
        g = self.metric(p)
        d = np.eye(N)
        if self.kind == "euclidean":
            return np.zeros(p.shape[:-1] + (N,) * 4)
        base = np.einsum("...bc,la->...labc", g, d) - np.einsum("...ac,lb->...labc", g, d)
        if not self.is_complex:
            return self.c * base
        J = self.complex_structure
        jg = np.einsum("db,...dc->...bc", J, g)  # <J e_b, e_c>
        extra = (
            np.einsum("...bc,la->...labc", jg, J)
            - np.einsum("...ac,lb->...labc", jg, J)
            - 2 * np.einsum("...ab,lc->...labc", jg, J)
        )
        return 0.25 * self.c * (base + extra)

    def riemann_from_chart(self, p, h=1e-4) -> np.ndarray:
        """Curvature from central differences of the Christoffel symbols
        (independent of the closed form)."""
        p = np.asarray(p, dtype=float)
        N = self.dim
        gam = self.christoffel(p)
        dgam = np.stack(
            [
                (self.christoffel(p + h * e) - self.christoffel(p - h * e)) / (2 * h)
                for e in np.eye(N)
            ],
            axis=-4,
        )  # dgam[..., k, l, b, c] = d_k Gamma^l_bc
        # R(e_a, e_b) e_c = d_a Gam^l_bc - d_b Gam^l_ac + Gam^l_am Gam^m_bc - Gam^l_bm Gam^m_ac
        return (
            np.einsum("...albc->...labc", dgam)
            - np.einsum("...blac->...labc", dgam)
            + np.einsum("...lam,...mbc->...labc", gam, gam)
            - np.einsum("...lbm,...mac->...labc", gam, gam)
        )

    def curvature(self, p, x, y, z) -> np.ndarray:
        self._check_domain(p)
        return np.einsum("...labc,...a,...b,...c->...l", self.riemann(p), x, y, z)

    def ricci_operator(self, p) -> np.ndarray:
        rm = self.riemann(p)
        ric = np.einsum("...llbc->...bc", rm)  # Ric(Y, Z) = Tr(X -> R(X,Y)Z)
        return np.linalg.solve(self.metric(np.asarray(p, dtype=float)), ric)

    @cached_property
    def scalar_curvature(self) -> float:
        return float(np.trace(self.ricci_operator(np.zeros(self.dim))))

    @cached_property
    def einstein_constant(self) -> float:
        """``K`` with ``Ric = K id`` (scalar curvature over ambient dimension)."""
        return self.scalar_curvature / self.dim

    @cached_property
    def r_norm(self) -> float:
        return curvature_norm(self)

    def _check_domain(self, p):
        if not np.all(self.in_domain(p)):
            raise ChartExitError("point outside chart domain")

    # -- normal Jacobi data ----------------------------------------------
    def normal_jacobi(self, p, xi, basis=None):
        """Normal Jacobi operator on the orthocomplement of a unit ``xi``
        together with the slot tensors ``r1(X,Y) = (R(xi,X)Y)_T`` and
        ``r3(X,Y) = R(X,Y)xi``.

        Returned in ``basis`` (columns spanning ``xi``-perp) or in a
        g-orthonormal basis of ``xi``-perp when omitted.
        """
        p = np.asarray(p, dtype=float)
        xi = np.asarray(xi, dtype=float)
        self._check_domain(p)
        g = self.metric(p)
        if abs(xi @ g @ xi - 1.0) > 1e-10:
            raise InputError("xi must be a unit vector")
        if basis is None:
            basis = _orthocomplement(g, xi)
        rm = self.riemann(p)
        gram = basis.T @ g @ basis
        proj = np.linalg.solve(gram, basis.T @ g)  # ambient vector -> basis coords
        jac = proj @ np.einsum("labc,ai,b,c->li", rm, basis, xi, xi)
        r1 = np.einsum("il,labc,a,bx,cy->ixy", proj, rm, xi, basis, basis)
        r3 = np.einsum("il,labc,ax,by,c->ixy", proj, rm, basis, basis, xi)
        return jac, r1, r3

    # -- symmetry checks -------------------------------------------------
    def local_symmetry_check(self, p, h=1e-3):
        """Central-difference estimate of max |nabla R| at ``p`` and the
        Einstein residual ``|Ric - (scal/dim) id|``."""
        p = np.asarray(p, dtype=float)
        if self.kind == "euclidean":
            return 0.0, 0.0
        N = self.dim
        rm = self.riemann(p)
        gam = self.christoffel(p)
        drm = np.stack(
            [(self.riemann(p + h * e) - self.riemann(p - h * e)) / (2 * h) for e in np.eye(N)]
        )
        cov = (
            drm
            + np.einsum("lkm,mabc->klabc", gam, rm)
            - np.einsum("mka,lmbc->klabc", gam, rm)
            - np.einsum("mkb,lamc->klabc", gam, rm)
            - np.einsum("mkc,labm->klabc", gam, rm)
        )
        ric = self.ricci_operator(p)
        scal = np.trace(ric)
        einstein = np.abs(ric - scal / N * np.eye(N)).max()
        return float(np.abs(cov).max()), float(einstein)

    def einstein_residual(self, p, divisor) -> float:
        ric = self.ricci_operator(np.asarray(p, dtype=float))
        scal = np.trace(ric)
        return float(np.abs(ric - scal / divisor * np.eye(self.dim)).max())


def _orthocomplement(g, xi):
    N = g.shape[0]
    cols = [xi]
    out = []
    for e in np.eye(N):
        v = e.copy()
        for w in cols + out:
            v = v - (w @ g @ v) / (w @ g @ w) * w
        nv = np.sqrt(v @ g @ v)
        if nv > 1e-8:
            out.append(v / nv)
        if len(out) == N - 1:
            break
    return np.stack(out, axis=1)


def curvature_norm(model: AmbientModel, samples=4000, refine=8, seed=0) -> float:
    """``max |R(v1, v2) v3|`` over unit triples at the chart origin (the
    models are homogeneous): random search followed by local refinement."""
    if model.kind == "euclidean":
        return 0.0
    N = model.dim
    p = np.zeros(N)
    g = model.metric(p)
    rm = model.riemann(p)
    L = np.linalg.cholesky(g)
    E = np.linalg.inv(L).T  # g-orthonormal columns

    def value(w):
        v = w.reshape(3, N)
        v = v / np.linalg.norm(v, axis=1, keepdims=True)
        x, y, z = (E @ vi for vi in v)
        out = np.einsum("labc,a,b,c->l", rm, x, y, z)
        return float(np.sqrt(out @ g @ out))

    rng = np.random.default_rng(seed)
    W = rng.standard_normal((samples, 3, N))
    W /= np.linalg.norm(W, axis=2, keepdims=True)
    V = np.einsum("aj,sij->sia", E, W)
    out = np.einsum("labc,sa,sb,sc->sl", rm, V[:, 0], V[:, 1], V[:, 2])
    vals = np.sqrt(np.einsum("sl,lm,sm->s", out, g, out))
    best = float(vals.max())
    for idx in np.argsort(vals)[-refine:]:
        res = optimize.minimize(lambda w: -value(w), W[idx].ravel(), method="BFGS")
        best = max(best, -float(res.fun))
    return best


def jacobi_closed_form(lam, nu, t):
    """Coefficient ``cos(t sqrt(nu)) - lam sin(t sqrt(nu)) / sqrt(nu)`` with
    the hyperbolic (``nu < 0``) and linear (``nu = 0``) branches."""
    lam, nu, t = np.broadcast_arrays(
        np.asarray(lam, float), np.asarray(nu, float), np.asarray(t, float)
    )
    a = np.sqrt(np.abs(nu))
    pos, neg = nu > 0, nu < 0
    cos_part = np.where(pos, np.cos(t * a), np.where(neg, np.cosh(t * a), 1.0))
    safe = np.where(a > 0, a, 1.0)
    sin_part = np.where(pos, np.sin(t * a) / safe, np.where(neg, np.sinh(t * a) / safe, t))
    out = cos_part - lam * sin_part
    return out if out.ndim else float(out)


def jacobi_closed_form_derivative(lam, nu, t):
    """``d/dt`` of :func:`jacobi_closed_form`."""
    lam, nu, t = np.broadcast_arrays(
        np.asarray(lam, float), np.asarray(nu, float), np.asarray(t, float)
    )
    a = np.sqrt(np.abs(nu))
    pos, neg = nu > 0, nu < 0
    dcos = np.where(pos, -a * np.sin(t * a), np.where(neg, a * np.sinh(t * a), 0.0))
    dsin = np.where(pos, np.cos(t * a), np.where(neg, np.cosh(t * a), 1.0))
    out = dcos - lam * dsin
    return out if out.ndim else float(out)


@dataclass
class GeodesicSegment:
    ts: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    frames: np.ndarray  # frames[k] columns = transported vectors at ts[k]
    speed_error: float
    isometry_error: float

    def transport(self, k: int) -> np.ndarray:
        """Linear map taking initial-frame components to the vectors at step ``k``."""
        return self.frames[k] @ np.linalg.inv(self.frames[0])


def _geodesic_rhs(model, x, v, E):
    gam = model.christoffel(x)
    acc = -np.einsum("abc,b,c->a", gam, v, v)
    dE = -np.einsum("abc,b,cj->aj", gam, v, E)
    return v, acc, dE


def geodesic_and_transport(model: AmbientModel, p, v, t_max, dt, frame=None) -> GeodesicSegment:
    """RK4 geodesic with parallel transport of ``frame`` (default: a
    g-orthonormal frame at ``p``)."""
    x = np.asarray(p, dtype=float).copy()
    v = np.asarray(v, dtype=float).copy()
    g0 = model.metric(x)
    if abs(v @ g0 @ v - 1.0) > 1e-10:
        raise InputError("initial velocity must be a unit vector")
    E = np.linalg.inv(np.linalg.cholesky(g0)).T if frame is None else np.asarray(frame, float).copy()
    steps = int(round(t_max / dt))
    ts = [0.0]
    xs, vs, Es = [x.copy()], [v.copy()], [E.copy()]
    for k in range(steps):
        k1 = _geodesic_rhs(model, x, v, E)
        k2 = _geodesic_rhs(model, x + 0.5 * dt * k1[0], v + 0.5 * dt * k1[1], E + 0.5 * dt * k1[2])
        k3 = _geodesic_rhs(model, x + 0.5 * dt * k2[0], v + 0.5 * dt * k2[1], E + 0.5 * dt * k2[2])
        k4 = _geodesic_rhs(model, x + dt * k3[0], v + dt * k3[1], E + dt * k3[2])
        x = x + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        v = v + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        E = E + dt / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        if not model.in_domain(x):
            raise ChartExitError("geodesic left the chart domain", t_exit=(k + 1) * dt)
        ts.append((k + 1) * dt)
        xs.append(x.copy())
        vs.append(v.copy())
        Es.append(E.copy())
    xs, vs, Es = np.array(xs), np.array(vs), np.array(Es)
    G = model.metric(xs)
    speed = np.sqrt(np.einsum("ka,kab,kb->k", vs, G, vs))
    gram0 = Es[0].T @ G[0] @ Es[0]
    grams = np.einsum("kaj,kab,kbl->kjl", Es, G, Es)
    return GeodesicSegment(
        ts=np.array(ts),
        points=xs,
        velocities=vs,
        frames=Es,
        speed_error=float(np.abs(speed - 1.0).max()),
        isometry_error=float(np.abs(grams - gram0).max()),
    )


def jacobi_field_numeric(model: AmbientModel, p, xi, e, slope, t, rtol=1e-12):
    """Integrate ``J'' + R(J, gamma') gamma' = 0`` along the geodesic from
    ``p`` with initial velocity ``xi``, in a parallel frame.

    ``J(0) = e`` and ``J'(0) = slope * e``. Returns ``(J(t), J'(t))`` as
    frame-component vectors relative to the initial orthonormal frame whose
    first column is ``e``.
    """
    p = np.asarray(p, float)
    xi = np.asarray(xi, float)
    e = np.asarray(e, float)
    N = model.dim
    g0 = model.metric(p)
    # orthonormal frame starting with e, then xi
    cols = [e / np.sqrt(e @ g0 @ e), xi]
    for b in np.eye(N):
        w = b.copy()
        for c in cols:
            w = w - (c @ g0 @ w) * c
        nw = np.sqrt(w @ g0 @ w)
        if nw > 1e-8 and len(cols) < N:
            cols.append(w / nw)
    E0 = np.stack(cols, axis=1)

    def rhs(_, state):
        x = state[:N]
        v = state[N : 2 * N]
        E = state[2 * N : 2 * N + N * N].reshape(N, N)
        y = state[2 * N + N * N : 3 * N + N * N]
        dy = state[3 * N + N * N :]
        gam = model.christoffel(x)
        acc = -np.einsum("abc,b,c->a", gam, v, v)
        dE = -np.einsum("abc,b,cj->aj", gam, v, E)
        g = model.metric(x)
        rm = model.riemann(x)
        # K_ij = <R(E_i, v) v, E_j>
        K = np.einsum("labc,ai,b,c,lm,mj->ij", rm, E, v, v, g, E)
        return np.concatenate([v, acc, dE.ravel(), dy, -K.T @ y])

    y0 = np.zeros(N)
    y0[0] = np.sqrt(e @ g0 @ e)
    state0 = np.concatenate([p, xi, E0.ravel(), y0, slope * y0])
    sol = solve_ivp(rhs, (0.0, t), state0, method="DOP853", rtol=rtol, atol=rtol * 1e-2)
    end = sol.y[:, -1]
    return end[2 * N + N * N : 3 * N + N * N], end[3 * N + N * N :]
