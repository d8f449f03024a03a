"""Pointwise operator algebra on a tangent space with a (not necessarily
orthonormal) metric.

Index layout used throughout the package:

* operator ``a[..., i, j]`` is the component ``a^i_j``; it acts on column
  vectors of frame components.
* covariant derivative ``grad_a[..., k, i, j]`` is ``(nabla_k a)^i_j``.
* slot tensors ``r[..., i, x, y]`` are the components of ``r(e_x, e_y)``.
* curvature ``riem[..., l, a, b, c]`` is the ``l`` component of
  ``R(e_a, e_b) e_c`` with ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X, Y]``.

Every function broadcasts over leading axes, so the same code evaluates a
single point or a whole grid of sample points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ZERO_NORM_FACTOR = 1e-18


class InputError(ValueError):
    """Raised when operands are inconsistent (shape, symmetry, sign)."""


@dataclass(frozen=True)
class MetricPoint:
    """A positive-definite inner product on an ``n``-dimensional space."""

    g: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise InputError(f"metric must be square, got shape {g.shape}")
        if not np.allclose(g, g.T, rtol=0, atol=1e-12 * max(1.0, np.abs(g).max())):
            raise InputError("metric is not symmetric")
        if np.linalg.eigvalsh(g).min() <= 0:
            raise InputError("metric is not positive definite")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "dim", g.shape[0])

    def frame(self) -> np.ndarray:
        return orthonormal_frame(self.g)

    @classmethod
    def identity(cls, n: int) -> "MetricPoint":
        return cls(np.eye(n))


def _metric(m) -> np.ndarray:
    if isinstance(m, MetricPoint):
        return m.g
    return np.asarray(m, dtype=float)


def _check_square(*ops):
    n = ops[0].shape[-1]
    for op in ops:
        if op.shape[-2:] != (n, n):
            raise InputError(f"dimension mismatch: {op.shape[-2:]} vs {(n, n)}")


def orthonormal_frame(g) -> np.ndarray:
    """Columns form a g-orthonormal frame (via Cholesky ``g = L L^T``)."""
    L = np.linalg.cholesky(_metric(g))
    return np.swapaxes(np.linalg.inv(L), -1, -2)


def frame_trace(g, bilinear) -> np.ndarray:
    """Contract the last two (covariant) slots of ``bilinear`` with an
    orthonormal frame: ``sum_i B(..., e_i, e_i)``."""
    E = orthonormal_frame(g)
    return np.einsum("...ai,...bi,...ab->...", E, E, bilinear, optimize=True)


def commutator(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_square(a, b)
    return a @ b - b @ a


def adjoint(s, m) -> np.ndarray:
    g = _metric(m)
    return np.linalg.solve(g, np.swapaxes(s, -1, -2) @ g)


def inner(p, q, m) -> np.ndarray:
    """``<p, q> = Tr(p^* q)`` with the adjoint taken in the metric."""
    return np.trace(adjoint(p, m) @ q, axis1=-2, axis2=-1)


def is_symmetric(a, m, tol=1e-10) -> bool:
    a = np.asarray(a, dtype=float)
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    return bool(np.abs(adjoint(a, m) - a).max(initial=0.0) <= tol * scale)


def gap(s, m=None) -> np.ndarray:
    """Squared distance from commuting: ``-Tr(s^2)`` for a skew ``s``."""
    s = np.asarray(s, dtype=float)
    return 0.0 - np.trace(s @ s, axis1=-2, axis2=-1)  # 0.0 - x keeps exact zeros unsigned


def gap_via_adjoint(s, m) -> np.ndarray:
    return inner(s, s, m)


def mu(s_hat, s, m) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    n = s.shape[-1]
    norm2 = inner(s, s, m)
    pairing = inner(s_hat, s, m)
    small = norm2 < ZERO_NORM_FACTOR * n
    out = -pairing / np.where(small, 1.0, norm2)
    return np.where(small, 0.0, out)


def traced_gradient(grad_a, m) -> np.ndarray:
    """Vector ``sum_i (nabla_{e_i} a)(e_i)``."""
    ginv = np.linalg.inv(_metric(m))
    return np.einsum("...kl,...kil->...i", ginv, grad_a)


def ricci_operator(riem, m) -> np.ndarray:
    """``X -> sum_i R(X, e_i) e_i`` as an operator."""
    ginv = np.linalg.inv(_metric(m))
    return np.einsum("...kl,...mjkl->...mj", ginv, riem)


def curvature_trace_action(riem, a, m) -> np.ndarray:
    """``X -> sum_i (R(X, e_i) a)(e_i)`` where ``R(X,Y)a = [R(X,Y), a]``."""
    ginv = np.linalg.inv(_metric(m))
    t1 = np.einsum("...kl,...mjkq,...ql->...mj", ginv, riem, a, optimize=True)
    return t1 - a @ ricci_operator(riem, m)


def curvature_trace_twisted(riem, a, m) -> np.ndarray:
    """``X -> sum_i R(X, a e_i)(a e_i)``."""
    ginv = np.linalg.inv(_metric(m))
    return np.einsum("...kl,...mjpq,...pk,...ql->...mj", ginv, riem, a, a, optimize=True)


def curvature_trace_inner(riem, a, m) -> np.ndarray:
    """``X -> sum_i R(X, e_i)(a e_i)``."""
    ginv = np.linalg.inv(_metric(m))
    return np.einsum("...kl,...mjkq,...ql->...mj", ginv, riem, a, optimize=True)


def _paired_trace_commutator(grad_a, grad_j, m) -> np.ndarray:
    ginv = np.linalg.inv(_metric(m))
    ab = np.einsum("...kl,...kip,...lpj->...ij", ginv, grad_a, grad_j, optimize=True)
    ba = np.einsum("...kl,...lip,...kpj->...ij", ginv, grad_j, grad_a, optimize=True)
    return ab - ba


def s_hat(a, j, grad_a, grad_j, curv_action, r3_minus_r1, m, check=True) -> np.ndarray:
    """Obstruction tensor in its three-bracket form.

    ``curv_action`` is the operator ``X -> sum_i (R(X, e_i) a)(e_i)`` (see
    :func:`curvature_trace_action`); ``r3_minus_r1`` is a slot tensor.
    """
    a = np.asarray(a, dtype=float)
    j = np.asarray(j, dtype=float)
    _check_square(a, j, curv_action)
    if check and not (is_symmetric(a, m) and is_symmetric(j, m)):
        raise InputError("shape operator and Jacobi operator must be g-symmetric")
    tau = traced_gradient(grad_a, m)
    mixed = np.einsum("...ixb,...b->...ix", r3_minus_r1, tau)
    return (
        2 * commutator(a @ a + j, curv_action)
        + 2 * commutator(a, mixed)
        + 2 * _paired_trace_commutator(grad_a, grad_j, m)
    )


def s_hat_rederived(a, j, grad_a, grad_j, riem, m) -> np.ndarray:
    """Obstruction tensor obtained by redoing the commutator evolution with
    the sign conventions fixed in this package.

    ``Shat = 2[j, T] + 2[a, U] + 2 a [a, T] + 2 sum_i [nabla_i a, nabla_i j]``
    with ``T(X) = sum_i (R(X,e_i)a)(e_i)`` and ``U(X) = sum_i (R(X,e_i)a)(a e_i)``.
    It equals ``-dS/dt`` wherever ``S = 0``.
    """
    a = np.asarray(a, dtype=float)
    j = np.asarray(j, dtype=float)
    ginv = np.linalg.inv(_metric(m))
    t = curvature_trace_action(riem, a, m)
    a2 = a @ a
    u = np.einsum("...kl,...mjkq,...ql->...mj", ginv, riem, a2, optimize=True) - a @ np.einsum(
        "...kl,...pjkq,...ql->...pj", ginv, riem, a
    )
    return (
        2 * commutator(j, t)
        + 2 * commutator(a, u)
        + 2 * a @ commutator(a, t)
        + 2 * _paired_trace_commutator(grad_a, grad_j, m)
    )


def s_hat_commutator_form(a, j, grad_a, grad_j, riem, m) -> np.ndarray:
    """``2[j, U] + 2[a, V] + 2 sum_i [nabla_i a, nabla_i j]`` with
    ``U(X) = sum_i R(X, e_i) a e_i`` and ``V(X) = sum_i R(X, a e_i) a e_i``.

    This is the grouping that falls out of commuting the evolution of ``a``
    with that of ``j`` directly. It agrees with :func:`s_hat_rederived`
    where ``[a, j] = 0``; elsewhere the two differ by terms in ``S`` that
    the two right-hand sides account for differently (the Gauss equation
    links them).
    """
    return (
        2 * commutator(j, curvature_trace_inner(riem, a, m))
        + 2 * commutator(a, curvature_trace_twisted(riem, a, m))
        + 2 * _paired_trace_commutator(grad_a, grad_j, m)
    )


def _eye_like(a):
    return np.broadcast_to(np.eye(a.shape[-1]), a.shape)


def _scalar(x):
    return np.asarray(x, dtype=float)[..., None, None]


def commutator_rhs(a, j, s, s_hat_, h, tr_a2, tr_j, einstein, variant="printed") -> np.ndarray:
    """Right-hand side of ``dS/dt - Lap S``.

    ``variant="printed"``: ``(Tr a^2 + Tr j - 2K) S + H[a,S] - S a^2 + [a, j^2]
    + 2[a^3, j] - Shat``.

    ``variant="rederived"``: ``(Tr a^2 + Tr j - 2K) S + H[a,S] + [a, j^2]
    + a^2 S + S a^2 + 2 a S a - Shat`` where ``Shat`` is expected in the
    grouping of :func:`s_hat_commutator_form`.

    ``einstein`` is the Einstein constant ``K`` (Ricci = K id) of the
    ambient space.
    """
    a2 = a @ a
    if variant == "rederived":
        return (
            (_scalar(tr_a2) + _scalar(tr_j) - 2 * _scalar(einstein)) * s
            + _scalar(h) * commutator(a, s)
            + commutator(a, j @ j)
            + a2 @ s
            + s @ a2
            + 2 * a @ s @ a
            - s_hat_
        )
    return (
        (_scalar(tr_a2) + _scalar(tr_j) - 2 * _scalar(einstein)) * s
        + _scalar(h) * commutator(a, s)
        - s @ a2
        + commutator(a, j @ j)
        + 2 * commutator(a2 @ a, j)
        - s_hat_
    )


def reaction_term(a, j, s, s_hat_, h, tr_a2, tr_j, scal=None, m=None, variant="printed", tol=1e-9):
    """The reaction operator ``P(S)`` in its expanded form

    ``Shat - (Tr a^2 + Tr j) S - H[a,S] - 2H[a^2, j] + S a^2 - c a^2 S
    + 2 S j - [a, j^2]`` with ``c = 2`` as printed and ``c = 1`` after
    rederivation. ``scal`` and ``m`` are accepted for interface symmetry.
    """
    a = np.asarray(a, dtype=float)
    j = np.asarray(j, dtype=float)
    s = np.asarray(s, dtype=float)
    _check_square(a, j, s, s_hat_)
    scale = max(1.0, float(np.abs(a).max()) * float(np.abs(j).max()))
    if np.abs(commutator(a, j) - s).max() > tol * scale:
        raise InputError("s is not the commutator [a, j]")
    a2 = a @ a
    coeff = {"printed": 2.0, "rederived": 1.0}[variant]
    return (
        s_hat_
        - (_scalar(tr_a2) + _scalar(tr_j)) * s
        - _scalar(h) * commutator(a, s)
        - 2 * _scalar(h) * commutator(a2, j)
        + s @ a2
        - coeff * a2 @ s
        + 2 * s @ j
        - commutator(a, j @ j)
    )


@dataclass(frozen=True)
class BoundInputs:
    n: int
    c_a: float
    r_norm: float
    sup_mu: float


def c1_constant(b: BoundInputs) -> float:
    """Growth constant of the gap bound:
    ``4(2n+1) c_A^2 + 10 n |R| + 2 sup mu``."""
    vals = (b.c_a, b.r_norm, b.sup_mu)
    if not all(np.isfinite(v) for v in vals):
        raise InputError("bound inputs must be finite")
    if b.c_a < 0 or b.r_norm < 0:
        raise InputError("c_A and |R| must be non-negative")
    return 4 * (2 * b.n + 1) * b.c_a**2 + 10 * b.n * b.r_norm + 2 * b.sup_mu


@dataclass
class EstimateReport:
    values: dict
    bounds: dict
    violated: list

    @property
    def ok(self) -> bool:
        return not self.violated


def trace_estimates(a, j, s, h, r_norm, m, c_a=None, powers=(1, 2, 3, 4), r1=None, r3=None,
                    rtol=1e-12) -> EstimateReport:
    """Evaluate the chain of trace inequalities used for the gap bound.

    Keys name the inequality they belong to; ``violated`` lists keys whose
    bound fails (by more than round-off). ``r1``/``r3`` are slot tensors of
    the mixed curvature operators; when given, their squared slot traces are
    bounded by ``n^2 |R|^2``. Frames are assumed orthonormal for those.
    """
    a = np.asarray(a, dtype=float)
    j = np.asarray(j, dtype=float)
    s = np.asarray(s, dtype=float)
    n = a.shape[-1]
    rho = float(gap(s))
    norm_a = float(np.sqrt(max(inner(a, a, m), 0.0)))
    c_a = norm_a if c_a is None else c_a
    tr = lambda x: float(np.trace(x))  # noqa: E731
    a2 = a @ a
    vals = {
        "trace_mix": (tr(a2) + tr(j)) * rho,
        "commutator_a_s": tr(commutator(a, s) @ s),
        "mean_commutator": -2 * h * tr(commutator(a2, j) @ s),
        "a2_s2": -tr(a2 @ s @ s),
        "j_s2": tr(j @ s @ s),
        "a_j2": -tr(commutator(a, j @ j) @ s),
    }
    bounds = {
        "trace_mix": (c_a**2 + n * r_norm) * rho,
        "commutator_a_s": 0.0,
        "mean_commutator": 4 * n * c_a**2 * rho,
        "a2_s2": c_a**2 * rho,
        "j_s2": n * r_norm * rho,
        "a_j2": 2 * n * r_norm * rho,
    }
    for k in powers:
        vals[f"jacobi_power_{k}"] = tr(np.linalg.matrix_power(j, k))
        bounds[f"jacobi_power_{k}"] = n * r_norm**k
    for name, r in (("slot_r1", r1), ("slot_r3", r3)):
        if r is not None:
            vals[name] = float(np.einsum("ixy,yxi->", r, r))
            bounds[name] = n**2 * r_norm**2
    kmax = max(powers, default=1)
    scale = 1.0 + abs(rho) * (1 + c_a**2 + r_norm) ** 2 + n * (1 + r_norm) ** max(kmax, 2) * n
    violated = [key for key in vals if vals[key] > bounds[key] + rtol * scale * 1e3]
    if abs(vals["commutator_a_s"]) > 1e3 * rtol * scale:
        violated.append("commutator_a_s")
    return EstimateReport(vals, bounds, sorted(set(violated)))
