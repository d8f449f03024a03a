"""Random pointwise hypersurface data drawn from an ambient model.

A sample is what a hypersurface through a random point with a random unit
normal and a random shape operator would see: ``j``, ``r1``, ``r3`` come
from the ambient curvature and the intrinsic curvature from the Gauss
equation. Covariant derivatives are random (pointwise they are
unconstrained apart from the symmetries imposed below).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ambient import AmbientModel, _orthocomplement


@dataclass
class PointSample:
    a: np.ndarray
    j: np.ndarray
    r1: np.ndarray
    r3: np.ndarray
    riem: np.ndarray
    grad_a: np.ndarray
    grad_j: np.ndarray
    m: np.ndarray  # metric of the frame (identity)

    @property
    def s(self):
        return self.a @ self.j - self.j @ self.a

    @property
    def h(self) -> float:
        return float(np.trace(self.a))


def _symmetric(rng, n, scale):
    x = rng.normal(scale=scale, size=(n, n))
    return 0.5 * (x + x.T)


def point_sample(model: AmbientModel, rng, a_scale=1.0, grad_scale=1.0, chart_radius=0.6,
                 shape_from_jacobi=None) -> PointSample:
    """``shape_from_jacobi(j)``, when given, fixes the shape operator as a
    function of the normal Jacobi operator (e.g. a polynomial in ``j`` for
    curvature-adapted data)."""
    N = model.dim
    n = N - 1
    while True:
        p = rng.normal(size=N)
        p *= chart_radius * rng.uniform() ** (1 / N) / np.linalg.norm(p)
        if model.in_domain(p):
            break
    g = model.metric(p)
    xi = rng.normal(size=N)
    xi /= np.sqrt(xi @ g @ xi)
    basis = _orthocomplement(g, xi)
    j, r1, r3 = model.normal_jacobi(p, xi, basis)
    j = 0.5 * (j + j.T)
    rm = model.riemann(p)
    proj = basis.T @ g
    r_tan = np.einsum("il,labc,ax,by,cz->ixyz", proj, rm, basis, basis, basis, optimize=True)
    a = _symmetric(rng, n, a_scale) if shape_from_jacobi is None else shape_from_jacobi(j)
    h = a  # orthonormal frame
    riem = r_tan - np.einsum("xz,ly->lxyz", h, a) + np.einsum("yz,lx->lxyz", h, a)
    grad_a = np.stack([_symmetric(rng, n, grad_scale) for _ in range(n)])
    grad_j = np.stack([_symmetric(rng, n, grad_scale) for _ in range(n)])
    return PointSample(a, j, r1, r3, riem, grad_a, grad_j, np.eye(n))


def s_hat_of(sample: PointSample, variant="rederived", grouping=None) -> np.ndarray:
    """Obstruction tensor of a sample. ``grouping`` is ``"commutator"`` for
    the grouping that enters the commutator equation; otherwise the variant
    decides (the printed three-bracket form or the rederived one)."""
    from . import tensor_algebra as ta

    s = sample
    if grouping == "commutator" and variant == "rederived":
        return ta.s_hat_commutator_form(s.a, s.j, s.grad_a, s.grad_j, s.riem, s.m)
    if variant == "printed":
        action = ta.curvature_trace_action(s.riem, s.a, s.m)
        return ta.s_hat(s.a, s.j, s.grad_a, s.grad_j, action, s.r3 - s.r1, s.m)
    return ta.s_hat_rederived(s.a, s.j, s.grad_a, s.grad_j, s.riem, s.m)


def reaction_mismatch(sample: PointSample, model: AmbientModel, variant="rederived", divisor=None) -> float:
    """Relative max-norm of ``P(S) + RHS`` where ``RHS`` is the reaction
    part of the commutator equation; zero when the two forms agree."""
    from . import tensor_algebra as ta

    s = sample
    d = model.dim if divisor is None else divisor
    if divisor is None and variant == "printed":
        d = model.dim - 1  # the printed commutator equation divides by n
    k = model.scalar_curvature / d
    tr_a2, tr_j = np.trace(s.a @ s.a), np.trace(s.j)
    rhs = ta.commutator_rhs(s.a, s.j, s.s, s_hat_of(s, variant, "commutator"), s.h, tr_a2, tr_j, k, variant)
    p = ta.reaction_term(s.a, s.j, s.s, s_hat_of(s, variant), s.h, tr_a2, tr_j, variant=variant)
    scale = max(1.0, float(np.abs(p).max()), float(np.abs(rhs).max()))
    return float(np.abs(p + rhs).max()) / scale
