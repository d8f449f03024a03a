import numpy as np
import pytest
from hypothesis import given, strategies as st

from curvflow.ambient import (
    AmbientModel,
    ChartExitError,
    jacobi_closed_form,
    jacobi_closed_form_derivative,
    jacobi_field_numeric,
)
from curvflow.tensor_algebra import InputError


def _point(model, rng, radius=0.4):
    p = rng.normal(size=model.dim)
    return radius * rng.uniform() * p / np.linalg.norm(p)


def _lower(model, p):
    """Fully covariant curvature <R(a,b)c, d>."""
    return np.einsum("labc,ld->abcd", model.riemann(p), model.metric(p))


def test_curvature_symmetries(model, rng):
    for _ in range(5):
        p = _point(model, rng)
        R = _lower(model, p)
        scale = max(1.0, np.abs(R).max())
        assert np.abs(R + R.transpose(1, 0, 2, 3)).max() <= 1e-12 * scale
        assert np.abs(R + R.transpose(0, 1, 3, 2)).max() <= 1e-12 * scale
        assert np.abs(R - R.transpose(2, 3, 0, 1)).max() <= 1e-12 * scale
        bianchi = R + R.transpose(1, 2, 0, 3) + R.transpose(2, 0, 1, 3)
        assert np.abs(bianchi).max() <= 1e-12 * scale


def test_closed_form_curvature_matches_chart_differences(model, rng):
    if model.kind == "euclidean":
        pytest.skip("flat")
    p = _point(model, rng, 0.3)
    exact = model.riemann(p)
    fd = model.riemann_from_chart(p)
    assert np.abs(exact - fd).max() <= 1e-6 * np.abs(exact).max()


def _sectional(model, p, x, y):
    R = _lower(model, p)
    g = model.metric(p)
    num = np.einsum("abcd,a,b,c,d->", R, x, y, y, x)
    return num / ((x @ g @ x) * (y @ g @ y) - (x @ g @ y) ** 2)


def test_sectional_curvatures_of_model_spaces():
    s3 = AmbientModel("sphere", 1.0, 3)
    p = np.array([0.1, -0.2, 0.05])
    assert _sectional(s3, p, np.array([1.0, 0, 0]), np.array([0, 1.0, 0])) == pytest.approx(1.0, abs=1e-12)
    cp = AmbientModel("complex-projective", 4.0, 4)
    o = np.zeros(4)
    x = np.array([1.0, 0, 0, 0])
    jx = cp.complex_structure @ x
    real = np.array([0, 0, 1.0, 0])
    assert _sectional(cp, o, x, jx) == pytest.approx(4.0, abs=1e-12)
    assert _sectional(cp, o, x, real) == pytest.approx(1.0, abs=1e-12)
    h3 = AmbientModel("hyperbolic", -1.0, 3)
    assert _sectional(h3, p, np.array([1.0, 0, 0]), np.array([0, 0, 1.0])) == pytest.approx(-1.0, abs=1e-12)


def test_einstein_constant_uses_ambient_dimension(model):
    p = np.full(model.dim, 0.1)
    assert model.einstein_residual(p, model.dim) <= 1e-10
    if model.kind != "euclidean":
        assert model.einstein_residual(p, model.dim - 1) > 0.1


def test_models_are_locally_symmetric(model, rng):
    nabla_r, einstein = model.local_symmetry_check(_point(model, rng, 0.3))
    # finite-difference check, error scales like c**2 times the step squared
    assert nabla_r <= 1e-5 * max(1.0, model.c**2)
    assert einstein <= 1e-10


def test_curvature_norm_bounds_random_triples(model, rng):
    bound = model.r_norm
    if model.kind == "euclidean":
        assert bound == 0.0
        return
    if model.kind == "sphere":
        # R(x,y)z = c(<y,z>x - <x,z>y); the maximum over unit vectors is c
        assert bound == pytest.approx(model.c, rel=1e-6)
    o = np.zeros(model.dim)
    g = model.metric(o)
    rm = model.riemann(o)
    for _ in range(200):
        v = rng.normal(size=(3, model.dim))
        v /= np.sqrt(np.einsum("ia,ab,ib->i", v, g, v))[:, None]
        out = np.einsum("labc,a,b,c->l", rm, *v)
        assert np.sqrt(out @ g @ out) <= bound * (1 + 1e-9)


def test_invalid_models_are_rejected():
    with pytest.raises(InputError):
        AmbientModel("sphere", -1.0, 3)
    with pytest.raises(InputError):
        AmbientModel("complex-projective", 4.0, 3)
    with pytest.raises(InputError):
        AmbientModel("torus", 1.0, 3)


def test_hyperbolic_chart_exit():
    h3 = AmbientModel("hyperbolic", -1.0, 3)
    with pytest.raises(ChartExitError):
        h3.normal_jacobi(np.array([1.2, 0, 0]), np.array([1.0, 0, 0]))


@given(
    lam=st.floats(-3, 3),
    nu=st.sampled_from([-2.0, -0.5, 0.0, 0.7, 3.0]),
    t=st.floats(0, 1.2),
)
def test_closed_form_solves_scalar_jacobi_equation(lam, nu, t):
    # f'' = -nu f, f(0) = 1, f'(0) = -lam: compare with a second difference
    h = 1e-4
    f = lambda s: float(jacobi_closed_form(lam, nu, s))  # noqa: E731
    second = (f(t + h) - 2 * f(t) + f(t - h)) / h**2
    assert second == pytest.approx(-nu * f(t), abs=1e-5 * (1 + abs(f(t))))
    assert f(0.0) == 1.0
    assert float(jacobi_closed_form_derivative(lam, nu, 0.0)) == pytest.approx(-lam)


@pytest.mark.parametrize("kind,c", [("sphere", 1.0), ("hyperbolic", -1.0), ("complex-projective", 4.0),
                                    ("euclidean", 0.0)])
def test_closed_form_matches_jacobi_field_integration(kind, c):
    dim = 4
    model = AmbientModel(kind, c, dim)
    p = np.zeros(dim)
    g = model.metric(p)
    xi = np.array([1.0, 0, 0, 0]) / np.sqrt(g[0, 0])
    jac, _, _ = model.normal_jacobi(p, xi)
    from curvflow.ambient import _orthocomplement

    basis = _orthocomplement(g, xi)
    nus, vecs = np.linalg.eigh(0.5 * (jac + jac.T))
    slope = 0.3
    for nu, w in zip(nus, vecs.T):
        e = basis @ w
        t_end = 0.8 * (np.pi / np.sqrt(nu) if nu > 0 else 2.0)
        if kind == "complex-projective":
            t_end = min(t_end, 1.2)  # affine chart ends at distance pi/2
        J, _ = jacobi_field_numeric(model, p, xi, e, slope, t_end)
        expect = float(jacobi_closed_form(-slope, nu, t_end))
        assert J[0] == pytest.approx(expect, rel=1e-8, abs=1e-10)
        assert np.abs(J[1:]).max() <= 1e-8
