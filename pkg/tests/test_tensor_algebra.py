import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from curvflow import tensor_algebra as ta
from curvflow.ambient import AmbientModel
from curvflow.samples import point_sample, reaction_mismatch, s_hat_of

finite = st.floats(-3, 3, allow_nan=False)


def square(n):
    return arrays(np.float64, (n, n), elements=finite)


def spd(n):
    return square(n).map(lambda x: x @ x.T + np.eye(n))


def _sym(x):
    return 0.5 * (x + x.T)


@given(a=square(3), j=square(3))
def test_gap_is_nonnegative_and_matches_adjoint_norm(a, j):
    a, j = _sym(a), _sym(j)
    s = ta.commutator(a, j)
    rho = float(ta.gap(s))
    assert rho >= -1e-12 * (1 + np.abs(s).max() ** 2)
    assert rho == pytest.approx(float(ta.gap_via_adjoint(s, np.eye(3))), abs=1e-10)


@given(g=spd(3), x=square(3), y=square(3))
def test_gap_uses_metric_adjoint(g, x, y):
    # g-symmetric operators a = g^{-1} X with X symmetric
    gi = np.linalg.inv(g)
    a, j = gi @ _sym(x), gi @ _sym(y)
    assert ta.is_symmetric(a, g, tol=1e-8)
    s = ta.commutator(a, j)
    assert float(ta.gap(s)) == pytest.approx(float(ta.gap_via_adjoint(s, g)), rel=1e-8, abs=1e-8)


@given(a=square(4), j=square(4))
def test_commutator_with_s_is_trace_free_against_s(a, j):
    a, j = _sym(a), _sym(j)
    s = ta.commutator(a, j)
    scale = 1 + np.abs(a).max() * np.abs(s).max() ** 2
    assert abs(np.trace(ta.commutator(a, s) @ s)) <= 1e-12 * scale


def test_commuting_pair_has_zero_gap():
    a = np.diag([1.0, 2.0, 3.0])
    assert ta.gap(ta.commutator(a, a @ a)) == 0.0


def test_mu_vanishes_below_threshold():
    s = np.zeros((3, 3))
    assert ta.mu(np.ones((3, 3)), s, np.eye(3)) == 0.0
    s[0, 1], s[1, 0] = 1.0, -1.0
    # -<shat, s>/|s|^2 with shat = -2 s
    assert ta.mu(-2 * s, s, np.eye(3)) == pytest.approx(2.0)


def test_growth_constant_example_and_input_checks():
    assert ta.c1_constant(ta.BoundInputs(n=2, c_a=1.0, r_norm=1.0, sup_mu=0.0)) == 40.0
    assert ta.c1_constant(ta.BoundInputs(n=3, c_a=2.0, r_norm=0.5, sup_mu=1.0)) == 4 * 7 * 4 + 15 + 2
    with pytest.raises(ta.InputError):
        ta.c1_constant(ta.BoundInputs(n=2, c_a=-1.0, r_norm=1.0, sup_mu=0.0))
    with pytest.raises(ta.InputError):
        ta.c1_constant(ta.BoundInputs(n=2, c_a=1.0, r_norm=np.inf, sup_mu=0.0))


def test_shape_checks():
    with pytest.raises(ta.InputError):
        ta.reaction_term(np.eye(2), np.eye(3), np.zeros((2, 2)), np.zeros((2, 2)), 0, 0, 0)
    with pytest.raises(ta.InputError):
        # s is not [a, j]
        ta.reaction_term(np.eye(2), np.eye(2), np.ones((2, 2)), np.zeros((2, 2)), 0, 0, 0)
    with pytest.raises(ta.InputError):
        ta.MetricPoint(np.ones((2, 3)))


CURVED = [("complex-projective", 4.0, 4), ("complex-hyperbolic", -4.0, 4),
          ("sphere", 1.0, 3), ("hyperbolic", -1.0, 4)]


@pytest.mark.parametrize("kind,c,dim", CURVED)
def test_reaction_matches_commutator_equation(kind, c, dim, rng):
    model = AmbientModel(kind, c, dim)
    worst = max(reaction_mismatch(point_sample(model, rng), model) for _ in range(100))
    assert worst <= 1e-12


def test_printed_reaction_pair_disagrees_on_complex_space_forms(rng):
    model = AmbientModel("complex-projective", 4.0, 4)
    worst = max(reaction_mismatch(point_sample(model, rng), model, "printed") for _ in range(50))
    assert worst > 0.1
    real = AmbientModel("sphere", 1.0, 4)
    assert max(reaction_mismatch(point_sample(real, rng), real, "printed") for _ in range(50)) <= 1e-12


@pytest.mark.parametrize("kind,c,dim", CURVED)
def test_trace_estimates_hold_on_model_data(kind, c, dim, rng):
    model = AmbientModel(kind, c, dim)
    for _ in range(300):
        p = point_sample(model, rng, a_scale=rng.uniform(0.1, 3.0))
        rep = ta.trace_estimates(p.a, p.j, p.s, p.h, model.r_norm, p.m, r1=p.r1, r3=p.r3)
        assert rep.ok, rep.violated


@pytest.mark.parametrize("kind,c,dim", [("complex-projective", 4.0, 4), ("complex-hyperbolic", -4.0, 4),
                                        ("sphere", 1.0, 4)])
def test_obstruction_groupings_agree_for_adapted_data(kind, c, dim, rng):
    model = AmbientModel(kind, c, dim)
    adapted = lambda j: 0.4 * j + 0.2 * j @ j + 0.7 * np.eye(len(j))  # noqa: E731
    for _ in range(20):
        p = point_sample(model, rng, shape_from_jacobi=adapted)
        assert np.abs(p.s).max() <= 1e-12
        x = s_hat_of(p, "rederived")
        y = s_hat_of(p, "rederived", "commutator")
        assert np.abs(x - y).max() <= 1e-10 * max(1.0, np.abs(x).max())

