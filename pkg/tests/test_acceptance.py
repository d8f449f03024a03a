"""Acceptance criteria 1-9.

Each test records one ``CRITERION k: PASS|FAIL`` line (echoed in the
terminal summary) and then asserts the same verdict, so a red test here is
the criterion failing, not a harness problem. Where a printed formula and
its rederivation disagree, the criterion is judged on the printed formula
and the rederived form is checked in a companion test.
"""

import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from conftest import CRITERIA
from curvflow.ambient import AmbientModel
from curvflow.catalog import build, spectrum_for
from curvflow.cli import main
from curvflow.convergence import error_study
from curvflow.flow import (
    TAGS,
    gap_monitor,
    max_principle_check,
    parallel_trace,
    run_pde_flow,
)
from curvflow.immersion import fundamental_forms
from curvflow.parallel import (
    IsoparametricSpectrum,
    ParallelFamily,
    flow_ode,
    focal_distance,
    invariance_monitor,
    jacobi_invariance,
    parallel_eigenvalue,
)
from curvflow.samples import point_sample, reaction_mismatch
from curvflow.studies import (
    default_checks,
    identity_study,
    space_study,
    time_study,
    trace_from_family,
    trace_from_steps,
)
from curvflow import tensor_algebra as ta

ABS_TOL = 1e-3


def record(k, ok, detail, extra=()):
    lines = [f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}"]
    lines += [f"    {x}" for x in extra]
    CRITERIA[k] = lines
    for line in lines:
        print(line)


def _nested(base, periodic, k):
    return tuple(s * 2**k if p else (s - 1) * 2**k + 1 for s, p in zip(base, periodic))


# -- 1 ---------------------------------------------------------------------

def test_criterion_1_shrinking_sphere():
    start = time.perf_counter()
    fam = ParallelFamily(spectrum_for("sphere-r3", R0=1.0))
    traj = flow_ode(fam, 0.3, 1e-4)
    rel = float(np.abs((1 + traj.rs) / np.sqrt(1 - 4 * traj.ts) - 1).max())
    lo, hi = traj.collapse_bracket
    bracket_ok = lo - 1e-8 <= 0.25 <= hi + 1e-8 and hi - lo <= 1e-8
    secs = time.perf_counter() - start
    ok = rel <= 1e-6 and bracket_ok and secs < 10
    record(1, ok, f"max rel radius error {rel:.2e}, collapse in [{lo:.12f}, {hi:.12f}], {secs:.1f} s")
    assert ok


# -- 2 ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def residual_studies():
    checks = default_checks(("rederived", "printed"))
    out = {}
    # (a) sphere, explicit RK2 flow; default grid 64 x 64
    sphere = build("sphere-r3", m=64)
    out["sphere dt"] = time_study(trace_from_steps(sphere, "rk2"), 1e-4, checks)
    per = sphere.grid.periodic
    out["sphere h"] = space_study(
        lambda k: run_pde_flow(build("sphere-r3", m=_nested((33, 32), per, k)), 4e-5, 2), checks)
    # (b) cp2 geodesic sphere moved along the reduced flow; default grid 24^3
    fam = ParallelFamily(spectrum_for("cp2-geodesic-sphere", r0=0.7))
    out["cp2 dt"] = time_study(
        trace_from_family(fam, lambda r: build("cp2-geodesic-sphere", m=24, r0=0.7 + r)), 2e-3, checks)

    def cp2_level(k):
        traj = flow_ode(fam, 2e-3 * (1 + 1e-9), 1e-3)
        m = _nested((13,) * 3, (False,) * 3, k)
        return parallel_trace(lambda r: build("cp2-geodesic-sphere", m=m, r0=0.7 + r), traj)

    out["cp2 h"] = space_study(cp2_level, checks)
    return out


def _criterion_2_rows(studies, printed):
    rows, ok = [], True
    keys = [f"{t}/printed" if printed else t for t in TAGS] + ["pushforward"]
    for key in keys:
        for label, study in studies.items():
            e = study.get(key)
            if e is None:
                continue
            passed = e.passed(1.8)
            small = "dt" not in label or e.absolute <= ABS_TOL
            ok &= passed and small
            if not (passed and small):
                why = [] if passed else ["order"]
                why += [] if small else [f"abs {e.absolute:.1e} > {ABS_TOL:g}"]
                rows.append(f"{label:9s} {key:20s} FAIL ({', '.join(why)}): {e.summary()}")
    return ok, rows


def test_criterion_2_evolution_residuals(residual_studies):
    start = time.perf_counter()
    ok, rows = _criterion_2_rows(residual_studies, printed=True)
    record(2, ok, "order >= 1.8 in dt and h, abs <= 1e-3 at default grids (formulas as printed)", rows)
    print(f"criterion 2 evaluation {time.perf_counter() - start:.1f} s")
    assert ok


def test_rederived_evolution_equations_converge(residual_studies):
    """Companion: every rederived equation converges in dt and h. The
    absolute threshold is not applied (it is a resolution question)."""
    bad = []
    for label, study in residual_studies.items():
        for key, e in study.items():
            if "/printed" not in key and not e.passed(1.8):
                bad.append(f"{label} {key}: {e.summary()}")
    assert not bad, bad


# -- 3 ---------------------------------------------------------------------

def _jacobi_oracle(lam, nu, r):
    sol = solve_ivp(lambda _, y: [y[1], -nu * y[0]], (0.0, r), [1.0, lam],
                    rtol=1e-12, atol=1e-14, method="DOP853")
    c, dc = sol.y[:, -1]
    return dc / c


def test_criterion_3_parallel_eigenvalues():
    rng = np.random.default_rng(3)
    worst, kinds = 0.0, {"pos": 0, "zero": 0, "neg": 0}
    for i in range(100):
        kind = ("pos", "zero", "neg")[i % 3]
        nu = {"pos": rng.uniform(0.1, 4), "zero": 0.0, "neg": -rng.uniform(0.1, 4)}[kind]
        lam = rng.uniform(-2.5, 2.5)
        sign = rng.choice([-1, 1])
        reach = abs(focal_distance(lam, nu, sign))
        r = sign * rng.uniform(0.05, 0.8) * min(reach, 2.0)
        got = float(parallel_eigenvalue(lam, nu, r))
        ref = _jacobi_oracle(lam, nu, r)
        worst = max(worst, abs(got - ref) / max(abs(ref), 1e-300))
        kinds[kind] += 1
    spec = spectrum_for("cp2-geodesic-sphere", r0=0.7)
    invariant = all(np.array_equal(jacobi_invariance(spec, r).nus, spec.nus)
                    for r in np.linspace(-0.5, 0.5, 21))
    ok = worst <= 1e-8 and invariant
    record(3, ok, f"max rel error {worst:.2e} over {kinds}; nu spectrum exactly invariant: {invariant}")
    assert ok


# -- 4 ---------------------------------------------------------------------

def test_criterion_4_adapted_family_stays_adapted():
    fam = ParallelFamily(spectrum_for("cp2-geodesic-sphere", r0=0.7))
    details, ok = [], True
    for direction in ("forward", "backward"):
        traj = flow_ode(fam, 0.2, 1e-3, direction)
        rep = invariance_monitor(fam, traj)
        spectra_ok = all(sorted(s.nus.tolist()) == [1.0, 1.0, 4.0] for s in traj.spectra)
        # grid check on a few snapshots
        picks = list(range(0, len(traj.ts), 20))
        sub = type(traj)(traj.ts[picks], traj.rs[picks], traj.Hs[picks], [traj.spectra[i] for i in picks],
                         direction, traj.stop_reason)
        mon = gap_monitor(parallel_trace(lambda r: build("cp2-geodesic-sphere", m=13, r0=0.7 + r), sub))
        grid_ok = bool(np.all(mon.max_rho <= mon.rho_tol))
        reach = traj.ts[-1]
        note = "" if traj.stop_reason == "t_max" else f", collapses at t = {traj.collapse_time:.6f}"
        ok &= rep.ok and spectra_ok and grid_ok
        details.append(f"{direction}: t in [0, {reach:.3f}]{note}; max rho {rep.rho_max:.1e} "
                       f"(tol {rep.rho_tol:.1e}); grid max rho {mon.max_rho.max():.1e}; "
                       f"nu = {{1,1,4}} at every step: {spectra_ok}")
    record(4, ok, "rho stays below tolerance, nu spectrum constant (forward run ends at the focal collapse)",
           details)
    assert ok


# -- 5 ---------------------------------------------------------------------

def test_criterion_5_obstruction_vanishes_under_refinement():
    details, ok = [], True
    for r0 in (0.5, 0.7, 0.9):
        vals = {"rederived": [], "printed": []}
        for k in range(3):
            st = fundamental_forms(build("cp2-geodesic-sphere", m=_nested((13,) * 3, (False,) * 3, k), r0=r0))
            sl = st.interior(3 * 2**k)
            for variant, out in vals.items():
                norm = np.sqrt(np.maximum(st.operator_norm2(st.s_hat(variant)), 0))
                out.append(float(norm[sl].max()))
        for variant, v in vals.items():
            res = error_study(f"r0={r0} {variant}", v)
            ok &= res.passed(1.8)
            details.append(res.summary())
    record(5, ok, "max |Shat| -> 0 at order >= 1.8 on grids 13, 25, 49 per axis", details)
    assert ok


# -- 6 ---------------------------------------------------------------------

def test_criterion_6_maximum_principle():
    start = time.perf_counter()
    c1 = ta.c1_constant(ta.BoundInputs(n=2, c_a=1.0, r_norm=1.0, sup_mu=0.0))
    rng = np.random.default_rng(6)
    h = 2 * np.pi / 64
    dt = 0.24 * h * h
    passed = 0
    for _ in range(100):
        rho0 = rng.uniform(size=(64, 64)) ** rng.uniform(1, 6)
        passed += max_principle_check(2, c1, rho0, 0.05, dt).passed
    const = max_principle_check(2, c1, np.full((64, 64), 0.5), 0.05, dt)
    secs = time.perf_counter() - start
    ok = c1 == 40 and passed == 100 and const.equality_error <= 1e-6 and secs < 60
    record(6, ok, f"C1 = {c1:g}; {passed}/100 random rho_0 within the bound; "
                  f"constant case error {const.equality_error:.1e}; {secs:.1f} s")
    assert ok


# -- 7 ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def identity_studies():
    return {
        "sphere-r3": identity_study(lambda k: build("sphere-r3", m=_nested((17, 16), (False, True), k))),
        "cp2-geodesic-sphere": identity_study(
            lambda k: build("cp2-geodesic-sphere", m=_nested((13,) * 3, (False,) * 3, k))),
    }


# printed readings stand in for the identities whose printed form differs
PRINTED_SET = ("gauss", "codazzi_printed", "jacobi_first", "jacobi_second_printed",
               "jacobi_laplacian_printed", "mean_gradient")
REDERIVED_SET = ("gauss", "codazzi", "jacobi_first", "jacobi_second", "jacobi_laplacian", "mean_gradient")


def test_criterion_7_structural_identities(identity_studies):
    rows, ok = [], True
    for name, study in identity_studies.items():
        for key in PRINTED_SET:
            e = study[key]
            if not e.passed(1.8):
                ok = False
                rows.append(f"{name:20s} {e.summary()}")
    record(7, ok, "structural identities converge at order >= 1.8 (formulas as printed)", rows)
    assert ok


def test_rederived_identities_converge(identity_studies):
    bad = [f"{name} {study[k].summary()}" for name, study in identity_studies.items()
           for k in REDERIVED_SET if not study[k].passed(1.8)]
    assert not bad, bad


# -- 8 ---------------------------------------------------------------------

# built once: the curvature norm is cached per instance and costly to compute
MODELS = [AmbientModel(*m) for m in (("complex-projective", 4.0, 4), ("complex-hyperbolic", -4.0, 4),
                                     ("sphere", 1.0, 4), ("hyperbolic", -1.0, 4), ("sphere", 1.0, 3),
                                     ("hyperbolic", -1.0, 3))]


def _algebra(variant):
    rng = np.random.default_rng(8)
    ident, pair = 0.0, 0.0
    for i in range(1000):
        model = MODELS[i % len(MODELS)]
        p = point_sample(model, rng, a_scale=rng.uniform(0.2, 2.0))
        s = p.s
        scale = 1 + np.abs(p.a).max() * np.abs(s).max() ** 2
        ident = max(ident, abs(np.trace(ta.commutator(p.a, s) @ s)) / scale)
        pair = max(pair, reaction_mismatch(p, model, variant))
    violated, count = set(), 0
    for i in range(10_000):
        model = MODELS[i % len(MODELS)]
        p = point_sample(model, rng, a_scale=rng.uniform(0.1, 3.0))
        rep = ta.trace_estimates(p.a, p.j, p.s, p.h, model.r_norm, p.m, r1=p.r1, r3=p.r3)
        violated.update(rep.violated)
        count += 1
    return ident, pair, violated, count


@pytest.fixture(scope="module")
def algebra_printed():
    return _algebra("printed")


def test_criterion_8_algebraic_layer(algebra_printed):
    ident, pair, violated, count = algebra_printed
    ok = ident <= 1e-12 and pair <= 1e-12 and not violated
    record(8, ok, f"trace identity {ident:.1e}; reaction/commutator pair (as printed) {pair:.1e}; "
                  f"inequalities violated on {count} samples: {sorted(violated) or 'none'}")
    assert ok


def test_rederived_reaction_pair_is_consistent():
    rng = np.random.default_rng(80)
    worst = 0.0
    for i in range(1000):
        model = MODELS[i % len(MODELS)]
        worst = max(worst, reaction_mismatch(point_sample(model, rng), model, "rederived"))
    assert worst <= 1e-12


# -- 9 ---------------------------------------------------------------------

SUITES = [
    ["catalog"],
    ["parallel", "--example", "cp2-geodesic-sphere", "--t-max", "0.05", "--dt", "1e-3"],
    ["max-principle", "--samples", "5", "--grid", "32", "--t-max", "0.01"],
    ["monitor", "--example", "cp2-geodesic-sphere", "--reduced", "--t-max", "0.05", "--dt", "1e-3",
     "--direction", "backward"],
    ["monitor", "--example", "sphere-r3", "--m", "24", "--dt", "1e-4", "--steps", "3"],
    ["pde-flow", "--example", "sphere-r3", "--m", "24", "--dt", "1e-4", "--steps", "2"],
    ["verify-identities", "--example", "sphere-r3", "--base-m", "9"],
]


def _snapshot(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_9_determinism(tmp_path, capsys):
    differing = []
    for argv in SUITES:
        snaps = []
        for run in ("a", "b"):
            out = tmp_path / run / argv[0]
            main(argv + ["--out", str(out)])
            snaps.append(_snapshot(out))
        if not snaps[0] or snaps[0] != snaps[1]:
            differing.append(argv[0])
    capsys.readouterr()
    ok = not differing
    record(9, ok, f"{len(SUITES)} suites run twice, byte-identical CSV/JSON/SVG: "
                  f"{'yes' if ok else 'no: ' + ', '.join(differing)}")
    assert ok
