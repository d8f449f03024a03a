"""Command line entry point.

Settings come from an optional ``key = value`` config file with sections
(``--config``) and are overridden by flags. The output directory is
``--out``, else ``$CURVFLOW_OUT``, else the config value, else
``curvflow-out``. Exit status: 0 when every asserted check passes, 1 on a
failed check, 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import catalog as cat
from . import io
from .ambient import AmbientModel
from .flow import (
    TITLES,
    pairing_gate,
    gap_monitor,
    max_principle_check,
    parallel_trace,
    run_pde_flow,
)
from .immersion import load_grid_file
from .parallel import IsoparametricSpectrum, ParallelFamily, flow_ode, invariance_monitor, write_trajectory_csv
from .studies import default_checks, identity_study, time_study, trace_from_steps
from .tensor_algebra import BoundInputs, c1_constant

IDENTITY_TITLES = {
    "gauss": "Gauss equation",
    "codazzi": "Codazzi equation",
    "codazzi_printed": "Codazzi equation (printed sign)",
    "jacobi_first": "normal Jacobi first derivative",
    "jacobi_second": "normal Jacobi second derivative",
    "jacobi_second_printed": "normal Jacobi second derivative (printed form)",
    "jacobi_laplacian": "normal Jacobi Laplacian",
    "jacobi_laplacian_printed": "normal Jacobi Laplacian (printed form)",
    "mean_gradient": "mean curvature gradient",
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    example: str = "sphere-r3"
    grid_file: str = ""
    model_kind: str = ""
    model_c: float = 0.0
    model_dim: int = 3
    periodic: str = ""
    m: int = 0
    levels: int = 3
    base_m: int = 0
    R0: float = 1.0
    r0: float = 0.7
    amplitude: float = 0.05
    spectrum_file: str = ""
    dt: float = 1e-4
    t_max: float = 0.2
    steps: int = 10
    method: str = "rk2"
    direction: str = "forward"
    variant: str = "rederived"
    reduced: bool = False
    rho_tol: float = 0.0  # 0 selects the scaled default
    delta: float = 1e-6
    kappa: float = 0.25
    min_order: float = 1.8
    n: int = 2
    ca: float = 1.0
    rnorm: float = 1.0
    supmu: float = 0.0
    samples: int = 100
    grid: int = 64
    seed: int = 0
    out: str = ""

    def validate(self):
        for name in ("delta", "kappa", "min_order", "dt", "t_max"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.rho_tol < 0:
            raise ConfigError("rho_tol must be non-negative")
        if self.direction not in ("forward", "backward"):
            raise ConfigError("direction must be forward or backward")
        if self.variant not in ("printed", "rederived"):
            raise ConfigError("variant must be printed or rederived")
        if self.method not in ("euler", "rk2"):
            raise ConfigError("method must be euler or rk2")
        if self.levels < 3:
            raise ConfigError("levels must be at least 3")
        if not self.grid_file and self.example not in cat.BUILDERS:
            raise ConfigError(f"unknown example {self.example!r}")
        return self

    def public(self) -> dict:
        d = asdict(self)
        d.pop("out")
        return d


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name, raw):
    kind = _TYPES[name]
    try:
        if kind == "bool":
            return str(raw).strip().lower() in ("1", "true", "yes", "on")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return str(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def load_config(path, overrides: dict) -> RunConfig:
    values = {}
    if path:
        parser = configparser.ConfigParser()
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        for section in parser.sections():
            for key, raw in parser.items(section):
                key = key.replace("-", "_")
                if key not in _TYPES:
                    raise ConfigError(f"unknown config key {section}.{key}")
                values[key] = _coerce(key, raw)
    for key, val in overrides.items():
        if val is not None and key in _TYPES:
            values[key] = _coerce(key, val)
    cfg = RunConfig(**values)
    env = os.environ.get("CURVFLOW_OUT")
    if overrides.get("out"):
        cfg.out = overrides["out"]
    elif env:
        cfg.out = env
    cfg.out = cfg.out or "curvflow-out"
    return cfg.validate()


# -- helpers ---------------------------------------------------------------

class Outcome:
    def __init__(self):
        self.failures = []

    def check(self, ok, tag, detail):
        status = "ok" if ok else "FAIL"
        print(f"  [{status}] {tag}: {detail}")
        if not ok:
            self.failures.append(f"{tag}: {detail}")

    @property
    def code(self):
        return 0 if not self.failures else 1


def _params(cfg, name):
    if name in ("sphere-r3", "hyperbolic-sphere-h3"):
        return {"R0": cfg.R0}
    if name == "cp2-geodesic-sphere":
        return {"r0": cfg.r0}
    if name == "cp2-perturbed":
        return {"r0": cfg.r0, "seed": cfg.seed, "amplitude": cfg.amplitude}
    return {}


def _immersion(cfg, m=None):
    if cfg.grid_file:
        if not cfg.model_kind:
            raise ConfigError("a grid file needs model_kind")
        model = AmbientModel(cfg.model_kind, cfg.model_c, cfg.model_dim)
        periodic = tuple(c == "1" for c in cfg.periodic.replace(",", "")) or None
        return load_grid_file(cfg.grid_file, model, periodic=periodic)
    params = _params(cfg, cfg.example)
    return cat.build(cfg.example, m=m or cfg.m or None, **params)


def _level_shape(im, k):
    """Shape of the k-th nested refinement of ``im``'s grid."""
    return tuple(s * 2**k if p else (s - 1) * 2**k + 1 for s, p in zip(im.grid.shape, im.grid.periodic))


def _spectrum(cfg):
    if cfg.spectrum_file:
        return IsoparametricSpectrum.load(cfg.spectrum_file)
    try:
        return cat.spectrum_for(cfg.example, **_params(cfg, cfg.example))
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from exc


def _outdir(cfg, sub):
    path = Path(cfg.out) / sub
    path.mkdir(parents=True, exist_ok=True)
    return path


def _rows(study):
    for key, e in sorted(study.items()):
        r = e.result
        yield {
            "check": key,
            "values": " ".join(repr(v) for v in r.values),
            "orders": " ".join(repr(o) for o in r.orders),
            "exact": r.exact,
            "limit": r.limit,
            "absolute": e.absolute,
            "passed": e.passed(),
        }


_STUDY_HEADER = ["check", "values", "orders", "exact", "limit", "absolute", "passed"]


def _manifest(cfg, out, suite, **sections):
    config = dict(cfg.public(), suite=suite)
    return io.write_manifest(out / "manifest.json", config, suite=suite, **sections)


# -- subcommands -----------------------------------------------------------

def cmd_catalog(cfg, args):
    print(f"{'name':24s} {'ambient':22s} status")
    for e in cat.catalog():
        print(f"{e.name:24s} {e.ambient:22s} {e.status}")
    out = _outdir(cfg, "catalog")
    io.write_csv(out / "catalog.csv", ["name", "ambient", "status", "note"],
                 [asdict(e) for e in cat.catalog()])
    return 0


def cmd_verify_identities(cfg, args):
    if cfg.grid_file:
        raise ConfigError("refinement studies need a built-in example")
    base = _immersion(cfg, cfg.base_m or None)
    if not cfg.base_m:
        coarse = 17 if base.grid.n == 2 else 13
        base = _immersion(cfg, tuple(coarse - 1 if p else coarse for p in base.grid.periodic))
    shapes = [_level_shape(base, k) for k in range(cfg.levels)]
    print(f"identities on {base.name}, grids {shapes}")

    def make(k):
        return _immersion(cfg, shapes[k])

    study = identity_study(make, cfg.levels)
    res = Outcome()
    for key, e in sorted(study.items()):
        asserted = key.endswith("_printed") == (cfg.variant == "printed") or key == "gauss" \
            or key == "jacobi_first" or key == "mean_gradient"
        tag = IDENTITY_TITLES[key]
        if asserted:
            res.check(e.passed(cfg.min_order), tag, e.result.summary())
        else:
            print(f"  [info] {tag}: {e.result.summary()}")
    out = _outdir(cfg, "identities")
    io.write_csv(out / "identities.csv", _STUDY_HEADER, _rows(study))
    _manifest(cfg, out, "identities",
                      model=base.ambient.kind, residuals={k: e.result.values for k, e in study.items()},
                      failures=res.failures)
    return res.code


def cmd_parallel(cfg, args):
    spec = _spectrum(cfg)
    fam = ParallelFamily(spec, cfg.delta)
    traj = flow_ode(fam, cfg.t_max, cfg.dt, cfg.direction)
    rep = invariance_monitor(fam, traj, cfg.rho_tol or None)
    out = _outdir(cfg, "parallel")
    write_trajectory_csv(traj, out / "trajectory.csv")
    print(f"reduced flow of {cfg.example}: stop={traj.stop_reason} steps={len(traj.ts) - 1}")
    if traj.collapse_time is not None:
        print(f"  collapse at t = {traj.collapse_time:.12g} (focal offset {traj.focal_radius:.12g})")
    res = Outcome()
    res.check(rep.nu_constant and rep.mult_constant, "constant normal Jacobi spectrum",
              f"nu = {sorted(set(spec.nus.tolist()))}")
    res.check(rep.rho_max <= rep.rho_tol, "curvature-adaptedness along the flow",
              f"max rho = {rep.rho_max:.3e} <= {rep.rho_tol:.3e}")
    _manifest(cfg, out, "parallel", spectrum=spec.to_text(),
                      stop_reason=traj.stop_reason, collapse_time=traj.collapse_time,
                      collapse_bracket=traj.collapse_bracket, rho_max=rep.rho_max, rho_tol=rep.rho_tol,
                      failures=res.failures)
    return res.code


def cmd_pde_flow(cfg, args):
    im = _immersion(cfg)
    trace = run_pde_flow(im, cfg.dt, cfg.steps, cfg.direction, cfg.method)
    mon = gap_monitor(trace, cfg.rho_tol or None, cfg.variant)
    out = _outdir(cfg, "pde-flow")
    io.write_csv(out / "monitor.csv", ["t", "max_rho", "sup_mu", "max_s_hat", "h_min", "h_max"], mon.rows())
    print(f"PDE flow of {im.name}: {cfg.steps} {cfg.method} steps of dt = {cfg.dt:g}")
    study = time_study(trace_from_steps(im, cfg.method, cfg.direction), cfg.dt, default_checks())
    res = Outcome()
    for key, e in sorted(study.items()):
        tag = TITLES[key.split("/")[0]]
        if key.endswith("/printed") == (cfg.variant == "printed"):
            res.check(e.passed(cfg.min_order), tag, e.summary())
        else:
            print(f"  [info] {tag} (other form): {e.summary()}")
    io.write_csv(out / "residuals.csv", _STUDY_HEADER, _rows(study))
    _manifest(cfg, out, "pde-flow", model=im.ambient.kind,
                      residuals={k: e.result.values for k, e in study.items()}, t_min=mon.t_min,
                      failures=res.failures)
    return res.code


def cmd_max_principle(cfg, args):
    c1 = c1_constant(BoundInputs(cfg.n, cfg.ca, cfg.rnorm, cfg.supmu))
    print(f"C1 = {c1:g}")
    rng = np.random.default_rng(cfg.seed)
    h = 2 * np.pi / cfg.grid
    dt = 0.96 * cfg.kappa * h * h  # inside the explicit diffusion limit on a 2-D grid
    t_max = cfg.t_max
    rows = []
    for i in range(cfg.samples):
        rho0 = rng.uniform(size=(cfg.grid, cfg.grid)) ** rng.uniform(1, 6)
        rep = max_principle_check(cfg.n, c1, rho0, t_max, dt)
        rows.append({"sample": i, "max_ratio": rep.max_ratio, "monotone": rep.rescaled_monotone,
                     "passed": rep.passed})
    const = max_principle_check(cfg.n, c1, np.full((cfg.grid, cfg.grid), 0.5), t_max, dt)
    res = Outcome()
    res.check(all(r["passed"] for r in rows), "maximum principle bound",
              f"{sum(r['passed'] for r in rows)}/{len(rows)} samples within max(rho_0) e^(C1 t)")
    res.check(const.equality_error < 1e-6, "maximum principle bound (constant data)",
              f"equality error {const.equality_error:.2e}")
    verdict = "PASS" if res.code == 0 else "FAIL"
    print(f"bound verdict {verdict}")
    out = _outdir(cfg, "max-principle")
    io.write_csv(out / "samples.csv", ["sample", "max_ratio", "monotone", "passed"], rows)
    _manifest(cfg, out, "max-principle", c1=c1,
                      bound_verdict=verdict, equality_error=const.equality_error, failures=res.failures)
    return res.code


def cmd_monitor(cfg, args):
    if cfg.reduced:
        spec = _spectrum(cfg)
        traj = flow_ode(ParallelFamily(spec, cfg.delta), cfg.t_max, cfg.dt, cfg.direction)
        trace = parallel_trace(lambda r: None, traj, label=cfg.example)
        mon = gap_monitor(trace, cfg.rho_tol or None, cfg.variant, use_grid=False)
    else:
        trace = run_pde_flow(_immersion(cfg), cfg.dt, cfg.steps, cfg.direction, cfg.method)
        mon = gap_monitor(trace, cfg.rho_tol or None, cfg.variant)
    gate = pairing_gate(mon)
    out = _outdir(cfg, "monitor")
    io.write_csv(out / "monitor.csv", ["t", "max_rho", "sup_mu", "max_s_hat", "h_min", "h_max"], mon.rows())
    data = mon.figure_dataset()
    io.write_svg(out / "gap.svg", data["t"], {"max rho_t": data["max_rho"], "sup mu_t": data["sup_mu"]},
                 title=f"gap monitor: {cfg.example}")
    t_min = "none" if mon.t_min is None else f"{mon.t_min:.6g}"
    print(f"gap monitor of {cfg.example}: t_min = {t_min}, rho_tol = {mon.rho_tol:.3e}")
    print(f"  pairing gate held: {gate.gate_held}; rho stayed small: {gate.rho_stayed_small}; "
          f"started adapted: {gate.initially_adapted}")
    if gate.counterexample_candidate:
        print("  note: gate held from an adapted start but rho grew (recorded, not asserted)")
    _manifest(cfg, out, "monitor", t_min=mon.t_min,
                      rho_tol=mon.rho_tol, gate=asdict(gate), failures=[])
    return 0


def cmd_report(cfg, args):
    root = Path(cfg.out)
    manifests = sorted(root.glob("*/manifest.json"))
    if not manifests:
        raise ConfigError(f"no manifests under {root}")
    lines = []
    code = 0
    for path in manifests:
        data = io.read_manifest(path)
        fails = data.get("failures", [])
        code = code or (1 if fails else 0)
        lines.append(f"{data.get('suite', path.parent.name)}: {'FAIL' if fails else 'ok'}"
                     f" (config {data['config_hash']})")
        lines.extend(f"  - {f}" for f in fails)
    text = "\n".join(lines) + "\n"
    (root / "report.txt").write_text(text)
    print(text, end="")
    return code


COMMANDS = {
    "catalog": cmd_catalog,
    "verify-identities": cmd_verify_identities,
    "parallel": cmd_parallel,
    "pde-flow": cmd_pde_flow,
    "max-principle": cmd_max_principle,
    "monitor": cmd_monitor,
    "report": cmd_report,
}

_FLAGS = {
    "verify-identities": ("example", "m", "base-m", "levels", "variant", "R0", "r0", "seed", "amplitude",
                          "min-order"),
    "parallel": ("example", "spectrum-file", "R0", "r0", "t-max", "dt", "direction", "rho-tol", "delta"),
    "pde-flow": ("example", "grid-file", "model-kind", "model-c", "model-dim", "periodic", "m", "R0", "r0",
                 "seed", "amplitude", "dt", "steps", "method", "direction", "variant", "kappa", "rho-tol",
                 "min-order"),
    "max-principle": ("n", "ca", "rnorm", "supmu", "samples", "grid", "t-max", "seed", "kappa"),
    "monitor": ("example", "grid-file", "model-kind", "model-c", "model-dim", "periodic", "m", "R0", "r0",
                "seed", "amplitude", "dt", "steps", "t-max", "method", "direction", "variant", "rho-tol",
                "reduced"),
    "catalog": (),
    "report": (),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="curvflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, flags in _FLAGS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config")
        sp.add_argument("--out")
        for flag in flags:
            dest = flag.replace("-", "_")
            if flag == "reduced":
                sp.add_argument("--reduced", action="store_const", const="true", default=None)
            else:
                sp.add_argument(f"--{flag}", dest=dest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, vars(args))
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
