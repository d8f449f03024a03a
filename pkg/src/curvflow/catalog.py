"""Built-in example immersions with their expected adaptedness status."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ambient import AmbientModel
from .immersion import Grid, ParametrizedImmersion, fundamental_forms

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    ambient: str
    params: dict
    status: str
    note: str


CATALOG = (
    CatalogEntry("plane-r3", "euclidean(3)", {}, "curvature-adapted (trivially)",
                 "flat patch, A = 0"),
    CatalogEntry("sphere-r3", "euclidean(3)", {"R0": 1.0}, "curvature-adapted (trivially)",
                 "round sphere, A = Id/R0"),
    CatalogEntry("clifford-torus-s3", "sphere(3, c=1)", {}, "curvature-adapted (trivially)",
                 "minimal torus, principal curvatures +-1"),
    CatalogEntry("equator-s3", "sphere(3, c=1)", {"n": 2}, "curvature-adapted (trivially)",
                 "totally geodesic great sphere; equator-s4 gives n = 3"),
    CatalogEntry("hyperbolic-sphere-h3", "hyperbolic(3, c=-1)", {"R0": 1.0},
                 "curvature-adapted (trivially)", "geodesic sphere, A = coth(R0) Id"),
    CatalogEntry("cp2-geodesic-sphere", "cp(2, c=4)", {"r0": 0.7}, "curvature-adapted (Hopf)",
                 "principal curvatures cot r0 (x2), 2 cot 2r0"),
    CatalogEntry("cp2-perturbed", "cp(2, c=4)", {"r0": 0.7, "seed": 0, "amplitude": 0.05},
                 "generically not curvature-adapted", "random smooth radial perturbation"),
)

DEFAULT_SHAPE = {2: 64, 3: 24}


def catalog():
    return list(CATALOG)


def entry(name: str) -> CatalogEntry:
    for e in CATALOG:
        if e.name == name or (name.startswith("equator-s") and e.name == "equator-s3"):
            return e
    raise KeyError(f"unknown example {name!r}")


def _orient_outward(im: ParametrizedImmersion, center=None) -> ParametrizedImmersion:
    """Flip the orientation flag so xi points away from ``center`` (chart coords)."""
    mid = tuple(m // 2 for m in im.grid.shape)
    sub = tuple(slice(max(i - 2, 0), i + 3) for i in mid)
    probe_grid = Grid(
        tuple(lo + h * s.start for lo, h, s in zip(im.grid.lower, im.grid.spacing, sub)),
        tuple(lo + h * (s.stop - 1) for lo, h, s in zip(im.grid.lower, im.grid.spacing, sub)),
        tuple(s.stop - s.start for s in sub),
    )
    probe = ParametrizedImmersion(probe_grid, im.points[sub], im.ambient, im.orientation)
    xi = fundamental_forms(probe).xi[(2,) * im.grid.n]
    p = im.points[mid]
    c = np.zeros_like(p) if center is None else np.asarray(center, float)
    if np.dot(xi, p - c) < 0:
        im.orientation = -im.orientation
    return im


def _shape(m, n):
    # m may be a full shape so that refined grids stay nested
    return tuple(int(k) for k in m) if np.ndim(m) else (int(m),) * n


def _sphere_angles(m, pole_gap=0.35):
    return Grid((pole_gap, 0.0), (np.pi - pole_gap, TWO_PI), _shape(m, 2), (False, True))


def _spherical(grid, radius):
    th, ph = np.moveaxis(grid.mesh(), -1, 0)
    return np.stack(
        [radius * np.sin(th) * np.cos(ph), radius * np.sin(th) * np.sin(ph), radius * np.cos(th)],
        axis=-1,
    )


def plane_r3(m=None, half_width=1.0):
    m = m if m is not None else DEFAULT_SHAPE[2]
    grid = Grid((-half_width, -half_width), (half_width, half_width), _shape(m, 2))
    u, v = np.moveaxis(grid.mesh(), -1, 0)
    pts = np.stack([u, v, np.zeros_like(u)], axis=-1)
    return ParametrizedImmersion(grid, pts, AmbientModel("euclidean", 0.0, 3), name="plane-r3")


def sphere_r3(R0=1.0, m=None):
    m = m if m is not None else DEFAULT_SHAPE[2]
    grid = _sphere_angles(m)
    im = ParametrizedImmersion(grid, _spherical(grid, R0), AmbientModel("euclidean", 0.0, 3),
                               name="sphere-r3")
    return _orient_outward(im)


def _from_s3(y):
    """Stereographic chart of the unit 3-sphere (projection from y4 = -1)."""
    return y[..., :3] / (1 + y[..., 3:4])


def clifford_torus_s3(m=None, a=np.pi / 4):
    m = m if m is not None else DEFAULT_SHAPE[2]
    grid = Grid((0.0, 0.0), (TWO_PI, TWO_PI), _shape(m, 2), (True, True))
    u, v = np.moveaxis(grid.mesh(), -1, 0)
    y = np.stack([np.cos(a) * np.cos(u), np.cos(a) * np.sin(u),
                  np.sin(a) * np.cos(v), np.sin(a) * np.sin(v)], axis=-1)
    im = ParametrizedImmersion(grid, _from_s3(y), AmbientModel("sphere", 1.0, 3),
                               name="clifford-torus-s3")
    return _orient_outward(im)


def equator(n=2, m=None):
    """Great hypersphere y_{n+2} = 0, i.e. the unit sphere of the chart."""
    m = m if m is not None else DEFAULT_SHAPE[n]
    model = AmbientModel("sphere", 1.0, n + 1)
    if n == 2:
        grid = _sphere_angles(m)
        pts = _spherical(grid, 1.0)
    else:
        grid, pts = _hopf_s3(m, 1.0, span=np.pi / 2)
    im = ParametrizedImmersion(grid, pts, model, name=f"equator-s{n + 1}")
    return _orient_outward(im)


def hyperbolic_sphere_h3(R0=1.0, m=None):
    m = m if m is not None else DEFAULT_SHAPE[2]
    grid = _sphere_angles(m)
    im = ParametrizedImmersion(grid, _spherical(grid, np.tanh(R0 / 2)),
                               AmbientModel("hyperbolic", -1.0, 3), name="hyperbolic-sphere-h3")
    return _orient_outward(im)


def _hopf_grid(m, gap=0.3, span=None):
    # span=None wraps the two circle angles; otherwise a patch [0, span]^2
    if span is None:
        return Grid((gap, 0.0, 0.0), (np.pi / 2 - gap, TWO_PI, TWO_PI), _shape(m, 3),
                    (False, True, True))
    return Grid((gap, 0.0, 0.0), (np.pi / 2 - gap, span, span), _shape(m, 3))


def _hopf_s3(m, radius, bump=None, span=None):
    """Sphere of chart radius ``radius`` in R^4 via Hopf angles (eta, a, b)."""
    grid = _hopf_grid(m, span=span)
    eta, a, b = np.moveaxis(grid.mesh(), -1, 0)
    rad = radius if bump is None else radius * (1 + bump(eta, a, b))
    pts = np.stack([np.cos(eta) * np.cos(a), np.cos(eta) * np.sin(a),
                    np.sin(eta) * np.cos(b), np.sin(eta) * np.sin(b)], axis=-1)
    return grid, rad[..., None] * pts if np.ndim(rad) else rad * pts


def cp2_geodesic_sphere(r0=0.7, m=None, c=4.0, span=np.pi / 2):
    """Geodesic sphere of radius r0 about the chart origin of CP^2."""
    m = m if m is not None else DEFAULT_SHAPE[3]
    model = AmbientModel("complex-projective", c, 4)
    grid, pts = _hopf_s3(m, np.tan(np.sqrt(c / 4) * r0), span=span)
    im = ParametrizedImmersion(grid, pts, model, name="cp2-geodesic-sphere")
    return _orient_outward(im)


def cp2_perturbed(r0=0.7, seed=0, amplitude=0.05, m=None, c=4.0, modes=3, span=None):
    m = m if m is not None else DEFAULT_SHAPE[3]
    rng = np.random.default_rng(seed)
    coef = rng.normal(size=(modes, 4))

    def bump(eta, a, b):
        out = np.zeros_like(eta)
        for k in range(modes):
            p, q, s, w = coef[k]
            out += (np.cos((k + 1) * a + p) * np.sin(2 * eta + q)
                    + np.sin((k + 1) * b + s) * np.cos(2 * eta) * w)
        return amplitude * out / modes

    model = AmbientModel("complex-projective", c, 4)
    grid, pts = _hopf_s3(m, np.tan(np.sqrt(c / 4) * r0), bump, span)
    im = ParametrizedImmersion(grid, pts, model, name="cp2-perturbed")
    return _orient_outward(im)


BUILDERS = {
    "plane-r3": plane_r3,
    "sphere-r3": sphere_r3,
    "clifford-torus-s3": clifford_torus_s3,
    "equator-s3": lambda m=None: equator(2, m),
    "equator-s4": lambda m=None: equator(3, m),
    "hyperbolic-sphere-h3": hyperbolic_sphere_h3,
    "cp2-geodesic-sphere": cp2_geodesic_sphere,
    "cp2-perturbed": cp2_perturbed,
}


def build(name: str, **params) -> ParametrizedImmersion:
    if name not in BUILDERS:
        raise KeyError(f"unknown example {name!r}")
    params = {k: v for k, v in params.items() if v is not None}
    return BUILDERS[name](**params)


def spectrum_for(name: str, **params):
    """Constant principal data ``(lam, nu, mult)`` of an example, when it is
    isoparametric with constant spectrum."""
    from .parallel import IsoparametricSpectrum

    p = {k: v for k, v in params.items() if v is not None}
    if name == "plane-r3":
        return IsoparametricSpectrum(((0.0, 0.0, 2),), "euclidean")
    if name == "sphere-r3":
        return IsoparametricSpectrum(((1 / p.get("R0", 1.0), 0.0, 2),), "euclidean")
    if name == "clifford-torus-s3":
        return IsoparametricSpectrum(((1.0, 1.0, 1), (-1.0, 1.0, 1)), "sphere")
    if name.startswith("equator-s"):
        return IsoparametricSpectrum(((0.0, 1.0, int(name[len("equator-s"):]) - 1),), "sphere")
    if name == "hyperbolic-sphere-h3":
        return IsoparametricSpectrum(((1 / np.tanh(p.get("R0", 1.0)), -1.0, 2),), "hyperbolic")
    if name == "cp2-geodesic-sphere":
        c = p.get("c", 4.0)
        k = np.sqrt(c / 4)
        r0 = p.get("r0", 0.7)
        return IsoparametricSpectrum(
            ((k / np.tan(k * r0), c / 4, 2), (2 * k / np.tan(2 * k * r0), c, 1)), "complex-projective"
        )
    raise KeyError(f"example {name!r} has no constant spectrum")
