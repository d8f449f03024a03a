import pytest

from curvflow.catalog import BUILDERS, build, catalog, entry, spectrum_for
from curvflow.immersion import adaptedness_report, fundamental_forms


def test_catalog_lists_every_builder_with_a_status():
    names = {e.name for e in catalog()}
    assert len(names) >= 7
    assert names <= set(BUILDERS)
    for e in catalog():
        assert e.status and e.ambient


def test_unknown_names():
    with pytest.raises(KeyError):
        build("torus-r5")
    with pytest.raises(KeyError):
        entry("torus-r5")
    with pytest.raises(KeyError):
        spectrum_for("cp2-perturbed")


@pytest.mark.parametrize("name", ["sphere-r3", "clifford-torus-s3", "cp2-geodesic-sphere"])
def test_adapted_examples_have_vanishing_gap(name):
    st = fundamental_forms(build(name, m=17))
    rep = adaptedness_report(st)
    assert rep.summary["rho_max"] <= 1e-10


def test_perturbed_example_is_not_adapted():
    st = fundamental_forms(build("cp2-perturbed", m=13))
    assert adaptedness_report(st).summary["rho_max"] > 1e-2


def test_perturbation_is_seeded():
    a = build("cp2-perturbed", m=9, seed=3).points
    b = build("cp2-perturbed", m=9, seed=3).points
    c = build("cp2-perturbed", m=9, seed=4).points
    assert (a == b).all()
    assert not (a == c).all()
