"""Which form of each identity survives grid refinement.

A correct identity has a residual that falls by about 4x per halving of
the grid. A wrong one levels off at a nonzero value. Run on the geodesic
sphere of CP^2, where the curvature terms are not trivial.
"""

from curvflow.catalog import build
from curvflow.studies import identity_study


def level(k):
    m = (13 - 1) * 2**k + 1
    return build("cp2-geodesic-sphere", m=m)


for name, entry in sorted(identity_study(level).items()):
    verdict = "converges" if entry.passed() else "does not converge"
    print(f"{name:26s} {verdict:18s} {entry.result.summary()}")
