import csv
import json
import xml.etree.ElementTree as ET

import pytest

from curvflow import io
from curvflow.cli import main


def test_csv_is_rfc4180_with_repr_floats(tmp_path):
    path = io.write_csv(tmp_path / "x.csv", ["a", "b"], [(0.1, "x,y"), {"a": 1e-300, "b": None}])
    raw = path.read_bytes()
    assert raw == b'a,b\r\n0.1,"x,y"\r\n1e-300,\r\n'
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    assert float(rows[2][0]) == 1e-300


def test_manifest_round_trip_and_hash(tmp_path):
    cfg = {"b": 1.0, "a": [1, 2]}
    path = io.write_manifest(tmp_path / "m.json", cfg, result={"x": float("nan")})
    data = io.read_manifest(path)
    assert data["schema"] == io.SCHEMA
    assert data["config_hash"] == io.config_hash({"a": [1, 2], "b": 1.0})
    assert data["result"]["x"] == "nan"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema": 99}))
    with pytest.raises(ValueError):
        io.read_manifest(bad)


def test_svg_is_well_formed():
    svg = io.line_chart_svg([0, 1, 2], {"rho": [0, 1, 4], "mu": [1, 1, 1]}, title="a < b")
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    assert len(root.findall("{http://www.w3.org/2000/svg}polyline")) == 2


def _files(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_parallel_suite_is_deterministic(tmp_path, capsys):
    args = ["parallel", "--example", "cp2-geodesic-sphere", "--t-max", "0.05", "--dt", "1e-3"]
    assert main(args + ["--out", str(tmp_path / "one")]) == 0
    assert main(args + ["--out", str(tmp_path / "two")]) == 0
    one, two = _files(tmp_path / "one"), _files(tmp_path / "two")
    assert one and one == two


def test_environment_sets_output_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("CURVFLOW_OUT", str(tmp_path / "env"))
    assert main(["catalog"]) == 0
    assert (tmp_path / "env" / "catalog" / "catalog.csv").exists()
    assert main(["catalog", "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "catalog" / "catalog.csv").exists()


def test_flags_override_config(tmp_path, capsys):
    conf = tmp_path / "run.ini"
    conf.write_text("[run]\nexample = sphere-r3\nt_max = 0.01\ndt = 1e-3\n")
    assert main(["parallel", "--config", str(conf), "--dt", "2e-3", "--out", str(tmp_path)]) == 0
    data = io.read_manifest(tmp_path / "parallel" / "manifest.json")
    assert data["config"]["dt"] == 2e-3
    assert data["config"]["example"] == "sphere-r3"


@pytest.mark.parametrize("argv", [
    ["parallel", "--dt", "abc"],
    ["parallel", "--example", "no-such-example"],
    ["pde-flow", "--method", "leapfrog"],
])
def test_configuration_errors_exit_2(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_unknown_config_key_exits_2(tmp_path, capsys):
    conf = tmp_path / "bad.ini"
    conf.write_text("[run]\ncolour = blue\n")
    assert main(["catalog", "--config", str(conf), "--out", str(tmp_path)]) == 2


def test_max_principle_command(tmp_path, capsys):
    code = main(["max-principle", "--samples", "3", "--grid", "32", "--t-max", "0.005",
                 "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "C1 = 40" in out and "bound verdict PASS" in out
    data = io.read_manifest(tmp_path / "max-principle" / "manifest.json")
    assert data["failures"] == []


def test_printed_identities_fail_on_cp2(tmp_path, capsys):
    code = main(["verify-identities", "--example", "cp2-geodesic-sphere", "--base-m", "9",
                 "--variant", "printed", "--out", str(tmp_path)])
    assert code == 1
    assert "[FAIL]" in capsys.readouterr().out
    assert main(["report", "--out", str(tmp_path)]) == 1
    assert "FAIL" in (tmp_path / "report.txt").read_text()
