import csv
import json
import math
import subprocess
import sys

import jsonschema
import pytest

from mixedlap import __version__
from mixedlap.cli import EXIT_INPUT, EXIT_OK, dumps, load_schema, main
from mixedlap.mesh import read_vtk

from domains import CORPUS

SQUARE = str(CORPUS / "square_pi.json")
FIG4 = str(CORPUS / "fig4_triangle.json")


def _run(*argv):
    return main([str(a) for a in argv])


def _json(path, schema):
    doc = json.loads(path.read_text())
    jsonschema.validate(doc, load_schema(schema))
    return doc


def test_help_lists_subcommands():
    out = subprocess.run([sys.executable, "-m", "mixedlap", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for name in ("mesh", "solve-scalar", "solve-vector", "helmholtz", "check", "verify", "verify-all",
                 "export-vtk", "convergence"):
        assert name in out.stdout


def test_version(capsys):
    assert _run("--version") == EXIT_OK
    assert __version__ in capsys.readouterr().out


def test_solve_scalar_reference_square(tmp_path):
    out, vtk = tmp_path / "s.json", tmp_path / "s.vtk"
    assert _run("solve-scalar", "--domain", SQUARE, "--part", "gammac", "--h", 0.05, "--k", 3, "--out", out,
                "--vtk", vtk) == EXIT_OK
    doc = _json(out, "solve_scalar")
    assert doc["eigenvalues"][0] == pytest.approx(0.5, rel=1e-2)
    assert doc["eigenvalues"][1] == pytest.approx(2.5, rel=1e-2)
    assert len(doc["residuals"]) == 3
    assert len(read_vtk(vtk)[0]) == doc["mesh"]["n_nodes"]


def test_mesh_round_trip(tmp_path):
    stem = tmp_path / "sq"
    assert _run("mesh", "--domain", FIG4, "--h", 0.2, "--out", tmp_path / "m.json", "--mesh-out", stem,
                "--vtk", tmp_path / "m.vtk") == EXIT_OK
    doc = _json(tmp_path / "m.json", "mesh")
    assert stem.with_suffix(".node").exists() and stem.with_suffix(".ele").exists()
    assert doc["mesh"]["min_angle_deg"] >= 15.0
    # re-import needs the marker map in the domain file
    dom = json.loads((CORPUS / "fig4_triangle.json").read_text())
    dom["markers"] = doc["markers"]
    df = tmp_path / "fig4_markers.json"
    df.write_text(json.dumps(dom))
    assert _run("mesh", "--domain", df, "--import", stem, "--out", tmp_path / "i.json") == EXIT_OK
    again = _json(tmp_path / "i.json", "mesh")
    assert again["mesh"]["n_triangles"] == doc["mesh"]["n_triangles"]


def test_solve_vector_both_forms(tmp_path):
    out = tmp_path / "v.json"
    assert _run("solve-vector", "--domain", FIG4, "--h", 0.1, "--form", "both", "--out", out) == EXIT_OK
    doc = _json(out, "solve_vector")
    assert set(doc["forms"]) == {"curvature", "divcurl"}
    assert doc["minimizer"]["attained_by"] == "gammac"


def test_helmholtz_builtin_and_vtk_field(tmp_path):
    out, vtk = tmp_path / "h.json", tmp_path / "h.vtk"
    assert _run("helmholtz", "--domain", FIG4, "--h", 0.2, "--field", "rotational", "--out", out,
                "--vtk", vtk) == EXIT_OK
    doc = _json(out, "helmholtz")
    assert doc["orthogonality"] <= 1e-12
    assert doc["pythagoras_defect"] <= 1e-8
    # a gradient field written by export-vtk decomposes with a tiny remainder
    ev = tmp_path / "e.vtk"
    assert _run("export-vtk", "--domain", FIG4, "--h", 0.2, "--out", ev) == EXIT_OK
    assert _run("helmholtz", "--domain", FIG4, "--h", 0.2, "--field", ev, "--field-name", "grad_psi_1",
                "--out", tmp_path / "h2.json") == EXIT_OK
    n = _json(tmp_path / "h2.json", "helmholtz")["norms"]
    assert n["residual"] < 1e-2 * n["field"]


def test_export_vtk_fields(tmp_path):
    out = tmp_path / "e.vtk"
    assert _run("export-vtk", "--domain", FIG4, "--h", 0.2, "--k", 2, "--out", out) == EXIT_OK
    _, _, point, cell = read_vtk(out)
    assert {"psi_1", "psi_2", "phi_1", "phi_2", "grad_psi_1", "perp_grad_phi_1"} <= set(point) | set(cell)


def test_check(tmp_path):
    assert _run("check", "--domain", FIG4, "--out", tmp_path / "c.json") == EXIT_OK
    doc = _json(tmp_path / "c.json", "check")
    assert doc["hypotheses"]["all_pass"]
    assert doc["hotspot_corner"] is not None


def test_verify(tmp_path):
    out = tmp_path / "v.json"
    assert _run("verify", "--domain", FIG4, "--levels", "0.2,0.1,0.05", "--out", out) == EXIT_OK
    doc = _json(out, "verify")
    assert set(doc["report"]["verdicts"].values()) == {"confirmed"}


def test_convergence(tmp_path):
    out = tmp_path / "c.json"
    levels = ",".join(str(math.pi * math.sqrt(2) / n) for n in (8, 16, 32))
    assert _run("convergence", "--domain", SQUARE, "--part", "gammac", "--levels", levels, "--exact", 0.5,
                "--out", out) == EXIT_OK
    rows = _json(out, "convergence")["rows"]
    assert [r["flag"] for r in rows] == [None, "ok", "ok"]


def test_verify_all_is_deterministic(tmp_path):
    outs = []
    for i in range(2):
        out, summ = tmp_path / f"all{i}.json", tmp_path / f"all{i}.csv"
        assert _run("verify-all", "--corpus", CORPUS, "--divisions", "4,8", "--out", out,
                    "--summary", summ) == EXIT_OK
        outs.append((out.read_bytes(), summ.read_bytes()))
    assert outs[0] == outs[1]
    _json(tmp_path / "all0.json", "verify_all")
    rows = list(csv.DictReader((tmp_path / "all0.csv").open()))
    assert sorted(r["domain"] for r in rows) == sorted(p.stem for p in CORPUS.glob("*.json"))


# -- invalid input -----------------------------------------------------------------------


def test_missing_domain_file(tmp_path):
    out = tmp_path / "x.json"
    assert _run("check", "--domain", tmp_path / "nope.json", "--out", out) == EXIT_INPUT
    assert not out.exists()


@pytest.mark.parametrize("argv", [
    ["solve-scalar", "--domain", SQUARE, "--part", "gammac", "--h", "0.1", "--k", "0"],
    ["solve-scalar", "--domain", SQUARE, "--part", "gammac", "--h", "-0.1"],
    ["solve-scalar", "--domain", SQUARE, "--part", "neumann", "--h", "0.1"],
    ["solve-scalar", "--domain", SQUARE, "--part", "gammac"],
    ["convergence", "--domain", SQUARE, "--part", "gammac", "--levels", "0.2,0.1"],
    ["helmholtz", "--domain", SQUARE, "--h", "0.2", "--field", "vortex"],
    ["frobnicate"],
])
def test_bad_arguments(tmp_path, argv):
    out = tmp_path / "x.json"
    assert _run(*argv, "--out", out) == EXIT_INPUT
    assert not out.exists()


@pytest.mark.parametrize("doc", [
    "{not json",
    json.dumps({"arcs": []}),
    json.dumps({"arcs": [{"kind": "spline", "label": "gamma", "data": {}}]}),
    json.dumps({"arcs": [{"kind": "segment", "label": "gamma", "data": {"start": [0, 0], "end": [1, 0]}},
                         {"kind": "segment", "label": "gamma", "data": {"start": [1, 0], "end": [0, 1]}},
                         {"kind": "segment", "label": "gamma", "data": {"start": [0, 1], "end": [0, 0]}}]}),
])
def test_malformed_domain(tmp_path, doc):
    path = tmp_path / "d.json"
    path.write_text(doc)
    assert _run("check", "--domain", path, "--out", tmp_path / "x.json") == EXIT_INPUT
    assert not (tmp_path / "x.json").exists()


def test_dumps_is_canonical():
    text = dumps({"b": float("nan"), "a": (1, 0.1)})
    assert text == '{\n  "a": [\n    1,\n    0.1\n  ],\n  "b": null\n}\n'
