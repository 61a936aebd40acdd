"""Regenerate the frozen VTK golden file used by tests/test_mesh.py.

Run only after an intentional change of the VTK writer or the mesher:
    PYTHONPATH=src python3 tools/make_golden.py
"""
import math
from pathlib import Path

from mixedlap.geometry import polygon
from mixedlap.mesh import export_vtk, triangulate
from mixedlap.scalar_fem import nodal_gradient, solve_mixed

OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "square_psi1.vtk"


def golden_case():
    pi = math.pi
    dom = polygon([(0, 0), (pi, 0), (pi, pi), (0, pi)], ["gammac", "gamma", "gamma", "gammac"])
    mesh = triangulate(dom, pi / 4)
    res = solve_mixed(mesh, "gammac", 1)
    psi = res.positive_first
    return mesh, {"psi1": psi}, {"grad_psi1": nodal_gradient(mesh, psi)}


if __name__ == "__main__":
    mesh, pf, cf = golden_case()
    OUT.parent.mkdir(parents=True, exist_ok=True)
    export_vtk(mesh, OUT, pf, cf, title="psi1 on the square (0,pi)^2")
    print(f"wrote {OUT} ({mesh.n_nodes} nodes)")
