"""Command-line entry point: ``mixedlap <subcommand> ...``.

Exit codes: 0 success, 2 invalid input, 3 solver failure.  Diagnostics go
to standard error; results are written only to the requested files, and
only after every result has been computed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import __version__
from .analysis import THEOREMS, convergence_study, run_theorem_suite
from .eigen import EigenSolverError, SingularFactorization
from .geometry import (
    GeometryError,
    Label,
    check_hypotheses,
    feasible_rotations,
    find_rotation,
    hotspot_corner,
    read_domain_file,
)
from .helmholtz import BUILTIN_FIELDS, DecompositionError, builtin_field, decompose, exact_discrete_orthogonality_check
from .mesh import MeshError, export_triangle, export_vtk, import_mesh, read_vtk, triangulate
from .scalar_fem import (
    AssemblyError,
    KernelPresent,
    gradient_field,
    hotspot_report,
    monotonicity_report,
    nodal_gradient,
    solve_mixed,
)
from .vector_fem import (
    assemble_curvature,
    assemble_divcurl,
    build_constraints,
    compare_forms,
    identify_minimizer,
    perp,
    solve_vector_evp,
)

__all__ = ["main", "RunConfig", "ConfigError", "dumps", "load_schema"]

log = logging.getLogger("mixedlap")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3


class ConfigError(ValueError):
    """Invalid command-line configuration."""


class SolverFailure(RuntimeError):
    pass


_INPUT_ERRORS = (ConfigError, GeometryError, DecompositionError)
_SOLVER_ERRORS = (SolverFailure, EigenSolverError, SingularFactorization, KernelPresent, AssemblyError)


# -- serialization ------------------------------------------------------------


def _plain(obj):
    """Convert numpy scalars/arrays, tuples and non-finite floats into JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, Label):
        return obj.value
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, shortest round-trip floats, NaN/inf as null."""
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def load_schema(name: str) -> dict:
    text = resources.files("mixedlap").joinpath("schemas", f"{name}.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _validated(doc: dict, schema: str) -> str:
    text = dumps(doc)
    try:
        jsonschema.validate(json.loads(text), load_schema(schema))
    except jsonschema.ValidationError as exc:
        # our own output violating its schema is a bug, not a user error
        raise RuntimeError(f"output does not match schema {schema}: {exc.message}") from exc
    return text


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return str(v)


# -- configuration ------------------------------------------------------------


@dataclass
class RunConfig:
    subcommand: str
    domain: Optional[Path] = None
    h: list = field(default_factory=list)
    k: int = 1
    form: str = "curvature"
    part: Optional[str] = None
    tol_kernel: Optional[float] = None
    tol: float = 1e-10
    seed: int = 0
    rotation: Optional[float] = None
    outputs: dict = field(default_factory=dict)
    verbosity: int = 0
    extra: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.k < 1:
            raise ConfigError("--k must be at least 1")
        if not self.tol > 0 or (self.tol_kernel is not None and not self.tol_kernel > 0):
            raise ConfigError("tolerances must be positive")
        for h in self.h:
            if not (h > 0 and math.isfinite(h)):
                raise ConfigError(f"mesh size {h!r} must be a positive finite number")
        if not any(v is not None for v in self.outputs.values()):
            raise ConfigError("no output requested")
        if self.domain is not None and not self.domain.is_file():
            raise ConfigError(f"domain file {self.domain} does not exist")
        return self


def _h_list(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse mesh sizes {text!r}") from exc


def _int_list(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse divisions {text!r}") from exc


def _config(args) -> RunConfig:
    outputs = {k: getattr(args, k, None) for k in ("out", "vtk", "summary", "mesh_out")}
    h = []
    if getattr(args, "h", None) is not None:
        h = [args.h]
    if getattr(args, "levels", None):
        h = _h_list(args.levels)
    cfg = RunConfig(
        subcommand=args.command,
        domain=Path(args.domain) if getattr(args, "domain", None) else None,
        h=h,
        k=getattr(args, "k", 1),
        form=getattr(args, "form", "curvature") or "curvature",
        part=getattr(args, "part", None),
        tol_kernel=getattr(args, "tol_kernel", None),
        tol=getattr(args, "tol", 1e-10),
        seed=getattr(args, "seed", 0),
        rotation=getattr(args, "rotation", None),
        outputs={k: (Path(v) if v else None) for k, v in outputs.items()},
        verbosity=args.verbose - args.quiet,
    )
    return cfg.validate()


# -- output -------------------------------------------------------------------


def _write_all(files: dict) -> None:
    """Write ``{path: text}`` via temporary files renamed into place."""
    staged = []
    try:
        for path, text in files.items():
            path = Path(path)
            if path.parent and not path.parent.exists():
                raise ConfigError(f"output directory {path.parent} does not exist")
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            staged.append((tmp, path))
        for tmp, path in staged:
            os.replace(tmp, path)
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)


def _vtk_text(mesh, point_fields=None, cell_fields=None, title="mixedlap") -> str:
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "f.vtk"
        export_vtk(mesh, p, point_fields, cell_fields, title)
        return p.read_text(encoding="utf-8")


# -- shared steps -------------------------------------------------------------


def _read_domain(path: Path):
    """Schema-check a domain file, then parse it."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read domain file {path}: {exc}") from exc
    try:
        jsonschema.validate(obj, load_schema("domain"))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {where}: {exc.message}") from exc
    return read_domain_file(path)


def _load(cfg: RunConfig):
    df = _read_domain(cfg.domain)
    rot = df.rotation if cfg.rotation is None else cfg.rotation
    work = df.domain.rotated(rot) if rot else df.domain
    return df, float(rot), work


def _mesh(work, h: float):
    try:
        return triangulate(work, h)
    except MeshError as exc:
        raise SolverFailure(f"meshing failed: {exc}") from exc


def _header(cfg: RunConfig, df, rotation: float) -> dict:
    return {
        "command": cfg.subcommand,
        "version": __version__,
        "domain": {"name": df.name, "file": cfg.domain.name, "rotation": rotation},
    }


def _mesh_info(mesh) -> dict:
    counts = {lab.value: int(np.sum(mesh.edge_label == lab.code)) for lab in Label}
    return {
        "n_nodes": mesh.n_nodes,
        "n_triangles": mesh.n_triangles,
        "n_boundary_edges": int(mesh.edge_nodes.shape[0]),
        "boundary_edges_by_label": counts,
        "h": mesh.h,
        "level": mesh.level,
        "min_angle_deg": mesh.min_angle(),
        "area": float(mesh.signed_areas().sum()),
        "boundary_polygon_area": mesh.boundary_polygon_area(),
    }


def _positive(v: np.ndarray) -> np.ndarray:
    return -v if v.sum() < 0 else v


# -- subcommands --------------------------------------------------------------


def cmd_mesh(cfg: RunConfig, args) -> dict:
    df, rot, work = _load(cfg)
    if args.import_mesh:
        if not df.markers:
            raise ConfigError("importing a mesh needs a 'markers' map in the domain file")
        try:
            mesh = import_mesh(args.import_mesh, work, df.markers)
        except MeshError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        if not cfg.h:
            raise ConfigError("--h is required unless --import is given")
        mesh = _mesh(work, cfg.h[0])
    files = {}
    doc = _header(cfg, df, rot)
    doc["mesh"] = _mesh_info(mesh)
    if cfg.outputs["mesh_out"] is not None:
        with tempfile.TemporaryDirectory() as d:
            markers = export_triangle(mesh, Path(d) / "m")
            stem = cfg.outputs["mesh_out"]
            for ext in (".node", ".ele"):
                files[stem.with_suffix(ext)] = (Path(d) / "m").with_suffix(ext).read_text(encoding="utf-8")
        doc["markers"] = {str(k): v for k, v in sorted(markers.items())}
    if cfg.outputs["vtk"] is not None:
        files[cfg.outputs["vtk"]] = _vtk_text(mesh, title=f"mesh of {df.name}")
    if cfg.outputs["out"] is not None:
        files[cfg.outputs["out"]] = _validated(doc, "mesh")
    return files


def cmd_solve_scalar(cfg: RunConfig, args) -> dict:
    if not cfg.h:
        raise ConfigError("--h is required")
    df, rot, work = _load(cfg)
    part = Label.parse(cfg.part)
    mesh = _mesh(work, cfg.h[0])
    res = solve_mixed(mesh, part, cfg.k, seed=cfg.seed, tol=cfg.tol)
    g = gradient_field(res)
    if res.eigenfunctions[0].sum() < 0:
        g = -g
    doc = _header(cfg, df, rot)
    doc.update({
        "part": part.value,
        "k": cfg.k,
        "mesh": _mesh_info(mesh),
        "eigenvalues": res.eigenvalues,
        "residuals": res.diagnostics["residuals"],
        "iterations": res.diagnostics["iterations"],
        "method": res.diagnostics["method"],
        "monotonicity": monotonicity_report(g).to_dict(),
        "hotspot": hotspot_report(res, work).to_dict(),
    })
    files = {}
    if cfg.outputs["vtk"] is not None:
        pf = {f"eigenfunction_{j + 1}": (_positive(res.eigenfunctions[j]) if j == 0 else res.eigenfunctions[j])
              for j in range(cfg.k)}
        files[cfg.outputs["vtk"]] = _vtk_text(mesh, pf, {"gradient_1": g}, title=f"{df.name} {part.value}")
    if cfg.outputs["out"] is not None:
        files[cfg.outputs["out"]] = _validated(doc, "solve_scalar")
    return files


def _vector_report(res) -> dict:
    return {
        "form": res.form_used,
        "eigenvalues": res.eigenvalues,
        "eta": res.eta,
        "kernel_dim_estimate": res.kernel_dim_estimate,
        "tol_kernel": res.tol_kernel,
        "residuals": list(res.residuals),
        "warnings": list(res.warnings),
    }


def cmd_solve_vector(cfg: RunConfig, args) -> dict:
    if not cfg.h:
        raise ConfigError("--h is required")
    df, rot, work = _load(cfg)
    mesh = _mesh(work, cfg.h[0])
    con = build_constraints(mesh, work)
    forms = {}
    if cfg.form in ("curvature", "both"):
        forms["curvature"] = assemble_curvature(mesh, con, work)
    if cfg.form in ("divcurl", "both"):
        forms["divcurl"] = assemble_divcurl(mesh, con)
    try:
        results = {name: solve_vector_evp(f, cfg.k, tol_kernel=cfg.tol_kernel, seed=cfg.seed, tol=cfg.tol)
                   for name, f in forms.items()}
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    doc = _header(cfg, df, rot)
    doc.update({"k": cfg.k, "mesh": _mesh_info(mesh), "forms": {n: _vector_report(r) for n, r in results.items()}})
    primary_name = "curvature" if "curvature" in results else "divcurl"
    primary = results[primary_name]
    if primary.eta.size:
        sg = solve_mixed(mesh, Label.GAMMA, 1, seed=cfg.seed)
        sc = solve_mixed(mesh, Label.GAMMA_C, 1, seed=cfg.seed)
        doc["minimizer"] = identify_minimizer(primary, sg, sc, form=forms[primary_name]).to_dict()
        if len(results) == 2:
            u = primary.reduced[:, primary.first_field_index]
            a, b, gap = compare_forms(u, forms["divcurl"], forms["curvature"])
            doc["form_comparison"] = {"divcurl": a, "curvature": b, "relative_gap": gap}
    files = {}
    if cfg.outputs["vtk"] is not None:
        pf, cf = {}, {}
        for j in range(cfg.k):
            fld = primary.fields[j]
            pf[f"field_{j + 1}_x"] = fld[:, 0]
            pf[f"field_{j + 1}_y"] = fld[:, 1]
            cf[f"field_{j + 1}"] = fld[mesh.triangles].mean(axis=1)
        files[cfg.outputs["vtk"]] = _vtk_text(mesh, pf, cf, title=f"{df.name} {primary_name}")
    if cfg.outputs["out"] is not None:
        files[cfg.outputs["out"]] = _validated(doc, "solve_vector")
    return files


def _field_from_vtk(path: Path, mesh, name: Optional[str]) -> np.ndarray:
    try:
        nodes, tris, pf, cf = read_vtk(path)
    except MeshError as exc:
        raise ConfigError(str(exc)) from exc
    if tris.shape != mesh.triangles.shape or not np.array_equal(tris, mesh.triangles) \
            or not np.allclose(nodes, mesh.nodes, rtol=0, atol=1e-9 * mesh.diameter):
        raise ConfigError(f"{path}: grid does not match the mesh generated for --domain/--h")
    vec_cells = {k: v for k, v in cf.items() if np.ndim(v) == 2}
    vec_points = {k: v for k, v in pf.items() if np.ndim(v) == 2}
    pool = {**{k: ("point", v) for k, v in vec_points.items()}, **{k: ("cell", v) for k, v in vec_cells.items()}}
    if name is None:
        if len(pool) != 1:
            raise ConfigError(f"{path}: choose one of {sorted(pool)} with --field-name")
        name = next(iter(pool))
    if name not in pool:
        raise ConfigError(f"{path}: no vector field named {name!r}")
    where, vals = pool[name]
    # nodal fields are averaged over each triangle
    return vals if where == "cell" else vals[mesh.triangles].mean(axis=1)


def cmd_helmholtz(cfg: RunConfig, args) -> dict:
    if not cfg.h:
        raise ConfigError("--h is required")
    df, rot, work = _load(cfg)
    mesh = _mesh(work, cfg.h[0])
    if args.field in BUILTIN_FIELDS:
        u = builtin_field(args.field, mesh)
    else:
        p = Path(args.field)
        if not p.is_file():
            raise ConfigError(f"--field must be one of {', '.join(BUILTIN_FIELDS)} or an existing VTK file")
        u = _field_from_vtk(p, mesh, args.field_name)
    res = decompose(u, mesh, work)
    n = res.norms
    parts = n["grad_psi"] + n["perp_grad_phi"] + n["residual"]
    doc = _header(cfg, df, rot)
    doc.update({
        "field": args.field if args.field in BUILTIN_FIELDS else Path(args.field).name,
        "mesh": _mesh_info(mesh),
        "norms": n,
        "pythagoras_defect": abs(n["field"] - parts) / n["field"] if n["field"] > 0 else 0.0,
        "orthogonality": exact_discrete_orthogonality_check(mesh, work),
    })
    files = {}
    if cfg.outputs["vtk"] is not None:
        files[cfg.outputs["vtk"]] = _vtk_text(
            mesh, {"phi": res.phi, "psi": res.psi},
            {"field": u, "grad_psi": res.grad_psi, "perp_grad_phi": res.perp_grad_phi, "residual": res.residual},
            title=f"{df.name} decomposition")
    if cfg.outputs["out"] is not None:
        files[cfg.outputs["out"]] = _validated(doc, "helmholtz")
    return files


def cmd_check(cfg: RunConfig, args) -> dict:
    df, rot, _ = _load(cfg)
    dom = df.domain
    rep = check_hypotheses(dom, rot)
    first = find_rotation(dom, "first")
    center = find_rotation(dom, "center")
    P = hotspot_corner(dom.rotated(rot) if rot else dom)
    doc = _header(cfg, df, rot)
    doc.update({
        "hypotheses": rep.to_dict(),
        "feasible_rotations": [list(iv) for iv in feasible_rotations(dom)],
        "find_rotation": {"first": first, "center": center},
        "corners": [{"index": c.index, "point": list(c.point), "angle": c.angle,
                     "incoming_arc": c.incoming_arc, "outgoing_arc": c.outgoing_arc} for c in dom.corners],
        "hotspot_corner": None if P is None else list(P),
        "diameter": dom.diameter,
        "area": dom.area,
    })
    return {cfg.outputs["out"]: _validated(doc, "check")}


def _verify_doc(cfg, df, levels, args) -> dict:
    rep = run_theorem_suite(df, levels, seed=cfg.seed, permute_seed=args.permute_seed, k_vector=args.k_vector,
                            rotation=cfg.rotation)
    return rep.to_dict()


def _levels_for(df, cfg: RunConfig, args) -> list:
    if cfg.h:
        return cfg.h
    return [df.domain.diameter / d for d in _int_list(args.divisions)]


def cmd_verify(cfg: RunConfig, args) -> dict:
    df = _read_domain(cfg.domain)
    levels = _levels_for(df, cfg, args)
    if len(levels) < 2:
        raise ConfigError("verify needs at least two mesh sizes")
    doc = {"command": "verify", "version": __version__, "file": cfg.domain.name,
           "report": _verify_doc(cfg, df, levels, args)}
    return {cfg.outputs["out"]: _validated(doc, "verify")}


SUMMARY_COLUMNS = (
    ["domain", "hypotheses_pass", "rotation", "lambda_gamma", "lambda_gammac", "eta1", "inequality_margin",
     "inequality_drift", "finest_form_gap", "finest_union_mismatch", "finest_kernel_dim", "n_failures"]
    + [f"verdict_{t}" for t in THEOREMS]
)


def _summary_row(rep: dict) -> list:
    ext = rep["extrapolated"]
    good = [lv for lv in rep["levels"] if lv["error"] is None]
    fin = good[-1] if good else {}
    return [
        rep["domain_id"], rep["hypotheses"]["all_pass"], rep["rotation"], ext["lambda_gamma"], ext["lambda_gammac"],
        ext["eta1"], rep["inequality_margin"], rep["inequality_drift"], fin.get("form_gap"),
        fin.get("union_mismatch"), fin.get("kernel_dim"), len(rep["failures"]),
    ] + [rep["verdicts"][t] for t in THEOREMS]


def cmd_verify_all(cfg: RunConfig, args) -> dict:
    corpus = Path(args.corpus)
    if not corpus.is_dir():
        raise ConfigError(f"corpus directory {corpus} does not exist")
    paths = sorted(corpus.glob("*.json"))
    if not paths:
        raise ConfigError(f"no domain files in {corpus}")
    reports = []
    for p in paths:
        df = _read_domain(p)
        levels = _levels_for(df, cfg, args)
        if len(levels) < 2:
            raise ConfigError("verify-all needs at least two mesh sizes")
        log.info("verifying %s", df.name)
        rep = _verify_doc(cfg, df, levels, args)
        rep["file"] = p.name
        reports.append(rep)
    doc = {"command": "verify-all", "version": __version__, "domains": reports}
    files = {}
    if cfg.outputs["out"] is not None:
        files[cfg.outputs["out"]] = _validated(doc, "verify_all")
    if cfg.outputs["summary"] is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for rep in json.loads(dumps(doc))["domains"]:
            w.writerow([_fmt(v) for v in _summary_row(rep)])
        files[cfg.outputs["summary"]] = buf.getvalue()
    return files


def cmd_export_vtk(cfg: RunConfig, args) -> dict:
    if not cfg.h:
        raise ConfigError("--h is required")
    df, rot, work = _load(cfg)
    mesh = _mesh(work, cfg.h[0])
    sc = solve_mixed(mesh, Label.GAMMA_C, cfg.k, seed=cfg.seed, tol=cfg.tol)
    sg = solve_mixed(mesh, Label.GAMMA, cfg.k, seed=cfg.seed, tol=cfg.tol)
    pf, cf = {}, {}
    for j in range(cfg.k):
        psi = _positive(sc.eigenfunctions[j]) if j == 0 else sc.eigenfunctions[j]
        phi = _positive(sg.eigenfunctions[j]) if j == 0 else sg.eigenfunctions[j]
        pf[f"psi_{j + 1}"], pf[f"phi_{j + 1}"] = psi, phi
        if j == 0:
            cf["grad_psi_1"] = nodal_gradient(mesh, psi)
            cf["perp_grad_phi_1"] = perp(nodal_gradient(mesh, phi))
    return {cfg.outputs["out"]: _vtk_text(mesh, pf, cf, title=f"{df.name} first eigenfunctions")}


def cmd_convergence(cfg: RunConfig, args) -> dict:
    df, rot, work = _load(cfg)
    if len(cfg.h) < 3:
        raise ConfigError("convergence needs at least three mesh sizes")
    try:
        rows = convergence_study(work, Label.parse(cfg.part), cfg.h, exact=args.exact, seed=cfg.seed)
    except MeshError as exc:
        raise SolverFailure(f"meshing failed: {exc}") from exc
    doc = _header(cfg, df, rot)
    doc.update({"part": Label.parse(cfg.part).value, "exact": args.exact, "rows": [r.to_dict() for r in rows]})
    return {cfg.outputs["out"]: _validated(doc, "convergence")}


# -- argument parsing ---------------------------------------------------------


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from exc
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"{text!r} must be positive")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mixedlap", description="Mixed Dirichlet-Neumann Laplacian spectral toolkit.")
    p.add_argument("--version", action="version", version=f"mixedlap {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more log output on stderr")
    p.add_argument("-q", "--quiet", action="count", default=0, help="less log output on stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, h=True, out_required=True):
        sp.add_argument("--domain", required=True, help="domain file (JSON)")
        if h:
            sp.add_argument("--h", type=_positive_float, help="upper bound on mesh edge length")
        sp.add_argument("--rotation", type=float, default=None,
                        help="rotation in radians applied before meshing (default: the file's rotation)")
        sp.add_argument("--seed", type=int, default=0, help="seed of the eigen solver start block")
        sp.add_argument("--out", required=out_required, help="JSON report path")

    sp = sub.add_parser("mesh", help="triangulate a domain or validate an imported Triangle mesh")
    common(sp, out_required=False)
    sp.add_argument("--import", dest="import_mesh", help="stem of a Triangle .node/.ele pair to import")
    sp.add_argument("--mesh-out", help="write the mesh as a Triangle .node/.ele pair with this stem")
    sp.add_argument("--vtk", help="also write the mesh as legacy VTK")

    sp = sub.add_parser("solve-scalar", help="lowest eigenpairs of a mixed Laplacian")
    common(sp)
    sp.add_argument("--part", required=True, choices=["gamma", "gammac"], help="Dirichlet part")
    sp.add_argument("--k", type=int, default=1, help="number of eigenpairs")
    sp.add_argument("--tol", type=_positive_float, default=1e-10, help="relative residual target")
    sp.add_argument("--vtk", help="VTK file with the eigenfunctions")

    sp = sub.add_parser("solve-vector", help="lowest eigenpairs of the constrained vector forms")
    common(sp)
    sp.add_argument("--k", type=int, default=4, help="number of eigenpairs")
    sp.add_argument("--form", choices=["curvature", "divcurl", "both"], default="curvature")
    sp.add_argument("--tol-kernel", type=_positive_float, default=None,
                    help="eigenvalues below this count as kernel (default: relative 1e-8)")
    sp.add_argument("--tol", type=_positive_float, default=1e-10, help="relative residual target")
    sp.add_argument("--vtk", help="VTK file with the eigenfields of the primary form")

    sp = sub.add_parser("helmholtz", help="decompose a per-triangle vector field")
    common(sp)
    sp.add_argument("--field", required=True,
                    help=f"built-in field ({', '.join(BUILTIN_FIELDS)}) or a VTK file on the same mesh")
    sp.add_argument("--field-name", help="vector field to read from the VTK file")
    sp.add_argument("--vtk", help="VTK file with the three parts")

    sp = sub.add_parser("check", help="hypothesis report and feasible rotations")
    common(sp, h=False)

    sp = sub.add_parser("verify", help="run every check on one domain")
    sp.add_argument("--domain", required=True, help="domain file (JSON)")
    sp.add_argument("--levels", help="comma-separated mesh sizes (default: diameter/16,/32,/64)")
    sp.add_argument("--divisions", default="16,32,64", help="mesh sizes as diameter divisors when --levels is absent")
    sp.add_argument("--rotation", type=float, default=None, help="fixed rotation (default: chosen automatically)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--permute-seed", type=int, default=None, help="shuffle mesh numbering before solving")
    sp.add_argument("--k-vector", type=int, default=4, help="vector eigenpairs per level")
    sp.add_argument("--out", required=True, help="JSON report path")

    sp = sub.add_parser("verify-all", help="run every check on each domain file of a directory")
    sp.add_argument("--corpus", required=True, help="directory of domain files")
    sp.add_argument("--levels", help="comma-separated mesh sizes used for every domain")
    sp.add_argument("--divisions", default="16,32,64", help="mesh sizes as diameter divisors when --levels is absent")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--permute-seed", type=int, default=None)
    sp.add_argument("--k-vector", type=int, default=4)
    sp.add_argument("--out", help="JSON report path")
    sp.add_argument("--summary", help="CSV summary path, one row per domain")

    sp = sub.add_parser("export-vtk", help="write psi_k, phi_k and the first gradients as VTK")
    common(sp)
    sp.add_argument("--k", type=int, default=1, help="number of eigenfunctions per problem")
    sp.add_argument("--tol", type=_positive_float, default=1e-10)

    sp = sub.add_parser("convergence", help="empirical convergence order of lambda_1")
    sp.add_argument("--domain", required=True)
    sp.add_argument("--part", required=True, choices=["gamma", "gammac"])
    sp.add_argument("--levels", required=True, help="comma-separated mesh sizes (at least three)")
    sp.add_argument("--exact", type=float, default=None, help="reference eigenvalue, if known")
    sp.add_argument("--rotation", type=float, default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    return p


_COMMANDS = {
    "mesh": cmd_mesh,
    "solve-scalar": cmd_solve_scalar,
    "solve-vector": cmd_solve_vector,
    "helmholtz": cmd_helmholtz,
    "check": cmd_check,
    "verify": cmd_verify,
    "verify-all": cmd_verify_all,
    "export-vtk": cmd_export_vtk,
    "convergence": cmd_convergence,
}


def _setup_logging(verbosity: int) -> None:
    level = {-1: logging.ERROR, 0: logging.WARNING, 1: logging.INFO}.get(max(-1, min(verbosity, 2)), logging.DEBUG)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("mixedlap")
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"mixedlap: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    _setup_logging(args.verbose - args.quiet)
    try:
        cfg = _config(args)
        files = _COMMANDS[args.command](cfg, args)
        _write_all(files)
    except _INPUT_ERRORS as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except _SOLVER_ERRORS as exc:
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER
    except Exception as exc:  # anything unexpected still counts as a failed run
        log.debug("unexpected error", exc_info=True)
        log.error("internal failure: %s: %s", type(exc).__name__, exc)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
