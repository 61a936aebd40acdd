"""End-to-end acceptance checks, one test per criterion.

Every test records a PASS/FAIL line that is repeated in the terminal summary.
"""
import dataclasses
import json
import math

import numpy as np
import pytest

from mixedlap.analysis import choose_rotation, richardson, run_theorem_suite
from mixedlap.cli import main
from mixedlap.geometry import Label, check_hypotheses, hotspot_corner
from mixedlap.helmholtz import decompose, exact_discrete_orthogonality_check, gradient_operators
from mixedlap.mesh import triangulate
from mixedlap.scalar_fem import solve_mixed
from mixedlap.vector_fem import assemble_curvature, assemble_divcurl, build_constraints, compare_forms, solve_vector_evp

from domains import (
    ALL_DIRICHLET,
    CORPUS,
    CORPUS_NAMES,
    PI,
    corpus_domain,
    square_pi,
    square_pi_left_dirichlet,
    unit_square,
    vertical_gamma_square,
)


def _passing_corpus():
    """Corpus domains whose hypotheses hold at the chosen rotation, rotated accordingly."""
    out = {}
    for name in CORPUS_NAMES:
        df, _ = corpus_domain(name)
        theta, rep = choose_rotation(df.domain, df.rotation)
        if rep.all_pass:
            out[name] = (df, df.domain.rotated(theta) if theta else df.domain)
    return out


_PASSING = _passing_corpus()


def _psi1_gradient(m):
    v = solve_mixed(m, Label.GAMMA_C, 1).positive_first
    Gx, Gy, _ = gradient_operators(m)
    return v, np.stack([Gx @ v, Gy @ v], axis=1)


def _union_mismatch(d, h):
    m = triangulate(d, h)
    lam = min(solve_mixed(m, Label.GAMMA, 1).eigenvalues[0], solve_mixed(m, Label.GAMMA_C, 1).eigenvalues[0])
    form = assemble_curvature(m, build_constraints(m, d), d)
    eta1 = solve_vector_evp(form, 2).eta[0]
    return abs(eta1 - lam) / lam


def test_passing_corpus_is_nonempty():
    assert set(_PASSING) >= {"fig1_left", "fig4_triangle", "triangle_506070"}


def test_c01_reference_square(criterion):
    d = square_pi()
    ok, parts = True, []
    for part in (Label.GAMMA_C, Label.GAMMA):
        coarse = solve_mixed(triangulate(d, PI / 32), part, 1).eigenvalues[0]
        fine = solve_mixed(triangulate(d, PI / 64), part, 1).eigenvalues[0]
        ext = richardson(coarse, fine)
        ok &= abs(fine - 0.5) <= 0.01 * 0.5 and abs(ext - 0.5) <= 1e-3 * 0.5
        parts.append(f"{part.value}: {fine:.6f} -> {ext:.7f}")
    assert criterion(1, ok, "; ".join(parts))


def test_c02_spectral_union(criterion):
    ok, parts = True, []
    for name, d in (("square", square_pi()), ("fig4", corpus_domain("fig4_triangle")[1])):
        a = _union_mismatch(d, d.diameter / 64)
        b = _union_mismatch(d, d.diameter / 128)
        ok &= a <= 0.01 and a / b >= 2.0
        parts.append(f"{name}: {a:.2e} -> {b:.2e} (x{a / b:.2f})")
    assert criterion(2, ok, "; ".join(parts))


def test_c03_kernel_detection(criterion):
    d = vertical_gamma_square()
    m = triangulate(d, 1 / 32)
    con = build_constraints(m, d)
    form = assemble_curvature(m, con, d)
    res = solve_vector_evp(form, 3)
    small = int(np.sum(res.eigenvalues < 1e-8 * res.eta[0]))
    e = con.restrict(np.tile([0.0, 1.0], (m.n_nodes, 1)))
    k = res.reduced[:, 0]
    cos = abs(k @ (form.mass @ e)) / math.sqrt(form.norm2(k) * form.norm2(e))
    angle = math.acos(min(1.0, cos))
    ok = small == 1 and angle <= 1e-4
    others = []
    for name in CORPUS_NAMES:
        _, dc = corpus_domain(name)
        if not check_hypotheses(dc).gamma_connected:
            continue
        mc = triangulate(dc, dc.diameter / 32)
        rc = solve_vector_evp(assemble_curvature(mc, build_constraints(mc, dc), dc), 3)
        # scale by the largest computed value so the count does not depend on which one is called eta_1
        n = int(np.sum(rc.eigenvalues < 1e-8 * rc.eigenvalues[-1]))
        ok &= n == 0
        others.append(f"{name}={n}")
    assert criterion(3, ok, f"square kernel {small}, angle {angle:.1e}; connected: {', '.join(others)}")


_SUITES = {}


def _suite(name):
    if name not in _SUITES:
        _SUITES[name] = run_theorem_suite(_PASSING[name][0])
    return _SUITES[name]


def test_c04_eigenvalue_inequality(criterion):
    ok, parts = True, []
    for name in sorted(_PASSING):
        rep = _suite(name)
        good = rep.inequality_margin > 0 and rep.inequality_margin >= 3 * rep.inequality_drift
        ok &= good
        parts.append(f"{name} {rep.inequality_margin:.3g}/{rep.inequality_drift:.2g}")
    assert criterion(4, ok, "margin/drift " + "; ".join(parts))


def test_c05_monotonicity(criterion):
    ok, parts = True, []
    for name, (_, d) in sorted(_PASSING.items()):
        _, g = _psi1_gradient(triangulate(d, d.diameter / 64))
        rel = g.min() / np.linalg.norm(g, axis=1).max()
        ok &= rel > -1e-6
        parts.append(f"{name} {rel:.1e}")
    assert criterion(5, ok, "min component / max|grad| " + "; ".join(parts))


def test_c06_hot_spot(criterion):
    ok, parts = True, []
    for name in ("fig4_triangle", "fig1_left"):
        d = _PASSING[name][1]
        P = hotspot_corner(d)
        assert P is not None
        for div in (32, 64):
            m = triangulate(d, d.diameter / div)
            v, _ = _psi1_gradient(m)
            dist = float(np.linalg.norm(m.nodes[np.argmax(v)] - P))
            ok &= dist <= 2 * m.h
            parts.append(f"{name}/{div} {dist / m.h:.2f}h")
    assert criterion(6, ok, "argmax distance to P " + "; ".join(parts))


def _polygon_gaps():
    out = {}
    for name, (df, d) in sorted(_PASSING.items()):
        if any(a.kind != "segment" for a in d.arcs):
            continue
        gaps = []
        for div in (16, 32, 64):
            m = triangulate(d, d.diameter / div)
            con = build_constraints(m, d)
            cv, dc = assemble_curvature(m, con, d), assemble_divcurl(m, con)
            res = solve_vector_evp(cv, 2)
            gaps.append(compare_forms(res.reduced[:, res.first_field_index], dc, cv)[2])
        out[name] = gaps
    return out


_GAPS = {}


def _gaps():
    if not _GAPS:
        _GAPS.update(_polygon_gaps())
    return _GAPS


@pytest.mark.xfail(strict=True, reason="both forms coincide up to roundoff on polygons; see the notes")
def test_c07_form_equality(criterion):
    gaps = _gaps()
    ok = bool(gaps) and all(a >= 1.5 * b for g in gaps.values() for a, b in zip(g, g[1:]))
    detail = "; ".join(f"{n} " + ", ".join(f"{x:.1e}" for x in g) for n, g in gaps.items())
    assert criterion(7, ok, "relative gaps " + detail)


def test_c07_companion_forms_agree_to_roundoff():
    gaps = _gaps()
    assert set(gaps) >= {"fig2_pentagon", "fig4_triangle", "triangle_506070"}
    assert max(max(g) for g in gaps.values()) <= 1e-12


def test_c08_helmholtz(criterion):
    _, d = corpus_domain("fig1_left")
    m = triangulate(d, d.diameter / 16).permuted(11)
    rng = np.random.default_rng(11)
    interior = np.setdiff1d(np.arange(m.n_nodes), m.boundary_nodes())
    nodes = m.nodes.copy()
    nodes[interior] += 0.1 * m.h * rng.uniform(-1, 1, (interior.size, 2))
    m = dataclasses.replace(m, nodes=nodes)
    assert m.n_triangles >= 500 and np.all(m.signed_areas() > 0)
    orth = exact_discrete_orthogonality_check(m, d)
    pyth = 0.0
    for _ in range(20):
        n = decompose(rng.normal(size=(m.n_triangles, 2)), m, d).norms
        pyth = max(pyth, abs(n["grad_psi"] + n["perp_grad_phi"] + n["residual"] - n["field"]) / n["field"])
    _, d4 = corpus_domain("fig4_triangle")
    res = []
    for div in (8, 16, 32):
        mm = triangulate(d4, d4.diameter / div)
        c = mm.nodes[mm.triangles].mean(axis=1)
        u = np.stack([np.sin(c[:, 0]) * c[:, 1], np.cos(c[:, 1]) + c[:, 0] ** 2], axis=1)
        res.append(math.sqrt(decompose(u, mm, d4).norms["residual"]))
    decay = min(a / b for a, b in zip(res, res[1:]))
    ok = orth <= 1e-12 and pyth <= 1e-8 and decay >= 1.5
    assert criterion(8, ok, f"orthogonality {orth:.1e}, pythagoras {pyth:.1e}, residual decay x{decay:.2f}")


def test_c09_oracles(criterion):
    a = solve_mixed(triangulate(unit_square(), 1 / 32), ALL_DIRICHLET, 1).eigenvalues[0]
    b = solve_mixed(triangulate(square_pi_left_dirichlet(), PI / 32), Label.GAMMA_C, 1).eigenvalues[0]
    ok = abs(a - 2 * PI ** 2) <= 0.01 * 2 * PI ** 2 and abs(b - 0.25) <= 0.01 * 0.25
    assert criterion(9, ok, f"all-Dirichlet {a:.5f} vs {2 * PI ** 2:.5f}; one Dirichlet side {b:.6f} vs 0.25")


def test_c10_determinism(criterion, tmp_path):
    blobs = []
    for i in range(2):
        out = tmp_path / f"run{i}.json"
        assert main(["verify-all", "--corpus", str(CORPUS), "--out", str(out)]) == 0
        blobs.append(out.read_bytes())
    ok = blobs[0] == blobs[1] and len(json.loads(blobs[0])["domains"]) == len(CORPUS_NAMES)
    assert criterion(10, ok, f"{len(blobs[0])} bytes, identical={blobs[0] == blobs[1]}")
