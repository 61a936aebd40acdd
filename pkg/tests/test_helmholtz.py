import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixedlap.geometry import Label
from mixedlap.helmholtz import (
    BUILTIN_FIELDS,
    DecompositionError,
    builtin_field,
    cross_gram,
    decompose,
    estimate_hc_dim,
    exact_discrete_orthogonality_check,
    gradient_operators,
    l2_norm2,
)
from mixedlap.mesh import Mesh, triangulate
from mixedlap.scalar_fem import assemble_scalar, solve_mixed

from domains import corpus_domain, vertical_gamma_square


def _perturbed(m: Mesh, amount: float, seed: int) -> Mesh:
    """Jitter interior nodes by ``amount`` times the shortest incident edge."""
    rng = np.random.default_rng(seed)
    interior = np.setdiff1d(np.arange(m.n_nodes), m.boundary_nodes())
    e = m.all_edges()
    L = np.linalg.norm(m.nodes[e[:, 0]] - m.nodes[e[:, 1]], axis=1)
    short = np.full(m.n_nodes, np.inf)
    np.minimum.at(short, e[:, 0], L)
    np.minimum.at(short, e[:, 1], L)
    nodes = m.nodes.copy()
    nodes[interior] += amount * short[interior, None] * rng.uniform(-1, 1, (interior.size, 2))
    out = dataclasses.replace(m, nodes=nodes)
    assert np.all(out.signed_areas() > 0)
    return out


def _random_mesh(seed=0):
    _, d = corpus_domain("fig1_left")
    m = triangulate(d, d.diameter / 16)
    return _perturbed(m.permuted(seed), 0.3, seed), d


# -- cross-Gram ------------------------------------------------------------------


def test_cross_gram_on_two_triangles_by_hand():
    # unit square split along the diagonal, GAMMA_C = bottom edge, GAMMA = the rest
    nodes = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]], float)
    tris = np.array([[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]])
    edges = np.array([[0, 1], [1, 2], [2, 3], [3, 0]])
    lab = np.array([Label.GAMMA_C.code, Label.GAMMA.code, Label.GAMMA.code, Label.GAMMA.code])
    m = Mesh(nodes, tris, edges, np.arange(4), np.zeros((4, 2)), lab)
    C = cross_gram(m).toarray()
    # rows: nodes off GAMMA_C (2, 3, 4); columns: nodes off GAMMA (only the centre 4)
    Gx, Gy, area = gradient_operators(m)
    G = np.stack([Gx.toarray(), Gy.toarray()], axis=2)  # (T, N, 2)
    brute = np.zeros((3, 1))
    for a, i in enumerate((2, 3, 4)):
        for t in range(4):
            g, x = G[t, i], G[t, 4]
            brute[a, 0] += area[t] * (g[0] * -x[1] + g[1] * x[0])
    np.testing.assert_allclose(C, brute, atol=1e-15)
    # a single interior hat pairs with itself to zero; the rows touching GAMMA cancel too
    np.testing.assert_allclose(C, 0.0, atol=1e-15)


def test_orthogonality_on_a_randomized_mesh():
    m, d = _random_mesh()
    assert m.n_triangles >= 500
    assert exact_discrete_orthogonality_check(m, d) <= 1e-12


@pytest.mark.parametrize("name", ["fig4_triangle", "hexagon_two_gamma", "square_vertical_gamma"])
def test_orthogonality_on_corpus(name):
    _, d = corpus_domain(name)
    m = _perturbed(triangulate(d, d.diameter / 16), 0.25, 3)
    assert exact_discrete_orthogonality_check(m, d) <= 1e-12


# -- decomposition -----------------------------------------------------------------


_MESH = {}


def _mesh():
    if not _MESH:
        _MESH["m"] = _random_mesh(1)
    return _MESH["m"]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_pythagorean_identity(seed):
    m, d = _mesh()
    u = np.random.default_rng(seed).normal(size=(m.n_triangles, 2))
    n = decompose(u, m, d).norms
    total = n["grad_psi"] + n["perp_grad_phi"] + n["residual"]
    assert abs(total - n["field"]) <= 1e-8 * n["field"]
    assert abs(n["cross_psi_phi"]) <= 1e-10 * n["field"]


def test_parts_are_mutually_orthogonal():
    m, d = _mesh()
    _, _, area = gradient_operators(m)
    r = decompose(np.random.default_rng(5).normal(size=(m.n_triangles, 2)), m, d)
    scale = r.norms["field"]

    def ip(a, b):
        return float(np.sum(area * np.sum(a * b, axis=1)))

    assert abs(ip(r.grad_psi, r.residual)) <= 1e-10 * scale
    assert abs(ip(r.perp_grad_phi, r.residual)) <= 1e-10 * scale


def test_decomposition_is_idempotent():
    m, d = _mesh()
    r = decompose(np.random.default_rng(6).normal(size=(m.n_triangles, 2)), m, d)
    again = decompose(r.grad_psi, m, d)
    np.testing.assert_allclose(again.grad_psi, r.grad_psi, atol=1e-10)
    assert again.norms["perp_grad_phi"] <= 1e-20 + 1e-18 * r.norms["field"]
    assert decompose(r.residual, m, d).norms["residual"] == pytest.approx(r.norms["residual"], rel=1e-9)


def test_gradient_of_admissible_potential_is_recovered():
    m, d = _mesh()
    res = solve_mixed(m, Label.GAMMA_C, 1)
    Gx, Gy, _ = gradient_operators(m)
    v = res.positive_first
    u = np.stack([Gx @ v, Gy @ v], axis=1)
    r = decompose(u, m, d)
    np.testing.assert_allclose(r.psi, v, atol=1e-10)
    assert r.norms["residual"] <= 1e-20 * max(1.0, r.norms["field"]) + 1e-24
    np.testing.assert_allclose(builtin_field("grad-psi1", m), u)


def test_kernel_field_is_all_residual():
    d = vertical_gamma_square()
    m = triangulate(d, 1 / 16)
    u = builtin_field("constant", m)
    r = decompose(u, m, d)
    # (0, 1) is orthogonal to both potential spaces on this square
    assert r.norms["grad_psi"] <= 1e-24
    assert r.norms["perp_grad_phi"] <= 1e-24
    np.testing.assert_allclose(r.residual, u, atol=1e-12)
    assert estimate_hc_dim(m, d) == 1


@pytest.mark.parametrize("name", ["fig4_triangle", "fig1_left"])
def test_connected_gamma_has_trivial_harmonic_part(name):
    _, d = corpus_domain(name)
    assert estimate_hc_dim(triangulate(d, d.diameter / 16), d) == 0


def test_hexagon_harmonic_part_at_most_one():
    _, d = corpus_domain("hexagon_two_gamma")
    assert estimate_hc_dim(triangulate(d, d.diameter / 16), d) <= 1


def _sample(m):
    c = m.nodes[m.triangles].mean(axis=1)
    return np.stack([np.sin(c[:, 0]) * c[:, 1], np.cos(c[:, 1]) + c[:, 0] ** 2], axis=1)


def test_smooth_field_residual_decays():
    _, d = corpus_domain("fig4_triangle")
    res = []
    for div in (8, 16, 32):
        m = triangulate(d, d.diameter / div)
        res.append(np.sqrt(decompose(_sample(m), m, d).norms["residual"]))
    for a, b in zip(res, res[1:]):
        assert a / b >= 1.5


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_poincare_bound(seed):
    # ||chi||^2 <= ||grad chi||^2 / lambda_1 for every discrete chi vanishing on GAMMA_C
    m, d = _mesh()
    fm = assemble_scalar(m, Label.GAMMA_C)
    lam = solve_mixed(m, Label.GAMMA_C, 1).eigenvalues[0]
    x = np.random.default_rng(seed).normal(size=fm.free.size)
    assert x @ (fm.mass @ x) <= (x @ (fm.stiffness @ x)) / lam * (1 + 1e-10)


@pytest.mark.parametrize("name", BUILTIN_FIELDS)
def test_builtin_fields(name):
    _, d = corpus_domain("fig4_triangle")
    m = triangulate(d, d.diameter / 8)
    f = builtin_field(name, m)
    assert f.shape == (m.n_triangles, 2)
    assert np.all(np.isfinite(f))


def test_l2_norm2():
    assert l2_norm2(np.array([[3.0, 4.0], [1.0, 0.0]]), np.array([2.0, 1.0])) == 51.0


def test_input_errors():
    _, d = corpus_domain("fig4_triangle")
    m = triangulate(d, d.diameter / 4)
    with pytest.raises(DecompositionError):
        decompose(np.zeros((m.n_triangles + 1, 2)), m, d)
    bad = np.zeros((m.n_triangles, 2))
    bad[0, 0] = np.nan
    with pytest.raises(DecompositionError):
        decompose(bad, m, d)
    with pytest.raises(DecompositionError):
        builtin_field("vortex", m)
    no_gamma = dataclasses.replace(m, edge_label=np.full(len(m.edge_label), Label.GAMMA_C.code))
    with pytest.raises(DecompositionError, match="no Dirichlet node"):
        decompose(np.zeros((m.n_triangles, 2)), no_gamma)
