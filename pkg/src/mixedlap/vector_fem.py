"""Constrained P1 vector fields: the div-curl form and the curvature form.

Degrees of freedom are interleaved, ``(u1, u2)`` of node ``i`` sit at rows
``2i`` and ``2i + 1``.  Boundary conditions ``u . nu = 0`` on GAMMA and
``u . tau = 0`` on GAMMA_C are imposed nodally through a prolongation from
reduced coordinates.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .eigen import smallest_eigenpairs
from .geometry import DomainSpec, Label, check_hypotheses
from .mesh import Mesh
from .scalar_fem import ScalarEigenResult, nodal_gradient, p1_gradients, p1_matrices

__all__ = [
    "FREE",
    "ONE_DIRECTION",
    "PINNED",
    "ConstraintMap",
    "VectorForm",
    "VectorEigenResult",
    "MinimizerReport",
    "build_constraints",
    "assemble_divcurl",
    "assemble_curvature",
    "solve_vector_evp",
    "compare_forms",
    "identify_minimizer",
    "nodal_average",
    "perp",
    "sign_agreement",
    "rayleigh_quotient",
]

log = logging.getLogger(__name__)

FREE, ONE_DIRECTION, PINNED = 0, 1, 2
RANK_TOL = 1e-10
KERNEL_REL_TOL = 1e-8
DEGENERACY_REL = 1e-3


def _canonical(d: np.ndarray) -> np.ndarray:
    d = d / np.linalg.norm(d)
    if d[1] < -1e-14 or (abs(d[1]) <= 1e-14 and d[0] < 0):
        d = -d
    return d


@dataclass(frozen=True, eq=False)
class ConstraintMap:
    """Per-node constraint kind and the prolongation ``P`` (2N x R) from reduced DOFs."""

    kind: np.ndarray
    direction: np.ndarray  # (N, 2); meaningful for ONE_DIRECTION nodes
    prolongation: sp.csr_matrix
    mesh: Mesh

    @property
    def n_reduced(self) -> int:
        return self.prolongation.shape[1]

    def prolong(self, reduced: np.ndarray) -> np.ndarray:
        """Nodal field ``(N, 2)`` from a reduced vector."""
        return (self.prolongation @ np.asarray(reduced)).reshape(-1, 2)

    def restrict(self, nodal: np.ndarray) -> np.ndarray:
        """Reduced vector of the nodal projection onto the constrained space."""
        return self.prolongation.T @ np.asarray(nodal, dtype=float).reshape(-1)


def build_constraints(mesh: Mesh, domain: Optional[DomainSpec] = None) -> ConstraintMap:
    """Classify nodes as free, one-direction or pinned from their boundary constraints.

    Each boundary edge contributes the vector that must be orthogonal to ``u``
    at its endpoints: ``nu`` on GAMMA and ``tau`` on GAMMA_C, evaluated on the
    exact arc at the node parameter.  A node whose constraint vectors are all
    parallel keeps the single orthogonal direction, otherwise it is pinned.
    """
    domain = domain or mesh.domain
    if domain is None:
        raise ValueError("constraints need the domain geometry")
    n = mesh.n_nodes
    cons = {}
    for arc_id in np.unique(mesh.edge_arc):
        sel = np.nonzero(mesh.edge_arc == arc_id)[0]
        arc = domain.arcs[arc_id]
        for end in (0, 1):
            tau, nu, _ = arc.frame(mesh.edge_t[sel, end])
            c = nu if arc.label is Label.GAMMA else tau
            for node, vec in zip(mesh.edge_nodes[sel, end], c):
                cons.setdefault(int(node), []).append(vec)
    kind = np.zeros(n, dtype=np.int64)
    direction = np.zeros((n, 2))
    for node in sorted(cons):
        vecs = np.array(cons[node])
        c0 = vecs[0] / np.linalg.norm(vecs[0])
        cross = np.abs(c0[0] * vecs[:, 1] - c0[1] * vecs[:, 0]) / np.linalg.norm(vecs, axis=1)
        if np.all(cross <= RANK_TOL):
            kind[node] = ONE_DIRECTION
            direction[node] = _canonical(np.array([-c0[1], c0[0]]))
        else:
            kind[node] = PINNED
    rows, cols, vals = [], [], []
    col = 0
    for i in range(n):
        if kind[i] == FREE:
            rows += [2 * i, 2 * i + 1]
            cols += [col, col + 1]
            vals += [1.0, 1.0]
            col += 2
        elif kind[i] == ONE_DIRECTION:
            rows += [2 * i, 2 * i + 1]
            cols += [col, col]
            vals += [direction[i, 0], direction[i, 1]]
            col += 1
    P = sp.csr_matrix((vals, (rows, cols)), shape=(2 * n, col))
    P.eliminate_zeros()
    return ConstraintMap(kind, direction, P, mesh)


@dataclass(frozen=True, eq=False)
class VectorForm:
    """Full and reduced matrices of one vector quadratic form."""

    name: str
    full_stiffness: sp.csr_matrix
    full_mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    constraints: ConstraintMap
    warnings: tuple = ()

    def value(self, reduced: np.ndarray) -> float:
        r = np.asarray(reduced, dtype=float)
        return float(r @ (self.stiffness @ r))

    def norm2(self, reduced: np.ndarray) -> float:
        r = np.asarray(reduced, dtype=float)
        return float(r @ (self.mass @ r))


def _reduce(A, P):
    return (P.T @ A @ P).tocsr()


def _vector_mass(mesh: Mesh):
    _, M = p1_matrices(mesh.nodes, mesh.triangles)
    return sp.kron(M, sp.eye(2), format="csr")


def assemble_divcurl(mesh: Mesh, constraints: ConstraintMap) -> VectorForm:
    """``a[u] = int |div u|^2 + |omega(u)|^2`` with ``omega = d1 u2 - d2 u1``."""
    G, area = p1_gradients(mesh.nodes, mesh.triangles)
    T = len(area)
    D = np.zeros((T, 6))
    W = np.zeros((T, 6))
    D[:, 0::2] = G[:, :, 0]
    D[:, 1::2] = G[:, :, 1]
    W[:, 0::2] = -G[:, :, 1]
    W[:, 1::2] = G[:, :, 0]
    loc = area[:, None, None] * (D[:, :, None] * D[:, None, :] + W[:, :, None] * W[:, None, :])
    dofs = np.empty((T, 6), dtype=np.int64)
    dofs[:, 0::2] = 2 * mesh.triangles
    dofs[:, 1::2] = 2 * mesh.triangles + 1
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    n2 = 2 * mesh.n_nodes
    K = sp.csr_matrix((loc.ravel(), (rows, cols)), shape=(n2, n2))
    M = _vector_mass(mesh)
    P = constraints.prolongation
    return VectorForm("divcurl", K, M, _reduce(K, P), _reduce(M, P), constraints)


def assemble_curvature(mesh: Mesh, constraints: ConstraintMap, domain: Optional[DomainSpec] = None) -> VectorForm:
    """``int |grad u1|^2 + |grad u2|^2 - int_boundary kappa |u|^2``.

    ``kappa`` is taken at the arc parameter of each edge midpoint and the edge
    mass of P1 traces is integrated exactly.
    """
    domain = domain or mesh.domain
    warnings = []
    rep = check_hypotheses(domain)
    if not rep.smooth_hypothesis_ok:
        warnings.append("domain violates the smoothness/angle hypothesis: the curvature form "
                        "need not equal the div-curl form")
    K1, _ = p1_matrices(mesh.nodes, mesh.triangles)
    K = sp.kron(K1, sp.eye(2), format="csr")
    rows, cols, vals = [], [], []
    for arc_id in np.unique(mesh.edge_arc):
        arc = domain.arcs[arc_id]
        if arc.is_straight:
            continue
        sel = np.nonzero(mesh.edge_arc == arc_id)[0]
        tm = mesh.edge_t[sel].mean(axis=1)
        _, _, kappa = arc.frame(tm)
        a, b = mesh.edge_nodes[sel, 0], mesh.edge_nodes[sel, 1]
        L = np.linalg.norm(mesh.nodes[b] - mesh.nodes[a], axis=1)
        w = kappa * L / 6.0
        for comp in (0, 1):
            ia, ib = 2 * a + comp, 2 * b + comp
            rows += [ia, ib, ia, ib]
            cols += [ia, ib, ib, ia]
            vals += [2 * w, 2 * w, w, w]
    n2 = 2 * mesh.n_nodes
    if rows:
        B = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n2, n2))
        K = (K - B).tocsr()
    M = _vector_mass(mesh)
    P = constraints.prolongation
    return VectorForm("curvature", K, M, _reduce(K, P), _reduce(M, P), constraints, tuple(warnings))


@dataclass(frozen=True, eq=False)
class VectorEigenResult:
    eigenvalues: np.ndarray  # ascending, kernel values included
    reduced: np.ndarray  # (R, k)
    fields: np.ndarray  # (k, N, 2)
    kernel_dim_estimate: int
    tol_kernel: float
    form_used: str
    constraints: ConstraintMap
    residuals: tuple = ()
    warnings: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    @property
    def eta(self) -> np.ndarray:
        """Positive eigenvalues (those above ``tol_kernel``)."""
        return self.eigenvalues[self.kernel_dim_estimate:]

    @property
    def first_field_index(self) -> int:
        return self.kernel_dim_estimate


def solve_vector_evp(form: VectorForm, k: int = 4, tol_kernel: Optional[float] = None, seed: int = 0,
                     tol: float = 1e-10) -> VectorEigenResult:
    """Smallest ``k`` eigenpairs of a constrained vector form.

    Ritz values below ``tol_kernel`` count as kernel.  By default
    ``tol_kernel`` is ``1e-8`` times the first clearly nonzero Ritz value
    (one extra pair is computed to find it).
    """
    K, M = form.stiffness, form.mass
    R = K.shape[0]
    if not 1 <= k < R:
        raise ValueError(f"k must lie in [1, {R - 1}]")
    scale = float(K.diagonal().sum() / M.diagonal().sum())
    shift = tol_kernel if tol_kernel is not None else 1e-6 * scale
    vals, vecs, info = smallest_eigenpairs(K, M, k + 1, shift=-shift, tol=tol, seed=seed)
    if tol_kernel is None:
        if vals[-1] <= KERNEL_REL_TOL * scale:
            ref = scale  # every computed value is kernel
        else:
            ref = vals[np.nonzero(vals > 1e-6 * vals[-1])[0][0]]
        tol_kernel = KERNEL_REL_TOL * float(ref)
    vals, vecs = vals[:k], vecs[:, :k]
    nker = int(np.sum(vals < tol_kernel))
    fields = np.stack([form.constraints.prolong(vecs[:, j]) for j in range(k)])
    return VectorEigenResult(np.asarray(vals), vecs, fields, nker, float(tol_kernel), form.name,
                             form.constraints, tuple(info.residuals[:k]), form.warnings,
                             {"iterations": info.iterations, "method": info.method, "shift": shift})


def compare_forms(reduced: np.ndarray, divcurl: VectorForm, curvature: VectorForm):
    """Both quadratic forms on the same reduced vector and their relative gap."""
    if divcurl.constraints is not curvature.constraints and divcurl.stiffness.shape != curvature.stiffness.shape:
        raise ValueError("forms must share the constrained space")
    a = divcurl.value(reduced)
    b = curvature.value(reduced)
    denom = max(abs(a), abs(b))
    gap = 0.0 if denom == 0.0 else abs(a - b) / denom
    return a, b, gap


def rayleigh_quotient(form: VectorForm, reduced: np.ndarray) -> float:
    return form.value(reduced) / form.norm2(reduced)


def nodal_average(mesh: Mesh, cell_field: np.ndarray) -> np.ndarray:
    """Area-weighted average of a per-triangle field at the nodes."""
    _, area = p1_gradients(mesh.nodes, mesh.triangles)
    cell_field = np.asarray(cell_field, dtype=float)
    t = mesh.triangles.ravel()
    w = np.repeat(area, 3)
    wsum = np.bincount(t, weights=w, minlength=mesh.n_nodes)
    out = np.empty((mesh.n_nodes,) + cell_field.shape[1:])
    for comp in range(cell_field.shape[1]):
        out[:, comp] = np.bincount(t, weights=w * np.repeat(cell_field[:, comp], 3), minlength=mesh.n_nodes) / wsum
    return out


def perp(g: np.ndarray) -> np.ndarray:
    """Rotated gradient ``(-d2, d1)``."""
    g = np.asarray(g)
    return np.stack([-g[..., 1], g[..., 0]], axis=-1)


def sign_agreement(mesh: Mesh, nodal_field: np.ndarray) -> float:
    """Area fraction of triangles where the averaged components have a common sign."""
    _, area = p1_gradients(mesh.nodes, mesh.triangles)
    avg = np.asarray(nodal_field)[mesh.triangles].mean(axis=1)
    same = avg[:, 0] * avg[:, 1] >= 0
    return float(area[same].sum() / area.sum())


@dataclass(frozen=True)
class MinimizerReport:
    eta1: float
    cos_grad_psi: float
    cos_perp_grad_phi: float
    lambda1_gammac: float
    lambda1_gamma: float
    attained_by: str
    near_degenerate: bool
    rayleigh_grad_psi: float
    rayleigh_perp_grad_phi: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def identify_minimizer(vec: VectorEigenResult, scalar_gamma: ScalarEigenResult,
                       scalar_gammac: ScalarEigenResult, form: Optional[VectorForm] = None) -> MinimizerReport:
    """Align the first positive eigenfield with grad psi_1 and the rotated gradient of phi_1."""
    if vec.eta.size == 0:
        raise ValueError("vector result carries no positive eigenvalue")
    u = vec.reduced[:, vec.first_field_index]
    con = vec.constraints
    mesh = con.mesh
    if form is None:
        form = assemble_curvature(mesh, con) if vec.form_used == "curvature" else assemble_divcurl(mesh, con)
    if form.norm2(u) <= 0:
        raise ValueError("first eigenfield vanishes")
    w1 = con.restrict(nodal_average(mesh, nodal_gradient(mesh, scalar_gammac.eigenfunctions[0])))
    w2 = con.restrict(nodal_average(mesh, perp(nodal_gradient(mesh, scalar_gamma.eigenfunctions[0]))))

    def cos(a, b):
        return abs(float(a @ (form.mass @ b))) / np.sqrt(form.norm2(a) * form.norm2(b))

    lc = float(scalar_gammac.eigenvalues[0])
    lg = float(scalar_gamma.eigenvalues[0])
    if abs(lc - lg) <= DEGENERACY_REL * min(lc, lg):
        who = "both"
    else:
        who = "gammac" if lc < lg else "gamma"
    eta = vec.eta
    near = bool(eta.size >= 2 and eta[1] - eta[0] < DEGENERACY_REL * eta[0])
    return MinimizerReport(float(eta[0]), cos(u, w1), cos(u, w2), lc, lg, who, near,
                           rayleigh_quotient(form, w1), rayleigh_quotient(form, w2))
