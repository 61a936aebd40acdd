"""P1 Lagrange discretization of the mixed Dirichlet-Neumann Laplacian."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .eigen import SingularFactorization, smallest_eigenpairs
from .geometry import DomainSpec, Label, hotspot_corner
from .mesh import Mesh

__all__ = [
    "AssemblyError",
    "KernelPresent",
    "FormMatrices",
    "ScalarEigenResult",
    "MonotonicityReport",
    "HotspotReport",
    "p1_gradients",
    "p1_matrices",
    "assemble_scalar",
    "solve_smallest",
    "solve_mixed",
    "nodal_gradient",
    "gradient_field",
    "monotonicity_report",
    "hotspot_report",
]


class AssemblyError(ValueError):
    pass


class KernelPresent(RuntimeError):
    """Stiffness is singular: the form has a kernel on the chosen space."""


def p1_gradients(nodes: np.ndarray, triangles: np.ndarray):
    """Constant gradients of the three hat functions of every triangle.

    Returns ``(G, area)`` with ``G`` of shape ``(T, 3, 2)``.
    """
    p = nodes[triangles]
    x, y = p[:, :, 0], p[:, :, 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    G = np.stack([b, c], axis=2) / det[:, None, None]
    return G, 0.5 * det


_LOCAL_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def _scatter(triangles, local, n):
    rows = np.repeat(triangles, 3, axis=1).ravel()
    cols = np.tile(triangles, (1, 3)).ravel()
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def p1_matrices(nodes: np.ndarray, triangles: np.ndarray, lumped: bool = False):
    """Full P1 stiffness and mass matrices (no boundary conditions)."""
    nodes = np.asarray(nodes, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    G, area = p1_gradients(nodes, triangles)
    Kloc = area[:, None, None] * np.einsum("tad,tbd->tab", G, G)
    if lumped:
        Mloc = area[:, None, None] * np.eye(3)[None] / 3.0
    else:
        Mloc = area[:, None, None] * _LOCAL_MASS[None]
    n = len(nodes)
    K = _scatter(triangles, Kloc, n)
    M = _scatter(triangles, Mloc, n)
    return K, M


def _parse_parts(part) -> frozenset:
    if isinstance(part, (Label, str)):
        return frozenset([Label.parse(part)])
    return frozenset(Label.parse(p) for p in part)


@dataclass(frozen=True, eq=False)
class FormMatrices:
    """Reduced stiffness/mass pair on the free nodes.

    ``free[i]`` is the global node of reduced row ``i``.
    """

    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    free: np.ndarray
    n_global: int
    mesh: Mesh
    dirichlet_part: frozenset

    @property
    def dirichlet_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_global, dtype=bool)
        mask[self.free] = False
        return np.nonzero(mask)[0]

    def extend(self, reduced: np.ndarray) -> np.ndarray:
        """Insert zeros at Dirichlet nodes."""
        reduced = np.asarray(reduced)
        shape = (self.n_global,) + reduced.shape[1:]
        full = np.zeros(shape, dtype=reduced.dtype)
        full[self.free] = reduced
        return full


def assemble_scalar(mesh: Mesh, dirichlet_part, lumped: bool = False) -> FormMatrices:
    """Assemble the P1 pencil with Dirichlet conditions on the closed part(s) ``dirichlet_part``.

    ``dirichlet_part`` is a label or a collection of labels; passing both
    labels gives the all-Dirichlet problem.
    """
    parts = _parse_parts(dirichlet_part)
    K, M = p1_matrices(mesh.nodes, mesh.triangles, lumped=lumped)
    fixed = np.zeros(mesh.n_nodes, dtype=bool)
    for lab in parts:
        fixed[mesh.nodes_with_label(lab)] = True
    if not fixed.any():
        raise AssemblyError("no Dirichlet node: the problem would contain constants")
    free = np.nonzero(~fixed)[0]
    if free.size == 0:
        raise AssemblyError("every node is a Dirichlet node")
    Kr = K[free][:, free].tocsr()
    Mr = M[free][:, free].tocsr()
    return FormMatrices(Kr, Mr, free, mesh.n_nodes, mesh, parts)


@dataclass(frozen=True, eq=False)
class ScalarEigenResult:
    dirichlet_part: frozenset
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray  # (k, n_nodes), M-orthonormal
    mesh: Mesh
    diagnostics: dict = field(default_factory=dict)

    def eigenfunction(self, index: int = 0) -> np.ndarray:
        return self.eigenfunctions[index]

    @property
    def positive_first(self) -> np.ndarray:
        """First eigenfunction with positive mean."""
        v = self.eigenfunctions[0]
        return -v if v.sum() < 0 else v


def _sign_normalize(vecs: np.ndarray) -> np.ndarray:
    out = vecs.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12 * np.abs(col).max())[0]
        if nz.size and col[nz[0]] < 0:
            out[:, j] = -col
    return out


def solve_smallest(matrices: FormMatrices, k: int = 1, seed: int = 0, tol: float = 1e-10) -> ScalarEigenResult:
    """The ``k`` smallest eigenpairs of the reduced pencil, by shift-invert block iteration at 0."""
    n_free = len(matrices.free)
    if not 1 <= k <= n_free:
        raise ValueError(f"k must lie in [1, {n_free}]")
    try:
        vals, vecs, info = smallest_eigenpairs(matrices.stiffness, matrices.mass, k, tol=tol, seed=seed)
    except SingularFactorization as exc:
        raise KernelPresent(str(exc)) from exc
    scale = float(matrices.stiffness.diagonal().sum() / matrices.mass.diagonal().sum())
    if vals[0] <= 1e-10 * scale:
        raise KernelPresent(f"eigenvalue {vals[0]:.3e} is zero at the scale {scale:.3e} of the pencil")
    vecs = _sign_normalize(vecs)
    full = np.stack([matrices.extend(vecs[:, j]) for j in range(k)])
    diag = {"iterations": info.iterations, "residuals": list(info.residuals), "method": info.method}
    return ScalarEigenResult(matrices.dirichlet_part, np.asarray(vals), full, matrices.mesh, diag)


def solve_mixed(mesh: Mesh, dirichlet_part, k: int = 1, **kw) -> ScalarEigenResult:
    return solve_smallest(assemble_scalar(mesh, dirichlet_part), k, **kw)


def nodal_gradient(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    """Per-triangle gradient ``(T, 2)`` of the P1 interpolant of nodal ``values``."""
    G, _ = p1_gradients(mesh.nodes, mesh.triangles)
    v = np.asarray(values, dtype=float)[mesh.triangles]
    return np.einsum("ta,tad->td", v, G)


def gradient_field(result: ScalarEigenResult, index: int = 0) -> np.ndarray:
    return nodal_gradient(result.mesh, result.eigenfunctions[index])


@dataclass(frozen=True)
class MonotonicityReport:
    min_d1: float
    min_d2: float
    offending: tuple
    eps: float

    @property
    def ok(self) -> bool:
        return len(self.offending) == 0

    def to_dict(self) -> dict:
        return {
            "min_d1": self.min_d1,
            "min_d2": self.min_d2,
            "eps": self.eps,
            "n_offending": len(self.offending),
            "offending": list(self.offending[:50]),
            "ok": self.ok,
        }


def monotonicity_report(grad_field: np.ndarray, rel_eps: float = 1e-6) -> MonotonicityReport:
    """Triangles where a gradient component drops below ``-rel_eps * max |grad|``."""
    g = np.asarray(grad_field, dtype=float)
    eps = rel_eps * float(np.max(np.linalg.norm(g, axis=1)))
    bad = np.nonzero((g[:, 0] < -eps) | (g[:, 1] < -eps))[0]
    return MonotonicityReport(float(g[:, 0].min()), float(g[:, 1].min()), tuple(int(i) for i in bad), eps)


@dataclass(frozen=True)
class HotspotReport:
    argmax_node: int
    point: tuple
    is_on_gamma: bool
    corner: Optional[tuple]
    distance: Optional[float]

    def to_dict(self) -> dict:
        return {
            "argmax_node": self.argmax_node,
            "point": list(self.point),
            "is_on_gamma": self.is_on_gamma,
            "corner": None if self.corner is None else list(self.corner),
            "distance": self.distance,
        }


def hotspot_report(result: ScalarEigenResult, domain: DomainSpec, index: int = 0) -> HotspotReport:
    """Location of the maximum of the (positive-mean) eigenfunction relative to the corner P."""
    v = result.eigenfunctions[index]
    if v.sum() < 0:
        v = -v
    mesh = result.mesh
    i = int(np.argmax(v))
    on_gamma = bool(np.isin(i, mesh.nodes_with_label(Label.GAMMA)))
    P = hotspot_corner(domain)
    if P is None:
        return HotspotReport(i, tuple(map(float, mesh.nodes[i])), on_gamma, None, None)
    d = float(np.linalg.norm(mesh.nodes[i] - P))
    return HotspotReport(i, tuple(map(float, mesh.nodes[i])), on_gamma, tuple(map(float, P)), d)
