"""Discrete decomposition of piecewise-constant vector fields into a gradient
part vanishing on GAMMA_C, a rotated-gradient part vanishing on GAMMA, and a
remainder orthogonal to both.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import DomainSpec, Label
from .mesh import Mesh
from .scalar_fem import p1_gradients, solve_mixed
from .vector_fem import assemble_curvature, build_constraints, perp, solve_vector_evp

__all__ = [
    "DecompositionError",
    "DecompositionResult",
    "gradient_operators",
    "decompose",
    "cross_gram",
    "exact_discrete_orthogonality_check",
    "estimate_hc_dim",
    "builtin_field",
    "BUILTIN_FIELDS",
    "l2_norm2",
]


class DecompositionError(ValueError):
    pass


def gradient_operators(mesh: Mesh):
    """Sparse ``(T, N)`` maps from nodal values to per-triangle ``d1`` and ``d2``, plus areas."""
    G, area = p1_gradients(mesh.nodes, mesh.triangles)
    T = mesh.n_triangles
    rows = np.repeat(np.arange(T), 3)
    cols = mesh.triangles.ravel()
    shape = (T, mesh.n_nodes)
    Gx = sp.csr_matrix((G[:, :, 0].ravel(), (rows, cols)), shape=shape)
    Gy = sp.csr_matrix((G[:, :, 1].ravel(), (rows, cols)), shape=shape)
    return Gx, Gy, area


def l2_norm2(field: np.ndarray, area: np.ndarray) -> float:
    return float(np.sum(area * np.sum(np.asarray(field) ** 2, axis=1)))


def _free_nodes(mesh: Mesh, label: Label) -> np.ndarray:
    fixed = mesh.nodes_with_label(label)
    if fixed.size == 0:
        raise DecompositionError(f"no Dirichlet node on {label.value}")
    mask = np.ones(mesh.n_nodes, dtype=bool)
    mask[fixed] = False
    free = np.nonzero(mask)[0]
    if free.size == 0:
        raise DecompositionError(f"potential space vanishing on {label.value} is empty")
    return free


@dataclass(frozen=True, eq=False)
class DecompositionResult:
    """``field = grad psi + perp grad phi + residual`` on every triangle."""

    psi: np.ndarray
    phi: np.ndarray
    grad_psi: np.ndarray
    perp_grad_phi: np.ndarray
    residual: np.ndarray
    norms: dict

    def to_dict(self) -> dict:
        return {"norms": dict(self.norms)}


def decompose(field: np.ndarray, mesh: Mesh, domain: Optional[DomainSpec] = None) -> DecompositionResult:
    """Project a per-triangle field onto both potential spaces.

    ``psi`` solves the Galerkin equations over P1 functions vanishing on
    GAMMA_C, ``phi`` over P1 functions vanishing on GAMMA.
    """
    u = np.asarray(field, dtype=float)
    if u.shape != (mesh.n_triangles, 2) or not np.all(np.isfinite(u)):
        raise DecompositionError(f"field must be a finite ({mesh.n_triangles}, 2) array")
    Gx, Gy, area = gradient_operators(mesh)
    A = sp.diags(area)
    K = (Gx.T @ A @ Gx + Gy.T @ A @ Gy).tocsr()

    fc = _free_nodes(mesh, Label.GAMMA_C)
    fg = _free_nodes(mesh, Label.GAMMA)
    au = area[:, None] * u
    # <u, grad chi> and <u, perp grad xi> with perp grad xi = (-d2 xi, d1 xi)
    b_psi = Gx.T @ au[:, 0] + Gy.T @ au[:, 1]
    b_phi = -(Gy.T @ au[:, 0]) + Gx.T @ au[:, 1]
    psi = np.zeros(mesh.n_nodes)
    phi = np.zeros(mesh.n_nodes)
    psi[fc] = spla.splu(K[fc][:, fc].tocsc()).solve(b_psi[fc])
    phi[fg] = spla.splu(K[fg][:, fg].tocsc()).solve(b_phi[fg])
    gpsi = np.stack([Gx @ psi, Gy @ psi], axis=1)
    pphi = perp(np.stack([Gx @ phi, Gy @ phi], axis=1))
    res = u - gpsi - pphi
    norms = {
        "field": l2_norm2(u, area),
        "grad_psi": l2_norm2(gpsi, area),
        "perp_grad_phi": l2_norm2(pphi, area),
        "residual": l2_norm2(res, area),
        "cross_psi_phi": float(np.sum(area * np.sum(gpsi * pphi, axis=1))),
    }
    return DecompositionResult(psi, phi, gpsi, pphi, res, norms)


def cross_gram(mesh: Mesh) -> sp.csr_matrix:
    """``C[i, j] = <grad chi_i, perp grad xi_j>`` for hats vanishing on GAMMA_C (rows) and GAMMA (columns)."""
    Gx, Gy, area = gradient_operators(mesh)
    A = sp.diags(area)
    C = Gx.T @ A @ (-Gy) + Gy.T @ A @ Gx
    fc = _free_nodes(mesh, Label.GAMMA_C)
    fg = _free_nodes(mesh, Label.GAMMA)
    return C.tocsr()[fc][:, fg]


def exact_discrete_orthogonality_check(mesh: Mesh, domain: Optional[DomainSpec] = None) -> float:
    """Largest cross-Gram entry relative to the largest stiffness diagonal entry."""
    C = cross_gram(mesh)
    Gx, Gy, area = gradient_operators(mesh)
    kdiag = np.asarray((Gx.multiply(Gx) + Gy.multiply(Gy)).T @ area).ravel()
    big = float(np.max(np.abs(C.data))) if C.nnz else 0.0
    return big / float(kdiag.max())


def estimate_hc_dim(mesh: Mesh, domain: Optional[DomainSpec] = None, tol_kernel: Optional[float] = None,
                    k: int = 4) -> int:
    """Number of near-zero curvature-form eigenvalues (discrete dimension of the harmonic part)."""
    con = build_constraints(mesh, domain)
    form = assemble_curvature(mesh, con, domain)
    return solve_vector_evp(form, k, tol_kernel=tol_kernel).kernel_dim_estimate


BUILTIN_FIELDS = ("constant", "rotational", "radial", "grad-psi1")


def builtin_field(name: str, mesh: Mesh) -> np.ndarray:
    """Per-triangle samples of a named test field at triangle centroids."""
    c = mesh.nodes[mesh.triangles].mean(axis=1)
    if name == "constant":
        return np.tile([0.0, 1.0], (mesh.n_triangles, 1))
    if name == "rotational":
        return np.stack([-c[:, 1], c[:, 0]], axis=1)
    if name == "radial":
        return c.copy()
    if name == "grad-psi1":
        res = solve_mixed(mesh, Label.GAMMA_C, 1)
        Gx, Gy, _ = gradient_operators(mesh)
        v = res.positive_first
        return np.stack([Gx @ v, Gy @ v], axis=1)
    raise DecompositionError(f"unknown builtin field {name!r}; choose from {', '.join(BUILTIN_FIELDS)}")
