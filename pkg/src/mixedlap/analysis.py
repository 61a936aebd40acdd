"""End-to-end checks of the eigenvalue inequality, spectral union, form
equality, monotonicity and hot-spot location on a single domain.

Every level of a run is computed independently; failures are recorded in
the report instead of propagating.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .eigen import EigenSolverError
from .geometry import DomainFile, DomainSpec, GeometryError, Label, check_hypotheses, find_rotation
from .mesh import MeshError, triangulate
from .scalar_fem import AssemblyError, KernelPresent, gradient_field, hotspot_report, monotonicity_report, solve_mixed
from .vector_fem import (
    assemble_curvature,
    assemble_divcurl,
    build_constraints,
    compare_forms,
    identify_minimizer,
    sign_agreement,
    solve_vector_evp,
)

__all__ = [
    "CONFIRMED",
    "REFUTED",
    "NOT_MET",
    "INCONCLUSIVE",
    "VERDICTS",
    "LevelResult",
    "THEOREMS",
    "TheoremReport",
    "ConvergenceRow",
    "richardson",
    "default_levels",
    "choose_rotation",
    "run_level",
    "run_theorem_suite",
    "convergence_study",
]

log = logging.getLogger(__name__)

CONFIRMED = "confirmed"
REFUTED = "refuted"
NOT_MET = "hypotheses-not-met"
INCONCLUSIVE = "inconclusive"
VERDICTS = (CONFIRMED, REFUTED, NOT_MET, INCONCLUSIVE)
THEOREMS = ("inequality", "spectral_union", "kernel", "form_equality", "monotonicity", "hotspot")

DRIFT_FACTOR = 3.0
GAP_DECAY = 1.5
# discrete forms that agree to roundoff count as equal without a decay check
GAP_EXACT = 1e-12
UNION_REL = 0.01
HOTSPOT_FACTOR = 2.0
RATE_OK = 1.8
RATE_SINGULAR = 0.8

# failures a single level may raise; anything else is a bug and propagates
_LEVEL_ERRORS = (MeshError, GeometryError, AssemblyError, KernelPresent, EigenSolverError, ValueError)


def richardson(coarse: float, fine: float, ratio: float = 2.0, order: float = 2.0) -> float:
    """Extrapolate ``fine + (fine - coarse) / (ratio**order - 1)``."""
    if ratio <= 1.0:
        raise ValueError("mesh ratio must exceed 1")
    return fine + (fine - coarse) / (ratio ** order - 1.0)


def default_levels(domain: DomainSpec, divisions: Sequence[int] = (16, 32, 64)) -> list:
    return [domain.diameter / d for d in divisions]


def choose_rotation(domain: DomainSpec, preferred: float = 0.0):
    """Rotation used for the suite and the hypothesis report at that rotation.

    ``preferred`` (usually the domain file's rotation) is kept when it passes;
    otherwise the center of the widest feasible rotation window is used.
    """
    rep = check_hypotheses(domain, preferred)
    if rep.all_pass:
        return preferred, rep
    theta = find_rotation(domain, mode="center")
    if theta is None:
        return preferred, rep
    return theta, check_hypotheses(domain, theta)


@dataclass
class LevelResult:
    h_target: float
    h: float = math.nan
    level: int = -1
    n_nodes: int = 0
    n_triangles: int = 0
    lambda_gamma: list = field(default_factory=list)
    lambda_gammac: list = field(default_factory=list)
    eigenvalues_vector: list = field(default_factory=list)
    kernel_dim: int = -1
    union_mismatch: float = math.nan
    form_divcurl: float = math.nan
    form_curvature: float = math.nan
    form_gap: float = math.nan
    sign_agreement: float = math.nan
    monotonicity: Optional[dict] = None
    hotspot: Optional[dict] = None
    minimizer: Optional[dict] = None
    warnings: list = field(default_factory=list)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def eta1(self) -> float:
        ev = self.eigenvalues_vector[self.kernel_dim:] if self.kernel_dim >= 0 else []
        return float(ev[0]) if len(ev) else math.nan

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["eta1"] = self.eta1
        return d


def run_level(domain: DomainSpec, h_target: float, k_vector: int = 4, seed: int = 0,
              permute_seed: Optional[int] = None, want_monotonicity: bool = True) -> LevelResult:
    """Mesh, both scalar solves, both vector forms and the derived diagnostics at one mesh size."""
    out = LevelResult(h_target=float(h_target))
    try:
        mesh = triangulate(domain, h_target)
        if permute_seed is not None:
            mesh = mesh.permuted(permute_seed)
        out.h, out.level = mesh.h, mesh.level
        out.n_nodes, out.n_triangles = mesh.n_nodes, mesh.n_triangles
        sg = solve_mixed(mesh, Label.GAMMA, 2, seed=seed)
        sc = solve_mixed(mesh, Label.GAMMA_C, 2, seed=seed)
        out.lambda_gamma = [float(v) for v in sg.eigenvalues]
        out.lambda_gammac = [float(v) for v in sc.eigenvalues]

        con = build_constraints(mesh, domain)
        curv = assemble_curvature(mesh, con, domain)
        dc = assemble_divcurl(mesh, con)
        vec = solve_vector_evp(curv, k_vector, seed=seed)
        out.eigenvalues_vector = [float(v) for v in vec.eigenvalues]
        out.kernel_dim = vec.kernel_dim_estimate
        out.warnings = list(curv.warnings)
        if vec.eta.size:
            lam = min(out.lambda_gamma[0], out.lambda_gammac[0])
            out.union_mismatch = abs(float(vec.eta[0]) - lam) / lam
            u = vec.reduced[:, vec.first_field_index]
            out.form_divcurl, out.form_curvature, out.form_gap = compare_forms(u, dc, curv)
            out.sign_agreement = sign_agreement(mesh, vec.fields[vec.first_field_index])
            out.minimizer = identify_minimizer(vec, sg, sc, form=curv).to_dict()
        if want_monotonicity:
            g = gradient_field(sc)
            if sc.eigenfunctions[0].sum() < 0:
                g = -g
            out.monotonicity = monotonicity_report(g).to_dict()
        hs = hotspot_report(sc, domain).to_dict()
        hs.pop("argmax_node")  # node numbering is not a property of the domain
        hs["h"] = mesh.h
        out.hotspot = hs
    except _LEVEL_ERRORS as exc:
        log.warning("level h=%g failed: %s", h_target, exc)
        out.error = f"{type(exc).__name__}: {exc}"
    return out


@dataclass
class TheoremReport:
    domain_id: str
    rotation: float
    hypotheses: dict
    levels: list
    extrapolated: dict
    inequality_margin: float
    inequality_drift: float
    margins: list
    form_gaps: list
    union_mismatches: list
    verdicts: dict
    measured: dict
    notes: dict = field(default_factory=dict)

    @property
    def failures(self) -> list:
        return [lv.error for lv in self.levels if lv.error is not None]

    def to_dict(self) -> dict:
        return {
            "domain_id": self.domain_id,
            "rotation": self.rotation,
            "hypotheses": self.hypotheses,
            "levels": [lv.to_dict() for lv in self.levels],
            "extrapolated": dict(self.extrapolated),
            "inequality_margin": self.inequality_margin,
            "inequality_drift": self.inequality_drift,
            "margins": list(self.margins),
            "form_gaps": list(self.form_gaps),
            "union_mismatches": list(self.union_mismatches),
            "verdicts": dict(self.verdicts),
            "measured": dict(self.measured),
            "notes": dict(self.notes),
            "failures": self.failures,
        }


def _extrapolate(levels: list, key) -> tuple:
    """Richardson value from the two finest levels and their level ratio."""
    a, b = levels[-2], levels[-1]
    va, vb = key(a), key(b)
    dl = b.level - a.level
    if dl <= 0:
        return vb, abs(vb - va)
    return richardson(va, vb, 2.0 ** dl), abs(vb - va)


# Each outcome is computed from the measurements alone; ``_gated`` then
# replaces it by NOT_MET when the hypotheses of the predicted statement fail.


def _outcome_inequality(levels, margin, drift, margins):
    if margin < -DRIFT_FACTOR * drift:
        return REFUTED
    if margin > DRIFT_FACTOR * drift and all(m > 0 for m in margins):
        return CONFIRMED
    return INCONCLUSIVE


def _outcome_union(mism):
    if len(mism) < 2 or not all(np.isfinite(mism)):
        return INCONCLUSIVE
    if mism[-1] < mism[-2]:
        return CONFIRMED
    if mism[-1] > UNION_REL:
        return REFUTED
    return INCONCLUSIVE


def _outcome_kernel(levels):
    return CONFIRMED if all(lv.kernel_dim == 0 for lv in levels) else REFUTED


def _outcome_forms(gaps):
    if len(gaps) < 2 or not all(np.isfinite(gaps)):
        return INCONCLUSIVE
    if max(gaps) <= GAP_EXACT:
        return CONFIRMED
    if all(gaps[i] >= GAP_DECAY * gaps[i + 1] for i in range(len(gaps) - 1)):
        return CONFIRMED
    if gaps[-1] > gaps[0]:
        return REFUTED
    return INCONCLUSIVE


def _outcome_monotonicity(levels):
    mono = levels[-1].monotonicity
    if mono is None:
        return INCONCLUSIVE
    return CONFIRMED if mono["ok"] else REFUTED


def _outcome_hotspot(levels):
    tail = levels[-2:]
    if any(lv.hotspot is None for lv in tail):
        return INCONCLUSIVE
    if tail[-1].hotspot["corner"] is None:
        # without a distinguished corner only "maximum on GAMMA" is predicted
        return CONFIRMED if all(lv.hotspot["is_on_gamma"] for lv in tail) else REFUTED
    near = all(lv.hotspot["distance"] <= HOTSPOT_FACTOR * lv.hotspot["h"] for lv in tail)
    return CONFIRMED if near else REFUTED


def _hypotheses_met(rep) -> dict:
    connected = rep.hyp1_ok and rep.gamma_connected
    return {
        "inequality": rep.all_pass,
        "spectral_union": connected,
        "kernel": connected,
        "form_equality": rep.smooth_hypothesis_ok,
        "monotonicity": rep.all_pass,
        "hotspot": rep.all_pass,
    }


def run_theorem_suite(domain, h_levels: Optional[Sequence[float]] = None, seed: int = 0,
                      permute_seed: Optional[int] = None, k_vector: int = 4, rotation: Optional[float] = None,
                      domain_id: Optional[str] = None) -> TheoremReport:
    """Run every check on ``domain`` (a ``DomainSpec`` or ``DomainFile``) at the mesh sizes ``h_levels``.

    Mesh sizes refer to the unrotated domain; rotations do not change lengths.
    """
    preferred = 0.0
    if isinstance(domain, DomainFile):
        domain_id = domain_id or domain.name
        preferred = domain.rotation
        domain = domain.domain
    domain_id = domain_id or "domain"
    if rotation is None:
        rotation, rep = choose_rotation(domain, preferred)
    else:
        rep = check_hypotheses(domain, rotation)
    if h_levels is None:
        h_levels = default_levels(domain)
    h_levels = sorted((float(h) for h in h_levels), reverse=True)
    if len(h_levels) < 2:
        raise ValueError("at least two mesh sizes are needed for extrapolation")
    work = domain.rotated(rotation) if rotation else domain

    levels = [run_level(work, h, k_vector, seed, permute_seed) for h in h_levels]
    good = [lv for lv in levels if lv.ok]
    nan = math.nan
    ext = {"lambda_gamma": nan, "lambda_gammac": nan, "eta1": nan}
    margin = drift = nan
    margins, gaps, mism = [], [], []
    met = _hypotheses_met(rep)
    measured = {k: INCONCLUSIVE for k in met}
    if len(good) >= 2:
        ext["lambda_gamma"], dg = _extrapolate(good, lambda lv: lv.lambda_gamma[0])
        ext["lambda_gammac"], dc = _extrapolate(good, lambda lv: lv.lambda_gammac[0])
        ext["eta1"], _ = _extrapolate(good, lambda lv: lv.eta1)
        margin = ext["lambda_gamma"] - ext["lambda_gammac"]
        drift = dg + dc
        margins = [lv.lambda_gamma[0] - lv.lambda_gammac[0] for lv in good]
        gaps = [lv.form_gap for lv in good]
        mism = [lv.union_mismatch for lv in good]
        measured = {
            "inequality": _outcome_inequality(good, margin, drift, margins),
            "spectral_union": _outcome_union(mism),
            "kernel": _outcome_kernel(good),
            "form_equality": _outcome_forms(gaps),
            "monotonicity": _outcome_monotonicity(good),
            "hotspot": _outcome_hotspot(good),
        }
    if len(good) < len(levels):
        # a failed level leaves the remaining evidence incomplete
        measured = {k: INCONCLUSIVE for k in measured}
    verdicts = {k: (v if met[k] else NOT_MET) for k, v in measured.items()}
    return TheoremReport(
        domain_id=domain_id,
        rotation=float(rotation),
        hypotheses=rep.to_dict(),
        levels=levels,
        extrapolated=ext,
        inequality_margin=margin,
        inequality_drift=drift,
        margins=margins,
        form_gaps=gaps,
        union_mismatches=mism,
        verdicts=verdicts,
        measured=measured,
        notes={"drift_factor": DRIFT_FACTOR, "gap_decay": GAP_DECAY, "gap_exact": GAP_EXACT},
    )


@dataclass(frozen=True)
class ConvergenceRow:
    h_target: float
    h: float
    level: int
    n_nodes: int
    lambda1: float
    error: Optional[float]
    rate: Optional[float]
    flag: Optional[str]

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _flag(rate: Optional[float]) -> Optional[str]:
    if rate is None or not math.isfinite(rate):
        return None
    if rate >= RATE_OK:
        return "ok"
    if rate >= RATE_SINGULAR:
        return "reduced"
    return "singular"


def convergence_study(domain: DomainSpec, part, h_levels: Sequence[float], exact: Optional[float] = None,
                      seed: int = 0) -> list:
    """Table of ``lambda_1`` against mesh size with empirical convergence orders.

    With ``exact`` the order comes from consecutive errors; otherwise from
    consecutive differences of three levels.  Orders below 0.8 are flagged
    ``"singular"`` (corner-dominated).
    """
    h_levels = sorted((float(h) for h in h_levels), reverse=True)
    if len(h_levels) < 3:
        raise ValueError("a convergence study needs at least three mesh sizes")
    meshes = [triangulate(domain, h) for h in h_levels]
    lam = [float(solve_mixed(m, part, 1, seed=seed).eigenvalues[0]) for m in meshes]
    rows = []
    for i, m in enumerate(meshes):
        err = None if exact is None else abs(lam[i] - exact)
        rate = None
        if exact is not None and i >= 1:
            dl = m.level - meshes[i - 1].level
            prev = abs(lam[i - 1] - exact)
            if dl > 0 and err > 0 and prev > 0:
                rate = math.log(prev / err) / (dl * math.log(2.0))
        elif exact is None and i >= 2:
            dl = m.level - meshes[i - 1].level
            d1, d2 = abs(lam[i - 1] - lam[i - 2]), abs(lam[i] - lam[i - 1])
            if dl > 0 and d1 > 0 and d2 > 0:
                rate = math.log(d1 / d2) / (dl * math.log(2.0))
        rows.append(ConvergenceRow(h_levels[i], m.h, m.level, m.n_nodes, lam[i], err, rate, _flag(rate)))
    return rows
