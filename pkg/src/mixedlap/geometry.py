"""Planar domains bounded by a loop of smooth arcs carrying a two-part label.

The boundary is traversed counterclockwise.  At every boundary point the unit
tangent ``tau`` points along the traversal, the exterior normal is
``nu = (tau_2, -tau_1)`` and the signed curvature ``kappa = nu . dtau/ds`` is
nonpositive on convex pieces (a counterclockwise circle of radius R has
``kappa = -1/R``).
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np

__all__ = [
    "GeometryError",
    "Label",
    "Arc",
    "Corner",
    "DomainSpec",
    "DomainFile",
    "Witness",
    "HypothesisReport",
    "boundary_frame",
    "interior_angle",
    "check_hypotheses",
    "find_rotation",
    "feasible_rotations",
    "hotspot_corner",
    "read_domain_file",
    "parse_domain",
    "domain_to_dict",
    "rotation_matrix",
    "polygon",
    "disk",
]

QUADRANT_TOL = 1e-9
ANGLE_TOL = 1e-6
DEGENERATE_SPEED = 1e-12
CLOSURE_TOL = 1e-12
N_VALIDATE = 64
N_CHECK = 256


class GeometryError(ValueError):
    """Raised for invalid arcs or boundary loops."""


class Label(str, enum.Enum):
    """Boundary part.  GAMMA is the Neumann part of the primal problem."""

    GAMMA = "gamma"
    GAMMA_C = "gammac"

    @classmethod
    def parse(cls, value) -> "Label":
        if isinstance(value, Label):
            return value
        key = str(value).strip().lower().replace("_", "")
        for lab in cls:
            if lab.value == key:
                return lab
        raise GeometryError(f"unknown boundary label {value!r} (expected 'gamma' or 'gammac')")

    @property
    def code(self) -> int:
        return 0 if self is Label.GAMMA else 1

    @classmethod
    def from_code(cls, code: int) -> "Label":
        return Label.GAMMA if int(code) == 0 else Label.GAMMA_C

    def other(self) -> "Label":
        return Label.GAMMA_C if self is Label.GAMMA else Label.GAMMA


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


_ARC_KEYS = {
    "segment": {"start", "end"},
    "circular-arc": {"center", "radius", "theta0", "theta1"},
    "polynomial-parametric": {"x", "y"},
}


def _vec2(value, what: str) -> tuple:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise GeometryError(f"{what} must be a pair of numbers") from exc
    if arr.shape != (2,) or not np.all(np.isfinite(arr)):
        raise GeometryError(f"{what} must be a pair of finite numbers")
    return (float(arr[0]), float(arr[1]))


@dataclass(frozen=True)
class Arc:
    """One smooth boundary piece parametrized over ``t in [0, 1]``.

    ``data`` depends on ``kind``:

    * ``segment``: ``start``, ``end``
    * ``circular-arc``: ``center``, ``radius``, ``theta0``, ``theta1``
      (counterclockwise about the center when ``theta1 > theta0``)
    * ``polynomial-parametric``: ``x``, ``y`` coefficient lists, lowest degree first
    """

    kind: str
    data: dict
    label: Label

    def __post_init__(self):
        if self.kind not in _ARC_KEYS:
            raise GeometryError(f"unknown arc kind {self.kind!r}")
        keys = set(self.data)
        if keys != _ARC_KEYS[self.kind]:
            raise GeometryError(
                f"{self.kind} arc needs keys {sorted(_ARC_KEYS[self.kind])}, got {sorted(keys)}"
            )
        object.__setattr__(self, "label", Label.parse(self.label))
        d = dict(self.data)
        if self.kind == "segment":
            d["start"] = _vec2(d["start"], "segment start")
            d["end"] = _vec2(d["end"], "segment end")
        elif self.kind == "circular-arc":
            d["center"] = _vec2(d["center"], "arc center")
            for key in ("radius", "theta0", "theta1"):
                d[key] = float(d[key])
            if not d["radius"] > 0:
                raise GeometryError("arc radius must be positive")
        else:
            for key in ("x", "y"):
                coeffs = np.asarray(d[key], dtype=float)
                if coeffs.ndim != 1 or coeffs.size < 2 or not np.all(np.isfinite(coeffs)):
                    raise GeometryError(f"polynomial {key} needs >= 2 finite coefficients")
                d[key] = tuple(float(c) for c in coeffs)
        object.__setattr__(self, "data", d)
        self._validate()

    # -- parametrization -------------------------------------------------
    def derivatives(self, t):
        """Return ``r(t), r'(t), r''(t)`` as arrays of shape ``(..., 2)``."""
        t = np.asarray(t, dtype=float)
        d = self.data
        if self.kind == "segment":
            a = np.array(d["start"])
            b = np.array(d["end"])
            r = a + t[..., None] * (b - a)
            r1 = np.broadcast_to(b - a, r.shape).copy()
            r2 = np.zeros_like(r)
        elif self.kind == "circular-arc":
            c = np.array(d["center"])
            R, t0, t1 = d["radius"], d["theta0"], d["theta1"]
            w = t1 - t0
            th = t0 + w * t
            cs, sn = np.cos(th), np.sin(th)
            r = c + R * np.stack([cs, sn], axis=-1)
            r1 = R * w * np.stack([-sn, cs], axis=-1)
            r2 = -R * w * w * np.stack([cs, sn], axis=-1)
        else:
            P = np.polynomial.polynomial
            cx, cy = np.array(d["x"]), np.array(d["y"])
            dx, dy = P.polyder(cx), P.polyder(cy)
            ddx, ddy = P.polyder(dx), P.polyder(dy)
            r = np.stack([P.polyval(t, cx), P.polyval(t, cy)], axis=-1)
            r1 = np.stack([P.polyval(t, dx), P.polyval(t, dy)], axis=-1)
            r2 = np.stack([P.polyval(t, ddx), P.polyval(t, ddy)], axis=-1)
        return r, r1, r2

    def point(self, t):
        return self.derivatives(t)[0]

    def frame(self, t):
        """Unit tangent, exterior normal and signed curvature at ``t``."""
        _, r1, r2 = self.derivatives(t)
        speed = np.linalg.norm(r1, axis=-1)
        if np.any(speed < DEGENERATE_SPEED):
            raise GeometryError("degenerate parametrization (|r'(t)| below 1e-12)")
        tau = r1 / speed[..., None]
        nu = np.stack([tau[..., 1], -tau[..., 0]], axis=-1)
        cross = r1[..., 0] * r2[..., 1] - r1[..., 1] * r2[..., 0]
        kappa = -cross / speed**3
        return tau, nu, kappa

    @property
    def start(self) -> np.ndarray:
        return self.point(0.0)

    @property
    def end(self) -> np.ndarray:
        return self.point(1.0)

    @property
    def is_straight(self) -> bool:
        if self.kind == "segment":
            return True
        if self.kind == "circular-arc":
            return False
        _, _, k = self.frame(np.linspace(0.0, 1.0, N_VALIDATE))
        return bool(np.all(np.abs(k) == 0.0))

    def length(self, n: int = 512) -> float:
        t = np.linspace(0.0, 1.0, n + 1)
        p = self.point(t)
        return float(np.sum(np.linalg.norm(np.diff(p, axis=0), axis=1)))

    def turning(self, n: int = 256) -> float:
        """Total absolute tangent rotation along the arc (radians)."""
        if self.kind == "segment":
            return 0.0
        if self.kind == "circular-arc":
            return abs(self.data["theta1"] - self.data["theta0"])
        tau, _, _ = self.frame(np.linspace(0.0, 1.0, n + 1))
        ang = np.unwrap(np.arctan2(tau[:, 1], tau[:, 0]))
        return float(np.sum(np.abs(np.diff(ang))))

    def rotated(self, theta: float) -> "Arc":
        Q = rotation_matrix(theta)
        d = self.data
        if self.kind == "segment":
            data = {"start": tuple(Q @ d["start"]), "end": tuple(Q @ d["end"])}
        elif self.kind == "circular-arc":
            data = {
                "center": tuple(Q @ d["center"]),
                "radius": d["radius"],
                "theta0": d["theta0"] + theta,
                "theta1": d["theta1"] + theta,
            }
        else:
            cx, cy = np.array(d["x"]), np.array(d["y"])
            data = {"x": tuple(Q[0, 0] * cx + Q[0, 1] * cy), "y": tuple(Q[1, 0] * cx + Q[1, 1] * cy)}
        return Arc(self.kind, data, self.label)

    def closest_parameter(self, p) -> float:
        """Parameter of the arc point nearest to ``p``."""
        p = np.asarray(p, dtype=float)
        if self.kind == "segment":
            a, b = np.array(self.data["start"]), np.array(self.data["end"])
            ab = b - a
            return float(np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0))
        t = np.linspace(0.0, 1.0, 2049)
        d2 = np.sum((self.point(t) - p) ** 2, axis=1)
        t0 = float(t[np.argmin(d2)])
        for _ in range(30):
            r, r1, r2 = self.derivatives(t0)
            g = np.dot(r - p, r1)
            hess = np.dot(r1, r1) + np.dot(r - p, r2)
            if hess <= 0:
                break
            step = g / hess
            t0 = float(np.clip(t0 - step, 0.0, 1.0))
            if abs(step) < 1e-15:
                break
        return t0

    def to_dict(self) -> dict:
        data = {}
        for key, val in self.data.items():
            data[key] = list(val) if isinstance(val, tuple) else val
        return {"kind": self.kind, "data": data, "label": self.label.value}

    def _validate(self):
        t = np.linspace(0.0, 1.0, N_VALIDATE)
        _, r1, _ = self.derivatives(t)
        if np.any(np.linalg.norm(r1, axis=-1) <= DEGENERATE_SPEED):
            raise GeometryError(f"{self.kind} arc has a vanishing derivative")
        if self.kind == "circular-arc" and abs(self.data["theta1"] - self.data["theta0"]) >= 2 * math.pi:
            raise GeometryError("circular arc sweeps a full turn or more")
        if self.kind == "polynomial-parametric":
            pts = self.point(t)
            if _polyline_self_intersects(pts, closed=False):
                raise GeometryError("polynomial arc is not simple")


def _segments_intersect(p, q, r, s):
    """Vectorized proper/improper intersection test of segments pq and rs."""

    def orient(a, b, c):
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (
            c[..., 0] - a[..., 0]
        )

    o1 = orient(p, q, r)
    o2 = orient(p, q, s)
    o3 = orient(r, s, p)
    o4 = orient(r, s, q)
    # orientations at roundoff level mean collinear samples, not a crossing
    scale = np.max(np.abs(np.concatenate([p, q, r, s]))) if p.size else 1.0
    eps = 1e-12 * max(scale, 1.0) ** 2
    strict = (np.abs(o1) > eps) & (np.abs(o2) > eps) & (np.abs(o3) > eps) & (np.abs(o4) > eps)
    return strict & (o1 * o2 < 0) & (o3 * o4 < 0)


def _polyline_self_intersects(pts: np.ndarray, closed: bool) -> bool:
    if closed:
        a = pts
        b = np.roll(pts, -1, axis=0)
    else:
        a, b = pts[:-1], pts[1:]
    m = len(a)
    i, j = np.triu_indices(m, k=2)
    if closed:
        keep = ~((i == 0) & (j == m - 1))
        i, j = i[keep], j[keep]
    if i.size == 0:
        return False
    return bool(np.any(_segments_intersect(a[i], b[i], a[j], b[j])))


@dataclass(frozen=True)
class Corner:
    index: int
    point: tuple
    incoming_arc: int
    outgoing_arc: int
    angle: float


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """A simply connected domain bounded by ``arcs`` traversed counterclockwise."""

    arcs: tuple

    def __post_init__(self):
        arcs = tuple(self.arcs)
        object.__setattr__(self, "arcs", arcs)
        if len(arcs) < 1:
            raise GeometryError("a domain needs at least one arc")
        for i, arc in enumerate(arcs):
            nxt = arcs[(i + 1) % len(arcs)]
            if np.max(np.abs(arc.end - nxt.start)) > CLOSURE_TOL:
                raise GeometryError(f"arc {i} does not end where arc {(i + 1) % len(arcs)} starts")
        labels = {a.label for a in arcs}
        if labels != {Label.GAMMA, Label.GAMMA_C}:
            raise GeometryError("both boundary parts gamma and gammac must be present")
        pts = self.sample_boundary(N_VALIDATE)
        if _polyline_self_intersects(pts, closed=True):
            raise GeometryError("boundary loop is not simple")
        if _shoelace(pts) <= 0:
            raise GeometryError("boundary loop must be positively (counterclockwise) oriented")
        for c in self.corners:
            if not (0.0 < c.angle < 2 * math.pi):
                raise GeometryError(f"cusp at corner {c.index}")

    @property
    def n_arcs(self) -> int:
        return len(self.arcs)

    def sample_boundary(self, per_arc: int) -> np.ndarray:
        t = np.linspace(0.0, 1.0, per_arc, endpoint=False)
        return np.concatenate([a.point(t) for a in self.arcs])

    @cached_property
    def corners(self) -> tuple:
        out = []
        n = len(self.arcs)
        for i in range(n):
            prev = self.arcs[i - 1]
            cur = self.arcs[i]
            tin = prev.frame(1.0)[0]
            tout = cur.frame(0.0)[0]
            turn = math.atan2(tin[0] * tout[1] - tin[1] * tout[0], float(np.dot(tin, tout)))
            out.append(Corner(i, tuple(cur.start), (i - 1) % n, i, math.pi - turn))
        return tuple(out)

    @cached_property
    def diameter(self) -> float:
        pts = self.sample_boundary(N_CHECK)
        d = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt(np.max(np.sum(d * d, axis=-1))))

    @cached_property
    def area(self) -> float:
        return _shoelace(self.sample_boundary(4096))

    def rotated(self, theta: float) -> "DomainSpec":
        if theta == 0.0:
            return self
        return DomainSpec(tuple(a.rotated(theta) for a in self.arcs))

    def label_runs(self) -> list:
        """Maximal cyclic runs of equally labelled arcs as ``(label, [arc ids])``."""
        n = len(self.arcs)
        start = next(i for i in range(n) if self.arcs[i].label != self.arcs[i - 1].label)
        runs = []
        for k in range(n):
            i = (start + k) % n
            if runs and runs[-1][0] == self.arcs[i].label:
                runs[-1][1].append(i)
            else:
                runs.append((self.arcs[i].label, [i]))
        return runs

    def to_dict(self) -> dict:
        return {"arcs": [a.to_dict() for a in self.arcs]}


def _shoelace(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def boundary_frame(domain: DomainSpec, arc_id: int, t: float):
    """Point, unit tangent, exterior normal and signed curvature on an arc.

    At arc endpoints the one-sided values of ``arc_id`` are returned.
    """
    if not 0.0 <= t <= 1.0:
        raise GeometryError("parameter must lie in [0, 1]")
    arc = domain.arcs[arc_id]
    tau, nu, kappa = arc.frame(t)
    return arc.point(t), tau, nu, float(kappa)


def interior_angle(domain: DomainSpec, corner_index: int) -> float:
    return domain.corners[corner_index].angle


# -- hypothesis checks ------------------------------------------------------


@dataclass(frozen=True)
class Witness:
    condition: str
    arc_id: int
    parameter: float
    normal: tuple

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "arc_id": self.arc_id,
            "parameter": self.parameter,
            "normal": list(self.normal),
        }


@dataclass(frozen=True)
class HypothesisReport:
    hyp1_ok: bool
    gamma_connected: bool
    gammac_connected: bool
    transition_angles: tuple
    max_transition_angle: float
    reflex_corner_present: bool
    quadrant_ok_gamma: bool
    quadrant_ok_gammac: bool
    rotation_applied: float
    witnesses: tuple = field(default_factory=tuple)

    @property
    def angles_ok(self) -> bool:
        return self.max_transition_angle < math.pi / 2 - ANGLE_TOL

    @property
    def smooth_hypothesis_ok(self) -> bool:
        """Connected parts, acute transitions and no inward-pointing corner."""
        return (
            self.hyp1_ok
            and self.gamma_connected
            and self.gammac_connected
            and self.angles_ok
            and not self.reflex_corner_present
        )

    @property
    def quadrants_ok(self) -> bool:
        return self.quadrant_ok_gamma and self.quadrant_ok_gammac

    @property
    def all_pass(self) -> bool:
        return self.smooth_hypothesis_ok and self.quadrants_ok

    def to_dict(self) -> dict:
        return {
            "hyp1_ok": self.hyp1_ok,
            "gamma_connected": self.gamma_connected,
            "gammac_connected": self.gammac_connected,
            "transition_angles": list(self.transition_angles),
            "max_transition_angle": self.max_transition_angle,
            "reflex_corner_present": self.reflex_corner_present,
            "quadrant_ok_gamma": self.quadrant_ok_gamma,
            "quadrant_ok_gammac": self.quadrant_ok_gammac,
            "rotation_applied": self.rotation_applied,
            "angles_ok": self.angles_ok,
            "all_pass": self.all_pass,
            "witnesses": [w.to_dict() for w in self.witnesses],
        }


def _quadrant_violation(nu: np.ndarray, label: Label) -> np.ndarray:
    if label is Label.GAMMA_C:
        return np.maximum(nu[..., 0], nu[..., 1])
    return nu[..., 0] * nu[..., 1]


def check_hypotheses(domain: DomainSpec, rotation: float = 0.0) -> HypothesisReport:
    """Check the boundary conditions needed for monotonicity of the ground state.

    Failures are reported with witnesses rather than raised.
    """
    dom = domain.rotated(rotation)
    witnesses = []
    t = np.linspace(0.0, 1.0, N_CHECK)
    ok = {Label.GAMMA: True, Label.GAMMA_C: True}
    cond_name = {Label.GAMMA: "quadrant_gamma", Label.GAMMA_C: "quadrant_gammac"}
    for i, arc in enumerate(dom.arcs):
        _, nu, _ = arc.frame(t)
        bad = np.nonzero(_quadrant_violation(nu, arc.label) > QUADRANT_TOL)[0]
        if bad.size:
            ok[arc.label] = False
            j = bad[np.argmax(_quadrant_violation(nu[bad], arc.label))]
            witnesses.append(Witness(cond_name[arc.label], i, float(t[j]), tuple(map(float, nu[j]))))

    runs = dom.label_runs()
    n_gamma = sum(1 for lab, _ in runs if lab is Label.GAMMA)
    n_gammac = sum(1 for lab, _ in runs if lab is Label.GAMMA_C)
    if n_gamma > 1:
        witnesses.append(Witness("gamma_connected", runs[0][1][0], 0.0, tuple(map(float, dom.arcs[runs[0][1][0]].frame(0.0)[1]))))
    if n_gammac > 1:
        witnesses.append(Witness("gammac_connected", runs[0][1][0], 0.0, tuple(map(float, dom.arcs[runs[0][1][0]].frame(0.0)[1]))))

    transition = []
    for c in dom.corners:
        if dom.arcs[c.incoming_arc].label != dom.arcs[c.outgoing_arc].label:
            transition.append(c.angle)
            if not c.angle < math.pi / 2 - ANGLE_TOL:
                nu0 = dom.arcs[c.outgoing_arc].frame(0.0)[1]
                witnesses.append(Witness("transition_angle", c.outgoing_arc, 0.0, tuple(map(float, nu0))))
    reflex = False
    for c in dom.corners:
        if c.angle > math.pi + ANGLE_TOL:
            reflex = True
            nu0 = dom.arcs[c.outgoing_arc].frame(0.0)[1]
            witnesses.append(Witness("reflex_corner", c.outgoing_arc, 0.0, tuple(map(float, nu0))))
    hyp1 = all(ANGLE_TOL < c.angle < 2 * math.pi - ANGLE_TOL for c in dom.corners)
    return HypothesisReport(
        hyp1_ok=hyp1,
        gamma_connected=n_gamma == 1,
        gammac_connected=n_gammac == 1,
        transition_angles=tuple(transition),
        max_transition_angle=max(transition) if transition else 0.0,
        reflex_corner_present=reflex,
        quadrant_ok_gamma=ok[Label.GAMMA],
        quadrant_ok_gammac=ok[Label.GAMMA_C],
        rotation_applied=float(rotation),
        witnesses=tuple(witnesses),
    )


class _RotationScan:
    """Quadrant violation as a function of the rotation angle."""

    def __init__(self, domain: DomainSpec):
        t = np.linspace(0.0, 1.0, N_CHECK)
        nus, codes = [], []
        for arc in domain.arcs:
            nus.append(arc.frame(t)[1])
            codes.append(np.full(N_CHECK, arc.label.code))
        self.nu = np.concatenate(nus)
        self.is_c = np.concatenate(codes) == Label.GAMMA_C.code

    def violation(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        c, s = np.cos(theta)[:, None], np.sin(theta)[:, None]
        n1 = c * self.nu[None, :, 0] - s * self.nu[None, :, 1]
        n2 = s * self.nu[None, :, 0] + c * self.nu[None, :, 1]
        v = np.where(self.is_c[None, :], np.maximum(n1, n2), n1 * n2)
        return v.max(axis=1)


def _golden_min(f, a, b, iters=80):
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def feasible_rotations(domain: DomainSpec, steps: int = 3600) -> list:
    """Rotation intervals ``(lo, hi)`` satisfying the quadrant conditions.

    ``lo`` lies in ``[0, 2pi)`` and ``hi >= lo``; an interval with ``hi >= 2pi``
    wraps through zero.  Returns an empty list when a rotation-invariant
    condition fails.  Isolated feasible angles found by local refinement appear
    as ``(a, a)``.
    """
    base = check_hypotheses(domain, 0.0)
    if not base.smooth_hypothesis_ok:
        return []
    two_pi = 2 * math.pi
    scan = _RotationScan(domain)

    def ok(th):
        return float(scan.violation(th)[0]) <= QUADRANT_TOL

    step = two_pi / steps
    grid = np.arange(steps) * step
    viol = scan.violation(grid)
    feas = viol <= QUADRANT_TOL
    intervals = []
    if feas.all():
        return [(0.0, two_pi)]
    if feas.any():
        # walk the cyclic grid starting just after an infeasible sample
        first_bad = int(np.argmin(feas))
        k = 1
        while k <= steps:
            i = (first_bad + k) % steps
            if feas[i]:
                j = k
                while j + 1 <= steps and feas[(first_bad + j + 1) % steps]:
                    j += 1
                a = grid[first_bad] + k * step
                b = grid[first_bad] + j * step
                lo = _bisect_edge(ok, a - step, a)
                hi = _bisect_edge(ok, b + step, b)
                shift = math.floor(lo / two_pi) * two_pi
                intervals.append((lo - shift, hi - shift))
                k = j + 1
            else:
                k += 1
    else:
        def f(th):
            return float(scan.violation(th)[0])

        loc = np.nonzero((viol <= np.roll(viol, 1)) & (viol <= np.roll(viol, -1)))[0]
        loc = loc[np.argsort(viol[loc])][:32]
        for i in loc:
            th, val = _golden_min(f, grid[i] - step, grid[i] + step)
            if val <= QUADRANT_TOL:
                th = th % two_pi
                intervals.append((th, th))
    intervals.sort()
    return intervals


def _bisect_edge(ok, bad_side: float, good_side: float, iters: int = 60) -> float:
    for _ in range(iters):
        mid = 0.5 * (bad_side + good_side)
        if ok(mid):
            good_side = mid
        else:
            bad_side = mid
    return good_side


def find_rotation(domain: DomainSpec, mode: str = "first") -> Optional[float]:
    """Rotation angle in ``[0, 2pi)`` after which all hypothesis checks pass.

    ``mode='first'`` returns the smallest such angle.  ``mode='center'``
    returns the midpoint of the feasible interval holding that angle, which
    keeps every normal strictly inside its quadrant when the interval has
    positive width.
    """
    if mode not in ("first", "center"):
        raise ValueError(f"unknown mode {mode!r}")
    intervals = feasible_rotations(domain)
    if not intervals:
        return None
    two_pi = 2 * math.pi
    wrapping = [iv for iv in intervals if iv[1] >= two_pi]
    lo, hi = wrapping[0] if wrapping else intervals[0]
    if mode == "first":
        return 0.0 if wrapping else float(lo)
    if hi - lo >= two_pi:
        return 0.0
    return float((0.5 * (lo + hi)) % two_pi)


def hotspot_corner(domain: DomainSpec) -> Optional[np.ndarray]:
    """The GAMMA corner where the normal jumps between the open 2nd and 4th quadrants.

    ``None`` when GAMMA contains an axis-parallel segment or no unique such corner exists.
    """
    for arc in domain.arcs:
        if arc.label is Label.GAMMA and arc.is_straight:
            nu = arc.frame(0.5)[1]
            if abs(nu[0]) <= QUADRANT_TOL or abs(nu[1]) <= QUADRANT_TOL:
                return None

    def quadrant(v):
        if v[0] < -QUADRANT_TOL and v[1] > QUADRANT_TOL:
            return 2
        if v[0] > QUADRANT_TOL and v[1] < -QUADRANT_TOL:
            return 4
        return 0

    found = []
    for c in domain.corners:
        a_in, a_out = domain.arcs[c.incoming_arc], domain.arcs[c.outgoing_arc]
        if a_in.label is Label.GAMMA and a_out.label is Label.GAMMA:
            q_in = quadrant(a_in.frame(1.0)[1])
            q_out = quadrant(a_out.frame(0.0)[1])
            if {q_in, q_out} == {2, 4}:
                found.append(np.array(c.point))
    return found[0] if len(found) == 1 else None


# -- domain files -----------------------------------------------------------

_TOP_KEYS = {"arcs", "rotation", "markers", "name", "description"}
_ARC_ENTRY_KEYS = {"kind", "data", "label"}


@dataclass(frozen=True, eq=False)
class DomainFile:
    domain: DomainSpec
    rotation: float = 0.0
    markers: Optional[dict] = None
    name: Optional[str] = None
    description: Optional[str] = None


def parse_domain(obj: dict) -> DomainFile:
    if not isinstance(obj, dict):
        raise GeometryError("domain file must hold a JSON object")
    unknown = set(obj) - _TOP_KEYS
    if unknown:
        raise GeometryError(f"unknown top-level keys: {sorted(unknown)}")
    if "arcs" not in obj or not isinstance(obj["arcs"], list):
        raise GeometryError("domain file needs an 'arcs' list")
    arcs = []
    for i, entry in enumerate(obj["arcs"]):
        if not isinstance(entry, dict):
            raise GeometryError(f"arc {i} must be an object")
        bad = set(entry) - _ARC_ENTRY_KEYS
        if bad or set(entry) != _ARC_ENTRY_KEYS:
            raise GeometryError(f"arc {i} needs exactly keys {sorted(_ARC_ENTRY_KEYS)}")
        if not isinstance(entry["data"], dict):
            raise GeometryError(f"arc {i} data must be an object")
        arcs.append(Arc(entry["kind"], entry["data"], entry["label"]))
    domain = DomainSpec(tuple(arcs))
    rotation = obj.get("rotation", 0.0)
    if not isinstance(rotation, (int, float)) or isinstance(rotation, bool) or not math.isfinite(rotation):
        raise GeometryError("rotation must be a finite number")
    markers = obj.get("markers")
    if markers is not None:
        if not isinstance(markers, dict):
            raise GeometryError("markers must map marker ids to arc indices")
        parsed = {}
        for key, val in markers.items():
            try:
                mk = int(key)
            except ValueError as exc:
                raise GeometryError(f"marker id {key!r} is not an integer") from exc
            if not isinstance(val, int) or not 0 <= val < len(arcs):
                raise GeometryError(f"marker {key} maps to invalid arc index {val!r}")
            parsed[mk] = val
        markers = parsed
    for key in ("name", "description"):
        if key in obj and not isinstance(obj[key], str):
            raise GeometryError(f"{key} must be a string")
    return DomainFile(domain, float(rotation), markers, obj.get("name"), obj.get("description"))


def read_domain_file(path) -> DomainFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise GeometryError(f"cannot read domain file {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GeometryError(f"{path}: invalid JSON ({exc})") from exc
    df = parse_domain(obj)
    if df.name is None:
        df = DomainFile(df.domain, df.rotation, df.markers, path.stem, df.description)
    return df


def domain_to_dict(df: DomainFile) -> dict:
    out = df.domain.to_dict()
    if df.name is not None:
        out["name"] = df.name
    if df.description is not None:
        out["description"] = df.description
    if df.rotation:
        out["rotation"] = df.rotation
    if df.markers:
        out["markers"] = {str(k): v for k, v in sorted(df.markers.items())}
    return out


def polygon(vertices, labels) -> DomainSpec:
    """Polygon with side ``i`` running from ``vertices[i]`` to ``vertices[i + 1]``."""
    v = [tuple(map(float, p)) for p in vertices]
    if len(labels) != len(v):
        raise GeometryError("need one label per side")
    arcs = [Arc("segment", {"start": v[i], "end": v[(i + 1) % len(v)]}, labels[i]) for i in range(len(v))]
    return DomainSpec(tuple(arcs))


def disk(radius: float = 1.0, labels=("gamma", "gamma", "gammac", "gammac"), center=(0.0, 0.0)) -> DomainSpec:
    """Disk split into equal counterclockwise arcs, the first starting at angle 0."""
    n = len(labels)
    arcs = [Arc("circular-arc", {"center": tuple(center), "radius": float(radius),
                                 "theta0": 2 * math.pi * i / n, "theta1": 2 * math.pi * (i + 1) / n}, labels[i])
            for i in range(n)]
    return DomainSpec(tuple(arcs))
