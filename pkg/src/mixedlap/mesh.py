"""Conforming triangulations that remember which arc every boundary edge came from."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .geometry import DomainSpec, Label, _polyline_self_intersects

__all__ = [
    "MeshError",
    "Mesh",
    "triangulate",
    "refine",
    "import_mesh",
    "export_triangle",
    "export_vtk",
    "read_vtk",
    "MIN_ANGLE_DEG",
]

log = logging.getLogger(__name__)

MIN_ANGLE_DEG = 15.0
SMOOTHING_ROUNDS = 10
MAX_PIECE_TURNING = math.pi / 12
QUALITY_GUARD_DEG = 20.0
COARSE_SMOOTHING_ROUNDS = 50
LEVEL_SMOOTHING_ROUNDS = 10


class MeshError(ValueError):
    """Raised for meshing failures and invalid imported meshes."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangle mesh with boundary provenance.

    Attributes
    ----------
    nodes : (N, 2) float array
    triangles : (T, 3) int array, counterclockwise
    edge_nodes : (E, 2) int array
        Boundary edges, oriented along the counterclockwise boundary loop.
    edge_arc : (E,) int array
        Index of the arc that generated each boundary edge.
    edge_t : (E, 2) float array
        Arc parameters of the two edge endpoints.
    edge_label : (E,) int array
        ``Label.code`` of each boundary edge.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    edge_nodes: np.ndarray
    edge_arc: np.ndarray
    edge_t: np.ndarray
    edge_label: np.ndarray
    domain: Optional[DomainSpec] = None
    level: int = 0

    def __post_init__(self):
        object.__setattr__(self, "nodes", _frozen(np.asarray(self.nodes, dtype=float)))
        object.__setattr__(self, "triangles", _frozen(np.asarray(self.triangles, dtype=np.int64)))
        object.__setattr__(self, "edge_nodes", _frozen(np.asarray(self.edge_nodes, dtype=np.int64)))
        object.__setattr__(self, "edge_arc", _frozen(np.asarray(self.edge_arc, dtype=np.int64)))
        object.__setattr__(self, "edge_t", _frozen(np.asarray(self.edge_t, dtype=float)))
        object.__setattr__(self, "edge_label", _frozen(np.asarray(self.edge_label, dtype=np.int64)))

    # -- basic quantities -------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def all_edges(self) -> np.ndarray:
        """Unique undirected edges as sorted node pairs."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def edge_lengths(self) -> np.ndarray:
        e = self.all_edges()
        return np.linalg.norm(self.nodes[e[:, 1]] - self.nodes[e[:, 0]], axis=1)

    @property
    def h(self) -> float:
        return float(self.edge_lengths().max())

    def min_angle(self) -> float:
        """Smallest triangle angle in degrees."""
        return float(_tri_min_angles(self.nodes[self.triangles]).min())

    @property
    def diameter(self) -> float:
        b = self.nodes[np.unique(self.edge_nodes)]
        lo, hi = b.min(axis=0), b.max(axis=0)
        if len(b) > 2000:
            return float(np.linalg.norm(hi - lo))
        d = b[:, None, :] - b[None, :, :]
        return float(np.sqrt(np.max(np.sum(d * d, axis=-1))))

    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.edge_nodes)

    def nodes_with_label(self, label) -> np.ndarray:
        """Nodes on the closure of the boundary part ``label``."""
        code = Label.parse(label).code
        return np.unique(self.edge_nodes[self.edge_label == code])

    def node_boundary_info(self) -> dict:
        """Map boundary node -> list of ``(edge index, arc id, arc parameter)``."""
        info = {}
        for e, (a, b) in enumerate(self.edge_nodes):
            arc = int(self.edge_arc[e])
            info.setdefault(int(a), []).append((e, arc, float(self.edge_t[e, 0])))
            info.setdefault(int(b), []).append((e, arc, float(self.edge_t[e, 1])))
        return info

    def corner_nodes(self) -> np.ndarray:
        """Nodes where consecutive boundary edges come from different arcs."""
        nxt = np.roll(np.arange(len(self.edge_nodes)), -1)
        change = self.edge_arc != self.edge_arc[nxt]
        if len(np.unique(self.edge_arc)) == 1:
            return np.zeros(0, dtype=np.int64)
        return np.sort(self.edge_nodes[change, 1])

    def boundary_polygon_area(self) -> float:
        p = self.nodes[self.edge_nodes[:, 0]]
        q = self.nodes[self.edge_nodes[:, 1]]
        return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))

    def permuted(self, seed: int) -> "Mesh":
        """Same mesh with triangles (and their vertex rotation) shuffled."""
        rng = np.random.default_rng(seed)
        order = rng.permutation(self.n_triangles)
        tri = self.triangles[order]
        shift = rng.integers(0, 3, size=len(tri))
        idx = (np.arange(3)[None, :] + shift[:, None]) % 3
        tri = np.take_along_axis(tri, idx, axis=1)
        return Mesh(self.nodes, tri, self.edge_nodes, self.edge_arc, self.edge_t, self.edge_label,
                    self.domain, self.level)

    # -- invariants --------------------------------------------------------
    def validate(self, min_angle_deg: Optional[float] = None) -> None:
        """Raise :class:`MeshError` unless every mesh invariant holds."""
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 2 or not np.all(np.isfinite(self.nodes)):
            raise MeshError("nodes must be a finite (N, 2) array")
        t = self.triangles
        if t.ndim != 2 or t.shape[1] != 3 or t.size == 0:
            raise MeshError("triangles must be a non-empty (T, 3) array")
        if t.min() < 0 or t.max() >= self.n_nodes:
            raise MeshError("triangle references a node that does not exist")
        bb = self.nodes.max(axis=0) - self.nodes.min(axis=0)
        scale = float(bb @ bb)
        areas = self.signed_areas()
        bad = np.nonzero(areas <= 1e-14 * scale)[0]
        if bad.size:
            raise MeshError(f"{bad.size} triangles are degenerate or clockwise (first: {int(bad[0])})")

        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        key, counts = np.unique(np.sort(e, axis=1), axis=0, return_counts=True)
        if np.any(counts > 2):
            raise MeshError("an edge is shared by more than two triangles")
        # a directed edge appearing twice means two triangles overlap with the same orientation
        _, dcount = np.unique(e, axis=0, return_counts=True)
        if np.any(dcount > 1):
            raise MeshError("inconsistent triangle orientation")
        topo_boundary = key[counts == 1]

        used = np.zeros(self.n_nodes, dtype=bool)
        used[t.ravel()] = True
        if not used.all():
            raise MeshError(f"{int((~used).sum())} nodes belong to no triangle")

        en = self.edge_nodes
        if en.ndim != 2 or len(en) == 0:
            raise MeshError("mesh has no boundary edges")
        stored = np.unique(np.sort(en, axis=1), axis=0)
        if len(stored) != len(en) or stored.shape != topo_boundary.shape or np.any(stored != topo_boundary):
            extra = _set_diff(topo_boundary, stored)
            msg = "boundary edges do not match the edges owned by a single triangle"
            if len(extra):
                a, b = extra[0]
                msg += f" (edge {int(a)}-{int(b)} has one triangle but is not on the boundary: hanging node or hole)"
            raise MeshError(msg)
        # single closed loop, consistently oriented
        succ = {}
        for a, b in en:
            if int(a) in succ:
                raise MeshError("boundary is not a single loop (node with two outgoing edges)")
            succ[int(a)] = int(b)
        start = int(en[0, 0])
        cur, steps = start, 0
        while True:
            if cur not in succ:
                raise MeshError("boundary loop is open")
            cur = succ[cur]
            steps += 1
            if cur == start:
                break
            if steps > len(en):
                raise MeshError("boundary loop does not close")
        if steps != len(en):
            raise MeshError("boundary edges form more than one loop")
        # boundary edges must be oriented with the interior on their left
        owner = {}
        for tri in t:
            for i in range(3):
                owner[(int(tri[i]), int(tri[(i + 1) % 3]))] = True
        for a, b in en:
            if (int(a), int(b)) not in owner:
                raise MeshError("boundary edges must run counterclockwise")
        labels = set(np.unique(self.edge_label).tolist())
        if labels != {Label.GAMMA.code, Label.GAMMA_C.code}:
            raise MeshError("boundary labels must cover both gamma and gammac")
        if self.domain is not None:
            arcs = self.domain.arcs
            if self.edge_arc.min() < 0 or self.edge_arc.max() >= len(arcs):
                raise MeshError("boundary edge refers to an unknown arc")
            arc_labels = np.array([a.label.code for a in arcs])
            if np.any(arc_labels[self.edge_arc] != self.edge_label):
                raise MeshError("boundary edge label differs from its arc label")
        if min_angle_deg is not None:
            ma = self.min_angle()
            if ma < min_angle_deg:
                raise MeshError(f"minimum angle {ma:.2f} deg is below {min_angle_deg} deg")


def _set_diff(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if len(b) == 0:
        return a
    sa = {tuple(r) for r in a.tolist()}
    sb = {tuple(r) for r in b.tolist()}
    return np.array(sorted(sa - sb), dtype=np.int64).reshape(-1, 2)


# -- construction ------------------------------------------------------------


def _coarse_boundary(domain: DomainSpec):
    """Coarse polygon vertices with arc provenance; every arc endpoint is a vertex."""
    pts, edges_arc, edges_t = [], [], []
    for i, arc in enumerate(domain.arcs):
        npieces = max(1, int(math.ceil(arc.turning() / MAX_PIECE_TURNING - 1e-12)))
        ts = np.linspace(0.0, 1.0, npieces + 1)
        for k in range(npieces):
            pts.append(arc.point(ts[k]))
            edges_arc.append(i)
            edges_t.append((ts[k], ts[k + 1]))
    return np.array(pts), np.array(edges_arc), np.array(edges_t)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _min_angle_tri(p, q, r) -> float:
    best = math.pi
    for a, b, c in ((p, q, r), (q, r, p), (r, p, q)):
        u, v = b - a, c - a
        cosv = float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))
        best = min(best, math.acos(max(-1.0, min(1.0, cosv))))
    return best


def _ear_clip(pts: np.ndarray) -> list:
    """Triangulate a simple counterclockwise polygon by repeatedly clipping its best ear."""
    if _polyline_self_intersects(np.asarray(pts, dtype=float), closed=True):
        raise MeshError("ear clipping failed: boundary polyline is not simple")
    idx = list(range(len(pts)))
    tris = []
    scale = float(np.max(np.ptp(pts, axis=0))) ** 2
    while len(idx) > 3:
        best, best_q = None, -1.0
        n = len(idx)
        for k in range(n):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % n]
            a, b, c = pts[i0], pts[i1], pts[i2]
            if _cross(a, b, c) <= 1e-14 * scale:
                continue
            inside = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = pts[j]
                if _cross(a, b, p) >= 0 and _cross(b, c, p) >= 0 and _cross(c, a, p) >= 0:
                    inside = True
                    break
            if inside:
                continue
            q = _min_angle_tri(a, b, c)
            if q > best_q:
                best, best_q = k, q
        if best is None:
            raise MeshError("ear clipping failed: boundary polyline is not simple")
        n = len(idx)
        tris.append((idx[best - 1], idx[best], idx[(best + 1) % n]))
        del idx[best]
    tris.append(tuple(idx))
    return tris


def _incircle(a, b, c, d) -> float:
    m = np.array([
        [a[0] - d[0], a[1] - d[1], (a[0] - d[0]) ** 2 + (a[1] - d[1]) ** 2],
        [b[0] - d[0], b[1] - d[1], (b[0] - d[0]) ** 2 + (b[1] - d[1]) ** 2],
        [c[0] - d[0], c[1] - d[1], (c[0] - d[0]) ** 2 + (c[1] - d[1]) ** 2],
    ])
    return float(np.linalg.det(m))


def _circumcenter(a, b, c) -> np.ndarray:
    d = 2.0 * _cross(a, b, c)
    a2, b2, c2 = a @ a, b @ b, c @ c
    ux = (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d
    uy = (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d
    return np.array([ux, uy])


class _CoarseTriangulation:
    """Small mutable triangulation used to build a good-quality coarse mesh.

    Boundary edges are directed counterclockwise and carry their arc and
    parameter interval; they are never flipped.
    """

    def __init__(self, domain, pts, tris, bedges):
        self.domain = domain
        self.pts = [np.asarray(p, dtype=float) for p in pts]
        self.tris = {}
        self.owner = {}
        self.next_id = 0
        self.bedge = dict(bedges)
        scale = float(np.max(np.ptp(np.array(self.pts), axis=0)))
        self.eps_area = 1e-12 * scale * scale
        # boundary edges shorter than this are never split; this stops the
        # encroachment cascade that otherwise develops at sharp corners
        self.min_split = 0.5 * min(float(np.linalg.norm(self.pts[b] - self.pts[a])) for a, b in self.bedge)
        self.frozen = set()
        for t in tris:
            self.add(*t)

    def add(self, a, b, c):
        tid = self.next_id
        self.next_id += 1
        self.tris[tid] = (a, b, c)
        for e in ((a, b), (b, c), (c, a)):
            self.owner[e] = tid
        return tid

    def remove(self, tid):
        a, b, c = self.tris.pop(tid)
        for e in ((a, b), (b, c), (c, a)):
            del self.owner[e]

    def opposite(self, tid, a, b):
        return next(v for v in self.tris[tid] if v != a and v != b)

    def legalize(self, stack):
        P = self.pts
        while stack:
            a, b = stack.pop()
            if (a, b) in self.bedge or (b, a) in self.bedge:
                continue
            if (a, b) not in self.owner or (b, a) not in self.owner:
                continue
            t1, t2 = self.owner[(a, b)], self.owner[(b, a)]
            c, d = self.opposite(t1, a, b), self.opposite(t2, b, a)
            if _incircle(P[a], P[b], P[c], P[d]) <= 1e-12 * abs(_cross(P[a], P[b], P[c])) ** 2:
                continue
            if _cross(P[c], P[a], P[d]) <= self.eps_area or _cross(P[d], P[b], P[c]) <= self.eps_area:
                continue
            self.remove(t1)
            self.remove(t2)
            self.add(c, a, d)
            self.add(d, b, c)
            stack.extend([(a, d), (d, b), (b, c), (c, a)])

    def locate(self, p):
        P = self.pts
        for tid, (a, b, c) in self.tris.items():
            area = _cross(P[a], P[b], P[c])
            l0 = _cross(P[b], P[c], p) / area
            l1 = _cross(P[c], P[a], p) / area
            l2 = _cross(P[a], P[b], p) / area
            if min(l0, l1, l2) > 1e-9:
                return tid
        return None

    def insert(self, p) -> bool:
        tid = self.locate(p)
        if tid is None:
            return False
        a, b, c = self.tris[tid]
        k = len(self.pts)
        self.pts.append(np.asarray(p, dtype=float))
        self.remove(tid)
        self.add(a, b, k)
        self.add(b, c, k)
        self.add(c, a, k)
        self.legalize([(a, b), (b, c), (c, a)])
        return True

    def split_boundary(self, a, b) -> bool:
        arc_id, t0, t1 = self.bedge[(a, b)]
        tm = 0.5 * (t0 + t1)
        m_pt = self.domain.arcs[arc_id].point(tm)
        tid = self.owner[(a, b)]
        c = self.opposite(tid, a, b)
        P = self.pts
        if (np.linalg.norm(P[b] - P[a]) < self.min_split or _cross(P[a], m_pt, P[c]) <= self.eps_area
                or _cross(m_pt, P[b], P[c]) <= self.eps_area):
            self.frozen.add((a, b))
            return False
        k = len(self.pts)
        self.pts.append(m_pt)
        self.remove(tid)
        self.add(a, k, c)
        self.add(k, b, c)
        del self.bedge[(a, b)]
        self.bedge[(a, k)] = (arc_id, t0, tm)
        self.bedge[(k, b)] = (arc_id, tm, t1)
        self.legalize([(b, c), (c, a)])
        return True

    def encroached(self, p, skip=()):
        P = self.pts
        for (a, b) in sorted(self.bedge):
            if a in skip or b in skip or (a, b) in self.frozen:
                continue
            if np.dot(P[a] - p, P[b] - p) < 0:
                return (a, b)
        return None

    def refine_quality(self, min_deg: float, protected: set, max_steps: int = 2000):
        """Chew/Ruppert-style circumcenter insertion until every unprotected angle >= ``min_deg``."""
        skip = set()
        for _ in range(max_steps):
            # split boundary edges encroached by existing vertices
            e = None
            for v in range(len(self.pts)):
                e = self.encroached(self.pts[v], skip=(v,))
                if e is not None:
                    break
            if e is not None:
                self.split_boundary(*e)
                continue
            worst, worst_ang = None, min_deg
            P = self.pts
            for tid in sorted(self.tris):
                if tid in skip:
                    continue
                tri = self.tris[tid]
                angs = []
                for i in range(3):
                    u = P[tri[(i + 1) % 3]] - P[tri[i]]
                    w = P[tri[(i + 2) % 3]] - P[tri[i]]
                    cosv = float(u @ w / (np.linalg.norm(u) * np.linalg.norm(w)))
                    angs.append(math.degrees(math.acos(max(-1.0, min(1.0, cosv)))))
                i = int(np.argmin(angs))
                if angs[i] >= worst_ang or protected.intersection(tri):
                    continue
                worst, worst_ang = tid, angs[i]
            if worst is None:
                return
            a, b, c = self.tris[worst]
            cc = _circumcenter(P[a], P[b], P[c])
            e = self.encroached(cc)
            if e is not None:
                if not self.split_boundary(*e):
                    skip.add(worst)
                continue
            if not self.insert(cc):
                skip.add(worst)


def _coarse_mesh(domain: DomainSpec, min_deg: float = 25.0) -> Mesh:
    pts, earc, et = _coarse_boundary(domain)
    n = len(pts)
    if n < 3:
        raise MeshError("coarse boundary polygon has fewer than three vertices")
    tris = _ear_clip(pts)
    bedges = {(i, (i + 1) % n): (int(earc[i]), float(et[i][0]), float(et[i][1])) for i in range(n)}
    ct = _CoarseTriangulation(domain, pts, tris, bedges)
    ct.legalize([e for e in ct.owner])
    # corners too sharp to be improved by insertion are left alone
    protected = set()
    for i in range(n):
        if earc[i - 1] != earc[i] and et[i][0] == 0.0:
            u, v = pts[i - 1] - pts[i], pts[(i + 1) % n] - pts[i]
            if math.degrees(math.acos(float(np.clip(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)), -1, 1)))) < 2 * min_deg:
                protected.add(i)
    ct.refine_quality(min_deg, protected)
    nodes = np.array(ct.pts)
    tris = np.array([ct.tris[k] for k in sorted(ct.tris)], dtype=np.int64)
    # boundary loop in order, starting at node 0
    succ = {a: (b, info) for (a, b), info in ct.bedge.items()}
    edges, arcs, ts = [], [], []
    cur = 0
    for _ in range(len(succ)):
        nxt, (arc_id, t0, t1) = succ[cur]
        edges.append((cur, nxt))
        arcs.append(arc_id)
        ts.append((t0, t1))
        cur = nxt
        if cur == 0:
            break
    labels = np.array([domain.arcs[a].label.code for a in arcs])
    return Mesh(nodes, tris, np.array(edges), np.array(arcs), np.array(ts), labels, domain, 0)


def refine(mesh: Mesh) -> Mesh:
    """Split every triangle into four; boundary midpoints are placed on their arc."""
    t = mesh.triangles
    nn = mesh.n_nodes
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    es = np.sort(e, axis=1)
    uniq, inv = np.unique(es, axis=0, return_inverse=True)
    inv = inv.ravel()
    mids = 0.5 * (mesh.nodes[uniq[:, 0]] + mesh.nodes[uniq[:, 1]])
    new_id = nn + np.arange(len(uniq))
    key = uniq[:, 0] * nn + uniq[:, 1]

    bsorted = np.sort(mesh.edge_nodes, axis=1)
    bkey = bsorted[:, 0] * nn + bsorted[:, 1]
    pos = np.searchsorted(key, bkey)
    tmid = 0.5 * (mesh.edge_t[:, 0] + mesh.edge_t[:, 1])
    if mesh.domain is not None:
        for arc_id in np.unique(mesh.edge_arc):
            sel = mesh.edge_arc == arc_id
            mids[pos[sel]] = mesh.domain.arcs[arc_id].point(tmid[sel])
    nodes = np.concatenate([mesh.nodes, mids])

    T = len(t)
    m01 = new_id[inv[:T]]
    m12 = new_id[inv[T:2 * T]]
    m20 = new_id[inv[2 * T:]]
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    tris = np.concatenate([
        np.stack([a, m01, m20], axis=1),
        np.stack([m01, b, m12], axis=1),
        np.stack([m20, m12, c], axis=1),
        np.stack([m01, m12, m20], axis=1),
    ])
    # keep children of one parent together
    tris = tris.reshape(4, T, 3).transpose(1, 0, 2).reshape(-1, 3)

    mid = new_id[pos]
    en = mesh.edge_nodes
    edges = np.stack([np.stack([en[:, 0], mid], axis=1), np.stack([mid, en[:, 1]], axis=1)], axis=1)
    edges = edges.reshape(-1, 2)
    et = np.stack([
        np.stack([mesh.edge_t[:, 0], tmid], axis=1),
        np.stack([tmid, mesh.edge_t[:, 1]], axis=1),
    ], axis=1).reshape(-1, 2)
    earc = np.repeat(mesh.edge_arc, 2)
    elab = np.repeat(mesh.edge_label, 2)
    return Mesh(nodes, tris, edges, earc, et, elab, mesh.domain, mesh.level + 1)


def _tri_min_angles(p: np.ndarray) -> np.ndarray:
    """Smallest angle (degrees) of each triangle in the (T, 3, 2) vertex array ``p``."""
    out = np.full(len(p), 180.0)
    for i in range(3):
        a = p[:, (i + 1) % 3] - p[:, i]
        b = p[:, (i + 2) % 3] - p[:, i]
        c = np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        out = np.minimum(out, np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))
    return out


def _smooth(mesh: Mesh, target_h: float, rounds: int = SMOOTHING_ROUNDS) -> Mesh:
    """Area-weighted Laplacian smoothing of interior nodes with per-node rollback.

    A move is undone for every node of a triangle that would invert, exceed
    ``target_h`` in an edge, or drop below both its previous minimum angle and
    ``QUALITY_GUARD_DEG``.
    """
    nodes = mesh.nodes.copy()
    t = mesh.triangles
    nn = len(nodes)
    interior = np.ones(nn, dtype=bool)
    interior[mesh.boundary_nodes()] = False
    if not interior.any():
        return mesh
    scale = float(np.ptp(nodes, axis=0) @ np.ptp(nodes, axis=0))
    edges = mesh.all_edges()
    for _ in range(rounds):
        p = nodes[t]
        guard = np.minimum(_tri_min_angles(p), QUALITY_GUARD_DEG)
        area = 0.5 * np.abs((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                            - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
        cen = p.mean(axis=1)
        wsum = np.bincount(t.ravel(), weights=np.repeat(area, 3), minlength=nn)
        cx = np.bincount(t.ravel(), weights=np.repeat(area * cen[:, 0], 3), minlength=nn)
        cy = np.bincount(t.ravel(), weights=np.repeat(area * cen[:, 1], 3), minlength=nn)
        proposal = nodes.copy()
        proposal[interior, 0] = cx[interior] / wsum[interior]
        proposal[interior, 1] = cy[interior] / wsum[interior]
        moved = interior.copy()
        for _attempt in range(50):
            trial = np.where(moved[:, None], proposal, nodes)
            q = trial[t]
            sa = 0.5 * ((q[:, 1, 0] - q[:, 0, 0]) * (q[:, 2, 1] - q[:, 0, 1])
                        - (q[:, 1, 1] - q[:, 0, 1]) * (q[:, 2, 0] - q[:, 0, 0]))
            bad_tri = (sa <= 1e-14 * scale) | (_tri_min_angles(q) < guard)
            el = np.linalg.norm(trial[edges[:, 1]] - trial[edges[:, 0]], axis=1)
            bad_edge = el > target_h
            if not bad_tri.any() and not bad_edge.any():
                break
            revert = np.zeros(nn, dtype=bool)
            revert[t[bad_tri].ravel()] = True
            revert[edges[bad_edge].ravel()] = True
            revert &= moved
            if not revert.any():
                break
            moved &= ~revert
        nodes = np.where(moved[:, None], proposal, nodes)
    return Mesh(nodes, t, mesh.edge_nodes, mesh.edge_arc, mesh.edge_t, mesh.edge_label,
                mesh.domain, mesh.level)


def triangulate(domain: DomainSpec, target_h: float, smooth: bool = True) -> Mesh:
    """Mesh ``domain`` with every edge no longer than ``target_h``.

    A coarse polygon through all arc endpoints is clipped into triangles, made
    locally Delaunay and improved by circumcenter insertion.  It is then
    refined uniformly, with a guarded smoothing pass after every level so that
    midpoints pushed onto curved arcs do not flatten boundary triangles.
    """
    if not (target_h > 0 and math.isfinite(target_h)):
        raise MeshError("target_h must be a positive finite length")
    mesh = _coarse_mesh(domain)
    if smooth:
        mesh = _smooth(mesh, math.inf, COARSE_SMOOTHING_ROUNDS)
    mesh.validate()
    max_levels = 14
    while mesh.h > target_h * (1 + 1e-9):
        if mesh.level >= max_levels:
            raise MeshError(f"target_h={target_h} needs more than {max_levels} refinement levels")
        mesh = refine(mesh)
        if smooth:
            mesh = _smooth(mesh, max(target_h, mesh.h), LEVEL_SMOOTHING_ROUNDS)
    mesh.validate(min_angle_deg=MIN_ANGLE_DEG)
    log.debug("mesh: %d nodes, %d triangles, level %d, h=%.4g", mesh.n_nodes, mesh.n_triangles,
              mesh.level, mesh.h)
    return mesh


# -- Triangle-format import/export ---------------------------------------------


def _read_table(path: Path):
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise MeshError(f"cannot read {path}: {exc}") from exc
    rows = []
    for ln in lines:
        ln = ln.split("#", 1)[0].strip()
        if ln:
            rows.append(ln.split())
    if not rows:
        raise MeshError(f"{path} is empty")
    return rows


def _ints(row, path, what):
    try:
        return [int(v) for v in row]
    except ValueError as exc:
        raise MeshError(f"{path}: malformed {what} line {' '.join(row)!r}") from exc


def export_triangle(mesh: Mesh, stem) -> dict:
    """Write ``stem.node`` / ``stem.ele``; returns the marker -> arc mapping used.

    Boundary nodes carry marker ``arc + 1`` of the edge leaving them.
    """
    stem = Path(stem)
    marker = np.zeros(mesh.n_nodes, dtype=np.int64)
    marker[mesh.edge_nodes[:, 0]] = mesh.edge_arc + 1
    with open(stem.with_suffix(".node"), "w", encoding="utf-8") as fh:
        fh.write(f"{mesh.n_nodes} 2 0 1\n")
        for i, (x, y) in enumerate(mesh.nodes):
            fh.write(f"{i} {float(x)!r} {float(y)!r} {int(marker[i])}\n")
    with open(stem.with_suffix(".ele"), "w", encoding="utf-8") as fh:
        fh.write(f"{mesh.n_triangles} 3 0\n")
        for i, (a, b, c) in enumerate(mesh.triangles):
            fh.write(f"{i} {int(a)} {int(b)} {int(c)}\n")
    return {int(a) + 1: int(a) for a in np.unique(mesh.edge_arc)}


def import_mesh(path, domain: DomainSpec, markers: dict) -> Mesh:
    """Read a Triangle ``.node``/``.ele`` pair and attach boundary provenance.

    ``path`` may name either file or their common stem.  ``markers`` maps
    nonzero node boundary markers to arc indices of ``domain``.
    """
    path = Path(path)
    stem = path.with_suffix("") if path.suffix in (".node", ".ele") else path
    node_rows = _read_table(stem.with_suffix(".node"))
    ele_rows = _read_table(stem.with_suffix(".ele"))

    head = _ints(node_rows[0], stem.with_suffix(".node"), "header")
    if len(head) != 4 or head[1] != 2:
        raise MeshError("node header must be '<count> 2 <attributes> <markers>'")
    n, _, nattr, nmark = head
    if nmark != 1:
        raise MeshError("node file must carry boundary markers")
    body = node_rows[1:]
    if len(body) != n:
        raise MeshError(f"node file declares {n} nodes but lists {len(body)}")
    ids, xy, mk = [], [], []
    for row in body:
        if len(row) != 3 + nattr + 1:
            raise MeshError(f"malformed node line {' '.join(row)!r}")
        try:
            ids.append(int(row[0]))
            xy.append((float(row[1]), float(row[2])))
            mk.append(int(row[-1]))
        except ValueError as exc:
            raise MeshError(f"malformed node line {' '.join(row)!r}") from exc
    base = min(ids)
    if sorted(ids) != list(range(base, base + n)) or base not in (0, 1):
        raise MeshError("node ids must be consecutive starting at 0 or 1")
    order = np.argsort(ids)
    nodes = np.array(xy)[order]
    mk = np.array(mk)[order]

    ehead = _ints(ele_rows[0], stem.with_suffix(".ele"), "header")
    if len(ehead) < 2 or ehead[1] != 3:
        raise MeshError("element header must be '<count> 3 <attributes>'")
    if len(ele_rows) - 1 != ehead[0]:
        raise MeshError(f"element file declares {ehead[0]} triangles but lists {len(ele_rows) - 1}")
    tris = []
    for row in ele_rows[1:]:
        vals = _ints(row, stem.with_suffix(".ele"), "element")
        if len(vals) < 4:
            raise MeshError(f"malformed element line {' '.join(row)!r}")
        tris.append(vals[1:4])
    tris = np.array(tris, dtype=np.int64) - base
    if tris.min() < 0 or tris.max() >= n:
        raise MeshError("element references an unknown node")
    p = nodes[tris]
    sa = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    flip = sa < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]

    for m in np.unique(mk[mk != 0]):
        if int(m) not in markers:
            raise MeshError(f"boundary marker {int(m)} has no arc mapping")

    # boundary edges from topology, oriented with the interior on the left
    e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    key, counts = np.unique(np.sort(e, axis=1), axis=0, return_counts=True)
    single = {tuple(r) for r in key[counts == 1].tolist()}
    directed = [tuple(r) for r in e.tolist() if tuple(sorted(r)) in single]

    diam = domain.diameter
    corners = [np.array(c.point) for c in domain.corners]

    def corner_of(i):
        for k, c in enumerate(corners):
            if np.linalg.norm(nodes[i] - c) <= 1e-9 * diam:
                return k
        return None

    edge_nodes, edge_arc, edge_t = [], [], []
    for a, b in directed:
        ca, cb = corner_of(a), corner_of(b)
        cand = set()
        if ca is None and mk[a] != 0:
            cand.add(markers[int(mk[a])])
        if cb is None and mk[b] != 0:
            cand.add(markers[int(mk[b])])
        if not cand and ca is not None and cb is not None:
            # edge joins two corners: it is a whole arc
            if domain.corners[ca].outgoing_arc == domain.corners[cb].incoming_arc:
                cand.add(domain.corners[ca].outgoing_arc)
        if len(cand) != 1:
            ab = nodes[b] - nodes[a]
            rel = nodes - nodes[a]
            along = rel @ ab / (ab @ ab)
            off = np.abs(rel[:, 0] * ab[1] - rel[:, 1] * ab[0]) / np.linalg.norm(ab)
            on_edge = np.nonzero((along > 1e-9) & (along < 1 - 1e-9) & (off <= 1e-9 * diam))[0]
            if on_edge.size:
                raise MeshError(f"hanging node {int(on_edge[0])} on edge {a}-{b} (non-conforming mesh)")
            if mk[a] == 0 and ca is None or mk[b] == 0 and cb is None:
                raise MeshError(
                    f"edge {a}-{b} belongs to one triangle but has an unmarked interior node "
                    "(hanging node or hole)")
            raise MeshError(f"cannot assign boundary edge {a}-{b} to a single arc")
        arc_id = cand.pop()
        arc = domain.arcs[arc_id]
        ts = []
        for v, cv in ((a, ca), (b, cb)):
            if cv is not None and domain.corners[cv].outgoing_arc == arc_id:
                ts.append(0.0)
            elif cv is not None and domain.corners[cv].incoming_arc == arc_id:
                ts.append(1.0)
            else:
                tv = arc.closest_parameter(nodes[v])
                if np.linalg.norm(arc.point(tv) - nodes[v]) > 1e-8 * diam:
                    raise MeshError(f"boundary node {v} does not lie on arc {arc_id}")
                ts.append(tv)
        edge_nodes.append((a, b))
        edge_arc.append(arc_id)
        edge_t.append(ts)
    edge_nodes = np.array(edge_nodes, dtype=np.int64).reshape(-1, 2)
    # order edges along the loop starting from arc 0, t = 0
    succ = {int(a): k for k, (a, b) in enumerate(edge_nodes)}
    start = None
    for k in range(len(edge_nodes)):
        if edge_arc[k] == 0 and edge_t[k][0] == 0.0:
            start = k
    if start is None:
        start = 0
    order = []
    k = start
    for _ in range(len(edge_nodes)):
        order.append(k)
        nxt = int(edge_nodes[k, 1])
        if nxt not in succ:
            break
        k = succ[nxt]
        if k == start:
            break
    if len(order) != len(edge_nodes):
        raise MeshError("boundary edges do not form a single closed loop (non-conforming mesh?)")
    order = np.array(order)
    labels = np.array([domain.arcs[a].label.code for a in edge_arc])
    mesh = Mesh(nodes, tris, edge_nodes[order], np.array(edge_arc)[order], np.array(edge_t)[order],
                labels[order], domain, 0)
    mesh.validate()
    return mesh


# -- VTK export ----------------------------------------------------------------


def _check_name(name: str) -> str:
    if not name or any(ch.isspace() for ch in name):
        raise MeshError(f"field name {name!r} must be non-empty without whitespace")
    return name


def export_vtk(mesh: Mesh, path, point_fields: Optional[dict] = None, cell_fields: Optional[dict] = None,
               title: str = "mixedlap") -> None:
    """Write a legacy ASCII VTK unstructured grid.

    ``point_fields`` maps names to per-node scalars; ``cell_fields`` maps names
    to per-triangle 2-vectors.  Floats use the shortest round-trip repr so
    identical inputs give identical bytes.
    """
    point_fields = point_fields or {}
    cell_fields = cell_fields or {}
    out = ["# vtk DataFile Version 3.0", title.splitlines()[0][:255] if title else "mixedlap", "ASCII",
           "DATASET UNSTRUCTURED_GRID", f"POINTS {mesh.n_nodes} double"]
    out.extend(f"{float(x)!r} {float(y)!r} 0.0" for x, y in mesh.nodes)
    out.append(f"CELLS {mesh.n_triangles} {4 * mesh.n_triangles}")
    out.extend(f"3 {int(a)} {int(b)} {int(c)}" for a, b, c in mesh.triangles)
    out.append(f"CELL_TYPES {mesh.n_triangles}")
    out.extend(["5"] * mesh.n_triangles)
    if point_fields:
        out.append(f"POINT_DATA {mesh.n_nodes}")
        for name in sorted(point_fields):
            vals = np.asarray(point_fields[name], dtype=float).ravel()
            if vals.shape != (mesh.n_nodes,):
                raise MeshError(f"point field {name!r} needs {mesh.n_nodes} values")
            out.append(f"SCALARS {_check_name(name)} double 1")
            out.append("LOOKUP_TABLE default")
            out.extend(repr(float(v)) for v in vals)
    if cell_fields:
        out.append(f"CELL_DATA {mesh.n_triangles}")
        for name in sorted(cell_fields):
            vals = np.asarray(cell_fields[name], dtype=float)
            if vals.shape != (mesh.n_triangles, 2):
                raise MeshError(f"cell field {name!r} needs shape ({mesh.n_triangles}, 2)")
            out.append(f"VECTORS {_check_name(name)} double")
            out.extend(f"{float(u)!r} {float(v)!r} 0.0" for u, v in vals)
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def read_vtk(path):
    """Read a legacy ASCII unstructured grid of triangles as written by ``export_vtk``.

    Returns ``(nodes, triangles, point_fields, cell_fields)``; scalar fields
    are 1-D arrays, vector fields keep their first two components.
    """
    try:
        tokens = Path(path).read_text(encoding="utf-8").split("\n")
    except (OSError, UnicodeDecodeError) as exc:
        raise MeshError(f"cannot read {path}: {exc}") from exc
    if len(tokens) < 4 or not tokens[0].startswith("# vtk DataFile") or tokens[2].strip() != "ASCII":
        raise MeshError(f"{path} is not a legacy ASCII VTK file")
    words = " ".join(tokens[3:]).split()
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(words):
            raise MeshError(f"{path}: unexpected end of file")
        out = words[pos:pos + n]
        pos += n
        return out

    nodes = tris = None
    point_fields, cell_fields = {}, {}
    section = None
    try:
        while pos < len(words):
            key = take(1)[0].upper()
            if key == "DATASET":
                if take(1)[0].upper() != "UNSTRUCTURED_GRID":
                    raise MeshError(f"{path}: only UNSTRUCTURED_GRID is supported")
            elif key == "POINTS":
                n = int(take(2)[0])
                nodes = np.array(take(3 * n), dtype=float).reshape(n, 3)[:, :2]
            elif key == "CELLS":
                m, size = (int(v) for v in take(2))
                raw = np.array(take(size), dtype=np.int64)
                if size != 4 * m or np.any(raw[::4] != 3):
                    raise MeshError(f"{path}: only triangle cells are supported")
                tris = raw.reshape(m, 4)[:, 1:]
            elif key == "CELL_TYPES":
                take(int(take(1)[0]))
            elif key in ("POINT_DATA", "CELL_DATA"):
                section = key
                take(1)
            elif key in ("SCALARS", "VECTORS"):
                if section is None or nodes is None or tris is None:
                    raise MeshError(f"{path}: field data before the grid")
                name = take(2)[0]
                count = nodes.shape[0] if section == "POINT_DATA" else tris.shape[0]
                if key == "SCALARS":
                    ncomp = 1
                    if pos < len(words) and words[pos].isdigit():
                        ncomp = int(take(1)[0])
                    if take(2)[0].upper() != "LOOKUP_TABLE":
                        raise MeshError(f"{path}: SCALARS {name} lacks LOOKUP_TABLE")
                    vals = np.array(take(ncomp * count), dtype=float)
                    vals = vals if ncomp == 1 else vals.reshape(count, ncomp)
                else:
                    vals = np.array(take(3 * count), dtype=float).reshape(count, 3)[:, :2]
                (point_fields if section == "POINT_DATA" else cell_fields)[name] = vals
            else:
                raise MeshError(f"{path}: unsupported VTK keyword {key}")
    except ValueError as exc:
        raise MeshError(f"{path}: malformed number ({exc})") from exc
    if nodes is None or tris is None:
        raise MeshError(f"{path}: missing POINTS or CELLS")
    return nodes, tris, point_fields, cell_fields
