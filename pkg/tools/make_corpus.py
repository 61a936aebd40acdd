"""Regenerate the bundled domain files in src/mixedlap/corpus.

Run from the repository root: ``python3 tools/make_corpus.py``.
"""
import json, math
from pathlib import Path

import numpy as np

from mixedlap.geometry import parse_domain, check_hypotheses, find_rotation, hotspot_corner
OUT = Path(__file__).resolve().parent.parent / "src" / "mixedlap" / "corpus"

def seg(a, b, lab):
    return {"kind": "segment", "data": {"start": list(a), "end": list(b)}, "label": lab}

def bend_arc(a, b, bend_deg, lab):
    """Circular arc from a to b leaving the chord at bend_deg to the left (positive) or right."""
    a, b = np.array(a, float), np.array(b, float)
    beta = math.radians(abs(bend_deg))
    L = np.linalg.norm(b - a)
    R = L / (2 * math.sin(beta))
    mid = 0.5 * (a + b)
    t = (b - a) / L
    left = np.array([-t[1], t[0]])
    # bulging left: center lies to the right of the chord
    side = -1.0 if bend_deg > 0 else 1.0
    c = mid + side * R * math.cos(beta) * left
    th0 = math.atan2(a[1] - c[1], a[0] - c[0])
    th1 = math.atan2(b[1] - c[1], b[0] - c[0])
    if bend_deg > 0:  # clockwise about c
        while th1 > th0: th1 -= 2 * math.pi
    else:
        while th1 < th0: th1 += 2 * math.pi
    return {"kind": "circular-arc", "data": {"center": c.tolist(), "radius": R, "theta0": th0, "theta1": th1}, "label": lab}

def endp(arc, end):
    d = arc["data"]
    if arc["kind"] == "segment":
        return d["end"] if end else d["start"]
    if arc["kind"] == "circular-arc":
        th = d["theta1"] if end else d["theta0"]
        return [d["center"][0] + d["radius"] * math.cos(th), d["center"][1] + d["radius"] * math.sin(th)]

def glue(arcs):
    # make straight segments share the exact computed endpoints of curved neighbours
    n = len(arcs)
    for i, a in enumerate(arcs):
        if a["kind"] == "segment":
            p = arcs[i - 1]; q = arcs[(i + 1) % n]
            if p["kind"] == "circular-arc": a["data"]["start"] = endp(p, 1)
            if q["kind"] == "circular-arc": a["data"]["end"] = endp(q, 0)
    return arcs

def quad_bezier(p0, q, p2, lab):
    p0, q, p2 = map(lambda v: np.array(v, float), (p0, q, p2))
    c0, c1, c2 = p0, 2 * (q - p0), p0 - 2 * q + p2
    return {"kind": "polynomial-parametric", "data": {"x": [c0[0], c1[0], c2[0]], "y": [c0[1], c1[1], c2[1]]}, "label": lab}

def polygon(pts, labels):
    n = len(pts)
    return [seg(pts[i], pts[(i + 1) % n], labels[i]) for i in range(n)]

corpus = {}
corpus["fig4_triangle"] = dict(
    description="Acute triangle; GAMMA_C is the side AB, GAMMA the sides BC and CA; hot spot at C",
    arcs=polygon([(1, 3), (2.41, 1.05), (2.69, 3.14)], ["gammac", "gamma", "gamma"]))
pi = math.pi
corpus["square_pi"] = dict(
    description="Square (0,pi)^2 with GAMMA = {x=pi} u {y=pi}; both first eigenvalues equal 1/2",
    arcs=polygon([(0, 0), (pi, 0), (pi, pi), (0, pi)], ["gammac", "gamma", "gamma", "gammac"]))
corpus["square_vertical_gamma"] = dict(
    description="Unit square with GAMMA = the two vertical sides; the constant field (0,1) is harmonic",
    arcs=polygon([(0, 0), (1, 0), (1, 1), (0, 1)], ["gammac", "gamma", "gammac", "gamma"]))
# 50-60-70 triangle, GAMMA_C = AB opposite the 70 degree angle at C
A = (0.0, 0.0); B = (1.0, 0.0)
a50, a60 = math.radians(50), math.radians(60)
# C from the angles at A (50) and B (60): |AC| = sin(60)/sin(70)
ac = math.sin(a60) / math.sin(math.radians(70))
C = (ac * math.cos(a50), ac * math.sin(a50))
corpus["triangle_506070"] = dict(
    description="Acute 50-60-70 triangle; GAMMA_C is the side opposite the 70 degree angle; needs a rotation",
    arcs=polygon([A, B, C], ["gammac", "gamma", "gamma"]))
corpus["fig1_left"] = dict(
    description="Curvilinear triangle A(0,0), C(2,-2), B(3,0.5) with concave circular sides; GAMMA_C is AC; hot spot at B",
    # GAMMA_C bends 10 degrees off its chord; see the notes on discrete monotonicity
    arcs=[bend_arc((0, 0), (2, -2), 10, "gammac"), bend_arc((2, -2), (3, 0.5), 15, "gamma"),
          bend_arc((3, 0.5), (0, 0), 12, "gamma")])
corpus["fig1_right"] = dict(
    description="Curved GAMMA_C and GAMMA pieces plus a horizontal GAMMA segment; the hot spot corner is not unique",
    arcs=[quad_bezier((2, 4), (4.547, 3.074), (6, 2), "gammac"),
          quad_bezier((6, 2), (7.192, 5.210), (9.84, 9), "gamma"),
          seg((9.84, 9), (7.15202, 9), "gamma"), seg((7.15202, 9), (2, 4), "gamma")])
# pentagon: A(0,1), B(1,0), then edge directions 75, 85, 195, 222 degrees
Ap, Bp = np.array([0.0, 1.0]), np.array([1.0, 0.0])
u = lambda d: np.array([math.cos(math.radians(d)), math.sin(math.radians(d))])
Cp = Bp + 1.5 * u(75); Dp = Cp + 0.6 * u(85)
M = np.stack([u(195), u(222)], axis=1)
c, d = np.linalg.solve(M, Ap - Dp)
assert c > 0 and d > 0
Ep = Dp + c * u(195)
corpus["fig2_pentagon"] = dict(
    description="Convex pentagon with GAMMA_C = AB and four GAMMA sides; the normal jumps from Q4 to Q2 at D",
    arcs=polygon([tuple(Ap), tuple(Bp), tuple(Cp), tuple(Dp), tuple(Ep)], ["gammac", "gamma", "gamma", "gamma", "gamma"]))
V = [(math.cos(k * pi / 3), math.sin(k * pi / 3)) for k in range(6)]
labs = ["gamma", "gamma", "gammac", "gamma", "gamma", "gammac"]
corpus["hexagon_two_gamma"] = dict(
    description="Curvilinear hexagon with concave sides; GAMMA has two components and all four transition angles are acute",
    arcs=[bend_arc(V[k], V[(k + 1) % 6], 20, labs[k]) for k in range(6)])

for name, obj in corpus.items():
    obj["arcs"] = glue(obj["arcs"])
    doc = {"name": name, "description": obj["description"], "arcs": obj["arcs"]}
    df = parse_domain(doc)
    rep = check_hypotheses(df.domain)
    rot = 0.0 if rep.all_pass else find_rotation(df.domain, "center")
    if rot:
        rot = round(rot, 6)
        doc["rotation"] = rot
    rep2 = check_hypotheses(df.domain, rot) if rot is not None else rep
    P = hotspot_corner(df.domain.rotated(rot or 0.0))
    print(f"{name:20s} pass0={rep.all_pass} rot={rot} pass={rep2.all_pass} angles={[round(math.degrees(a),2) for a in rep2.transition_angles]} P={P} corners={[round(math.degrees(c.angle),1) for c in df.domain.corners]}")
    with open(OUT / (name + ".json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False)
        fh.write("\n")
