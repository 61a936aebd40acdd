"""Domains shared by the test modules."""
import math
from importlib import resources
from pathlib import Path

import numpy as np

from mixedlap.geometry import Arc, DomainSpec, disk, parse_domain, polygon, read_domain_file

PI = math.pi
CORPUS = Path(str(resources.files("mixedlap").joinpath("corpus")))
CORPUS_NAMES = sorted(p.stem for p in CORPUS.glob("*.json"))


def corpus_domain(name):
    """Domain file and the domain rotated by the file's rotation."""
    df = read_domain_file(CORPUS / f"{name}.json")
    return df, (df.domain.rotated(df.rotation) if df.rotation else df.domain)


def square_pi():
    """(0, pi)^2 with GAMMA = {x = pi} u {y = pi}; both mixed problems have lambda_1 = 1/2."""
    return polygon([(0, 0), (PI, 0), (PI, PI), (0, PI)], ["gammac", "gamma", "gamma", "gammac"])


def square_pi_left_dirichlet():
    """(0, pi)^2, Dirichlet only on {x = 0} when solved with part GAMMA_C."""
    return polygon([(0, 0), (PI, 0), (PI, PI), (0, PI)], ["gamma", "gamma", "gamma", "gammac"])


def vertical_gamma_square(side=1.0):
    """Square whose two vertical sides form GAMMA; the constant field (0, 1) is a kernel field."""
    s = side
    return polygon([(0, 0), (s, 0), (s, s), (0, s)], ["gammac", "gamma", "gammac", "gamma"])


ALL_DIRICHLET = ("gamma", "gammac")


def unit_square():
    """Unit square; solve with ``ALL_DIRICHLET`` for the pure Dirichlet problem."""
    return polygon([(0, 0), (1, 0), (1, 1), (0, 1)], ["gammac", "gamma", "gamma", "gammac"])


def l_shape():
    return polygon([(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)], ["gammac"] * 3 + ["gamma"] * 3)


def equilateral():
    return polygon([(0, 0), (1, 0), (0.5, math.sqrt(3) / 2)], ["gammac", "gamma", "gamma"])


def upper_half_gamma_disk(radius=1.0):
    return disk(radius, ("gamma", "gamma", "gammac", "gammac"))


def bent_triangle(a, b, c, bend_deg, labels=("gammac", "gamma", "gamma")):
    """Triangle ``abc`` whose first side is a circular arc bulging outward by ``bend_deg``."""
    ang = math.radians(bend_deg)
    ax, ay = a
    bx, by = b
    chord = math.hypot(bx - ax, by - ay)
    R = chord / (2 * math.sin(ang))
    mx, my = (ax + bx) / 2, (ay + by) / 2
    # unit normal of the chord pointing into the triangle (left of a->b)
    nx, ny = -(by - ay) / chord, (bx - ax) / chord
    d = R * math.cos(ang)
    cx, cy = mx + d * nx, my + d * ny
    t0 = math.atan2(ay - cy, ax - cx)
    t1 = math.atan2(by - cy, bx - cx)
    # short way round the centre, which lies inside the triangle
    while t1 < t0:
        t1 += 2 * math.pi
    arcs = (
        Arc("circular-arc", {"center": (cx, cy), "radius": R, "theta0": t0, "theta1": t1}, labels[0]),
        Arc("segment", {"start": b, "end": c}, labels[1]),
        Arc("segment", {"start": c, "end": a}, labels[2]),
    )
    return DomainSpec(arcs)


def bend_arc(a, b, bend_deg, label):
    """Circular arc from a to b leaving the chord at ``bend_deg`` to the left (positive) or right."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    beta = math.radians(abs(bend_deg))
    L = float(np.linalg.norm(b - a))
    R = L / (2 * math.sin(beta))
    t = (b - a) / L
    left = np.array([-t[1], t[0]])
    side = -1.0 if bend_deg > 0 else 1.0
    c = 0.5 * (a + b) + side * R * math.cos(beta) * left
    th0 = math.atan2(a[1] - c[1], a[0] - c[0])
    th1 = math.atan2(b[1] - c[1], b[0] - c[0])
    if bend_deg > 0:
        while th1 > th0:
            th1 -= 2 * math.pi
    else:
        while th1 < th0:
            th1 += 2 * math.pi
    return {"kind": "circular-arc", "label": label,
            "data": {"center": c.tolist(), "radius": R, "theta0": th0, "theta1": th1}}


def fig1_left_with_bend(gammac_bend_deg):
    """The curvilinear fig1_left triangle with a chosen bend of its GAMMA_C side."""
    return parse_domain({"arcs": [bend_arc((0, 0), (2, -2), gammac_bend_deg, "gammac"),
                                  bend_arc((2, -2), (3, 0.5), 15, "gamma"),
                                  bend_arc((3, 0.5), (0, 0), 12, "gamma")]}).domain
