import math

import numpy as np
import pytest

from mixedlap.analysis import (
    CONFIRMED,
    INCONCLUSIVE,
    NOT_MET,
    THEOREMS,
    choose_rotation,
    convergence_study,
    default_levels,
    richardson,
    run_level,
    run_theorem_suite,
)
from mixedlap.geometry import Label, check_hypotheses, find_rotation
from mixedlap.helmholtz import gradient_operators
from mixedlap.mesh import triangulate
from mixedlap.scalar_fem import solve_mixed

from domains import ALL_DIRICHLET, corpus_domain, fig1_left_with_bend, l_shape, square_pi, unit_square

_SUITES = {}


def _suite(name, divisions=(16, 32, 64), **kw):
    key = (name, divisions, tuple(sorted(kw.items())))
    if key not in _SUITES:
        df, _ = corpus_domain(name)
        _SUITES[key] = run_theorem_suite(df, default_levels(df.domain, divisions), **kw)
    return _SUITES[key]


def test_richardson():
    # exact for an error of the form c h^2
    assert richardson(1.0 + 4.0, 1.0 + 1.0) == pytest.approx(1.0)
    assert richardson(1.0 + 8.0, 1.0 + 1.0, ratio=2.0, order=3.0) == pytest.approx(1.0)
    assert richardson(3.0, 2.0, ratio=4.0) == pytest.approx(2.0 - 1.0 / 15.0)
    with pytest.raises(ValueError):
        richardson(1.0, 1.0, ratio=1.0)


def test_default_levels():
    _, d = corpus_domain("fig4_triangle")
    assert default_levels(d) == [d.diameter / 16, d.diameter / 32, d.diameter / 64]


def test_choose_rotation_keeps_a_passing_preference():
    df, _ = corpus_domain("fig4_triangle")
    assert choose_rotation(df.domain, df.rotation)[0] == df.rotation
    df, _ = corpus_domain("triangle_506070")
    theta, rep = choose_rotation(df.domain, 0.0)
    assert rep.all_pass and theta == pytest.approx(find_rotation(df.domain, "center"))


@pytest.mark.parametrize("name", ["triangle_506070", "fig1_left"])
def test_hypothesis_passing_domains_confirm_everything(name):
    rep = _suite(name)
    assert rep.hypotheses["all_pass"]
    assert rep.verdicts == {t: CONFIRMED for t in THEOREMS}
    assert rep.failures == []
    assert rep.inequality_margin > 3 * rep.inequality_drift


def test_square_pi():
    rep = _suite("square_pi")
    assert not rep.hypotheses["all_pass"]
    for t in ("inequality", "monotonicity", "hotspot", "form_equality"):
        assert rep.verdicts[t] == NOT_MET
    # both first eigenvalues are 1/2, so the strict inequality is undecidable
    assert rep.measured["inequality"] == INCONCLUSIVE
    assert rep.extrapolated["lambda_gamma"] == pytest.approx(0.5, rel=1e-3)
    assert rep.extrapolated["lambda_gammac"] == pytest.approx(0.5, rel=1e-3)
    assert abs(rep.inequality_margin) < rep.inequality_drift


def test_report_serializes_every_level():
    d = _suite("triangle_506070").to_dict()
    assert len(d["levels"]) == 3
    assert set(d["verdicts"]) == set(THEOREMS)
    assert all(lv["error"] is None for lv in d["levels"])


def test_suite_is_stable_under_seed_and_node_order():
    df, _ = corpus_domain("fig4_triangle")
    levels = default_levels(df.domain, (8, 16))
    a = run_theorem_suite(df, levels, seed=0)
    b = run_theorem_suite(df, levels, seed=7, permute_seed=3)
    assert a.verdicts == b.verdicts
    for key in ("lambda_gamma", "lambda_gammac", "eta1"):
        assert b.extrapolated[key] == pytest.approx(a.extrapolated[key], rel=1e-9)


def test_suite_needs_two_levels():
    df, _ = corpus_domain("fig4_triangle")
    with pytest.raises(ValueError):
        run_theorem_suite(df, [0.5])


def test_failed_level_is_recorded_not_raised():
    _, d = corpus_domain("fig4_triangle")
    lv = run_level(d, -1.0)
    assert not lv.ok and lv.error
    assert math.isnan(lv.eta1)


def test_convergence_order_on_smooth_problems():
    for d, part, exact in ((square_pi(), Label.GAMMA_C, 0.5), (unit_square(), ALL_DIRICHLET, 2 * math.pi ** 2)):
        rows = convergence_study(d, part, [d.diameter / n for n in (8, 16, 32)], exact=exact)
        assert rows[0].rate is None
        for r in rows[1:]:
            assert r.rate == pytest.approx(2.0, abs=0.1)
            assert r.flag == "ok"


def test_reentrant_corner_flags():
    d = l_shape()
    hs = [d.diameter / n for n in (8, 16, 32, 64)]
    # all-Dirichlet: eigenvalue error ~ h^(4/3)
    assert convergence_study(d, ALL_DIRICHLET, hs)[-1].flag == "reduced"
    # Dirichlet-Neumann transition at the reentrant corner: h^(2/3)
    assert convergence_study(d, Label.GAMMA_C, hs)[-1].flag == "singular"


def test_convergence_needs_three_levels():
    with pytest.raises(ValueError):
        convergence_study(square_pi(), Label.GAMMA_C, [1.0, 0.5])


def test_strongly_bent_dirichlet_side_violation_decays():
    # With a 20 degree bend of GAMMA_C the hypotheses still hold, but the P1 gradient
    # dips slightly negative next to the curved transition corners.  The dip is a
    # discretization effect: it shrinks steadily under refinement.
    d = fig1_left_with_bend(20)
    theta = find_rotation(d, "center")
    assert check_hypotheses(d, theta).all_pass
    w = d.rotated(theta)
    rel = []
    for div in (16, 32, 64):
        m = triangulate(w, w.diameter / div)
        v = solve_mixed(m, Label.GAMMA_C, 1).positive_first
        Gx, Gy, _ = gradient_operators(m)
        g = np.stack([Gx @ v, Gy @ v], axis=1)
        rel.append(g.min() / np.linalg.norm(g, axis=1).max())
    assert rel[0] < 0
    for a, b in zip(rel, rel[1:]):
        assert b < 0 and abs(a) / abs(b) >= 2.0
