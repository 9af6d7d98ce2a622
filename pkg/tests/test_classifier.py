import json
import math

import pytest

from warpiso.classifier import (CERTIFIED, NOT_CERTIFIED, NOT_CERTIFIED_INCONCLUSIVE, Hypothesis,
                                TheoremResult, classify, classify_conformal_plane)
from warpiso.geometry import SpaceSpec, euclidean_punctured, reflect

_REPORTS = {}


def report(density, volume=None, n=3, **grid):
    key = (density, volume, n, tuple(sorted(grid.items())))
    if key not in _REPORTS:
        _REPORTS[key] = classify(euclidean_punctured(n, density, volume), **grid)
    return _REPORTS[key]


def certified_ids(rep):
    return {t.theorem for t in rep.certified}


def test_headline_examples():
    assert report("r^-4").headline == "Thm 3.2(1): certified, all volumes"
    assert report("r^-3").headline.startswith("Thm 3.2(3): certified")
    rep = report("r^-2")
    assert rep.headline == "not certified"
    assert any("nonexistence regime" in w for w in rep.warnings)
    head = report("exp(r^2-2*r+2)").headline
    assert head.startswith("Cor 3.5: certified above V*") and head.endswith("below V*: not certified")


def test_every_conclusion_has_all_hypotheses_holding():
    for d in ["r^-4", "exp(r^2)", "exp(1/r)", "1"]:
        for t in report(d).theorems:
            if t.certified:
                assert all(h.status == "holds" for h in t.hypotheses)
            else:
                assert any(h.status != "holds" for h in t.hypotheses)


def test_inconclusive_downgrades_to_not_certified():
    holds = Hypothesis("a", "holds")
    maybe = Hypothesis("b", "inconclusive")
    fails = Hypothesis("c", "fails")
    assert TheoremResult("Thm 2.6(1)", "all volumes", "x", (holds,)).status == CERTIFIED
    assert TheoremResult("Thm 2.6(1)", "all volumes", "x", (holds, maybe)).status == NOT_CERTIFIED_INCONCLUSIVE
    assert TheoremResult("Thm 2.6(1)", "all volumes", "x", (maybe, fails)).status == NOT_CERTIFIED


def test_inconclusive_space_reports_inconclusive():
    rep = classify(euclidean_punctured(2, "1/(r^2*log(r+1)^2)"))
    assert rep.finiteness.volume_at_B.kind == "inconclusive"
    assert rep.headline == "not certified (inconclusive)"
    assert rep.inconclusive
    assert any("inconclusive" in w for w in rep.warnings)


def test_surface_density_theorem():
    rep = report("r^2", "1")
    assert "Thm 3.4" in certified_ids(rep)
    assert "Thm 3.4" in certified_ids(report("1"))
    assert "Thm 3.4" not in certified_ids(report("exp(r^2)"))


def test_volume_density_criterion():
    rep = report("1", "r^-4")
    crit = [c for c in rep.criteria if c["criterion"].startswith("phi' <= -1/r")]
    assert crit and crit[0]["status"] == "holds"
    rep = report("1", "r^-0.5")
    crit = [c for c in rep.criteria if c["criterion"].startswith("phi' <= -1/r")]
    assert crit and crit[0]["status"] == "fails"


def test_log_convexity_criterion_reported_for_simple_densities():
    crit = report("r^-4").criteria[0]
    assert crit["status"] == "holds"
    crit = report("exp(r^2)").criteria[0]
    assert crit["status"] == "fails"
    assert crit["holds_from_radius"] == pytest.approx(1.0, abs=0.07)


MIRROR = {
    "Thm 2.6(1)": "Thm 2.6(1) reversed", "Thm 2.6(2)": "Thm 2.6(2) reversed",
    "Thm 2.6(3)": "Thm 2.6(3)", "Thm 2.7(1)": "Thm 2.7(1) reversed", "Thm 2.7(2)": "Thm 2.7(2)",
    "Cor 2.8": "Cor 2.8 reversed",
}
MIRROR.update({v: k for k, v in MIRROR.items()})


@pytest.mark.parametrize("density", ["r^-4", "1", "exp(r^2)", "exp(1/r)", "r^-2.5*exp(-r)"])
def test_mirror_symmetry(density):
    rep = report(density)
    mirrored = classify(reflect(euclidean_punctured(3, density)))
    statuses = {t.theorem: t.status for t in rep.theorems}
    for t in mirrored.theorems:
        assert statuses[MIRROR[t.theorem]] == t.status, t.theorem


def test_mirror_symmetry_general_space():
    half_line = SpaceSpec(2, (0.0, math.inf), "r", "exp(r)", "1", 2 * math.pi, 1.0)
    a = classify(half_line)
    b = classify(reflect(half_line))
    sa = {t.theorem: t.status for t in a.theorems}
    for t in b.theorems:
        assert sa[MIRROR[t.theorem]] == t.status


SIMPLE = ["r^-4", "r^-5", "r^-2.5*exp(-r)", "r^-2*exp(-3*r)", "r^-1", "1", "exp(r^2)", "exp(1/r)"]


def _hyp(t, name):
    return next(h for h in t.hypotheses if name in h.name)


@pytest.mark.parametrize("density", SIMPLE)
def test_simple_density_equivalence(density):
    rep = report(density)
    convex = _hyp(rep.theorem("Thm 3.1(1a)"), "convex").status
    log_convex = _hyp(rep.theorem("Thm 3.2(1)"), "log-convex").status
    assert convex == log_convex
    pairs = [("Thm 3.1(1b)", "Thm 3.2(1)"), ("Thm 3.1(2) reversed", "Thm 3.2(2)")]
    for a, b in pairs:
        assert rep.theorem(a).certified == rep.theorem(b).certified, (a, b)


def test_net_zero_case_differs_only_through_the_limit_at_infinity():
    rep = report("r^-3")
    assert rep.theorem("Thm 3.2(3)").certified
    t = rep.theorem("Thm 3.1(3)")
    failing = [h.name for h in t.hypotheses if h.status != "holds"]
    assert failing == ["fiber area limit at B is positive"]


@pytest.mark.parametrize("density", ["1", "r^-4", "exp(r^2)", "r^-2"])
def test_refinement_never_flips_holds_to_fails(density):
    coarse = report(density)
    fine = report(density, per_rung=16)
    fine_map = {(t.theorem, h.name): h.status for t in fine.theorems for h in t.hypotheses}
    for t in coarse.theorems:
        for h in t.hypotheses:
            if h.status == "holds":
                assert fine_map[(t.theorem, h.name)] != "fails", (t.theorem, h.name)


def test_half_volume_range_is_inclusive():
    rep = report("r^-2.5*exp(-r)")
    t = rep.theorem("Thm 3.2(2)")
    lo, hi = t.volume_range["intervals"][0]
    assert t.volume_range["inclusive"] and hi == pytest.approx(2 * lo)


def test_serialization_round_trip():
    rep = report("exp(1/r)")
    doc = json.loads(rep.to_json())
    assert doc["headline"] == rep.headline
    assert doc["finiteness"]["volume_at_A"]["kind"] == "infinite"
    assert {t["theorem"] for t in doc["theorems"]} == {t.theorem for t in rep.theorems}
    text = rep.to_text()
    assert "headline: Thm 2.7(2): certified" in text
    assert "status: holds" in text


def test_conformal_plane():
    cyl = classify_conformal_plane("-log(r)")
    assert cyl.criterion == "holds" and cyl.equality
    assert cyl.verdict.startswith("Thm 3.1(3): certified")
    flat = classify_conformal_plane("0")
    assert flat.criterion == "fails" and flat.verdict == NOT_CERTIFIED
    cone = classify_conformal_plane("-2*log(r)")
    assert cone.criterion == "fails"
    assert cone.min_margin < 0
    assert json.dumps(cyl.to_dict(), default=str)
