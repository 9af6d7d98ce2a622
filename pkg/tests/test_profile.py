import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from warpiso.geometry import classify_finiteness, euclidean_punctured
from warpiso.profile import (FAILS, HOLDS, LargeFiberCertificate, MinorantCertificate, Refusal,
                             SlopeBoundError, _orient, build_profile, certify_fiber,
                             certify_large_fibers, check_convexity, closed_form_check,
                             contact_set, envelope, envelope_points, lower_hull)

FOUR_PI = 4 * math.pi


def space(density, volume=None):
    return euclidean_punctured(3, density, volume)


def test_unit_density_profile_closed_form():
    p = build_profile(space("1"))
    assert p.V_abs is not None
    expected = (36 * math.pi) ** (1 / 3) * p.V_abs ** (2 / 3)
    np.testing.assert_allclose(p.F, expected, rtol=1e-9)
    assert p.radius_at(FOUR_PI / 3, absolute=True) == pytest.approx(1.0, rel=1e-12)


def test_r_minus_4_profile_closed_form():
    p = build_profile(space("r^-4"))
    # signed volume from r = 1: F = 4 pi (1 - V / 4 pi)^2, checked where V is resolved
    ok = FOUR_PI - p.V > 1e-6 * FOUR_PI
    assert ok.sum() > 0.7 * p.size
    np.testing.assert_allclose(p.F[ok], FOUR_PI * (1 - p.V[ok] / FOUR_PI) ** 2, rtol=1e-9)
    assert np.all(np.diff(p.F) < 0)


def test_two_point_profile_has_no_derivatives():
    p = build_profile(space("1"), radii=[1.0, 2.0])
    assert p.size == 2
    assert np.all(np.isnan(p.Fp)) and np.all(np.isnan(p.Fpp))


def test_volumes_increase_and_areas_positive():
    for d in ["1", "r^-4", "exp(r^2)", "exp(1/r)"]:
        p = build_profile(space(d))
        assert np.all(p.dV > 0) and np.all(p.F > 0)
        # the signed coordinate saturates at rounding level near a finite end
        assert np.all(np.diff(p.V) >= 0)
        if p.V_abs is not None:
            assert np.all(np.diff(p.V_abs) > 0)


def test_csv_export():
    text = build_profile(space("1"), radii=[0.5, 1.0, 2.0]).to_csv()
    lines = text.splitlines()
    assert lines[0] == "V,F,Fp,Fpp"
    assert len(lines) == 4
    assert lines[1].endswith(",nan,nan")
    V, F = (float(x) for x in lines[2].split(",")[:2])
    assert V == 0.0 and F == pytest.approx(FOUR_PI)


@pytest.mark.parametrize("density, convex", [("1", FAILS), ("r^-4", HOLDS), ("r^-3", HOLDS),
                                             ("r^-2", HOLDS), ("exp(r^2)", FAILS)])
def test_convexity_verdicts(density, convex):
    assert check_convexity(build_profile(space(density))).convex_everywhere == convex


def test_gaussian_eventually_convex_from_unit_radius():
    p = build_profile(space("exp(r^2)"))
    v = check_convexity(p)
    assert v.eventually_convex_from is not None
    r_start = p.radius_at(v.eventually_convex_from)
    # exact start is r = 1; allow one grid cell (1/16 on this rung)
    assert abs(r_start - 1.0) <= 0.07
    cf = closed_form_check(p)
    assert 1.0 <= cf["log_convex_from_radius"] <= 1.07


def test_plane_criterion_threshold():
    p = build_profile(euclidean_punctured(2, "exp(r^2-2*r+2)"))
    cf = closed_form_check(p)
    assert 1 / math.sqrt(2) <= cf["log_convex_from_radius"] <= 1 / math.sqrt(2) + 0.07


def test_closed_form_and_discrete_agree_away_from_noise():
    for d in ["exp(r^2)", "exp(1/r)", "exp(r^1.5)", "r^-4"]:
        cf = closed_form_check(build_profile(space(d)))
        assert cf["available"] and cf["sign_disagreements"] == 0


def test_refinement_keeps_verdicts():
    for d in ["1", "r^-4", "exp(r^2)", "r^-2"]:
        a = check_convexity(build_profile(space(d), per_rung=8))
        b = check_convexity(build_profile(space(d), per_rung=16))
        assert a.convex_everywhere == b.convex_everywhere


# -- envelope ---------------------------------------------------------------


def exact_above(hv, hf, x, y):
    """Every point (x, y) lies on or above the polyline through (hv, hf)."""
    j = np.clip(np.searchsorted(hv, x, side="right") - 1, 0, len(hv) - 2)
    for xi, yi, k in zip(x, y, j):
        if not hv[0] <= xi <= hv[-1]:
            return False
        if _orient((hv[k], hf[k]), (hv[k + 1], hf[k + 1]), (xi, yi)) < 0:
            return False
    return True


def strictly_convex(hv, hf):
    return all(_orient((hv[i], hf[i]), (hv[i + 1], hf[i + 1]), (hv[i + 2], hf[i + 2])) > 0
               for i in range(len(hv) - 2))


curves = st.integers(min_value=2, max_value=60).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(min_value=-1e3, max_value=1e3), min_size=n, max_size=n, unique=True),
        st.lists(st.floats(min_value=-1e3, max_value=1e3), min_size=n, max_size=n)))


@given(curves)
def test_envelope_properties(curve):
    xs, ys = curve
    order = np.argsort(xs)
    x, y = np.asarray(xs)[order], np.asarray(ys)[order]
    env = envelope_points(x, y)
    assert strictly_convex(env.V, env.F)
    assert exact_above(env.V, env.F, x, y)
    again = envelope_points(env.V, env.F)
    assert np.array_equal(again.V, env.V) and np.array_equal(again.F, env.F)


@given(st.lists(st.integers(min_value=1, max_value=50), min_size=1, max_size=40, unique=True),
       st.integers(min_value=-100, max_value=100))
def test_envelope_of_convex_input_is_input(slopes, start):
    slopes = sorted(slopes)
    x = np.arange(len(slopes) + 1, dtype=float)
    y = np.concatenate([[0.0], np.cumsum(slopes)]).astype(float) + start
    assert lower_hull(x, y) == list(range(x.size))


def test_anchored_envelope_of_concave_power_is_chord():
    V = np.linspace(0.01, 1.0, 200)
    env = envelope_points(V, V ** (2 / 3), anchor_at_zero=True)
    assert env.V.tolist() == [0.0, 1.0]
    contact = env.contact(V, V ** (2 / 3))
    assert contact[-1] and not contact[1:-1].any()


def test_two_point_envelope_is_a_segment():
    env = envelope_points([0.0, 1.0], [3.0, 1.0])
    assert env.V.tolist() == [0.0, 1.0] and env.F.tolist() == [3.0, 1.0]


def test_slope_bounds_clip_and_reject():
    x = np.linspace(-2, 2, 41)
    env = envelope_points(x, x ** 2, slope_bounds=(-1.0, 1.0))
    assert env.V[0] >= -0.6 and env.V[-1] <= 0.6
    assert env(np.array([10.0]))[0] <= 100.0
    with pytest.raises(SlopeBoundError):
        envelope_points(x, x ** 2, slope_bounds=(1.0, -1.0))


def test_orientation_is_exact_near_collinear():
    a, b = (0.0, 0.0), (1.0, 1.0)
    c = (3.0, 3.0 + 2 ** -50)
    exact = (Fraction(1) * (Fraction(c[1])) - Fraction(1) * Fraction(c[0]))
    assert _orient(a, b, c) == (exact > 0) - (exact < 0) == 1
    assert _orient(a, b, (3.0, 3.0)) == 0


# -- certificates -------------------------------------------------------------


def test_convex_case1_certifies_every_volume():
    s = euclidean_punctured(3, "r^2", "1")
    p = build_profile(s)
    fin = classify_finiteness(s)
    for V0 in [1e-3, 1.0, 100.0, 1e6]:
        cert = certify_fiber(p, fin, V0)
        assert isinstance(cert, MinorantCertificate) and cert.kind == "thm2_7_case1"
        assert cert.gap <= 1e-6 * FOUR_PI


def test_gaussian_large_fibers_and_small_refusal():
    s = space("exp(r^2)")
    p = build_profile(s)
    fin = classify_finiteness(s)
    cert = certify_large_fibers(p, fin)
    assert isinstance(cert, LargeFiberCertificate)
    assert 1.0 < cert.radius < 2.0
    big = certify_fiber(p, fin, 10 * cert.threshold)
    assert isinstance(big, MinorantCertificate)


def test_shifted_gaussian_small_volume_refused():
    s = space("exp(r^2-2*r+2)")
    p = build_profile(s)
    fin = classify_finiteness(s)
    small = certify_fiber(p, fin, 1e-3)
    assert isinstance(small, Refusal) and small.failed == "contact"
    assert isinstance(certify_large_fibers(p, fin), LargeFiberCertificate)


def test_exp_inverse_r_case2():
    s = space("exp(1/r)")
    p = build_profile(s)
    fin = classify_finiteness(s)
    V_small = p.volume_at(0.25)
    cert = certify_fiber(p, fin, V_small)
    assert isinstance(cert, MinorantCertificate) and cert.kind == "thm2_7_case2"
    assert cert.boundary["limit_left"] > 0 and cert.boundary["limit_right"] > 0
    # the base fiber r = 1 lies beyond the contact set r <= 1/2
    assert isinstance(certify_fiber(p, fin, 0.0), Refusal)
    case, mask, env = contact_set(p, fin)
    assert case == 2
    assert abs(p.radii[mask]).max() == pytest.approx(0.5, rel=0.02)


def test_large_fiber_refusals():
    for d, failed in [("1", "F' unbounded"), ("r^-2", None)]:
        s = space(d)
        res = certify_large_fibers(build_profile(s), classify_finiteness(s))
        assert isinstance(res, Refusal)


def test_mixed_exponential_threshold():
    s = space("exp(r^8)", "exp(r)")
    res = certify_large_fibers(build_profile(s), classify_finiteness(s))
    assert isinstance(res, LargeFiberCertificate)


def test_alpha_one_and_half_threshold():
    s = space("exp(r^1.5)")
    res = certify_large_fibers(build_profile(s), classify_finiteness(s))
    assert isinstance(res, LargeFiberCertificate)


def test_envelope_of_profile_is_below_samples():
    p = build_profile(space("exp(r^2)"))
    env = envelope(p)
    assert np.all(env(p.V) <= p.F * (1 + 1e-12))
