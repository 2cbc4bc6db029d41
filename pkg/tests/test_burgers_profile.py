import mpmath as mp
import numpy as np
from hypothesis import given, settings, strategies as st

from eulershock.burgers_profile import (check_damping_inequalities, cubic_residual, damping_margins,
                                        eval_profile, profile_table, steady_residual, wbar,
                                        wbar_derivatives)

mp.mp.dps = 40


def mp_root(x):
    """Bracketed high-precision root of W^3 + W + x = 0 (the cubic is monotone)."""
    x = mp.mpf(x)
    if x == 0:
        return mp.mpf(0)
    b = abs(x) ** (mp.mpf(1) / 3) + 1
    lo, hi = (-b, mp.mpf(0)) if x > 0 else (mp.mpf(0), b)
    return mp.findroot(lambda w: w ** 3 + w + x, (lo, hi), solver="illinois")


@settings(max_examples=60, deadline=None)
@given(st.one_of(st.floats(-50, 50), st.floats(-1e8, 1e8), st.floats(-1e-6, 1e-6)))
def test_wbar_matches_high_precision_root(x):
    ref = mp_root(x)
    got = float(wbar(np.array([x]))[0])
    assert abs(got - float(ref)) <= 4e-16 * max(1.0, abs(float(ref)))


@settings(max_examples=25, deadline=None)
@given(st.floats(-20, 20))
def test_derivatives_match_numerical_differentiation(x):
    d = wbar_derivatives(wbar(np.array([x])))
    for k in range(1, 5):
        ref = float(mp.diff(mp_root, mp.mpf(x), k))
        assert abs(float(d[k - 1][0]) - ref) < 1e-10 * max(1.0, abs(ref))


def test_values_at_origin():
    s = eval_profile(np.array([0.0]))
    assert s.w_bar[0] == 0.0
    assert s.d1[0] == -1.0
    assert s.d2[0] == 0.0
    assert s.d3[0] == 6.0


def test_odd_and_decreasing():
    x = np.linspace(-30, 30, 2001)
    w = wbar(x)
    assert np.allclose(w, -w[::-1], atol=1e-15)
    assert np.all(np.diff(w) < 0)


def test_far_field_cube_root_behaviour():
    x = np.array([1e6, 1e9])
    assert np.allclose(wbar(x) / -np.cbrt(x), 1.0, rtol=1e-3)


def test_steady_equation_and_cubic_identity():
    x = np.linspace(-100, 100, 10_001)
    assert steady_residual(x) < 1e-10
    xs = np.geomspace(1e-6, 1e6, 20001)
    assert np.max(cubic_residual(np.concatenate([-xs, xs]))) < 1e-15


def test_damping_margins_nonnegative_and_zero_at_origin():
    rep = check_damping_inequalities(np.linspace(-100, 100, 20001))
    assert rep.ok
    ma, mb = damping_margins(np.array([0.0]))
    assert abs(ma[0]) < 1e-15 and abs(mb[0]) < 1e-15


def test_damping_seeded_violation_is_reported():
    rep = check_damping_inequalities(np.array([0.0, 1.0]), tol=-0.5)
    assert not rep.ok


def test_profile_table_columns():
    t = profile_table(1e-3, 1e3, 50, log_spacing=True)
    assert set(t) == {"x", "wbar", "d1", "d2", "d3", "d4", "margin_a", "margin_b"}
    assert np.all(np.diff(t["x"]) > 0)
