from dataclasses import asdict

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from eulershock.datagen import make_w0
from eulershock.physical_solver import Coefficients, RiemannState, periodic_grid
from eulershock.selfsim_solver import (ModulationState, SelfSimConfig, SelfSimGrid, SelfSimState,
                                       bootstrap_monitor, from_selfsim, initial_state,
                                       modulation_rhs, new_report, profile_convergence,
                                       run_selfsim, selfsim_rhs, selfsim_step, selfsim_values_at,
                                       stable_ds, to_selfsim, transport_bound)


@pytest.fixture(scope="module")
def small_grid():
    return SelfSimGrid(0.05, 20.0, 1.02, 1e3)


def _profile_state(grid, gamma_kappa=0.0, s=3.0, Z=None, A=None):
    n = grid.n
    Z = np.zeros(n) if Z is None else Z
    A = np.zeros(n) if A is None else A
    return SelfSimState(grid, grid.profile.w_bar.copy(), Z, A,
                        ModulationState(s, -np.exp(-s), 0.0, 0.0, gamma_kappa))


def test_grid_is_symmetric_with_uniform_core(small_grid):
    g = small_grid
    assert g.x[g.i0] == 0.0
    assert np.allclose(g.x, -g.x[::-1], atol=1e-12)
    core = np.abs(g.x) <= 20
    assert np.allclose(np.diff(g.x[core]), 0.05)
    assert g.x[-1] >= 1e3
    # 11-point stencil at h = 0.05: truncation error below 1e-3
    assert g.at_origin(g.profile.w_bar, 3) == pytest.approx(6.0, abs=1e-3)
    assert g.at_origin(g.profile.w_bar, 1) == pytest.approx(-1.0, abs=1e-6)


def test_initial_state_is_the_substituted_datum():
    cfg = SelfSimConfig(gamma=2.0, epsilon=0.05, s_span=1.0)
    ss, dc = initial_state(cfg)
    eps = cfg.epsilon
    assert ss.mod.s == pytest.approx(-np.log(eps)) and ss.mod.t == -eps
    x = ss.x[np.abs(ss.x) < 100]
    w0 = make_w0(dc, x * eps ** 1.5)
    W = ss.W[np.abs(ss.x) < 100]
    assert np.max(np.abs(W - (w0 - dc.kappa0) / np.sqrt(eps))) < 1e-13


def test_round_trip_physical_selfsim_physical():
    rng = np.random.default_rng(3)
    n = 1024
    th = periodic_grid(n)
    grid = SelfSimGrid(0.005, 20.0, 1.02, 1e3)
    for _ in range(3):
        c = rng.normal(size=6) * 0.2
        w = 5 + c[0] * np.sin(th) + c[1] * np.cos(2 * th)
        z = 1 + c[2] * np.sin(3 * th) + c[3] * np.cos(th)
        a = c[4] * np.sin(th) + c[5] * np.cos(th)
        mod = ModulationState(0.0, 0.0, 1.0, 0.3, 5.0)     # s = 0: grid covers the circle
        ss = to_selfsim(RiemannState(0.0, w, z, a), mod, grid)
        back = from_selfsim(ss, n=n)
        # the line grid cuts the circle open at the antipode of xi
        keep = np.abs(np.mod(th - 0.3 + np.pi, 2 * np.pi) - np.pi) < 3.0
        err = max(np.max(np.abs(back.w - w)[keep]), np.max(np.abs(back.z - z)[keep]),
                  np.max(np.abs(back.a - a)[keep]))
        assert err < 1e-8


def test_to_selfsim_rejects_clock_past_tau(small_grid):
    th = periodic_grid(64)
    st_ = RiemannState(0.5, 1 + 0 * th, 0 * th, 0 * th)
    with pytest.raises(ValueError):
        to_selfsim(st_, ModulationState(0.0, 0.5, 0.5, 0.0, 0.0), small_grid)


def test_slope_relation_at_the_modulated_origin(small_grid):
    ss = _profile_state(small_grid, 8.0, s=2.0)
    ss.mod.xi = 0.1
    h = 1e-6
    wp = selfsim_values_at(ss, np.array([0.1 + h]))[0][0]
    wm = selfsim_values_at(ss, np.array([0.1 - h]))[0][0]
    slope = (wp - wm) / (2 * h)
    assert slope == pytest.approx(np.exp(2.0) * -1.0, rel=1e-6)


def test_rates_vanish_without_companions(small_grid):
    ss = _profile_state(small_grid, 8.0)
    td, xd, kd = modulation_rhs(ss, Coefficients.from_gamma(2.0))
    assert abs(td) < 1e-15 and abs(kd) < 1e-12 and xd == pytest.approx(8.0, abs=1e-12)


def test_z_slope_term_absent_at_gamma_three(small_grid):
    Z = 0.1 * np.exp(-small_grid.x ** 2) * small_grid.x
    ss = _profile_state(small_grid, 8.0, Z=Z)
    assert modulation_rhs(ss, Coefficients.from_gamma(3.0))[0] == 0.0
    assert modulation_rhs(ss, Coefficients.from_gamma(2.0))[0] != 0.0


def test_one_step_preserves_slope_constraint():
    cfg = SelfSimConfig(gamma=1.4, epsilon=0.05, s_span=1.0)
    ss, _ = initial_state(cfg)
    c = Coefficients.from_gamma(cfg.gamma)
    ds = 1e-3
    new, _ = selfsim_step(ss, ds, c, project="never")
    g = ss.grid
    drift = (g.at_origin(new.W, 1) - g.at_origin(ss.W, 1)) / ds
    assert abs(drift) < 1e-4


def test_rhs_vanishes_on_the_steady_profile(small_grid):
    ss = _profile_state(small_grid, 0.0)
    rw, rz, ra = selfsim_rhs(ss, Coefficients.from_gamma(3.0))
    core = np.abs(small_grid.x) <= 20
    assert np.max(np.abs(rw[core])) < 1e-6
    assert not rz.any() and not ra.any()


def test_profile_stays_steady_for_a_thousand_steps():
    g = SelfSimGrid(0.025, 20.0, 1.01, 1e4)
    ss = _profile_state(g, 0.0)
    c = Coefficients.from_gamma(3.0)
    ds = stable_ds(ss, c, 0.8)
    tau0 = ss.mod.tau
    for _ in range(1000):
        ss, _ = selfsim_step(ss, ds, c)
    core = np.abs(g.x) <= 20
    assert np.max(np.abs(ss.W - g.profile.w_bar)[core]) < 1e-8
    # modulation frozen: kappa = 0, xi = 0, tau unchanged
    assert abs(ss.mod.kappa) < 1e-12 and abs(ss.mod.xi) < 1e-12
    assert abs(ss.mod.tau - tau0) < 1e-12


def test_transport_bound_worked_examples():
    assert transport_bound(1.0, 0.75, 0.0, 0.5, 0.0, 2.0) == pytest.approx(np.exp(-1.5))
    assert transport_bound(1.0, 0.75, 1.0, 0.7, 0.0, 2.0) == pytest.approx(
        np.exp(-1.5) + np.exp(-1.4) / 0.05, rel=1e-12)
    with pytest.raises(ValueError):
        transport_bound(1.0, 0.75, 1.0, 0.75, 0.0, 2.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 2.0), st.floats(0.1, 2.0), st.floats(0.0, 2.0), st.floats(0.0, 1.0),
       st.floats(0.0, 1.0))
def test_transport_bound_dominates_damped_ode(lam_d, lam_f, F0, extra, s0):
    if abs(lam_d - lam_f) < 1e-3:
        return
    # f' = -D(s) f + F0 e^{-lam_f s}, D(s) = lam_d + extra*(1 + sin s)/2 >= lam_d
    def rhs(s, f):
        return -(lam_d + extra * 0.5 * (1 + np.sin(s))) * f + F0 * np.exp(-lam_f * s)
    s = np.linspace(s0, s0 + 6, 200)
    sol = solve_ivp(rhs, (s0, s0 + 6), [1.0], t_eval=s, rtol=1e-11, atol=1e-13)
    assert np.all(np.abs(sol.y[0]) <= transport_bound(1.0, lam_d, F0, lam_f, s0, s) + 1e-9)


def test_monitor_on_the_profile_and_seeded_violation(small_grid):
    ss = _profile_state(small_grid, 8.0, s=3.0)
    rep = new_report(0.05, 40.0, 8.0, 0.5)
    bootstrap_monitor(ss, rep)
    for k in ("Wx_deviation_far", "weighted_V", "sharp_Wx", "sharp_W", "W_xx_far",
              "W_xxx0_window", "W_xxx_sup"):
        assert rep.margins[k] >= 0.0, k
    assert rep.margins["Wx_deviation_near"] == pytest.approx(0.05, abs=1e-3)
    # a 0.1 bump in W_x at x = 1 exceeds the 1/40 envelope there
    x = small_grid.x
    bump_x = 0.1 * np.exp(-((x - 1.0) / 0.2) ** 2)
    W = small_grid.profile.w_bar + np.cumsum(bump_x) * 0.05
    bad = SelfSimState(small_grid, W, ss.Z, ss.A, ss.mod)
    rep2 = new_report(0.05, 40.0, 8.0, 0.5)
    bootstrap_monitor(bad, rep2)
    assert rep2.margins["Wx_deviation_far"] < 0.0
    assert not rep2.passed


def test_profile_convergence_of_the_profile(small_grid):
    r1, r2, r3 = profile_convergence(_profile_state(small_grid))
    # exact answer is (0, 0, r3); what remains is stencil truncation, amplified by 1/x^2 near 0
    assert r1 < 1e-2 and r2 < 1e-4 and 0 < r3 < 1


def test_datagen_state_within_profile_bounds():
    ss, _ = initial_state(SelfSimConfig(gamma=2.0, epsilon=0.05, s_span=1.0))
    assert all(r <= 1.0 for r in profile_convergence(ss))


def test_time_stepping_is_fourth_order():
    cfg = SelfSimConfig(gamma=2.0, s_span=0.1, project="never", monitor_every=10 ** 6)
    finals = []
    for ds in (1e-3, 5e-4, 2.5e-4):
        finals.append(run_selfsim(SelfSimConfig(**{**asdict(cfg), "ds_fixed": ds})).final.W)
    d1 = np.max(np.abs(finals[0] - finals[1]))
    d2 = np.max(np.abs(finals[1] - finals[2]))
    assert np.log2(d1 / d2) >= 3.5
