import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eulershock import gamma3_exact as g3
from eulershock.physical_solver import (Coefficients, FitQualityError, RiemannState,
                                        SimulationConfig, blowup_detect, fit_blowup_time,
                                        holder_fit, mol_step, particle_to_grid, periodic_grid,
                                        primitive_from_riemann, reconstruct_euler_fields,
                                        riemann_from_primitive, simulate)


def test_coefficients_for_gamma_three():
    c = Coefficients.from_gamma(3.0)
    assert (c.alpha, c.beta0, c.beta1, c.beta2, c.beta3) == (1.0, 0.0, -0.5, 2.5, 0.5)
    assert c.time_factor == 1.0
    with pytest.raises(ValueError):
        Coefficients.from_gamma(1.0)


@settings(max_examples=80, deadline=None)
@given(st.floats(-5, 5), st.floats(1e-3, 10), st.floats(1.05, 4.0))
def test_riemann_primitive_round_trip(b, P, gamma):
    al = Coefficients.from_gamma(gamma).alpha
    w, z = riemann_from_primitive(np.array([b]), np.array([P]), al)
    b2, P2 = primitive_from_riemann(w, z, al)
    assert abs(b2[0] - b) < 1e-12 * (1 + abs(b) + P ** al / al)
    assert abs(P2[0] - P) < 1e-9 * P


def test_vacuum_and_bad_grid_rejected():
    with pytest.raises(ValueError):
        primitive_from_riemann(np.array([1.0]), np.array([1.0]), 0.5)
    with pytest.raises(ValueError):
        riemann_from_primitive(np.array([0.0]), np.array([0.0]), 0.5)
    with pytest.raises(ValueError):
        periodic_grid(101)
    with pytest.raises(ValueError):
        periodic_grid(32)


def _gamma3_run(scheme, n, t_end, cfl):
    d = g3.tanh_front_datum(0.1)
    th = periodic_grid(n)
    cfg = SimulationConfig(gamma=3.0, grid_n=n, scheme=scheme, cfl=cfl, t_end=t_end,
                           slope_stop=1e12)
    run = simulate(cfg, d.value(th), 0 * th, 0 * th)
    st_ = particle_to_grid(run.final) if scheme == "lagrangian" else run.final
    exact, _ = g3.burgers_evolve(d, t_end, th)
    return st_, exact


@pytest.mark.parametrize("scheme,n,cfl,tol", [("lagrangian", 2048, 0.1, 1e-6),
                                              ("mol", 2048, 0.4, 1e-3)])
def test_gamma3_with_zero_companions_is_burgers(scheme, n, cfl, tol):
    st_, exact = _gamma3_run(scheme, n, 0.06, cfl)
    # z and a are not forced when z = a = 0 at gamma = 3
    assert np.max(np.abs(st_.z)) < 1e-12 and np.max(np.abs(st_.a)) < 1e-12
    assert np.max(np.abs(st_.w - exact)) < tol


def test_mol_fourth_order_in_time_and_space():
    c = Coefficients.from_gamma(2.0)

    def run(n, T=0.2):
        th = periodic_grid(n)
        s = RiemannState(0.0, 3 + 0.2 * np.sin(th), 1 + 0.1 * np.cos(th), 0.1 * np.sin(2 * th))
        for _ in range(n // 4):
            s = mol_step(s, T / (n // 4), c, dissipation=0.0)
        return s
    ref = run(512)
    errs = [np.max(np.abs(run(n).w - ref.w[::512 // n])) for n in (64, 128)]
    assert np.log2(errs[0] / errs[1]) > 3.7


def test_fit_blowup_time_on_exact_inverse_law():
    t = np.linspace(0, 0.99, 400)
    T, r2 = fit_blowup_time(t, 3.0 / (1.0 - t))
    assert abs(T - 1.0) < 1e-10 and r2 > 1 - 1e-12
    rng = np.random.default_rng(0)
    with pytest.raises(FitQualityError):
        fit_blowup_time(t, 1.0 / (0.01 + rng.random(400)))


def test_holder_fit_recovers_one_third():
    th = np.linspace(-np.pi, np.pi, 200_001)
    w = 0.3 - np.cbrt(th - 0.1)
    expo, (lo, hi) = holder_fit(th, w, 0.1, 0.3, slope_max=1e3)
    assert abs(expo - 1 / 3) < 1e-6
    assert abs(hi / lo - 10.0) < 1e-12


def test_reduced_system_residual_small_for_smooth_state():
    c = Coefficients.from_gamma(1.4)
    th = periodic_grid(512)
    s = RiemannState(0.0, 3 + 0.2 * np.sin(th), 1 + 0.1 * np.cos(th), 0.1 * np.sin(2 * th))
    f = reconstruct_euler_fields(s, np.array([0.5, 1.0]), c)
    assert f.reduced_residual < 1e-9
    b, P = primitive_from_riemann(s.w, s.z, c.alpha)
    assert np.allclose(f.rho[1], P) and np.allclose(f.u_theta[0], 0.5 * b)


def test_lagrangian_blowup_detection_on_gamma3():
    d = g3.tanh_front_datum(0.1)
    n = 2048
    th = periodic_grid(n)
    cfg = SimulationConfig(gamma=3.0, grid_n=n, scheme="lagrangian", cfl=0.1, slope_stop=1e3)
    rec = blowup_detect(simulate(cfg, d.value(th), 0 * th, 0 * th))
    assert rec.stop_reason == "slope_stop"
    assert abs(rec.T_star_est - 0.1) < 1e-5
    assert 0.99 < rec.rate_lo <= rec.rate_hi < 1.01
