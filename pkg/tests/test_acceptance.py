"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

The general-gamma pipelines (physical run, self-similar run, cross-solver
check) are expensive, so they run once per gamma and are shared.
"""
import time
from dataclasses import asdict

import numpy as np
import pytest

from eulershock import burgers_profile as bp
from eulershock import gamma3_exact as g3
from eulershock.cli_io import RunConfig, run_pipeline
from eulershock.physical_solver import (Coefficients, RiemannState, SimulationConfig,
                                        blowup_detect, mol_step, periodic_grid, simulate)
from eulershock.selfsim_solver import SelfSimConfig, run_selfsim

GAMMAS = (1.4, 2.0)
_PIPELINES = {}


def pipeline(gamma, tmp_root):
    if gamma not in _PIPELINES:
        cfg = RunConfig.from_dict({"gamma": gamma, "epsilon": 0.05,
                                   "out_dir": str(tmp_root / f"gamma_{gamma:g}")})
        t0 = time.perf_counter()
        report, code = run_pipeline(cfg)
        _PIPELINES[gamma] = (report, code, time.perf_counter() - t0)
    return _PIPELINES[gamma]


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    return {g: pipeline(g, root) for g in GAMMAS}


def test_criterion_01_steady_profile(criterion):
    t0 = time.perf_counter()
    x = np.linspace(-100, 100, 10_000)
    steady = bp.steady_residual(x)
    xs = np.geomspace(1e-6, 1e6, 20_000)
    cubic = float(np.max(bp.cubic_residual(np.concatenate([-xs, xs]))))
    dt = time.perf_counter() - t0
    ok = steady < 1e-10 and cubic < 1e-12 and dt < 1.0
    criterion(1, "steady profile exactness", ok,
              f"steady={steady:.2e} cubic(rel)={cubic:.2e} time={dt:.2f}s")
    assert ok


def test_criterion_02_damping_certificates(criterion):
    t0 = time.perf_counter()
    xs = np.geomspace(1e-6, 1e4, 500_000)
    rep = bp.check_damping_inequalities(np.concatenate([-xs[::-1], xs]), tol=1e-12)
    dt = time.perf_counter() - t0
    ok = rep.ok and dt < 5.0
    criterion(2, "damping certificates", ok,
              f"min margins {rep.min_a:.2e}, {rep.min_b:.2e} time={dt:.2f}s")
    assert ok


def test_criterion_03_gamma3_blowup(criterion):
    t0 = time.perf_counter()
    eps = 0.1
    d = g3.tanh_front_datum(eps)
    n = 4096
    th = periodic_grid(n)
    w0 = d.value(th)
    cfg = SimulationConfig(gamma=3.0, grid_n=n, scheme="lagrangian", cfl=0.1, slope_stop=1e4)
    run = simulate(cfg, w0, 0 * th, 0 * th)
    rec = blowup_detect(run)
    _, _, theta0 = g3.blowup_predict(d)
    target = theta0 + eps * float(d.value(np.array([theta0]))[0])
    w = run.final.V[0]
    drift = max(abs(w.max() - w0.max()), abs(w.min() - w0.min()))
    dt = time.perf_counter() - t0
    ok = (abs(rec.T_star_est - eps) <= 0.01 * eps and abs(rec.theta_star_est - target) <= 1e-3
          and drift <= 1e-6 and dt < 10.0)
    criterion(3, "gamma=3 blowup reproduction", ok,
              f"T*={rec.T_star_est:.6f} theta*={rec.theta_star_est:.5f} (target {target:.5f}) "
              f"extrema drift={drift:.1e} time={dt:.1f}s")
    assert ok


def test_criterion_04_entropy_continuation(criterion):
    worst_trace = 0.0
    worst_rh = 0.0
    stationary = True
    for s in (1e-6, 1e-3, 0.1, 1.0, 4.0):
        left = float(g3.entropy_cusp_solution(np.array([-1e-300]), s)[0])
        right = float(g3.entropy_cusp_solution(np.array([1e-300]), s)[0])
        worst_trace = max(worst_trace, abs(left - np.sqrt(s)), abs(right + np.sqrt(s)))
        shock = g3.cusp_shock_state(s)
        rh = g3.rankine_hugoniot_check(shock)
        worst_rh = max(worst_rh, rh.residual)
        stationary &= abs(shock.speed) < 1e-12 and abs(shock.theta_star) < 1e-12 and rh.entropy_ok
    ok = worst_trace < 1e-8 and worst_rh < 1e-10 and stationary
    criterion(4, "entropy continuation", ok,
              f"trace error={worst_trace:.1e} RH residual={worst_rh:.1e} stationary={stationary}")
    assert ok


@pytest.mark.parametrize("gamma", GAMMAS)
def test_criterion_05_bootstrap_run(runs, criterion, gamma):
    report, _, secs = runs[gamma]
    boot = report["selfsim"]["bootstrap"]
    failing = {k: round(v, 3) for k, v in boot["margins"].items() if v is None or v < 0}
    cons = boot["constraint_max"] <= 1e-6
    window = 5.0 <= boot["wxxx0_min"] and boot["wxxx0_max"] <= 7.0
    final = abs(boot["wxxx0_final"] - 6.0) <= 0.2
    ok = cons and window and final and not failing and secs < 300
    criterion(5, f"general-gamma bootstrap run, gamma={gamma:g}", ok,
              f"constraint={boot['constraint_max']:.1e} W_xxx(0) in "
              f"[{boot['wxxx0_min']:.3f}, {boot['wxxx0_max']:.3f}] final={boot['wxxx0_final']:.3f} "
              f"failing={failing} pipeline time={secs:.0f}s")
    assert ok


@pytest.mark.parametrize("gamma", GAMMAS)
def test_criterion_06_rate_sandwich(runs, criterion, gamma):
    lo, hi = runs[gamma][0]["physical"]["rate_band"]
    ok = 0.45 <= lo and hi <= 2.2
    criterion(6, f"blowup-rate sandwich, gamma={gamma:g}", ok,
              f"slope*(T*-t) in [{lo:.4f}, {hi:.4f}]")
    assert ok


@pytest.mark.parametrize("gamma", GAMMAS)
def test_criterion_07_holder_exponent(runs, criterion, gamma):
    h = runs[gamma][0]["physical"]["blowup"]["holder_exponent"]
    ok = h is not None and 0.28 <= h <= 0.38
    criterion(7, f"Hoelder cusp exponent, gamma={gamma:g}", ok, f"exponent={h:.4f}")
    assert ok


@pytest.mark.parametrize("gamma", GAMMAS)
def test_criterion_08_physical_bounds(runs, criterion, gamma):
    b = runs[gamma][0]["physical"]["bounds"]
    ok = b["density_ok"] and b["vorticity_ok"] and b["a_theta_ok"] and b["varpi_ok"]
    criterion(8, f"density, vorticity and a_theta bounds, gamma={gamma:g}", ok,
              f"min P={b['min_P']:.3f} omega in [{b['min_omega']:.3f}, {b['max_omega']:.3f}] "
              f"max|a_theta|={b['max_a_theta']:.3f} varpi residual={b['varpi_residual']:.1e}")
    assert ok


@pytest.mark.parametrize("gamma", GAMMAS)
def test_criterion_09_za_decay(runs, criterion, gamma):
    ss = runs[gamma][0]["selfsim"]
    m = ss["bootstrap"]["margins"]
    za = min(m[f"ZA_decay_{n}"] for n in (1, 2, 3, 4))
    cert = ss["decay_certificate"]
    ok = za >= 0 and cert["Z"]["ok"] and cert["A"]["ok"]
    criterion(9, f"Z/A decay, gamma={gamma:g}", ok,
              f"min decay margin={za:.3f} transport-bound gaps Z={cert['Z']['min_gap']:.2e} "
              f"A={cert['A']['min_gap']:.2e} (lambda_D {cert['Z']['lambda_D']:.2f}, "
              f"{cert['A']['lambda_D']:.2f})")
    assert ok


@pytest.mark.parametrize("gamma", GAMMAS)
def test_criterion_10_cross_solver(runs, criterion, gamma):
    c = runs[gamma][0]["consistency"]
    ok = c["passed"] and c["sup_err_w"] <= 1e-3
    slopes = [r["max_slope"] for r in c["rows"]]
    criterion(10, f"cross-solver consistency, gamma={gamma:g}", ok,
              f"sup|w_phys - w_ss|={c['sup_err_w']:.1e} over slopes up to {max(slopes):.0f}")
    assert ok


def _mol_orders():
    c = Coefficients.from_gamma(2.0)

    def run(n, T=0.2):
        th = periodic_grid(n)
        s = RiemannState(0.0, 3 + 0.2 * np.sin(th), 1 + 0.1 * np.cos(th), 0.1 * np.sin(2 * th))
        for _ in range(n // 4):
            s = mol_step(s, T / (n // 4), c, dissipation=0.0)
        return s
    ref = run(1024)
    errs = [np.max(np.abs(run(n).w - ref.w[::1024 // n])) for n in (64, 128, 256)]
    return np.log2(np.array(errs[:-1]) / np.array(errs[1:]))


def _selfsim_orders():
    cfg = SelfSimConfig(gamma=2.0, s_span=0.1, project="never", monitor_every=10 ** 6)
    W = [run_selfsim(SelfSimConfig(**{**asdict(cfg), "ds_fixed": ds})).final.W
         for ds in (1e-3, 5e-4, 2.5e-4, 1.25e-4)]
    d = [np.max(np.abs(W[i] - W[i + 1])) for i in range(3)]
    return np.log2(np.array(d[:-1]) / np.array(d[1:]))


def _rerun_identical():
    th = periodic_grid(2048)
    cfg = SimulationConfig(gamma=2.0, grid_n=2048, scheme="lagrangian", cfl=0.1, slope_stop=200)
    w0 = g3.tanh_front_datum(0.1).value(th)
    runs = [simulate(cfg, w0, 0.1 * np.cos(th), 0.05 * np.sin(th)) for _ in range(2)]
    phys = all(runs[0].series[k].tobytes() == runs[1].series[k].tobytes() for k in runs[0].series)
    phys &= runs[0].final.V.tobytes() == runs[1].final.V.tobytes()
    scfg = SelfSimConfig(gamma=1.4, s_span=0.2)
    ss = [run_selfsim(scfg).final for _ in range(2)]
    selfsim = all(getattr(ss[0], f).tobytes() == getattr(ss[1], f).tobytes() for f in "WZA")
    selfsim &= asdict(ss[0].mod) == asdict(ss[1].mod)
    return phys and selfsim


def test_criterion_11_scheme_quality(criterion):
    mol = _mol_orders()
    ssim = _selfsim_orders()
    same = _rerun_identical()
    ok = np.all(mol >= 3.5) and np.all(ssim >= 3.5) and same
    criterion(11, "scheme quality", ok,
              f"physical orders={np.round(mol, 2).tolist()} self-similar orders="
              f"{np.round(ssim, 2).tolist()} bit-identical reruns={same}")
    assert ok
