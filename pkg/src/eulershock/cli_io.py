"""
Run configuration, orchestration, structured outputs and the command line.

A pipeline run generates and validates initial data, evolves it with the
particle solver up to the slope threshold and with the self-similar solver
over s_span, compares the two while both are resolved, and writes
report.json plus CSV series into its run directory.

Exit codes: 0 all verdicts pass, 2 configuration error, 3 numerical stage
failure, 4 at least one verdict fails.
"""

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict, fields

import numpy as np

from . import burgers_profile as bp
from . import gamma3_exact as g3
from .datagen import DataConfig, build_initial_data, validate_initial_data
from .physical_solver import (SimulationConfig, FitQualityError, ParticleState, RiemannState,
                              blowup_detect, rate_sandwich, reconstruct_euler_fields,
                              simulate, holder_fit, particle_slopes)
from .stencils import periodic_derivative
from .selfsim_solver import (SelfSimConfig, decay_certificate, profile_convergence, run_selfsim,
                             selfsim_values_at)

WORKERS_ENV = "EULERSHOCK_WORKERS"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ACCEPT = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage, message, data=None):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.data = data or {}


@dataclass
class RunConfig:
    gamma: float
    epsilon: float
    kappa0: float = 0.0
    nu0: float = 1e-10
    M: float = 40.0
    grid_n: int = 1 << 14
    scheme: str = "lagrangian"
    cfl: float = 0.05
    slope_stop: float = 1e3
    za_mode: str = "bump"
    profile: str = "envelope"
    x_core: float = 20.0
    h_core: float = 0.05
    stretch_ratio: float = 1.02
    s_span: float = 6.0
    tol_c: float = 1e-6
    selfsim_cfl: float = 0.8
    run_physical: bool = True
    run_selfsim: bool = True
    run_consistency: bool = True
    consistency_slope: float = 1e2
    annulus: tuple = (0.5, 1.0, 2.0, 4.0)
    seed: int = 0
    out_dir: str = ""

    REQUIRED = ("gamma", "epsilon")

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ConfigError("gamma must exceed 1")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("epsilon must lie in (0, 1)")
        R0, r0, r1, R1 = self.annulus
        if not 0 < R0 < r0 < r1 < R1:
            raise ConfigError("annulus radii must satisfy 0 < R0 < r0 < r1 < R1")
        for name in ("nu0", "M", "cfl", "slope_stop", "h_core", "s_span", "tol_c",
                     "selfsim_cfl", "consistency_slope"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        self.annulus = tuple(float(v) for v in self.annulus)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        missing = [k for k in cls.REQUIRED if k not in d]
        if missing:
            raise ConfigError("missing fields: " + ", ".join(missing))
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError("unknown fields: " + ", ".join(unknown))
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        d["annulus"] = list(self.annulus)
        return d

    @property
    def alpha(self):
        return 0.5 * (self.gamma - 1.0)

    def data_config(self):
        return DataConfig(epsilon=self.epsilon, kappa0=self.kappa0, nu0=self.nu0,
                          alpha=self.alpha, grid_n=self.grid_n, profile=self.profile,
                          za_mode=self.za_mode)

    def simulation_config(self, **over):
        kw = dict(gamma=self.gamma, epsilon=self.epsilon, kappa0=self.kappa0, nu0=self.nu0,
                  M=self.M, grid_n=self.grid_n, cfl=self.cfl, slope_stop=self.slope_stop,
                  scheme=self.scheme, t0=-self.epsilon)
        kw.update(over)
        return SimulationConfig(**kw)

    def selfsim_config(self, **over):
        kw = dict(gamma=self.gamma, epsilon=self.epsilon, kappa0=self.kappa0, nu0=self.nu0,
                  M=self.M, x_core=self.x_core, h_core=self.h_core,
                  stretch_ratio=self.stretch_ratio, s_span=self.s_span, tol_c=self.tol_c,
                  cfl=self.selfsim_cfl, profile=self.profile, za_mode=self.za_mode)
        kw.update(over)
        return SelfSimConfig(**kw)


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return RunConfig.from_dict(raw)


# ---------------------------------------------------------------- output helpers

def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if np.isfinite(v) else None
    return v


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path, columns):
    keys = list(columns)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(keys)
        for row in zip(*(columns[k] for k in keys)):
            wr.writerow([v if isinstance(v, str) else repr(float(v)) for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], rows[1:]
    out = {}
    for j, k in enumerate(head):
        col = [r[j] for r in body]
        try:
            out[k] = np.array([float(v) for v in col])
        except ValueError:
            out[k] = np.array(col)
    return out


class Progress:
    """Progress lines on stderr, plain or one JSON object per line."""

    def __init__(self, json_lines=False, stream=None):
        self.json_lines = json_lines
        self.stream = stream or sys.stderr

    def __call__(self, stage, **info):
        if self.json_lines:
            self.stream.write(json.dumps(_clean({"stage": stage, **info}), sort_keys=True) + "\n")
        else:
            extra = " ".join(f"{k}={v}" for k, v in info.items())
            self.stream.write(f"[{stage}] {extra}\n")
        self.stream.flush()


def _quiet(stage, **info):
    return None


# ---------------------------------------------------------------- stages

def physical_bounds(run, nu0, M):
    """Density, vorticity and a_theta bounds checked along the whole run."""
    s = run.series
    out = {
        "min_P": float(np.min(s["min_P"])),
        "P_floor": 0.5 * nu0,
        "min_omega": float(np.min(s["min_omega"])),
        "max_omega": float(np.max(s["max_omega"])),
        "omega_window": [1.0 / M ** 2, M ** 2],
        "max_a_theta": float(np.max(s["max_a_theta"])),
        "a_theta_ceiling": 3.0 * M ** 2,
        "varpi_residual": float(run.varpi_residual),
    }
    out["density_ok"] = out["min_P"] >= out["P_floor"]
    out["vorticity_ok"] = 1.0 / M ** 2 <= out["min_omega"] and out["max_omega"] <= M ** 2
    out["a_theta_ok"] = out["max_a_theta"] <= out["a_theta_ceiling"]
    out["varpi_ok"] = bool(np.isfinite(run.varpi_residual) and run.varpi_residual < 1e-3)
    return out


def final_profile(run):
    """(theta, w, slope) of the w-family at the end of a physical run."""
    ps = run.final
    if isinstance(ps, ParticleState):
        sw = particle_slopes(ps)[0]
        th = np.mod(ps.X[0] + np.pi, 2 * np.pi) - np.pi
        return th, ps.V[0].copy(), sw
    return ps.theta, ps.w.copy(), periodic_derivative(ps.w, ps.h)


def holder_data(theta, w, slope):
    """Arrays entering the Hoelder regression and the fitted exponent."""
    i = int(np.argmin(slope))
    smax = float(-slope[i])
    expo, (lo, hi) = holder_fit(theta, w, theta[i], w[i], smax)
    d = np.mod(theta - theta[i] + np.pi, 2 * np.pi) - np.pi
    r = np.abs(d)
    dv = np.abs(w - w[i])
    sel = (r >= lo) & (r <= hi) & (dv > 0)
    return np.log(r[sel]), np.log(dv[sel]), expo


def cross_solver_check(cfg, n_marks=4, progress=_quiet):
    """Largest |w_phys - w_selfsim| at self-similar times where both are resolved.

    The marks are spread over s0 < s <= s0 + log(consistency_slope * eps), i.e.
    while the expected slope e^s stays below the threshold.
    """
    scfg = cfg.selfsim_config()
    s0 = scfg.s0
    s_hi = s0 + np.log(0.95 * cfg.consistency_slope * cfg.epsilon)
    marks = list(np.linspace(s0, s_hi, n_marks + 1)[1:])
    ss_run = run_selfsim(scfg.__class__(**{**asdict(scfg), "s_span": s_hi - s0}), s_marks=marks)
    th, w0, z0, a0, _ = build_initial_data(cfg.data_config())
    rows = []
    for st in ss_run.marks:
        t_k = st.mod.t
        prun = simulate(cfg.simulation_config(t_end=t_k, slope_stop=1e300), w0, z0, a0)
        ps = prun.final
        if abs(ps.t_tilde - t_k) > 1e-14:
            raise StageError("consistency", "physical run did not reach the comparison time")
        errs = {}
        for fam, name in ((0, "w"), (1, "z"), (2, "a")):
            X = ps.X[fam]
            rel = np.mod(X - st.mod.xi + np.pi, 2 * np.pi) - np.pi
            vals = selfsim_values_at(st, st.mod.xi + rel)
            errs[name] = float(np.max(np.abs(vals[fam] - ps.V[fam])))
        slope = float(np.max(np.abs(particle_slopes(ps)[0])))
        rows.append({"s": st.mod.s, "t": t_k, "max_slope": slope, "err_w": errs["w"],
                     "err_z": errs["z"], "err_a": errs["a"]})
        progress("consistency", s=round(st.mod.s, 4), err_w=errs["w"])
    resolved = [r for r in rows if r["max_slope"] <= cfg.consistency_slope]
    sup = max((r["err_w"] for r in resolved), default=float("nan"))
    return {"rows": rows, "sup_err_w": sup, "passed": bool(np.isfinite(sup) and sup <= 1e-3)}


def _physical_stage(cfg, run_dir, progress):
    th, w0, z0, a0, validation = build_initial_data(cfg.data_config())
    progress("gen-data", passed=validation["passed"])
    prun = simulate(cfg.simulation_config(), w0, z0, a0)
    progress("simulate", stop=prun.stop_reason, steps=len(prun.series["t_tilde"]) - 1)
    if prun.stop_reason != "slope_stop":
        raise StageError("simulate", f"stopped by {prun.stop_reason}")
    try:
        rec = blowup_detect(prun)
    except FitQualityError as exc:
        raise StageError("blowup_detect", str(exc)) from exc
    band = rate_sandwich(prun, rec.T_star_est)
    bounds = physical_bounds(prun, cfg.nu0, cfg.M)
    # the reduction is checked on the resolved initial data; the final front is not grid-resolved
    fields2d = reconstruct_euler_fields(RiemannState(-cfg.epsilon, w0, z0, a0),
                                        np.array(cfg.annulus), prun.coeffs)
    theta, w, slope = final_profile(prun)
    write_csv(os.path.join(run_dir, "series.csv"), {k: prun.series[k] for k in sorted(prun.series)})
    order = np.argsort(theta)
    write_csv(os.path.join(run_dir, "final_w.csv"),
              {"theta": theta[order], "w": w[order], "slope": slope[order]})
    phys = {
        "blowup": rec.to_dict(),
        "time_to_blowup": rec.T_star_est - prun.series["t_tilde"][0],
        "rate_band": [float(band.min()), float(band.max())],
        "bounds": bounds,
        "reduced_residual_initial": fields2d.reduced_residual,
        "stop_reason": prun.stop_reason,
    }
    return validation, phys


def _selfsim_stage(cfg, run_dir, progress):
    srun = run_selfsim(cfg.selfsim_config(out_dir=os.path.join(run_dir, "selfsim")))
    progress("selfsim", stop=srun.stop_reason, s=round(srun.final.mod.s, 4))
    cert = {}
    for which in ("Z", "A"):
        s, obs, bound, lam_D, F0 = decay_certificate(srun, which)
        cert[which] = {"lambda_D": lam_D, "F0": F0, "min_gap": float(np.min(bound - obs)),
                       "ok": bool(np.all(obs <= bound))}
    r1, r2, r3 = profile_convergence(srun.final)
    return srun, {
        "bootstrap": srun.report.to_dict(),
        "stop_reason": srun.stop_reason,
        "T_star_est": srun.T_star_est,
        "theta_star_est": srun.theta_star_est,
        "clock_error": srun.clock_error,
        "decay_certificate": cert,
        "profile_convergence": {"wx_envelope_ratio": r1, "weighted_V": r2, "sharp_W_ratio": r3},
    }


def run_pipeline(cfg, progress=_quiet):
    """Run every stage into cfg.out_dir; returns (report dict, exit code)."""
    run_dir = cfg.out_dir or "run"
    os.makedirs(run_dir, exist_ok=True)
    write_json(os.path.join(run_dir, "config.json"), cfg.to_dict())
    report = {"config": cfg.to_dict(), "stages": [], "verdicts": {}}
    code = EXIT_OK
    try:
        if cfg.run_physical:
            validation, phys = _physical_stage(cfg, run_dir, progress)
            report["initial_data"] = {"passed": validation["passed"],
                                      "margins": {k: v["margin"] for k, v in
                                                  validation["conditions"].items()}}
            report["physical"] = phys
            report["stages"].append("physical")
            v = report["verdicts"]
            v["initial_data_admissible"] = validation["passed"]
            v["rate_sandwich"] = 0.45 <= phys["rate_band"][0] and phys["rate_band"][1] <= 2.2
            h = phys["blowup"]["holder_exponent"]
            v["holder_exponent"] = h is not None and 0.28 <= h <= 0.38
            b = phys["bounds"]
            v["physical_bounds"] = all(b[k] for k in ("density_ok", "vorticity_ok",
                                                       "a_theta_ok", "varpi_ok"))
        if cfg.run_selfsim:
            srun, ssr = _selfsim_stage(cfg, run_dir, progress)
            report["selfsim"] = ssr
            report["stages"].append("selfsim")
            v = report["verdicts"]
            boot = srun.report
            v["bootstrap_margins"] = boot.passed
            v["constraints"] = boot.constraint_max <= cfg.tol_c
            v["wxxx0_window"] = 5.0 <= boot.wxxx0_min and boot.wxxx0_max <= 7.0 \
                and abs(boot.wxxx0_final - 6.0) <= 0.2
            za = [boot.margins[f"ZA_decay_{n}"] >= 0 for n in (1, 2, 3, 4)]
            v["za_decay"] = all(za) and all(c["ok"] for c in ssr["decay_certificate"].values())
        if cfg.run_consistency:
            report["consistency"] = cross_solver_check(cfg, progress=progress)
            report["stages"].append("consistency")
            report["verdicts"]["cross_solver"] = report["consistency"]["passed"]
    except StageError as exc:
        report["failure"] = {"stage": exc.stage, "message": str(exc), "data": exc.data}
        code = EXIT_NUMERIC
    except (FloatingPointError, ValueError, RuntimeError) as exc:
        report["failure"] = {"stage": "numerics", "message": f"{type(exc).__name__}: {exc}"}
        code = EXIT_NUMERIC
    if code == EXIT_OK and not all(report["verdicts"].values()):
        code = EXIT_ACCEPT
    report["exit_code"] = code
    write_json(os.path.join(run_dir, "report.json"), report)
    if code in (EXIT_OK, EXIT_ACCEPT):
        emit_plotdata(run_dir)
    return report, code


def emit_plotdata(run_dir):
    """CSV bundles for plotting; returns the list of missing inputs."""
    missing = []
    rep_path = os.path.join(run_dir, "report.json")
    report = None
    if os.path.exists(rep_path):
        with open(rep_path) as fh:
            report = json.load(fh)
    else:
        missing.append("report.json")
    series_path = os.path.join(run_dir, "series.csv")
    if os.path.exists(series_path) and report and "physical" in report:
        s = read_csv(series_path)
        t_star = report["physical"]["blowup"]["T_star_est"]
        slope = s["max_slope_w"]
        sel = (slope >= slope[-1] / 10.0) & (s["t_tilde"] < t_star)
        gap = t_star - s["t_tilde"][sel]
        write_csv(os.path.join(run_dir, "sandwich.csv"),
                  {"t": s["t_tilde"][sel], "lower": 0.5 / gap, "upper": 2.0 / gap,
                   "slope": slope[sel]})
    else:
        missing.append("series.csv")
    prof_path = os.path.join(run_dir, "final_w.csv")
    if os.path.exists(prof_path):
        p = read_csv(prof_path)
        lr, lv, expo = holder_data(p["theta"], p["w"], p["slope"])
        write_csv(os.path.join(run_dir, "holder.csv"), {"log_r": lr, "log_dw": lv})
    else:
        missing.append("final_w.csv")
    sdir = os.path.join(run_dir, "selfsim")
    snaps = sorted(f for f in os.listdir(sdir) if f.startswith("ssnap_")) if os.path.isdir(sdir) else []
    if snaps:
        sn = read_csv(os.path.join(sdir, snaps[-1]))
        x = sn["x"]
        dev = np.abs(sn["Wx"] - sn["Wbar_x"])
        write_csv(os.path.join(run_dir, "overlay.csv"),
                  {"x": x, "W": sn["W"], "Wbar": bp.wbar(x), "Wx": sn["Wx"], "Wbar_x": sn["Wbar_x"],
                   "weighted_residual": (np.abs(x) ** (2.0 / 3.0) + 8.0) * dev})
    else:
        missing.append("selfsim/ssnap_*.csv")
    return missing


def _sweep_one(args):
    base, gamma, out = args
    cfg = RunConfig.from_dict({**base, "gamma": gamma, "out_dir": out})
    return gamma, run_pipeline(cfg)[1]


def sweep(base, gammas, out_root, workers=None):
    """One independent pipeline per gamma, in `workers` processes."""
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    jobs = [(base, float(g), os.path.join(out_root, f"gamma_{float(g):g}")) for g in gammas]
    if workers <= 1:
        results = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_one, jobs))
    return {f"{g:g}": code for g, code in results}


# ---------------------------------------------------------------- command line

def _cmd_profile(a, log):
    table = bp.profile_table(a.xmin, a.xmax, a.n, a.log)
    rep = bp.check_damping_inequalities(table["x"])
    if a.out:
        write_csv(a.out, table)
    log("profile", n=a.n, min_margin_a=rep.min_a, min_margin_b=rep.min_b,
        steady_residual=bp.steady_residual(table["x"]))
    return EXIT_OK if rep.ok else EXIT_ACCEPT


def _cmd_burgers3(a, log):
    datum = g3.BUILTIN_DATA[a.datum](**({"epsilon": a.epsilon} if a.datum == "tanh_front" else {}))
    t_star, theta_star, theta0 = g3.blowup_predict(datum, n=a.n)
    out = {"datum": a.datum, "T_star": t_star, "theta_star": theta_star, "theta0": theta0}
    if a.simulate:
        th = g3.periodic_grid(a.n)
        w0 = datum.value(th)
        cfg = SimulationConfig(gamma=3.0, grid_n=a.n, scheme="lagrangian", cfl=0.1, slope_stop=1e4)
        run = simulate(cfg, w0, np.zeros_like(w0), np.zeros_like(w0))
        rec = blowup_detect(run)
        out["simulated"] = rec.to_dict()
    if a.out:
        os.makedirs(a.out, exist_ok=True)
        write_json(os.path.join(a.out, "burgers3.json"), out)
        for i, t in enumerate(a.times):
            th, w, br = g3.snapshot(datum, t, a.n, continue_past_blowup=True, t_star=t_star)
            write_csv(os.path.join(a.out, f"snap_{i:04d}.csv"), {"theta": th, "w": w, "branch": br})
    print(json.dumps(_clean(out), sort_keys=True))
    return EXIT_OK


def _cmd_gen_data(a, log):
    cfg = DataConfig(epsilon=a.epsilon, kappa0=a.kappa0, nu0=a.nu0, alpha=a.alpha,
                     grid_n=a.grid_n, profile=a.profile, za_mode=a.za_mode)
    th, w0, z0, a0, rep = build_initial_data(cfg)
    bundle = {"grid": th, "w0": w0, "z0": z0, "a0": a0, "config": cfg.to_dict(),
              "validation_report": rep}
    write_json(a.out, bundle)
    log("gen-data", passed=rep["passed"])
    return EXIT_OK if rep["passed"] else EXIT_ACCEPT


def _cmd_verify(a, log):
    path = a.path
    if os.path.isdir(path):
        with open(os.path.join(path, "report.json")) as fh:
            rep = json.load(fh)
        if "failure" in rep:
            return EXIT_NUMERIC
        bad = [k for k, v in rep.get("verdicts", {}).items() if not v]
        log("verify", failing=bad)
        return EXIT_ACCEPT if bad else EXIT_OK
    with open(path) as fh:
        bundle = json.load(fh)
    cfg = DataConfig(**{k: (tuple(v) if isinstance(v, list) else v)
                        for k, v in bundle["config"].items()})
    rep = validate_initial_data(np.array(bundle["w0"]), np.array(bundle["z0"]),
                                np.array(bundle["a0"]), cfg)
    bad = [k for k, v in rep["conditions"].items() if not v["passed"]]
    log("verify", failing=bad)
    return EXIT_OK if rep["passed"] else EXIT_ACCEPT


def _cmd_fit_holder(a, log):
    p = read_csv(a.csv)
    if "slope" not in p:
        raise ConfigError("CSV needs columns theta, w, slope")
    lr, lv, expo = holder_data(p["theta"], p["w"], p["slope"])
    print(json.dumps(_clean({"holder_exponent": expo, "points": len(lr)}), sort_keys=True))
    return EXIT_OK


def _cmd_simulate(a, log):
    cfg = load_config(a.config)
    cfg.run_selfsim = False
    cfg.run_consistency = False
    if a.out:
        cfg.out_dir = a.out
    return run_pipeline(cfg, log)[1]


def _cmd_selfsim(a, log):
    cfg = load_config(a.config)
    cfg.run_physical = False
    cfg.run_consistency = False
    if a.out:
        cfg.out_dir = a.out
    return run_pipeline(cfg, log)[1]


def _cmd_sweep(a, log):
    with open(a.config) as fh:
        base = json.load(fh)
    base.pop("gamma", None)
    base.pop("out_dir", None)
    RunConfig.from_dict({**base, "gamma": 2.0})  # schema check before spawning
    gammas = [float(g) for g in a.gammas.split(",")]
    codes = sweep(base, gammas, a.out, a.workers)
    log("sweep", codes=codes)
    return max(codes.values()) if codes else EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="eulershock", description=__doc__.split("\n\n")[0])
    p.add_argument("--json-log", action="store_true", help="progress as JSON lines on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("profile", help="tabulate Wbar, its derivatives and damping margins")
    q.add_argument("--xmin", type=float, default=1e-6)
    q.add_argument("--xmax", type=float, default=1e4)
    q.add_argument("--n", type=int, default=10001)
    q.add_argument("--log", action="store_true")
    q.add_argument("--out", default="")
    q.set_defaults(func=_cmd_profile)

    q = sub.add_parser("burgers3", help="exact gamma = 3 blowup and snapshots")
    q.add_argument("--datum", choices=sorted(g3.BUILTIN_DATA), default="tanh_front")
    q.add_argument("--epsilon", type=float, default=0.1)
    q.add_argument("--n", type=int, default=4096)
    q.add_argument("--times", type=float, nargs="*", default=[])
    q.add_argument("--simulate", action="store_true")
    q.add_argument("--out", default="")
    q.set_defaults(func=_cmd_burgers3)

    for name, fn, text in (("simulate", _cmd_simulate, "physical run up to the slope threshold"),
                           ("selfsim", _cmd_selfsim, "modulated self-similar run")):
        q = sub.add_parser(name, help=text)
        q.add_argument("--config", required=True)
        q.add_argument("--out", default="")
        q.set_defaults(func=fn)

    q = sub.add_parser("gen-data", help="construct and validate initial data")
    q.add_argument("--epsilon", type=float, default=0.05)
    q.add_argument("--kappa0", type=float, default=0.0)
    q.add_argument("--nu0", type=float, default=1e-10)
    q.add_argument("--alpha", type=float, default=0.5)
    q.add_argument("--grid-n", type=int, default=1 << 14)
    q.add_argument("--profile", choices=["cutoff", "envelope"], default="envelope")
    q.add_argument("--za-mode", choices=["bump", "zero"], default="bump")
    q.add_argument("--out", required=True)
    q.set_defaults(func=_cmd_gen_data)

    q = sub.add_parser("verify", help="re-check a data bundle or a run directory")
    q.add_argument("path")
    q.set_defaults(func=_cmd_verify)

    q = sub.add_parser("fit-holder", help="Hoelder exponent from a theta,w,slope CSV")
    q.add_argument("csv")
    q.set_defaults(func=_cmd_fit_holder)

    q = sub.add_parser("sweep", help="one pipeline per gamma")
    q.add_argument("--config", required=True)
    q.add_argument("--gammas", default="1.4,2,3")
    q.add_argument("--out", required=True)
    q.add_argument("--workers", type=int, default=None)
    q.set_defaults(func=_cmd_sweep)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    log = Progress(args.json_log)
    t0 = time.perf_counter()
    try:
        code = args.func(args, log)
    except ConfigError as exc:
        log("error", kind="config", message=str(exc))
        return EXIT_CONFIG
    except (StageError, FitQualityError, FloatingPointError) as exc:
        log("error", kind="numerics", message=str(exc))
        return EXIT_NUMERIC
    log("done", command=args.command, exit_code=code, seconds=round(time.perf_counter() - t0, 3))
    return code


if __name__ == "__main__":
    sys.exit(main())
