"""
Modulated self-similar evolution of the (W, Z, A) system near a forming shock.

With modulation variables tau(t), xi(t), kappa(t) the coordinates are

    x = (theta - xi) / (tau - t)^{3/2},   s = -log(tau - t),
    w = kappa + e^{-s/2} W(x, s),   z = Z(x, s),   a = A(x, s).

The three modulation rates are fixed by the constraints W = 0, W_x = -1,
W_xx = 0 at x = 0, so W_xxx(0, s) stays close to 6 and W close to the steady
profile Wbar.  Time here is the rescaled clock of the physical solver.

The solver uses a symmetric graded grid (uniform core, geometric stretching),
nonuniform 8th-order first-derivative stencils and RK4 in s; an optional
speed-weighted hyper-dissipation is off by default.  Drift of the three
constraints is removed by a projection onto a flat bump supported in
|x| < 1/2.
"""

import csv
import json
import os
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.interpolate import PchipInterpolator, make_interp_spline

from .burgers_profile import eval_profile
from .datagen import DataConfig, make_w0, make_z0_a0, smooth_step
from .physical_solver import Coefficients, RiemannState, periodic_grid
from .stencils import GradedStencil, fornberg_weights

TWO_PI = 2.0 * np.pi
_GHOST = 4
_D8 = np.array([1, -8, 28, -56, 70, -56, 28, -8, 1], dtype=float)


class DegenerateThirdDerivative(RuntimeError):
    """W_xxx(0, s) fell below the operational floor."""


class ClockReversal(RuntimeError):
    """tau_dot reached 1, so s stops being a valid time variable."""


def graded_axis(h_core, x_core, ratio, x_max, ghosts=0):
    """Sorted symmetric grid: spacing h_core up to x_core, then growing by `ratio`.

    `ghosts` extra nodes continue the stretching beyond x_max on each side.
    """
    if not (h_core > 0 and x_core > 0 and ratio >= 1.0 and x_max > x_core):
        raise ValueError("need h_core, x_core > 0, ratio >= 1, x_max > x_core")
    k = int(round(x_core / h_core))
    right = list(h_core * np.arange(k + 1))
    h = h_core
    while right[-1] < x_max:
        h *= ratio
        right.append(right[-1] + h)
    for _ in range(ghosts):
        h *= ratio
        right.append(right[-1] + h)
    right = np.array(right)
    return np.concatenate([-right[:0:-1], right])


class SelfSimGrid:
    """Graded x-grid plus cached stencils, origin weights and Wbar samples."""

    def __init__(self, h_core=0.05, x_core=20.0, ratio=1.02, x_max=1e3, origin_width=11):
        self.x_ext = graded_axis(h_core, x_core, ratio, x_max, ghosts=_GHOST)
        self.x = self.x_ext[_GHOST:-_GHOST]
        self.h_core = h_core
        self.x_core = x_core
        self.ratio = ratio
        self.n = len(self.x)
        self.i0 = self.n // 2
        if self.x[self.i0] != 0.0:
            raise RuntimeError("grid is not centred at x = 0")
        self.spacing = 0.5 * (self.x_ext[_GHOST + 1:len(self.x_ext) - _GHOST + 1]
                              - self.x_ext[_GHOST - 1:len(self.x_ext) - _GHOST - 1])
        self.stencil = GradedStencil(self.x_ext, width=9, max_order=4)
        half = origin_width // 2
        self.origin_index = np.arange(self.i0 - half, self.i0 + half + 1)
        self.origin_weights = fornberg_weights(0.0, self.x[self.origin_index], 4)
        self.profile = eval_profile(self.x)
        # nodes whose stencils stay off the padded edge values
        self.interior = np.zeros(self.n, dtype=bool)
        self.interior[_GHOST:-_GHOST] = True
        self.bump = smooth_step(2.0 * np.abs(self.x))
        xb = self.x
        basis = [self.bump, xb * self.bump, 0.5 * xb * xb * self.bump]
        self.basis = np.array(basis)
        self.projector = np.array([[self.at_origin(b, k) for b in basis] for k in range(3)])

    @property
    def x_max(self):
        return float(self.x[-1])

    def pad(self, f):
        return np.pad(f, _GHOST, mode="edge")

    def derivative(self, f, order=1):
        return self.stencil.apply(self.pad(f), order)[_GHOST:-_GHOST]

    def at_origin(self, f, order=0):
        return float(self.origin_weights[order] @ f[self.origin_index])

    def eighth_difference(self, f):
        fe = self.pad(f)
        n = len(f)
        out = np.zeros(n)
        for k, c in enumerate(_D8):
            out += c * fe[k:k + n]
        return out


@dataclass
class ModulationState:
    s: float
    t: float
    tau: float
    xi: float
    kappa: float
    tau_dot: float = 0.0
    xi_dot: float = 0.0
    kappa_dot: float = 0.0

    def copy(self):
        return ModulationState(**asdict(self))


@dataclass
class SelfSimState:
    grid: SelfSimGrid
    W: np.ndarray
    Z: np.ndarray
    A: np.ndarray
    mod: ModulationState

    @property
    def s(self):
        return self.mod.s

    @property
    def x(self):
        return self.grid.x

    def copy(self):
        return SelfSimState(self.grid, self.W.copy(), self.Z.copy(), self.A.copy(),
                            self.mod.copy())


# ---------------------------------------------------------------- coordinates

def _periodic_spline(theta, f, kind):
    if kind == "pchip":
        th = np.concatenate([theta, [theta[0] + TWO_PI]])
        return PchipInterpolator(th, np.concatenate([f, [f[0]]]))
    th = np.concatenate([theta, [theta[0] + TWO_PI]])
    return make_interp_spline(th, np.concatenate([f, [f[0]]]), k=5, bc_type="periodic")


def to_selfsim(state, mod, grid, interp="quintic"):
    """Resample a periodic physical state onto the self-similar grid."""
    if not mod.tau > state.t_tilde:
        raise ValueError("tau must exceed t")
    s = -np.log(mod.tau - state.t_tilde)
    theta = state.theta
    # points outside one period around xi carry the far-field value
    dth = np.clip(grid.x * np.exp(-1.5 * s), -np.pi, np.pi - 1e-12)
    q = np.mod(mod.xi + dth + np.pi, TWO_PI) - np.pi
    w = _periodic_spline(theta, state.w, interp)(q)
    z = _periodic_spline(theta, state.z, interp)(q)
    a = _periodic_spline(theta, state.a, interp)(q)
    m = mod.copy()
    m.s = s
    m.t = state.t_tilde
    return SelfSimState(grid, np.exp(0.5 * s) * (w - mod.kappa), z, a, m)


def from_selfsim(ss, n=4096, interp="quintic"):
    """Periodic physical state on n nodes from a self-similar state."""
    theta = periodic_grid(n)
    m = ss.mod
    d = np.mod(theta - m.xi + np.pi, TWO_PI) - np.pi
    x = np.clip(d * np.exp(1.5 * m.s), ss.x[0], ss.x[-1])
    if interp == "pchip":
        ev = [PchipInterpolator(ss.x, f)(x) for f in (ss.W, ss.Z, ss.A)]
    else:
        ev = [make_interp_spline(ss.x, f, k=5)(x) for f in (ss.W, ss.Z, ss.A)]
    w = m.kappa + np.exp(-0.5 * m.s) * ev[0]
    return RiemannState(m.t, w, ev[1], ev[2])


def selfsim_values_at(ss, theta):
    """(w, z, a) of the self-similar state at arbitrary angles (line, not wrapped)."""
    m = ss.mod
    x = np.clip((np.asarray(theta) - m.xi) * np.exp(1.5 * m.s), ss.x[0], ss.x[-1])
    W, Z, A = (make_interp_spline(ss.x, f, k=5)(x) for f in (ss.W, ss.Z, ss.A))
    return m.kappa + np.exp(-0.5 * m.s) * W, Z, A


# ---------------------------------------------------------------- dynamics

def _forcing(W, Z, A, kappa, s, c):
    """(1 - tau_dot) times the forcing terms of the W, Z, A equations."""
    e1 = np.exp(-0.5 * s)
    e2 = e1 * e1
    U = e1 * W + kappa
    fw = -e1 * A * (c.beta1 * Z + c.beta2 * U)
    fz = -e2 * A * (c.beta1 * U + c.beta2 * Z)
    fa = e2 * c.beta3 * (-2.0 * A * A + 0.5 * (U + Z) ** 2 - 0.5 * c.alpha * (U - Z) ** 2)
    return fw, fz, fa


def _rates(grid, W, Z, A, kappa, s, c, floor):
    es = np.exp(0.5 * s)
    fw, fz, fa = _forcing(W, Z, A, kappa, s, c)
    z0 = grid.at_origin(Z, 0)
    zx0 = grid.at_origin(Z, 1)
    zxx0 = grid.at_origin(Z, 2)
    f0 = grid.at_origin(fw, 0)
    fx0 = grid.at_origin(fw, 1)
    fxx0 = grid.at_origin(fw, 2)
    wxxx0 = grid.at_origin(W, 3)
    tau_dot = fx0 + c.beta0 * es * zx0
    if tau_dot >= 1.0:
        raise ClockReversal(f"tau_dot = {tau_dot} at s = {s}")
    om = 1.0 - tau_dot
    if abs(wxxx0) < floor:
        raise DegenerateThirdDerivative(f"W_xxx(0) = {wxxx0} at s = {s}")
    g0 = (fxx0 + c.beta0 * es * zxx0) / (om * wxxx0)
    xi_dot = kappa + c.beta0 * z0 - om * g0 / es
    kappa_dot = om * es * g0 + es * f0
    return tau_dot, xi_dot, kappa_dot, g0, z0, (fw, fz, fa)


def modulation_rhs(ss, coeffs, floor=2.0):
    """(tau_dot, xi_dot, kappa_dot) enforcing the three constraints at x = 0."""
    td, xd, kd = _rates(ss.grid, ss.W, ss.Z, ss.A, ss.mod.kappa, ss.mod.s, coeffs, floor)[:3]
    return td, xd, kd


def _speeds(grid, W, Z, kappa, s, rates, c):
    tau_dot, xi_dot, _, g0, z0, _ = rates
    es = np.exp(0.5 * s)
    om = 1.0 - tau_dot
    x = grid.x
    gw = g0 + c.beta0 * es * (Z - z0) / om
    vw = gw + 1.5 * x + W / om
    vz = 1.5 * x + (es * (c.beta0 * kappa - xi_dot) + c.beta0 * W + es * Z) / om
    va = 1.5 * x + (es * (c.beta3 * (Z + kappa) - xi_dot) + c.beta3 * W) / om
    return vw, vz, va


def _field_rhs(grid, W, Z, A, kappa, s, c, dissipation, floor):
    rates = _rates(grid, W, Z, A, kappa, s, c, floor)
    tau_dot, xi_dot, kappa_dot, _, _, (fw, fz, fa) = rates
    om = 1.0 - tau_dot
    vw, vz, va = _speeds(grid, W, Z, kappa, s, rates, c)
    rw = 0.5 * W - vw * grid.derivative(W) + (fw - np.exp(-0.5 * s) * kappa_dot) / om
    rz = -vz * grid.derivative(Z) + fz / om
    ra = -va * grid.derivative(A) + fa / om
    if dissipation > 0.0:
        k = dissipation / 256.0 / grid.spacing
        rw -= k * np.abs(vw) * grid.eighth_difference(W)
        rz -= k * np.abs(vz) * grid.eighth_difference(Z)
        ra -= k * np.abs(va) * grid.eighth_difference(A)
    return (rw, rz, ra), rates, (vw, vz, va)


def selfsim_rhs(ss, coeffs, dissipation=0.0, floor=2.0):
    """s-derivatives (W_s, Z_s, A_s)."""
    m = ss.mod
    return _field_rhs(ss.grid, ss.W, ss.Z, ss.A, m.kappa, m.s, coeffs, dissipation, floor)[0]


def _full_rhs(grid, y, s, c, dissipation, floor):
    W, Z, A, ode = y
    (rw, rz, ra), rates, _ = _field_rhs(grid, W, Z, A, ode[2], s, c, dissipation, floor)
    tau_dot, xi_dot, kappa_dot = rates[:3]
    dt = np.exp(-s) / (1.0 - tau_dot)
    # ode = (tau, xi, kappa, t)
    return (rw, rz, ra, np.array([tau_dot * dt, xi_dot * dt, kappa_dot * dt, dt]))


def _axpy(y, k, h):
    return tuple(a + h * b for a, b in zip(y, k))


def project_constraints(ss, tol_c=1e-6, mode="threshold"):
    """Remove drift of W(0), W_x(0)+1, W_xx(0) with the bump basis; returns |c|_1."""
    g = ss.grid
    drift = np.array([g.at_origin(ss.W, 0), g.at_origin(ss.W, 1) + 1.0, g.at_origin(ss.W, 2)])
    if mode == "never" or (mode == "threshold" and np.max(np.abs(drift)) <= 0.1 * tol_c):
        return 0.0
    coef = np.linalg.solve(g.projector, drift)
    ss.W = ss.W - coef @ g.basis
    return float(np.sum(np.abs(coef)))


def stable_ds(ss, coeffs, cfl=0.8, floor=2.0):
    m = ss.mod
    rates = _rates(ss.grid, ss.W, ss.Z, ss.A, m.kappa, m.s, coeffs, floor)
    v = np.maximum.reduce([np.abs(u) for u in _speeds(ss.grid, ss.W, ss.Z, m.kappa, m.s, rates, coeffs)])
    return cfl * float(np.min(ss.grid.spacing / np.maximum(v, 1.0)))


def selfsim_step(ss, ds, coeffs, dissipation=0.0, floor=2.0, tol_c=1e-6, project="threshold"):
    """One RK4 step in s of fields and (tau, xi, kappa, t); returns (state, projection size)."""
    g = ss.grid
    m = ss.mod
    s = m.s
    y = (ss.W, ss.Z, ss.A, np.array([m.tau, m.xi, m.kappa, m.t]))
    k1 = _full_rhs(g, y, s, coeffs, dissipation, floor)
    k2 = _full_rhs(g, _axpy(y, k1, 0.5 * ds), s + 0.5 * ds, coeffs, dissipation, floor)
    k3 = _full_rhs(g, _axpy(y, k2, 0.5 * ds), s + 0.5 * ds, coeffs, dissipation, floor)
    k4 = _full_rhs(g, _axpy(y, k3, ds), s + ds, coeffs, dissipation, floor)
    new = tuple(a + ds / 6.0 * (b + 2 * c2 + 2 * c3 + d)
                for a, b, c2, c3, d in zip(y, k1, k2, k3, k4))
    W, Z, A, ode = new
    out = SelfSimState(g, W, Z, A, ModulationState(s + ds, ode[3], ode[0], ode[1], ode[2]))
    size = project_constraints(out, tol_c, project)
    td, xd, kd = modulation_rhs(out, coeffs, floor)
    out.mod.tau_dot, out.mod.xi_dot, out.mod.kappa_dot = td, xd, kd
    return out, size


# ---------------------------------------------------------------- monitors

def transport_bound(f0_norm, lambda_D, F0, lambda_F, s0, s):
    """Sup bound for f_s + V f_x + D f = F with D >= lambda_D and |F| <= F0 e^{-lambda_F s}."""
    if lambda_D == lambda_F:
        raise ValueError("lambda_D and lambda_F must differ")
    s = np.asarray(s, dtype=float)
    decay = f0_norm * np.exp(-lambda_D * (s - s0))
    if lambda_F < lambda_D:
        return decay + F0 / (lambda_D - lambda_F) * np.exp(-lambda_F * s)
    return decay + F0 * np.exp(-s0 * lambda_F) / (lambda_F - lambda_D) * np.exp(-lambda_D * (s - s0))


def profile_convergence(ss):
    """(sup |W_x - Wbar_x| 20(1+x^2)/x^2, sup |V|, sup |W| / (6|x|^{1/3}))  each should be <= 1."""
    x = ss.x
    keep = ss.grid.interior
    dev = np.abs(ss.grid.derivative(ss.W) - ss.grid.profile.d1)
    nz = (x != 0.0) & keep
    r1 = float(np.max(dev[nz] * 20.0 * (1 + x[nz] ** 2) / x[nz] ** 2))
    r2 = float(np.max(((np.abs(x) ** (2.0 / 3.0) + 8.0) * dev)[keep]))
    far = (np.abs(x) >= 1e-3) & keep
    r3 = float(np.max(np.abs(ss.W[far]) / (6.0 * np.abs(x[far]) ** (1.0 / 3.0))))
    return r1, r2, r3


@dataclass
class BootstrapReport:
    epsilon: float
    M: float
    kappa0: float
    delta: float
    ell: float
    margins: dict = field(default_factory=dict)
    where: dict = field(default_factory=dict)
    wxxx0_min: float = np.inf
    wxxx0_max: float = -np.inf
    wxxx0_final: float = np.nan
    constraint_max: float = 0.0
    projection_total: float = 0.0
    projection_rate: float = 0.0
    degenerate_floor_hit: bool = False
    samples: int = 0

    def update(self, name, margin, s):
        margin = float(margin)
        if not np.isfinite(margin):
            margin = -np.inf
        if name not in self.margins or margin < self.margins[name]:
            self.margins[name] = margin
            self.where[name] = float(s)

    @property
    def passed(self):
        return bool(self.margins) and all(v >= 0.0 for v in self.margins.values())

    def failing(self):
        return {k: v for k, v in self.margins.items() if v < 0.0}

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        for k, v in list(d.items()):
            if isinstance(v, float) and not np.isfinite(v):
                d[k] = None
        d["margins"] = {k: (v if np.isfinite(v) else None) for k, v in self.margins.items()}
        return d


def new_report(epsilon, M, kappa0, alpha):
    return BootstrapReport(epsilon, M, kappa0, min(alpha, 1.0) / (2.0 * (1.0 + alpha)),
                           1.0 / (40.0 * M))


def derivative_norms(ss, nmax=4):
    """Sup norms of d^n W, d^n Z, d^n A for n = 1..nmax (repeated stencils)."""
    g = ss.grid
    out = {}
    for name, f in (("W", ss.W), ("Z", ss.Z), ("A", ss.A)):
        out[name] = [float(np.max(np.abs(g.derivative(f, n)))) for n in range(1, nmax + 1)]
    return out


def bootstrap_monitor(ss, report, coeffs=None):
    """Evaluate every monitored inequality at the current s and fold it into `report`."""
    g = ss.grid
    m = ss.mod
    s = m.s
    x = g.x
    eps, M = report.epsilon, report.M
    up = report.update
    up("kappa", 2.0 * report.kappa0 - abs(m.kappa), s)
    up("tau", eps ** 1.25 - abs(m.tau), s)
    up("xi", 6.0 * M * eps - abs(m.xi), s)
    up("kappa_dot", M ** 3 - abs(m.kappa_dot), s)
    up("tau_dot", eps ** 0.25 - abs(m.tau_dot), s)
    up("xi_dot", 3.0 * M - abs(m.xi_dot), s)

    d = {n: g.derivative(ss.W, n) for n in (1, 2, 3, 4)}
    up("W_xxx_sup", M ** 0.75 - np.max(np.abs(d[3])), s)
    up("W_xxxx_sup", M - np.max(np.abs(d[4])), s)
    wxxx0 = g.at_origin(ss.W, 3)
    ell = report.ell
    far = np.abs(x) > ell
    dev = np.abs(d[1] - g.profile.d1)
    env = x * x / (20.0 * (1.0 + x * x))
    up("Wx_deviation_far", np.min(env[far] - dev[far]), s)
    # inside |x| <= ell the deviation is (W_xxx(0) - 6) x^2 / 2 to leading order
    up("Wx_deviation_near", 1.0 / 20.0 - 0.5 * abs(wxxx0 - 6.0), s)
    up("W_xx_far", np.min(12.0 * np.abs(x[far]) / np.sqrt(1 + x[far] ** 2) - np.abs(d[2][far])), s)
    up("W_xx_near", 12.0 - abs(wxxx0), s)
    up("W_xxx0_window", 1.0 - abs(wxxx0 - 6.0), s)
    delta = report.delta
    dz = {n: np.max(np.abs(g.derivative(ss.Z, n))) for n in (1, 2, 3, 4)}
    da = {n: np.max(np.abs(g.derivative(ss.A, n))) for n in (1, 2, 3, 4)}
    for n in (1, 2, 3, 4):
        up(f"ZA_decay_{n}", M * np.exp(-(0.5 + delta) * s) - (dz[n] + da[n]), s)
    weighted = (np.abs(x) ** (2.0 / 3.0) + 8.0) * dev
    up("weighted_V", 1.0 - np.max(weighted), s)
    nz = np.abs(x) >= 1e-3
    up("sharp_Wx", 1.0 - np.max(np.abs(d[1][nz]) * np.abs(x[nz]) ** (2.0 / 3.0) / 2.0), s)
    up("sharp_W", 1.0 - np.max(np.abs(ss.W[nz]) / (6.0 * np.abs(x[nz]) ** (1.0 / 3.0))), s)
    cons = max(abs(g.at_origin(ss.W, 0)), abs(g.at_origin(ss.W, 1) + 1.0), abs(g.at_origin(ss.W, 2)))
    report.constraint_max = max(report.constraint_max, cons)
    report.wxxx0_min = min(report.wxxx0_min, wxxx0)
    report.wxxx0_max = max(report.wxxx0_max, wxxx0)
    report.wxxx0_final = wxxx0
    report.samples += 1
    return {"s": s, "Wxxx0": wxxx0, "dZ": [dz[n] for n in (1, 2, 3, 4)],
            "dA": [da[n] for n in (1, 2, 3, 4)], "constraint": cons}


def damping_and_forcing_x(ss, coeffs):
    """min_x V_x for the Z and A speeds and sup |d_x F| of their forcing (Lemma-style inputs)."""
    g = ss.grid
    m = ss.mod
    rates = _rates(g, ss.W, ss.Z, ss.A, m.kappa, m.s, coeffs, 0.0)
    _, vz, va = _speeds(g, ss.W, ss.Z, m.kappa, m.s, rates, coeffs)
    om = 1.0 - rates[0]
    fz, fa = rates[5][1] / om, rates[5][2] / om
    return (float(np.min(g.derivative(vz))), float(np.max(np.abs(g.derivative(fz)))),
            float(np.min(g.derivative(va))), float(np.max(np.abs(g.derivative(fa)))))


# ---------------------------------------------------------------- driver

@dataclass
class SelfSimConfig:
    gamma: float = 2.0
    epsilon: float = 0.05
    kappa0: float = 0.0          # 0 selects the floor from nu0
    nu0: float = 1e-10
    M: float = 40.0
    x_core: float = 20.0
    h_core: float = 0.05
    stretch_ratio: float = 1.02
    s_span: float = 6.0
    tol_c: float = 1e-6
    cfl: float = 0.8
    dissipation: float = 0.0
    wxxx0_floor: float = 2.0
    monitor_every: int = 10
    snapshot_every: int = 0
    profile: str = "envelope"
    za_mode: str = "bump"
    project: str = "threshold"
    ds_fixed: float = 0.0        # > 0 forces a constant step (convergence studies)
    max_steps: int = 10 ** 6
    out_dir: str = ""

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError("gamma must exceed 1")
        if self.tol_c <= 0 or self.s_span <= 0 or self.cfl <= 0:
            raise ValueError("tol_c, s_span and cfl must be positive")

    @property
    def s0(self):
        return -np.log(self.epsilon)

    def data_config(self):
        al = 0.5 * (self.gamma - 1.0)
        return DataConfig(epsilon=self.epsilon, kappa0=self.kappa0, nu0=self.nu0, alpha=al,
                          profile=self.profile, za_mode=self.za_mode)


def initial_state(cfg, grid=None):
    """Self-similar state at s0 = -log eps, tau = xi = 0, t = -eps, from the datagen construction."""
    dc = cfg.data_config()
    eps = cfg.epsilon
    s_max = cfg.s0 + cfg.s_span
    if grid is None:
        x_max = max(1e3, TWO_PI * np.exp(1.5 * s_max))
        grid = SelfSimGrid(cfg.h_core, cfg.x_core, cfg.stretch_ratio, x_max)
    theta = np.clip(grid.x * eps ** 1.5, -np.pi, np.pi)
    w0 = make_w0(dc, theta)
    z0, a0 = make_z0_a0(dc, theta)
    W = (w0 - dc.kappa0) / np.sqrt(eps)
    mod = ModulationState(cfg.s0, -eps, 0.0, 0.0, dc.kappa0)
    return SelfSimState(grid, W, z0, a0, mod), dc


@dataclass
class SelfSimRun:
    config: SelfSimConfig
    coeffs: Coefficients
    kappa0: float
    modulation: dict
    monitor: list
    report: BootstrapReport
    final: SelfSimState
    snapshots: list
    marks: list
    decay: dict
    stop_reason: str
    clock_error: float
    T_star_est: float
    theta_star_est: float


_MOD_KEYS = ("s", "t", "tau", "xi", "kappa", "tau_dot", "xi_dot", "kappa_dot", "Wxxx0")


def snapshot_columns(ss):
    return {"x": ss.x, "W": ss.W, "Z": ss.Z, "A": ss.A,
            "Wx": ss.grid.derivative(ss.W), "Wbar_x": ss.grid.profile.d1}


def run_selfsim(cfg, state=None, s_marks=(), callback=None):
    """Evolve from s0 to s0 + s_span, monitoring every bootstrap inequality.

    `s_marks` are self-similar times at which the step is shortened so that a
    copy of the state lands exactly there (used by cross-solver comparisons).
    """
    coeffs = Coefficients.from_gamma(cfg.gamma)
    if state is None:
        state, dc = initial_state(cfg)
        kappa0 = dc.kappa0
    else:
        kappa0 = state.mod.kappa
    report = new_report(cfg.epsilon, cfg.M, kappa0, coeffs.alpha)
    ss = state.copy()
    report.projection_total += project_constraints(ss, cfg.tol_c, cfg.project)
    ss.mod.tau_dot, ss.mod.xi_dot, ss.mod.kappa_dot = modulation_rhs(ss, coeffs, cfg.wxxx0_floor)
    s_end = ss.mod.s + cfg.s_span
    s_start = ss.mod.s
    marks = sorted(float(v) for v in s_marks if s_start < v <= s_end)
    mod_series = {k: [] for k in _MOD_KEYS}
    monitor = []
    snapshots = []
    marked = []
    decay = {"s": [], "vz_x_min": [], "fz_x_sup": [], "va_x_min": [], "fa_x_sup": []}
    clock_error = 0.0

    def record(st):
        m = st.mod
        for k, v in zip(_MOD_KEYS, (m.s, m.t, m.tau, m.xi, m.kappa, m.tau_dot, m.xi_dot,
                                    m.kappa_dot, st.grid.at_origin(st.W, 3))):
            mod_series[k].append(float(v))

    def observe(st):
        monitor.append(bootstrap_monitor(st, report, coeffs))
        vzx, fzx, vax, fax = damping_and_forcing_x(st, coeffs)
        decay["s"].append(st.mod.s)
        decay["vz_x_min"].append(vzx)
        decay["fz_x_sup"].append(fzx)
        decay["va_x_min"].append(vax)
        decay["fa_x_sup"].append(fax)

    record(ss)
    observe(ss)
    stop = "s_span reached"
    step = 0
    while ss.mod.s < s_end - 1e-12:
        if step >= cfg.max_steps:
            stop = "max_steps"
            break
        ds = cfg.ds_fixed if cfg.ds_fixed > 0 else stable_ds(ss, coeffs, cfg.cfl, cfg.wxxx0_floor)
        ds = min(ds, s_end - ss.mod.s)
        hit = None
        if marks and ss.mod.s + ds >= marks[0] - 1e-12:
            ds = marks[0] - ss.mod.s
            hit = marks.pop(0)
        try:
            ss, size = selfsim_step(ss, ds, coeffs, cfg.dissipation, cfg.wxxx0_floor,
                                    cfg.tol_c, cfg.project)
        except DegenerateThirdDerivative as exc:
            report.degenerate_floor_hit = True
            stop = f"degenerate: {exc}"
            break
        except ClockReversal as exc:
            stop = f"clock: {exc}"
            break
        if hit is not None:
            ss.mod.s = hit
        report.projection_total += size
        step += 1
        m = ss.mod
        clock_error = max(clock_error, abs(np.exp(-m.s) - (m.tau - m.t)))
        record(ss)
        if step % max(cfg.monitor_every, 1) == 0:
            observe(ss)
        if cfg.snapshot_every and step % cfg.snapshot_every == 0:
            snapshots.append((m.s, snapshot_columns(ss)))
        if hit is not None:
            marked.append(ss.copy())
        if callback is not None:
            callback(ss)
        if not all(np.all(np.isfinite(f)) for f in (ss.W, ss.Z, ss.A)):
            stop = "non-finite state"
            break
    if decay["s"][-1] != ss.mod.s:
        observe(ss)
    span = max(ss.mod.s - s_start, 1e-300)
    report.projection_rate = report.projection_total / span
    m = ss.mod
    T_star = m.t + (m.tau - m.t) / (1.0 - m.tau_dot)
    theta_star = m.xi + m.xi_dot * (T_star - m.t)
    snapshots.append((m.s, snapshot_columns(ss)))
    run = SelfSimRun(cfg, coeffs, kappa0, {k: np.array(v) for k, v in mod_series.items()},
                     monitor, report, ss, snapshots, marked,
                     {k: np.array(v) for k, v in decay.items()}, stop, clock_error,
                     float(T_star), float(theta_star))
    if cfg.out_dir:
        write_selfsim_outputs(run, cfg.out_dir)
    return run


def decay_certificate(run, which="Z"):
    """Observed sup |d_x Z| (or A) against the transport bound with measured lambda_D, F0.

    lambda_F = 1/2 + delta; F0 = max_s sup|d_x F| e^{lambda_F s}.  Returns
    (s, observed, bound).
    """
    d = run.decay
    s = d["s"]
    key = "vz_x_min" if which == "Z" else "va_x_min"
    fkey = "fz_x_sup" if which == "Z" else "fa_x_sup"
    idx = 0 if which == "Z" else 1
    obs = np.array([mrec["dZ"][0] if idx == 0 else mrec["dA"][0] for mrec in run.monitor])
    lam_D = float(np.min(d[key]))
    lam_F = 0.5 + run.report.delta
    if abs(lam_F - lam_D) < 1e-9:
        lam_F -= 1e-3
    F0 = float(np.max(d[fkey] * np.exp(lam_F * s)))
    bound = transport_bound(obs[0], lam_D, F0, lam_F, s[0], s)
    return s, obs, bound, lam_D, F0


def write_selfsim_outputs(run, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "modulation.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(_MOD_KEYS)
        cols = [run.modulation[k] for k in _MOD_KEYS]
        for row in zip(*cols):
            wr.writerow([repr(float(v)) for v in row])
    with open(os.path.join(out_dir, "bootstrap.json"), "w") as fh:
        json.dump(run.report.to_dict(), fh, indent=2, sort_keys=True)
    for i, (s, cols) in enumerate(run.snapshots):
        with open(os.path.join(out_dir, f"ssnap_{i:04d}.csv"), "w", newline="") as fh:
            wr = csv.writer(fh)
            keys = ("x", "W", "Z", "A", "Wx", "Wbar_x")
            wr.writerow(keys)
            for row in zip(*(cols[k] for k in keys)):
                wr.writerow([repr(float(v)) for v in row])
