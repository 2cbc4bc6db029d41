"""
Initial data for the general-gamma shock runs, and an admissibility checker.

w0 = kappa0 + sqrt(eps) * Wbar(theta / eps^{3/2}) * chi(theta), with chi a
smooth cutoff equal to 1 near the origin.  z0 and a0 are small smooth bumps.
The checker measures every hypothesis on the data (values at the origin,
derivative ceilings, the envelope around eps^{-1} Wbar_x, C^4 size of z0 and
a0, supports, amplitude and the kappa0 floor) and reports a margin for each.
"""

from dataclasses import dataclass, asdict

import numpy as np

from .burgers_profile import wbar, wbar_derivatives
from .stencils import periodic_derivative

TWO_PI = 2.0 * np.pi


@dataclass
class DataConfig:
    epsilon: float = 0.05
    kappa0: float = 0.0          # 0 selects the smallest admissible value
    nu0: float = 0.1
    alpha: float = 0.5
    grid_n: int = 1 << 14
    inner: float = np.pi / 4
    outer: float = np.pi / 2
    cutoff: str = "log"          # smooth step in log|theta| ("log") or |theta| ("linear")
    profile: str = "cutoff"      # "cutoff": Wbar times chi; "envelope": slope rides the bootstrap envelope
    turn_on: tuple = (0.5, 3.0)  # x-window where the envelope term is switched on
    turn_off: float = 0.85       # fraction of `outer` where the slope starts to be switched off
    za_mode: str = "bump"        # "bump" or "zero"
    za_total: float = 0.95       # ||z0||_{C^4} + ||a0||_{C^4}

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.alpha <= 0 or self.nu0 <= 0:
            raise ValueError("alpha and nu0 must be positive")
        if not 0.0 < self.inner < self.outer <= np.pi / 2:
            raise ValueError("cutoff radii must satisfy 0 < inner < outer <= pi/2")
        if self.kappa0 <= 0.0:
            self.kappa0 = kappa0_floor(self.alpha, self.nu0)
        if self.kappa0 < kappa0_floor(self.alpha, self.nu0) * (1 - 1e-14):
            raise ValueError("kappa0 below 4 (2 + (2/alpha)(nu0/2)^alpha)")

    def to_dict(self):
        return asdict(self)


def kappa0_floor(alpha, nu0):
    return 4.0 * (2.0 + (2.0 / alpha) * (0.5 * nu0) ** alpha)


def grid(n):
    return -np.pi + TWO_PI * np.arange(n) / n


def _psi(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(r):
    """C-infinity step: 1 for r <= 0, 0 for r >= 1."""
    r = np.asarray(r, dtype=float)
    a = _psi(1.0 - r)
    b = _psi(r)
    return a / (a + b)


def cutoff(theta, inner, outer, kind="log"):
    at = np.abs(np.asarray(theta, dtype=float))
    if kind == "log":
        with np.errstate(divide="ignore"):
            r = (np.log(np.maximum(at, 1e-300)) - np.log(inner)) / np.log(outer / inner)
    else:
        r = (at - inner) / (outer - inner)
    return smooth_step(r)


def make_w0(cfg, theta=None):
    th = grid(cfg.grid_n) if theta is None else np.asarray(theta, float)
    if cfg.profile == "envelope":
        return envelope_datum(cfg, th)[0]
    eps = cfg.epsilon
    chi = cutoff(th, cfg.inner, cfg.outer, cfg.cutoff)
    return cfg.kappa0 + np.sqrt(eps) * wbar(th * eps ** -1.5) * chi


def bootstrap_envelope(x, p=8):
    """Smooth minimum of x^2/(20(1+x^2)) and 1/(8+|x|^{2/3})."""
    x = np.abs(np.asarray(x, dtype=float))
    e1 = x * x / (20.0 * (1.0 + x * x))
    e2 = 1.0 / (8.0 + x ** (2.0 / 3.0))
    with np.errstate(divide="ignore"):
        return np.where(x > 0, (e1 ** -p + e2 ** -p) ** (-1.0 / p), 0.0)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


def _cell_integrals(f, edges):
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    return half * (f(pts) @ _GL_WEIGHTS)


def envelope_datum(cfg, theta):
    """(w0, lam): w0 whose scaled slope is Wbar_x + lam * env(x) * on(x), smoothly switched off near `outer`.

    lam is solved so that w0 returns exactly to kappa0 at |theta| = outer; the
    slope equals eps^{-1} Wbar_x for |x| below the turn-on window.
    """
    eps = cfg.epsilon
    s32 = eps ** 1.5
    x0, x1 = cfg.turn_on
    t0 = cfg.turn_off * cfg.outer

    def keep(th):
        return smooth_step((np.abs(th) - t0) / (cfg.outer - t0))

    def base(th):
        x = th / s32
        return wbar_derivatives(wbar(x))[0] * keep(th)

    def lift(th):
        x = th / s32
        on = 1.0 - smooth_step((np.abs(x) - x0) / (x1 - x0))
        return bootstrap_envelope(x) * on * keep(th)

    n_fine = 1 << 15
    edges = np.linspace(0.0, cfg.outer, n_fine + 1)
    A = _cell_integrals(base, edges).sum()
    B = _cell_integrals(lift, edges).sum()
    lam = -A / B

    def slope(th):
        return base(th) + lam * lift(th)

    # exact cumulative quadrature from 0 to |theta| (integrand in theta, scale 1/eps)
    th = np.asarray(theta, dtype=float)
    at = np.minimum(np.abs(th), cfg.outer)
    order = np.argsort(at)
    pts = np.concatenate([[0.0], at[order]])
    inc = _cell_integrals(slope, pts)
    cum = np.cumsum(inc)
    vals = np.empty_like(at)
    vals[order] = cum
    vals = vals / eps * np.sign(th)
    vals[np.abs(th) >= cfg.outer] = 0.0
    return cfg.kappa0 + vals, float(lam)


def bump(theta, radius=1.4):
    u = np.asarray(theta, dtype=float) / radius
    out = np.zeros_like(u)
    m = np.abs(u) < 1.0
    out[m] = np.exp(1.0 - 1.0 / (1.0 - u[m] ** 2))
    return out


def cn_norms(f, h, nmax=4):
    """sum_{k<=n} sup|d^k f| for n = 0..nmax, from 6th-order periodic stencils."""
    sups = [float(np.max(np.abs(f)))]
    for k in range(1, nmax + 1):
        sups.append(float(np.max(np.abs(periodic_derivative(f, h, order=k)))))
    return np.cumsum(sups)


def make_z0_a0(cfg, theta=None):
    """z0 = +c bump, a0 = -c bump, each scaled to C^4 norm za_total/2."""
    n = cfg.grid_n
    th = grid(n) if theta is None else np.asarray(theta, float)
    if cfg.za_mode == "zero":
        return np.zeros_like(th), np.zeros_like(th)
    h = TWO_PI / n
    unit = bump(grid(n))
    c4 = cn_norms(unit, h)[4]
    scale = 0.5 * cfg.za_total / c4
    return scale * bump(th), -scale * bump(th)


def _stencil_error_bar(f, h, order):
    hi = periodic_derivative(f, h, order=order, accuracy=6)
    lo = periodic_derivative(f, h, order=order, accuracy=4)
    return hi, float(np.max(np.abs(hi - lo)))


def envelope(x):
    x = np.abs(x)
    return np.minimum(x * x / (40.0 * (1.0 + x * x)), 0.5 / (8.0 + x ** (2.0 / 3.0)))


def validate_initial_data(w0, z0, a0, cfg, support=np.pi / 2):
    """Per-condition margins (positive = satisfied) with a pass flag.

    Derivative-based margins carry an error bar (difference between the
    6th- and 4th-order stencils); a margin passes when it is >= -error bar.
    """
    n = len(w0)
    h = TWO_PI / n
    th = grid(n)
    eps = cfg.epsilon
    k0 = cfg.kappa0
    i0 = n // 2
    rep = {}

    def put(name, margin, err=0.0, **extra):
        rep[name] = dict(margin=float(margin), error_bar=float(err),
                         passed=bool(margin >= -err), **extra)

    d = {}
    errs = {}
    for k in range(1, 5):
        d[k], errs[k] = _stencil_error_bar(w0, h, k)

    # values at the origin, scaled to relative deviations
    put("origin_value", -abs(w0[i0] - k0) / k0 + 1e-12)
    put("origin_slope", 1e-3 - abs(d[1][i0] * eps + 1.0), errs[1] * eps)
    put("origin_second", 1e-3 - abs(d[2][i0]) * eps ** 2.5, errs[2] * eps ** 2.5)
    put("origin_third", 1e-3 - abs(d[3][i0] * eps ** 4 / 6.0 - 1.0), errs[3] * eps ** 4 / 6)
    put("slope_minimum_at_origin", float(d[1][i0] - d[1].min() + 1e-9 / eps))

    ceilings = {1: eps ** -1, 2: eps ** -2.5, 3: 7 * eps ** -4, 4: eps ** -5.5}
    for k, cap in ceilings.items():
        m = np.max(np.abs(d[k]))
        put(f"derivative_ceiling_{k}", (cap - m) / cap, errs[k] / cap, measured=float(m),
            ceiling=float(cap))

    x = th * eps ** -1.5
    wbx = wbar_derivatives(wbar(x))[0]
    dev = np.abs(eps * d[1] - wbx)
    env = envelope(x)
    core = np.abs(x) > 1e-8
    slack = env - dev
    j = int(np.argmin(np.where(core, slack, np.inf)))
    put("profile_envelope", slack[j], eps * errs[1], theta_worst=float(th[j]),
        x_worst=float(x[j]), envelope_worst=float(env[j]))

    nz = cn_norms(z0, h)
    na = cn_norms(a0, h)
    tot = nz + na
    put("za_c4", 1.0 - tot.max(), 0.0, norms=[float(v) for v in tot])

    outside = np.abs(th) >= support
    leak = max(np.max(np.abs(w0[outside] - k0)), np.max(np.abs(z0[outside])),
               np.max(np.abs(a0[outside])))
    put("support", -leak, 1e-300)

    put("amplitude", 0.5 * k0 - np.max(np.abs(w0 - k0)))
    put("kappa0_floor", k0 - kappa0_floor(cfg.alpha, cfg.nu0))
    diff = w0 - z0
    P0 = np.where(diff > 0, (0.5 * cfg.alpha * np.maximum(diff, 0)) ** (1 / cfg.alpha), 0.0)
    put("density_floor", P0.min() - cfg.nu0)
    put("slope_zero_mean", 1e-12 * np.max(np.abs(d[1])) - abs(np.mean(d[1])))
    ok = all(v["passed"] for v in rep.values())
    return {"passed": ok, "conditions": rep}


def tune_inner_radius(cfg, candidates=None, target=0.1):
    """Pick the inner cutoff radius with the best envelope margin at the shoulder.

    Stops at the first candidate whose worst envelope slack is at least
    `target` times the local envelope; otherwise returns the best seen.
    """
    if candidates is None:
        candidates = np.geomspace(cfg.outer / 40.0, cfg.outer * 0.9, 24)
    best = None
    for r in candidates:
        trial = DataConfig(**{**cfg.to_dict(), "inner": float(r)})
        w0 = make_w0(trial)
        n = len(w0)
        h = TWO_PI / n
        th = grid(n)
        x = th * cfg.epsilon ** -1.5
        dev = np.abs(cfg.epsilon * periodic_derivative(w0, h) - wbar_derivatives(wbar(x))[0])
        env = envelope(x)
        shoulder = np.abs(th) >= r
        rel = np.min((env[shoulder] - dev[shoulder]) / env[shoulder])
        if best is None or rel > best[1]:
            best = (float(r), float(rel))
        if rel >= target:
            break
    return best


def build_initial_data(cfg):
    """(theta, w0, z0, a0, report) for the configuration."""
    th = grid(cfg.grid_n)
    w0 = make_w0(cfg, th)
    z0, a0 = make_z0_a0(cfg, th)
    return th, w0, z0, a0, validate_initial_data(w0, z0, a0, cfg)
