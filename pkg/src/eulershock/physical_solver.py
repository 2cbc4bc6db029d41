"""
Evolution of the azimuthal (w, z, a) system on the periodic angle.

Under the homogeneous ansatz u = r (a, b), rho = r^{1/alpha} P the 2D
isentropic Euler equations reduce to transport equations in theta for the
Riemann variables w = b + P^alpha/alpha, z = b - P^alpha/alpha and the radial
rate a.  In the rescaled clock t~ (physical time t = 2 t~/(1 + alpha)):

    w_t + (w + b0 z) w_th = -a (b1 z + b2 w)
    z_t + (z + b0 w) z_th = -a (b1 w + b2 z)
    a_t + b3 (w + z) a_th = b3 (-2 a^2 + (w + z)^2/2 - alpha (w - z)^2/2)

Three schemes are provided:

* ``mol``: 6th-order centered differences, 8th-order hyper-dissipation, RK4;
* ``semilag``: one particle step from the grid nodes followed by a monotone
  cubic remap back to the grid;
* ``lagrangian``: three families of particles carried along their own
  characteristics, companion fields evaluated by label-space inversion.
  Particles cluster at the steepening front, so this is the scheme used to
  approach the blowup time.
"""

from dataclasses import dataclass, field, asdict

import numpy as np
from numba import njit
from scipy.interpolate import PchipInterpolator

from .stencils import periodic_derivative

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Coefficients:
    gamma: float
    alpha: float
    beta0: float
    beta1: float
    beta2: float
    beta3: float

    @classmethod
    def from_gamma(cls, gamma):
        if not gamma > 1.0:
            raise ValueError("gamma must exceed 1")
        al = 0.5 * (gamma - 1.0)
        return cls(gamma, al, (1 - al) / (1 + al), (1 - 2 * al) / (1 + al),
                   (3 + 2 * al) / (1 + al), 1.0 / (1 + al))

    @property
    def time_factor(self):
        """d t_phys / d t~ ."""
        return 2.0 / (1.0 + self.alpha)


def riemann_from_primitive(b, P, alpha):
    P = np.asarray(P, dtype=float)
    if np.any(P <= 0.0):
        raise ValueError("P must be positive")
    q = P ** alpha / alpha
    return b + q, b - q


def primitive_from_riemann(w, z, alpha):
    d = np.asarray(w, dtype=float) - np.asarray(z, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("vacuum: w <= z somewhere")
    return 0.5 * (w + z), (0.5 * alpha * d) ** (1.0 / alpha)


def periodic_grid(n):
    if n < 64 or n % 2:
        raise ValueError("grid size must be even and at least 64")
    return -np.pi + TWO_PI * np.arange(n) / n


@dataclass
class RiemannState:
    t_tilde: float
    w: np.ndarray
    z: np.ndarray
    a: np.ndarray

    @property
    def n(self):
        return len(self.w)

    @property
    def h(self):
        return TWO_PI / self.n

    @property
    def theta(self):
        return periodic_grid(self.n)

    def copy(self):
        return RiemannState(self.t_tilde, self.w.copy(), self.z.copy(), self.a.copy())


def a_forcing(w, z, a, c):
    return c.beta3 * (-2.0 * a * a + 0.5 * (w + z) ** 2 - 0.5 * c.alpha * (w - z) ** 2)


def _speeds(w, z, c):
    return w + c.beta0 * z, z + c.beta0 * w, c.beta3 * (w + z)


def _rhs_arrays(w, z, a, h, c, dissipation):
    sw, sz, sa = _speeds(w, z, c)
    dw = periodic_derivative(w, h)
    dz = periodic_derivative(z, h)
    da = periodic_derivative(a, h)
    rw = -sw * dw - a * (c.beta1 * z + c.beta2 * w)
    rz = -sz * dz - a * (c.beta1 * w + c.beta2 * z)
    ra = -sa * da + a_forcing(w, z, a, c)
    if dissipation > 0.0:
        vmax = max(np.max(np.abs(sw)), np.max(np.abs(sz)), np.max(np.abs(sa)), 1e-30)
        k = dissipation * vmax / h / 256.0
        rw = rw - k * _eighth_difference(w)
        rz = rz - k * _eighth_difference(z)
        ra = ra - k * _eighth_difference(a)
    return rw, rz, ra


_D8 = np.array([1, -8, 28, -56, 70, -56, 28, -8, 1], dtype=float)


def _eighth_difference(f):
    out = np.zeros_like(f)
    for o, wgt in zip(range(-4, 5), _D8):
        out += wgt * np.roll(f, -o)
    return out


def rhs(state, coeffs, dissipation=0.0):
    """Rescaled-time derivatives (w_t, z_t, a_t) with 6th-order stencils."""
    return _rhs_arrays(state.w, state.z, state.a, state.h, coeffs, dissipation)


def mol_step(state, dt, coeffs, dissipation=0.2):
    """One classical RK4 step of the method-of-lines system."""
    h = state.h
    y0 = (state.w, state.z, state.a)
    k1 = _rhs_arrays(*y0, h, coeffs, dissipation)
    y1 = tuple(u + 0.5 * dt * k for u, k in zip(y0, k1))
    k2 = _rhs_arrays(*y1, h, coeffs, dissipation)
    y2 = tuple(u + 0.5 * dt * k for u, k in zip(y0, k2))
    k3 = _rhs_arrays(*y2, h, coeffs, dissipation)
    y3 = tuple(u + dt * k for u, k in zip(y0, k3))
    k4 = _rhs_arrays(*y3, h, coeffs, dissipation)
    new = tuple(u + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
                for u, a1, a2, a3, a4 in zip(y0, k1, k2, k3, k4))
    return RiemannState(state.t_tilde + dt, *new)


def max_slopes(state):
    h = state.h
    return (float(np.max(np.abs(periodic_derivative(state.w, h)))),
            float(np.max(np.abs(periodic_derivative(state.z, h)))),
            float(np.max(np.abs(periodic_derivative(state.a, h)))))


def stable_dt(state, coeffs, cfl):
    sw, sz, sa = _speeds(state.w, state.z, coeffs)
    vmax = max(np.max(np.abs(sw)), np.max(np.abs(sz)), np.max(np.abs(sa)), 1e-12)
    slope = max(max_slopes(state)[0], 1e-12)
    return cfl * min(state.h / vmax, 0.1 / slope)


# ---------------------------------------------------------------------------
# particle machinery

# inverse Vandermonde for local quintic interpolation on nodes u = -2..3
_U_NODES = np.arange(-2, 4, dtype=float)
_VAND_INV = np.linalg.inv(np.vander(_U_NODES, 6, increasing=True))


@njit(cache=True)
def _invert_and_eval(Xe, Ae, p, vinv):
    """Quintic label-space inversion of Xe at points p; evaluate rows of Ae there."""
    m = Xe.shape[0]
    na = Ae.shape[0]
    out = np.empty((na, p.shape[0]))
    cx = np.empty(6)
    cv = np.empty(6)
    for k in range(p.shape[0]):
        target = p[k]
        j = np.searchsorted(Xe, target, side="right") - 1
        if j < 2:
            j = 2
        if j > m - 4:
            j = m - 4
        for r in range(6):
            acc = 0.0
            for q in range(6):
                acc += vinv[r, q] * Xe[j - 2 + q]
            cx[r] = acc
        dx = Xe[j + 1] - Xe[j]
        u = (target - Xe[j]) / dx if dx > 0.0 else 0.0
        for _ in range(8):
            val = cx[5]
            der = 0.0
            for r in range(4, -1, -1):
                der = der * u + val
                val = val * u + cx[r]
            if der == 0.0:
                break
            step = (val - target) / der
            u -= step
            if u < -0.5:
                u = -0.5
            elif u > 1.5:
                u = 1.5
            if abs(step) < 1e-15:
                break
        for ia in range(na):
            for r in range(6):
                acc = 0.0
                for q in range(6):
                    acc += vinv[r, q] * Ae[ia, j - 2 + q]
                cv[r] = acc
            val = cv[5]
            for r in range(4, -1, -1):
                val = val * u + cv[r]
            out[ia, k] = val
    return out


class FamilyField:
    """A field carried by particles at positions X (unwrapped, increasing).

    Values at arbitrary angles are found by inverting the label map
    X(label) with a local quintic in label space, then evaluating the
    carried arrays at the recovered label.
    """

    pad = 3

    def __init__(self, X, arrays):
        pad = self.pad
        self.X = X
        self.Xe = np.concatenate([X[-pad:] - TWO_PI, X, X[:pad] + TWO_PI])
        self.Ae = np.vstack([np.concatenate([v[-pad:], v, v[:pad]]) for v in arrays])

    def evaluate(self, points):
        X0 = self.X[0]
        p = X0 + np.mod(np.asarray(points, dtype=float) - X0, TWO_PI)
        return list(_invert_and_eval(self.Xe, self.Ae, p, _VAND_INV))


def label_slope(X, V, labels):
    """dV/dtheta at the particles from 6th-order label-space differences."""
    h = TWO_PI / len(X)
    dv = periodic_derivative(V, h)
    dx = 1.0 + periodic_derivative(X - labels, h)
    return dv / dx, dx


@dataclass
class ParticleState:
    """Positions X[f] and carried values V[f] for the families f = w, z, a."""
    t_tilde: float
    labels: np.ndarray
    X: np.ndarray          # shape (3, n)
    V: np.ndarray          # shape (3, n)
    I: np.ndarray          # integral of c*a/alpha along a-particles

    @property
    def n(self):
        return len(self.labels)

    def copy(self):
        return ParticleState(self.t_tilde, self.labels.copy(), self.X.copy(),
                             self.V.copy(), self.I.copy())


def particles_from_grid(state):
    th = state.theta
    return ParticleState(state.t_tilde, th.copy(), np.vstack([th, th, th]),
                         np.vstack([state.w, state.z, state.a]), np.zeros_like(th))


def _particle_rhs(X, V, coeffs):
    c = coeffs
    fw = FamilyField(X[0], [V[0]])
    fz = FamilyField(X[1], [V[1]])
    fa = FamilyField(X[2], [V[2]])
    z_w, = fz.evaluate(X[0])
    a_w, = fa.evaluate(X[0])
    w_z, = fw.evaluate(X[1])
    a_z, = fa.evaluate(X[1])
    w_a, = fw.evaluate(X[2])
    z_a, = fz.evaluate(X[2])
    dX = np.empty_like(X)
    dV = np.empty_like(V)
    dX[0] = V[0] + c.beta0 * z_w
    dV[0] = -a_w * (c.beta1 * z_w + c.beta2 * V[0])
    dX[1] = V[1] + c.beta0 * w_z
    dV[1] = -a_z * (c.beta1 * w_z + c.beta2 * V[1])
    dX[2] = c.beta3 * (w_a + z_a)
    dV[2] = a_forcing(w_a, z_a, V[2], c)
    dI = c.time_factor * V[2] / c.alpha
    return dX, dV, dI


def particle_step(ps, dt, coeffs):
    """RK4 step of the three characteristic families."""
    X0, V0, I0 = ps.X, ps.V, ps.I
    k1 = _particle_rhs(X0, V0, coeffs)
    k2 = _particle_rhs(X0 + 0.5 * dt * k1[0], V0 + 0.5 * dt * k1[1], coeffs)
    k3 = _particle_rhs(X0 + 0.5 * dt * k2[0], V0 + 0.5 * dt * k2[1], coeffs)
    k4 = _particle_rhs(X0 + dt * k3[0], V0 + dt * k3[1], coeffs)
    comb = [a + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
            for a, b1, b2, b3, b4 in zip((X0, V0, I0), k1, k2, k3, k4)]
    return ParticleState(ps.t_tilde + dt, ps.labels, comb[0], comb[1], comb[2])


def particle_slopes(ps):
    return [label_slope(ps.X[f], ps.V[f], ps.labels)[0] for f in range(3)]


def particle_fields_at(ps, theta):
    """(w, z, a) at arbitrary angles."""
    return [FamilyField(ps.X[f], [ps.V[f]]).evaluate(np.asarray(theta, float))[0]
            for f in range(3)]


def particle_to_grid(ps, n=None):
    n = ps.n if n is None else n
    th = periodic_grid(n)
    w, z, a = particle_fields_at(ps, th)
    return RiemannState(ps.t_tilde, w, z, a)


def semilag_step(state, dt, coeffs):
    """Particle RK4 step from the grid nodes, then monotone cubic remap."""
    ps = particle_step(particles_from_grid(state), dt, coeffs)
    th = state.theta
    out = []
    for f in range(3):
        X = ps.X[f]
        Xe = np.concatenate([X[-4:] - TWO_PI, X, X[:4] + TWO_PI])
        Ve = np.concatenate([ps.V[f][-4:], ps.V[f], ps.V[f][:4]])
        X0 = X[0]
        target = X0 + np.mod(th - X0, TWO_PI)
        out.append(PchipInterpolator(Xe, Ve)(target))
    return RiemannState(state.t_tilde + dt, *out)


# ---------------------------------------------------------------------------
# diagnostics


def omega_fields(state, coeffs):
    """omega = 2b - a_theta, varpi = omega / P, on the grid."""
    b, P = primitive_from_riemann(state.w, state.z, coeffs.alpha)
    om = 2.0 * b - periodic_derivative(state.a, state.h)
    return om, om / P


@dataclass
class EulerField2D:
    r: np.ndarray
    theta: np.ndarray
    u_r: np.ndarray
    u_theta: np.ndarray
    rho: np.ndarray
    omega: np.ndarray
    reduced_residual: float


def reconstruct_euler_fields(state, r, coeffs):
    """2D fields u_r = r a, u_theta = r b, rho = r^{1/alpha} P, vorticity.

    The reduced (a, b, P) system in physical time,
        (d_t + b d_th) a + a^2 - b^2 + P^{2 alpha}/alpha = 0,
        (d_t + b d_th) b + 2 a b + P^{2 alpha - 1} P_th = 0,
        (d_t + b d_th) P + ((1 + 2 alpha)/alpha) a P + P b_th = 0,
    is evaluated with time derivatives from the (w, z, a) right-hand side;
    its worst residual is returned as a consistency check.
    """
    c = coeffs
    r = np.asarray(r, dtype=float)
    b, P = primitive_from_riemann(state.w, state.z, c.alpha)
    h = state.h
    a = state.a
    wt, zt, at = rhs(state, c)
    k = 1.0 / c.time_factor
    wt, zt, at = k * wt, k * zt, k * at
    bt = 0.5 * (wt + zt)
    dPdd = (1.0 / c.alpha) * P / (state.w - state.z)
    Pt = dPdd * (wt - zt)
    a_th = periodic_derivative(a, h)
    b_th = periodic_derivative(b, h)
    P_th = periodic_derivative(P, h)
    gam = 1.0 + 2.0 * c.alpha
    r1 = at + b * a_th + a * a - b * b + P ** (2 * c.alpha) / c.alpha
    r2 = bt + b * b_th + 2 * a * b + P ** (2 * c.alpha - 1) * P_th
    r3 = Pt + b * P_th + (gam / c.alpha) * a * P + P * b_th
    scale = 1.0 + np.max(np.abs(b)) ** 2 + np.max(np.abs(a)) ** 2 + np.max(P)
    resid = max(np.max(np.abs(r1)), np.max(np.abs(r2)),
                np.max(np.abs(r3))) / scale
    rr = r[:, None]
    om = 2.0 * b - a_th
    return EulerField2D(r=r, theta=state.theta, u_r=rr * a[None, :],
                        u_theta=rr * b[None, :],
                        rho=rr ** (1.0 / c.alpha) * P[None, :],
                        omega=np.broadcast_to(om, (len(r), len(om))).copy(),
                        reduced_residual=float(resid))


def continuation_integral(t, slope_w, slope_z, amax):
    """Cumulative trapezoid of ||w_th|| + ||z_th|| + ||a||."""
    t = np.asarray(t, dtype=float)
    f = np.asarray(slope_w) + np.asarray(slope_z) + np.asarray(amax)
    out = np.zeros_like(t)
    if len(t) > 1:
        out[1:] = np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(t))
    return out


@dataclass
class BlowupRecord:
    T_star_est: float
    theta_star_est: float
    rate_lo: float
    rate_hi: float
    holder_exponent: float
    stop_reason: str
    fit_r2: float = float("nan")
    T_star_phys: float = float("nan")

    def to_dict(self):
        return {k: (float(v) if isinstance(v, (int, float, np.floating)) else v)
                for k, v in asdict(self).items()}


class FitQualityError(RuntimeError):
    pass


def fit_blowup_time(t, slope, decade=10.0, min_r2=0.99):
    """Zero crossing of a linear fit to 1/slope over the last decade of slopes."""
    t = np.asarray(t, float)
    slope = np.asarray(slope, float)
    sel = slope >= slope[-1] / decade
    tt, y = t[sel], 1.0 / slope[sel]
    if len(tt) < 3:
        tt, y = t[-3:], 1.0 / slope[-3:]
    A = np.vstack([tt, np.ones_like(tt)]).T
    (m, q), *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = m * tt + q
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    if r2 < min_r2:
        raise FitQualityError(f"1/slope fit has R^2 = {r2:.4f}")
    return -q / m, r2


def holder_fit(theta, w, theta_star, w_star, slope_max, x_lo=30.0, decade=10.0):
    """Log-log regression of |w - w_*| against |theta - theta_*|.

    The fitted decade is placed in self-similar units: |theta - theta_*| in
    [x_lo, decade * x_lo] * slope_max^{-3/2}, i.e. outside the smooth core
    whose width scales like slope_max^{-3/2}.
    """
    d = np.mod(np.asarray(theta) - theta_star + np.pi, TWO_PI) - np.pi
    dv = np.abs(np.asarray(w) - w_star)
    r = np.abs(d)
    r0 = x_lo * slope_max ** -1.5
    sel = (r >= r0) & (r <= decade * r0) & (dv > 0)
    if np.count_nonzero(sel) < 4:
        return float("nan"), (float(r0), float(decade * r0))
    slope, _ = np.polyfit(np.log(r[sel]), np.log(dv[sel]), 1)
    return float(slope), (float(r0), float(decade * r0))


# ---------------------------------------------------------------------------
# run driver


@dataclass
class SimulationConfig:
    gamma: float = 3.0
    epsilon: float = 0.1
    kappa0: float = 0.0
    nu0: float = 0.1
    M: float = 40.0
    grid_n: int = 4096
    cfl: float = 0.4
    slope_stop: float = 0.0          # 0 means 1e3 times the initial max slope
    scheme: str = "mol"
    snapshot_every: int = 0
    out_dir: str = ""
    t0: float = 0.0
    dissipation: float = 0.2
    max_steps: int = 200000
    t_end: float = float("inf")
    n_tracked: int = 32


@dataclass
class PhysicalRun:
    config: SimulationConfig
    coeffs: Coefficients
    series: dict
    snapshots: list
    final: object
    stop_reason: str
    varpi_residual: float = float("nan")
    tracked: dict = field(default_factory=dict)


_SERIES_KEYS = ("t_tilde", "t_phys", "max_slope_w", "max_slope_z", "max_slope_a",
                "min_P", "min_omega", "max_omega", "cont_integral", "max_abs_sum",
                "max_a_theta", "zeta", "theta_min_slope")


def _grid_diagnostics(state, c):
    h = state.h
    sw = periodic_derivative(state.w, h)
    sz = periodic_derivative(state.z, h)
    sa = periodic_derivative(state.a, h)
    _, P = primitive_from_riemann(state.w, state.z, c.alpha)
    om = (state.w + state.z) - sa
    i = int(np.argmin(sw))
    return dict(max_slope_w=float(np.max(np.abs(sw))), max_slope_z=float(np.max(np.abs(sz))),
                max_slope_a=float(np.max(np.abs(sa))), min_P=float(P.min()),
                min_omega=float(om.min()), max_omega=float(om.max()),
                max_abs_sum=float(np.max(np.abs(state.w) + np.abs(state.z) + np.abs(state.a))),
                max_a_theta=float(np.max(np.abs(sa))), amax=float(np.max(np.abs(state.a))),
                theta_min_slope=float(state.theta[i]))


def _particle_diagnostics(ps, c):
    sw, sz, sa = particle_slopes(ps)
    fw = FamilyField(ps.X[0], [ps.V[0]])
    fz = FamilyField(ps.X[1], [ps.V[1]])
    z_w, = fz.evaluate(ps.X[0])
    w_a, = fw.evaluate(ps.X[2])
    z_a, = fz.evaluate(ps.X[2])
    w_z, = fw.evaluate(ps.X[1])
    _, P_w = primitive_from_riemann(ps.V[0], z_w, c.alpha)
    _, P_z = primitive_from_riemann(w_z, ps.V[1], c.alpha)
    om = (w_a + z_a) - sa
    i = int(np.argmin(sw))
    tot = np.concatenate([np.abs(ps.V[0]) + np.abs(z_w), np.abs(ps.V[1]) + np.abs(w_z)])
    return dict(max_slope_w=float(np.max(np.abs(sw))), max_slope_z=float(np.max(np.abs(sz))),
                max_slope_a=float(np.max(np.abs(sa))),
                min_P=float(min(P_w.min(), P_z.min())),
                min_omega=float(om.min()), max_omega=float(om.max()),
                max_abs_sum=float(tot.max() + np.max(np.abs(ps.V[2]))),
                max_a_theta=float(np.max(np.abs(sa))), amax=float(np.max(np.abs(ps.V[2]))),
                theta_min_slope=float(np.mod(ps.X[0][i] + np.pi, TWO_PI) - np.pi))


def grid_snapshot(state, c):
    b, P = primitive_from_riemann(state.w, state.z, c.alpha)
    om = 2 * b - periodic_derivative(state.a, state.h)
    return {"theta": state.theta, "w": state.w, "z": state.z, "a": state.a,
            "b": b, "P": P, "omega": om}


def simulate(cfg, w0, z0, a0, callback=None):
    """Evolve from samples (w0, z0, a0) at t~ = cfg.t0 until the slope threshold.

    Returns a PhysicalRun with per-step series, snapshots, final state and,
    for the particle scheme, the varpi transport residual along tracked
    a-characteristics.
    """
    c = Coefficients.from_gamma(cfg.gamma)
    state = RiemannState(cfg.t0, np.asarray(w0, float).copy(),
                         np.asarray(z0, float).copy(), np.asarray(a0, float).copy())
    if state.n != cfg.grid_n:
        raise ValueError("initial samples do not match grid_n")
    lagr = cfg.scheme == "lagrangian"
    if cfg.scheme not in ("mol", "semilag", "lagrangian"):
        raise ValueError(f"unknown scheme {cfg.scheme!r}")
    ps = particles_from_grid(state) if lagr else None

    def diag():
        return _particle_diagnostics(ps, c) if lagr else _grid_diagnostics(state, c)

    d = diag()
    slope_stop = cfg.slope_stop if cfg.slope_stop > 0 else 1e3 * d["max_slope_w"]
    series = {k: [] for k in _SERIES_KEYS}
    amax_hist = []
    snapshots = []
    n = state.n
    mid = n // 2  # label theta0 = 0

    # tracked a-characteristics for the varpi check
    trk = np.linspace(0, n, cfg.n_tracked, endpoint=False).astype(int)
    varpi0 = None
    if lagr:
        sa0 = particle_slopes(ps)[2]
        w_a, z_a = [FamilyField(ps.X[f], [ps.V[f]]).evaluate(ps.X[2][trk])[0] for f in (0, 1)]
        b_a, P_a = primitive_from_riemann(w_a, z_a, c.alpha)
        varpi0 = (2 * b_a - sa0[trk]) / P_a

    def record(t):
        series["t_tilde"].append(t)
        series["t_phys"].append(c.time_factor * t)
        for k in ("max_slope_w", "max_slope_z", "max_slope_a", "min_P", "min_omega",
                  "max_omega", "max_abs_sum", "max_a_theta", "theta_min_slope"):
            series[k].append(d[k])
        amax_hist.append(d["amax"])
        series["zeta"].append(float(ps.X[1][mid]) if lagr else float("nan"))

    record(state.t_tilde)
    if cfg.snapshot_every:
        snapshots.append((state.t_tilde, grid_snapshot(state, c)))
    stop_reason = "max_steps"
    step = 0
    t = cfg.t0
    while step < cfg.max_steps:
        if d["max_slope_w"] >= slope_stop:
            stop_reason = "slope_stop"
            break
        if t >= cfg.t_end:
            stop_reason = "t_end"
            break
        if lagr:
            rate = max(d["max_slope_w"], d["max_slope_z"], d["max_slope_a"], 1.0,
                       abs(c.beta2) * d["amax"], 2 * c.beta3 * d["amax"])
            dt = cfg.cfl / rate
        else:
            dt = stable_dt(state, c, cfg.cfl)
        dt = min(dt, cfg.t_end - t)
        if lagr:
            ps = particle_step(ps, dt, c)
            t = ps.t_tilde
        elif cfg.scheme == "mol":
            state = mol_step(state, dt, c, cfg.dissipation)
            t = state.t_tilde
        else:
            state = semilag_step(state, dt, c)
            t = state.t_tilde
        step += 1
        d = diag()
        if not np.isfinite(d["max_slope_w"]):
            stop_reason = "non_finite"
            break
        record(t)
        if cfg.snapshot_every and step % cfg.snapshot_every == 0:
            st = particle_to_grid(ps) if lagr else state
            snapshots.append((t, grid_snapshot(st, c)))
        if callback is not None:
            callback(step, t, d)
    series = {k: np.asarray(v) for k, v in series.items()}
    series["cont_integral"] = continuation_integral(
        series["t_tilde"], series["max_slope_w"], series["max_slope_z"], np.asarray(amax_hist))
    series["max_a"] = np.asarray(amax_hist)
    final = ps if lagr else state
    if cfg.snapshot_every:
        st = particle_to_grid(ps) if lagr else state
        if snapshots[-1][0] != t:
            snapshots.append((t, grid_snapshot(st, c)))
    run = PhysicalRun(cfg, c, series, snapshots, final, stop_reason)
    if lagr:
        sa = particle_slopes(ps)[2]
        w_a, z_a = [FamilyField(ps.X[f], [ps.V[f]]).evaluate(ps.X[2][trk])[0] for f in (0, 1)]
        b_a, P_a = primitive_from_riemann(w_a, z_a, c.alpha)
        varpi = (2 * b_a - sa[trk]) / P_a
        res = np.abs(varpi * np.exp(-ps.I[trk]) - varpi0) / np.abs(varpi0)
        run.varpi_residual = float(res.max())
        run.tracked = {"labels": ps.labels[trk], "varpi0": varpi0, "varpi": varpi,
                       "integral": ps.I[trk]}
    return run


def vorticity_diag(run):
    """(omega, varpi, transport residual) for a finished particle run."""
    ps = run.final
    c = run.coeffs
    st = particle_to_grid(ps) if isinstance(ps, ParticleState) else ps
    om, vp = omega_fields(st, c)
    return om, vp, run.varpi_residual


def blowup_detect(run, decade=10.0, min_r2=0.99):
    """BlowupRecord from a run that stopped on the slope threshold."""
    s = run.series
    t_star, r2 = fit_blowup_time(s["t_tilde"], s["max_slope_w"], decade, min_r2)
    slope = s["max_slope_w"]
    sel = slope >= slope[-1] / decade
    prod = slope[sel] * (t_star - s["t_tilde"][sel])
    theta_star = float(s["theta_min_slope"][-1])
    ps = run.final
    if isinstance(ps, ParticleState):
        sw = particle_slopes(ps)[0]
        i = int(np.argmin(sw))
        expo, _ = holder_fit(ps.X[0], ps.V[0], ps.X[0][i], ps.V[0][i], float(-sw[i]))
    else:
        sw = periodic_derivative(ps.w, ps.h)
        i = int(np.argmin(sw))
        expo, _ = holder_fit(ps.theta, ps.w, ps.theta[i], ps.w[i], float(-sw[i]))
    return BlowupRecord(T_star_est=float(t_star), theta_star_est=theta_star,
                        rate_lo=float(prod.min()), rate_hi=float(prod.max()),
                        holder_exponent=expo, stop_reason=run.stop_reason, fit_r2=r2,
                        T_star_phys=float(run.coeffs.time_factor * t_star))


def zeta_trace(run, xi_of_t, t_star):
    """min over the last decade of |zeta - xi| / (T_* - t) along the tracked z-particle."""
    s = run.series
    t = s["t_tilde"]
    zeta = s["zeta"]
    xi = np.asarray([xi_of_t(tt) for tt in t])
    sep = np.abs(np.mod(zeta - xi + np.pi, TWO_PI) - np.pi)
    slope = s["max_slope_w"]
    sel = (slope >= slope[-1] / 10.0) & (t < t_star)
    ratio = sep[sel] / (t_star - t[sel])
    return sep, float(ratio.min()) if ratio.size else float("nan")


def rate_sandwich(run, t_star, decade=10.0):
    s = run.series
    slope = s["max_slope_w"]
    sel = slope >= slope[-1] / decade
    return slope[sel] * (t_star - s["t_tilde"][sel])
