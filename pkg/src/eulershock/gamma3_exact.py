"""
Exact purely azimuthal solutions for gamma = 3.

With gamma = 3 and z = a = 0 the azimuthal profile w solves the inviscid
Burgers equation  w_t + w w_theta = 0  on the circle.  This module provides:

* blowup time/location from the datum (first crossing of characteristics),
* the pre-shock solution by inverting theta -> theta + t w0(theta),
* the cubic-root branch selection of Y^3 - Y = q,
* the post-shock entropy solution for the local cusp model,
* Rankine-Hugoniot bookkeeping for the continued solution.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .stencils import periodic_derivative

TWO_PI = 2.0 * np.pi
Q_CRIT = 2.0 / (3.0 * np.sqrt(3.0))
_Q_GUARD = 0.5 * np.spacing(Q_CRIT)


class NoBlowupError(ValueError):
    pass


def wrap_angle(theta):
    return (np.asarray(theta) + np.pi) % TWO_PI - np.pi


@dataclass
class BurgersDatum:
    """Periodic datum given as a callable with derivative, or built from samples."""
    value: object
    slope: object
    name: str = "custom"

    @classmethod
    def from_samples(cls, w0, name="samples"):
        w0 = np.asarray(w0, dtype=float)
        n = len(w0)
        theta = -np.pi + TWO_PI * np.arange(n + 1) / n
        spline = CubicSpline(theta, np.append(w0, w0[0]), bc_type="periodic")
        deriv = spline.derivative()

        def value(t):
            return spline(wrap_angle(t))

        def slope(t):
            return deriv(wrap_angle(t))
        return cls(value, slope, name)

    def samples(self, n):
        theta = periodic_grid(n)
        return theta, self.value(theta)

    def bounds(self, n=1 << 16):
        _, w = self.samples(n)
        return float(w.min()), float(w.max())


def periodic_grid(n):
    return -np.pi + TWO_PI * np.arange(n) / n


def tanh_front_datum(epsilon=0.1, mean=0.55, amplitude=0.4):
    """w0 = mean - amplitude*tanh(sin(theta)/delta), delta chosen so min slope is -1/epsilon at 0."""
    delta = amplitude * epsilon

    def value(t):
        return mean - amplitude * np.tanh(np.sin(t) / delta)

    def slope(t):
        c = np.cosh(np.sin(t) / delta)
        return -amplitude * np.cos(t) / (delta * c * c)
    return BurgersDatum(value, slope, "tanh_front")


def sine_datum(mean=0.9, amplitude=0.05, k=5):
    def value(t):
        return mean - amplitude * np.sin(k * t)

    def slope(t):
        return -amplitude * k * np.cos(k * t)
    return BurgersDatum(value, slope, "sine")


BUILTIN_DATA = {"tanh_front": tanh_front_datum, "sine": sine_datum}


def blowup_predict(datum, n=4096, refine=True):
    """(T_*, theta_*) from the most negative slope of the datum.

    The slope is measured on the grid with a 6th-order stencil (samples only)
    or with the analytic slope, then the arg-min is refined by a parabola.
    """
    theta = periodic_grid(n)
    h = TWO_PI / n
    if datum.slope is not None:
        s = datum.slope(theta)
    else:
        s = periodic_derivative(datum.value(theta), h)
    i = int(np.argmin(s))
    smin = float(s[i])
    if smin >= 0.0:
        raise NoBlowupError("datum slope is non-negative everywhere: no blowup")
    theta0 = theta[i]
    if refine and datum.slope is not None:
        # golden-section refinement of the slope minimum in a 2-cell window
        from scipy.optimize import minimize_scalar
        res = minimize_scalar(lambda t: float(datum.slope(t)),
                              bracket=(theta0 - h, theta0, theta0 + h),
                              tol=1e-12)
        if res.fun <= smin:
            theta0, smin = float(res.x), float(res.fun)
    t_star = -1.0 / smin
    theta_star = float(wrap_angle(theta0 + t_star * datum.value(theta0)))
    return t_star, theta_star, float(theta0)


def _invert_characteristics(datum, theta, t, tol=1e-13):
    """Labels theta0 with theta0 + t*w0(theta0) = theta (mod 2 pi)."""
    wmin, wmax = datum.bounds()
    lo = theta - t * wmax - 1e-12
    hi = theta - t * wmin + 1e-12
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f = mid + t * datum.value(mid) - theta
        pos = f > 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
        if np.max(hi - lo) < 1e-6:
            break
    x0 = 0.5 * (lo + hi)
    for _ in range(8):
        f = x0 + t * datum.value(x0) - theta
        x0 = x0 - f / (1.0 + t * datum.slope(x0))
        x0 = np.clip(x0, lo, hi)
        if np.max(np.abs(f)) < tol:
            break
    return x0


def burgers_evolve(datum, t, theta=None, n=4096):
    """w(theta, t) for t < T_* by exact characteristic inversion; also returns the slope."""
    t_star = blowup_predict(datum, n=max(n, 4096))[0]
    if t >= t_star:
        raise ValueError(f"t = {t} is not before the blowup time {t_star}")
    if theta is None:
        theta = periodic_grid(n)
    theta = np.asarray(theta, dtype=float)
    if t == 0.0:
        return datum.value(theta), datum.slope(theta)
    labels = _invert_characteristics(datum, theta, t)
    s0 = datum.slope(labels)
    return datum.value(labels), s0 / (1.0 + t * s0)


def cubic_branch_root(q):
    """Root Y of Y^3 - Y = q selected by the entropy branch rule.

    |q| > 2/(3 sqrt 3): the unique real root; q in [-2/(3 sqrt 3), 0]: the
    smallest root; q in (0, 2/(3 sqrt 3)]: the largest root.
    """
    q = np.asarray(q, dtype=float)
    scalar = q.ndim == 0
    q = np.atleast_1d(q)
    y = np.empty_like(q)
    c = 2.0 / np.sqrt(3.0)
    aq = np.abs(q)
    big = aq > Q_CRIT + _Q_GUARD
    arg = np.clip(aq[big] / Q_CRIT, 1.0, None)
    y[big] = np.sign(q[big]) * c * np.cosh(np.arccosh(arg) / 3.0)
    small = ~big
    phi = np.arccos(np.clip(q[small] / Q_CRIT, -1.0, 1.0)) / 3.0
    largest = c * np.cos(phi)
    smallest = c * np.cos(phi + 2.0 * np.pi / 3.0)
    y[small] = np.where(q[small] > 0.0, largest, smallest)
    # one Newton polish away from the double root
    dp = 3.0 * y * y - 1.0
    ok = np.abs(dp) > 1e-6
    y[ok] = y[ok] - (y[ok] ** 3 - y[ok] - q[ok]) / dp[ok]
    return y[0] if scalar else y


def branch_label(q):
    q = np.asarray(q, dtype=float)
    return np.where(np.abs(q) > Q_CRIT, "outer", np.where(q > 0, "right", "left"))


def entropy_cusp_solution(theta, t, t_star=0.0):
    """Entropy solution of the cusp model after the blowup time.

    w = [theta - s^{3/2} Y^3(q)] / s,  s = t - t_star,  q = theta / s^{3/2}.
    This is the solution emanating from the compressive cusp
    w(theta, t_star) = -cbrt(theta); it has a stationary shock at theta = 0
    with traces w(0-) = +sqrt(s), w(0+) = -sqrt(s).
    """
    s = t - t_star
    if s <= 0.0:
        raise ValueError("entropy continuation needs t > t_star")
    theta = np.asarray(theta, dtype=float)
    s32 = s ** 1.5
    y = cubic_branch_root(theta / s32)
    return (theta - s32 * y ** 3) / s


def cusp_traces(t, t_star=0.0):
    """One-sided limits at theta = 0 (from the q -> 0- / 0+ branches)."""
    s = t - t_star
    w_minus = float(-np.sqrt(s) * cubic_branch_root(-0.0))
    w_plus = float(-np.sqrt(s) * cubic_branch_root(np.nextafter(0.0, 1.0)))
    return w_minus, w_plus


@dataclass
class ShockState:
    t: float
    theta_star: float
    w_minus: float
    w_plus: float
    speed: float


@dataclass
class RankineHugoniotReport:
    residual: float
    jump_rho_positive: bool
    jump_utheta_positive: bool
    jump_ur: float
    entropy_ok: bool


def rankine_hugoniot_check(state, r=1.0):
    """Shock speed against the jump ratio [rho u_theta]/[rho] for rho = u_theta = r w / 2.

    Jumps are taken as left minus right.  Angular speed of the discontinuity
    compared with the jump ratio divided by r.
    """
    rho_l, rho_r = 0.5 * r * state.w_minus, 0.5 * r * state.w_plus
    ut_l, ut_r = rho_l, rho_r
    jump_rho = rho_l - rho_r
    if jump_rho == 0.0:
        ratio = 0.5 * (state.w_minus + state.w_plus)
    else:
        ratio = (rho_l * ut_l - rho_r * ut_r) / jump_rho / r
    return RankineHugoniotReport(
        residual=abs(state.speed - ratio),
        jump_rho_positive=jump_rho > 0.0,
        jump_utheta_positive=(ut_l - ut_r) > 0.0,
        jump_ur=0.0,
        entropy_ok=state.w_minus > state.w_plus,
    )


def cusp_shock_state(t, t_star=0.0, dt=1e-6):
    """Shock state of the cusp model; speed measured from the shock track.

    The shock is located by bisection on the sign change of w (w > 0 on the
    left, w < 0 on the right) at two nearby times, so the speed is measured
    rather than assumed.
    """
    def locate(tt):
        lo, hi = -(tt - t_star) ** 1.5, (tt - t_star) ** 1.5
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if entropy_cusp_solution(mid, tt, t_star) > 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 4 * np.spacing(max(abs(lo), abs(hi), 1e-300)):
                break
        return 0.5 * (lo + hi)
    x0 = locate(t)
    x1 = locate(t + dt)
    w_minus, w_plus = cusp_traces(t, t_star)
    return ShockState(t=t, theta_star=x0, w_minus=w_minus, w_plus=w_plus,
                      speed=(x1 - x0) / dt)


def lax_oleinik_oracle(theta, s, n_grid=200001):
    """Entropy solution of Burgers with datum -cbrt(y) by direct minimisation.

    w(theta, s) = (theta - y*)/s with y* minimising (theta - y)^2/(2s) - (3/4)|y|^{4/3}.
    Independent of the cubic-root formula; used as a test oracle.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    out = np.empty_like(theta)
    for k, th in enumerate(theta):
        span = abs(th) + 4.0 * s ** 1.5 + 1e-12
        y = np.linspace(th - span, th + span, n_grid)
        f = (th - y) ** 2 / (2.0 * s) - 0.75 * np.abs(y) ** (4.0 / 3.0)
        j = int(np.argmin(f))
        lo, hi = y[max(j - 2, 0)], y[min(j + 2, n_grid - 1)]
        for _ in range(200):
            m1 = lo + (hi - lo) / 3.0
            m2 = hi - (hi - lo) / 3.0
            f1 = (th - m1) ** 2 / (2 * s) - 0.75 * abs(m1) ** (4.0 / 3.0)
            f2 = (th - m2) ** 2 / (2 * s) - 0.75 * abs(m2) ** (4.0 / 3.0)
            if f1 < f2:
                hi = m2
            else:
                lo = m1
        out[k] = (th - 0.5 * (lo + hi)) / s
    return out


def snapshot(datum, t, n=4096, continue_past_blowup=False, t_star=None):
    """Columns theta, w, branch for the CLI.

    Before blowup the exact characteristic solution is sampled.  After blowup
    only the local cusp model is continued (branch labels left/right/outer).
    """
    theta = periodic_grid(n)
    tb = blowup_predict(datum, n=n)[0] if t_star is None else t_star
    if t < tb:
        w, _ = burgers_evolve(datum, t, theta)
        return theta, w, np.full(n, "pre")
    if not continue_past_blowup:
        raise ValueError("t is past blowup; pass continue_past_blowup")
    s = t - tb
    q = theta / s ** 1.5
    w = entropy_cusp_solution(theta, t, tb)
    return theta, w, branch_label(q)
