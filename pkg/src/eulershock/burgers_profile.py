"""
The stable steady self-similar Burgers profile Wbar.

Wbar is the real root of  W**3 + W + x = 0, i.e. x = -Wbar - Wbar**3.  It solves
the steady self-similar Burgers equation  -W/2 + (3x/2 + W) W_x = 0  with
W(0) = 0, W_x(0) = -1, W_xxx(0) = 6.  Derivatives are exact rational
functions of Wbar obtained by implicit differentiation.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class ProfileSample:
    x: np.ndarray
    w_bar: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    d4: np.ndarray


def wbar(x):
    """Real root of W**3 + W + x = 0, vectorised, accurate near x = 0 and for large |x|."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    # u = cbrt(|x|/2 + sqrt(1/27 + x^2/4)); the second Cardano term equals 1/(3u)
    u = np.cbrt(0.5 * ax + np.sqrt(1.0 / 27.0 + 0.25 * ax * ax))
    w = -np.sign(x) * (u - 1.0 / (3.0 * u))
    # one Halley step on p(W) = W^3 + W + x; repairs the cancellation in u - 1/(3u)
    p = w * w * w + w + x
    dp = 3.0 * w * w + 1.0
    ddp = 6.0 * w
    return w - 2.0 * p * dp / (2.0 * dp * dp - p * ddp)


def wbar_derivatives(w):
    """First four x-derivatives of Wbar expressed through the value w = Wbar(x)."""
    d1 = -1.0 / (1.0 + 3.0 * w * w)
    d1sq = d1 * d1
    d2 = 6.0 * w * d1 * d1sq
    d3 = 6.0 * d1sq * d1sq + 108.0 * w * w * d1sq * d1sq * d1
    d1_6 = d1sq * d1sq * d1sq
    d4 = 360.0 * w * d1_6 + 3240.0 * w ** 3 * d1_6 * d1
    return d1, d2, d3, d4


def eval_profile(x):
    x = np.asarray(x, dtype=float)
    w = wbar(x)
    d1, d2, d3, d4 = wbar_derivatives(w)
    return ProfileSample(x=x, w_bar=w, d1=d1, d2=d2, d3=d3, d4=d4)


def cubic_residual(x, relative=True):
    """|x + W + W^3|, optionally scaled by |x| + |W| + |W|^3 (round-off level ~1e-16)."""
    x = np.asarray(x, dtype=float)
    w = wbar(x)
    r = np.abs(x + w + w ** 3)
    if relative:
        r = r / np.maximum(np.abs(x) + np.abs(w) + np.abs(w) ** 3, 1.0)
    return r


def steady_residual(x, relative=False):
    """Worst residual of  -W/2 + (3x/2 + W) W_x  over the grid."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = wbar(x)
    d1 = wbar_derivatives(w)[0]
    r = np.abs(-0.5 * w + (1.5 * x + w) * d1)
    if relative:
        r = r / np.maximum(0.5 * np.abs(w) + np.abs(1.5 * x + w) * np.abs(d1), 1.0)
    return float(np.max(r))


def _w_over_x(x, w):
    out = np.full_like(x, -1.0)
    nz = x != 0.0
    out[nz] = w[nz] / x[nz]
    return out


def damping_margins(x):
    """Pointwise LHS - RHS of the two damping inequalities for Wbar.

    (a) 1 + 2 W_x + 2 (3/2 + W/x)/(1 + x^2) - 6 x^2/(1 + 8 x^2)
    (b) 5/2 + 3 W_x + (3/2 + W/x)/(1 + x^2) - x^2/(1 + x^2)
    W/x is replaced by its limit -1 at x = 0.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = wbar(x)
    d1 = wbar_derivatives(w)[0]
    q = (1.5 + _w_over_x(x, w)) / (1.0 + x * x)
    x2 = x * x
    margin_a = 1.0 + 2.0 * d1 + 2.0 * q - 6.0 * x2 / (1.0 + 8.0 * x2)
    margin_b = 2.5 + 3.0 * d1 + q - x2 / (1.0 + x2)
    return margin_a, margin_b


@dataclass
class DampingReport:
    min_a: float
    x_min_a: float
    min_b: float
    x_min_b: float
    tol: float
    violations: list

    @property
    def ok(self):
        return not self.violations


def check_damping_inequalities(x, tol=1e-12):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ma, mb = damping_margins(x)
    ia, ib = int(np.argmin(ma)), int(np.argmin(mb))
    violations = []
    if ma[ia] < -tol:
        violations.append(("a", float(x[ia]), float(ma[ia])))
    if mb[ib] < -tol:
        violations.append(("b", float(x[ib]), float(mb[ib])))
    return DampingReport(float(ma[ia]), float(x[ia]), float(mb[ib]), float(x[ib]),
                         tol, violations)


def profile_table(xmin, xmax, n, log_spacing=False):
    """Columns x, wbar, d1..d4, margin_a, margin_b as a dict of arrays."""
    if log_spacing:
        x = np.geomspace(xmin, xmax, n)
    else:
        x = np.linspace(xmin, xmax, n)
    s = eval_profile(x)
    ma, mb = damping_margins(x)
    return {"x": x, "wbar": s.w_bar, "d1": s.d1, "d2": s.d2, "d3": s.d3,
            "d4": s.d4, "margin_a": ma, "margin_b": mb}
