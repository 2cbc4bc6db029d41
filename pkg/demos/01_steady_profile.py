"""The stable self-similar Burgers profile and its damping margins.

Wbar solves x = -Wbar - Wbar^3.  It is odd, decreasing, has slope -1 and
third derivative 6 at the origin, and grows like -x^{1/3}.  The two damping
inequalities used by the stability argument hold with margin zero at x = 0
and positive margin elsewhere.
"""
import numpy as np

from eulershock.burgers_profile import (check_damping_inequalities, cubic_residual, eval_profile,
                                        steady_residual)

p = eval_profile(np.array([0.0, 1.0, 10.0, 1e3, 1e6]))
print("x        Wbar          Wbar_x        Wbar_xxx")
for x, w, d1, d3 in zip([0, 1, 10, 1e3, 1e6], p.w_bar, p.d1, p.d3):
    print(f"{x:<8g} {w: .6e} {d1: .6e} {d3: .6e}")

x = np.linspace(-100, 100, 10_000)
print("\nsteady equation residual on |x| <= 100:", steady_residual(x))
xs = np.geomspace(1e-6, 1e6, 4001)
print("relative cubic residual up to |x| = 1e6:", cubic_residual(np.concatenate([-xs, xs])).max())

rep = check_damping_inequalities(np.concatenate([-xs, xs]))
print(f"damping margins: min {rep.min_a:.3e} at x={rep.x_min_a:.2e}, "
      f"min {rep.min_b:.3e} at x={rep.x_min_b:.2e}, ok={rep.ok}")
