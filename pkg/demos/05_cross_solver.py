"""The physical and self-similar solvers describe the same solution.

The self-similar run is stopped at a few marks; the physical particle run
is advanced to the same physical time and both are compared on the
particle positions.  Agreement holds while the front is resolved.
"""
from eulershock.cli_io import RunConfig, cross_solver_check

cfg = RunConfig.from_dict({"gamma": 1.4, "epsilon": 0.05})
res = cross_solver_check(cfg)
for r in res["rows"]:
    print(f"s={r['s']:.3f} t={r['t']: .4e} max slope={r['max_slope']:7.1f} "
          f"|dw|={r['err_w']:.1e} |dz|={r['err_z']:.1e} |da|={r['err_a']:.1e}")
print(f"sup error in w while resolved: {res['sup_err_w']:.1e} (passed: {res['passed']})")
