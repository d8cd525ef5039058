"""Maximum R against its Abel comparison curve and the R^2 envelope.

The comparison ODE y' = -r y + y^2 + alpha' y^3 / 4 is driven by the recorded
r(t) and started at max R(0). It must stay above max R. The closed-form R^2
envelope is valid until its denominator vanishes.

    python demos/maximum_principle_bounds.py
"""

import numpy as np

from rgflow.curvature import FlowParams
from rgflow.flow import EnvelopeExpired, abel_comparison, r_squared_bound, run
from rgflow.initial import bump
from rgflow.surface import build_sphere

domain = build_sphere(4)
params = FlowParams(alpha_prime=0.2, t_end=0.5, sample_stride=20)
traj = run(domain, bump(domain, width=0.5, height=0.1), params)

t = traj.times
max_R = traj.series("max_R")
min_R = traj.series("min_R")
y = abel_comparison(traj.step_times, traj.step_r, max_R[0], params, t)
R0_sq = max(max_R[0] ** 2, min_R[0] ** 2)

print(f"{'t':>6} {'max R':>9} {'Abel y':>9} {'max R^2':>9} {'envelope':>9}")
for ti, hi, lo, yi in zip(t, max_R, min_R, y):
    try:
        env = f"{r_squared_bound(ti, R0_sq, domain, params, vol=traj.samples[0].diagnostics.volume):9.4f}"
    except EnvelopeExpired:
        env = "  expired"
    print(f"{ti:6.3f} {hi:9.4f} {yi:9.4f} {max(hi * hi, lo * lo):9.4f} {env}")
print("Abel comparison holds:", bool(np.all(max_R <= y + 1e-4)))
