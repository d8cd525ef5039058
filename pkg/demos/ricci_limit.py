"""The alpha' -> 0 limit recovers normalized Ricci flow.

Runs with alpha' = 0.2, 0.1, 0.05 are compared with alpha' = 0 at matching
times. The sup distance should halve with alpha'.

    python demos/ricci_limit.py
"""

from rgflow.validation import TORUS_PERTURBED, check_ricci_limit

c = check_ricci_limit(scenario=TORUS_PERTURBED)
print(c.context)
print(f"largest ratio of consecutive distances: {c.measured:.3f} (needs <= {c.threshold})")
