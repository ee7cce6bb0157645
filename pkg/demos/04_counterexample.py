"""
The B2 weight without bounded oscillation
=========================================

Run the counterexample experiment and read its tables: |Pf| stays away
from zero on the small disk while the weighted integral keeps growing as
the bands around Im z = 1/2 are refined.
"""

from bergman_lab import harness

cfg = harness.ExperimentConfig.from_dict({}, "counterexample")
rep = harness.run_experiment(cfg)

c = rep.constants
print(f"min |Pf| on the disk: {c['min_abs_Pf']:.4f}   |Pf(i/2)| = {c['pf_center']:.4f}")
print(f"B2 characteristic: {c['b2']:.4f}   APR: {c['apr']}")
for name, rows in rep.tables.items():
    print(f"\n{name}")
    keys = list(rows[0])
    print("  ".join(f"{k:>12}" for k in keys))
    for r in rows:
        print("  ".join(f"{harness._fmt(r[k]):>12.12}" for k in keys))

# the increments are nearly constant: the integral diverges like the number
# of levels, so the relative growth per level shrinks like 1/level
print("\nincrements:", [round(x, 4) for x in c["increments"]])
print("verdicts:", rep.verdicts)
