# Phase shedding for a multi-phase regulator, driven by power estimates.
#
# Fixed per-phase losses dominate at light load, conduction loss at heavy
# load, so the efficiency-optimal phase count grows with power.  A lookup
# table maps monitored power to that optimal count; shedding phases at light
# load saves input power relative to always running all phases.

import numpy as np

import powertree as pt

model = pt.PdnModel()  # 5 phases, 0.1 W fixed/phase, 20 mOhm, 1 V
print("input power (W) by load and phase count:")
print("load\\n " + "".join(f"{n:>8d}" for n in range(1, 6)))
for load in (0.5, 1.0, 2.0, 5.0, 10.0, 20.0):
    row = [pt.input_power(model, load, n) for n in range(1, 6)]
    star = int(np.argmin(row))
    cells = "".join(f"{v:8.3f}" for v in row)
    print(f"{load:5.1f} {cells}   -> {star + 1} phases")

lut = pt.build_lut(model, np.linspace(0.5, 25.0, 99))
print("\nlookup table (breakpoint W -> phases):")
print("  " + ", ".join(f"{b:.2f}->{n}" for b, n in
                       zip(lut.breakpoints, lut.phases)))

# %% shed over a monitored power sequence (static + dynamic per period)
design = pt.generate_design(pt.hybrid_design_spec(seed=1))
ds = pt.simulate_dataset(design, 400, 300, seed=5)
tree = pt.fit_tree(ds, pt.HyperParams(6, 5, 5, 0.001))
estimates = pt.predict_tree_batch(tree, ds.features[:40])
powers = design.static_power + estimates

decisions, eff = pt.shed(model, lut, powers)
print(f"\n40 periods, power {powers.min():.2f}..{powers.max():.2f} W")
print("phase decisions:", "".join(str(n) for n in decisions))
print(f"efficiency improvement vs always-5-phases: {eff:.4f} "
      f"({100 * eff:.2f}%)")
