# Synthetic workloads with exact dynamic power.
#
# Builds a random netlist, synthesizes per-period toggle activity, and shows
# that every dataset label can be recomputed from first principles: the
# capacitive term alpha*C*Vdd^2*f per net plus a squared-mean-activity term
# per DSP-like unit.

import numpy as np

import powertree as pt

spec = pt.hybrid_design_spec(seed=1)
design = pt.generate_design(spec)
print(f"design: {design.n_nets} nets, {len(design.nonlinear_units)} "
      f"nonlinear units, Vdd={design.vdd} V, f={design.clock_freq/1e6:.0f} MHz")
for i, unit in enumerate(design.nonlinear_units):
    print(f"  unit {i}: {len(unit.inputs)} inputs, "
          f"coefficient {unit.coefficient:.3f} W")

# %% one estimation period at cycle level
trace = pt.synthesize_trace(design, n_periods=2, period_cycles=300, seed=42)
sig = design.net_ids[0]
print(f"\nfirst 24 cycle levels of {sig}:",
      "".join(str(b) for b in trace.levels[0, :24]))
print("positive edges per period:",
      [pt.activity(trace, sig, p * 300, (p + 1) * 300) for p in range(2)])

# %% a labeled dataset and its self-consistency
ds = pt.simulate_dataset(design, n_samples=1000, period_cycles=300, seed=5)
print(f"\ndataset: {len(ds)} samples x {ds.n_features} signals, "
      f"power {ds.powers.min():.2f}..{ds.powers.max():.2f} W "
      f"(mean {ds.powers.mean():.2f} W)")

recomputed = np.array([pt.dynamic_power(design, ds.features[i], 300)
                       for i in range(5)])
print("labels   :", np.round(ds.powers[:5], 6))
print("recomputed:", np.round(recomputed, 6))

# %% the power law itself: linear in f, quadratic in Vdd (capacitive nets)
lin = pt.generate_design(pt.linear_design_spec(seed=2))
acts = np.arange(lin.n_nets) % 100
p0 = pt.dynamic_power(lin, acts, 300)
p_2f = pt.dynamic_power(lin.with_clock_freq(2 * lin.clock_freq), acts, 300)
print(f"\ncapacitive design: P(f)={p0:.4f} W, P(2f)={p_2f:.4f} W, "
      f"ratio {p_2f/p0:.1f}")
