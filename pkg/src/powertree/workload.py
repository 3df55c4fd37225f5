"""Synthetic gate-level workloads with closed-form dynamic power.

Stands in for an RTL simulation and power-analysis toolchain.  A design is a
random netlist of capacitive nets plus DSP-like arithmetic units whose power
is a nonlinear function of input activity.  Per-period toggle activity is
synthesized with grouped (correlated) toggle rates, and every activity sample
is labeled with the exact dynamic power it dissipates, so regression models
and the hardware-monitor simulator can be checked against ground truth.

Power model
-----------
For a period of ``L`` cycles the activity of net ``i`` is its positive-edge
count ``a_i``, normalized to ``alpha_i = a_i / L``.  Dynamic power is

    P = sum_i alpha_i * C_i * vdd^2 * f            (capacitive nets)
      + sum_u coeff_u * mean(alpha over unit inputs)^2   (nonlinear units)

Static power is a configurable constant kept out of ``dynamic_power``; it is
only added back where total logic power is needed (phase shedding).

Stimulus model
--------------
Nets belong to equal-sized correlation groups.  Each period draws one toggle
rate per group from a three-mode regime mixture (idle / half / busy, with
small uniform jitter), imitating applications that switch between discrete
activity regimes; a net then emits ``0/1`` pulses as independent Bernoulli
events at its group's rate, one pulse slot per two cycles.  Nets in the same
group therefore carry strongly correlated, largely redundant activity, which
is what recursive feature elimination is expected to prune.  All nonlinear
units of a design average nets drawn from one shared pair of groups (think
of a MAC cluster fed by two buses); the resulting squared-mean power has
regime curvature and a cross-group interaction that a linear model cannot
represent but a tree resolves with a handful of splits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

__all__ = [
    "DEFAULT_NONLINEAR_STRENGTH",
    "DesignSpec",
    "Net",
    "NonlinearUnit",
    "SyntheticDesign",
    "ToggleTrace",
    "Sample",
    "Dataset",
    "generate_design",
    "activity",
    "dynamic_power",
    "simulate_dataset",
    "synthesize_trace",
    "rank_signals_by_activity",
    "compose_datasets",
    "hybrid_design_spec",
    "linear_design_spec",
    "save_design",
    "load_design",
    "save_dataset",
    "load_dataset",
]

# Documented default: sized so the nonlinear units carry most of the power
# budget on hybrid designs, which makes the tree-vs-linear accuracy gap
# clearly visible.
DEFAULT_NONLINEAR_STRENGTH = 8.0

# Activity-regime mixture: per period, each group's toggle rate is one of
# these modes plus uniform jitter of +-RATE_JITTER.
RATE_MODES = (0.05, 0.5, 0.95)
RATE_JITTER = 0.02


@dataclass(frozen=True)
class DesignSpec:
    """Parameters for random design generation."""

    n_linear_nets: int
    n_nonlinear_units: int = 0
    capacitance_range: tuple[float, float] = (2e-10, 1.2e-9)
    vdd: float = 1.0
    clock_freq: float = 100e6
    static_power: float = 0.5
    nonlinear_strength: float = DEFAULT_NONLINEAR_STRENGTH
    correlation_groups: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        cmin, cmax = self.capacitance_range
        if not (cmin > 0 and cmin <= cmax):
            raise ValueError("capacitance_range must satisfy 0 < min <= max")
        if self.vdd <= 0:
            raise ValueError("vdd must be positive")
        if self.clock_freq <= 0:
            raise ValueError("clock_freq must be positive")
        if self.n_linear_nets < 0 or self.n_nonlinear_units < 0:
            raise ValueError("net and unit counts must be non-negative")
        if self.n_linear_nets + self.n_nonlinear_units < 1:
            raise ValueError("design must contain at least one net or unit")
        if self.n_nonlinear_units > 0 and self.n_linear_nets == 0:
            raise ValueError("nonlinear units need nets to draw inputs from")
        if self.nonlinear_strength < 0:
            raise ValueError("nonlinear_strength must be >= 0")
        if self.correlation_groups < 1:
            raise ValueError("correlation_groups must be >= 1")
        if self.static_power < 0:
            raise ValueError("static_power must be >= 0")


@dataclass(frozen=True)
class Net:
    id: str
    capacitance: float
    group: int


@dataclass(frozen=True)
class NonlinearUnit:
    inputs: tuple[str, ...]
    coefficient: float


@dataclass(frozen=True)
class SyntheticDesign:
    """A concrete random netlist; the ground-truth power generator."""

    nets: tuple[Net, ...]
    nonlinear_units: tuple[NonlinearUnit, ...]
    vdd: float
    clock_freq: float
    static_power: float

    def __post_init__(self) -> None:
        ids = [n.id for n in self.nets]
        if len(set(ids)) != len(ids):
            raise ValueError("net ids must be unique")
        known = set(ids)
        for u in self.nonlinear_units:
            if not u.inputs:
                raise ValueError("nonlinear unit with no inputs")
            missing = set(u.inputs) - known
            if missing:
                raise ValueError(f"unit references unknown nets: {sorted(missing)}")

    @property
    def n_nets(self) -> int:
        return len(self.nets)

    @property
    def net_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nets)

    def capacitance_array(self) -> np.ndarray:
        return np.array([n.capacitance for n in self.nets], dtype=np.float64)

    def group_array(self) -> np.ndarray:
        return np.array([n.group for n in self.nets], dtype=np.intp)

    def unit_index_arrays(self) -> list[np.ndarray]:
        pos = {n.id: i for i, n in enumerate(self.nets)}
        return [
            np.array([pos[s] for s in u.inputs], dtype=np.intp)
            for u in self.nonlinear_units
        ]

    def with_clock_freq(self, clock_freq: float) -> "SyntheticDesign":
        """Same netlist retargeted to a different operating frequency."""
        if clock_freq <= 0:
            raise ValueError("clock_freq must be positive")
        return replace(self, clock_freq=clock_freq)


@dataclass(frozen=True)
class ToggleTrace:
    """Cycle-resolved signal levels, one row per signal.

    The cumulative transition count s(sig, t) counts positive edges over the
    first t cycles, with the edge detector assumed to start from level 0.
    It is non-decreasing and grows by at most one per cycle.
    """

    signal_ids: tuple[str, ...]
    levels: np.ndarray  # (n_signals, n_cycles), values 0/1

    def __post_init__(self) -> None:
        if self.levels.ndim != 2 or self.levels.shape[0] != len(self.signal_ids):
            raise ValueError("levels must be (n_signals, n_cycles)")
        if self.levels.size and not np.isin(self.levels, (0, 1)).all():
            raise ValueError("levels must be 0/1")

    @property
    def n_signals(self) -> int:
        return len(self.signal_ids)

    @property
    def n_cycles(self) -> int:
        return self.levels.shape[1]

    def signal_index(self, sig: str) -> int:
        try:
            return self.signal_ids.index(sig)
        except ValueError:
            raise ValueError(f"unknown signal id: {sig!r}") from None

    def cumulative_counts(self, sig: str) -> np.ndarray:
        """s(sig, t) for t = 0..n_cycles."""
        lv = self.levels[self.signal_index(sig)]
        prev = np.concatenate(([0], lv[:-1]))
        edges = (lv == 1) & (prev == 0)
        return np.concatenate(([0], np.cumsum(edges)))

    def select_signals(self, ids: list[str] | tuple[str, ...]) -> "ToggleTrace":
        rows = [self.signal_index(s) for s in ids]
        return ToggleTrace(tuple(ids), self.levels[rows])


@dataclass(frozen=True)
class Sample:
    """One estimation period: activity counts and the power they caused."""

    features: np.ndarray  # (n_features,) unsigned counts
    true_dynamic_power: float
    period_cycles: int


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (n_samples, n_features) integer counts
    powers: np.ndarray  # (n_samples,) watts
    feature_names: tuple[str, ...]
    period_cycles: int
    clock_freq: float

    def __post_init__(self) -> None:
        f, p = self.features, self.powers
        if f.ndim != 2 or p.ndim != 1 or f.shape[0] != p.shape[0]:
            raise ValueError("features must be (n, F) with matching powers (n,)")
        if f.shape[1] != len(self.feature_names):
            raise ValueError("feature_names must match feature columns")
        if self.period_cycles < 1:
            raise ValueError("period_cycles must be >= 1")
        if f.size:
            if f.min() < 0 or f.max() > self.period_cycles:
                raise ValueError("activity counts must lie in [0, period_cycles]")
            if p.min() < 0:
                raise ValueError("true dynamic power must be >= 0")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def sample(self, i: int) -> Sample:
        return Sample(self.features[i].copy(), float(self.powers[i]), self.period_cycles)

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(self.features[rows], self.powers[rows],
                       self.feature_names, self.period_cycles, self.clock_freq)

    def select_features(self, names) -> "Dataset":
        pos = {n: i for i, n in enumerate(self.feature_names)}
        try:
            cols = [pos[n] for n in names]
        except KeyError as e:
            raise ValueError(f"unknown feature name: {e.args[0]!r}") from None
        return Dataset(self.features[:, cols], self.powers,
                       tuple(names), self.period_cycles, self.clock_freq)


def generate_design(spec: DesignSpec) -> SyntheticDesign:
    """Draw a random design. Deterministic given spec.seed."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_linear_nets
    width = max(3, len(str(max(n - 1, 0))))
    ids = tuple(f"net_{i:0{width}d}" for i in range(n))
    cmin, cmax = spec.capacitance_range
    caps = rng.uniform(cmin, cmax, size=n)

    n_groups = min(spec.correlation_groups, n) if n else 1
    group_of = np.empty(n, dtype=np.intp)
    group_of[rng.permutation(n)] = np.arange(n) % n_groups
    nets = tuple(Net(ids[i], float(caps[i]), int(group_of[i])) for i in range(n))

    # Per-unit budget sized against the full-activity capacitive power so
    # nonlinear_strength stays dimensionless.
    mean_cap = 0.5 * (cmin + cmax)
    unit_scale = (spec.nonlinear_strength * spec.vdd ** 2 * spec.clock_freq
                  * mean_cap * max(n, 1) / max(spec.n_nonlinear_units, 1))
    units = []
    if spec.n_nonlinear_units:
        # All units of a design sit between one shared pair of groups.
        shared = rng.choice(n_groups, size=min(2, n_groups), replace=False)
        pool = [i for i in range(n) if group_of[i] in shared]
        for _ in range(spec.n_nonlinear_units):
            k = min(len(pool), int(rng.integers(8, 17)))
            chosen = rng.choice(pool, size=k, replace=False)
            coeff = float(unit_scale * rng.uniform(0.5, 1.5))
            units.append(NonlinearUnit(
                tuple(ids[int(i)] for i in sorted(chosen)), coeff))

    return SyntheticDesign(nets, tuple(units), spec.vdd, spec.clock_freq,
                           spec.static_power)


def _draw_rates(rng: np.random.Generator, shape) -> np.ndarray:
    """Per-group toggle rates: a regime mode plus uniform jitter."""
    modes = np.asarray(RATE_MODES)[rng.integers(0, len(RATE_MODES), size=shape)]
    return modes + rng.uniform(-RATE_JITTER, RATE_JITTER, size=shape)


def activity(trace: ToggleTrace, sig: str, t_start: int, t_end: int) -> int:
    """Positive-edge count of ``sig`` over cycles (t_start, t_end]."""
    if not (0 <= t_start <= t_end <= trace.n_cycles):
        raise ValueError("need 0 <= t_start <= t_end <= n_cycles")
    s = trace.cumulative_counts(sig)
    return int(s[t_end] - s[t_start])


def _dynamic_power_batch(design: SyntheticDesign, counts: np.ndarray,
                         period_cycles: int) -> np.ndarray:
    alphas = counts.astype(np.float64) / period_cycles
    per_net = design.capacitance_array() * design.vdd ** 2 * design.clock_freq
    p = alphas @ per_net
    for unit, idx in zip(design.nonlinear_units, design.unit_index_arrays()):
        ubar = alphas[:, idx].mean(axis=1)
        p = p + unit.coefficient * ubar * ubar
    return p


def dynamic_power(design: SyntheticDesign, activities, period_cycles: int) -> float:
    """Exact dynamic power of one period, excluding static power."""
    a = np.asarray(activities, dtype=np.float64)
    if a.shape != (design.n_nets,):
        raise ValueError(f"expected {design.n_nets} activities, got shape {a.shape}")
    if period_cycles < 1:
        raise ValueError("period_cycles must be >= 1")
    if a.size and (a.min() < 0 or a.max() > period_cycles):
        raise ValueError("activities must lie in [0, period_cycles]")
    return float(_dynamic_power_batch(design, a[None, :], period_cycles)[0])


def simulate_dataset(design: SyntheticDesign, n_samples: int,
                     period_cycles: int, seed: int) -> Dataset:
    """Synthesize per-period activity features labeled with true power.

    Each period draws one toggle rate per correlation group; each net's edge
    count is then binomial over the period's pulse slots at its group's rate.
    Deterministic given seed.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if period_cycles < 1:
        raise ValueError("period_cycles must be >= 1")
    rng = np.random.default_rng(seed)
    group = design.group_array()
    n_groups = int(group.max()) + 1 if group.size else 1
    half = period_cycles // 2
    rates = _draw_rates(rng, (n_samples, n_groups))
    counts = rng.binomial(half, rates[:, group]) if design.n_nets else \
        np.zeros((n_samples, 0), dtype=np.int64)
    powers = _dynamic_power_batch(design, counts, period_cycles)
    return Dataset(counts.astype(np.int64), powers, design.net_ids,
                   period_cycles, design.clock_freq)


def synthesize_trace(design: SyntheticDesign, n_periods: int,
                     period_cycles: int, seed: int) -> ToggleTrace:
    """Cycle-level level trace matching the simulate_dataset stimulus model.

    Pulses occupy the odd cycle of each two-cycle slot, so every pulse is a
    clean rising edge and period boundaries never hide or fabricate edges.
    """
    if n_periods < 1:
        raise ValueError("n_periods must be >= 1")
    if period_cycles < 1:
        raise ValueError("period_cycles must be >= 1")
    rng = np.random.default_rng(seed)
    group = design.group_array()
    n_groups = int(group.max()) + 1 if group.size else 1
    half = period_cycles // 2
    levels = np.zeros((design.n_nets, n_periods * period_cycles), dtype=np.uint8)
    for p in range(n_periods):
        rates = _draw_rates(rng, n_groups)
        pulses = rng.random((design.n_nets, half)) < rates[group][:, None]
        block = levels[:, p * period_cycles:(p + 1) * period_cycles]
        block[:, 1:2 * half:2] = pulses
    return ToggleTrace(design.net_ids, levels)


def rank_signals_by_activity(dataset: Dataset, top_m: int = 100) -> list[str]:
    """Signal ids sorted by total activity, descending; ties keep dataset order."""
    if not (1 <= top_m <= dataset.n_features):
        raise ValueError("top_m must lie in [1, n_features]")
    totals = dataset.features.sum(axis=0)
    order = sorted(range(dataset.n_features), key=lambda j: (-int(totals[j]), j))
    return [dataset.feature_names[j] for j in order[:top_m]]


def compose_datasets(parts: list[tuple[str, Dataset]]) -> Dataset:
    """Additive composite of sub-designs: features concatenated under
    ``prefix.name`` columns, powers summed sample-wise."""
    if not parts:
        raise ValueError("need at least one part")
    n = len(parts[0][1])
    period = parts[0][1].period_cycles
    freq = parts[0][1].clock_freq
    for _, ds in parts:
        if len(ds) != n or ds.period_cycles != period or ds.clock_freq != freq:
            raise ValueError("parts must share sample count, period and clock")
    names: list[str] = []
    for prefix, ds in parts:
        names.extend(f"{prefix}.{f}" for f in ds.feature_names)
    if len(set(names)) != len(names):
        raise ValueError("prefixes must make feature names unique")
    features = np.hstack([ds.features for _, ds in parts])
    powers = np.sum([ds.powers for _, ds in parts], axis=0)
    return Dataset(features, powers, tuple(names), period, freq)


def hybrid_design_spec(seed: int = 1) -> DesignSpec:
    """Documented default hybrid workload: capacitive nets plus DSP-like
    units, sized for the 100-candidate feature-selection protocol."""
    return DesignSpec(n_linear_nets=120, n_nonlinear_units=3,
                      correlation_groups=3, seed=seed)


def linear_design_spec(seed: int = 2) -> DesignSpec:
    """Purely capacitive workload: power is exactly linear in activity."""
    return DesignSpec(n_linear_nets=60, n_nonlinear_units=0,
                      nonlinear_strength=0.0, correlation_groups=6, seed=seed)


# ---------------------------------------------------------------------------
# Persistence: designs as JSON, datasets as delimited text plus a JSON sidecar.

def save_design(design: SyntheticDesign, path: str | Path) -> None:
    doc = {
        "format": "powertree-design-v1",
        "vdd_v": design.vdd,
        "clock_freq_hz": design.clock_freq,
        "static_power_w": design.static_power,
        "nets": [[n.id, n.capacitance, n.group] for n in design.nets],
        "nonlinear_units": [[list(u.inputs), u.coefficient]
                            for u in design.nonlinear_units],
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_design(path: str | Path) -> SyntheticDesign:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "powertree-design-v1":
        raise ValueError(f"{path}: not a design file")
    nets = tuple(Net(i, float(c), int(g)) for i, c, g in doc["nets"])
    units = tuple(NonlinearUnit(tuple(ins), float(c))
                  for ins, c in doc["nonlinear_units"])
    return SyntheticDesign(nets, units, float(doc["vdd_v"]),
                           float(doc["clock_freq_hz"]),
                           float(doc["static_power_w"]))


def save_dataset(dataset: Dataset, csv_path: str | Path,
                 meta_path: str | Path | None = None,
                 vdd: float | None = None) -> None:
    csv_path = Path(csv_path)
    lines = [",".join(list(dataset.feature_names) + ["power_w"])]
    for row, p in zip(dataset.features, dataset.powers):
        lines.append(",".join(str(int(v)) for v in row) + "," + repr(float(p)))
    csv_path.write_text("\n".join(lines) + "\n")
    meta = {
        "period_cycles": dataset.period_cycles,
        "clock_freq_hz": dataset.clock_freq,
    }
    if vdd is not None:
        meta["vdd_v"] = vdd
    if meta_path is None:
        meta_path = csv_path.with_suffix(csv_path.suffix + ".meta.json")
    Path(meta_path).write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")


def load_dataset(csv_path: str | Path,
                 meta_path: str | Path | None = None) -> Dataset:
    csv_path = Path(csv_path)
    if meta_path is None:
        meta_path = csv_path.with_suffix(csv_path.suffix + ".meta.json")
    meta = json.loads(Path(meta_path).read_text())
    lines = [l for l in csv_path.read_text().splitlines() if l]
    header = lines[0].split(",")
    if header[-1] != "power_w":
        raise ValueError(f"{csv_path}: last column must be power_w")
    names = tuple(header[:-1])
    features = np.zeros((len(lines) - 1, len(names)), dtype=np.int64)
    powers = np.zeros(len(lines) - 1, dtype=np.float64)
    for i, line in enumerate(lines[1:]):
        cells = line.split(",")
        features[i] = [int(c) for c in cells[:-1]]
        powers[i] = float(cells[-1])
    return Dataset(features, powers, names,
                   int(meta["period_cycles"]), float(meta["clock_freq_hz"]))
