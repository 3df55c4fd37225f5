"""Multi-phase regulator efficiency and runtime phase shedding.

Loss family: each active phase costs a fixed loss, and conduction loss is
(I_out^2 * R) shared across phases, so

    input_power(load, n) = load + n*fixed + (load/V_out)^2 * R / n

Light loads favor few phases (fixed losses dominate), heavy loads favor many
(conduction dominates), and the optimal phase count is non-decreasing in
load.  A lookup table maps power breakpoints to the efficiency-optimal phase
count; the shedding loop applies it per estimation period and reports the
relative input-power saving against always running all phases, charging a
configurable transition loss whenever the phase count changes.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass
from pathlib import Path

__all__ = [
    "PdnModel",
    "PhaseLut",
    "input_power",
    "efficiency",
    "optimal_phases",
    "build_lut",
    "shed",
    "shed_rows",
    "save_pdn_model",
    "load_pdn_model",
    "save_lut",
    "load_lut",
    "shed_table_text",
]


@dataclass(frozen=True)
class PdnModel:
    max_phases: int = 5
    per_phase_fixed_loss: float = 0.1  # watts
    conduction_resistance: float = 0.02  # ohms
    output_voltage: float = 1.0  # volts
    transition_loss: float = 0.0  # average watts over a period, per change
    nominal_power: float = 20.0  # watts

    def __post_init__(self) -> None:
        if self.max_phases < 1:
            raise ValueError("max_phases must be >= 1")
        if min(self.per_phase_fixed_loss, self.conduction_resistance,
               self.transition_loss) < 0:
            raise ValueError("loss parameters must be >= 0")
        if self.output_voltage <= 0:
            raise ValueError("output_voltage must be positive")


@dataclass(frozen=True)
class PhaseLut:
    """Ascending power breakpoints mapped to optimal phase counts.

    A breakpoint's decision applies from that power up to the next
    breakpoint; loads below the first breakpoint use the first decision.
    """

    breakpoints: tuple[float, ...]
    phases: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.breakpoints or len(self.breakpoints) != len(self.phases):
            raise ValueError("breakpoints and phases must align, non-empty")
        if any(b >= a for a, b in zip(self.breakpoints[1:], self.breakpoints)):
            raise ValueError("breakpoints must be strictly ascending")
        if min(self.phases) < 1:
            raise ValueError("phase counts must be >= 1")

    def lookup(self, power: float) -> int:
        i = bisect.bisect_right(self.breakpoints, power) - 1
        return self.phases[max(i, 0)]


def input_power(model: PdnModel, load: float, n: int) -> float:
    """Total power drawn from the input rail to deliver `load` on n phases."""
    if not (1 <= n <= model.max_phases):
        raise ValueError(f"n must lie in [1, {model.max_phases}]")
    if load < 0:
        raise ValueError("load must be >= 0")
    current = load / model.output_voltage
    return (load + n * model.per_phase_fixed_loss
            + current * current * model.conduction_resistance / n)


def efficiency(model: PdnModel, load: float, n: int) -> float:
    total = input_power(model, load, n)
    return load / total if total > 0 else 0.0


def optimal_phases(model: PdnModel, load: float) -> int:
    """Phase count maximizing efficiency; ties pick fewer phases."""
    best_n, best_in = 1, input_power(model, load, 1)
    for n in range(2, model.max_phases + 1):
        p = input_power(model, load, n)
        if p < best_in:
            best_n, best_in = n, p
    return best_n


def _phase_boundary(model: PdnModel, n_from: int, lo: float,
                    hi: float) -> float:
    """Smallest representable load in (lo, hi] whose optimal phase count
    exceeds n_from, found by bisection (the optimum is non-decreasing)."""
    while math.nextafter(lo, hi) < hi:
        mid = 0.5 * (lo + hi)
        if optimal_phases(model, mid) > n_from:
            hi = mid
        else:
            lo = mid
    return hi


def build_lut(model: PdnModel, power_grid) -> PhaseLut:
    """Tabulate the optimal phase count over an ascending power grid.

    Breakpoints are placed exactly where the optimal count changes: each
    crossing between grid points is bisected down to the float boundary, so
    LUT decisions are pointwise optimal everywhere, not just on the grid.
    """
    grid = [float(p) for p in power_grid]
    if len(grid) < 2:
        raise ValueError("power grid needs at least 2 points")
    if any(b >= a for a, b in zip(grid[1:], grid)):
        raise ValueError("power grid must be strictly ascending")
    decisions = [optimal_phases(model, p) for p in grid]
    if any(b > a for a, b in zip(decisions[1:], decisions)):
        raise ValueError("optimal phase count must be non-decreasing in load")
    breakpoints = [grid[0]]
    phases = [decisions[0]]
    for lo, hi, target in zip(grid, grid[1:], decisions[1:]):
        while phases[-1] != target:
            edge = _phase_boundary(model, phases[-1], lo, hi)
            breakpoints.append(edge)
            phases.append(optimal_phases(model, edge))
            lo = edge
    return PhaseLut(tuple(breakpoints), tuple(phases))


def shed(model: PdnModel, lut: PhaseLut,
         powers) -> tuple[list[int], float]:
    """Phase decision per period plus the efficiency improvement

        1 - sum_i(P_opt(i) + P_loss(i)) / sum_i P_max(i)

    where P_opt / P_max are input powers under the LUT decision and the full
    phase count, and P_loss charges transition_loss whenever the decision
    changes between consecutive periods.
    """
    powers = [float(p) for p in powers]
    if not powers:
        raise ValueError("powers must be non-empty")
    decisions = [lut.lookup(p) for p in powers]
    opt_total = 0.0
    max_total = 0.0
    prev = None
    for p, n in zip(powers, decisions):
        opt_total += input_power(model, p, n)
        if prev is not None and n != prev:
            opt_total += model.transition_loss
        max_total += input_power(model, p, model.max_phases)
        prev = n
    return decisions, 1.0 - opt_total / max_total


def shed_rows(model: PdnModel, lut: PhaseLut,
              powers) -> list[tuple[int, float, int, float]]:
    """(period, power, phases, cumulative efficiency improvement) rows."""
    powers = [float(p) for p in powers]
    if not powers:
        raise ValueError("powers must be non-empty")
    rows = []
    opt_total = 0.0
    max_total = 0.0
    prev = None
    for i, p in enumerate(powers):
        n = lut.lookup(p)
        opt_total += input_power(model, p, n)
        if prev is not None and n != prev:
            opt_total += model.transition_loss
        max_total += input_power(model, p, model.max_phases)
        rows.append((i, p, n, 1.0 - opt_total / max_total))
        prev = n
    return rows


def shed_table_text(rows) -> str:
    lines = ["period,power_w,phases,cumulative_eff_impv"]
    for i, p, n, eff in rows:
        lines.append(f"{i},{p!r},{n},{eff!r}")
    return "\n".join(lines) + "\n"


def save_pdn_model(model: PdnModel, path: str | Path) -> None:
    doc = {
        "format": "powertree-pdn-v1",
        "max_phases": model.max_phases,
        "per_phase_fixed_loss_w": model.per_phase_fixed_loss,
        "conduction_resistance_ohm": model.conduction_resistance,
        "output_voltage_v": model.output_voltage,
        "transition_loss_w": model.transition_loss,
        "nominal_power_w": model.nominal_power,
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_pdn_model(path: str | Path) -> PdnModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "powertree-pdn-v1":
        raise ValueError("not a regulator-model document")
    return PdnModel(int(doc["max_phases"]),
                    float(doc["per_phase_fixed_loss_w"]),
                    float(doc["conduction_resistance_ohm"]),
                    float(doc["output_voltage_v"]),
                    float(doc["transition_loss_w"]),
                    float(doc["nominal_power_w"]))


def save_lut(lut: PhaseLut, path: str | Path) -> None:
    doc = {
        "format": "powertree-lut-v1",
        "breakpoints_w": list(lut.breakpoints),
        "phases": list(lut.phases),
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_lut(path: str | Path) -> PhaseLut:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "powertree-lut-v1":
        raise ValueError("not a phase-lut document")
    return PhaseLut(tuple(float(b) for b in doc["breakpoints_w"]),
                    tuple(int(n) for n in doc["phases"]))
