"""Bit-exact model of the in-fabric power monitor.

Three pieces, mirroring the hardware wrapper:

* positive-edge activity counters, one per monitored signal, cleared at
  every estimation-period boundary;
* a tree structure memory holding one 64-bit word per node;
* a four-state engine (idle, node reading, stalling, result outputting)
  that walks the memory once per period using unsigned integer compares
  only.  A leaf at depth d costs exactly 2*d + 1 cycles: two cycles per
  decision level (synchronous memory read plus stall) and one to present
  the result.

Node word layout (bit 63 is the leaf flag)::

    decision: [62:48] feature address   (15 bits)
              [47:28] threshold         (20 bits, matches counter width)
              [27:14] left child index  (14 bits)
              [13:0]  right child index (14 bits)
    leaf:     [15:0]  value             (16 bits, leaf_unit milliwatts/LSB)

Thresholds are stored floored; because activity counts are integers and
training thresholds are midpoints of observed counts, `x <= floor(t)` routes
every integer x exactly as `x <= t` does.  Leaf values round to the nearest
milliwatt.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import DecisionTree
from .workload import ToggleTrace

__all__ = [
    "LEAF_FLAG_BIT",
    "FEATURE_BITS",
    "THRESHOLD_BITS",
    "CHILD_BITS",
    "VALUE_BITS",
    "CounterState",
    "MemNode",
    "TreeMemoryImage",
    "EngineState",
    "MonitorConfig",
    "MalformedImageError",
    "node_encode",
    "node_decode",
    "quantize",
    "dequantize_mw",
    "counter_step",
    "engine_invoke",
    "period_features",
    "run_monitor",
    "validate_image",
    "save_image",
    "load_image",
    "fsm_trace_text",
]

LEAF_FLAG_BIT = 63
FEATURE_BITS = 15
THRESHOLD_BITS = 20
CHILD_BITS = 14
VALUE_BITS = 16

_FEATURE_SHIFT = 48
_THRESHOLD_SHIFT = 28
_LEFT_SHIFT = 14

IMAGE_MAGIC = b"PTMI"
_HEADER = struct.Struct("<4sIII")  # magic, n_nodes, max_depth, leaf_unit in uW


@dataclass(frozen=True)
class CounterState:
    """One activity counter plus its edge-detector register."""

    width: int = 20
    value: int = 0
    last_level: int = 0

    def __post_init__(self) -> None:
        if not (1 <= self.width <= 64):
            raise ValueError("width must lie in [1, 64]")
        if not (0 <= self.value < (1 << self.width)):
            raise ValueError("value out of counter range")
        if self.last_level not in (0, 1):
            raise ValueError("last_level must be 0 or 1")


def counter_step(state: CounterState, level: int) -> CounterState:
    """One clock: count a positive edge (previous level 0, current 1)."""
    if level not in (0, 1):
        raise ValueError("level must be 0 or 1")
    value = state.value
    if state.last_level == 0 and level == 1:
        value += 1
        if value >= (1 << state.width):
            raise OverflowError("activity counter overflow")
    return CounterState(state.width, value, level)


@dataclass(frozen=True)
class MemNode:
    """Decoded node word."""

    is_leaf: bool
    feature: int = 0
    threshold: int = 0
    left: int = 0
    right: int = 0
    value: int = 0  # leaf only, in leaf_unit LSBs


def _check_field(name: str, value: int, bits: int) -> None:
    if not (0 <= value < (1 << bits)):
        raise ValueError(f"{name}={value} does not fit in {bits} bits")


def node_encode(node: MemNode) -> int:
    if node.is_leaf:
        _check_field("value", node.value, VALUE_BITS)
        return (1 << LEAF_FLAG_BIT) | node.value
    _check_field("feature", node.feature, FEATURE_BITS)
    _check_field("threshold", node.threshold, THRESHOLD_BITS)
    _check_field("left", node.left, CHILD_BITS)
    _check_field("right", node.right, CHILD_BITS)
    return ((node.feature << _FEATURE_SHIFT)
            | (node.threshold << _THRESHOLD_SHIFT)
            | (node.left << _LEFT_SHIFT)
            | node.right)


def node_decode(word: int) -> MemNode:
    if not (0 <= word < (1 << 64)):
        raise ValueError("word must be an unsigned 64-bit value")
    if word >> LEAF_FLAG_BIT:
        return MemNode(True, value=word & ((1 << VALUE_BITS) - 1))
    return MemNode(
        False,
        feature=(word >> _FEATURE_SHIFT) & ((1 << FEATURE_BITS) - 1),
        threshold=(word >> _THRESHOLD_SHIFT) & ((1 << THRESHOLD_BITS) - 1),
        left=(word >> _LEFT_SHIFT) & ((1 << CHILD_BITS) - 1),
        right=word & ((1 << CHILD_BITS) - 1),
    )


@dataclass(frozen=True)
class TreeMemoryImage:
    """Tree structure memory: word 0 is the root."""

    words: np.ndarray  # uint64, breadth-first
    n_nodes: int
    max_depth: int
    leaf_unit: float = 1.0  # milliwatts per LSB

    def __post_init__(self) -> None:
        if self.n_nodes < 1 or self.words.shape != (self.n_nodes,):
            raise ValueError("words must hold n_nodes >= 1 entries")
        if self.leaf_unit <= 0:
            raise ValueError("leaf_unit must be positive")

    def node(self, address: int) -> MemNode:
        if not (0 <= address < self.n_nodes):
            raise MalformedImageError(f"node address {address} out of range")
        return node_decode(int(self.words[address]))


class MalformedImageError(ValueError):
    """Image violates the tree-memory invariants."""


def quantize(tree: DecisionTree) -> TreeMemoryImage:
    """Encode a fitted tree as integer node words, breadth-first.

    Requires non-negative thresholds and leaf values; leaf values must fit
    the 16-bit milliwatt field, node count the 14-bit child address field.
    """
    order: list = []
    queue = [tree.root]
    while queue:
        node = queue.pop(0)
        order.append(node)
        if not node.is_leaf:
            queue.append(node.left)
            queue.append(node.right)
    if len(order) > (1 << CHILD_BITS):
        raise ValueError("tree exceeds the child-address capacity")
    index = {id(n): i for i, n in enumerate(order)}
    words = np.zeros(len(order), dtype=np.uint64)
    for i, node in enumerate(order):
        if node.is_leaf:
            if node.value < 0:
                raise ValueError("leaf values must be >= 0")
            mw = int(np.floor(node.value * 1000.0 + 0.5))
            if mw >= (1 << VALUE_BITS):
                raise ValueError(f"leaf value {node.value} W exceeds the "
                                 "16-bit milliwatt range")
            words[i] = node_encode(MemNode(True, value=mw))
        else:
            if node.threshold < 0:
                raise ValueError("thresholds must be >= 0")
            thr = int(np.floor(node.threshold))
            words[i] = node_encode(MemNode(
                False, feature=node.feature, threshold=thr,
                left=index[id(node.left)], right=index[id(node.right)]))
    return TreeMemoryImage(words, len(order), tree.depth)


def dequantize_mw(image: TreeMemoryImage, value: int) -> float:
    """Stored leaf LSBs back to milliwatts."""
    return value * image.leaf_unit


@dataclass(frozen=True)
class EngineState:
    fsm_state: str  # one of I, N, S, R
    current_node: int
    cycle_count: int
    feature_buffer: tuple[int, ...]


@dataclass(frozen=True)
class MonitorConfig:
    n_counters: int
    estimation_period: int = 300
    counter_width: int = 20

    def __post_init__(self) -> None:
        if self.n_counters < 1:
            raise ValueError("n_counters must be >= 1")
        if self.estimation_period < 1:
            raise ValueError("estimation_period must be >= 1")
        if self.estimation_period > (1 << self.counter_width):
            raise ValueError("estimation_period must not exceed 2^counter_width")


def engine_invoke(image: TreeMemoryImage,
                  features) -> tuple[int, int, list[str]]:
    """Walk the structure memory once; integer compares only.

    Returns (leaf value in LSBs, cycles consumed, FSM state trace).  The
    trace always matches I (N S)* R and a leaf at depth d costs 2*d + 1
    cycles.
    """
    buf = tuple(int(v) for v in features)
    if any(v < 0 for v in buf):
        raise ValueError("features must be unsigned")
    state = EngineState("I", 0, 0, buf)
    trace = ["I"]
    steps = 0
    while True:
        node = image.node(state.current_node)
        if node.is_leaf:
            trace.append("R")
            state = EngineState("R", state.current_node,
                                state.cycle_count + 1, buf)
            return node.value, state.cycle_count, trace
        if node.feature >= len(buf):
            raise ValueError(f"feature address {node.feature} not covered by "
                             f"the {len(buf)}-entry feature buffer")
        trace.append("N")
        trace.append("S")
        target = node.left if buf[node.feature] <= node.threshold else node.right
        if not (0 <= target < image.n_nodes):
            raise MalformedImageError(f"dangling child address {target}")
        state = EngineState("S", target, state.cycle_count + 2, buf)
        steps += 1
        if steps > image.n_nodes:
            raise MalformedImageError("cycle detected in structure memory")


def period_features(trace: ToggleTrace,
                    cfg: MonitorConfig) -> list[tuple[int, ...]]:
    """The feature controller's view: per period, the counter values that
    get buffered for the engine.

    Counters and their edge-detector registers are both cleared at period
    boundaries, so period measurements are mutually independent.
    """
    if trace.n_signals != cfg.n_counters:
        raise ValueError("trace must provide one signal per counter")
    if trace.n_cycles < cfg.estimation_period:
        raise ValueError("trace shorter than one estimation period")
    n_periods = trace.n_cycles // cfg.estimation_period
    out = []
    for p in range(n_periods):
        counters = [CounterState(cfg.counter_width) for _ in range(cfg.n_counters)]
        base = p * cfg.estimation_period
        for t in range(base, base + cfg.estimation_period):
            for s in range(cfg.n_counters):
                counters[s] = counter_step(counters[s], int(trace.levels[s, t]))
        out.append(tuple(c.value for c in counters))
    return out


def run_monitor(trace: ToggleTrace, image: TreeMemoryImage,
                cfg: MonitorConfig) -> list[tuple[int, int, int]]:
    """Per estimation period: count edges, buffer features, invoke the
    engine, reset the counters.  Returns (period, estimate LSBs, cycles)."""
    results = []
    for p, features in enumerate(period_features(trace, cfg)):
        value, cycles, _ = engine_invoke(image, features)
        results.append((p, value, cycles))
    return results


def validate_image(image: TreeMemoryImage) -> None:
    """Check the structure is a tree: in-range children, no node reached
    twice."""
    seen = set()
    queue = [0]
    while queue:
        addr = queue.pop()
        if addr in seen:
            raise MalformedImageError(f"node {addr} reachable twice")
        seen.add(addr)
        node = image.node(addr)
        if not node.is_leaf:
            queue.append(node.left)
            queue.append(node.right)


def save_image(image: TreeMemoryImage, path: str | Path) -> None:
    unit_uw = int(round(image.leaf_unit * 1000.0))
    header = _HEADER.pack(IMAGE_MAGIC, image.n_nodes, image.max_depth, unit_uw)
    body = image.words.astype("<u8").tobytes()
    Path(path).write_bytes(header + body)


def load_image(path: str | Path) -> TreeMemoryImage:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated image file")
    magic, n_nodes, max_depth, unit_uw = _HEADER.unpack_from(raw)
    if magic != IMAGE_MAGIC:
        raise ValueError(f"{path}: not a tree memory image")
    words = np.frombuffer(raw, dtype="<u8", offset=_HEADER.size).copy()
    if words.shape[0] != n_nodes:
        raise ValueError(f"{path}: body holds {words.shape[0]} words, "
                         f"header says {n_nodes}")
    return TreeMemoryImage(words.astype(np.uint64), n_nodes, max_depth,
                           unit_uw / 1000.0)


def fsm_trace_text(trace: list[str]) -> str:
    """One state per line with its cycle index, for debug dumps."""
    return "\n".join(f"{i} {s}" for i, s in enumerate(trace)) + "\n"
