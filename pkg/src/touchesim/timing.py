"""Cycle accounting, collision-latency identities and the dynamic-enable monitor."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass


@dataclass(frozen=True)
class LatencyConfig:
    tag_cycles: int = 5
    data_cycles: int = 30
    codec_cycles: int = 1
    memory_cycles: int = 300
    dynamic_threshold_cycles: float = 140.0
    monitor_window: int = 1024

    def __post_init__(self):
        for name in ("tag_cycles", "data_cycles", "codec_cycles", "memory_cycles", "dynamic_threshold_cycles"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.monitor_window < 1:
            raise ValueError("monitor_window must be >= 1")


@dataclass(frozen=True, slots=True)
class LatencyBreakdown:
    tag_cycles: int = 0
    data_cycles: int = 0
    codec_cycles: int = 0
    memory_cycles: int = 0
    collision_extra_cycles: int = 0

    @property
    def total(self) -> int:
        return self.tag_cycles + self.data_cycles + self.codec_cycles + self.memory_cycles + self.collision_extra_cycles


def account(outcome, cfg: LatencyConfig, memory_cycles: int | None = None) -> LatencyBreakdown:
    """Cycles for one access.

    Data-array reads are serialized. The first read of an access costs
    ``data_cycles`` after the tag probe; every later one repeats the probe
    and costs ``tag_cycles + data_cycles``. A miss with k false matches
    therefore spends 35k cycles in the LLC at the default latencies
    (35/70/105), the same ladder a collision-free hit starts at (35).
    """
    mem = cfg.memory_cycles if memory_cycles is None else memory_cycles
    reads = outcome.data_arrays_read
    per_read = cfg.tag_cycles + cfg.data_cycles
    if outcome.hit:
        false_reads = reads - 1
        return LatencyBreakdown(
            tag_cycles=cfg.tag_cycles,
            data_cycles=cfg.data_cycles,
            codec_cycles=cfg.codec_cycles if outcome.compressed_hit else 0,
            collision_extra_cycles=false_reads * per_read,
        )
    extra = cfg.data_cycles + (reads - 1) * per_read if reads else 0
    return LatencyBreakdown(tag_cycles=cfg.tag_cycles, memory_cycles=mem, collision_extra_cycles=extra)


def expected_collision_latency(probabilities, per_array: float) -> float:
    """Mean latency of a colliding access given P(k data arrays read)."""
    rows = list(probabilities)
    total = math.fsum(p for _, p in rows)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {total}, not 1")
    return math.fsum(p * k * per_array for k, p in rows)


def new_tag_latency(collision_rate: float, old: float, collision: float) -> float:
    if not 0.0 <= collision_rate <= 1.0:
        raise ValueError("collision_rate must lie in [0, 1]")
    return (1.0 - collision_rate) * old + collision_rate * collision


class LatencyMonitor:
    """Sliding-window mean of per-request latency; gates compressed installs."""

    def __init__(self, window: int = 1024, threshold: float = 140.0):
        self.window = window
        self.threshold = threshold
        self._recent: deque[int] = deque()
        self._sum = 0

    def record(self, cycles: int) -> None:
        self._recent.append(cycles)
        self._sum += cycles
        if len(self._recent) > self.window:
            self._sum -= self._recent.popleft()

    @property
    def average(self) -> float | None:
        return self._sum / len(self._recent) if self._recent else None

    def enabled(self) -> bool:
        avg = self.average
        return True if avg is None else avg > self.threshold


def dynamic_enabled(latencies, threshold: float = 140.0, window: int = 1024) -> bool:
    mon = LatencyMonitor(window, threshold)
    for c in latencies:
        mon.record(c)
    return mon.enabled()


class MemoryLatency:
    """Flat main-memory latency, or a repeating schedule of (requests, cycles) phases."""

    def __init__(self, cycles: int = 300, phases=None):
        self.cycles = cycles
        self.phases = [(int(n), int(c)) for n, c in phases] if phases else None
        if self.phases and any(n <= 0 for n, _ in self.phases):
            raise ValueError("phase lengths must be positive")
        self._period = sum(n for n, _ in self.phases) if self.phases else 0

    def at(self, request_index: int) -> int:
        if not self.phases:
            return self.cycles
        pos = request_index % self._period
        for n, c in self.phases:
            if pos < n:
                return c
            pos -= n
        raise AssertionError("unreachable")
