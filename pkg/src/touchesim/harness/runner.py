"""Trace replay: cache + timing + reference-model check, producing a Report."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import IO, Iterable

from ..cache import Cache, CacheGeometry
from ..codec import SizeClass
from ..layout import NOMINAL_AREA_RATIO, TAG_AREA_BITS
from ..sign import SignatureTables
from ..timing import LatencyConfig, LatencyMonitor, MemoryLatency, account
from .synth import PRESETS, BackingMemory, Profile, block_content
from .trace import TraceEvent

REPORT_FORMAT = "touchesim-report"
REPORT_VERSION = 1
CSV_COLUMNS = (
    "index", "op", "addr", "hit", "compressed_hit", "data_arrays_read", "signature_collisions",
    "marker_collisions", "installed_class", "compressed_install", "evictions", "writebacks",
    "latency_cycles", "memory_cycles", "compression_enabled", "resident_blocks",
)


@dataclass
class SimConfig:
    mode: str = "touche"
    policy: str = "lru"
    capacity_bytes: int = 4 << 20
    ways: int = 8
    seed: int = 0
    evict_within_line: str = "random"
    ideal_arbitrary4: bool = False
    latency: LatencyConfig = field(default_factory=LatencyConfig)
    memory_phases: list | None = None
    dynamic: bool = False
    sample_every: int = 1000
    verify: bool = True
    check: bool = False
    tables: SignatureTables | None = None
    marker: int | None = None

    def echo(self) -> dict:
        return {
            "mode": self.mode,
            "policy": self.policy,
            "capacity_bytes": self.capacity_bytes,
            "ways": self.ways,
            "seed": self.seed,
            "evict_within_line": self.evict_within_line,
            "ideal_arbitrary4": self.ideal_arbitrary4,
            "latency": asdict(self.latency),
            "memory_phases": [list(p) for p in self.memory_phases] if self.memory_phases else None,
            "dynamic": self.dynamic,
            "sample_every": self.sample_every,
        }


class Simulator:
    """One cache instance replaying one request stream.

    Read misses fill from ``memory``; dirty evictions write back to it. A
    separate reference map (program-order writes over the same default
    content) checks every value the cache returns or evicts.
    """

    def __init__(self, config: SimConfig, memory: BackingMemory | None = None):
        self.config = config
        g = CacheGeometry(config.capacity_bytes, config.ways)
        self.cache = Cache(
            config.mode, g, config.policy, config.seed, config.evict_within_line,
            config.ideal_arbitrary4, config.tables, config.marker, config.check,
        )
        self.memory = memory or BackingMemory()
        self.reference: dict[int, bytes] = {}
        self.latency_model = MemoryLatency(config.latency.memory_cycles, config.memory_phases)
        self.monitor = LatencyMonitor(config.latency.monitor_window, config.latency.dynamic_threshold_cycles)
        self.index = 0
        self.s = {
            "accesses": 0, "reads": 0, "writes": 0, "hits": 0, "misses": 0, "read_hits": 0,
            "installs": 0, "compressed_installs": 0, "rewrites": 0,
            "signature_collisions": 0, "marker_collisions": 0,
            "accesses_with_signature_collision": 0, "accesses_with_marker_collision": 0,
            "data_arrays_read": 0, "writebacks": 0, "evictions": 0, "content_mismatches": 0,
            "compression_disabled_requests": 0,
        }
        self.histogram = {c.name: 0 for c in SizeClass}
        self.cycles = {"tag_cycles": 0, "data_cycles": 0, "codec_cycles": 0, "memory_cycles": 0, "collision_extra_cycles": 0}
        self.total_cycles = 0
        self.read_cycles = 0
        self.capacity_samples: list[float] = []

    def _expected(self, addr: int) -> bytes:
        got = self.reference.get(addr)
        if got is None:
            m = self.memory
            got = block_content(m.profile, m.seed, addr)
        return got

    def _retire(self, evicted) -> int:
        wb = 0
        for ev in evicted:
            self.s["evictions"] += 1
            if self.config.verify and ev.data != self._expected(ev.addr):
                self.s["content_mismatches"] += 1
            if ev.dirty:
                self.memory.write(ev.addr, ev.data)
                wb += 1
        self.s["writebacks"] += wb
        return wb

    def step(self, ev: TraceEvent) -> dict:
        cfg, cache, s = self.config, self.cache, self.s
        i = self.index
        self.index += 1
        mem_cycles = self.latency_model.at(i)
        if cfg.dynamic:
            cache.compression_enabled = self.monitor.enabled()
            if not cache.compression_enabled:
                s["compression_disabled_requests"] += 1
        write = ev.op == "W"
        if write:
            self.reference[ev.addr] = ev.data
        out = cache.access(ev.addr, write, ev.data)
        s["accesses"] += 1
        s["writes" if write else "reads"] += 1
        installed = None
        compressed = False
        evicted = list(out.evicted)
        if out.hit:
            s["hits"] += 1
            if write:
                if out.fill_performed or out.installed_class is not None:
                    s["rewrites"] += 1
            else:
                s["read_hits"] += 1
                if cfg.verify and out.data != self._expected(ev.addr):
                    s["content_mismatches"] += 1
        else:
            s["misses"] += 1
            data = ev.data if write else self.memory.read(ev.addr)
            if cfg.verify and not write and data != self._expected(ev.addr):
                s["content_mismatches"] += 1
            ins = cache.install(ev.addr, data, dirty=write)
            evicted.extend(ins.evicted)
            installed = ins.installed_class
            compressed = ins.compressed_install
            s["installs"] += 1
            s["compressed_installs"] += compressed
            self.histogram[installed.name] += 1
        wb = self._retire(evicted)
        s["signature_collisions"] += out.signature_collisions
        s["marker_collisions"] += out.marker_collisions
        s["accesses_with_signature_collision"] += out.signature_collisions > 0
        s["accesses_with_marker_collision"] += out.marker_collisions > 0
        s["data_arrays_read"] += out.data_arrays_read
        lat = account(out, cfg.latency, mem_cycles)
        total = lat.total
        for k in self.cycles:
            self.cycles[k] += getattr(lat, k)
        self.total_cycles += total
        if not write:
            self.read_cycles += total
        self.monitor.record(total)
        if self.index % cfg.sample_every == 0:
            self.capacity_samples.append(cache.effective_capacity())
        return {
            "index": i, "op": ev.op, "addr": f"{ev.addr:#x}", "hit": int(out.hit),
            "compressed_hit": int(out.compressed_hit), "data_arrays_read": out.data_arrays_read,
            "signature_collisions": out.signature_collisions, "marker_collisions": out.marker_collisions,
            "installed_class": installed.name if installed is not None else "",
            "compressed_install": int(compressed), "evictions": len(evicted), "writebacks": wb,
            "latency_cycles": total, "memory_cycles": mem_cycles,
            "compression_enabled": int(cache.compression_enabled), "resident_blocks": cache.resident,
        }

    def run(self, events: Iterable[TraceEvent], csv_out: IO[str] | None = None) -> dict:
        writer = None
        if csv_out is not None:
            writer = csv.DictWriter(csv_out, fieldnames=CSV_COLUMNS, lineterminator="\n")
            csv_out.write(f"# {REPORT_FORMAT}-csv {REPORT_VERSION}\n")
            writer.writeheader()
        for ev in events:
            row = self.step(ev)
            if writer is not None:
                writer.writerow(row)
        return self.report()

    def report(self) -> dict:
        s = dict(self.s)
        n = s["accesses"]
        cache = self.cache
        samples = self.capacity_samples or [cache.effective_capacity()]
        base_bits = TAG_AREA_BITS["baseline"]
        mode = self.config.mode
        s.update(
            format=REPORT_FORMAT,
            version=REPORT_VERSION,
            hit_rate=s["hits"] / n if n else 0.0,
            collision_rate_per_access=s["accesses_with_signature_collision"] / n if n else 0.0,
            marker_collision_rate=s["accesses_with_marker_collision"] / n if n else 0.0,
            install_class_histogram=dict(self.histogram),
            effective_capacity=sum(samples) / len(samples),
            effective_capacity_final=cache.effective_capacity(),
            effective_capacity_samples=len(samples),
            avg_latency_cycles=self.total_cycles / n if n else 0.0,
            avg_read_latency_cycles=self.read_cycles / s["reads"] if s["reads"] else 0.0,
            collision_overhead_cycles_per_access=self.cycles["collision_extra_cycles"] / n if n else 0.0,
            total_cycles=self.total_cycles,
            latency_breakdown=dict(self.cycles),
            superblock_merges=cache.superblock_merges,
            superblock_conversions=cache.superblock_conversions,
            superblock_demotions=cache.superblock_demotions,
            line_kinds=cache.line_kind_counts(),
            tag_area={
                "entry_bits": TAG_AREA_BITS[mode],
                "ratio_vs_baseline": TAG_AREA_BITS[mode] / base_bits,
                "nominal_ratio": NOMINAL_AREA_RATIO[mode],
            },
            config=dict(
                self.config.echo(),
                sets=cache.geometry.sets,
                address_bits=cache.geometry.address_bits,
                marker=cache.marker,
                tables_seed=cache.tables.seed,
                memory_profile=self.memory.profile.to_json(),
                memory_seed=self.memory.seed,
            ),
        )
        return s


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def simulate(config: SimConfig, events: Iterable[TraceEvent], profile: Profile | None = None,
             memory_seed: int = 0, csv_out: IO[str] | None = None) -> dict:
    sim = Simulator(config, BackingMemory(profile or PRESETS["random"], memory_seed))
    return sim.run(events, csv_out)


def _job(args):
    config, events, profile, memory_seed = args
    return simulate(config, events, profile, memory_seed)


def run_many(jobs, workers: int | None = None) -> list[dict]:
    """Run independent (config, events, profile, memory_seed) jobs; results keep job order.

    ``events`` must be picklable (a list, not a generator) when workers > 1.
    """
    jobs = list(jobs)
    if workers == 1 or len(jobs) <= 1:
        return [_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_job, jobs))
