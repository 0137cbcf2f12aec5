"""Command line: simulate, gen-trace, tables.

Every option can also be set through the environment as
``TOUCHESIM_<COMMAND>_<OPTION>``, e.g. ``TOUCHESIM_SIMULATE_MODE=yacc``.
"""

from __future__ import annotations

import json
import re
import sys

import click

from ..cache import EVICT_MODES, MODES
from ..policies import POLICIES
from ..prng import SplitMix64
from ..sign import SignatureTables, build_tables
from ..timing import LatencyConfig
from .runner import SimConfig, Simulator, report_json
from .synth import PRESETS, BackingMemory, ProfileError, load_profile, synth_generate
from .trace import TraceError, interleave, parse_trace, write_trace

ENV_PREFIX = "TOUCHESIM"
_UNITS = {"": 1, "b": 1, "k": 1 << 10, "kib": 1 << 10, "kb": 1 << 10, "m": 1 << 20, "mib": 1 << 20, "mb": 1 << 20, "g": 1 << 30, "gib": 1 << 30, "gb": 1 << 30}


def parse_size(text: str) -> int:
    m = re.fullmatch(r"\s*(\d+)\s*([a-zA-Z]*)\s*", text)
    if not m or m.group(2).lower() not in _UNITS:
        raise ValueError(f"bad size {text!r} (try 4MiB, 512KiB or a byte count)")
    return int(m.group(1)) * _UNITS[m.group(2).lower()]


def parse_phases(text: str) -> list[tuple[int, int]]:
    """``600:2048,100:2048`` -> [(2048, 600), (2048, 100)] (cycles:requests)."""
    out = []
    for part in text.split(","):
        cycles, _, n = part.partition(":")
        out.append((int(n), int(cycles)))
    return out


class _Size(click.ParamType):
    name = "size"

    def convert(self, value, param, ctx):
        if isinstance(value, int):
            return value
        try:
            return parse_size(value)
        except ValueError as exc:
            self.fail(str(exc), param, ctx)


@click.group(context_settings={"auto_envvar_prefix": ENV_PREFIX, "help_option_names": ["-h", "--help"]})
def main():
    """Trace-driven compressed last-level cache simulator."""


@main.command()
@click.option("--mode", type=click.Choice(MODES), default="touche", show_default=True)
@click.option("--trace", "traces", multiple=True, type=click.Path(dir_okay=False, allow_dash=True),
              help="Trace file (repeat to interleave round-robin per request; '-' for stdin).")
@click.option("--synth", help=f"Synthetic profile: {', '.join(PRESETS)} or a JSON file.")
@click.option("--n", "n", type=click.IntRange(min=0), default=100000, show_default=True, help="Requests to synthesize.")
@click.option("--trace-seed", type=int, default=0, show_default=True, help="Seed of synthetic traces and default memory content.")
@click.option("--memory-profile", help="Profile for default memory content when replaying a trace file.")
@click.option("--policy", type=click.Choice(sorted(POLICIES)), default="lru", show_default=True)
@click.option("--capacity", type=_Size(), default="4MiB", show_default=True)
@click.option("--ways", type=click.IntRange(min=1), default=8, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Cache seed (signature tables, marker, policy).")
@click.option("--evict-within-line", type=click.Choice(EVICT_MODES), default="random", show_default=True)
@click.option("--ideal-arbitrary4", is_flag=True, help="Ideal mode holds four arbitrary blocks per line.")
@click.option("--tables", "tables_file", type=click.Path(exists=True, dir_okay=False), help="Signature tables JSON.")
@click.option("--marker", type=click.IntRange(0, 0xFFFF), help="Fix the superblock marker instead of drawing it.")
@click.option("--memory-cycles", type=click.IntRange(min=0), default=300, show_default=True)
@click.option("--memory-phases", help="Repeating memory latency schedule, e.g. 600:4096,100:4096 (cycles:requests).")
@click.option("--dynamic/--no-dynamic", default=False, show_default=True, help="Gate compressed installs on average latency.")
@click.option("--sample-every", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--check", is_flag=True, help="Verify cache invariants after every access (slow).")
@click.option("--report", type=click.File("w"), default="-", show_default=True)
@click.option("--csv", "csv_file", type=click.File("w"), help="Per-request time series.")
@click.option("--dump-state", type=click.File("w"), help="Final tag/data array dump.")
def simulate(mode, traces, synth, n, trace_seed, memory_profile, policy, capacity, ways, seed,
             evict_within_line, ideal_arbitrary4, tables_file, marker, memory_cycles, memory_phases,
             dynamic, sample_every, check, report, csv_file, dump_state):
    """Replay a trace (or a synthetic profile) and write a JSON report."""
    if bool(traces) == bool(synth):
        raise click.UsageError("give exactly one of --trace or --synth")
    try:
        profile = load_profile(synth or memory_profile or "random")
        tables = SignatureTables.load(tables_file) if tables_file else None
        phases = parse_phases(memory_phases) if memory_phases else None
        config = SimConfig(
            mode=mode, policy=policy, capacity_bytes=capacity, ways=ways, seed=seed,
            evict_within_line=evict_within_line, ideal_arbitrary4=ideal_arbitrary4,
            latency=LatencyConfig(memory_cycles=memory_cycles), memory_phases=phases,
            dynamic=dynamic, sample_every=sample_every, check=check, tables=tables, marker=marker,
        )
        sim = Simulator(config, BackingMemory(profile, trace_seed))
    except (ValueError, OSError) as exc:
        raise click.ClickException(str(exc)) from None

    handles = []
    try:
        if synth:
            events = synth_generate(profile, trace_seed, n)
        else:
            streams = []
            for path in traces:
                fh = click.open_file(path)
                handles.append(fh)
                streams.append(parse_trace(fh, source=path))
            events = streams[0] if len(streams) == 1 else interleave(*streams)
        result = sim.run(events, csv_file)
    except (TraceError, ProfileError, OSError) as exc:
        raise click.ClickException(str(exc)) from None
    finally:
        for fh in handles:
            fh.close()
    report.write(report_json(result))
    if dump_state is not None:
        sim.cache.dump_state(dump_state)


@main.command("gen-trace")
@click.option("--profile", "profile_name", required=True, help=f"{', '.join(PRESETS)} or a JSON file.")
@click.option("--n", "n", type=click.IntRange(min=0), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--output", type=click.File("w"), default="-", show_default=True)
def gen_trace(profile_name, n, seed, output):
    """Write a synthetic trace in the text format."""
    try:
        profile = load_profile(profile_name)
    except ProfileError as exc:
        raise click.ClickException(str(exc)) from None
    write_trace(synth_generate(profile, seed, n), output)


@main.command()
@click.option("--seed", type=int, default=0, show_default=True, help="Cache seed; tables match what simulate --seed draws.")
@click.option("--raw-seed", type=int, help="Build from this table seed directly instead.")
@click.option("--identity", is_flag=True, help="Identity permutations (collision experiments).")
@click.option("--dump", type=click.File("w"), default="-", show_default=True)
def tables(seed, raw_seed, identity, dump):
    """Dump the signature permutation tables as JSON."""
    table_seed = raw_seed if raw_seed is not None else SplitMix64(seed).next()
    dump.write(json.dumps(build_tables(table_seed, identity=identity).to_json(), indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    sys.exit(main())
