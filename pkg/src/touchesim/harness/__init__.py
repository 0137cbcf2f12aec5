from .runner import SimConfig, Simulator, report_json, run_many, simulate
from .synth import PRESETS, BackingMemory, Profile, load_profile, synth_generate
from .trace import TraceError, TraceEvent, parse_trace, write_trace
