from .engine import METRICS_HEADER, PolicyConfig, SimMetrics, WindowRecord, final_quartile, run_simulation
from .policies import collaborative_lfu_step, collaborative_lru_step, make_state
from .trace import (RequestEvent, RequestTrace, TraceFormatError, TraceGenSpec, generate_trace,
                    load_catalog, load_trace, write_catalog, write_trace)

__all__ = [
    "METRICS_HEADER", "PolicyConfig", "SimMetrics", "WindowRecord", "final_quartile", "run_simulation",
    "collaborative_lfu_step", "collaborative_lru_step", "make_state",
    "RequestEvent", "RequestTrace", "TraceFormatError", "TraceGenSpec", "generate_trace",
    "load_catalog", "load_trace", "write_catalog", "write_trace",
]
