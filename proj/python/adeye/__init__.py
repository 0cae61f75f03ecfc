"""Python bindings for the adeye simulator and test harness."""

from ._adeye import (
    ConfigError,
    Rng,
    RunError,
    ValidationError,
    braking_envelope,
    build_map,
    compute_metrics,
    derive_run_seed,
    derive_stream_seed,
    fnv1a64,
    load_scenario,
    replay_check,
    run,
    splitmix64_mix,
    sweep,
    trace_digest,
    validate,
)

__all__ = [
    "ConfigError",
    "Rng",
    "RunError",
    "ValidationError",
    "braking_envelope",
    "build_map",
    "compute_metrics",
    "derive_run_seed",
    "derive_stream_seed",
    "fnv1a64",
    "load_scenario",
    "replay_check",
    "run",
    "splitmix64_mix",
    "sweep",
    "trace_digest",
    "validate",
]
