"""Packet-level simulation of the two-stage (channel then edge server) pipeline."""
from .core import (
    DISCIPLINES,
    FixedThresholdPolicy,
    MeanThresholdPolicy,
    PolicySpec,
    RandomizedThresholdPolicy,
    SamplePath,
    SimResult,
    SimulationError,
    SweepCell,
    SystemConfig,
    TransmissionAwarePolicy,
    peak_series,
    resolve_policy,
    sample_path,
    simulate,
    summarize,
    sweep,
)
