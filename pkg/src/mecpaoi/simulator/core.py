from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .. import _accel
from ..distributions import DistributionSpec, rng_stream
from .kernels import KERNELS

DISCIPLINES = ("preemptive", "non_preemptive")
WARMUP_FRACTION = 0.01

# substream ids under one seed; T and C stay common across policies
_T_STREAM, _C_STREAM, _THETA_STREAM = 1, 2, 3


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class FixedThresholdPolicy:
    theta: float
    kind = "fixed_threshold"

    def __post_init__(self):
        if not self.theta >= 0:
            raise ValueError("threshold must be non-negative")

    def label(self):
        return f"fixed({self.theta:g})"


@dataclass(frozen=True)
class RandomizedThresholdPolicy:
    theta_dist: DistributionSpec
    kind = "randomized_threshold"

    def label(self):
        return f"randomized({self.theta_dist.kind})"


@dataclass(frozen=True)
class TransmissionAwarePolicy:
    beta: float
    kind = "transmission_aware"

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError("beta must be non-negative")

    def label(self):
        return f"transmission_aware({self.beta:g})"


@dataclass(frozen=True)
class MeanThresholdPolicy:
    """Fixed threshold equal to the mean computation time."""

    kind = "mean_threshold"

    def label(self):
        return "mean_threshold"


PolicySpec = Union[FixedThresholdPolicy, RandomizedThresholdPolicy,
                   TransmissionAwarePolicy, MeanThresholdPolicy]


@dataclass(frozen=True)
class SystemConfig:
    discipline: str
    T: DistributionSpec
    C: DistributionSpec

    def __post_init__(self):
        if self.discipline not in DISCIPLINES:
            raise ValueError(f"discipline must be one of {DISCIPLINES}, got {self.discipline!r}")

    @property
    def ratio(self):
        return self.T.mean / self.C.mean


@dataclass
class SimResult:
    avg_paoi: float
    paoi_stderr: float
    avg_aoi: float
    aoi_stderr: float
    delivery_ratio: float
    delivery_stderr: float
    packets_generated: int
    packets_delivered: int
    elapsed_model_time: float


@dataclass
class SamplePath:
    """Raw per-packet arrays of one run (used by diagnostics and tests)."""

    T: np.ndarray
    C: np.ndarray
    thresholds: np.ndarray
    waits: np.ndarray
    gaps: np.ndarray
    delivered: np.ndarray
    peaks: np.ndarray
    areas: np.ndarray
    spans: np.ndarray
    warm: int


def resolve_policy(policy: PolicySpec, config: SystemConfig) -> PolicySpec:
    if isinstance(policy, MeanThresholdPolicy):
        return FixedThresholdPolicy(config.C.mean)
    return policy


def _thresholds(policy, T, n, seed):
    if isinstance(policy, FixedThresholdPolicy):
        return np.full(n, float(policy.theta))
    if isinstance(policy, TransmissionAwarePolicy):
        return np.maximum(policy.beta - T[:n], 0.0)
    if isinstance(policy, RandomizedThresholdPolicy):
        return policy.theta_dist.sample_array(rng_stream(seed, _THETA_STREAM), n)
    raise TypeError(f"unsupported policy {policy!r}")


def sample_path(config: SystemConfig, policy: PolicySpec, n_packets: int, seed: int,
                backend: Optional[str] = None,
                warmup_fraction: float = WARMUP_FRACTION) -> SamplePath:
    backend = backend or _accel.default_backend()
    if backend == "numba" and not _accel.HAVE_NUMBA:
        raise SimulationError("numba backend requested but numba is unavailable")
    policy = resolve_policy(policy, config)
    n = int(n_packets) + 1  # packet 0 is the initial delivery
    T = config.T.sample_array(rng_stream(seed, _T_STREAM), n + 1)
    C = config.C.sample_array(rng_stream(seed, _C_STREAM), n)
    xi = _thresholds(policy, T, n, seed)
    warm = max(1, int(math.ceil(warmup_fraction * n_packets)))
    kernel = KERNELS[(config.discipline, backend)]
    peaks, areas, spans, delivered, waits, gaps = kernel(T, C, xi, warm)
    return SamplePath(T[:n], C, xi, waits, gaps, delivered, peaks, areas, spans, warm)


def _batch_means(values, batches):
    parts = np.array_split(values, batches)
    means = np.array([p.mean() for p in parts])
    return float(means.std(ddof=1) / math.sqrt(batches))


def _batch_ratio(num, den, batches):
    parts_n = np.array_split(num, batches)
    parts_d = np.array_split(den, batches)
    r = np.array([a.sum() / b.sum() for a, b in zip(parts_n, parts_d)])
    return float(r.std(ddof=1) / math.sqrt(batches))


def summarize(path: SamplePath, batches: int) -> SimResult:
    k = path.peaks.size
    if k == 0:
        raise SimulationError("no renewals: no packet was delivered after warm-up")
    if k < batches:
        raise SimulationError(f"only {k} deliveries for {batches} batches")
    flags = path.delivered[path.warm:]
    total_time = float(path.spans.sum())
    return SimResult(
        avg_paoi=float(path.peaks.mean()),
        paoi_stderr=_batch_means(path.peaks, batches),
        avg_aoi=float(path.areas.sum() / total_time),
        aoi_stderr=_batch_ratio(path.areas, path.spans, batches),
        delivery_ratio=float(flags.mean()),
        delivery_stderr=_batch_means(flags.astype(float), batches),
        packets_generated=int(flags.size),
        packets_delivered=int(flags.sum()),
        elapsed_model_time=total_time,
    )


def simulate(config: SystemConfig, policy: PolicySpec, n_packets: int = 10**6,
             seed: int = 42, batches: int = 100, backend: Optional[str] = None,
             warmup_fraction: float = WARMUP_FRACTION) -> SimResult:
    """Monte Carlo estimate of average peak age, average age and delivery ratio.

    Standard errors come from ``batches`` contiguous batch means. The first
    ``warmup_fraction`` of packets is discarded. Same arguments give a
    bit-identical result.
    """
    if not n_packets >= batches >= 2:
        raise ValueError("need n_packets >= batches >= 2")
    path = sample_path(config, policy, n_packets, seed, backend, warmup_fraction)
    return summarize(path, batches)


def peak_series(config: SystemConfig, policy: PolicySpec, n_packets: int,
                seed: int, backend: Optional[str] = None) -> np.ndarray:
    return sample_path(config, policy, n_packets, seed, backend).peaks


@dataclass
class SweepCell:
    config_index: int
    policy_index: int
    ratio: float
    discipline: str
    policy: str
    result: Optional[SimResult] = None
    error: Optional[str] = None


def _cell_seed(seed, cell):
    # one independent key per cell, derived from (seed, cell)
    return int(np.random.SeedSequence(int(seed), spawn_key=(1000 + cell,)).generate_state(1)[0])


def _run_cell(args):
    ci, pi, config, policy, n_packets, seed, batches = args
    cell = SweepCell(ci, pi, config.ratio, config.discipline, policy.label())
    try:
        cell.result = simulate(config, policy, n_packets, seed, batches)
    except (SimulationError, ValueError, ArithmeticError) as exc:
        cell.error = f"{type(exc).__name__}: {exc}"
    return cell


def sweep(configs: Sequence[SystemConfig], policies: Sequence[PolicySpec],
          n_packets: int = 10**6, seed: int = 42, batches: int = 100,
          workers: int = 1) -> list:
    """Evaluate every (config, policy) pair; a failing cell records its error."""
    if not configs or not policies:
        raise ValueError("sweep needs at least one config and one policy")
    jobs = []
    for ci, config in enumerate(configs):
        for pi, policy in enumerate(policies):
            cell = ci * len(policies) + pi
            jobs.append((ci, pi, config, policy, n_packets, _cell_seed(seed, cell), batches))
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            cells = list(ex.map(_run_cell, jobs))
    else:
        cells = [_run_cell(j) for j in jobs]
    return sorted(cells, key=lambda c: (c.config_index, c.policy_index))
