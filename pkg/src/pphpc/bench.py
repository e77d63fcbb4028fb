"""Wall-clock timing of replications and their summary statistics."""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass
from typing import Callable, Sequence

from pphpc.rng import replication_seed
from pphpc.sim import SimParams, run_simulation


class ReplicationError(RuntimeError):
    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"replication {index} failed: {cause!r}")
        self.index = index
        self.cause = cause


@dataclass(frozen=True)
class TimingSummary:
    mean_time: float
    sample_std: float  # nan when n < 2
    s_rel: float       # percent
    n: int
    ratio_to_reference: float | None = None


def time_replications(
    runner: Callable[[SimParams, int], object],
    params: SimParams,
    n: int,
    base_seed: int,
) -> list[float]:
    """Run ``n`` replications sequentially and return their durations in seconds.

    Replication ``i`` uses ``replication_seed(base_seed, i)``. Only the runner
    call is timed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    times = []
    for i in range(n):
        seed = replication_seed(base_seed, i)
        start = time.perf_counter()
        try:
            runner(params, seed)
        except Exception as exc:
            raise ReplicationError(i, exc) from exc
        times.append(time.perf_counter() - start)
    return times


def summarize_times(times: Sequence[float], reference_mean: float | None = None) -> TimingSummary:
    times = [float(t) for t in times]
    if not times:
        raise ValueError("no durations to summarize")
    if any(not t > 0 for t in times):
        raise ValueError("durations must be positive")
    mean = statistics.fmean(times)
    std = statistics.stdev(times) if len(times) >= 2 else math.nan
    s_rel = 100.0 * std / mean
    ratio = None
    if reference_mean is not None:
        if not reference_mean > 0:
            raise ValueError("reference_mean must be positive")
        ratio = mean / reference_mean
    return TimingSummary(mean, std, s_rel, len(times), ratio)


TIMING_HEADER = ("paramset", "trial", "mean_s", "s_rel_pct", "ratio")


def format_timing_rows(rows: Sequence[tuple[str, str, TimingSummary]]) -> str:
    lines = [",".join(TIMING_HEADER)]
    for paramset, trial, s in rows:
        ratio = "" if s.ratio_to_reference is None else f"{s.ratio_to_reference:.2f}"
        lines.append(f"{paramset},{trial},{s.mean_time:.4f},{s.s_rel:.2f},{ratio}")
    return "\n".join(lines) + "\n"


def bench_builtin(params: SimParams, n: int, base_seed: int) -> list[float]:
    run_simulation(params.replace(iterations=1), 0)  # keep JIT compilation out of the timings
    return time_replications(run_simulation, params, n, base_seed)
