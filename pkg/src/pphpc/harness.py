"""Staged evaluation of external candidate simulators (scores 1-6).

A candidate is any executable honouring this contract:

* ``<command> --check`` exits 0 and prints ``pphpc-candidate 1``;
* ``<command> P1 ... P14 SEED`` (decimal integers, parameters in
  :class:`~pphpc.sim.SimParams` order) exits 0 and writes an output CSV with
  ``iterations + 1`` rows to standard output.

Candidates only ever talk to the harness through argv, stdout and the exit
status. Scores: 1 missing artifact, 2 handshake failure, 3 runtime error or
timeout, 4 output format violation, 5 statistically different from the
baseline, 6 statistically indistinguishable.
"""

from __future__ import annotations

import logging
import os
import shutil
import signal
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from pphpc import io as pio
from pphpc.bench import TimingSummary, summarize_times
from pphpc.rng import replication_seed
from pphpc.sim import SimOutput, SimParams, run_simulation
from pphpc.stats import DEFAULT_PERMUTATIONS, ParamSetComparison, apply_bh, raw_comparison, success_rate

log = logging.getLogger(__name__)

HANDSHAKE = "pphpc-candidate 1"
SMOKE_ITERATIONS = 5
CANDIDATE_STREAM = 0
BASELINE_STREAM = 1


@dataclass(frozen=True)
class CandidateSpec:
    id: str
    command: tuple[str, ...]
    artifact: str | None = None  # file that must exist; defaults to command[0]
    timeout_smoke: float = 30.0
    timeout_full: float = 3600.0
    env: Mapping[str, str] | None = None

    def __post_init__(self):
        object.__setattr__(self, "command", tuple(self.command))
        if not self.command:
            raise ValueError(f"{self.id}: empty command")
        if not (self.timeout_smoke > 0 and self.timeout_full > 0):
            raise ValueError(f"{self.id}: timeouts must be positive")


@dataclass
class StatsConfig:
    alpha: float = 0.01
    min_variance: float = 0.80
    n_permutations: int = DEFAULT_PERMUTATIONS
    seed: int = 0


@dataclass
class StageScore:
    score: int
    reason: str
    stage_log: list[str] = field(default_factory=list)
    comparisons: list[ParamSetComparison] = field(default_factory=list)
    timings: dict[str, TimingSummary] = field(default_factory=dict)


@dataclass
class _ProcResult:
    returncode: int | None  # None on timeout
    stdout: str
    stderr: str
    elapsed: float


def _run(spec: CandidateSpec, args: Sequence[str], timeout: float) -> _ProcResult:
    env = None
    if spec.env:
        env = {**os.environ, **spec.env}
    start = time.perf_counter()
    proc = subprocess.Popen(
        [*spec.command, *args],
        stdin=subprocess.DEVNULL,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
        env=env,
        start_new_session=True,
    )
    try:
        out, err = proc.communicate(timeout=timeout)
    except subprocess.TimeoutExpired:
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        out, err = proc.communicate()
        return _ProcResult(None, out, err, time.perf_counter() - start)
    return _ProcResult(proc.returncode, out, err, time.perf_counter() - start)


def _target(spec: CandidateSpec) -> str | None:
    target = spec.artifact or spec.command[0]
    if os.path.exists(target):
        return target
    return shutil.which(target)


def check_artifact(spec: CandidateSpec) -> StageScore | None:
    """``None`` if the artifact exists and answers the handshake."""
    if _target(spec) is None:
        return StageScore(1, f"artifact not found: {spec.artifact or spec.command[0]}", ["check: missing"])
    try:
        res = _run(spec, ["--check"], spec.timeout_smoke)
    except OSError as exc:
        return StageScore(2, f"could not start: {exc}", ["check: start failed"])
    first = res.stdout.strip().splitlines()[:1]
    if res.returncode != 0 or first != [HANDSHAKE]:
        why = "timeout" if res.returncode is None else f"exit {res.returncode}, got {first!r}"
        return StageScore(2, f"handshake failed ({why})", ["check: handshake failed"])
    return None


def _argv(params: SimParams, seed: int) -> list[str]:
    return [str(v) for v in params.as_tuple()] + [str(seed)]


class _RunFailure(Exception):
    def __init__(self, score: int, reason: str):
        super().__init__(reason)
        self.score = score
        self.reason = reason


def run_candidate(spec: CandidateSpec, params: SimParams, seed: int, timeout: float):
    """One candidate replication: returns ``(SimOutput, seconds)`` or raises ``_RunFailure``."""
    try:
        res = _run(spec, _argv(params, seed), timeout)
    except OSError as exc:
        raise _RunFailure(3, f"could not start: {exc}") from None
    if res.returncode is None:
        raise _RunFailure(3, f"timeout after {timeout:g}s")
    if res.returncode != 0:
        raise _RunFailure(3, f"exit status {res.returncode}")
    try:
        out = pio.read_output_csv(res.stdout, expected_rows=params.iterations + 1)
    except pio.FormatError as exc:
        raise _RunFailure(4, f"bad output ({exc})") from None
    return out, res.elapsed


def smoke_test(spec: CandidateSpec, params: SimParams, seed: int, timeout: float | None = None) -> StageScore | None:
    """Short run at 5 iterations; ``None`` on success, else score 3 or 4."""
    p = params.replace(iterations=SMOKE_ITERATIONS)
    try:
        run_candidate(spec, p, seed, spec.timeout_smoke if timeout is None else timeout)
    except _RunFailure as f:
        return StageScore(f.score, f"smoke: {f.reason}", ["check: pass", f"smoke: score {f.score}"])
    return None


def baseline_runs_live(paramsets: Mapping[str, SimParams], n_reps: int, base_seed: int) -> dict[str, list[SimOutput]]:
    """Built-in simulator runs on a seed stream disjoint from the candidates'."""
    return {
        name: [run_simulation(p, replication_seed(base_seed, i, BASELINE_STREAM)) for i in range(n_reps)]
        for name, p in paramsets.items()
    }


@dataclass
class _TrialRuns:
    outputs: dict[str, list[SimOutput]]
    times: dict[str, list[float]]
    stage_log: list[str]


def _full_runs(spec, paramsets, n_reps, base_seed, jobs) -> _TrialRuns | StageScore:
    units = [(name, rep) for name in paramsets for rep in range(n_reps)]

    def work(unit):
        name, rep = unit
        seed = replication_seed(base_seed, rep, CANDIDATE_STREAM)
        try:
            return run_candidate(spec, paramsets[name], seed, spec.timeout_full)
        except _RunFailure as f:
            return f

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, units))
    else:
        results = []
        for unit in units:
            results.append(work(unit))
            if isinstance(results[-1], _RunFailure):
                break
    stage_log = ["check: pass", "smoke: pass"]
    outputs = {name: [] for name in paramsets}
    times = {name: [] for name in paramsets}
    for (name, rep), res in zip(units, results):
        if isinstance(res, _RunFailure):
            stage_log.append(f"full: score {res.score} at paramset {name}, rep {rep}: {res.reason}")
            return StageScore(res.score, f"full run ({name}, rep {rep}): {res.reason}", stage_log)
        outputs[name].append(res[0])
        times[name].append(res[1])
    stage_log.append(f"full: {len(units)} runs completed")
    return _TrialRuns(outputs, times, stage_log)


def _finish(runs: _TrialRuns, comparisons: list[ParamSetComparison]) -> StageScore:
    sig = [c.paramset for c in comparisons if c.significant]
    log_line = ", ".join(f"{c.paramset}: k={c.k} p_adj={c.p_adjusted:.4g}" for c in comparisons)
    stage_log = [*runs.stage_log, f"stats: {log_line}"]
    if sig:
        return StageScore(5, f"differs from baseline on {', '.join(sig)}", stage_log, comparisons)
    timings = {name: summarize_times(t) for name, t in runs.times.items() if len(t) >= 1}
    return StageScore(6, "statistically indistinguishable", stage_log, comparisons, timings)


def _compare(runs: _TrialRuns, baseline, stats: StatsConfig) -> list[ParamSetComparison]:
    return [
        raw_comparison(name, runs.outputs[name], baseline[name], stats.min_variance,
                       stats.n_permutations, stats.seed, labels=("candidate", "baseline"))
        for name in runs.outputs
    ]


def full_evaluation(
    spec: CandidateSpec,
    baseline_runs: Mapping[str, Sequence[SimOutput]],
    paramsets: Mapping[str, SimParams],
    n_reps: int = 30,
    stats: StatsConfig | None = None,
    base_seed: int = 0,
    jobs: int = 1,
) -> StageScore:
    """Full replications plus statistical comparison for one candidate trial."""
    stats = stats or StatsConfig()
    missing = set(paramsets) - set(baseline_runs)
    if missing:
        raise ValueError(f"no baseline runs for {sorted(missing)}")
    runs = _full_runs(spec, paramsets, n_reps, base_seed, jobs)
    if isinstance(runs, StageScore):
        return runs
    comparisons = _compare(runs, baseline_runs, stats)
    apply_bh(comparisons, stats.alpha)
    return _finish(runs, comparisons)


def _early_stages(spec, paramsets, seed) -> StageScore | None:
    failed = check_artifact(spec)
    if failed is not None:
        return failed
    first = next(iter(paramsets.values()))
    return smoke_test(spec, first, seed)


def evaluate_trial(spec, baseline_runs, paramsets, n_reps=30, stats=None, base_seed=0, jobs=1) -> StageScore:
    """Whole pipeline for one (candidate, trial)."""
    early = _early_stages(spec, paramsets, base_seed)
    if early is not None:
        return early
    return full_evaluation(spec, baseline_runs, paramsets, n_reps, stats, base_seed, jobs)


@dataclass
class BatchResult:
    rows: list[pio.ResultRow]
    scores: dict[tuple[str, int], StageScore]
    success_rates: dict[str, float]

    def pvalue_rows(self):
        return [
            (cid, trial, c)
            for (cid, trial), s in self.scores.items()
            for c in s.comparisons
        ]


def evaluate_batch(
    specs: Sequence[CandidateSpec],
    trial_seeds: Sequence[int],
    baseline_runs: Mapping[str, Sequence[SimOutput]],
    paramsets: Mapping[str, SimParams],
    n_reps: int = 30,
    stats: StatsConfig | None = None,
    jobs: int = 1,
) -> BatchResult:
    """Score every (candidate, trial); all statistical tests share one BH family."""
    if not specs:
        raise ValueError("no candidates to evaluate")
    if not trial_seeds:
        raise ValueError("no trials")
    stats = stats or StatsConfig()
    pending: list[tuple[tuple[str, int], _TrialRuns, list[ParamSetComparison]]] = []
    scores: dict[tuple[str, int], StageScore] = {}
    for spec in specs:
        for trial, seed in enumerate(trial_seeds, start=1):
            key = (spec.id, trial)
            log.info("evaluating %s trial %d (seed %d)", spec.id, trial, seed)
            early = _early_stages(spec, paramsets, seed)
            if early is not None:
                scores[key] = early
                continue
            runs = _full_runs(spec, paramsets, n_reps, seed, jobs)
            if isinstance(runs, StageScore):
                scores[key] = runs
                continue
            pending.append((key, runs, _compare(runs, baseline_runs, stats)))
    apply_bh([c for _, _, comps in pending for c in comps], stats.alpha)
    for key, runs, comps in pending:
        scores[key] = _finish(runs, comps)

    rows = []
    rates = {}
    for spec in specs:
        vector = []
        for trial, seed in enumerate(trial_seeds, start=1):
            s = scores[(spec.id, trial)]
            vector.append(s.score)
            rows.append(pio.ResultRow(spec.id, trial, seed, s.score, s.reason))
        rates[spec.id] = success_rate(vector)
    ordered = {(r.candidate_id, r.trial_id): scores[(r.candidate_id, r.trial_id)] for r in rows}
    return BatchResult(rows, ordered, rates)
