"""Acceptance criteria, one test each. Every test prints a single PASS/FAIL line."""

import importlib.util
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import CONFIGS, reference_candidate, script_candidate, small_params
from test_sim import check_invariants
from test_stats import bh_oracle, brute_energy
from pphpc.bench import summarize_times
from pphpc.harness import CandidateSpec, StatsConfig, baseline_runs_live, evaluate_batch
from pphpc.sim import SimParams
from pphpc.stats import bh_adjust, energy_statistic, energy_test, pca_project, success_rate

ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture
def verdict(capsys):
    def report(number: int, title: str, ok: bool, detail: str = ""):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {title}" + (f" ({detail})" if detail else ""))
        assert ok, detail
    return report


def _load_script(name):
    spec = importlib.util.spec_from_file_location(name, ROOT / "scripts" / f"{name}.py")
    mod = importlib.util.module_from_spec(spec)
    sys.modules[name] = mod
    spec.loader.exec_module(mod)
    return mod


def test_1_determinism(verdict):
    outputs = [
        subprocess.run([sys.executable, "-m", "pphpc.cli", "simulate", "set1", "--config-dir", str(CONFIGS),
                        "--seed", "2718"], capture_output=True, check=True).stdout
        for _ in range(5)
    ]
    cli_same = len(set(outputs)) == 1 and outputs[0].count(b"\n") == 4002

    sets = {"a": small_params(iterations=60), "b": small_params(iterations=60, prey_gain=8)}
    baseline = baseline_runs_live(sets, 6, base_seed=5)
    stats = StatsConfig(n_permutations=499, seed=2)
    specs = [reference_candidate(), script_candidate("starving_predators")]
    serial = evaluate_batch(specs, [11, 12], baseline, sets, 6, stats, jobs=1)
    parallel = evaluate_batch(specs, [11, 12], baseline, sets, 6, stats, jobs=3)
    batch_same = serial.rows == parallel.rows and [
        (c, t, x.p_raw, x.p_adjusted) for c, t, x in serial.pvalue_rows()
    ] == [(c, t, x.p_raw, x.p_adjusted) for c, t, x in parallel.pvalue_rows()]
    verdict(1, "determinism", cli_same and batch_same,
            f"5 CLI runs identical={cli_same}, jobs=1 vs jobs=3 identical={batch_same}")


def test_2_simulation_invariants(verdict):
    rng = np.random.default_rng(2)
    checked = 0
    for _ in range(20):
        gx, gy = rng.integers(1, 51, size=2)
        cells = gx * gy
        p = SimParams(
            int(gx), int(gy), int(rng.integers(0, 2 * cells + 1)), int(rng.integers(0, cells + 1)), 200,
            int(rng.integers(0, 31)), int(rng.integers(0, 31)), int(rng.integers(1, 4)), int(rng.integers(1, 4)),
            int(rng.integers(1, 11)), int(rng.integers(1, 11)), int(rng.integers(0, 101)),
            int(rng.integers(0, 101)), int(rng.integers(1, 31)),
        )
        check_invariants(p, int(rng.integers(0, 2**63)))
        checked += 1
    verdict(2, "simulation invariants", checked == 20, f"{checked} parameterizations x 200 iterations")


def test_3_energy_oracle(verdict):
    rng = np.random.default_rng(3)
    worst = 0.0
    symmetric = True
    for _ in range(200):
        n, m, d = rng.integers(1, 101), rng.integers(1, 101), rng.integers(1, 21)
        x = rng.normal(size=(n, d))
        y = rng.normal(loc=rng.uniform(0, 1), size=(m, d))
        e = energy_statistic(x, y)
        symmetric &= e == energy_statistic(y, x)
        worst = max(worst, abs(e - brute_energy(x.tolist(), y.tolist())))
    verdict(3, "energy statistic oracle", worst < 1e-10 and symmetric, f"max abs error {worst:.2e}")


def test_4_permutation_calibration(verdict):
    rng = np.random.default_rng(4)
    start = time.perf_counter()
    null_rej = shift_rej = 0
    for rep in range(200):
        x, y = rng.normal(size=(30, 5)), rng.normal(size=(30, 5))
        null_rej += energy_test(x, y, 1000, rep) < 0.05
        shift_rej += energy_test(x, y + 3.0, 1000, rep) < 0.05
    elapsed = time.perf_counter() - start
    null_rate, shift_rate = null_rej / 200, shift_rej / 200
    ok = 0.01 <= null_rate <= 0.12 and shift_rate >= 0.99 and elapsed < 300
    verdict(4, "permutation test calibration", ok,
            f"null rejection {null_rate:.3f}, shifted rejection {shift_rate:.3f}, {elapsed:.0f}s")


def test_5_bh_oracle(verdict):
    rng = np.random.default_rng(5)
    mismatches = 0
    for _ in range(1000):
        p = rng.uniform(1e-6, 1.0, size=rng.integers(1, 51))
        if rng.random() < 0.3:
            p[rng.integers(0, len(p), size=len(p) // 2)] = p[0]  # force ties
        mismatches += bh_adjust(p).tolist() != bh_oracle(p.tolist())
    worked = bh_adjust([0.01, 0.02, 0.03, 0.04]).tolist() == pytest.approx([0.04] * 4, abs=1e-15)
    verdict(5, "BH oracle", mismatches == 0 and worked, f"{mismatches} mismatches in 1000 vectors")


def test_6_pca_properties(verdict):
    rng = np.random.default_rng(6)
    failures = []
    for i in range(100):
        rows, cols = rng.integers(2, 61), rng.integers(1, 300)
        x = rng.normal(size=(rows, cols)) * rng.uniform(0.1, 10, size=cols)
        target = rng.uniform(0.05, 1.0)
        pcs = pca_project(x, target)
        cum = np.cumsum(pcs.explained_ratios)
        minimal = cum[pcs.k - 1] >= target - 1e-12 and (pcs.k == 1 or cum[pcs.k - 2] < target - 1e-12)
        full = pca_project(x, 1.0)
        centered = x - x.mean(axis=0)
        recon = (centered @ full.axes.T) @ full.axes
        rel = np.linalg.norm(recon - centered) / max(np.linalg.norm(centered), 1e-300)
        if not (abs(pcs.explained_ratios.sum() - 1) <= 1e-9 and minimal and rel < 1e-7):
            failures.append(i)
    verdict(6, "PCA properties", not failures, f"{100 - len(failures)}/100 matrices")


@pytest.mark.slow
def test_7_end_to_end_self_comparison(verdict):
    exp = _load_script("self_comparison")
    sets = exp.load_sets()
    reps = [exp.run_repetition(r, sets, n_runs=30, n_permutations=9999) for r in range(10)]
    self_ok = sum(r.self_score == 6 for r in reps)
    pert_ok = sum(r.perturbed_score == 5 and min(r.perturbed_p_adjusted.values()) < 0.001 for r in reps)
    slowest = max(r.batch_seconds for r in reps)
    for r in reps:
        print(r)
    verdict(7, "end-to-end self-comparison", self_ok >= 9 and pert_ok == 10 and slowest < 600,
            f"self score 6 in {self_ok}/10, perturbed score 5 with p_adj<0.001 in {pert_ok}/10, "
            f"slowest 60-run batch {slowest:.0f}s")


def test_8_pipeline_scoring(verdict):
    sets = {"p1": small_params(iterations=80), "p2": small_params(iterations=80, prey_gain=8)}
    baseline = baseline_runs_live(sets, 6, base_seed=8)
    stats = StatsConfig(n_permutations=499, seed=8)
    specs = [
        CandidateSpec("missing", (sys.executable, "/nonexistent/candidate.py"), artifact="/nonexistent/candidate.py"),
        script_candidate("bad_handshake"),
        script_candidate("sleeper", timeout_smoke=1.5),
        script_candidate("malformed"),
        reference_candidate(),
    ]
    runs = [evaluate_batch(specs, [88], baseline, sets, 6, stats).rows for _ in range(2)]
    scores = [r.score for r in runs[0]]
    stable = [r.score for r in runs[1]] == scores
    rates = (success_rate([6] * 6), round(success_rate([5, 5, 6, 6, 6, 6]), 1))
    verdict(8, "pipeline scoring", scores == [1, 2, 3, 4, 6] and stable and rates == (100.0, 66.7),
            f"scores {scores}, repeat identical={stable}, success rates {rates}")


def test_9_bench_math(verdict):
    s = summarize_times([1, 2, 3])
    triple = (s.mean_time, s.sample_std, s.s_rel) == (2, 1, 50.0)
    times = [19.84, 20.1, 19.7]
    ratio = summarize_times(times, summarize_times(times).mean_time).ratio_to_reference
    verdict(9, "bench math", triple and f"{ratio:.2f}" == "1.00" and ratio == 1.0,
            f"summary ({s.mean_time}, {s.sample_std}, {s.s_rel}), self ratio {ratio}")
