"""Self-comparison and perturbation experiment on the shipped parameter sets.

Each repetition draws three groups of runs with disjoint seed streams: A and B
from the same parameters, C with prey_gain doubled. A vs B should be judged
indistinguishable (score 6); A vs C should not (score 5).

    python scripts/self_comparison.py --reps 10 --runs 30 -o results/self_comparison.csv
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from pphpc.io import read_param_file
from pphpc.rng import replication_seed
from pphpc.sim import SimParams, run_simulation
from pphpc.stats import compare_models

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
STREAM_A, STREAM_B, STREAM_C = 10, 11, 12


@dataclass
class Repetition:
    index: int
    self_score: int
    self_p_adjusted: dict[str, float]
    perturbed_score: int
    perturbed_p_adjusted: dict[str, float]
    batch_seconds: float  # slowest 60-run (A+B) batch among the sets


def load_sets(names=("set1", "set2"), config_dir: Path = CONFIGS) -> dict[str, SimParams]:
    out = {}
    for name in names:
        with open(config_dir / f"{name}.params", "rb") as fh:
            out[name] = read_param_file(fh)
    return out


def _group(params: SimParams, n: int, base: int, stream: int):
    return [run_simulation(params, replication_seed(base, i, stream)) for i in range(n)]


def run_repetition(index: int, paramsets: dict[str, SimParams], n_runs: int = 30,
                   n_permutations: int = 9999, alpha: float = 0.01, base_seed: int = 20240) -> Repetition:
    base = base_seed + index
    a, b, c = {}, {}, {}
    batch = 0.0
    for name, p in paramsets.items():
        start = time.perf_counter()
        a[name] = _group(p, n_runs, base, STREAM_A)
        b[name] = _group(p, n_runs, base, STREAM_B)
        batch = max(batch, time.perf_counter() - start)
        c[name] = _group(p.replace(prey_gain=2 * p.prey_gain), n_runs, base, STREAM_C)
    same = compare_models(a, b, alpha=alpha, n_permutations=n_permutations, seed=base)
    diff = compare_models(a, c, alpha=alpha, n_permutations=n_permutations, seed=base)
    return Repetition(
        index,
        same.overall_score, {s.paramset: s.p_adjusted for s in same.sets},
        diff.overall_score, {s.paramset: s.p_adjusted for s in diff.sets},
        batch,
    )


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--runs", type=int, default=30)
    ap.add_argument("--permutations", type=int, default=9999)
    ap.add_argument("--iterations", type=int, help="override the iteration count (quick look)")
    ap.add_argument("--base-seed", type=int, default=20240)
    ap.add_argument("-o", "--output", type=Path)
    args = ap.parse_args(argv)

    sets = load_sets()
    if args.iterations is not None:
        sets = {k: v.replace(iterations=args.iterations) for k, v in sets.items()}
    lines = ["rep,self_score,perturbed_score," + ",".join(
        f"{kind}_padj_{name}" for kind in ("self", "perturbed") for name in sets) + ",batch_s"]
    for r in range(args.reps):
        rep = run_repetition(r, sets, args.runs, args.permutations, base_seed=args.base_seed)
        cells = [rep.self_p_adjusted[n] for n in sets] + [rep.perturbed_p_adjusted[n] for n in sets]
        lines.append(f"{r},{rep.self_score},{rep.perturbed_score}," + ",".join(f"{x:.6f}" for x in cells)
                     + f",{rep.batch_seconds:.1f}")
        print(lines[-1], flush=True)
    if args.output:
        args.output.parent.mkdir(parents=True, exist_ok=True)
        args.output.write_text("\n".join(lines) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
