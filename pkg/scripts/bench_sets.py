"""Time the built-in simulator on the shipped parameter sets.

    python scripts/bench_sets.py --n 30 -o results/timings.csv
"""

import argparse
import sys
from pathlib import Path

from pphpc.bench import bench_builtin, format_timing_rows, summarize_times
from pphpc.io import read_param_file

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=30)
    ap.add_argument("--sets", nargs="+", default=["set1", "set2"])
    ap.add_argument("--base-seed", type=int, default=0)
    ap.add_argument("-o", "--output", type=Path)
    args = ap.parse_args(argv)
    if args.n < 2:
        ap.error("--n must be at least 2")

    rows = []
    for name in args.sets:
        with open(CONFIGS / f"{name}.params", "rb") as fh:
            params = read_param_file(fh)
        times = bench_builtin(params, args.n, args.base_seed)
        rows.append((name, "builtin", summarize_times(times)))
    text = format_timing_rows(rows)
    sys.stdout.write(text)
    if args.output:
        args.output.parent.mkdir(parents=True, exist_ok=True)
        args.output.write_text(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
