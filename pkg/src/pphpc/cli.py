"""Command-line entry point: ``pphpc {simulate,compare,evaluate,bench,pcs,candidate}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from pphpc import io as pio
from pphpc.bench import ReplicationError, bench_builtin, format_timing_rows, summarize_times
from pphpc.harness import (
    CandidateSpec,
    StatsConfig,
    baseline_runs_live,
    evaluate_batch,
)
from pphpc.sim import ParamError, SimParams, run_simulation
from pphpc.stats import DEFAULT_PERMUTATIONS, apply_bh, format_pvalue_table, raw_comparison

log = logging.getLogger("pphpc")

OUTPUT_CSV_HELP = f"""\
output CSV: header '{pio.HEADER}', then one line per iteration
including the initial state (iterations+1 rows); counts as integers, means with
6 decimals, LF line endings."""

PARAM_FILE_HELP = f"""\
parameter file: one key=value line per parameter, '#' comment lines allowed;
all 14 integer keys required exactly once: {', '.join(SimParams.field_names())}.
A bare name such as 'set1' resolves to <config-dir>/set1.params (config dir from
--config-dir, $PPHPC_CONFIG_DIR, or ./configs)."""

RUN_DIR_HELP = """\
run directory: one subdirectory per parameter set holding output CSVs
(<dir>/<paramset>/*.csv), or output CSVs directly in <dir> for a single
parameter set named 'default'; at least 2 runs per parameter set."""

MANIFEST_HELP = """\
manifest (JSON): {"candidates": [{"id": str, "command": [str, ...],
"artifact": str?, "timeout_smoke": s?, "timeout_full": s?}, ...]}.
Candidates answer '--check' with 'pphpc-candidate 1' and, given the 14
parameters and a seed as positional integers, print an output CSV to stdout.
results.csv columns: candidate_id,trial_id,seed,score,reason."""


class CliError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get("PPHPC_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"PPHPC_SEED is not an integer: {raw!r}") from None


def _config_dir(args) -> Path:
    return Path(args.config_dir or os.environ.get("PPHPC_CONFIG_DIR", "configs"))


def _load_params(ref: str, args) -> SimParams:
    path = Path(ref)
    if not path.exists() and "/" not in ref and not ref.endswith(".params"):
        path = _config_dir(args) / f"{ref}.params"
    try:
        with open(path, "rb") as fh:
            return pio.read_param_file(fh)
    except OSError as exc:
        raise CliError(f"cannot read parameter file {path}: {exc.strerror}") from None
    except ParamError as exc:
        raise CliError(f"invalid parameter file {path}: {exc}") from None


def _open_out(path: str | None):
    if path in (None, "-"):
        return sys.stdout.buffer
    return open(path, "wb")


def _write_text(path: str | None, text: str) -> None:
    fh = _open_out(path)
    try:
        fh.write(text.encode("utf-8"))
        fh.flush()
    finally:
        if fh is not sys.stdout.buffer:
            fh.close()


def _read_run_dir(root: Path) -> dict[str, list]:
    if not root.is_dir():
        raise CliError(f"not a directory: {root}")
    groups = {}
    flat = sorted(root.glob("*.csv"))
    if flat:
        groups["default"] = flat
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        files = sorted(sub.glob("*.csv"))
        if files:
            groups[sub.name] = files
    if not groups:
        raise CliError(f"no output CSVs under {root}")
    runs = {}
    for name, files in groups.items():
        if len(files) < 2:
            raise CliError(f"{root}: parameter set {name!r} needs at least 2 runs, found {len(files)}")
        outs = []
        for f in files:
            try:
                with open(f, "rb") as fh:
                    outs.append(pio.read_output_csv(fh))
            except pio.FormatError as exc:
                raise CliError(f"{f}: {exc}") from None
        runs[name] = outs
    return runs


def _comparisons(args):
    runs_a = _read_run_dir(Path(args.group_a))
    runs_b = _read_run_dir(Path(args.group_b))
    if set(runs_a) != set(runs_b):
        raise CliError(f"parameter sets differ: {sorted(runs_a)} vs {sorted(runs_b)}")
    comps = []
    for name in runs_a:
        try:
            comps.append(raw_comparison(name, runs_a[name], runs_b[name], args.min_variance,
                                        args.permutations, args.seed))
        except ValueError as exc:
            raise CliError(f"parameter set {name!r}: {exc}") from None
    return comps


def _export_pcs(comp, path: Path) -> None:
    with open(path, "wb") as fh:
        pio.export_pc_scores(comp.pcs.scores, comp.labels, comp.pcs.explained, fh)


def cmd_simulate(args) -> int:
    params = _load_params(args.params, args)
    if args.iterations is not None:
        params = params.replace(iterations=args.iterations)
    seed = _default_seed() if args.seed is None else args.seed
    out = run_simulation(params, seed)
    _write_text(args.out, pio.format_output_csv(out))
    return 0


def cmd_compare(args) -> int:
    args.seed = _default_seed() if args.seed is None else args.seed
    comps = _comparisons(args)
    apply_bh(comps, args.alpha)
    _write_text(args.report, format_pvalue_table([("group_a", 0, c) for c in comps]))
    if args.pcs_dir:
        Path(args.pcs_dir).mkdir(parents=True, exist_ok=True)
        for c in comps:
            _export_pcs(c, Path(args.pcs_dir) / f"pcs_{c.paramset}.csv")
    score = 5 if any(c.significant for c in comps) else 6
    for c in comps:
        log.info("%s: k=%d p_raw=%.4g p_adj=%.4g", c.paramset, c.k, c.p_raw, c.p_adjusted)
    print(f"score {score}")
    return 0


def cmd_pcs(args) -> int:
    args.seed = _default_seed() if args.seed is None else args.seed
    comps = {c.paramset: c for c in _comparisons(args)}
    if args.paramset not in comps:
        raise CliError(f"unknown parameter set {args.paramset!r}; have {sorted(comps)}")
    c = comps[args.paramset]
    fh = _open_out(args.out)
    try:
        pio.export_pc_scores(c.pcs.scores, c.labels, c.pcs.explained, fh)
    finally:
        if fh is not sys.stdout.buffer:
            fh.close()
    return 0


def _load_manifest(path: str, args) -> list[CandidateSpec]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        specs = []
        for entry in doc["candidates"]:
            specs.append(CandidateSpec(
                id=str(entry["id"]),
                command=tuple(str(c) for c in entry["command"]),
                artifact=entry.get("artifact"),
                timeout_smoke=float(entry.get("timeout_smoke", args.timeout_smoke)),
                timeout_full=float(entry.get("timeout_full", args.timeout_full)),
            ))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CliError(f"bad manifest {path}: {exc!r}") from None
    if not specs:
        raise CliError(f"manifest {path} lists no candidates")
    return specs


def cmd_evaluate(args) -> int:
    specs = _load_manifest(args.manifest, args)
    paramsets = {Path(name).stem: _load_params(name, args) for name in args.paramsets}
    if args.iterations is not None:
        paramsets = {k: p.replace(iterations=args.iterations) for k, p in paramsets.items()}
    base = _default_seed() if args.seed is None else args.seed
    if args.trial_seeds:
        seeds = args.trial_seeds
    else:
        seeds = [base + t for t in range(args.trials)]
    if args.baseline == "live":
        log.info("generating %d live baseline runs per parameter set", args.reps)
        baseline = baseline_runs_live(paramsets, args.reps, base)
    else:
        baseline = _read_run_dir(Path(args.baseline))
        missing = set(paramsets) - set(baseline)
        if missing:
            raise CliError(f"baseline lacks parameter sets {sorted(missing)}")
    stats = StatsConfig(args.alpha, args.min_variance, args.permutations, base)
    result = evaluate_batch(specs, seeds, baseline, paramsets, args.reps, stats, args.jobs)
    with open(args.out, "wb") as fh:
        pio.write_results_csv(result.rows, fh)
    if args.pvalues:
        _write_text(args.pvalues, format_pvalue_table(result.pvalue_rows()))
    if args.timings:
        rows = [
            (name, f"{cid}/{trial}", s)
            for (cid, trial), score in result.scores.items()
            for name, s in score.timings.items()
        ]
        _write_text(args.timings, format_timing_rows(rows))
    print("candidate_id,success_rate")
    for cid, rate in result.success_rates.items():
        print(f"{cid},{rate:.1f}")
    return 0


def cmd_bench(args) -> int:
    if args.n < 2:
        raise CliError("--n must be at least 2 for a standard deviation")
    params = _load_params(args.params, args)
    if args.iterations is not None:
        params = params.replace(iterations=args.iterations)
    base = _default_seed() if args.base_seed is None else args.base_seed
    try:
        times = bench_builtin(params, args.n, base)
    except ReplicationError as exc:
        raise CliError(str(exc)) from None
    summary = summarize_times(times, args.reference_mean)
    _write_text(args.out, format_timing_rows([(args.params, "builtin", summary)]))
    return 0


def _positive_float(s: str) -> float:
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {s}")
    return v


def _alpha(s: str) -> float:
    v = float(s)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"alpha must be in (0, 1): {s}")
    return v


def _min_variance(s: str) -> float:
    v = float(s)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"must be in (0, 1]: {s}")
    return v


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {s}")
    return v


def _add_stats_flags(p) -> None:
    p.add_argument("--alpha", type=_alpha, default=0.01, help="corrected significance level (default 0.01)")
    p.add_argument("--min-variance", type=_min_variance, default=0.80,
                   help="explained-variance target for PCA (default 0.80)")
    p.add_argument("--permutations", type=_positive_int, default=DEFAULT_PERMUTATIONS,
                   help=f"permutations for the Energy test (default {DEFAULT_PERMUTATIONS})")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config-dir", help="directory holding named parameter sets (<name>.params)")
    common.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")
    parser = argparse.ArgumentParser(prog="pphpc", description="PPHPC simulation and replication validation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run one replication", formatter_class=fmt,
                       epilog=PARAM_FILE_HELP + "\n\n" + OUTPUT_CSV_HELP)
    p.add_argument("params", help="parameter file or named set")
    p.add_argument("--seed", type=int, help="64-bit seed (default $PPHPC_SEED or 0)")
    p.add_argument("--iterations", type=int, help="override the iteration count")
    p.add_argument("-o", "--out", help="output CSV path (default stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", parents=[common], help="statistically compare two groups of runs", formatter_class=fmt,
                       epilog=RUN_DIR_HELP + "\n\n" + OUTPUT_CSV_HELP + "\n\nreport columns: "
                       + ",".join(("candidate", "trial", "paramset", "k", "p_raw", "p_adjusted", "significant")))
    p.add_argument("group_a")
    p.add_argument("group_b")
    _add_stats_flags(p)
    p.add_argument("--seed", type=int, help="permutation seed (default $PPHPC_SEED or 0)")
    p.add_argument("--report", default="pvalues.csv", help="p-value table path (default pvalues.csv)")
    p.add_argument("--pcs-dir", help="also write pcs_<paramset>.csv score exports here")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("pcs", parents=[common], help="export PC scores for plotting", formatter_class=fmt,
                       epilog=RUN_DIR_HELP + "\n\nexport: '# explained_variance_ratio=r1,...' then "
                       "'group,pc1,...,pck' rows")
    p.add_argument("group_a")
    p.add_argument("group_b")
    p.add_argument("--paramset", default="default")
    p.add_argument("--min-variance", type=_min_variance, default=0.80)
    p.add_argument("--permutations", type=_positive_int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--out", help="export path (default stdout)")
    p.set_defaults(func=cmd_pcs)

    p = sub.add_parser("evaluate", parents=[common], help="score external candidate simulators (1-6)", formatter_class=fmt,
                       epilog=MANIFEST_HELP + "\n\n" + RUN_DIR_HELP + "\n\n" + OUTPUT_CSV_HELP)
    p.add_argument("manifest")
    p.add_argument("--baseline", default="live", help="run directory, or 'live' to use the built-in simulator")
    p.add_argument("--paramsets", nargs="+", default=["set1", "set2"], help="parameter files or named sets")
    p.add_argument("--trials", type=_positive_int, default=6)
    p.add_argument("--trial-seeds", type=int, nargs="+", help="explicit trial seeds (overrides --trials)")
    p.add_argument("--reps", type=_positive_int, default=30, help="replications per parameter set")
    p.add_argument("--iterations", type=int, help="override the iteration count of every parameter set")
    p.add_argument("--seed", type=int, help="base seed (default $PPHPC_SEED or 0)")
    p.add_argument("--jobs", type=_positive_int, default=1, help="concurrent candidate processes")
    p.add_argument("--timeout-smoke", type=_positive_float, default=30.0)
    p.add_argument("--timeout-full", type=_positive_float, default=3600.0)
    _add_stats_flags(p)
    p.add_argument("-o", "--out", default="results.csv")
    p.add_argument("--pvalues", help="also write the p-value table here")
    p.add_argument("--timings", help="also write timing summaries of score-6 trials here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", parents=[common], help="time replications of the built-in simulator", formatter_class=fmt,
                       epilog=PARAM_FILE_HELP + "\n\ntiming CSV columns: paramset,trial,mean_s,s_rel_pct,ratio")
    p.add_argument("params")
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--base-seed", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--reference-mean", type=_positive_float, help="reference mean time in seconds")
    p.add_argument("-o", "--out", help="timing CSV path (default stdout)")
    p.set_defaults(func=cmd_bench)

    sub.add_parser("candidate", help="run the built-in simulator under the candidate contract "
                   "('--check' or 14 parameters plus a seed)")
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if argv[:1] == ["candidate"]:
        # candidate argv (including --check) is passed through untouched
        from pphpc.candidate import main as candidate_main

        return candidate_main(argv[1:])
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (CliError, ParamError) as exc:
        print(f"pphpc {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
