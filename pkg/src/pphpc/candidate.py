"""The built-in simulator exposed through the candidate process contract.

    python -m pphpc.candidate --check
    python -m pphpc.candidate GX GY PREY PRED ITERS GS GW LS LW RTS RTW RPS RPW CR SEED
"""

from __future__ import annotations

import sys

from pphpc.harness import HANDSHAKE


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if argv == ["--check"]:
        print(HANDSHAKE)
        return 0
    if len(argv) != 15:
        print(f"expected 15 integer arguments, got {len(argv)}", file=sys.stderr)
        return 2
    from pphpc.io import write_output_csv
    from pphpc.sim import ParamError, SimParams, run_simulation

    try:
        values = [int(a) for a in argv]
        params = SimParams.from_sequence(values[:14])
    except (ValueError, ParamError) as exc:
        print(exc, file=sys.stderr)
        return 2
    write_output_csv(run_simulation(params, values[14]), sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
