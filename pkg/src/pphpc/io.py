"""Text formats: output CSV, parameter files, results and PC-score tables.

All writers emit UTF-8 with ``\\n`` line endings and are byte-deterministic.
Readers accept either text or binary streams.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from pphpc.sim import COLUMNS, ParamError, SimOutput, SimParams

HEADER = ",".join(COLUMNS)
_COUNT_COLS = 3


class FormatError(ValueError):
    """Malformed input. ``kind`` is one of header, cell, length, domain."""

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


def _text(source) -> IO[str]:
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8"))
    if isinstance(source, str):
        return io.StringIO(source)
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def _write(sink, text: str) -> None:
    if isinstance(sink, io.TextIOBase):
        sink.write(text)
    else:
        sink.write(text.encode("utf-8"))


def format_output_csv(output: SimOutput) -> str:
    lines = [HEADER]
    for row in output.data:
        counts = [str(int(v)) for v in row[:_COUNT_COLS]]
        means = [f"{v:.6f}" for v in row[_COUNT_COLS:]]
        lines.append(",".join(counts + means))
    return "\n".join(lines) + "\n"


def write_output_csv(output: SimOutput, sink) -> None:
    _write(sink, format_output_csv(output))


def read_output_csv(source, expected_rows: int | None = None) -> SimOutput:
    """Parse and validate an output CSV. Raises :class:`FormatError`."""
    lines = _text(source).read().splitlines()
    if not lines or lines[0].strip() != HEADER:
        got = lines[0].strip() if lines else "<empty>"
        raise FormatError("header", f"expected {HEADER!r}, got {got!r}")
    body = [ln for ln in lines[1:] if ln.strip()]
    data = np.empty((len(body), 6), dtype=np.float64)
    for i, line in enumerate(body, start=1):
        cells = line.split(",")
        if len(cells) != 6:
            raise FormatError("cell", f"row {i}: expected 6 fields, got {len(cells)}")
        for j, cell in enumerate(cells):
            try:
                value = int(cell) if j < _COUNT_COLS else float(cell)
            except ValueError:
                raise FormatError("cell", f"row {i}, column {COLUMNS[j]}: {cell!r}") from None
            if not math.isfinite(value):
                raise FormatError("cell", f"row {i}, column {COLUMNS[j]}: {cell!r}")
            if value < 0:
                raise FormatError("domain", f"row {i}, column {COLUMNS[j]} is negative")
            data[i - 1, j] = value
    if expected_rows is not None and len(body) != expected_rows:
        raise FormatError("length", f"expected {expected_rows} rows, got {len(body)}")
    if not body:
        raise FormatError("length", "no data rows")
    return SimOutput(data)


def format_param_file(params: SimParams) -> str:
    return "".join(f"{k}={v}\n" for k, v in zip(SimParams.field_names(), params.as_tuple()))


def write_param_file(params: SimParams, sink) -> None:
    _write(sink, format_param_file(params))


def read_param_file(source) -> SimParams:
    """Parse ``key=value`` lines; ``#`` starts a comment line."""
    names = SimParams.field_names()
    values: dict[str, int] = {}
    for lineno, raw in enumerate(_text(source).read().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ParamError(key or f"line {lineno}", "expected key=value")
        if key not in names:
            raise ParamError(key, "unknown parameter")
        if key in values:
            raise ParamError(key, "duplicate key")
        try:
            values[key] = int(value)
        except ValueError:
            raise ParamError(key, f"not an integer: {value!r}") from None
    for name in names:
        if name not in values:
            raise ParamError(name, "missing key")
    return SimParams(**values)


@dataclass(frozen=True)
class ResultRow:
    candidate_id: str
    trial_id: int
    seed: int
    score: int
    reason: str


RESULTS_HEADER = ("candidate_id", "trial_id", "seed", "score", "reason")


def write_results_csv(rows: Iterable[ResultRow], sink) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULTS_HEADER)
    for r in rows:
        if r.score not in range(1, 7):
            raise ValueError(f"score out of range: {r.score}")
        w.writerow([r.candidate_id, r.trial_id, r.seed, r.score, r.reason])
    _write(sink, buf.getvalue())


def read_results_csv(source) -> list[ResultRow]:
    reader = csv.reader(_text(source))
    header = next(reader, None)
    if tuple(header or ()) != RESULTS_HEADER:
        raise FormatError("header", f"expected {','.join(RESULTS_HEADER)}")
    rows = []
    for rec in reader:
        if not rec:
            continue
        try:
            row = ResultRow(rec[0], int(rec[1]), int(rec[2]), int(rec[3]), rec[4])
        except (ValueError, IndexError):
            raise FormatError("cell", f"bad results row: {rec!r}") from None
        if row.score not in range(1, 7):
            raise FormatError("domain", f"score out of range: {row.score}")
        rows.append(row)
    return rows


def export_pc_scores(
    scores: np.ndarray,
    labels: Sequence[str],
    explained: Sequence[float],
    sink,
) -> None:
    """Plot-ready PC scores: ``group,pc1,...,pck`` after an explained-variance comment."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] != len(labels):
        raise ValueError("scores must be (n_rows, k) with one label per row")
    k = scores.shape[1]
    lines = ["# explained_variance_ratio=" + ",".join(f"{r:.4f}" for r in explained)]
    lines.append(",".join(["group"] + [f"pc{i + 1}" for i in range(k)]))
    for label, row in zip(labels, scores):
        lines.append(",".join([str(label)] + [repr(float(v)) for v in row]))
    _write(sink, "\n".join(lines) + "\n")


def read_pc_scores(source) -> tuple[np.ndarray, list[str], list[float]]:
    lines = _text(source).read().splitlines()
    if not lines or not lines[0].startswith("# explained_variance_ratio="):
        raise FormatError("header", "missing explained-variance comment")
    explained = [float(v) for v in lines[0].split("=", 1)[1].split(",") if v]
    labels, rows = [], []
    for line in lines[2:]:
        parts = line.split(",")
        labels.append(parts[0])
        rows.append([float(v) for v in parts[1:]])
    return np.array(rows), labels, explained
