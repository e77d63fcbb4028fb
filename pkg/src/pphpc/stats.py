"""Model-independent comparison of two groups of simulation runs.

Each run becomes one feature vector (its six output series, each standard
scaled within the run, concatenated). The pooled matrix is reduced by PCA to
the fewest components reaching a variance target, and the two groups are
compared with a permutation Energy test on those scores. P-values from one
invocation form a single Benjamini-Hochberg family.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from pphpc.sim import SimOutput

DEFAULT_PERMUTATIONS = 1000


def standardize_series(v) -> np.ndarray:
    """Zero mean, unit population std; a constant series maps to zeros."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot standardize an empty series")
    centered = v - v.mean()
    std = np.sqrt(np.mean(centered**2))
    if std == 0.0 or std < 1e-12 * max(1.0, np.abs(v).max()):
        return np.zeros_like(v)
    return centered / std


@dataclass
class FeatureMatrix:
    rows: np.ndarray
    labels: list[str]

    @property
    def group_sizes(self) -> tuple[int, int]:
        first = self.labels[0]
        n_a = sum(1 for lab in self.labels if lab == first)
        return n_a, len(self.labels) - n_a


def run_features(output: SimOutput) -> np.ndarray:
    return np.concatenate([standardize_series(output.data[:, j]) for j in range(6)])


def build_feature_matrix(
    group_a: Sequence[SimOutput],
    group_b: Sequence[SimOutput],
    labels: tuple[str, str] = ("A", "B"),
) -> FeatureMatrix:
    if not group_a or not group_b:
        raise ValueError("both groups must be non-empty")
    lengths = {len(o) for o in (*group_a, *group_b)}
    if len(lengths) != 1:
        raise ValueError(f"runs differ in row count: {sorted(lengths)}")
    rows = np.vstack([run_features(o) for o in (*group_a, *group_b)])
    return FeatureMatrix(rows, [labels[0]] * len(group_a) + [labels[1]] * len(group_b))


@dataclass
class PCScores:
    scores: np.ndarray          # (n_rows, k)
    explained_ratios: np.ndarray  # over all components
    k: int
    axes: np.ndarray            # (n_components, n_features), orthonormal rows
    mean: np.ndarray

    @property
    def explained(self) -> np.ndarray:
        return self.explained_ratios[: self.k]


def pca_project(matrix, min_variance: float = 0.80) -> PCScores:
    """Project onto the fewest PCs whose cumulative explained variance >= ``min_variance``."""
    x = matrix.rows if isinstance(matrix, FeatureMatrix) else np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("PCA needs a 2-D matrix with at least 2 rows")
    if not 0.0 < min_variance <= 1.0:
        raise ValueError(f"min_variance must be in (0, 1], got {min_variance}")
    mean = x.mean(axis=0)
    centered = x - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    # sign convention: largest-magnitude loading of each axis is positive
    flip = np.sign(vt[np.arange(vt.shape[0]), np.argmax(np.abs(vt), axis=1)])
    flip[flip == 0] = 1.0
    vt = vt * flip[:, None]
    var = s**2
    total = var.sum()
    if total == 0.0:
        # all rows identical: a single zero-variance component carries everything
        ratios = np.zeros_like(var)
        ratios[0] = 1.0
    else:
        ratios = var / total
    cum = np.cumsum(ratios)
    # guard the comparison against round-off in the cumulative sum
    k = int(np.searchsorted(cum, min_variance - 1e-12) + 1)
    k = min(k, len(ratios))
    scores = centered @ vt[:k].T
    return PCScores(scores, ratios, k, vt, mean)


def energy_statistic(x, y) -> float:
    """Two-sample energy statistic scaled by ``nm/(n+m)`` (Euclidean distance).

    1-D inputs are treated as samples of scalars.
    """
    x, y = _as_points(x), _as_points(y)
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise ValueError("both samples must be non-empty")
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    n, m = x.shape[0], y.shape[0]
    # averaging both orientations makes the result exactly symmetric
    cross = 0.5 * (cdist(x, y).mean() + cdist(y, x).mean())
    within = cdist(x, x).mean() + cdist(y, y).mean()
    return n * m / (n + m) * (2.0 * cross - within)


def _as_points(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return a.reshape(-1, 1) if a.ndim == 1 else a


def _pooled_statistics(dist: np.ndarray, members: np.ndarray) -> np.ndarray:
    """Energy statistic for each row of boolean group memberships (R, N).

    Written so that complementary memberships give bit-identical results.
    """
    px = members.astype(np.float64)
    py = 1.0 - px
    n = px[0].sum()
    m = py[0].sum()
    s_xx = np.einsum("rj,rj->r", px @ dist, px)
    s_yy = np.einsum("rj,rj->r", py @ dist, py)
    s_xy = 0.5 * (dist.sum() - (s_xx + s_yy))
    e = 2.0 * s_xy / (n * m) - (s_xx / n**2 + s_yy / m**2)
    return n * m / (n + m) * e


def energy_test(x, y, n_permutations: int = DEFAULT_PERMUTATIONS, seed: int = 0) -> float:
    """Permutation p-value ``(1 + #{T* >= T}) / (R + 1)`` for the energy statistic.

    Pooled points are put in a canonical (lexicographic) order before
    relabeling and the smaller group's labels are permuted, so the p-value
    does not depend on input row order or on which sample is passed first.
    """
    if n_permutations < 1:
        raise ValueError("n_permutations must be >= 1")
    x, y = _as_points(x), _as_points(y)
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise ValueError("both samples must be non-empty")
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    n, m = x.shape[0], y.shape[0]
    pooled = np.vstack([x, y])
    in_x = np.zeros(n + m, dtype=bool)
    in_x[:n] = True
    order = np.lexsort(pooled.T[::-1])
    pooled, in_x = pooled[order], in_x[order]
    observed_members = in_x if n <= m else ~in_x
    small = min(n, m)

    dist = cdist(pooled, pooled)
    observed = _pooled_statistics(dist, observed_members[None, :])[0]
    pattern = np.zeros(n + m, dtype=bool)
    pattern[:small] = True
    rng = np.random.default_rng(seed)
    perms = rng.permuted(np.tile(pattern, (n_permutations, 1)), axis=1)
    stats = _pooled_statistics(dist, perms)
    # relabelings equal to the observed split must count despite round-off
    tol = 1e-12 * max(1.0, abs(observed))
    hits = int(np.count_nonzero(stats >= observed - tol))
    return (1 + hits) / (n_permutations + 1)


def bh_adjust(p_values) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values, in input order."""
    p = np.asarray(p_values, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("expected a 1-D sequence of p-values")
    if p.size == 0:
        return p.copy()
    if np.any(~(p > 0.0)) or np.any(p > 1.0):
        raise ValueError("p-values must lie in (0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    # (m/j) >= 1 is formed first so rounding can never push a value below p
    scaled = (m / np.arange(1, m + 1)) * p[order]
    adj_sorted = np.minimum.accumulate(scaled[::-1])[::-1]
    adj_sorted = np.minimum(adj_sorted, 1.0)
    out = np.empty_like(p)
    out[order] = adj_sorted
    return out


@dataclass
class ParamSetComparison:
    paramset: str
    k: int
    p_raw: float
    p_adjusted: float = float("nan")
    significant: bool = False
    pcs: PCScores | None = field(default=None, repr=False)
    labels: list[str] = field(default_factory=list, repr=False)


@dataclass
class ComparisonResult:
    sets: list[ParamSetComparison]
    alpha: float

    @property
    def overall_score(self) -> int:
        return 5 if any(s.significant for s in self.sets) else 6

    def __getitem__(self, paramset: str) -> ParamSetComparison:
        for s in self.sets:
            if s.paramset == paramset:
                return s
        raise KeyError(paramset)


def raw_comparison(
    paramset: str,
    group_a: Sequence[SimOutput],
    group_b: Sequence[SimOutput],
    min_variance: float = 0.80,
    n_permutations: int = DEFAULT_PERMUTATIONS,
    seed: int = 0,
    labels: tuple[str, str] = ("A", "B"),
) -> ParamSetComparison:
    """Features, PCA and Energy test for one parameter set (unadjusted)."""
    fm = build_feature_matrix(group_a, group_b, labels)
    pcs = pca_project(fm, min_variance)
    n_a = len(group_a)
    p = energy_test(pcs.scores[:n_a], pcs.scores[n_a:], n_permutations, seed)
    return ParamSetComparison(paramset, pcs.k, p, pcs=pcs, labels=fm.labels)


def apply_bh(comparisons: Sequence[ParamSetComparison], alpha: float) -> None:
    """Adjust p-values in place as one family and mark significance."""
    if not comparisons:
        return
    adjusted = bh_adjust([c.p_raw for c in comparisons])
    for c, p in zip(comparisons, adjusted):
        c.p_adjusted = float(p)
        c.significant = bool(p < alpha)


def compare_models(
    runs_a: Mapping[str, Sequence[SimOutput]],
    runs_b: Mapping[str, Sequence[SimOutput]],
    alpha: float = 0.01,
    min_variance: float = 0.80,
    n_permutations: int = DEFAULT_PERMUTATIONS,
    seed: int = 0,
) -> ComparisonResult:
    """Compare per-parameter-set run groups; score 6 iff no set differs significantly."""
    if set(runs_a) != set(runs_b):
        raise ValueError("both sides must cover the same parameter sets")
    if not runs_a:
        raise ValueError("no parameter sets to compare")
    sets = [
        raw_comparison(name, runs_a[name], runs_b[name], min_variance, n_permutations, seed)
        for name in runs_a
    ]
    apply_bh(sets, alpha)
    return ComparisonResult(sets, alpha)


def success_rate(scores: Sequence[int]) -> float:
    """Percentage of scores equal to 6."""
    scores = list(scores)
    if not scores:
        raise ValueError("no scores")
    return 100.0 * sum(1 for s in scores if int(s) == 6) / len(scores)


PVALUE_HEADER = ("candidate", "trial", "paramset", "k", "p_raw", "p_adjusted", "significant")


def format_pvalue_table(rows: Sequence[tuple[str, int, ParamSetComparison]]) -> str:
    lines = [",".join(PVALUE_HEADER)]
    for candidate, trial, c in rows:
        lines.append(
            f"{candidate},{trial},{c.paramset},{c.k},{c.p_raw:.6f},{c.p_adjusted:.6f},"
            f"{'true' if c.significant else 'false'}"
        )
    return "\n".join(lines) + "\n"
