"""Ground-truth references and the two ranking-quality experiments.

Experiment 1 (false selection): how often the estimated top-j set fails
to cover the true top-k lines, as a function of sample size.

Experiment 2 (rank intervals): per-line spread of the estimated rank
(mean and empirical 2.5/97.5 percent quantiles) against the true rank.

Both experiments replay many independent replications over a shared
grid of sample sizes. Within one replication every estimator consumes
the exact same injection sample (checked by hashing the array before
and after use), and growing the sample size extends the sample rather
than redrawing it, so curves over n are comparable point to point.
Replications run on a thread pool; each owns stream index r, so results
do not depend on scheduling.
"""

from __future__ import annotations

import csv
import hashlib
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dc_model import DCModel
from .errors import DataError, NumericError
from .ranking import (
    Algorithm,
    RateTracker,
    gaussian_tail,
    laplace_costs,
    rank_by_counting,
    rank_by_gaussian,
    rank_by_laplace,
    ranks_from_scores,
    top_k,
    wilson_interval,
)
from .stochastic import GaussianInjectionModel, LaplaceInjectionModel

DEFAULT_N_GRID = (10, 20, 50, 100, 200, 500, 1000, 5000, 10000, 100000)
DEFAULT_REPLICATIONS = 1000
MONTE_CARLO_CONFIDENCE = 0.99

_GROUND_TRUTH_HEADER = ["line", "theta", "rank", "source"]
_FALSE_SELECTION_HEADER = ["algorithm", "k", "j", "n", "replications", "f_hat"]
_RANK_INTERVAL_HEADER = ["algorithm", "n", "line", "true_rank", "mean_rank", "lo", "hi"]


@dataclass(frozen=True)
class GroundTruth:
    """Reference overload probabilities and the ranking they induce."""

    source: str
    lines: np.ndarray   # (m,) 1-based
    theta: np.ndarray   # (m,)
    ranks: np.ndarray   # (m,) 1-based

    def top_k(self, k: int) -> frozenset[int]:
        return top_k(self.ranks, k, self.lines)


def _truth(source: str, theta: np.ndarray) -> GroundTruth:
    m = theta.shape[0]
    return GroundTruth(
        source=source,
        lines=np.arange(1, m + 1),
        theta=theta,
        ranks=ranks_from_scores(theta),
    )


def analytic_gaussian_truth(
    model: DCModel,
    injections: GaussianInjectionModel,
    gamma: np.ndarray | None = None,
) -> GroundTruth:
    """Exact two-sided normal tails under the true covariance."""
    g = model.gamma if gamma is None else gamma
    mean, sigma = injections.flow_distribution(model)
    return _truth("analytic_gaussian", gaussian_tail(mean, sigma, g))


def laplace_ldp_truth(
    model: DCModel,
    injections: LaplaceInjectionModel,
    gamma: np.ndarray | None = None,
) -> GroundTruth:
    """Perfect-information light-tail scores from the true Laplace scales."""
    g = model.gamma if gamma is None else gamma
    cost = laplace_costs(model.ptdf_stochastic, model.nominal_flow, injections.alpha, g)
    with np.errstate(over="ignore"):
        theta = np.exp(-cost / injections.epsilon)
    return _truth("laplace_ldp_perfect", theta)


_MC_BLOCK = 250_000


def monte_carlo_truth(
    model: DCModel,
    injections,
    n_total: int,
    seed: int,
    gamma: np.ndarray | None = None,
) -> tuple[GroundTruth, np.ndarray, np.ndarray]:
    """Exceedance frequencies on a large fresh sample.

    Rows are drawn in fixed blocks of 250000, block b from stream
    index b, so the estimate depends only on ``n_total`` and ``seed``
    while memory stays bounded. Also returns the Wilson interval at
    99 percent confidence.
    """
    if n_total < 1:
        raise DataError(f"n_total must be positive, got {n_total}")
    g = model.gamma if gamma is None else gamma
    counts = np.zeros(model.n_branches)
    done = 0
    index = 0
    while done < n_total:
        take = min(_MC_BLOCK, n_total - done)
        p = injections.sample(take, seed, index=index)
        fabs = np.abs(model.flow_samples(p))
        counts += (fabs >= g).sum(axis=0)
        done += take
        index += 1
    theta = counts / n_total
    lo, hi = wilson_interval(counts, n_total, MONTE_CARLO_CONFIDENCE)
    return _truth("monte_carlo", theta), lo, hi


def write_ground_truth_csv(dest, truth: GroundTruth) -> None:
    """Write ``line,theta,rank,source`` rows."""

    def _write(fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_GROUND_TRUTH_HEADER)
        for i in range(truth.lines.shape[0]):
            writer.writerow([
                int(truth.lines[i]),
                repr(float(truth.theta[i])),
                int(truth.ranks[i]),
                truth.source,
            ])

    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            _write(fh)
    else:
        _write(dest)


def read_ground_truth_csv(src) -> GroundTruth:
    if isinstance(src, (str, Path)):
        with open(src, newline="") as fh:
            return _read_truth(fh)
    if isinstance(src, str):
        return _read_truth(io.StringIO(src))
    return _read_truth(src)


def _read_truth(fh) -> GroundTruth:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("ground truth CSV is empty") from None
    if header != _GROUND_TRUTH_HEADER:
        raise DataError(
            f"ground truth CSV header must be {_GROUND_TRUTH_HEADER}, got {header}"
        )
    rows = [row for row in reader if row]
    if not rows:
        raise DataError("ground truth CSV has no rows")
    sources = {row[3] for row in rows}
    if len(sources) != 1:
        raise DataError(f"ground truth CSV mixes sources: {sorted(sources)}")
    return GroundTruth(
        source=rows[0][3],
        lines=np.array([int(r[0]) for r in rows]),
        theta=np.array([float(r[1]) for r in rows]),
        ranks=np.array([int(r[2]) for r in rows]),
    )


@dataclass(frozen=True)
class RankCollection:
    """Estimated ranks for every (algorithm, sample size, replication)."""

    algorithms: tuple[Algorithm, ...]
    n_grid: tuple[int, ...]
    replications: int
    seed: int
    ranks: np.ndarray  # (alg, grid, rep, line) int32
    sample_digests: tuple[str, ...]  # one per replication

    @property
    def n_lines(self) -> int:
        return self.ranks.shape[3]


def _digest(arr: np.ndarray) -> str:
    return hashlib.blake2b(np.ascontiguousarray(arr).tobytes(), digest_size=16).hexdigest()


def collect_ranks(
    model: DCModel,
    injections,
    algorithms: list[Algorithm],
    n_grid: tuple[int, ...] = DEFAULT_N_GRID,
    replications: int = DEFAULT_REPLICATIONS,
    seed: int = 0,
    gamma: np.ndarray | None = None,
    epsilon: float = 1.0,
    rel_tol: float = 1e-10,
    workers: int | None = None,
) -> RankCollection:
    """Run every estimator over a nested sample grid, many times.

    Replication r draws one sample of max(n_grid) rows from stream
    index r; each grid size scores a prefix of it. The rate estimator
    also warm-starts from the previous grid size. The per-replication
    digest is checked again after the last estimator has consumed the
    array, so a mutation by any estimator fails loudly.
    """
    grid = tuple(sorted(set(int(n) for n in n_grid)))
    if not grid or grid[0] < 1:
        raise DataError(f"invalid sample-size grid {n_grid}")
    if replications < 1:
        raise DataError(f"replications must be positive, got {replications}")
    algs = tuple(algorithms)
    if len(set(algs)) != len(algs):
        raise DataError("duplicate algorithms requested")
    n_max = grid[-1]

    ranks = np.zeros((len(algs), len(grid), replications, model.n_branches), dtype=np.int32)
    digests: list[str] = [""] * replications

    def run_one(r: int) -> None:
        p_full = injections.sample(n_max, seed, index=r)
        before = _digest(p_full)
        tracker = RateTracker(model, gamma, rel_tol) if Algorithm.RATE in algs else None
        prev = 0
        for gi, n in enumerate(grid):
            if tracker is not None:
                tracker.extend(p_full[prev:n])
                prev = n
            prefix = p_full[:n]
            for ai, alg in enumerate(algs):
                if alg is Algorithm.RATE:
                    table = tracker.score()
                elif alg is Algorithm.COUNTING:
                    table = rank_by_counting(model, prefix, gamma).table
                elif alg is Algorithm.GAUSSIAN:
                    table = rank_by_gaussian(model, prefix, gamma)
                else:
                    table = rank_by_laplace(model, prefix, gamma, epsilon)
                ranks[ai, gi, r, :] = table.ranks
        if _digest(p_full) != before:
            raise NumericError(f"replication {r}: sample mutated during scoring")
        digests[r] = before

    if workers is None:
        workers = min(32, os.cpu_count() or 1)
    if workers <= 1:
        for r in range(replications):
            run_one(r)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            # list() propagates the first worker exception, if any.
            list(pool.map(run_one, range(replications)))

    return RankCollection(
        algorithms=algs,
        n_grid=grid,
        replications=replications,
        seed=seed,
        ranks=ranks,
        sample_digests=tuple(digests),
    )


@dataclass(frozen=True)
class FalseSelectionRow:
    algorithm: Algorithm
    k: int
    j: int
    n: int
    replications: int
    f_hat: float


def false_selection(
    collection: RankCollection,
    truth: GroundTruth,
    pairs: list[tuple[int, int]],
) -> list[FalseSelectionRow]:
    """Probability that the true top-k is not inside the estimated top-j."""
    m = collection.n_lines
    if truth.lines.shape[0] != m:
        raise DataError("ground truth and collection disagree on line count")
    rows = []
    for k, j in pairs:
        if not (1 <= k <= j <= m):
            raise DataError(f"need 1 <= k <= j <= {m}, got (k={k}, j={j})")
        true_idx = np.array(sorted(i - 1 for i in truth.top_k(k)))
        for ai, alg in enumerate(collection.algorithms):
            for gi, n in enumerate(collection.n_grid):
                est = collection.ranks[ai, gi, :, :]  # (rep, line)
                fail = (est[:, true_idx] > j).any(axis=1)
                rows.append(
                    FalseSelectionRow(
                        algorithm=alg,
                        k=k,
                        j=j,
                        n=n,
                        replications=collection.replications,
                        f_hat=float(fail.mean()),
                    )
                )
    return rows


def write_false_selection_csv(dest, rows: list[FalseSelectionRow]) -> None:
    """Write ``algorithm,k,j,n,replications,f_hat`` rows."""

    def _write(fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_FALSE_SELECTION_HEADER)
        for row in rows:
            writer.writerow([
                row.algorithm.value, row.k, row.j, row.n,
                row.replications, repr(row.f_hat),
            ])

    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            _write(fh)
    else:
        _write(dest)


def read_false_selection_csv(src) -> list[FalseSelectionRow]:
    if isinstance(src, (str, Path)):
        with open(src, newline="") as fh:
            return _read_false_selection(fh)
    if isinstance(src, str):
        return _read_false_selection(io.StringIO(src))
    return _read_false_selection(src)


def _read_false_selection(fh) -> list[FalseSelectionRow]:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header != _FALSE_SELECTION_HEADER:
        raise DataError(
            f"false selection CSV header must be {_FALSE_SELECTION_HEADER}, got {header}"
        )
    return [
        FalseSelectionRow(
            algorithm=Algorithm(r[0]), k=int(r[1]), j=int(r[2]), n=int(r[3]),
            replications=int(r[4]), f_hat=float(r[5]),
        )
        for r in reader if r
    ]


@dataclass(frozen=True)
class RankIntervalRow:
    algorithm: Algorithm
    n: int
    line: int
    true_rank: int
    mean_rank: float
    lo: float
    hi: float


def rank_intervals(
    collection: RankCollection,
    truth: GroundTruth,
    coverage: float = 0.95,
) -> list[RankIntervalRow]:
    """Per-line mean and central-quantile band of the estimated rank."""
    m = collection.n_lines
    if truth.lines.shape[0] != m:
        raise DataError("ground truth and collection disagree on line count")
    if not 0.0 < coverage < 1.0:
        raise DataError(f"coverage must be in (0, 1), got {coverage}")
    tail = (1.0 - coverage) / 2.0
    rows = []
    for ai, alg in enumerate(collection.algorithms):
        for gi, n in enumerate(collection.n_grid):
            est = collection.ranks[ai, gi, :, :].astype(np.float64)  # (rep, line)
            lo = np.quantile(est, tail, axis=0)
            hi = np.quantile(est, 1.0 - tail, axis=0)
            mean = est.mean(axis=0)
            for i in range(m):
                rows.append(
                    RankIntervalRow(
                        algorithm=alg,
                        n=n,
                        line=int(truth.lines[i]),
                        true_rank=int(truth.ranks[i]),
                        mean_rank=float(mean[i]),
                        lo=float(lo[i]),
                        hi=float(hi[i]),
                    )
                )
    return rows


def write_rank_intervals_csv(dest, rows: list[RankIntervalRow]) -> None:
    """Write ``algorithm,n,line,true_rank,mean_rank,lo,hi`` rows."""

    def _write(fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_RANK_INTERVAL_HEADER)
        for row in rows:
            writer.writerow([
                row.algorithm.value, row.n, row.line, row.true_rank,
                repr(row.mean_rank), repr(row.lo), repr(row.hi),
            ])

    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            _write(fh)
    else:
        _write(dest)


def read_rank_intervals_csv(src) -> list[RankIntervalRow]:
    if isinstance(src, (str, Path)):
        with open(src, newline="") as fh:
            return _read_rank_intervals(fh)
    if isinstance(src, str):
        return _read_rank_intervals(io.StringIO(src))
    return _read_rank_intervals(src)


def _read_rank_intervals(fh) -> list[RankIntervalRow]:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header != _RANK_INTERVAL_HEADER:
        raise DataError(
            f"rank interval CSV header must be {_RANK_INTERVAL_HEADER}, got {header}"
        )
    return [
        RankIntervalRow(
            algorithm=Algorithm(r[0]), n=int(r[1]), line=int(r[2]),
            true_rank=int(r[3]), mean_rank=float(r[4]), lo=float(r[5]), hi=float(r[6]),
        )
        for r in reader if r
    ]
