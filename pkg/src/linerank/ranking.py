"""Score and rank lines by estimated overload probability.

Four estimators share one output shape. Each maps injection samples to
a per-line score theta in [0, 1], larger meaning more likely to exceed
the thermal limit, then ranks lines by descending score:

* rate:     best exponential tilt of the sampled absolute flows
            (theta = exp(-rate), distribution free);
* counting: fraction of samples at or beyond the limit, with a Wilson
            score interval;
* gaussian: two-sided normal tail using the sample covariance of the
            injections around their known mean;
* laplace:  light-tailed-noise asymptotics under an independent
            Laplace noise model, cheapest-overload cost per line.

Scores of exactly zero get the ``saturated`` flag: the data (or the
fitted model) put no mass at or beyond the limit, so lines tied at zero
carry no ordering information beyond their index.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.optimize import linprog
from scipy.special import erfc, ndtri

from .dc_model import DCModel
from .errors import DataError, NumericError
from .ratefn import rate_table

# Closed-form and LP answers for the Laplace cost must agree to this
# tolerance (absolute near zero, relative for large costs), else the
# solve is reported as a numeric failure.
LP_AGREEMENT_TOL = 1e-7
# Costs beyond this mean "no realistic deviation overloads the line";
# the LP solver may call such problems infeasible where the closed form
# returns a huge finite number, and both verdicts count as agreement.
_LP_COST_CAP = 1e12


def _lp_agrees(closed: float, lp: float) -> bool:
    if np.isinf(closed) and np.isinf(lp):
        return True
    if min(closed, lp) > _LP_COST_CAP:
        return True
    if np.isinf(closed) or np.isinf(lp):
        return False
    return abs(lp - closed) <= LP_AGREEMENT_TOL * max(1.0, abs(min(closed, lp)))

_SCORE_HEADER = ["line", "score", "rate_value", "rank", "saturated", "algorithm", "n"]


class Algorithm(Enum):
    """Wire tokens for the four estimators, as used in CSV and CLI."""

    RATE = "alg1"
    COUNTING = "alg2"
    GAUSSIAN = "alg3"
    LAPLACE = "alg4"

    @classmethod
    def parse(cls, token: str) -> "Algorithm":
        token = token.strip().lower()
        aliases = {
            "1": cls.RATE, "alg1": cls.RATE, "rate": cls.RATE,
            "2": cls.COUNTING, "alg2": cls.COUNTING, "counting": cls.COUNTING,
            "3": cls.GAUSSIAN, "alg3": cls.GAUSSIAN, "gaussian": cls.GAUSSIAN,
            "4": cls.LAPLACE, "alg4": cls.LAPLACE, "laplace": cls.LAPLACE,
        }
        try:
            return aliases[token]
        except KeyError:
            raise DataError(f"unknown algorithm {token!r}, expected one of 1..4") from None


def ranks_from_scores(scores: np.ndarray) -> np.ndarray:
    """1-based ranks, descending score, ties broken by ascending line index."""
    scores = np.asarray(scores, dtype=np.float64)
    if np.isnan(scores).any():
        bad = np.flatnonzero(np.isnan(scores)) + 1
        raise DataError(f"scores contain NaN at lines {bad.tolist()}")
    m = scores.shape[0]
    order = np.lexsort((np.arange(m), -scores))
    ranks = np.empty(m, dtype=np.int64)
    ranks[order] = np.arange(1, m + 1)
    return ranks


def top_k(ranks: np.ndarray, k: int, lines: np.ndarray | None = None) -> frozenset[int]:
    """The k top-ranked line numbers (1-based)."""
    ranks = np.asarray(ranks)
    if lines is None:
        lines = np.arange(1, ranks.shape[0] + 1)
    return frozenset(int(v) for v in np.asarray(lines)[ranks <= k])


def wilson_interval(
    successes: np.ndarray, n: int, confidence: float = 0.95
) -> tuple[np.ndarray, np.ndarray]:
    """Wilson score interval for a binomial proportion, vectorized."""
    if not 0.0 < confidence < 1.0:
        raise DataError(f"confidence must be in (0, 1), got {confidence}")
    c = np.asarray(successes, dtype=np.float64)
    z = float(ndtri(0.5 + confidence / 2.0))
    phat = c / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2.0 * n)) / denom
    half = z * np.sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n)) / denom
    return np.maximum(center - half, 0.0), np.minimum(center + half, 1.0)


@dataclass(frozen=True)
class ScoreTable:
    """Per-line scores from one estimator run on n samples."""

    algorithm: Algorithm
    n: int
    lines: np.ndarray        # (m,) 1-based line numbers
    scores: np.ndarray       # (m,) theta in [0, 1]
    rate_values: np.ndarray  # (m,) -log(theta), inf when theta == 0
    ranks: np.ndarray        # (m,) 1-based
    saturated: np.ndarray    # (m,) bool, theta pinned to exactly 0

    @property
    def n_lines(self) -> int:
        return self.lines.shape[0]

    def top_k(self, k: int) -> frozenset[int]:
        return top_k(self.ranks, k, self.lines)


def _make_table(
    algorithm: Algorithm,
    n: int,
    scores: np.ndarray,
    rate_values: np.ndarray,
    saturated: np.ndarray,
    rank_on: np.ndarray | None = None,
) -> ScoreTable:
    """Assemble a table; ``rank_on`` substitutes an order-equivalent score
    for ranking when the probability itself can underflow to a tie."""
    m = scores.shape[0]
    return ScoreTable(
        algorithm=algorithm,
        n=n,
        lines=np.arange(1, m + 1),
        scores=scores,
        rate_values=rate_values,
        ranks=ranks_from_scores(scores if rank_on is None else rank_on),
        saturated=saturated.astype(bool),
    )


def _check_samples(model: DCModel, samples_pu: np.ndarray) -> np.ndarray:
    p = np.asarray(samples_pu, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != model.n_stochastic:
        raise DataError(
            f"samples must be (n, {model.n_stochastic}), got shape {p.shape}"
        )
    if p.shape[0] < 1:
        raise DataError("need at least one sample")
    if not np.all(np.isfinite(p)):
        raise DataError("samples contain non-finite values")
    return p


def _resolve_gamma(model: DCModel, gamma: np.ndarray | None) -> np.ndarray:
    if gamma is None:
        return np.asarray(model.gamma, dtype=np.float64)
    g = np.asarray(gamma, dtype=np.float64)
    if g.shape != (model.n_branches,):
        raise DataError(f"gamma must have shape ({model.n_branches},), got {g.shape}")
    if np.any(g <= 0):
        raise DataError("thermal limits must be positive")
    return g


def _neglog(theta: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(theta > 0.0, -np.log(np.maximum(theta, 1e-320)), np.inf)


@dataclass(frozen=True)
class RateResult:
    """Rate-estimator scores plus the per-line optimal tilt.

    ``lambda_star`` is the maximizing tilt for each line: 0 when the
    limit is already at or below the mean absolute flow, inf when no
    sample reaches the limit (or the limit equals the sample maximum).
    """

    table: ScoreTable
    lambda_star: np.ndarray


def rank_by_rate(
    model: DCModel,
    samples_pu: np.ndarray,
    gamma: np.ndarray | None = None,
    lam0: np.ndarray | None = None,
    rel_tol: float = 1e-10,
) -> RateResult:
    """Empirical rate-function estimator on absolute sampled flows."""
    p = _check_samples(model, samples_pu)
    g = _resolve_gamma(model, gamma)
    fabs = np.ascontiguousarray(np.abs(model.flow_samples(p)).T)
    if lam0 is None:
        lam0 = np.zeros(model.n_branches)
    rates, lam, sat = rate_table(fabs, p.shape[0], g, lam0, rel_tol)
    theta = np.exp(-rates)
    table = _make_table(Algorithm.RATE, p.shape[0], theta, rates, sat, rank_on=-rates)
    return RateResult(table=table, lambda_star=lam)


@dataclass(frozen=True)
class CountingResult:
    """Counting estimate plus its Wilson interval at the given confidence."""

    table: ScoreTable
    lo: np.ndarray
    hi: np.ndarray
    confidence: float


def rank_by_counting(
    model: DCModel,
    samples_pu: np.ndarray,
    gamma: np.ndarray | None = None,
    confidence: float = 0.95,
) -> CountingResult:
    """Fraction of samples with |flow| at or beyond the limit."""
    p = _check_samples(model, samples_pu)
    g = _resolve_gamma(model, gamma)
    n = p.shape[0]
    fabs = np.abs(model.flow_samples(p))
    counts = (fabs >= g).sum(axis=0).astype(np.float64)
    theta = counts / n
    lo, hi = wilson_interval(counts, n, confidence)
    table = _make_table(Algorithm.COUNTING, n, theta, _neglog(theta), counts == 0)
    return CountingResult(table=table, lo=lo, hi=hi, confidence=confidence)


def gaussian_tail(nu: np.ndarray, sigma: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Two-sided normal exceedance P(|N(nu, sigma^2)| >= gamma), vectorized.

    Degenerate sigma == 0 gives an indicator: 1 if gamma <= |nu| else 0.
    """
    nu = np.asarray(nu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    out = np.where(gamma <= np.abs(nu), 1.0, 0.0)
    ok = sigma > 0.0
    if np.any(ok):
        with np.errstate(invalid="ignore"):
            hi = 0.5 * erfc((gamma - nu) / (sigma * np.sqrt(2.0)))
            lo = 0.5 * erfc((gamma + nu) / (sigma * np.sqrt(2.0)))
        out = np.where(ok, np.where(np.isinf(gamma), 0.0, hi + lo), out)
    return np.minimum(out, 1.0)


def rank_by_gaussian(
    model: DCModel,
    samples_pu: np.ndarray,
    gamma: np.ndarray | None = None,
) -> ScoreTable:
    """Normal tail under the sample covariance of the injections.

    The injection mean is the known nominal set point, so the covariance
    divides by n without a degrees-of-freedom correction.
    """
    p = _check_samples(model, samples_pu)
    g = _resolve_gamma(model, gamma)
    n = p.shape[0]
    centered = p - model.mean_injection
    cov = centered.T @ centered / n
    var = np.einsum("li,ij,lj->l", model.ptdf_stochastic, cov, model.ptdf_stochastic)
    sigma = np.sqrt(np.maximum(var, 0.0))
    nu = model.nominal_flow
    theta = gaussian_tail(nu, sigma, g)
    saturated = theta == 0.0
    return _make_table(Algorithm.GAUSSIAN, n, theta, _neglog(theta), saturated)


def laplace_costs(
    ptdf_stochastic: np.ndarray,
    nominal_flow: np.ndarray,
    alpha: np.ndarray,
    gamma: np.ndarray,
) -> np.ndarray:
    """Closed-form cheapest-overload cost per line under Laplace noise.

    The cheapest way to push one line to its limit against a weighted-L1
    cost concentrates the whole deviation on the single best bus, so the
    cost is max(0, gamma - |nu|) over the largest alpha-weighted
    sensitivity. Zero sensitivity with slack to the limit costs inf.
    """
    weight = np.abs(ptdf_stochastic) * alpha
    best = weight.max(axis=1)
    slack = np.maximum(gamma - np.abs(nominal_flow), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        cost = np.where(
            slack == 0.0, 0.0, np.where(best > 0.0, slack / best, np.inf)
        )
    return cost


def _laplace_cost_lp(
    row: np.ndarray, mu: np.ndarray, fixed_flow: float, alpha: np.ndarray, gamma: float
) -> float:
    """Linear-program route to the same cost, one line at a time.

    Minimizes sum_i |p_i - mu_i| / alpha_i subject to the line flow
    reaching its limit in the direction matching the nominal flow sign
    (both directions when the nominal flow is zero).
    """
    d = row.shape[0]
    nu = float(row @ mu) + fixed_flow
    signs = [1.0, -1.0] if nu == 0.0 else [float(np.sign(nu))]
    c = np.concatenate([np.zeros(d), 1.0 / alpha])
    # |p - mu| linearization: z_i >= +-(p_i - mu_i).
    a_abs = np.block([
        [np.eye(d), -np.eye(d)],
        [-np.eye(d), -np.eye(d)],
    ])
    b_abs = np.concatenate([mu, -mu])
    best = np.inf
    for s in signs:
        a_flow = np.concatenate([-s * row, np.zeros(d)])[None, :]
        b_flow = np.array([-(gamma - s * fixed_flow)])
        res = linprog(
            c,
            A_ub=np.vstack([a_abs, a_flow]),
            b_ub=np.concatenate([b_abs, b_flow]),
            bounds=[(None, None)] * d + [(0, None)] * d,
            method="highs",
        )
        if res.status == 2:
            continue  # infeasible: this direction cannot reach the limit
        if not res.success:
            raise NumericError(f"overload cost LP failed: {res.message}")
        best = min(best, float(res.fun))
    return best


def rank_by_laplace(
    model: DCModel,
    samples_pu: np.ndarray | None,
    gamma: np.ndarray | None = None,
    epsilon: float = 1.0,
    alpha: np.ndarray | None = None,
    verify_lp: bool = False,
) -> ScoreTable:
    """Light-tailed asymptotics under independent Laplace injection noise.

    The per-bus scales alpha are fitted as mean absolute deviations from
    the known nominal set points, unless exact scales are passed (then
    samples may be omitted). Scores are exp(-cost / epsilon); the
    ranking itself does not depend on epsilon. With ``verify_lp`` every
    closed-form cost is re-derived by linear programming and any
    disagreement beyond LP_AGREEMENT_TOL raises.
    """
    g = _resolve_gamma(model, gamma)
    if epsilon <= 0:
        raise DataError(f"epsilon must be positive, got {epsilon}")
    if alpha is None:
        if samples_pu is None:
            raise DataError("need samples or explicit alpha scales")
        p = _check_samples(model, samples_pu)
        n = p.shape[0]
        alpha = np.abs(p - model.mean_injection).mean(axis=0)
    else:
        alpha = np.asarray(alpha, dtype=np.float64)
        if alpha.shape != (model.n_stochastic,):
            raise DataError(
                f"alpha must have shape ({model.n_stochastic},), got {alpha.shape}"
            )
        n = 0 if samples_pu is None else np.asarray(samples_pu).shape[0]
    if np.any(alpha < 0):
        raise DataError("alpha scales must be nonnegative")

    cost = laplace_costs(model.ptdf_stochastic, model.nominal_flow, alpha, g)

    if verify_lp:
        fixed = model.ptdf_deterministic @ model.fixed_injection
        for k in range(model.n_branches):
            if np.isinf(g[k]):
                continue
            lp = _laplace_cost_lp(
                model.ptdf_stochastic[k], model.mean_injection, float(fixed[k]),
                alpha, float(g[k]),
            )
            if not _lp_agrees(float(cost[k]), lp):
                raise NumericError(
                    f"line {k + 1}: LP cost {lp!r} disagrees with "
                    f"closed form {cost[k]!r}"
                )

    rate = cost / epsilon
    with np.errstate(over="ignore"):
        theta = np.exp(-rate)
    return _make_table(Algorithm.LAPLACE, n, theta, rate, np.isinf(cost), rank_on=-cost)


class RateTracker:
    """Re-scores lines online as the sample grows.

    Flows are buffered per line and each solve is warm-started from the
    previous tilt, so scoring after each extension costs little more
    than scoring once at the end.
    """

    def __init__(
        self,
        model: DCModel,
        gamma: np.ndarray | None = None,
        rel_tol: float = 1e-10,
    ) -> None:
        self._model = model
        self._gamma = _resolve_gamma(model, gamma)
        self._rel_tol = rel_tol
        self._lam = np.zeros(model.n_branches)
        self._buf = np.empty((model.n_branches, 0))
        self._n = 0

    @property
    def n(self) -> int:
        return self._n

    def extend(self, samples_pu: np.ndarray) -> None:
        """Append new time steps (rows of stochastic injections, pu)."""
        p = _check_samples(self._model, samples_pu)
        block = np.abs(self._model.flow_samples(p)).T
        need = self._n + block.shape[1]
        if need > self._buf.shape[1]:
            cap = max(2 * self._buf.shape[1], need, 64)
            grown = np.empty((self._buf.shape[0], cap))
            grown[:, : self._n] = self._buf[:, : self._n]
            self._buf = grown
        self._buf[:, self._n : need] = block
        self._n = need

    def score(self, n: int | None = None) -> ScoreTable:
        """Score using the first n buffered samples (default: all)."""
        if n is None:
            n = self._n
        if not 0 < n <= self._n:
            raise DataError(f"n={n} out of range, have {self._n} samples")
        rates, lam, sat = rate_table(self._buf, n, self._gamma, self._lam, self._rel_tol)
        self._lam = lam
        theta = np.exp(-rates)
        return _make_table(Algorithm.RATE, n, theta, rates, sat, rank_on=-rates)


def rank_lines(
    model: DCModel,
    samples_pu: np.ndarray,
    algorithms: list[Algorithm],
    gamma: np.ndarray | None = None,
    epsilon: float = 1.0,
    confidence: float = 0.95,
    rel_tol: float = 1e-10,
) -> list[ScoreTable]:
    """Run the requested estimators on one sample set, in the given order."""
    tables = []
    for alg in algorithms:
        if alg is Algorithm.RATE:
            tables.append(rank_by_rate(model, samples_pu, gamma, rel_tol=rel_tol).table)
        elif alg is Algorithm.COUNTING:
            tables.append(rank_by_counting(model, samples_pu, gamma, confidence).table)
        elif alg is Algorithm.GAUSSIAN:
            tables.append(rank_by_gaussian(model, samples_pu, gamma))
        else:
            tables.append(rank_by_laplace(model, samples_pu, gamma, epsilon))
    return tables


def write_scores_csv(dest, tables: list[ScoreTable] | ScoreTable) -> None:
    """Write one or more score tables as line,score,rate_value,rank,saturated,algorithm,n."""
    if isinstance(tables, ScoreTable):
        tables = [tables]

    def _write(fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_SCORE_HEADER)
        for t in tables:
            for i in range(t.n_lines):
                writer.writerow([
                    int(t.lines[i]),
                    repr(float(t.scores[i])),
                    repr(float(t.rate_values[i])),
                    int(t.ranks[i]),
                    int(t.saturated[i]),
                    t.algorithm.value,
                    t.n,
                ])

    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            _write(fh)
    else:
        _write(dest)


def read_scores_csv(src) -> list[ScoreTable]:
    """Read a score CSV back into tables, grouped by (algorithm, n)."""
    if isinstance(src, (str, Path)):
        with open(src, newline="") as fh:
            return _read_scores(fh)
    if isinstance(src, str):
        return _read_scores(io.StringIO(src))
    return _read_scores(src)


def _read_scores(fh) -> list[ScoreTable]:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("score CSV is empty") from None
    if header != _SCORE_HEADER:
        raise DataError(f"score CSV header must be {_SCORE_HEADER}, got {header}")

    groups: dict[tuple[str, int], list[list[str]]] = {}
    for row in reader:
        if not row:
            continue
        if len(row) != len(_SCORE_HEADER):
            raise DataError(f"score row has {len(row)} fields: {row}")
        groups.setdefault((row[5], int(row[6])), []).append(row)

    tables = []
    for (alg, n), rows in groups.items():
        tables.append(
            ScoreTable(
                algorithm=Algorithm(alg),
                n=n,
                lines=np.array([int(r[0]) for r in rows]),
                scores=np.array([float(r[1]) for r in rows]),
                rate_values=np.array([float(r[2]) for r in rows]),
                ranks=np.array([int(r[3]) for r in rows]),
                saturated=np.array([bool(int(r[4])) for r in rows]),
            )
        )
    return tables
