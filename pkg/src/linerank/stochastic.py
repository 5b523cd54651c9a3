"""Injection models, seeded sampling, and sample CSV serialization.

Reproducibility contract: every random draw comes from a Philox stream
keyed by (user seed, purpose tag, stream index). Two consequences the
rest of the package relies on:

* growing a sample is a prefix extension: ``sample(n2)[:n1]`` equals
  ``sample(n1)`` for n1 <= n2, because each stream fills row-major from
  a single generator;
* parallel work is schedule independent, because each unit of work owns
  its own (tag, index) stream.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dc_model import DCModel
from .errors import DataError, NumericError

DEFAULT_VARIANCE_FACTOR = 5.0    # MW^2 of variance per MW of set point
DEFAULT_OFFDIAG_VARIANCE = 25.0  # MW^2, coupling factor entries
_RIDGE_EXPONENTS = range(-8, 1)


def tag_code(tag: str) -> int:
    """Stable 32-bit code for a purpose tag, used as a spawn key."""
    digest = hashlib.blake2s(tag.encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "little")


def spawn_generator(seed: int, tag: str, index: int = 0) -> np.random.Generator:
    """Independent generator for one purpose and stream index."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(tag_code(tag), index))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class GaussianInjectionModel:
    """Multivariate normal injections at the stochastic buses (pu)."""

    mean: np.ndarray        # (d,)
    covariance: np.ndarray  # (d, d)
    TAG = "gaussian-injections"

    def __post_init__(self) -> None:
        try:
            chol = np.linalg.cholesky(self.covariance)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"covariance is not positive definite: {exc}") from None
        object.__setattr__(self, "_chol", chol)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def sample(self, n: int, seed: int, index: int = 0) -> np.ndarray:
        rng = spawn_generator(seed, self.TAG, index)
        z = rng.standard_normal((n, self.dim))
        return z @ self._chol.T + self.mean

    def flow_distribution(self, model: DCModel) -> tuple[np.ndarray, np.ndarray]:
        """Exact per-line flow mean and standard deviation under this model."""
        mean = model.ptdf_stochastic @ self.mean + model.ptdf_deterministic @ model.fixed_injection
        var = np.einsum(
            "li,ij,lj->l", model.ptdf_stochastic, self.covariance, model.ptdf_stochastic
        )
        return mean, np.sqrt(np.maximum(var, 0.0))


@dataclass(frozen=True)
class LaplaceInjectionModel:
    """Independent Laplace injections at the stochastic buses (pu).

    Coordinate i has density proportional to exp(-|p - mean_i| /
    (epsilon * alpha_i)), so its variance is 2 (epsilon alpha_i)^2.
    """

    mean: np.ndarray   # (d,)
    alpha: np.ndarray  # (d,) positive shape scales
    epsilon: float = 1.0
    TAG = "laplace-injections"

    def __post_init__(self) -> None:
        if np.any(self.alpha <= 0) or self.epsilon <= 0:
            raise NumericError("Laplace scales and epsilon must be positive")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def sample(self, n: int, seed: int, index: int = 0) -> np.ndarray:
        rng = spawn_generator(seed, self.TAG, index)
        # Difference of two unit exponentials is a standard Laplace draw;
        # the (n, 2, d) layout keeps the prefix property over n.
        e = rng.standard_exponential((n, 2, self.dim))
        return self.mean + (self.epsilon * self.alpha) * (e[:, 0, :] - e[:, 1, :])


def build_covariance(
    model: DCModel,
    seed: int,
    variance_factor: float = DEFAULT_VARIANCE_FACTOR,
    offdiag_variance: float = DEFAULT_OFFDIAG_VARIANCE,
) -> tuple[np.ndarray, float]:
    """Synthesize an injection covariance for a case (pu^2).

    Diagonal: ``variance_factor`` times the generator set point in MW.
    Off-diagonals: entries of A A^T for A with iid centered normal
    entries of variance ``offdiag_variance`` MW^2, a seeded draw under
    the "covariance-coupling" tag. If the assembled matrix fails a
    Cholesky factorization, the smallest power-of-ten ridge from 1e-8
    pu^2 upward that restores it is added; the ridge is returned so
    callers can record it.
    """
    case = model.case
    gross = np.array([case.generation_at(i) for i in model.stochastic_ids])
    diag_mw2 = variance_factor * np.abs(gross)

    rng = spawn_generator(seed, "covariance-coupling")
    a = rng.standard_normal((model.n_stochastic, model.n_stochastic))
    coupling = offdiag_variance * (a @ a.T)

    cov_mw2 = coupling.copy()
    np.fill_diagonal(cov_mw2, diag_mw2)
    cov = cov_mw2 / case.base_mva**2

    for tau in (0.0, *(10.0**k for k in _RIDGE_EXPONENTS)):
        try:
            np.linalg.cholesky(cov + tau * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError:
            continue
        if tau > 0.0:
            cov = cov + tau * np.eye(cov.shape[0])
        return cov, tau
    raise NumericError("covariance could not be repaired with a ridge up to 1 pu^2")


def default_gaussian_model(
    model: DCModel,
    seed: int,
    variance_factor: float = DEFAULT_VARIANCE_FACTOR,
    offdiag_variance: float = DEFAULT_OFFDIAG_VARIANCE,
) -> tuple[GaussianInjectionModel, float]:
    """Gaussian model at the case's nominal point, plus the ridge used."""
    cov, tau = build_covariance(model, seed, variance_factor, offdiag_variance)
    return GaussianInjectionModel(mean=model.mean_injection, covariance=cov), tau


def default_laplace_model(
    model: DCModel,
    epsilon: float = 1.0,
    variance_factor: float = DEFAULT_VARIANCE_FACTOR,
) -> LaplaceInjectionModel:
    """Laplace model matching the Gaussian per-bus variances."""
    case = model.case
    gross = np.array([case.generation_at(i) for i in model.stochastic_ids])
    var_pu = variance_factor * np.abs(gross) / case.base_mva**2
    alpha = np.sqrt(var_pu / 2.0) / epsilon
    return LaplaceInjectionModel(mean=model.mean_injection, alpha=alpha, epsilon=epsilon)


def write_samples_csv(dest, values_mw: np.ndarray) -> None:
    """Write samples as ``t,p_1..p_d`` with 1-based t (values in MW)."""
    values_mw = np.asarray(values_mw)
    if values_mw.ndim != 2:
        raise DataError(f"samples must be 2-D, got shape {values_mw.shape}")
    n, d = values_mw.shape

    def _write(fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", *(f"p_{j + 1}" for j in range(d))])
        for t in range(n):
            writer.writerow([t + 1, *(repr(float(v)) for v in values_mw[t])])

    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            _write(fh)
    else:
        _write(dest)


def read_samples_csv(src) -> np.ndarray:
    """Read a ``t,p_1..p_d`` CSV back into an (n, d) MW array."""
    if isinstance(src, (str, Path)):
        with open(src, newline="") as fh:
            return _read_samples(fh)
    if isinstance(src, str):
        return _read_samples(io.StringIO(src))
    return _read_samples(src)


def _read_samples(fh) -> np.ndarray:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("sample CSV is empty") from None
    if not header or header[0] != "t":
        raise DataError(f"sample CSV must start with a 't' column, got {header[:1]}")
    expected = [f"p_{j + 1}" for j in range(len(header) - 1)]
    if header[1:] != expected:
        raise DataError(
            f"sample CSV columns must be t,p_1..p_{len(header) - 1}, got {header}"
        )
    d = len(expected)
    if d == 0:
        raise DataError("sample CSV has no injection columns")

    rows = []
    for t, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != d + 1:
            raise DataError(f"sample row {t} has {len(row)} fields, expected {d + 1}")
        try:
            values = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise DataError(f"sample row {t}: {exc}") from None
        rows.append(values)
    if not rows:
        raise DataError("sample CSV has a header but no rows")
    data = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise DataError("sample CSV contains non-finite values")
    return data
