"""Pure NumPy implementation of the tilted rate-function kernel.

Solves, for one line and threshold gamma,

    max over lam >= 0 of  lam * gamma - log(mean(exp(lam * f)))

where f are absolute sampled flows. The objective is concave with
derivative gamma - m(lam), m being the exponentially tilted mean of the
samples, so the maximizer is the unique root of m(lam) = gamma found by
a bracketed Newton iteration. All exponentials are taken relative to
max(f), keeping every term in (0, 1].
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

_MAX_ITER = 200
_BOUNDARY_LAM = math.inf


def max_rate(
    fabs: np.ndarray, gamma: float, lam0: float = 0.0, rel_tol: float = 1e-10
) -> tuple[float, float, bool]:
    """Best exponential-tilt exponent for one line.

    Returns (rate, lam, saturated). ``saturated`` is True exactly when
    gamma exceeds every sample, where the rate is infinite. A gamma at
    or below the sample mean gives rate 0 at lam 0. ``lam0`` seeds the
    Newton iteration; pass the previous maximizer when re-solving on a
    grown sample.
    """
    f = np.ascontiguousarray(fabs, dtype=np.float64)
    n = f.shape[0]
    if n == 0:
        raise ValueError("need at least one sample")
    fmax = float(f.max())
    fmean = float(f.mean())
    if gamma <= fmean:
        return 0.0, 0.0, False
    if gamma > fmax:
        return math.inf, math.inf, True
    if gamma == fmax:
        # Supremum approached as lam grows without bound.
        nmax = int(np.count_nonzero(f == fmax))
        return math.log(n / nmax), _BOUNDARY_LAM, False

    shifted = f - fmax  # all <= 0, at least one == 0
    scale = 1.0 / (fmax - fmean)
    lam = lam0 if (math.isfinite(lam0) and lam0 > 0.0) else scale
    lo, hi = 0.0, math.inf

    for _ in range(_MAX_ITER):
        e = np.exp(lam * shifted)
        s0 = float(e.sum())
        s1 = float(shifted @ e)
        s2 = float((shifted * shifted) @ e)
        m = fmax + s1 / s0
        if m < gamma:
            lo = lam
        else:
            hi = lam
        if math.isfinite(hi) and hi - lo <= rel_tol * hi:
            lam = 0.5 * (lo + hi)
            break
        var = s2 / s0 - (s1 / s0) ** 2
        lam_new = lam + (gamma - m) / var if var > 0.0 else math.nan
        if not (lo < lam_new < hi) or not math.isfinite(lam_new):
            lam_new = 2.0 * max(lam, scale) if math.isinf(hi) else 0.5 * (lo + hi)
        if abs(lam_new - lam) <= rel_tol * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new

    s0 = float(np.exp(lam * shifted).sum())
    rate = lam * (gamma - fmax) + math.log(n) - math.log(s0)
    return max(rate, 0.0), lam, False


def rate_table(
    fabs: np.ndarray,
    n: int,
    gamma: np.ndarray,
    lam0: np.ndarray,
    rel_tol: float = 1e-10,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Solve every line against the first ``n`` columns of ``fabs``.

    ``fabs`` is (m, n_max) with one row of absolute flows per line.
    Returns (rates, lams, saturated) arrays of length m.
    """
    fabs = np.ascontiguousarray(fabs, dtype=np.float64)
    if fabs.ndim != 2:
        raise ValueError(f"fabs must be 2-D, got shape {fabs.shape}")
    if not 0 < n <= fabs.shape[1]:
        raise ValueError(f"n={n} out of range for {fabs.shape[1]} columns")
    m = fabs.shape[0]
    gamma = np.asarray(gamma, dtype=np.float64)
    lam0 = np.asarray(lam0, dtype=np.float64)
    if gamma.shape != (m,) or lam0.shape != (m,):
        raise ValueError("gamma and lam0 must have one entry per line")

    rates = np.empty(m)
    lams = np.empty(m)
    saturated = np.zeros(m, dtype=np.uint8)
    for k in range(m):
        g = gamma[k]
        if math.isinf(g):
            rates[k], lams[k], saturated[k] = math.inf, math.inf, True
            continue
        seed = lam0[k] if math.isfinite(lam0[k]) else 0.0
        j, lam, sat = max_rate(fabs[k, :n], g, seed, rel_tol)
        rates[k] = j
        lams[k] = lam
        saturated[k] = sat
    return rates, lams, saturated
