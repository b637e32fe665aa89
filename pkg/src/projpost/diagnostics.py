"""Chain summaries: medians, credible intervals, autocorrelation, ESS."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def componentwise_median(samples):
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("no samples")
    return np.median(np.atleast_2d(samples), axis=0)


def credible_interval(samples, q):
    """Componentwise equal-tailed interval at level q (type-7 quantiles)."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] < 2:
        raise ValueError("need at least two samples")
    if not 0.0 < q < 1.0:
        raise ValueError("q must be in (0, 1)")
    lo = np.quantile(samples, (1.0 - q) / 2.0, axis=0, method="linear")
    hi = np.quantile(samples, 1.0 - (1.0 - q) / 2.0, axis=0, method="linear")
    return lo, hi


def acf(chain, max_lag=100):
    """Biased autocorrelation estimate rho(0..max_lag), rho(0) = 1."""
    x = np.asarray(chain, dtype=float).reshape(-1)
    if x.size <= max_lag:
        raise ValueError("chain shorter than max_lag")
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom == 0.0:
        raise ValueError("zero-variance chain")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for k in range(1, max_lag + 1):
        out[k] = float(xc[:-k] @ xc[k:]) / denom
    return out


def ess(chain, max_lag=None):
    """N / (1 + 2 sum rho(k)), truncated at the initial positive sequence.

    Lag pairs (rho(2m-1) + rho(2m)) are accumulated while positive; the
    result is clamped to [1, N].
    """
    x = np.asarray(chain, dtype=float).reshape(-1)
    n = x.size
    if max_lag is None:
        max_lag = min(200, n - 1)
    rho = acf(x, max_lag)
    s = 0.0
    k = 1
    while k + 1 <= max_lag:
        pair = rho[k] + rho[k + 1]
        if pair <= 0.0:
            break
        s += pair
        k += 2
    return float(np.clip(n / (1.0 + 2.0 * s), 1.0, n))


@dataclass
class SummaryTable:
    """Componentwise point estimates and interval widths for a sample set."""

    median: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    width: np.ndarray
    level: float
    hyper_acf: dict = field(default_factory=dict)
    hyper_ess: dict = field(default_factory=dict)


def summarize(samples, level=0.95, hyper_chains=None, max_lag=100):
    """Build the summary table; optional scalar chains get ACF/ESS columns."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    med = componentwise_median(samples)
    lo, hi = credible_interval(samples, level)
    table = SummaryTable(median=med, lo=lo, hi=hi, width=hi - lo, level=level)
    for name, chain in (hyper_chains or {}).items():
        lag = min(max_lag, len(chain) - 1)
        table.hyper_acf[name] = acf(chain, lag)
        table.hyper_ess[name] = ess(chain)
    return table
