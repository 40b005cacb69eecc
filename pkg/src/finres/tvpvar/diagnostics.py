"""Convergence diagnostics for MCMC output: Geweke CD and inefficiency factors."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import norm

from ..errors import ValidationError

GEWEKE_FIRST = 0.1
GEWEKE_LAST = 0.5
MIN_CHAIN = 100


@dataclass(frozen=True)
class DiagnosticsRow:
    name: str
    mean: float
    sd: float
    interval95: tuple[float, float]
    cd: float
    cd_pvalue: float
    ineff: float


def parzen(x: np.ndarray) -> np.ndarray:
    x = np.abs(np.asarray(x, float))
    return np.where(x <= 0.5, 1 - 6 * x**2 + 6 * x**3, np.where(x <= 1, 2 * (1 - x) ** 3, 0.0))


def bandwidth(n: int) -> int:
    """Parzen lag-window bandwidth used by both diagnostics: ceil(sqrt(n))."""
    return max(1, math.ceil(math.sqrt(n)))


def autocovariance(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased (divisor n) sample autocovariances for lags 0..max_lag, via FFT."""
    x = np.asarray(x, float)
    n = x.size
    d = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(d, size)
    acov = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1] / n
    return acov


def spectral_variance(x: Sequence[float], bw: int | None = None) -> float:
    """Spectral density at frequency zero (long-run variance) with a Parzen window."""
    x = np.asarray(x, float)
    bw = bandwidth(x.size) if bw is None else bw
    lags = min(bw, x.size - 1)
    g = autocovariance(x, lags)
    w = parzen(np.arange(1, lags + 1) / bw)
    return float(g[0] + 2 * np.sum(w * g[1:]))


def geweke_cd(chain: Sequence[float]) -> float:
    """Geweke z-score comparing the first 10% and the last 50% of a chain."""
    x = np.asarray(chain, float)
    if x.ndim != 1 or x.size < MIN_CHAIN:
        raise ValidationError(f"geweke_cd needs a chain of length >= {MIN_CHAIN}")
    na = int(math.floor(GEWEKE_FIRST * x.size))
    nb = int(math.floor(GEWEKE_LAST * x.size))
    a, b = x[:na], x[x.size - nb:]
    va, vb = spectral_variance(a), spectral_variance(b)
    if np.ptp(a) == 0 and np.ptp(b) == 0:
        raise ValidationError("geweke_cd undefined: both segments have zero variance")
    diff = a.mean() - b.mean()
    denom = math.sqrt(max(va, 0.0) / na + max(vb, 0.0) / nb)
    if denom == 0:
        return 0.0 if diff == 0 else math.copysign(math.inf, diff)
    return float(diff / denom)


def cd_pvalue(cd: float) -> float:
    return float(2 * norm.sf(abs(cd)))


def inefficiency_factor(chain: Sequence[float]) -> float:
    """1 + 2 * sum_s w(s) rho(s) with Parzen weights, floored at zero."""
    x = np.asarray(chain, float)
    if x.ndim != 1 or x.size < MIN_CHAIN:
        raise ValidationError(f"inefficiency_factor needs a chain of length >= {MIN_CHAIN}")
    if np.ptp(x) == 0:
        raise ValidationError("inefficiency_factor undefined for a zero-variance chain")
    bw = bandwidth(x.size)
    lags = min(bw, x.size - 1)
    g = autocovariance(x, lags)
    rho = g[1:] / g[0]
    return max(0.0, float(1 + 2 * np.sum(parzen(np.arange(1, lags + 1) / bw) * rho)))


def summarize_chain(name: str, chain: Sequence[float]) -> DiagnosticsRow:
    """Mean, sd, equal-tailed 95% interval, CD and inefficiency of one chain.

    Constant chains get CD 0 (p-value 1) and inefficiency 1.
    """
    x = np.asarray(chain, float)
    if x.size == 0:
        raise ValidationError("empty chain")
    lo, hi = np.percentile(x, [2.5, 97.5])
    sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
    if x.size >= MIN_CHAIN and np.ptp(x) > 0:
        cd = geweke_cd(x)
        ineff = inefficiency_factor(x)
    else:
        cd, ineff = (0.0, 1.0) if np.ptp(x) == 0 else (math.nan, math.nan)
    return DiagnosticsRow(name, float(x.mean()), sd, (float(lo), float(hi)), cd,
                          cd_pvalue(cd) if not math.isnan(cd) else math.nan, ineff)


def posterior_summary(posterior, per_block: int | None = 2) -> list[DiagnosticsRow]:
    """Diagnostics rows for the innovation standard deviations.

    Rows follow (Sigma_beta)_1.., (Sigma_alpha)_1.., (Sigma_h)_1..; only the
    first ``per_block`` elements of each block are reported (all if None).
    """
    draws = posterior.innovation_draws
    if draws is None or draws.shape[0] == 0:
        raise ValidationError("posterior has no retained draws")
    names = posterior.innovation_names
    spec = posterior.spec
    starts = {"beta": 0, "alpha": spec.n_beta, "h": spec.n_beta + spec.n_alpha}
    sizes = {"beta": spec.n_beta, "alpha": spec.n_alpha, "h": spec.k}
    rows = []
    for block in ("beta", "alpha", "h"):
        count = sizes[block] if per_block is None else min(per_block, sizes[block])
        for i in range(count):
            col = starts[block] + i
            rows.append(summarize_chain(names[col], draws[:, col]))
    return rows


def write_summary_csv(rows: Sequence[DiagnosticsRow], dest, comment: str | None = None) -> None:
    import csv

    if comment:
        dest.write(f"# {comment}\n")
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(["parameter", "mean", "sd", "ci_low", "ci_high", "cd", "cd_pvalue", "ineff"])
    for r in rows:
        w.writerow([r.name, repr(r.mean), repr(r.sd), repr(r.interval95[0]), repr(r.interval95[1]),
                    repr(r.cd), repr(r.cd_pvalue), repr(r.ineff)])
