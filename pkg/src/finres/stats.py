"""PCA composites, OLS and the two-step mediation regressions."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, TextIO

import numpy as np

from .dataio import TimeSeriesPanel
from .errors import NumericalError, ValidationError

# two-sided normal thresholds for 10%, 5%, 1%
STAR_THRESHOLDS = ((2.576, "***"), (1.96, "**"), (1.645, "*"))


@dataclass(frozen=True)
class PcaComposite:
    scores: np.ndarray
    loadings: np.ndarray
    explained_fraction: float
    columns: tuple[str, ...] = ()


@dataclass(frozen=True)
class OlsFit:
    coefficients: np.ndarray
    t_values: np.ndarray
    r_squared: float
    adj_r_squared: float
    residuals: np.ndarray
    std_errors: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class MediationReport:
    outcome_fits: dict[str, OlsFit]
    mediator_fits: dict[str, OlsFit]
    significance_stars: dict[str, dict[str, str]]


def pca_composite(panel: TimeSeriesPanel | np.ndarray, standardize_inputs: bool = True) -> PcaComposite:
    """First principal component of the panel columns.

    Uses the correlation matrix when ``standardize_inputs`` is true (scores are
    then projections of the z-scored columns), otherwise the covariance matrix
    of the demeaned columns. Loadings are unit-norm with a nonnegative sum.
    """
    if isinstance(panel, TimeSeriesPanel):
        X, cols = panel.values, panel.columns
    else:
        X = np.asarray(panel, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        cols = ()
    T, k = X.shape
    if k < 1 or T <= k:
        raise ValidationError(f"pca_composite needs T > k >= 1, got T={T}, k={k}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("pca_composite input has non-finite values")
    Z = X - X.mean(axis=0)
    if standardize_inputs:
        sd = Z.std(axis=0, ddof=1)
        if np.any(sd <= 0):
            bad = int(np.flatnonzero(sd <= 0)[0])
            raise ValidationError(f"zero-variance column {cols[bad] if cols else bad}")
        Z = Z / sd
    C = Z.T @ Z / (T - 1)
    C = (C + C.T) / 2
    evals, evecs = np.linalg.eigh(C)
    # eigh sorts ascending; take the largest, first index among ties
    top = evals.max()
    lead = int(np.flatnonzero(evals >= top - 1e-12 * max(abs(top), 1.0))[0])
    w = evecs[:, lead]
    w = w / np.linalg.norm(w)
    if w.sum() < 0:
        w = -w
    trace = float(np.trace(C))
    frac = float(evals[lead] / trace) if trace > 0 else 0.0
    return PcaComposite(scores=Z @ w, loadings=w, explained_fraction=min(max(frac, 0.0), 1.0), columns=tuple(cols))


def ols(y: Sequence[float], X) -> OlsFit:
    """Least squares of ``y`` on an intercept plus the columns of ``X``.

    Coefficients are ordered intercept first. Standard errors use the unbiased
    residual variance RSS / (n - p).
    """
    yv = np.asarray(y, dtype=float)
    Xv = np.asarray(X, dtype=float)
    if Xv.ndim == 1:
        Xv = Xv[:, None]
    n = yv.size
    if Xv.shape[0] != n:
        raise ValidationError(f"dimension mismatch: {n} observations vs {Xv.shape[0]} regressor rows")
    D = np.column_stack([np.ones(n), Xv])
    p = D.shape[1]
    if n <= p:
        raise ValidationError(f"need more than {p} observations, got {n}")
    q, r = np.linalg.qr(D)
    rd = np.abs(np.diag(r))
    if rd.min() <= 1e-10 * max(rd.max(), 1.0):
        raise NumericalError("design matrix is rank deficient")
    beta = np.linalg.solve(r, q.T @ yv)
    resid = yv - D @ beta
    rss = float(resid @ resid)
    dev = yv - yv.mean()
    tss = float(dev @ dev)
    s2 = rss / (n - p)
    rinv = np.linalg.solve(r, np.eye(p))
    se = np.sqrt(s2 * np.sum(rinv**2, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        tv = np.where(se > 0, beta / np.where(se > 0, se, 1.0), np.where(beta == 0, 0.0, np.copysign(np.inf, beta)))
    if tss > 0:
        r2 = min(max(1.0 - rss / tss, 0.0), 1.0)
    else:
        r2 = 0.0
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - p)
    return OlsFit(coefficients=beta, t_values=tv, r_squared=r2, adj_r_squared=adj, residuals=resid, std_errors=se)


def stars(t_value: float) -> str:
    a = abs(t_value)
    for threshold, mark in STAR_THRESHOLDS:
        if a > threshold:
            return mark
    return ""


def mediation_two_step(
    resilience: Mapping[str, Sequence[float]],
    cpu: Sequence[float],
    mediators: Mapping[str, Sequence[float]] | None = None,
) -> MediationReport:
    """Regress each outcome and each mediator on an intercept plus ``cpu``."""
    x = np.asarray(cpu, dtype=float)
    mediators = mediators or {}
    if x.ndim != 1:
        raise ValidationError("cpu must be a 1-D sequence")
    if x.size > 1 and np.ptp(x) == 0:
        raise ValidationError("constant regressor: cpu has no variation")
    for name, seq in [*resilience.items(), *mediators.items()]:
        if len(seq) != x.size:
            raise ValidationError(f"length mismatch: {name!r} has {len(seq)} observations, cpu has {x.size}")
    outcome = {name: ols(seq, x) for name, seq in resilience.items()}
    mediator = {name: ols(seq, x) for name, seq in mediators.items()}
    marks = {
        name: {"CPU": stars(fit.t_values[1]), "Cons": stars(fit.t_values[0])}
        for name, fit in [*outcome.items(), *mediator.items()]
    }
    return MediationReport(outcome_fits=outcome, mediator_fits=mediator, significance_stars=marks)


def write_mediation_csv(report: MediationReport, dest: TextIO, comment: str | None = None) -> None:
    """Rows CPU, CPU_t, Cons, Cons_t, R2, R2_adj; one column per equation."""
    fits = {**report.outcome_fits, **report.mediator_fits}
    names = list(fits)
    if comment:
        dest.write(f"# {comment}\n")
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(["row", *names])

    def fmt(v: float) -> str:
        return f"{v:.6g}" if math.isfinite(v) else ("inf" if v > 0 else "-inf")

    w.writerow(["CPU", *(fmt(fits[n].coefficients[1]) + report.significance_stars[n]["CPU"] for n in names)])
    w.writerow(["CPU_t", *(fmt(fits[n].t_values[1]) for n in names)])
    w.writerow(["Cons", *(fmt(fits[n].coefficients[0]) + report.significance_stars[n]["Cons"] for n in names)])
    w.writerow(["Cons_t", *(fmt(fits[n].t_values[0]) for n in names)])
    w.writerow(["R2", *(fmt(fits[n].r_squared) for n in names)])
    w.writerow(["R2_adj", *(fmt(fits[n].adj_r_squared) for n in names)])
