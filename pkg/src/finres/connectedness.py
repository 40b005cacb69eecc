"""Generalized FEVD connectedness: pairwise shares, TCI, FROM, TO, NET, NPDC.

Shares are stored as fractions (rows sum to one); every aggregate is on the
percent scale.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from .dataio import TimeSeriesPanel
from .errors import ValidationError
from .tvpvar.model import TvpVarPosterior, TvpVarSpec, estimate_mcmc, var_ols

DEFAULT_HORIZON = 12
AGGREGATIONS = ("plain", "ratio")


@dataclass(frozen=True)
class ConnectednessTable:
    shares: np.ndarray
    tci: float
    from_idx: np.ndarray
    to_idx: np.ndarray
    net_idx: np.ndarray
    npdc: np.ndarray
    horizon_H: int
    columns: tuple[str, ...] = ()
    date: str | None = None


def vma_coefficients(B: np.ndarray, H: int) -> np.ndarray:
    """Moving-average matrices Lambda_0..Lambda_{H-1} of a VAR with lag matrices B.

    Lambda_0 = I and Lambda_h = sum_{i=1}^{min(h, s)} B_i Lambda_{h-i}.
    """
    B = np.asarray(B, float)
    if B.ndim == 2:
        B = B[None]
    if B.ndim != 3 or B.shape[1] != B.shape[2]:
        raise ValidationError(f"lag matrices must be square, got shape {B.shape}")
    if H < 1:
        raise ValidationError("H must be at least 1")
    s, k, _ = B.shape
    lam = np.zeros((H, k, k))
    lam[0] = np.eye(k)
    for h in range(1, H):
        for i in range(1, min(h, s) + 1):
            lam[h] += B[i - 1] @ lam[h - i]
    return lam


def gfevd(vma: np.ndarray, omega: np.ndarray, H: int | None = None) -> np.ndarray:
    """Un-normalized generalized FEVD matrix at horizon H.

    Entry (j, k) is sigma_kk^{-1} sum_h (e_j' L_h Omega e_k)^2 divided by
    sum_h e_j' L_h Omega L_h' e_j.
    """
    lam = np.asarray(vma, float)
    om = np.asarray(omega, float)
    H = lam.shape[0] if H is None else H
    if H < 1 or H > lam.shape[0]:
        raise ValidationError(f"H={H} outside 1..{lam.shape[0]}")
    k = om.shape[0]
    if om.shape != (k, k) or lam.shape[1:] != (k, k):
        raise ValidationError("omega and VMA matrices disagree in dimension")
    if not np.allclose(om, om.T, rtol=1e-10, atol=1e-14):
        raise ValidationError("omega is not symmetric")
    diag = np.diag(om)
    if np.any(diag <= 0):
        raise ValidationError("omega has a nonpositive diagonal element")
    if np.linalg.eigvalsh((om + om.T) / 2).min() < -1e-10 * diag.max():
        raise ValidationError("omega is not positive semidefinite")
    L = lam[:H]
    LO = L @ om
    num = np.sum(LO**2, axis=0) / diag[None, :]
    den = np.einsum("hjk,hjk->j", LO, L)
    return num / den[:, None]


def normalize_gfevd(phi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi, float)
    if phi.ndim != 2:
        raise ValidationError("GFEVD matrix must be 2-D")
    if np.any(phi < 0):
        raise ValidationError("GFEVD matrix has negative entries")
    rows = phi.sum(axis=1)
    if np.any(rows <= 0):
        raise ValidationError(f"GFEVD row {int(np.flatnonzero(rows <= 0)[0])} sums to zero")
    return phi / rows[:, None]


def connectedness_table(
    shares: np.ndarray,
    H: int = DEFAULT_HORIZON,
    aggregation: str = "plain",
    columns: Sequence[str] = (),
    date: str | None = None,
) -> ConnectednessTable:
    """Aggregate indices from a row-stochastic share matrix.

    ``aggregation="plain"`` (default) takes FROM_j and TO_j as off-diagonal row
    and column sums, so NET sums to zero and TCI = mean(FROM) = mean(TO).
    ``"ratio"`` divides each by the corresponding full row/column sum.
    """
    S = np.asarray(shares, float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValidationError(f"shares must be square, got shape {S.shape}")
    if aggregation not in AGGREGATIONS:
        raise ValidationError(f"aggregation must be one of {AGGREGATIONS}")
    off = S - np.diag(np.diag(S))
    tci = 100.0 * off.sum() / S.sum()
    from_ = 100.0 * off.sum(axis=1)
    to = 100.0 * off.sum(axis=0)
    if aggregation == "ratio":
        from_ = from_ / S.sum(axis=1)
        to = to / S.sum(axis=0)
    net = to - from_
    upper = 100.0 * (S.T - S)
    iu = np.triu_indices(S.shape[0], 1)
    npdc = np.zeros_like(S)
    npdc[iu] = upper[iu]
    npdc[(iu[1], iu[0])] = -upper[iu]
    return ConnectednessTable(S, float(tci), from_, to, net, npdc, H, tuple(columns), date)


def table_from_var(B: np.ndarray, omega: np.ndarray, H: int = DEFAULT_HORIZON, **kw) -> ConnectednessTable:
    return connectedness_table(normalize_gfevd(gfevd(vma_coefficients(B, H), omega, H)), H, **kw)


def dynamic_connectedness(
    panel: TimeSeriesPanel,
    spec: TvpVarSpec | None = None,
    H: int = DEFAULT_HORIZON,
    posterior: TvpVarPosterior | None = None,
    aggregation: str = "plain",
) -> list[ConnectednessTable]:
    """One table per estimation date from a single TVP-VAR fit.

    Coefficients and Omega_t come from posterior means at each date. Pass a
    ready ``posterior`` to skip estimation.
    """
    if posterior is None:
        if spec is None:
            spec = TvpVarSpec(k=panel.k)
        posterior = estimate_mcmc(panel, spec)
    _, B = posterior.coefficients()
    omega = posterior.covariance()
    cols = tuple(posterior.columns)
    return [table_from_var(B[t], omega[t], H, aggregation=aggregation, columns=cols, date=d)
            for t, d in enumerate(posterior.dates)]


def static_connectedness(dynamic: Sequence[ConnectednessTable], aggregation: str = "plain") -> ConnectednessTable:
    """Full-sample table: time-averaged shares, rows re-normalized, aggregates recomputed."""
    if not dynamic:
        raise ValidationError("static_connectedness needs at least one table")
    avg = np.mean([t.shares for t in dynamic], axis=0)
    first = dynamic[0]
    return connectedness_table(normalize_gfevd(avg), first.horizon_H, aggregation, first.columns)


def static_connectedness_ols(panel: TimeSeriesPanel, lags: int = 1, H: int = DEFAULT_HORIZON,
                             aggregation: str = "plain") -> ConnectednessTable:
    """Alternative static table from one constant-coefficient VAR over the full sample."""
    _, B, cov = var_ols(panel, lags)
    return table_from_var(B, cov, H, aggregation=aggregation, columns=panel.columns)


def write_static_csv(table: ConnectednessTable, dest: TextIO, comment: str | None = None) -> None:
    """Square percent table with a ``From`` column and a ``To`` row; TCI in the corner."""
    cols = list(table.columns) or [f"v{i + 1}" for i in range(table.shares.shape[0])]
    if comment:
        dest.write(f"# {comment}\n")
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(["", *cols, "From"])
    for i, name in enumerate(cols):
        w.writerow([name, *(f"{100 * v:.4f}" for v in table.shares[i]), f"{table.from_idx[i]:.4f}"])
    w.writerow(["To", *(f"{v:.4f}" for v in table.to_idx), f"{table.tci:.4f}"])
    w.writerow(["Net", *(f"{v:.4f}" for v in table.net_idx), ""])


def write_dynamic_csv(tables: Sequence[ConnectednessTable], dest: TextIO, comment: str | None = None) -> None:
    """Long format ``date,index_type,market,value`` for TCI, FROM, TO, NET."""
    if comment:
        dest.write(f"# {comment}\n")
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(["date", "index_type", "market", "value"])
    for t in tables:
        cols = t.columns or tuple(f"v{i + 1}" for i in range(t.shares.shape[0]))
        w.writerow([t.date, "TCI", "", repr(t.tci)])
        for kind, vals in (("FROM", t.from_idx), ("TO", t.to_idx), ("NET", t.net_idx)):
            for name, v in zip(cols, vals):
                w.writerow([t.date, kind, name, repr(float(v))])


def write_npdc_csv(tables: Sequence[ConnectednessTable], dest: TextIO, comment: str | None = None) -> None:
    """``date,from,to,npdc`` with one row per unordered pair (from precedes to).

    npdc > 0 means ``from`` transmits more to ``to`` than it receives.
    """
    if comment:
        dest.write(f"# {comment}\n")
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(["date", "from", "to", "npdc"])
    for t in tables:
        cols = t.columns or tuple(f"v{i + 1}" for i in range(t.shares.shape[0]))
        k = len(cols)
        for a in range(k):
            for b in range(a + 1, k):
                w.writerow([t.date, cols[a], cols[b], repr(float(t.npdc[a, b]))])
