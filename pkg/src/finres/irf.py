"""Time-varying impulse responses from a TVP-VAR posterior."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .errors import ValidationError
from .tvpvar.model import TvpVarPosterior, alpha_to_matrix, beta_to_matrices

DEFAULT_HORIZON = 12


@dataclass(frozen=True)
class IrfSurface:
    """Responses ``values[t, n-1, i, j]`` of variable i to a shock in j.

    ``shock_scale`` holds the impact standard deviations used for each shock,
    shape (k,) in time-averaged mode or (n_dates, k) in time-t mode.
    """

    values: np.ndarray
    dates: tuple[str, ...]
    columns: tuple[str, ...]
    horizon_N: int
    shock_scale: np.ndarray

    def path(self, response: str | int, shock: str | int) -> np.ndarray:
        i = self._index(response)
        j = self._index(shock)
        return self.values[:, :, i, j]

    def _index(self, var: str | int) -> int:
        if isinstance(var, (int, np.integer)):
            if not 0 <= var < len(self.columns):
                raise ValidationError(f"variable index {var} out of range")
            return int(var)
        try:
            return self.columns.index(var)
        except ValueError:
            raise ValidationError(f"unknown variable {var!r}; have {list(self.columns)}") from None


def companion_matrix(B: np.ndarray) -> np.ndarray:
    """Companion matrix of lag matrices B (s, k, k)."""
    B = np.asarray(B, float)
    if B.ndim == 2:
        B = B[None]
    s, k, _ = B.shape
    F = np.zeros((k * s, k * s))
    F[:k, :] = np.concatenate(list(B), axis=1)
    if s > 1:
        F[k:, :-k] = np.eye(k * (s - 1))
    return F


def impulse_responses(B: np.ndarray, impact: np.ndarray, horizon: int) -> np.ndarray:
    """Responses at n = 1..horizon to the shocks whose impact columns are given.

    Iterates the companion form: Phi^n = J F^{n-1} J' impact.
    """
    if horizon < 1:
        raise ValidationError("horizon must be at least 1")
    B = np.asarray(B, float)
    if B.ndim == 2:
        B = B[None]
    k = B.shape[1]
    impact = np.asarray(impact, float)
    F = companion_matrix(B)
    state = np.zeros((F.shape[0], impact.shape[1]))
    state[:k] = impact
    out = np.empty((horizon, k, impact.shape[1]))
    for n in range(horizon):
        out[n] = state[:k]
        state = F @ state
    return out


def _impacts(A: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """A_t^{-1} diag(sigma) for stacked A (n, k, k) and sigma (k,) or (n, k)."""
    Ainv = np.linalg.inv(A)
    return Ainv * np.asarray(sigma)[..., None, :]


def tv_irf(
    posterior: TvpVarPosterior,
    horizon_N: int = DEFAULT_HORIZON,
    shock_scale: float = 1.0,
    volatility: str = "average",
    per_draw: bool = False,
) -> IrfSurface:
    """Impulse responses at every estimation date.

    A structural shock of ``shock_scale`` units in variable j enters through
    the impact matrix A_t^{-1} diag(sigma). With ``volatility="average"``
    sigma_j is the time average of exp(h_{j,t}/2) so shock sizes are comparable
    across dates; ``"time"`` uses the date-t value. Coefficients are frozen at
    their date-t values over the horizon. By default everything is evaluated at
    posterior means; ``per_draw`` averages responses over stored path draws.
    """
    if horizon_N < 1:
        raise ValidationError("horizon_N must be at least 1")
    if volatility not in ("average", "time"):
        raise ValidationError(f"volatility must be 'average' or 'time', got {volatility!r}")
    spec = posterior.spec
    k, s = spec.k, spec.lags

    def surface(beta, alpha, h):
        _, B = beta_to_matrices(beta, k, s)
        A = alpha_to_matrix(alpha, k)
        sig = np.exp(h / 2)
        scale = (sig.mean(axis=0) if volatility == "average" else sig) * shock_scale
        imp = _impacts(A, scale)
        vals = np.empty((beta.shape[0], horizon_N, k, k))
        for t in range(beta.shape[0]):
            vals[t] = impulse_responses(B[t], imp[t], horizon_N)
        return vals, scale

    if per_draw:
        if posterior.beta_draws is None or posterior.alpha_draws is None or posterior.h_draws is None:
            raise ValidationError("per-draw responses need a posterior estimated with store_paths=True")
        acc = None
        for d in range(posterior.beta_draws.shape[0]):
            vals, _ = surface(posterior.beta_draws[d], posterior.alpha_draws[d], posterior.h_draws[d])
            acc = vals if acc is None else acc + vals
        values = acc / posterior.beta_draws.shape[0]
        sig = np.exp(posterior.h_mean / 2)
        scale = (sig.mean(axis=0) if volatility == "average" else sig) * shock_scale
    else:
        if posterior.beta_mean is None:
            raise ValidationError("posterior lacks coefficient paths")
        values, scale = surface(posterior.beta_mean, posterior.alpha_mean, posterior.h_mean)
    if not np.all(np.isfinite(values)):
        raise ValidationError("non-finite impulse responses; coefficients may be explosive")
    return IrfSurface(values, tuple(posterior.dates), tuple(posterior.columns), horizon_N, np.asarray(scale))


def write_irf_csv(surface: IrfSurface, dest: TextIO, comment: str | None = None) -> int:
    """Long format ``date,horizon,response_var,shock_var,value``; returns the row count."""
    if comment:
        dest.write(f"# {comment}\n")
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(["date", "horizon", "response_var", "shock_var", "value"])
    count = 0
    k = len(surface.columns)
    for t, date in enumerate(surface.dates):
        for n in range(surface.horizon_N):
            for i in range(k):
                for j in range(k):
                    w.writerow([date, n + 1, surface.columns[i], surface.columns[j], repr(float(surface.values[t, n, i, j]))])
                    count += 1
    return count


def read_irf_csv(source) -> IrfSurface:
    """Inverse of :func:`write_irf_csv` (shock scale is not stored and comes back as NaN)."""
    from pathlib import Path

    text = Path(source).read_text(encoding="utf-8") if isinstance(source, (str, Path)) else source.read()
    rows = list(csv.reader(ln for ln in text.splitlines() if not ln.startswith("#")))
    if not rows or rows[0] != ["date", "horizon", "response_var", "shock_var", "value"]:
        raise ValidationError("not an IRF surface file")
    dates: list[str] = []
    cols: list[str] = []
    N = 0
    for r in rows[1:]:
        if not dates or dates[-1] != r[0]:
            dates.append(r[0])
        if r[2] not in cols:
            cols.append(r[2])
        N = max(N, int(r[1]))
    k = len(cols)
    if len(rows) - 1 != len(dates) * N * k * k:
        raise ValidationError("IRF file row count does not match its dimensions")
    vals = np.array([float(r[4]) for r in rows[1:]]).reshape(len(dates), N, k, k)
    return IrfSurface(vals, tuple(dates), tuple(cols), N, np.full(k, np.nan))
