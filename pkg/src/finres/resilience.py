"""Intensity and duration resilience indices computed from impulse-response paths.

For a path Phi^1..Phi^N the gap to peak magnitude is
``D^n = max_m |Phi^m| - |Phi^n|``. Intensity is ``sum D / (N max|Phi|)``,
duration is the gap-weighted mean horizon ``sum n D / sum D``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from .errors import ValidationError
from .irf import IrfSurface


@dataclass(frozen=True)
class ResilienceSeries:
    dates: tuple[str, ...]
    intensity: np.ndarray
    duration: np.ndarray
    degenerate: np.ndarray
    horizon_N: int
    market: str = ""
    shock: str = ""


def _as_path(path: Sequence[float], N: int | None) -> np.ndarray:
    p = np.asarray(path, float)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError("path must be a non-empty 1-D sequence")
    if N is not None and N != p.size:
        raise ValidationError(f"path has {p.size} values but N={N}")
    if not np.all(np.isfinite(p)):
        raise ValidationError("path contains non-finite values")
    return p


def shock_gap(path: Sequence[float]) -> np.ndarray:
    a = np.abs(_as_path(path, None))
    return a.max() - a


def _peak(p: np.ndarray) -> float:
    peak = float(np.abs(p).max())
    if peak == 0:
        raise ValidationError("all-zero response path: resilience indices are undefined")
    return peak


def intensity(path: Sequence[float], N: int | None = None) -> float:
    p = _as_path(path, N)
    peak = _peak(p)
    return float(shock_gap(p).sum() / (p.size * peak))


def duration(path: Sequence[float], N: int | None = None) -> tuple[float, bool]:
    """Gap-weighted mean horizon; returns (value, degenerate).

    A path that sits at its peak magnitude throughout has no gap mass; it gets
    the sentinel 0 with ``degenerate=True``.
    """
    p = _as_path(path, N)
    _peak(p)
    gap = shock_gap(p)
    total = gap.sum()
    if total == 0:
        return 0.0, True
    return float(np.arange(1, p.size + 1) @ gap / total), False


def resilience_series(surface: IrfSurface, response: str | int, shock: str | int) -> ResilienceSeries:
    """Both indices at every date for the response of ``response`` to ``shock``."""
    paths = surface.path(response, shock)
    n_dates, N = paths.shape
    mags = np.abs(paths)
    peak = mags.max(axis=1)
    if np.any(peak == 0):
        bad = int(np.flatnonzero(peak == 0)[0])
        raise ValidationError(f"all-zero response path at {surface.dates[bad]}")
    gap = peak[:, None] - mags
    total = gap.sum(axis=1)
    inten = total / (N * peak)
    degenerate = total == 0
    weighted = gap @ np.arange(1, N + 1)
    dur = np.where(degenerate, 0.0, weighted / np.where(degenerate, 1.0, total))
    name = lambda v: surface.columns[v] if isinstance(v, (int, np.integer)) else str(v)
    return ResilienceSeries(tuple(surface.dates), inten, dur, degenerate, N, name(response), name(shock))


def write_resilience_csv(series: Sequence[ResilienceSeries], dest: TextIO, comment: str | None = None) -> None:
    """``date,market,shock,intensity,duration,degenerate`` rows for each series."""
    if comment:
        dest.write(f"# {comment}\n")
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(["date", "market", "shock", "intensity", "duration", "degenerate"])
    for s in series:
        for d, a, b, g in zip(s.dates, s.intensity, s.duration, s.degenerate):
            w.writerow([d, s.market, s.shock, repr(float(a)), repr(float(b)), int(bool(g))])


def read_resilience_csv(source) -> list[ResilienceSeries]:
    from pathlib import Path

    text = Path(source).read_text(encoding="utf-8") if isinstance(source, (str, Path)) else source.read()
    rows = list(csv.reader(ln for ln in text.splitlines() if not ln.startswith("#")))
    if not rows or rows[0] != ["date", "market", "shock", "intensity", "duration", "degenerate"]:
        raise ValidationError("not a resilience file")
    groups: dict[tuple[str, str], list[list[str]]] = {}
    for r in rows[1:]:
        groups.setdefault((r[1], r[2]), []).append(r)
    out = []
    for (market, shock), rs in groups.items():
        out.append(ResilienceSeries(
            tuple(r[0] for r in rs),
            np.array([float(r[3]) for r in rs]),
            np.array([float(r[4]) for r in rs]),
            np.array([r[5] == "1" for r in rs]),
            0, market, shock,
        ))
    return out
