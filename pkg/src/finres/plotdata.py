"""Tidy long-format CSVs for external plotting.

Kinds and their columns:

``resilience``  date,market,shock,intensity,duration,degenerate
``irf``         date,horizon,response_var,shock_var,value (one row per t, n, i, j)
``npdc``        date,from,to,npdc (one row per unordered pair, from before to)
``dynamic``     date,index_type,market,value
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import TextIO

from .errors import DataIOError, ValidationError
from .irf import read_irf_csv, tv_irf, write_irf_csv
from .resilience import read_resilience_csv, write_resilience_csv
from .tvpvar.archive import MAGIC, load_posterior

KINDS = ("resilience", "irf", "npdc", "dynamic")
_HEADERS = {
    "npdc": ["date", "from", "to", "npdc"],
    "dynamic": ["date", "index_type", "market", "value"],
}


def _rows(path: Path) -> list[list[str]]:
    text = path.read_text(encoding="utf-8")
    return list(csv.reader(ln for ln in text.splitlines() if ln and not ln.startswith("#")))


def _npdc(path: Path, w) -> int:
    """Canonicalize pair rows: keep one row per pair oriented by first-seen column order."""
    rows = _rows(path)
    if not rows or rows[0] != _HEADERS["npdc"]:
        raise ValidationError(f"{path} is not an NPDC pair file")
    order: dict[str, int] = {}
    for r in rows[1:]:
        for name in (r[1], r[2]):
            order.setdefault(name, len(order))
    seen = set()
    count = 0
    w.writerow(_HEADERS["npdc"])
    for date, a, b, v in rows[1:]:
        if a == b:
            continue
        if order[a] > order[b]:
            a, b, v = b, a, repr(-float(v))
        if (date, a, b) in seen:
            continue
        seen.add((date, a, b))
        w.writerow([date, a, b, v])
        count += 1
    return count


def _dynamic(path: Path, w) -> int:
    rows = _rows(path)
    if not rows or rows[0] != _HEADERS["dynamic"]:
        raise ValidationError(f"{path} is not a dynamic connectedness file")
    bad = [r for r in rows[1:] if len(r) != 4 or r[1] not in ("TCI", "FROM", "TO", "NET")]
    if bad:
        raise ValidationError(f"{path}: malformed row {bad[0]}")
    w.writerows(rows)
    return len(rows) - 1


def plot_data(artifact, kind: str, dest: TextIO, comment: str | None = None, horizon_N: int = 12) -> int:
    """Write plot-ready rows for ``artifact`` to ``dest``; returns the data-row count.

    ``irf`` accepts either an IRF surface CSV or a posterior archive, from which
    the surface is computed at ``horizon_N``.
    """
    if kind not in KINDS:
        raise ValidationError(f"unknown plot kind {kind!r}; choose from {', '.join(KINDS)}")
    path = Path(artifact)
    if not path.is_file():
        raise DataIOError(f"artifact {path} does not exist")
    if comment:
        dest.write(f"# {comment}\n")
    if kind == "resilience":
        series = read_resilience_csv(path)
        write_resilience_csv(series, dest)
        return sum(len(s.dates) for s in series)
    if kind == "irf":
        with open(path, "rb") as fh:
            is_archive = fh.read(len(MAGIC)) == MAGIC
        surface = tv_irf(load_posterior(path), horizon_N) if is_archive else read_irf_csv(path)
        return write_irf_csv(surface, dest)
    w = csv.writer(dest, lineterminator="\n")
    return _npdc(path, w) if kind == "npdc" else _dynamic(path, w)
