"""Run configuration: a flat ``key = value`` file plus command-line overrides.

Documented keys (all optional except ``input``, ``markets`` and ``shock``)::

    input          CSV panel (relative paths resolve against the config file)
    markets        comma-separated market columns
    shock          shock column; enters every market model first
    cpu            policy-uncertainty column (enables CPU connectedness and mediation)
    mediators      comma-separated mediator columns
    log_diff       comma-separated columns to log-difference, ``all`` or ``none``
    total          yes/no: add a PCA composite market named ``Total`` (default yes)
    lags           VAR lag order (1)
    draws          MCMC draws including burn-in (11000)
    burn_in        discarded draws (1000)
    thin           keep every n-th retained draw (1)
    seed           master seed (20240101)
    irf_horizon    response horizon N (12)
    gfevd_horizon  variance-decomposition horizon H (12)
    volatility     ``average`` or ``time`` shock sizing (average)
    aggregation    FROM/TO style, ``plain`` or ``ratio`` (plain)
    static_method  ``average`` of dynamic tables or single ``ols`` VAR (average)
    adf_max_lag    largest ADF lag searched (12)
    adf_trend      yes/no trend term in the ADF regression (no)
    out            output directory (finres-out)
    threads        worker threads for independent models (1)
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .dataio import TimeSeriesPanel
from .errors import DataIOError, ValidationError

DEFAULT_SEED = 20240101
TOTAL_NAME = "Total"

# keys that never change results and so stay out of the hash
_UNHASHED = {"input", "out", "threads"}
_LISTS = {"markets", "mediators", "log_diff"}
_BOOLS = {"total", "adf_trend"}
_INTS = {"lags", "draws", "burn_in", "thin", "seed", "irf_horizon", "gfevd_horizon", "adf_max_lag", "threads"}
_CHOICES = {"volatility": ("average", "time"), "aggregation": ("plain", "ratio"),
            "static_method": ("average", "ols")}


@dataclass(frozen=True)
class RunConfig:
    input: str = ""
    markets: tuple[str, ...] = ()
    shock: str = ""
    cpu: str = ""
    mediators: tuple[str, ...] = ()
    log_diff: tuple[str, ...] = ()
    total: bool = True
    lags: int = 1
    draws: int = 11000
    burn_in: int = 1000
    thin: int = 1
    seed: int = DEFAULT_SEED
    irf_horizon: int = 12
    gfevd_horizon: int = 12
    volatility: str = "average"
    aggregation: str = "plain"
    static_method: str = "average"
    adf_max_lag: int = 12
    adf_trend: bool = False
    out: str = "finres-out"
    threads: int = 1
    # populated by load_config; not a user key
    base_dir: str = field(default="", compare=False, repr=False)

    @property
    def input_path(self) -> Path:
        p = Path(self.input)
        return p if p.is_absolute() or not self.base_dir else Path(self.base_dir) / p

    def hashed_fields(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)
                if f.name not in _UNHASHED and f.name != "base_dir"}

    def config_hash(self) -> str:
        blob = json.dumps(self.hashed_fields(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def log_diff_columns(self, panel_columns) -> tuple[str, ...]:
        if self.log_diff == ("all",):
            return tuple(panel_columns)
        if self.log_diff == ("none",):
            return ()
        return self.log_diff


_FIELDS = {f.name for f in dataclasses.fields(RunConfig)} - {"base_dir"}


def _coerce(key: str, raw) -> object:
    if key not in _FIELDS:
        raise ValidationError(f"unknown config key {key!r}")
    if raw is None:
        return None
    if key in _LISTS:
        if isinstance(raw, (list, tuple)):
            return tuple(raw)
        return tuple(s.strip() for s in str(raw).split(",") if s.strip())
    if key in _BOOLS:
        if isinstance(raw, bool):
            return raw
        low = str(raw).strip().lower()
        if low in ("1", "yes", "true", "on"):
            return True
        if low in ("0", "no", "false", "off"):
            return False
        raise ValidationError(f"config key {key!r}: expected yes/no, got {raw!r}")
    if key in _INTS:
        try:
            return int(raw)
        except (TypeError, ValueError):
            raise ValidationError(f"config key {key!r}: expected an integer, got {raw!r}") from None
    return str(raw).strip()


def parse_config(text: str, base_dir: str = "") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ValidationError(f"malformed config: {exc}") from None
    values = {k: _coerce(k, v) for k, v in parser["run"].items()}
    return RunConfig(base_dir=base_dir, **values)


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot read config {p}: {exc}") from exc
    return parse_config(text, base_dir=str(p.parent))


def with_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """Apply non-None overrides (command-line flags win over file values)."""
    clean = {k: _coerce(k, v) for k, v in overrides.items() if v is not None}
    return dataclasses.replace(cfg, **clean)


def validate_settings(cfg: RunConfig) -> None:
    """Range checks that need no data."""
    problems = []
    for key in ("lags", "draws", "thin", "irf_horizon", "gfevd_horizon", "threads"):
        if getattr(cfg, key) < 1:
            problems.append(f"{key} must be >= 1")
    if cfg.burn_in < 0:
        problems.append("burn_in must be >= 0")
    if cfg.adf_max_lag < 0:
        problems.append("adf_max_lag must be >= 0")
    if cfg.draws <= cfg.burn_in:
        problems.append(f"draws ({cfg.draws}) must exceed burn_in ({cfg.burn_in})")
    if not 0 <= cfg.seed < 2**64:
        problems.append("seed must fit in 64 unsigned bits")
    for key, allowed in _CHOICES.items():
        if getattr(cfg, key) not in allowed:
            problems.append(f"{key} must be one of {allowed}")
    if problems:
        raise ValidationError("invalid config: " + "; ".join(problems))


def validate_roles(cfg: RunConfig, panel: TimeSeriesPanel, need_models: bool = True) -> None:
    """Every referenced column must exist; roles must be coherent."""
    have = set(panel.columns)
    problems = []
    if need_models:
        if not cfg.markets:
            problems.append("markets is empty")
        if not cfg.shock:
            problems.append("shock is not set")
    named = [*cfg.markets, *([cfg.shock] if cfg.shock else []), *([cfg.cpu] if cfg.cpu else []),
             *cfg.mediators, *cfg.log_diff_columns(panel.columns)]
    missing = sorted({c for c in named if c not in have})
    if missing:
        problems.append(f"columns not in {cfg.input or 'panel'}: {', '.join(missing)}")
    if cfg.shock and cfg.shock in cfg.markets:
        problems.append(f"shock column {cfg.shock!r} is also listed as a market")
    if cfg.total and TOTAL_NAME in have:
        problems.append(f"input already has a column named {TOTAL_NAME!r}; set total = no or rename it")
    if len(set(cfg.markets)) != len(cfg.markets):
        problems.append("markets lists a column twice")
    if cfg.mediators and not cfg.cpu:
        problems.append("mediators need a cpu column")
    usable = panel.T - (1 if cfg.log_diff_columns(panel.columns) else 0) - cfg.lags
    if need_models and usable <= 10:
        problems.append(f"only {usable} usable observations after differencing and lags")
    if problems:
        raise ValidationError("invalid config: " + "; ".join(problems))
