"""Stage orchestration: preprocess, estimate, irf, resilience, connect, mediate.

Every artifact lands under the output directory with a provenance comment
line, and is recorded in ``manifest.tsv`` together with the stage that made it
and its SHA-256. Stages can also run one at a time, in which case they pick
up the artifacts of earlier stages from disk.
"""

from __future__ import annotations

import hashlib
import io
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .config import TOTAL_NAME, RunConfig, validate_roles, validate_settings
from .connectedness import (
    dynamic_connectedness,
    static_connectedness,
    static_connectedness_ols,
    write_dynamic_csv,
    write_npdc_csv,
    write_static_csv,
)
from .dataio import TimeSeriesPanel, load_panel, log_diff, save_panel, standardize, write_describe_csv
from .errors import DataIOError, FinresError, ValidationError
from .irf import IrfSurface, read_irf_csv, tv_irf, write_irf_csv
from .resilience import ResilienceSeries, read_resilience_csv, resilience_series, write_resilience_csv
from .stats import mediation_two_step, pca_composite, write_mediation_csv
from .tvpvar import (
    McmcConfig,
    TvpVarPosterior,
    TvpVarSpec,
    estimate_mcmc,
    load_posterior,
    model_seed,
    save_posterior,
    write_summary_csv,
)

log = logging.getLogger("finres")

STAGES = ("preprocess", "estimate", "irf", "resilience", "connect", "mediate")
MEASURES = ("intensity", "duration")
MANIFEST = "manifest.tsv"
LOCK = ".finres.lock"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


class OutputLock:
    """Exclusive ownership of an output directory via an O_EXCL lock file."""

    def __init__(self, out_dir: Path):
        self.path = Path(out_dir) / LOCK

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise DataIOError(f"output directory {self.path.parent} is locked by another run "
                              f"(remove {self.path} if that run is dead)") from None
        with os.fdopen(fd, "w") as fh:
            fh.write(f"{os.getpid()}\n")
        return self

    def __exit__(self, *exc):
        try:
            self.path.unlink()
        except FileNotFoundError:
            pass
        return False


@dataclass
class Manifest:
    config_hash: str
    entries: list[tuple[str, str, str]] = field(default_factory=list)
    inputs: list[tuple[str, str]] = field(default_factory=list)
    failed: tuple[str, str] | None = None

    def render(self) -> str:
        lines = [f"# config_hash={self.config_hash} finres {__version__}",
                 f"config_hash\t{self.config_hash}"]
        lines += [f"input\t{name}\t{digest}" for name, digest in self.inputs]
        lines.append("artifact\tstage\tsha256")
        lines += ["\t".join(e) for e in self.entries]
        if self.failed:
            stage, cause = self.failed
            lines.append(f"FAILED\t{stage}\t{' '.join(cause.split())}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def parse(text: str) -> "Manifest":
        m = Manifest("")
        body = False
        for line in text.splitlines():
            if line.startswith("#") or not line:
                continue
            parts = line.split("\t")
            if parts[0] == "config_hash":
                m.config_hash = parts[1]
            elif parts[0] == "input":
                m.inputs.append((parts[1], parts[2]))
            elif parts[0] == "artifact":
                body = True
            elif parts[0] == "FAILED":
                m.failed = (parts[1], parts[2] if len(parts) > 2 else "")
            elif body:
                m.entries.append((parts[0], parts[1], parts[2]))
        return m


class Pipeline:
    def __init__(self, cfg: RunConfig, out_dir=None, progress: Callable[[str], None] | None = None):
        validate_settings(cfg)
        self.cfg = cfg
        self.out = Path(out_dir if out_dir is not None else cfg.out)
        self.hash = cfg.config_hash()
        self.provenance = f"config_hash={self.hash} finres {__version__}"
        self.manifest = Manifest(self.hash)
        self.progress = progress or (lambda msg: log.info(msg))
        self.raw: TimeSeriesPanel | None = None
        self.panel: TimeSeriesPanel | None = None
        self.posteriors: dict[str, TvpVarPosterior] = {}
        self.surfaces: dict[str, IrfSurface] = {}
        self.resilience: dict[str, ResilienceSeries] = {}

    # ---- plumbing -------------------------------------------------------

    @property
    def models(self) -> list[str]:
        return [*self.cfg.markets, *([TOTAL_NAME] if self.cfg.total else [])]

    @property
    def cpu_targets(self) -> list[str]:
        return [TOTAL_NAME] if self.cfg.total else list(self.cfg.markets)

    def _record(self, rel: str, stage: str) -> None:
        self.manifest.entries.append((rel, stage, sha256_file(self.out / rel)))

    def _write_text(self, rel: str, stage: str, writer: Callable[[io.StringIO], object]):
        buf = io.StringIO()
        result = writer(buf)
        path = self.out / rel
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(buf.getvalue())
        except OSError as exc:
            raise DataIOError(f"cannot write {path}: {exc}") from exc
        self._record(rel, stage)
        return result

    def _mcmc(self, label: str) -> McmcConfig:
        c = self.cfg
        return McmcConfig(draws=c.draws, burn_in=c.burn_in, thin=c.thin, seed=model_seed(c.seed, label))

    def _map(self, fn, items):
        items = list(items)
        if self.cfg.threads > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.threads) as pool:
                return list(pool.map(fn, items))
        return [fn(x) for x in items]

    # ---- pre-flight -----------------------------------------------------

    def load_input(self) -> TimeSeriesPanel:
        if self.raw is None:
            if not self.cfg.input:
                raise ValidationError("config does not name an input file")
            path = self.cfg.input_path
            if not path.is_file():
                raise DataIOError(f"input file {path} does not exist")
            self.raw = load_panel(path)
            self.manifest.inputs = [(path.name, sha256_file(path))]
        return self.raw

    def preflight(self, need_models: bool = True) -> None:
        validate_roles(self.cfg, self.load_input(), need_models=need_models)

    # ---- stages ---------------------------------------------------------

    def transformed(self) -> TimeSeriesPanel:
        """Input after log-differencing; untouched columns lose their first row to stay aligned."""
        raw = self.load_input()
        cols = set(self.cfg.log_diff_columns(raw.columns))
        if not cols:
            return raw
        data = {c: (log_diff(raw.column(c)) if c in cols else raw.column(c)[1:]) for c in raw.columns}
        return TimeSeriesPanel.from_columns(raw.dates[1:], data)

    def stage_preprocess(self) -> None:
        panel = self.transformed()
        self._write_text("tables/describe.csv", "preprocess",
                         lambda f: write_describe_csv(panel, f, self.cfg.adf_max_lag, self.cfg.adf_trend,
                                                      comment=self.provenance))
        if self.cfg.total and self.cfg.markets:
            comp = pca_composite(panel.select(self.cfg.markets))
            data = {c: panel.column(c) for c in panel.columns}
            data[TOTAL_NAME] = comp.scores
            panel = TimeSeriesPanel.from_columns(panel.dates, data)
            self._write_text("tables/pca_loadings.csv", "preprocess", lambda f: _write_loadings(comp, f, self.provenance))
        self.panel = panel
        self._write_text("data/processed.csv", "preprocess", lambda f: save_panel(panel, f, comment=self.provenance))

    def _processed(self) -> TimeSeriesPanel:
        if self.panel is None:
            path = self.out / "data/processed.csv"
            if not path.is_file():
                raise DataIOError(f"{path} missing; run the describe/estimate stage first")
            self.panel = load_panel(path)
        return self.panel

    def stage_estimate(self) -> None:
        panel = self._processed()
        c = self.cfg

        def fit(name):
            self.progress(f"estimate: {c.shock} -> {name}")
            spec = TvpVarSpec(k=2, lags=c.lags, mcmc=self._mcmc(f"market:{name}"))
            return estimate_mcmc(panel.select([c.shock, name]), spec)

        for name, post in zip(self.models, self._map(fit, self.models)):
            self.posteriors[name] = post
            rel = f"posterior/{slug(name)}.fpost"
            path = self.out / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            save_posterior(post, path, comment=self.provenance)
            self._record(rel, "estimate")
            self._write_text(f"posterior/{slug(name)}_summary.csv", "estimate",
                             lambda f: write_summary_csv(post.summary, f, comment=self.provenance))

    def _posterior(self, name: str) -> TvpVarPosterior:
        if name not in self.posteriors:
            path = self.out / f"posterior/{slug(name)}.fpost"
            if not path.is_file():
                raise DataIOError(f"{path} missing; run the estimate stage first")
            self.posteriors[name] = load_posterior(path)
        return self.posteriors[name]

    def stage_irf(self) -> None:
        for name in self.models:
            surf = tv_irf(self._posterior(name), self.cfg.irf_horizon, volatility=self.cfg.volatility)
            self.surfaces[name] = surf
            self._write_text(f"irf/{slug(name)}.csv", "irf", lambda f: write_irf_csv(surf, f, comment=self.provenance))

    def _surface(self, name: str) -> IrfSurface:
        if name not in self.surfaces:
            path = self.out / f"irf/{slug(name)}.csv"
            if not path.is_file():
                raise DataIOError(f"{path} missing; run the irf stage first")
            self.surfaces[name] = read_irf_csv(path)
        return self.surfaces[name]

    def stage_resilience(self) -> None:
        series = []
        for name in self.models:
            s = resilience_series(self._surface(name), name, self.cfg.shock)
            self.resilience[name] = s
            series.append(s)
        self._write_text("resilience/resilience.csv", "resilience",
                         lambda f: write_resilience_csv(series, f, comment=self.provenance))

    def _resilience(self) -> dict[str, ResilienceSeries]:
        if not self.resilience:
            path = self.out / "resilience/resilience.csv"
            if not path.is_file():
                raise DataIOError(f"{path} missing; run the resilience stage first")
            self.resilience = {s.market: s for s in read_resilience_csv(path)}
        missing = [m for m in self.models if m not in self.resilience]
        if missing:
            raise ValidationError(f"resilience file lacks series for {missing}")
        return self.resilience

    def _measure_panel(self, names, measure: str, extra: dict[str, np.ndarray] | None = None) -> TimeSeriesPanel:
        res = self._resilience()
        dates = res[names[0]].dates
        data = dict(extra or {})
        for n in names:
            data[n] = getattr(res[n], measure)
        # indices live on a tiny scale; standardizing leaves GFEVD shares unchanged
        return TimeSeriesPanel.from_columns(dates, {k: standardize(v) for k, v in data.items()})

    def _connect_one(self, label: str, panel: TimeSeriesPanel):
        spec = TvpVarSpec(k=panel.k, lags=self.cfg.lags, mcmc=self._mcmc(f"connect:{label}"))
        post = estimate_mcmc(panel, spec)
        dyn = dynamic_connectedness(panel, H=self.cfg.gfevd_horizon, posterior=post, aggregation=self.cfg.aggregation)
        return post, dyn

    def stage_connect(self) -> None:
        c = self.cfg
        jobs = []
        if len(c.markets) >= 2:
            jobs += [(m, f"markets_{m}", list(c.markets), None) for m in MEASURES]
        if c.cpu:
            processed = self._processed()
            res = self._resilience()
            for target in self.cpu_targets:
                idx = [processed.dates.index(d) for d in res[target].dates]
                cpu_vals = processed.column(c.cpu)[idx]
                jobs += [(m, f"cpu_{slug(target)}_{m}", [target], {c.cpu: cpu_vals}) for m in MEASURES]
        if not jobs:
            self.progress("connect: fewer than two markets and no cpu column; nothing to do")
            return
        panels = [self._measure_panel(names, m, extra) for m, _, names, extra in jobs]

        def run(i):
            self.progress(f"connect: {jobs[i][1]}")
            return self._connect_one(jobs[i][1], panels[i])

        for (measure, label, _, _), panel, (post, dyn) in zip(jobs, panels, self._map(run, range(len(jobs)))):
            if c.static_method == "ols":
                static = static_connectedness_ols(panel, c.lags, c.gfevd_horizon, c.aggregation)
            else:
                static = static_connectedness(dyn, c.aggregation)
            self._write_text(f"connect/{label}_static.csv", "connect",
                             lambda f: write_static_csv(static, f, comment=self.provenance))
            self._write_text(f"connect/{label}_dynamic.csv", "connect",
                             lambda f: write_dynamic_csv(dyn, f, comment=self.provenance))
            self._write_text(f"connect/{label}_npdc.csv", "connect",
                             lambda f: write_npdc_csv(dyn, f, comment=self.provenance))

    def stage_mediate(self) -> None:
        c = self.cfg
        if not c.cpu:
            self.progress("mediate: no cpu column configured; skipped")
            return
        processed = self._processed()
        res = self._resilience()
        dates = res[self.cpu_targets[0]].dates
        idx = [processed.dates.index(d) for d in dates]
        outcomes = {f"{t}_{m}": getattr(res[t], m) for t in self.cpu_targets for m in MEASURES}
        mediators = {name: processed.column(name)[idx] for name in c.mediators}
        report = mediation_two_step(outcomes, processed.column(c.cpu)[idx], mediators)
        self._write_text("tables/mediation.csv", "mediate",
                         lambda f: write_mediation_csv(report, f, comment=self.provenance))

    # ---- drivers --------------------------------------------------------

    def run_stages(self, stages, need_models: bool = True, manifest: bool = False) -> Manifest:
        """Run ``stages`` in order under the directory lock.

        A failing stage is recorded (and, with ``manifest``, written as a
        FAILED line) before the error propagates with ``stage`` attached.
        """
        self.preflight(need_models=need_models)
        with OutputLock(self.out):
            current = None
            try:
                for current in stages:
                    self.progress(f"stage {current}")
                    getattr(self, f"stage_{current}")()
            except FinresError as exc:
                exc.stage = current
                self.manifest.failed = (current, str(exc))
                raise
            except (OSError, MemoryError) as exc:
                self.manifest.failed = (current, str(exc))
                err = DataIOError(str(exc))
                err.stage = current
                raise err from exc
            finally:
                if manifest:
                    (self.out / MANIFEST).write_text(self.manifest.render(), encoding="utf-8")
        return self.manifest

    def run(self) -> Manifest:
        return self.run_stages(STAGES, manifest=True)


def _write_loadings(comp, dest, comment: str) -> None:
    import csv

    dest.write(f"# {comment}\n")
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(["series", "loading"])
    for name, v in zip(comp.columns, comp.loadings):
        w.writerow([name, repr(float(v))])
    w.writerow(["explained_fraction", repr(float(comp.explained_fraction))])
