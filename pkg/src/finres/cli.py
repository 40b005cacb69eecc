"""``finres`` command-line entry point.

Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 I/O error
(1 for any other toolkit error).
"""

from __future__ import annotations

import argparse
import io
import logging
import sys
from pathlib import Path

from . import __version__
from .config import RunConfig, load_config, with_overrides
from .dataio import write_describe_csv
from .errors import DataIOError, FinresError, NumericalError, ValidationError
from .pipeline import Pipeline
from .plotdata import KINDS, plot_data

EXIT_OK, EXIT_OTHER, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3, 4

# flag -> config key
_OVERRIDES = {
    "seed": "seed", "out": "out", "threads": "threads", "input": "input",
    "draws": "draws", "burn_in": "burn_in", "lags": "lags",
    "irf_horizon": "irf_horizon", "gfevd_horizon": "gfevd_horizon",
}


def _common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    g = parser.add_argument_group("run options (override the config file)")
    g.add_argument("--config", default=d, help="flat key = value run config")
    g.add_argument("--seed", type=int, default=d)
    g.add_argument("--out", default=d, help="output directory")
    g.add_argument("--threads", type=int, default=d, help="worker threads for independent models")
    g.add_argument("--input", default=d, help="input panel CSV")
    g.add_argument("--draws", type=int, default=d)
    g.add_argument("--burn-in", dest="burn_in", type=int, default=d)
    g.add_argument("--lags", type=int, default=d)
    g.add_argument("--irf-horizon", dest="irf_horizon", type=int, default=d)
    g.add_argument("--gfevd-horizon", dest="gfevd_horizon", type=int, default=d)
    g.add_argument("-v", "--verbose", action="store_true", default=d)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="finres", description="Financial-market resilience and connectedness toolkit.")
    ap.add_argument("--version", action="version", version=f"finres {__version__}")
    _common(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "describe": "descriptive statistics and ADF tests of the (transformed) input",
        "estimate": "preprocess and fit one TVP-VAR per market",
        "irf": "time-varying impulse responses from fitted posteriors",
        "resilience": "intensity and duration indices from the IRF surfaces",
        "connect": "static/dynamic connectedness of the resilience indices",
        "mediate": "two-step mediation regressions on the policy-uncertainty column",
        "pipeline": "run every stage and write a manifest",
        "plotdata": "emit a tidy long-format CSV for plotting",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        _common(p, suppress=True)
        if name == "describe":
            p.add_argument("--output", help="write the table here ('-' for stdout) instead of OUT/tables")
        if name == "plotdata":
            p.add_argument("artifact", help="artifact file produced by an earlier stage")
            p.add_argument("--kind", required=True, choices=KINDS)
            p.add_argument("--output", help="destination CSV (default stdout)")
            p.add_argument("--horizon", type=int, default=12, help="IRF horizon when reading a posterior archive")
    return ap


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    flags = {key: getattr(args, flag, None) for flag, key in _OVERRIDES.items()}
    return with_overrides(cfg, **flags)


def _describe(cfg: RunConfig, output: str | None) -> None:
    pipe = Pipeline(cfg)
    pipe.preflight(need_models=False)
    if output is None:
        pipe.run_stages(["preprocess"], need_models=False)
        return
    panel = pipe.transformed()
    buf = io.StringIO()
    write_describe_csv(panel, buf, cfg.adf_max_lag, cfg.adf_trend, comment=pipe.provenance)
    if output == "-":
        sys.stdout.write(buf.getvalue())
    else:
        try:
            Path(output).write_text(buf.getvalue(), encoding="utf-8")
        except OSError as exc:
            raise DataIOError(f"cannot write {output}: {exc}") from exc


def _plotdata(cfg: RunConfig, args) -> None:
    buf = io.StringIO()
    comment = f"config_hash={cfg.config_hash()} finres {__version__}"
    plot_data(args.artifact, args.kind, buf, comment=comment, horizon_N=args.horizon)
    if args.output in (None, "-"):
        sys.stdout.write(buf.getvalue())
    else:
        try:
            Path(args.output).write_text(buf.getvalue(), encoding="utf-8")
        except OSError as exc:
            raise DataIOError(f"cannot write {args.output}: {exc}") from exc


def run(args: argparse.Namespace) -> None:
    cfg = resolve_config(args)
    cmd = args.command
    if cmd == "describe":
        _describe(cfg, args.output)
    elif cmd == "plotdata":
        _plotdata(cfg, args)
    elif cmd == "pipeline":
        manifest = Pipeline(cfg).run()
        print(f"wrote {len(manifest.entries)} artifacts to {cfg.out} (config_hash={manifest.config_hash})")
    else:
        stages = {"estimate": ["preprocess", "estimate"], "irf": ["irf"], "resilience": ["resilience"],
                  "connect": ["connect"], "mediate": ["mediate"]}[cmd]
        Pipeline(cfg).run_stages(stages)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="finres: %(message)s", stream=sys.stderr)
    try:
        run(args)
    except FinresError as exc:
        stage = getattr(exc, "stage", None)
        where = f"stage {stage} failed: " if stage else ""
        print(f"finres: error: {where}{exc}", file=sys.stderr)
        if isinstance(exc, ValidationError):
            return EXIT_VALIDATION
        if isinstance(exc, NumericalError):
            return EXIT_NUMERICAL
        if isinstance(exc, DataIOError):
            return EXIT_IO
        return EXIT_OTHER
    except OSError as exc:
        print(f"finres: error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
