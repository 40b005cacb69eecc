"""Seeded synthetic demo dataset and matching run config.

    python3 -m finres.demo DIR [--seed N] [--months T]

writes ``DIR/demo.csv`` (price levels for a shock index and three markets, a
policy-uncertainty index and two mediators) and ``DIR/demo.cfg``. Nothing is
committed as data; the files are regenerated on demand.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from .dataio import TimeSeriesPanel, save_panel
from .tvpvar import matrices_to_beta, simulate_dgp

DEMO_SEED = 20240101
DEMO_MONTHS = 150
MARKETS = ("MarketA", "MarketB", "MarketC")

DEMO_CONFIG = """\
# synthetic demo run; draws reduced so the smoke run stays quick
input = demo.csv
markets = MarketA, MarketB, MarketC
shock = Shock
cpu = CPU
mediators = Sentiment, Loans
log_diff = Shock, MarketA, MarketB, MarketC
lags = 1
draws = 2000
burn_in = 500
seed = 20240101
irf_horizon = 12
gfevd_horizon = 12
"""


def demo_panel(seed: int = DEMO_SEED, months: int = DEMO_MONTHS) -> TimeSeriesPanel:
    k = 1 + len(MARKETS)
    B = np.array([
        [0.30, 0.00, 0.00, 0.00],
        [-0.25, 0.20, 0.05, 0.00],
        [-0.10, 0.00, 0.25, 0.05],
        [0.15, 0.05, 0.00, 0.15],
    ])
    beta = matrices_to_beta(np.zeros(k), B[None])
    # shock first, then markets loading on it contemporaneously
    alpha = np.array([0.6, 0.4, 0.1, -0.3, 0.0, 0.1])
    h = np.log(np.array([0.08, 0.04, 0.02, 0.05]) ** 2)
    sim = simulate_dgp(k, months, beta=beta, alpha=alpha, h=h,
                       var_beta=1e-5, var_alpha=1e-4, var_h=5e-3, seed=seed,
                       columns=("Shock", *MARKETS))
    returns = sim.panel.values
    levels = np.vstack([np.zeros(k), np.cumsum(returns, axis=0)])
    prices = np.array([20.0, 100.0, 50.0, 10.0]) * np.exp(levels)

    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    n = months + 1
    cpu = np.empty(n)
    cpu[0] = 100.0
    for t in range(1, n):
        cpu[t] = 100.0 + 0.8 * (cpu[t - 1] - 100.0) + 8.0 * rng.standard_normal()
    sentiment = 0.05 * cpu + rng.standard_normal(n)
    loans = 1.5 + 0.2 * rng.standard_normal(n)

    first = sim.panel.dates[0]
    year, month = int(first[:4]), int(first[5:])
    prev = f"{year - (month == 1)}-{12 if month == 1 else month - 1:02d}"
    data = {"Shock": prices[:, 0], **{m: prices[:, i + 1] for i, m in enumerate(MARKETS)},
            "CPU": cpu, "Sentiment": sentiment, "Loans": loans}
    return TimeSeriesPanel.from_columns((prev, *sim.panel.dates), data)


def write_demo(directory, seed: int = DEMO_SEED, months: int = DEMO_MONTHS) -> Path:
    """Write demo.csv and demo.cfg into ``directory``; returns the config path."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    save_panel(demo_panel(seed, months), d / "demo.csv", comment=f"synthetic demo data, seed={seed}")
    cfg = d / "demo.cfg"
    cfg.write_text(DEMO_CONFIG.replace("seed = 20240101", f"seed = {seed}"), encoding="utf-8")
    return cfg


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="python3 -m finres.demo", description=__doc__.splitlines()[0])
    ap.add_argument("directory")
    ap.add_argument("--seed", type=int, default=DEMO_SEED)
    ap.add_argument("--months", type=int, default=DEMO_MONTHS)
    args = ap.parse_args(argv)
    print(write_demo(args.directory, args.seed, args.months))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
