"""Writes the bundled synthetic fixture: 3 sectors, 9 crypto assets, 401 daily closes."""

import argparse
import datetime as dt
import json
from pathlib import Path

import numpy as np

SECTORS = {
    "exchange": ["BNX", "CRO", "OKB"],
    "payments": ["DSH", "LTC", "XLM"],
    "platform": ["ADA", "DOT", "SOL"],
}
# One asset listed in two sectors, as multi-sector listings occur in practice.
EXTRA_MEMBERSHIP = {"LTC": "exchange"}


def generate(days: int, seed: int):
    rng = np.random.default_rng(seed)
    market = rng.normal(0.0, 0.02, days)
    returns = {}
    for s_idx, (sector, tickers) in enumerate(SECTORS.items()):
        factor = rng.normal(0.0, 0.015, days)
        if sector == "platform":
            # AR(1) sector factor whose persistence flips sign halfway through
            e = rng.normal(0.0, 0.015, days)
            factor = np.zeros(days)
            for t in range(1, days):
                phi = 0.85 if t < days // 2 else -0.85
                factor[t] = phi * factor[t - 1] + e[t]
        for k, ticker in enumerate(tickers):
            beta = 0.6 + 0.1 * k
            idio = rng.normal(0.0, 0.01 + 0.002 * s_idx, days)
            returns[ticker] = 0.0004 * (k + 1) + beta * market + factor + idio
    return returns


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data" / "fixture")
    ap.add_argument("--days", type=int, default=401)
    ap.add_argument("--seed", type=int, default=20210401)
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    returns = generate(args.days - 1, args.seed)
    start = dt.date(2020, 1, 1)
    dates = [(start + dt.timedelta(days=i)).isoformat() for i in range(args.days)]

    with open(args.out / "prices.csv", "w") as f:
        f.write("date,ticker,close\n")
        for ticker in sorted(returns):
            path = 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(returns[ticker])]))
            for d, p in zip(dates, path):
                f.write(f"{d},{ticker},{p:.10g}\n")

    with open(args.out / "sectors.csv", "w") as f:
        f.write("ticker,asset_class,sector\n")
        for sector, tickers in SECTORS.items():
            for t in tickers:
                f.write(f"{t},crypto,{sector}\n")
        for t, sector in EXTRA_MEMBERSHIP.items():
            f.write(f"{t},crypto,{sector}\n")

    config = {
        "prices": "prices.csv",
        "sectors": "sectors.csv",
        "output": "bundle",
        "window": 120,
        "linkage": "average",
        "seed": 7,
        "spectra_grid": 64,
        "rjmcmc": {"iterations": 10000, "burnin": 5000, "t_min": 40, "max_segments": 10, "n_basis": 10, "mix_pi": 0.8},
        "mjw": {"order": 1, "normalize": False},
        "sweep": {"windows": [120, 150, 180], "best": [1, 2, 3], "out_of_sample": True},
        "plots": True,
    }
    (args.out / "pipeline.json").write_text(json.dumps(config, indent=2) + "\n")


if __name__ == "__main__":
    main()
