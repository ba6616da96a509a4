"""Full-scale experiment on Binance 1-minute kline CSVs.

Expects ``<data-dir>/<PAIR>.csv`` for every pair (12-column Binance layout). Trains on
everything before --test-start, tests for --test-days, and runs each requested
selector mode. Writes reports and ledgers under --out.

    python scripts/binance_run.py --data-dir data --pairs LTCUSDT BTCUSDT ETHUSDT \
        --target LTCUSDT --test-start 2023-08-22 --modes markov oracle none
"""

import argparse
import json
import time
from pathlib import Path

from catft.backtest import BacktestConfig
from catft.config import AssetSpec, ExperimentConfig, Mode, parse_time
from catft.forecaster import ForecasterConfig
from catft.pipeline import ledger_from_report, load_series, train_all, walk_forward

DAY_MS = 24 * 60 * 60 * 1000


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--data-dir", required=True)
    ap.add_argument("--pairs", nargs="+", required=True)
    ap.add_argument("--target", required=True)
    ap.add_argument("--test-start", required=True)
    ap.add_argument("--test-days", type=float, default=14)
    ap.add_argument("--frame-minutes", type=int, default=7)
    ap.add_argument("--modes", nargs="+", default=["markov", "oracle", "none"])
    ap.add_argument("--epochs", type=int, default=7)
    ap.add_argument("--fee", type=float, default=0.0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/binance")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    start = parse_time(args.test_start)
    assets = tuple(AssetSpec(p, str(Path(args.data_dir) / f"{p}.csv")) for p in args.pairs)
    base = ExperimentConfig(assets, args.target, start, frame_minutes=args.frame_minutes,
                            test_end=start + int(args.test_days * DAY_MS), seed=args.seed,
                            workers=args.workers, backtest=BacktestConfig(fee_rate=args.fee),
                            forecaster=ForecasterConfig(epochs=args.epochs, seed=args.seed))
    series = load_series(base)
    for mode in args.modes:
        cfg = base.with_(mode=Mode(mode))
        started = time.perf_counter()
        system = train_all(cfg, series)
        report = walk_forward(cfg, system, series)
        (out / f"report_{mode}.json").write_text(json.dumps(report, indent=1, sort_keys=True))
        with open(out / f"ledger_{mode}.csv", "w") as fh:
            ledger_from_report(report)[0].write_csv(fh)
        m, bt = report["metrics"], report["backtest"]
        sel = report["selector"] or {}
        print(f"{mode:7s} accuracy={m['accuracy']:.4f} precision={m['precision']} "
              f"selector={sel.get('accuracy')} final={bt['final_value']:.2f} "
              f"buy_and_hold={bt['buy_and_hold']:.2f} fallbacks={report['fallback_count']} "
              f"({time.perf_counter() - started:.0f}s)")


if __name__ == "__main__":
    main()
