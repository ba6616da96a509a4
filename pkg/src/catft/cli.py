"""Command-line entry point: ``catft <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .backtest import BacktestConfig
from .categorize import Basis, save_dataset
from .config import ExperimentConfig, Mode, load_config
from .market_data import aggregate_frames, parse_kline_csv, write_kline_csv
from .pipeline import TrainedSystem, build_training_dataset, ledger_from_report, train_all, walk_forward
from .synthetic import KINDS, generate_synthetic

log = logging.getLogger("catft")


def _dump(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
        changes["forecaster"] = cfg.forecaster.with_(seed=args.seed)
    if args.mode is not None:
        changes["mode"] = Mode(args.mode)
    if args.frame_minutes is not None:
        changes["frame_minutes"] = args.frame_minutes
    if args.basis is not None:
        changes["basis"] = Basis(args.basis)
    return cfg.with_(**changes) if changes else cfg


def _read_series(path: str, pair: str | None, input_minutes: int):
    with open(path, "rb") as fh:
        return parse_kline_csv(fh, pair or Path(path).stem.split("-")[0], input_minutes)


def cmd_synth(args):
    series = generate_synthetic(args.kind, args.length, args.seed, args.frame_minutes, args.pair)
    with open(args.out, "w") as fh:
        write_kline_csv(series, fh)
    log.info("wrote %d %d-minute frames to %s", len(series), series.frame_minutes, args.out)


def cmd_ingest(args):
    series = _read_series(args.input, args.pair, args.input_minutes)
    series.check_contiguous()
    if args.out:
        with open(args.out, "w") as fh:
            write_kline_csv(series, fh)
    _dump({"pair_id": series.pair_id, "frames": len(series), "frame_minutes": series.frame_minutes,
           "first_open_time": series.frames[0].open_time,
           "last_open_time": series.frames[-1].open_time}, None)


def cmd_aggregate(args):
    series = aggregate_frames(_read_series(args.input, args.pair, args.input_minutes), args.frame_minutes)
    with open(args.out, "w") as fh:
        write_kline_csv(series, fh)
    log.info("%s: %d frames of %d minutes", series.pair_id, len(series), series.frame_minutes)


def cmd_dataset(args):
    ds, _ = build_training_dataset(_config(args))
    save_dataset(ds, args.out)
    _dump({"windows": ds.total_windows, "categories": len(ds.buckets),
           "content_hash": ds.content_hash()}, None)


def cmd_train(args):
    cfg = _config(args)
    started = time.perf_counter()
    system = train_all(cfg)
    system.save(args.out)
    log.info("trained %d models in %.1fs", len(system.store.models), time.perf_counter() - started)


def cmd_evaluate(args):
    cfg = _config(args)
    started = time.perf_counter()
    system = TrainedSystem.load(args.models)
    if system.selector is not None:
        system.selector.alpha = cfg.alpha
    report = walk_forward(cfg, system)
    _dump(report, args.out)
    if args.ledger:
        ledger, _ = ledger_from_report(report)
        with open(args.ledger, "w") as fh:
            ledger.write_csv(fh)
    elapsed = time.perf_counter() - started
    # wall-clock stays out of the report so identical runs give identical bytes
    if args.timing:
        _dump({"wall_clock_seconds": elapsed}, args.timing)
    log.info("evaluated %d steps in %.1fs", len(report["steps"]), elapsed)


def cmd_backtest(args):
    report = json.loads(Path(args.report).read_text())
    bt = report["backtest"]
    cfg = BacktestConfig(
        args.initial if args.initial is not None else bt["initial_quote"],
        args.fee if args.fee is not None else bt["fee_rate"],
        bt["liquidate_at_end"] if args.liquidate is None else args.liquidate,
    )
    ledger, final = ledger_from_report(report, cfg)
    if args.ledger:
        with open(args.ledger, "w") as fh:
            ledger.write_csv(fh)
    from .backtest import buy_and_hold

    _dump({"final_value": final, "buy_and_hold": buy_and_hold(bt["closes"], cfg),
           "trades": len(ledger.trades), "replay_value": ledger.replay()}, None)


def cmd_report(args):
    report = json.loads(Path(args.report).read_text())
    m = report["metrics"]
    bt = report["backtest"]
    cfg = report["config"]
    lines = [
        f"target        {cfg['target']}  mode={cfg['mode']}  frame={cfg['frame_minutes']}m  "
        f"k={cfg['scheme']['bit_count']}  basis={cfg['scheme']['basis']}",
        f"steps         {len(report['steps'])}  fallbacks={report['fallback_count']}",
        f"accuracy      {_fmt(m['accuracy'])}",
        f"precision     {_fmt(m['precision'])}  (tp={m['tp']} fp={m['fp']} tn={m['tn']} fn={m['fn']})",
    ]
    if report.get("selector"):
        s = report["selector"]
        lines.append(f"selector acc  {_fmt(s['accuracy'])}  frozen={_fmt(s['accuracy_frozen'])}  "
                     f"online={_fmt(s['accuracy_online'])}")
    lines.append(f"final value   {bt['final_value']:.2f}  buy&hold={bt['buy_and_hold']:.2f}  "
                 f"trades={bt['trades']}  fee={bt['fee_rate']}")
    print("\n".join(lines))


def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.4f}"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="catft", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic kline CSV")
    s.add_argument("--kind", choices=KINDS, default="random_walk")
    s.add_argument("--length", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--frame-minutes", type=int, default=1)
    s.add_argument("--pair", default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("ingest", help="validate a kline CSV and optionally rewrite it canonically")
    s.add_argument("input")
    s.add_argument("--pair", default=None, help="pair id (default: filename prefix)")
    s.add_argument("--input-minutes", type=int, default=1)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("aggregate", help="aggregate a kline CSV into N-minute frames")
    s.add_argument("input")
    s.add_argument("--pair", default=None)
    s.add_argument("--input-minutes", type=int, default=1)
    s.add_argument("--frame-minutes", type=int, default=7)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_aggregate)

    def experiment(name, help_text, func):
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--config", required=True)
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--mode", choices=[m.value for m in Mode], default=None)
        s.add_argument("--frame-minutes", type=int, default=None)
        s.add_argument("--basis", choices=[b.value for b in Basis], default=None)
        s.set_defaults(func=func)
        return s

    experiment("dataset", "build the categorized training dataset", cmd_dataset).add_argument("--out", required=True)
    experiment("train", "train all category models and the selector", cmd_train).add_argument("--out", required=True)
    s = experiment("evaluate", "walk-forward evaluation over the test range", cmd_evaluate)
    s.add_argument("--models", required=True)
    s.add_argument("--out", default="-")
    s.add_argument("--ledger", default=None)
    s.add_argument("--timing", default=None, help="write wall-clock seconds to this JSON file")

    s = sub.add_parser("backtest", help="re-run the trading simulation from a report")
    s.add_argument("--report", required=True)
    s.add_argument("--fee", type=float, default=None)
    s.add_argument("--initial", type=float, default=None)
    s.add_argument("--liquidate", type=lambda v: v.lower() in ("1", "true", "yes"), default=None)
    s.add_argument("--ledger", default=None)
    s.set_defaults(func=cmd_backtest)

    s = sub.add_parser("report", help="summarize a run report")
    s.add_argument("report")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - any failure maps to a nonzero exit
        print(f"catft {args.command}: error: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
