"""Training of per-category forecasters plus the target's selector, and walk-forward evaluation."""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from . import selector as sel
from .backtest import BacktestConfig, buy_and_hold, direction_metrics, run_backtest
from .categorize import CategorizedDataset, build_dataset, encode_bits
from .config import ExperimentConfig, Mode
from .forecaster import (
    MissingModelError,
    ModelStore,
    TrainingDiverged,
    init,
    naive_baseline,
    predict_step,
    train,
)
from .market_data import FrameSeries, aggregate_frames, parse_kline_csv
from .preprocess import sliding_windows, to_volatility

log = logging.getLogger(__name__)

REPORT_FORMAT = "catft-run-report"
REPORT_VERSION = 1


class PipelineError(RuntimeError):
    pass


@dataclass
class TrainedSystem:
    store: ModelStore
    selector: sel.TransitionModel | None
    dataset: CategorizedDataset

    def save(self, directory: str | Path) -> Path:
        directory = Path(directory)
        self.store.save(directory)
        if self.selector is not None:
            sel.save_selector(self.selector, directory / "selector.json")
        return directory

    @classmethod
    def load(cls, directory: str | Path) -> "TrainedSystem":
        directory = Path(directory)
        store = ModelStore.load(directory)
        path = directory / "selector.json"
        selector = sel.load_selector(path) if path.exists() else None
        return cls(store, selector, CategorizedDataset(store.scheme))


def load_series(config: ExperimentConfig) -> dict[str, FrameSeries]:
    """Read every asset file and aggregate it to the experiment frame size."""
    out = {}
    for asset in config.assets:
        if asset.path is None:
            raise PipelineError(f"{asset.pair_id}: no file path configured")
        with open(asset.path, "rb") as fh:
            raw = parse_kline_csv(fh, asset.pair_id, asset.input_minutes)
        out[asset.pair_id] = aggregate_frames(raw, config.frame_minutes)
    return out


def _prepare(config: ExperimentConfig, series: Mapping[str, FrameSeries] | None) -> dict[str, FrameSeries]:
    if series is None:
        return load_series(config)
    out = {}
    for pid, s in series.items():
        out[pid] = s if s.frame_minutes == config.frame_minutes else aggregate_frames(s, config.frame_minutes)
        out[pid].check_contiguous()
    missing = {a.pair_id for a in config.assets} - set(out)
    if missing:
        raise PipelineError(f"no series supplied for {sorted(missing)}")
    return out


def series_hash(series: FrameSeries) -> str:
    h = hashlib.sha256(series.pair_id.encode())
    h.update(np.asarray(series.open_times, dtype="<i8").tobytes())
    h.update(np.asarray(series.closes, dtype="<f8").tobytes())
    return h.hexdigest()


def category_seed(seed: int, category: int) -> int:
    return int(np.random.SeedSequence([seed, category]).generate_state(1)[0])


def _train_category(args):
    c, cfg, windows = args
    X = np.ascontiguousarray(windows[:, :-1])
    Y = np.ascontiguousarray(windows[:, -1])
    P = np.broadcast_to(np.arange(1, cfg.input_len + 1, dtype=np.float64), X.shape)
    try:
        params, _ = train(init(cfg), (X, P, Y))
    except TrainingDiverged as exc:
        raise PipelineError(f"forecaster for category {c} diverged at epoch {exc.epoch}") from None
    return c, params


def build_training_dataset(config: ExperimentConfig, series: Mapping[str, FrameSeries] | None = None
                           ) -> tuple[CategorizedDataset, dict[str, FrameSeries]]:
    series = _prepare(config, series)
    scheme = config.scheme
    window_sets = {}
    for asset in config.assets:
        train_part = series[asset.pair_id].between(config.train_start, config.train_end)
        if len(train_part) < scheme.window_len + 1:
            log.warning("%s: %d training frames, too few for one window", asset.pair_id, len(train_part))
            window_sets[asset.pair_id] = []
            continue
        window_sets[asset.pair_id] = sliding_windows(to_volatility(train_part), scheme.window_len)
    ds = build_dataset(window_sets, scheme)
    if ds.total_windows == 0:
        raise PipelineError("no usable training windows in the configured train range")
    return ds, series


def train_all(config: ExperimentConfig, series: Mapping[str, FrameSeries] | None = None) -> TrainedSystem:
    """One forecaster per non-empty category over the pooled assets, then the target's selector."""
    ds, _ = build_training_dataset(config, series)
    scheme = ds.scheme

    pooled = np.concatenate([np.stack([w.values for w in ws]) for ws in ds.buckets.values()])
    rms = float(np.sqrt(np.mean(pooled * pooled)))
    scale = rms if rms > 0 else 1.0

    jobs = []
    for c in sorted(ds.buckets):
        cfg = config.forecaster.with_(seed=category_seed(config.seed, c))
        jobs.append((c, cfg, ds.bucket_matrix(c) / scale))
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            results = list(pool.map(_train_category, jobs))
    else:
        results = [_train_category(job) for job in jobs]

    store = ModelStore(scheme, config.forecaster, scale)
    for c, params in results:
        store.models[c] = params
    log.info("trained %d category models; %d categories empty", len(store.models), len(store.empty_categories))

    selector = None
    if config.mode is not Mode.NONE:
        selector = sel.fit(ds.sequences.get(config.target, []), scheme, config.alpha)
    return TrainedSystem(store, selector, ds)


@dataclass(frozen=True)
class Prediction:
    category: int | None      # category of the observed window (None in selector-less mode)
    chosen: int               # category whose model produced the forecast
    probability: float | None
    predicted: float
    up: bool
    fallback: bool


def predict_one(store: ModelStore, selector: sel.TransitionModel | None, window, mode: Mode | str,
                truth: int | None = None) -> Prediction:
    """Forecast the value after ``window`` (the last n observed volatility values)."""
    mode = Mode(mode)
    scheme = store.scheme
    values = np.asarray(window, dtype=np.float64)
    if len(values) != scheme.window_len:
        raise ValueError(f"window length {len(values)} != {scheme.window_len}")
    inputs = values[1:]
    current = None
    prob = None
    if mode is Mode.NONE:
        chosen = encode_bits(inputs, scheme.k, scheme.basis)
    else:
        current = encode_bits(values, scheme.k, scheme.basis)
        if mode is Mode.ORACLE:
            if truth is None:
                raise ValueError("oracle mode needs the true next category")
            chosen = sel.oracle_select(truth)
        else:
            if selector is None:
                raise ValueError("markov mode needs a selector")
            chosen, prob = sel.predict_next(selector, current)
    try:
        predicted = predict_step(store, chosen, inputs)
        fallback = False
    except MissingModelError:
        predicted = naive_baseline(inputs)
        fallback = True
    return Prediction(current, chosen, prob, predicted, predicted > 0, fallback)


def walk_forward(config: ExperimentConfig, system: TrainedSystem,
                 series: Mapping[str, FrameSeries] | None = None) -> dict:
    """Step through the target's test range with frozen forecasters; returns the run report."""
    all_series = _prepare(config, series)
    target = all_series[config.target]
    test = target.between(config.test_start, config.test_end)
    n = config.window_len
    scheme = system.store.scheme
    if scheme != config.scheme:
        raise PipelineError(f"model store scheme {scheme} does not match config scheme {config.scheme}")
    if len(test) < n + 2:
        raise PipelineError(f"test range holds {len(test)} frames; need at least {n + 2}")

    vol = to_volatility(test)
    V = vol.values
    mode = config.mode
    frozen = system.selector
    online = frozen.snapshot() if (frozen is not None and config.online_update) else None
    active = online if online is not None else frozen

    steps = []
    hits_active = hits_frozen = hits_online = 0
    for t in range(n - 1, len(V) - 1):
        window = V[t - n + 1:t + 1]
        nxt_window = V[t - n + 2:t + 2]
        if mode is Mode.NONE:
            truth = encode_bits(nxt_window[:-1], scheme.k, scheme.basis)
        else:
            truth = encode_bits(nxt_window, scheme.k, scheme.basis)
        pred = predict_one(system.store, active, window, mode, truth=truth)
        record = {
            "index": len(steps),
            "open_time": int(vol.times[t]),
            "close": float(vol.base_prices[t + 1]),
            "category": pred.category,
            "chosen": pred.chosen,
            "truth": truth,
            "probability": pred.probability,
            "predicted": float(pred.predicted),
            "up": bool(pred.up),
            "realized": float(V[t + 1]),
            "fallback": pred.fallback,
        }
        steps.append(record)
        if mode is not Mode.NONE:
            hits_active += pred.chosen == truth
            if frozen is not None:
                hits_frozen += sel.predict_next(frozen, pred.category)[0] == truth
                if online is not None:
                    hits_online += pred.chosen == truth
                    sel.update_online(online, pred.category, truth)

    directions = [s["up"] for s in steps]
    realized = [s["realized"] for s in steps]
    metrics = direction_metrics(directions, realized)
    bt_closes = [float(x) for x in vol.base_prices[n:]]
    ledger, final_value = run_backtest(directions, bt_closes, config.backtest)
    count = len(steps)

    selector_block = None
    if mode is not Mode.NONE:
        selector_block = {
            "accuracy": hits_active / count,
            "accuracy_frozen": hits_frozen / count if frozen is not None else None,
            "accuracy_online": hits_online / count if online is not None else None,
            "online_update": online is not None,
        }
    return {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "config": config.to_dict(),
        "dataset_hashes": {pid: series_hash(s) for pid, s in sorted(all_series.items())},
        "store": {
            "config_hash": system.store.config_hash(),
            "value_scale": system.store.value_scale,
            "models": len(system.store.models),
            "empty_categories": system.store.empty_categories,
        },
        "steps": steps,
        "metrics": metrics.to_dict(),
        "selector": selector_block,
        "fallback_count": sum(s["fallback"] for s in steps),
        "backtest": {
            "initial_quote": config.backtest.initial_quote,
            "fee_rate": config.backtest.fee_rate,
            "liquidate_at_end": config.backtest.liquidate_at_end,
            "final_value": final_value,
            "buy_and_hold": buy_and_hold(bt_closes, config.backtest),
            "trades": len(ledger.trades),
            "closes": bt_closes,
        },
    }


def ledger_from_report(report: dict, backtest_config=None):
    """Re-run the backtest from a report's step log."""
    cfg = backtest_config or BacktestConfig(
        report["backtest"]["initial_quote"], report["backtest"]["fee_rate"],
        report["backtest"]["liquidate_at_end"])
    directions = [s["up"] for s in report["steps"]]
    return run_backtest(directions, report["backtest"]["closes"], cfg)

