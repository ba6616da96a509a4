"""All-in long-only trading simulation and directional metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence, TextIO


class BacktestError(ValueError):
    pass


@dataclass(frozen=True)
class BacktestConfig:
    initial_quote: float = 100.0
    fee_rate: float = 0.0
    liquidate_at_end: bool = True

    def __post_init__(self):
        if not self.initial_quote > 0:
            raise BacktestError("initial_quote must be positive")
        if not 0 <= self.fee_rate < 1:
            raise BacktestError("fee_rate must be in [0, 1)")


@dataclass(frozen=True)
class Trade:
    time_index: int
    side: str
    price: float
    quantity: float
    fee: float
    equity: float


@dataclass
class TradeLedger:
    initial_quote: float
    fee_rate: float
    trades: list[Trade] = field(default_factory=list)
    positions: list[bool] = field(default_factory=list)  # long after each step's decision
    final_value: float = 0.0
    mark_price: float = 0.0
    liquidated: bool = False

    def replay(self) -> float:
        """Recompute the final value from the trade records alone."""
        quote, base = self.initial_quote, 0.0
        for t in self.trades:
            if t.side == "buy":
                base = quote * (1.0 - self.fee_rate) / t.price
                quote = 0.0
            else:
                quote = base * t.price * (1.0 - self.fee_rate)
                base = 0.0
        return quote if base == 0.0 else base * self.mark_price

    def write_csv(self, out: TextIO) -> None:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["time_index", "side", "price", "quantity", "fee", "equity"])
        for t in self.trades:
            w.writerow([t.time_index, t.side, f"{t.price:.17g}", f"{t.quantity:.17g}",
                        f"{t.fee:.17g}", f"{t.equity:.17g}"])


def run_backtest(directions: Sequence[bool], closes: Sequence[float],
                 config: BacktestConfig | None = None) -> tuple[TradeLedger, float]:
    """Trade on each step's direction at that step's close.

    ``directions[t]`` is the prediction for the move from ``closes[t]`` to
    ``closes[t + 1]``, so ``closes`` is one longer than ``directions``; the extra
    close is where an open position is liquidated.
    """
    cfg = config or BacktestConfig()
    if len(closes) != len(directions) + 1:
        raise BacktestError(
            f"need len(closes) == len(directions) + 1, got {len(closes)} and {len(directions)}"
        )
    if any(p <= 0 for p in closes):
        raise BacktestError("prices must be positive")

    ledger = TradeLedger(cfg.initial_quote, cfg.fee_rate)
    quote, base = cfg.initial_quote, 0.0
    for t, up in enumerate(directions):
        price = closes[t]
        if up and base == 0.0:
            fee = quote * cfg.fee_rate
            base = (quote - fee) / price
            quote = 0.0
            ledger.trades.append(Trade(t, "buy", price, base, fee, base * price))
        elif not up and base > 0.0:
            gross = base * price
            fee = gross * cfg.fee_rate
            ledger.trades.append(Trade(t, "sell", price, base, fee, gross - fee))
            quote, base = gross - fee, 0.0
        ledger.positions.append(base > 0.0)

    last = closes[-1]
    ledger.mark_price = last
    if base > 0.0 and cfg.liquidate_at_end:
        gross = base * last
        fee = gross * cfg.fee_rate
        ledger.trades.append(Trade(len(directions), "sell", last, base, fee, gross - fee))
        quote, base = gross - fee, 0.0
        ledger.liquidated = True
    ledger.final_value = quote if base == 0.0 else base * last
    return ledger, ledger.final_value


def buy_and_hold(closes: Sequence[float], config: BacktestConfig | None = None) -> float:
    cfg = config or BacktestConfig()
    if len(closes) < 1 or any(p <= 0 for p in closes):
        raise BacktestError("need at least one positive price")
    return cfg.initial_quote * (closes[-1] / closes[0]) * (1.0 - cfg.fee_rate) ** 2


@dataclass(frozen=True)
class DirectionMetrics:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float | None:
        return (self.tp + self.tn) / self.total if self.total else None

    @property
    def precision(self) -> float | None:
        """Bullish precision; None when nothing was predicted bullish."""
        denom = self.tp + self.fp
        return self.tp / denom if denom else None

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
                "accuracy": self.accuracy, "precision": self.precision}


def direction_metrics(predicted_up: Sequence[bool], realized: Sequence[float]) -> DirectionMetrics:
    """Confusion counts with bullish as the positive class; realized 0 is bearish."""
    if len(predicted_up) != len(realized):
        raise BacktestError(f"length mismatch: {len(predicted_up)} predictions, {len(realized)} outcomes")
    tp = fp = tn = fn = 0
    for pred, v in zip(predicted_up, realized):
        actual = v > 0
        if pred and actual:
            tp += 1
        elif pred:
            fp += 1
        elif actual:
            fn += 1
        else:
            tn += 1
    return DirectionMetrics(tp, fp, tn, fn)
