"""Experiment configuration and its INI-style key/value file format.

Example::

    [experiment]
    target = LTCUSDT
    frame_minutes = 7
    mode = markov            ; markov | oracle | none
    seed = 0
    train_start = 2021-12-01
    train_end = 2023-08-22   ; exclusive; defaults to test_start
    test_start = 2023-08-22
    test_end = 2023-09-05    ; exclusive; optional
    online_update = true
    alpha = 1.0
    workers = 1

    [scheme]
    window_len = 8
    basis = volatility_change ; or price_direction

    [forecaster]
    hidden_size = 70
    recurrent_layers = 4
    attention_heads = 4
    epochs = 7
    learning_rate = 0.001
    batch_size = 32
    loss = mse               ; or quantile
    quantiles = 0.1, 0.5, 0.9

    [backtest]
    initial_quote = 100
    fee_rate = 0
    liquidate_at_end = true

    [asset LTCUSDT]
    path = LTCUSDT-1m.csv    ; relative to the config file
    input_minutes = 1

Timestamps are epoch milliseconds or ISO-8601 dates/datetimes (UTC).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

from .backtest import BacktestConfig
from .categorize import Basis, CategoryScheme
from .forecaster import ForecasterConfig


class ConfigError(ValueError):
    pass


class Mode(str, Enum):
    MARKOV = "markov"
    ORACLE = "oracle"
    NONE = "none"


@dataclass(frozen=True)
class AssetSpec:
    pair_id: str
    path: str | None = None
    input_minutes: int = 1


def parse_time(value: str | int | None) -> int | None:
    if value is None or value == "":
        return None
    if isinstance(value, int):
        return value
    text = str(value).strip()
    if text.lstrip("-").isdigit():
        return int(text)
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp() * 1000)


@dataclass(frozen=True)
class ExperimentConfig:
    assets: tuple[AssetSpec, ...]
    target: str
    test_start: int
    frame_minutes: int = 7
    window_len: int = 8
    basis: Basis = Basis.VOLATILITY_CHANGE
    mode: Mode = Mode.MARKOV
    forecaster: ForecasterConfig = field(default_factory=ForecasterConfig)
    backtest: BacktestConfig = field(default_factory=BacktestConfig)
    train_start: int | None = None
    train_end: int | None = None
    test_end: int | None = None
    seed: int = 0
    alpha: float = 1.0
    online_update: bool = True
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "assets", tuple(self.assets))
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "basis", Basis(self.basis))
        if not self.assets:
            raise ConfigError("at least one asset is required")
        if self.target not in {a.pair_id for a in self.assets}:
            raise ConfigError(f"target {self.target!r} is not among the assets")
        if self.train_end is None:
            object.__setattr__(self, "train_end", self.test_start)
        if self.train_end > self.test_start:
            raise ConfigError("test range must start at or after the end of the train range")
        if self.test_end is not None and self.test_end <= self.test_start:
            raise ConfigError("test_end must be after test_start")
        if self.train_start is not None and self.train_start >= self.train_end:
            raise ConfigError("train_start must be before train_end")
        if self.forecaster.input_len != self.window_len - 1:
            raise ConfigError(f"forecaster input_len {self.forecaster.input_len} must equal "
                              f"window_len - 1 = {self.window_len - 1}")
        if self.frame_minutes <= 0 or self.workers < 1:
            raise ConfigError("frame_minutes and workers must be positive")
        for a in self.assets:
            if self.frame_minutes % a.input_minutes:
                raise ConfigError(f"{a.pair_id}: frame_minutes {self.frame_minutes} is not a "
                                  f"multiple of input_minutes {a.input_minutes}")

    @property
    def scheme(self) -> CategoryScheme:
        k = self.window_len - 2 if self.mode is Mode.NONE else self.window_len - 1
        return CategoryScheme(self.window_len, k, self.basis)

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "assets": [{"pair_id": a.pair_id, "path": a.path, "input_minutes": a.input_minutes}
                       for a in self.assets],
            "target": self.target,
            "frame_minutes": self.frame_minutes,
            "scheme": self.scheme.to_dict(),
            "mode": self.mode.value,
            "forecaster": self.forecaster.to_dict(),
            "backtest": {"initial_quote": self.backtest.initial_quote,
                         "fee_rate": self.backtest.fee_rate,
                         "liquidate_at_end": self.backtest.liquidate_at_end},
            "train_start": self.train_start,
            "train_end": self.train_end,
            "test_start": self.test_start,
            "test_end": self.test_end,
            "seed": self.seed,
            "alpha": self.alpha,
            "online_update": self.online_update,
        }


_FORECASTER_TYPES = {
    "input_len": int, "output_len": int, "hidden_size": int, "recurrent_layers": int,
    "attention_heads": int, "epochs": int, "learning_rate": float, "batch_size": int,
    "loss": str, "seed": int,
}


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if not cp.read(path):
        raise ConfigError(f"cannot read config file {path}")
    try:
        return _from_parser(cp, path.parent)
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None


def _from_parser(cp: configparser.ConfigParser, base: Path) -> ExperimentConfig:
    ex = cp["experiment"]
    assets = []
    for section in cp.sections():
        if section.startswith("asset "):
            sec = cp[section]
            p = sec.get("path")
            if p and not Path(p).is_absolute():
                p = str(base / p)
            assets.append(AssetSpec(section[len("asset "):].strip(), p, sec.getint("input_minutes", 1)))

    fkw = {}
    if cp.has_section("forecaster"):
        for key, val in cp["forecaster"].items():
            if key == "quantiles":
                fkw[key] = tuple(float(q) for q in val.split(","))
            elif key in _FORECASTER_TYPES:
                fkw[key] = _FORECASTER_TYPES[key](val)
            else:
                raise ConfigError(f"unknown forecaster key {key!r}")
    bkw = {}
    if cp.has_section("backtest"):
        b = cp["backtest"]
        if "initial_quote" in b:
            bkw["initial_quote"] = float(b["initial_quote"])
        if "fee_rate" in b:
            bkw["fee_rate"] = float(b["fee_rate"])
        if "liquidate_at_end" in b:
            bkw["liquidate_at_end"] = _bool(b["liquidate_at_end"])
    sc = cp["scheme"] if cp.has_section("scheme") else {}

    seed = int(ex.get("seed", "0"))
    return ExperimentConfig(
        assets=tuple(assets),
        target=ex["target"].strip(),
        test_start=parse_time(ex["test_start"]),
        frame_minutes=int(ex.get("frame_minutes", "7")),
        window_len=int(sc.get("window_len", "8")),
        basis=Basis(sc.get("basis", "volatility_change").strip()),
        mode=Mode(ex.get("mode", "markov").strip()),
        forecaster=ForecasterConfig(**{"seed": seed, **fkw}),
        backtest=BacktestConfig(**bkw),
        train_start=parse_time(ex.get("train_start")),
        train_end=parse_time(ex.get("train_end")),
        test_end=parse_time(ex.get("test_end")),
        seed=seed,
        alpha=float(ex.get("alpha", "1.0")),
        online_update=_bool(ex.get("online_update", "true")),
        workers=int(ex.get("workers", "1")),
    )
