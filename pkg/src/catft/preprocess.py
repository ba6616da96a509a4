"""Price-to-volatility conversion, auxiliary features and sliding windows."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .market_data import FrameSeries


class PreprocessError(ValueError):
    pass


@dataclass(frozen=True)
class VolatilitySeries:
    pair_id: str
    frame_minutes: int
    values: np.ndarray
    base_prices: np.ndarray
    # open_time of the frame each value belongs to (the later of the two closes)
    times: np.ndarray | None = None

    def __post_init__(self):
        if len(self.base_prices) != len(self.values) + 1:
            raise PreprocessError("base_prices must be exactly one longer than values")

    def __len__(self) -> int:
        return len(self.values)

    def reconstruct_prices(self) -> np.ndarray:
        """Rebuild closes from the first base price and the percent changes."""
        return self.base_prices[0] * np.concatenate(([1.0], np.cumprod(1.0 + self.values / 100.0)))


@dataclass(frozen=True)
class Window:
    values: np.ndarray
    pair_id: str
    start: int

    def __len__(self) -> int:
        return len(self.values)


def volatility_from_closes(closes: Sequence[float]) -> np.ndarray:
    closes = np.asarray(closes, dtype=np.float64)
    if closes.size < 2:
        raise PreprocessError("need at least 2 prices to compute volatility")
    if np.any(closes <= 0):
        raise PreprocessError("prices must be positive")
    return (closes[1:] / closes[:-1] - 1.0) * 100.0


def to_volatility(series: FrameSeries) -> VolatilitySeries:
    """V_t = (P_t / P_{t-1} - 1) * 100 over close prices; no rounding."""
    if len(series) < 2:
        raise PreprocessError(f"{series.pair_id}: need at least 2 frames, got {len(series)}")
    closes = np.asarray(series.closes, dtype=np.float64)
    values = volatility_from_closes(closes)
    times = np.asarray(series.open_times[1:], dtype=np.int64)
    return VolatilitySeries(series.pair_id, series.frame_minutes, values, closes, times)


def sliding_windows(series: VolatilitySeries, n: int) -> list[Window]:
    if n < 2:
        raise PreprocessError(f"window length must be >= 2, got {n}")
    if len(series) < n:
        raise PreprocessError(f"{series.pair_id}: series of length {len(series)} shorter than window {n}")
    return [Window(series.values[i:i + n], series.pair_id, i) for i in range(len(series) - n + 1)]


def window_matrix(values: np.ndarray, n: int) -> np.ndarray:
    """Stride-1 windows as a read-only (count, n) view; same layout as sliding_windows."""
    values = np.asarray(values, dtype=np.float64)
    if len(values) < n:
        raise PreprocessError(f"series of length {len(values)} shorter than window {n}")
    return np.lib.stride_tricks.sliding_window_view(values, n)


def normalize_capped(values: Sequence[float], reference_max: float) -> np.ndarray:
    if reference_max <= 0:
        raise PreprocessError(f"reference_max must be positive, got {reference_max}")
    values = np.asarray(values, dtype=np.float64)
    if np.any(values < 0):
        raise PreprocessError("normalize_capped expects non-negative values")
    return np.minimum(values / reference_max, 1.0)


@dataclass(frozen=True)
class RatioFeatures:
    ratio_open: np.ndarray
    ratio_high: np.ndarray
    ratio_low: np.ndarray


def ratio_features(series: FrameSeries) -> RatioFeatures:
    """open/high/low of each frame divided by the previous frame's close."""
    if len(series) < 2:
        raise PreprocessError("ratio features need at least 2 frames")
    frames = series.frames
    prev_close = np.array([k.close for k in frames[:-1]])
    return RatioFeatures(
        ratio_open=np.array([k.open for k in frames[1:]]) / prev_close,
        ratio_high=np.array([k.high for k in frames[1:]]) / prev_close,
        ratio_low=np.array([k.low for k in frames[1:]]) / prev_close,
    )
