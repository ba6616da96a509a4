"""Synthetic kline series for tests and acceptance runs.

Kinds
-----
random_walk
    Closes follow exp-normal (log-normal) multiplicative steps.
deterministic_category
    The next volatility-change bit is a fixed function of the current 7-bit
    category (feedback taps of the maximal-length register x^7 + x + 1), so the
    category sequence cycles through all 127 non-zero patterns. Within a run of
    equal bits the magnitude grows, which keeps "bit 1" equivalent to V_t > V_{t-1}
    and makes the sign of V equal to the current bit.
periodic
    Closes follow a sinusoid around a base price.
"""

from __future__ import annotations

import numpy as np

from .market_data import MINUTE_MS, FrameSeries, Kline

KINDS = ("random_walk", "deterministic_category", "periodic")
START_TIME_MS = 1_692_662_400_000  # 2023-08-22T00:00:00Z


def lfsr_bits(length: int, state: int, taps: tuple[int, int] = (6, 5), k: int = 7) -> np.ndarray:
    """Bit stream b_{t+1} = b_{t-6} xor b_{t-5}, seeded by a k-bit non-zero state."""
    mask = (1 << k) - 1
    state &= mask
    if state == 0:
        raise ValueError("register state must be non-zero")
    out = np.empty(length, dtype=np.int8)
    for i in range(length):
        bit = ((state >> taps[0]) ^ (state >> taps[1])) & 1
        state = ((state << 1) | bit) & mask
        out[i] = bit
    return out


def deterministic_volatility(length: int, seed: int, magnitude: float = 0.1, growth: float = 0.25) -> np.ndarray:
    rng = np.random.default_rng(seed)
    bits = lfsr_bits(length, int(rng.integers(1, 128)))
    values = np.empty(length)
    run = 0
    for t in range(length):
        run = run + 1 if t > 0 and bits[t] == bits[t - 1] else 0
        sign = 1.0 if bits[t] else -1.0
        values[t] = sign * magnitude * (1.0 + growth * run)
    return values


def _closes(kind: str, length: int, seed: int, start_price: float) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if kind == "random_walk":
        steps = rng.normal(0.0, 0.002, size=length - 1)
        return start_price * np.exp(np.concatenate(([0.0], np.cumsum(steps))))
    if kind == "deterministic_category":
        v = deterministic_volatility(length - 1, seed)
        return start_price * np.concatenate(([1.0], np.cumprod(1.0 + v / 100.0)))
    if kind == "periodic":
        period = 24
        phase = rng.uniform(0, 2 * np.pi)
        t = np.arange(length)
        return start_price * (1.0 + 0.01 * np.sin(2 * np.pi * t / period + phase))
    raise ValueError(f"unknown synthetic kind {kind!r}; choose from {KINDS}")


def generate_synthetic(kind: str, length: int, seed: int, frame_minutes: int = 1,
                       pair_id: str | None = None, start_price: float = 100.0,
                       start_time: int = START_TIME_MS) -> FrameSeries:
    """A gap-free FrameSeries of ``length`` frames whose closes follow ``kind``."""
    if length < 2:
        raise ValueError("length must be at least 2")
    closes = _closes(kind, length, seed, start_price)
    rng = np.random.default_rng([seed, 1])
    step = frame_minutes * MINUTE_MS
    wiggle = rng.uniform(0.0, 5e-4, size=(length, 2))
    volume = rng.uniform(1.0, 50.0, size=length)
    trades = rng.integers(1, 500, size=length)
    taker = rng.uniform(0.2, 0.8, size=length)
    frames = []
    prev = closes[0]
    for i in range(length):
        o, c = float(prev), float(closes[i])
        hi = max(o, c) * (1.0 + float(wiggle[i, 0]))
        lo = min(o, c) * (1.0 - float(wiggle[i, 1]))
        qav = float(volume[i] * c)
        frames.append(Kline(
            open_time=start_time + i * step,
            open=o, high=hi, low=lo, close=c,
            volume=float(volume[i]),
            close_time=start_time + (i + 1) * step - 1,
            quote_asset_volume=qav,
            num_trades=int(trades[i]),
            taker_buy_base=float(volume[i] * taker[i]),
            taker_buy_quote=qav * float(taker[i]),
        ))
        prev = c
    return FrameSeries(pair_id or f"SYN{kind.upper()[:4]}{seed}", frame_minutes, frames)
