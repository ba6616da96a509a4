import numpy as np
import pytest

from catft.market_data import Kline, FrameSeries, MINUTE_MS


def make_frames(closes, start=1_638_316_800_000, minutes=1, pair="TEST"):
    """Valid klines whose closes are ``closes`` (open = previous close)."""
    frames = []
    prev = closes[0]
    step = minutes * MINUTE_MS
    for i, c in enumerate(closes):
        frames.append(Kline(start + i * step, prev, max(prev, c) * 1.001, min(prev, c) * 0.999, c,
                            1.0 + i, start + (i + 1) * step - 1, (1.0 + i) * c, i + 1, 0.5, 0.5 * c))
        prev = c
    return FrameSeries(pair, minutes, frames)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
