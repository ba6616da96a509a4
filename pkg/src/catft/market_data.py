"""Exchange kline records: parsing, validation and N-minute aggregation."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, TextIO

MINUTE_MS = 60_000

# Canonical Binance kline column order.
KLINE_COLUMNS = (
    "open_time",
    "open",
    "high",
    "low",
    "close",
    "volume",
    "close_time",
    "quote_asset_volume",
    "num_trades",
    "taker_buy_base",
    "taker_buy_quote",
    "ignore",
)


class KlineError(ValueError):
    """Raised for malformed or inconsistent kline data."""


@dataclass(frozen=True)
class Kline:
    open_time: int
    open: float
    high: float
    low: float
    close: float
    volume: float
    close_time: int
    quote_asset_volume: float = 0.0
    num_trades: int = 0
    taker_buy_base: float = 0.0
    taker_buy_quote: float = 0.0

    def violation(self) -> str | None:
        """Name of the first broken invariant, or None when the record is valid."""
        if min(self.open, self.high, self.low, self.close) <= 0:
            return "prices must be positive"
        if self.high < self.low:
            return "high < low"
        if self.low > min(self.open, self.close):
            return "low > min(open, close)"
        if self.high < max(self.open, self.close):
            return "high < max(open, close)"
        if min(self.volume, self.quote_asset_volume, self.num_trades,
               self.taker_buy_base, self.taker_buy_quote) < 0:
            return "volumes and counts must be non-negative"
        if self.open_time >= self.close_time:
            return "open_time must precede close_time"
        return None


@dataclass(frozen=True)
class FrameSeries:
    pair_id: str
    frame_minutes: int
    frames: tuple[Kline, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if self.frame_minutes <= 0:
            raise KlineError(f"frame_minutes must be positive, got {self.frame_minutes}")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def step_ms(self) -> int:
        return self.frame_minutes * MINUTE_MS

    @property
    def closes(self) -> list[float]:
        return [k.close for k in self.frames]

    @property
    def open_times(self) -> list[int]:
        return [k.open_time for k in self.frames]

    def check_contiguous(self) -> None:
        step = self.step_ms
        for i in range(1, len(self.frames)):
            delta = self.frames[i].open_time - self.frames[i - 1].open_time
            if delta != step:
                raise KlineError(
                    f"{self.pair_id}: gap or misalignment between frames {i - 1} and {i} "
                    f"(open_time delta {delta} ms, expected {step} ms)"
                )

    def between(self, start: int | None = None, end: int | None = None) -> "FrameSeries":
        """Frames with start <= open_time < end (either bound optional)."""
        kept = [
            k for k in self.frames
            if (start is None or k.open_time >= start) and (end is None or k.open_time < end)
        ]
        return FrameSeries(self.pair_id, self.frame_minutes, kept)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _row_to_kline(row: list[str], rownum: int) -> Kline:
    if len(row) != len(KLINE_COLUMNS):
        raise KlineError(f"row {rownum}: expected {len(KLINE_COLUMNS)} columns, got {len(row)}")
    try:
        return Kline(
            open_time=int(row[0]),
            open=float(row[1]),
            high=float(row[2]),
            low=float(row[3]),
            close=float(row[4]),
            volume=float(row[5]),
            close_time=int(row[6]),
            quote_asset_volume=float(row[7]),
            num_trades=int(row[8]),
            taker_buy_base=float(row[9]),
            taker_buy_quote=float(row[10]),
        )
    except ValueError as exc:
        raise KlineError(f"row {rownum}: malformed field ({exc})") from None


def parse_kline_csv(source: BinaryIO | TextIO | bytes | str, pair_id: str,
                    frame_minutes: int = 1) -> FrameSeries:
    """Parse a 12-column Binance kline CSV into a validated, sorted FrameSeries.

    ``source`` may be a binary or text stream, raw bytes, or already-decoded text.
    A header row is recognised by a non-numeric first field. ``frame_minutes`` is the
    granularity of the file (1 for the public minute dumps).
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    text = text.lstrip("﻿")

    parsed: list[tuple[int, Kline]] = []
    first = True
    for rownum, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        row = [cell.strip() for cell in row]
        if first:
            first = False
            if not _is_number(row[0]):
                continue
        kline = _row_to_kline(row, rownum)
        problem = kline.violation()
        if problem:
            raise KlineError(f"row {rownum}: invariant violated: {problem}")
        parsed.append((rownum, kline))

    if not parsed:
        raise KlineError("empty input: no kline rows found")

    parsed.sort(key=lambda item: item[1].open_time)
    for (_, prev), (rownum, cur) in zip(parsed, parsed[1:]):
        if cur.open_time == prev.open_time:
            raise KlineError(f"row {rownum}: duplicate open_time {cur.open_time}")
    return FrameSeries(pair_id, frame_minutes, [k for _, k in parsed])


def _num(x: float) -> str:
    return repr(float(x))  # shortest string that round-trips


def write_kline_csv(series: FrameSeries, out: TextIO, header: bool = True) -> None:
    writer = csv.writer(out, lineterminator="\n")
    if header:
        writer.writerow(KLINE_COLUMNS)
    for k in series.frames:
        writer.writerow([
            k.open_time, _num(k.open), _num(k.high), _num(k.low), _num(k.close),
            _num(k.volume), k.close_time, _num(k.quote_asset_volume), k.num_trades,
            _num(k.taker_buy_base), _num(k.taker_buy_quote), 0,
        ])


def _merge(block: Iterable[Kline]) -> Kline:
    block = list(block)
    return Kline(
        open_time=block[0].open_time,
        open=block[0].open,
        high=max(k.high for k in block),
        low=min(k.low for k in block),
        close=block[-1].close,
        volume=sum(k.volume for k in block),
        close_time=block[-1].close_time,
        quote_asset_volume=sum(k.quote_asset_volume for k in block),
        num_trades=sum(k.num_trades for k in block),
        taker_buy_base=sum(k.taker_buy_base for k in block),
        taker_buy_quote=sum(k.taker_buy_quote for k in block),
    )


def aggregate_frames(series: FrameSeries, n_minutes: int) -> FrameSeries:
    """Merge consecutive frames into non-overlapping n-minute blocks.

    Blocks are anchored at the first frame; a trailing partial block is dropped.
    """
    if not series.frames:
        raise KlineError("cannot aggregate an empty series")
    if n_minutes <= 0 or n_minutes % series.frame_minutes:
        raise KlineError(
            f"n_minutes={n_minutes} is not a positive multiple of the input granularity "
            f"({series.frame_minutes} min)"
        )
    series.check_contiguous()
    size = n_minutes // series.frame_minutes
    if size == 1:
        return series
    frames = series.frames
    blocks = [_merge(frames[i:i + size]) for i in range(0, len(frames) - size + 1, size)]
    return FrameSeries(series.pair_id, n_minutes, blocks)
