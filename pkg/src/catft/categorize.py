"""Direction-pattern categories for fixed-length windows.

A window of n volatility values is encoded as a k-bit integer. The oldest comparison
sits in the most significant bit, so sliding the window one step forward is a left
shift plus one new bit, and every category has exactly two possible successors.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .preprocess import Window

DATASET_FORMAT = "catft-dataset"
DATASET_VERSION = 1


class CategoryError(ValueError):
    pass


class EmptyBucketError(CategoryError, KeyError):
    """The requested category has no training windows."""

    def __str__(self) -> str:
        return ValueError.__str__(self)


class Basis(str, Enum):
    VOLATILITY_CHANGE = "volatility_change"
    PRICE_DIRECTION = "price_direction"


@dataclass(frozen=True)
class CategoryScheme:
    window_len: int = 8
    bit_count: int | None = None
    basis: Basis = Basis.VOLATILITY_CHANGE

    def __post_init__(self):
        if self.window_len < 2:
            raise CategoryError(f"window_len must be >= 2, got {self.window_len}")
        if self.bit_count is None:
            object.__setattr__(self, "bit_count", self.window_len - 1)
        object.__setattr__(self, "basis", Basis(self.basis))
        if self.bit_count not in (self.window_len - 1, self.window_len - 2) or self.bit_count < 1:
            raise CategoryError(
                f"bit_count must be n-1 or n-2 (n={self.window_len}), got {self.bit_count}"
            )

    @property
    def k(self) -> int:
        return self.bit_count  # type: ignore[return-value]

    @property
    def size(self) -> int:
        return 1 << self.k

    @property
    def selectorless(self) -> bool:
        return self.k == self.window_len - 2

    def to_dict(self) -> dict:
        return {"window_len": self.window_len, "bit_count": self.k, "basis": self.basis.value}

    @classmethod
    def from_dict(cls, d: Mapping) -> "CategoryScheme":
        return cls(int(d["window_len"]), int(d["bit_count"]), Basis(d["basis"]))


def encode_bits(values: Sequence[float], k: int, basis: Basis | str = Basis.VOLATILITY_CHANGE) -> int:
    """Pack the first k direction bits of ``values``, oldest first. Ties encode 0."""
    v = np.asarray(values, dtype=np.float64)
    basis = Basis(basis)
    if basis is Basis.VOLATILITY_CHANGE:
        if len(v) < k + 1:
            raise CategoryError(f"need {k + 1} values for {k} comparisons, got {len(v)}")
        bits = v[1:k + 1] > v[:k]
    else:
        if len(v) < k:
            raise CategoryError(f"need {k} values for {k} sign bits, got {len(v)}")
        bits = v[:k] > 0
    cat = 0
    for b in bits:
        cat = (cat << 1) | int(b)
    return cat


def encode_matrix(windows: np.ndarray, k: int, basis: Basis | str = Basis.VOLATILITY_CHANGE) -> np.ndarray:
    """Vectorised encode_bits over the rows of a (count, n) array."""
    w = np.asarray(windows, dtype=np.float64)
    if Basis(basis) is Basis.VOLATILITY_CHANGE:
        bits = w[:, 1:k + 1] > w[:, :k]
    else:
        bits = w[:, :k] > 0
    weights = 1 << np.arange(k - 1, -1, -1, dtype=np.int64)
    return bits.astype(np.int64) @ weights


def categorize(window: Window | Sequence[float], scheme: CategoryScheme) -> int:
    values = window.values if isinstance(window, Window) else window
    if len(values) != scheme.window_len:
        raise CategoryError(f"window length {len(values)} != scheme window_len {scheme.window_len}")
    return encode_bits(values, scheme.k, scheme.basis)


def successors(c: int, scheme: CategoryScheme) -> tuple[int, int]:
    base = (2 * c) % scheme.size
    return base, base + 1


def is_successor(prev: int, nxt: int, scheme: CategoryScheme) -> bool:
    return 0 <= nxt < scheme.size and (2 * prev) % scheme.size == (nxt & ~1)


@dataclass(frozen=True)
class CategoryTrainingSeries:
    category: int
    values: np.ndarray
    positions: np.ndarray


@dataclass
class CategorizedDataset:
    scheme: CategoryScheme
    buckets: dict[int, list[Window]] = field(default_factory=dict)
    sequences: dict[str, list[int]] = field(default_factory=dict)

    @property
    def total_windows(self) -> int:
        return sum(len(ws) for ws in self.buckets.values())

    def bucket_matrix(self, c: int) -> np.ndarray:
        ws = self.buckets.get(c)
        if not ws:
            raise EmptyBucketError(f"category {c} unseen in training data")
        return np.stack([w.values for w in ws])

    def counts(self) -> dict[int, int]:
        return {c: len(ws) for c, ws in sorted(self.buckets.items())}

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(self.scheme.to_dict(), sort_keys=True).encode())
        for c in sorted(self.buckets):
            h.update(c.to_bytes(4, "little"))
            h.update(np.ascontiguousarray(self.bucket_matrix(c), dtype="<f8").tobytes())
        return h.hexdigest()


def build_dataset(window_sets: Mapping[str, Iterable[Window]], scheme: CategoryScheme) -> CategorizedDataset:
    """Bucket every window of every asset by category, pooling across assets."""
    ds = CategorizedDataset(scheme)
    for pair_id, windows in window_sets.items():
        seq = ds.sequences.setdefault(pair_id, [])
        for w in windows:
            if len(w) != scheme.window_len:
                raise CategoryError(
                    f"{pair_id}: window at {w.start} has length {len(w)}, expected {scheme.window_len}"
                )
            c = encode_bits(w.values, scheme.k, scheme.basis)
            ds.buckets.setdefault(c, []).append(w)
            seq.append(c)
    return ds


def training_series(ds: CategorizedDataset, c: int) -> CategoryTrainingSeries:
    """Concatenate a bucket's windows with the repeating 1..n position covariate."""
    mat = ds.bucket_matrix(c)
    n = ds.scheme.window_len
    positions = np.tile(np.arange(1, n + 1), len(mat))
    return CategoryTrainingSeries(c, mat.reshape(-1), positions)


def save_dataset(ds: CategorizedDataset, directory: str | Path) -> Path:
    """One CSV of windows per category plus manifest.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {}
    for c in sorted(ds.buckets):
        name = f"cat_{c:04d}.csv"
        with open(directory / name, "w") as fh:
            fh.write("pair_id,start," + ",".join(f"v{i + 1}" for i in range(ds.scheme.window_len)) + "\n")
            for w in ds.buckets[c]:
                fh.write(f"{w.pair_id},{w.start}," + ",".join(repr(float(x)) for x in w.values) + "\n")
        files[str(c)] = name
    manifest = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "scheme": ds.scheme.to_dict(),
        "assets": {pid: len(seq) for pid, seq in ds.sequences.items()},
        "sequences": ds.sequences,
        "window_counts": {str(c): n for c, n in ds.counts().items()},
        "files": files,
        "content_hash": ds.content_hash(),
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return directory


def load_dataset(directory: str | Path) -> CategorizedDataset:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("format") != DATASET_FORMAT or manifest.get("version") != DATASET_VERSION:
        raise CategoryError(f"unsupported dataset format {manifest.get('format')} v{manifest.get('version')}")
    ds = CategorizedDataset(CategoryScheme.from_dict(manifest["scheme"]))
    ds.sequences = {pid: list(seq) for pid, seq in manifest["sequences"].items()}
    for c, name in manifest["files"].items():
        rows = (directory / name).read_text().splitlines()[1:]
        bucket = []
        for row in rows:
            pid, start, *vals = row.split(",")
            bucket.append(Window(np.array([float(x) for x in vals]), pid, int(start)))
        ds.buckets[int(c)] = bucket
    if ds.content_hash() != manifest["content_hash"]:
        raise CategoryError("dataset content hash mismatch")
    return ds
