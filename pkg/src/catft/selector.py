"""Next-category selection with a Laplace-smoothed, online-updatable Markov chain."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .categorize import CategoryScheme, is_successor, successors

SELECTOR_FORMAT = "catft-markov-selector"
SELECTOR_VERSION = 1


class SuccessorLawError(ValueError):
    """A transition that is not one of the two legal successors."""


@dataclass
class TransitionModel:
    """Counts of (current category, new low bit) transitions.

    Only the two successors of a category can ever follow it, so a row needs two
    counts rather than 2**k.
    """

    scheme: CategoryScheme
    alpha: float = 1.0
    counts: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("smoothing alpha must be non-negative")
        if self.counts is None:
            self.counts = np.zeros((self.scheme.size, 2), dtype=np.int64)
        else:
            self.counts = np.asarray(self.counts, dtype=np.int64)
            if self.counts.shape != (self.scheme.size, 2):
                raise ValueError(f"count table shape {self.counts.shape} != {(self.scheme.size, 2)}")

    def probabilities(self, c: int) -> tuple[float, float]:
        n0, n1 = self.counts[c]
        total = n0 + n1 + 2 * self.alpha
        if total == 0:
            return 0.5, 0.5
        p0 = (n0 + self.alpha) / total
        return p0, 1.0 - p0

    def snapshot(self) -> "TransitionModel":
        return copy.deepcopy(self)


def _check(prev: int, nxt: int, scheme: CategoryScheme, where: str = "") -> None:
    if not is_successor(prev, nxt, scheme):
        raise SuccessorLawError(
            f"illegal transition {prev} -> {nxt}{where}; successors are {successors(prev, scheme)}"
        )


def fit(sequence: Sequence[int], scheme: CategoryScheme, alpha: float = 1.0) -> TransitionModel:
    model = TransitionModel(scheme, alpha)
    seq = np.asarray(sequence, dtype=np.int64)
    if len(seq) < 2:
        return model
    prev, nxt = seq[:-1], seq[1:]
    bad = ((2 * prev) % scheme.size != (nxt & ~1)) | (nxt < 0) | (nxt >= scheme.size)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        _check(int(prev[i]), int(nxt[i]), scheme, f" at position {i}")
    np.add.at(model.counts, (prev, nxt & 1), 1)
    return model


def update_online(model: TransitionModel, prev: int, nxt: int) -> TransitionModel:
    """Record one observed transition in place and return the model."""
    _check(prev, nxt, model.scheme)
    model.counts[prev, nxt & 1] += 1
    return model


def update_many(model: TransitionModel, sequence: Iterable[int]) -> TransitionModel:
    it = iter(sequence)
    try:
        prev = next(it)
    except StopIteration:
        return model
    for nxt in it:
        update_online(model, prev, nxt)
        prev = nxt
    return model


def predict_next(model: TransitionModel, c: int) -> tuple[int, float]:
    """Most likely successor and its probability; a 0.5 tie picks the bit-0 successor."""
    p0, p1 = model.probabilities(c)
    s0, s1 = successors(c, model.scheme)
    return (s1, p1) if p1 > p0 else (s0, p0)


def oracle_select(truth: int) -> int:
    return truth


def save_selector(model: TransitionModel, path: str | Path) -> None:
    doc = {
        "format": SELECTOR_FORMAT,
        "version": SELECTOR_VERSION,
        "scheme": model.scheme.to_dict(),
        "alpha": model.alpha,
        "counts": model.counts.tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True))


def load_selector(path: str | Path) -> TransitionModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != SELECTOR_FORMAT:
        raise ValueError(f"{path}: not a selector file")
    if doc.get("version") != SELECTOR_VERSION:
        raise ValueError(f"{path}: selector version {doc.get('version')} != {SELECTOR_VERSION}")
    return TransitionModel(CategoryScheme.from_dict(doc["scheme"]), float(doc["alpha"]), np.array(doc["counts"]))
