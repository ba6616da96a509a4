"""Text serialization of forecaster params and the per-category model store."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..categorize import CategoryScheme
from .model import ForecasterConfig, ForecasterConfigError, ForecasterParams, forward

PARAMS_FORMAT = "catft-forecaster"
PARAMS_VERSION = 1
STORE_FORMAT = "catft-model-store"
STORE_VERSION = 1


class FormatError(ValueError):
    pass


class MissingModelError(KeyError):
    """No trained model for the requested category."""

    def __init__(self, category: int):
        super().__init__(category)
        self.category = category

    def __str__(self) -> str:
        return f"no model for category {self.category} (unseen in training data)"


def params_to_dict(params: ForecasterParams) -> dict:
    return {
        "format": PARAMS_FORMAT,
        "version": PARAMS_VERSION,
        "config": params.config.to_dict(),
        "meta": params.meta,
        "tensors": {
            name: {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
            for name, arr in params.tensors.items()
        },
    }


def params_from_dict(doc: dict) -> ForecasterParams:
    if doc.get("format") != PARAMS_FORMAT:
        raise FormatError(f"not a forecaster params document: {doc.get('format')!r}")
    if doc.get("version") != PARAMS_VERSION:
        raise FormatError(f"params version {doc.get('version')} != supported {PARAMS_VERSION}")
    cfg = ForecasterConfig.from_dict(doc["config"])
    tensors = {}
    for name, entry in doc["tensors"].items():
        shape = tuple(entry["shape"])
        data = np.array(entry["data"], dtype=np.float64)
        if int(np.prod(shape)) != data.size:
            raise FormatError(f"{name}: shape {shape} does not match {data.size} stored values")
        tensors[name] = data.reshape(shape)
    params = ForecasterParams(cfg, tensors, doc.get("meta", {}))
    try:
        params.validate()
    except ForecasterConfigError as exc:
        raise FormatError(str(exc)) from None
    return params


def save(params: ForecasterParams, path: str | Path) -> None:
    # json floats use repr, which round-trips float64 exactly
    Path(path).write_text(json.dumps(params_to_dict(params)))


def load(path: str | Path) -> ForecasterParams:
    return params_from_dict(json.loads(Path(path).read_text()))


def naive_baseline(values: Sequence[float]) -> float:
    return float(values[-1])


@dataclass
class ModelStore:
    scheme: CategoryScheme
    config: ForecasterConfig
    value_scale: float = 1.0
    models: dict[int, ForecasterParams] = field(default_factory=dict)

    def __contains__(self, category: int) -> bool:
        return category in self.models

    @property
    def empty_categories(self) -> list[int]:
        return [c for c in range(self.scheme.size) if c not in self.models]

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.config.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def save(self, directory: str | Path) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for c, params in sorted(self.models.items()):
            save(params, directory / f"model_{c:04d}.json")
        manifest = {
            "format": STORE_FORMAT,
            "version": STORE_VERSION,
            "scheme": self.scheme.to_dict(),
            "config": self.config.to_dict(),
            "config_hash": self.config_hash(),
            "value_scale": self.value_scale,
            "categories": {
                str(c): {"file": f"model_{c:04d}.json",
                         "sample_count": p.meta.get("sample_count"),
                         "final_loss": p.meta.get("final_loss")}
                for c, p in sorted(self.models.items())
            },
            "empty_categories": self.empty_categories,
        }
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
        return directory

    @classmethod
    def load(cls, directory: str | Path) -> "ModelStore":
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        if manifest.get("format") != STORE_FORMAT or manifest.get("version") != STORE_VERSION:
            raise FormatError(f"unsupported model store {manifest.get('format')} v{manifest.get('version')}")
        store = cls(CategoryScheme.from_dict(manifest["scheme"]),
                    ForecasterConfig.from_dict(manifest["config"]),
                    float(manifest["value_scale"]))
        for c, entry in manifest["categories"].items():
            store.models[int(c)] = load(directory / entry["file"])
        return store


def predict_step(store: ModelStore, category: int, values: Sequence[float]) -> float:
    """Next volatility value from the model of ``category``, in original units."""
    params = store.models.get(category)
    if params is None:
        raise MissingModelError(category)
    scaled = np.asarray(values, dtype=np.float64) / store.value_scale
    return forward(params, scaled) * store.value_scale
