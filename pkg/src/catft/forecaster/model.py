"""Compact single-variable temporal fusion transformer ("TFT-lite") in numpy.

Pipeline for a batch of (value, position) sequences:

    affine embedding -> stacked LSTM encoder -> GLU skip + LayerNorm
    -> multi-head attention (final-step query) -> GLU skip + LayerNorm
    -> gated residual network -> affine head

The variable-selection and static-enrichment stacks of the full architecture are
absent: there is one observed variable and no static covariates.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import layers as L


class ForecasterConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ForecasterConfig:
    input_len: int = 7
    output_len: int = 1
    hidden_size: int = 70
    recurrent_layers: int = 4
    attention_heads: int = 4
    epochs: int = 7
    learning_rate: float = 1e-3
    batch_size: int = 32
    loss: str = "mse"
    quantiles: tuple[float, ...] = (0.1, 0.5, 0.9)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "quantiles", tuple(float(q) for q in self.quantiles))
        if self.input_len < 1 or self.output_len != 1:
            raise ForecasterConfigError("input_len must be >= 1 and output_len must be 1")
        if self.hidden_size < 1 or self.recurrent_layers < 1:
            raise ForecasterConfigError("hidden_size and recurrent_layers must be positive")
        if self.attention_heads < 1 or self.hidden_size // self.attention_heads < 1:
            raise ForecasterConfigError(
                f"hidden_size {self.hidden_size} too small for {self.attention_heads} heads"
            )
        if self.loss not in ("mse", "quantile"):
            raise ForecasterConfigError(f"unknown loss {self.loss!r}")
        if self.loss == "quantile" and (not self.quantiles or 0.5 not in self.quantiles
                                        or any(not 0 < q < 1 for q in self.quantiles)):
            raise ForecasterConfigError("quantile loss needs levels in (0, 1) including 0.5")
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate < 0:
            raise ForecasterConfigError("epochs >= 0, batch_size >= 1, learning_rate >= 0 required")

    @property
    def head_dim(self) -> int:
        # 70 hidden units over 4 heads: each head gets 17, projected back to 70
        return self.hidden_size // self.attention_heads

    @property
    def n_outputs(self) -> int:
        return len(self.quantiles) if self.loss == "quantile" else 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["quantiles"] = list(self.quantiles)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ForecasterConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})

    def with_(self, **changes) -> "ForecasterConfig":
        return replace(self, **changes)


def param_shapes(cfg: ForecasterConfig) -> dict[str, tuple[int, ...]]:
    H = cfg.hidden_size
    A = cfg.head_dim * cfg.attention_heads
    shapes: dict[str, tuple[int, ...]] = {"emb_W": (2, H), "emb_b": (H,)}
    for layer in range(cfg.recurrent_layers):
        shapes[f"lstm{layer}_Wx"] = (H, 4 * H)
        shapes[f"lstm{layer}_Wh"] = (H, 4 * H)
        shapes[f"lstm{layer}_b"] = (4 * H,)
    shapes.update({
        "enc_glu_W": (H, 2 * H), "enc_glu_b": (2 * H,),
        "enc_ln_g": (H,), "enc_ln_b": (H,),
        "att_Wq": (H, A), "att_bq": (A,),
        "att_Wk": (H, A), "att_bk": (A,),
        "att_Wv": (H, A), "att_bv": (A,),
        "att_Wo": (A, H), "att_bo": (H,),
        "att_glu_W": (H, 2 * H), "att_glu_b": (2 * H,),
        "att_ln_g": (H,), "att_ln_b": (H,),
        "grn_W2": (H, H), "grn_b2": (H,),
        "grn_W1": (H, H), "grn_b1": (H,),
        "grn_glu_W": (H, 2 * H), "grn_glu_b": (2 * H,),
        "grn_ln_g": (H,), "grn_ln_b": (H,),
        "out_W": (H, cfg.n_outputs), "out_b": (cfg.n_outputs,),
    })
    return shapes


def _is_gain(name: str) -> bool:
    return name.endswith("_ln_g")


def _is_bias(name: str) -> bool:
    return name.split("_")[-1].startswith("b")


@dataclass
class ForecasterParams:
    config: ForecasterConfig
    tensors: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def copy(self, dtype=None) -> "ForecasterParams":
        return ForecasterParams(
            self.config,
            {k: v.astype(dtype or v.dtype, copy=True) for k, v in self.tensors.items()},
            dict(self.meta),
        )

    def validate(self) -> None:
        expected = param_shapes(self.config)
        if set(expected) != set(self.tensors):
            missing = set(expected) ^ set(self.tensors)
            raise ForecasterConfigError(f"parameter set mismatch: {sorted(missing)}")
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise ForecasterConfigError(f"{name}: shape {self.tensors[name].shape} != {shape}")
            if not np.all(np.isfinite(self.tensors[name])):
                raise ForecasterConfigError(f"{name}: non-finite weights")

    def n_parameters(self) -> int:
        return sum(v.size for v in self.tensors.values())

    def equals(self, other: "ForecasterParams") -> bool:
        return (self.config == other.config and self.tensors.keys() == other.tensors.keys()
                and all(np.array_equal(self.tensors[k], other.tensors[k]) for k in self.tensors))


def init(cfg: ForecasterConfig) -> ForecasterParams:
    """Weights uniform in +-1/sqrt(fan_in), biases zero, LayerNorm gains one."""
    rng = np.random.default_rng(cfg.seed)
    tensors = {}
    for name, shape in param_shapes(cfg).items():
        if _is_gain(name):
            tensors[name] = np.ones(shape)
        elif _is_bias(name):
            tensors[name] = np.zeros(shape)
        else:
            bound = 1.0 / np.sqrt(shape[0])
            tensors[name] = rng.uniform(-bound, bound, size=shape)
    return ForecasterParams(cfg, tensors)


def zeros_like_params(params: ForecasterParams) -> ForecasterParams:
    return ForecasterParams(params.config, {k: np.zeros_like(v) for k, v in params.tensors.items()})


def _inputs(values, positions, cfg: ForecasterConfig, dtype=np.float64) -> np.ndarray:
    x = np.asarray(values, dtype=dtype)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[-1] != cfg.input_len:
        raise ValueError(f"input length {x.shape[-1]} != configured input_len {cfg.input_len}")
    if positions is None:
        positions = np.arange(1, cfg.input_len + 1)
    p = np.broadcast_to(np.asarray(positions, dtype=dtype), x.shape)
    # positions enter scaled to (0, 1]
    return np.stack([x, p / cfg.input_len], axis=-1)


def forward_batch(params: ForecasterParams, values, positions=None, keep_cache: bool = False):
    """Raw network outputs of shape (B, n_outputs)."""
    cfg = params.config
    P = params.tensors
    x = _inputs(values, positions, cfg, P["emb_W"].dtype)
    caches = {}

    e, _ = L.linear_forward(x, P["emb_W"], P["emb_b"])
    caches["emb"] = x

    seq = e
    for layer in range(cfg.recurrent_layers):
        seq, caches[f"lstm{layer}"] = L.lstm_forward(
            seq, P[f"lstm{layer}_Wx"], P[f"lstm{layer}_Wh"], P[f"lstm{layer}_b"])

    g1, caches["enc_glu"] = L.glu_forward(seq, P["enc_glu_W"], P["enc_glu_b"])
    a, caches["enc_ln"] = L.layernorm_forward(e + g1, P["enc_ln_g"], P["enc_ln_b"])

    ctx, caches["att"] = L.attention_last_forward(
        a, P["att_Wq"], P["att_bq"], P["att_Wk"], P["att_bk"], P["att_Wv"], P["att_bv"],
        cfg.attention_heads)
    att, caches["att_o"] = L.linear_forward(ctx, P["att_Wo"], P["att_bo"])
    g2, caches["att_glu"] = L.glu_forward(att, P["att_glu_W"], P["att_glu_b"])
    m, caches["att_ln"] = L.layernorm_forward(a[:, -1] + g2, P["att_ln_g"], P["att_ln_b"])

    z2, caches["grn_2"] = L.linear_forward(m, P["grn_W2"], P["grn_b2"])
    eta2, caches["grn_elu"] = L.elu_forward(z2)
    eta1, caches["grn_1"] = L.linear_forward(eta2, P["grn_W1"], P["grn_b1"])
    g3, caches["grn_glu"] = L.glu_forward(eta1, P["grn_glu_W"], P["grn_glu_b"])
    r, caches["grn_ln"] = L.layernorm_forward(m + g3, P["grn_ln_g"], P["grn_ln_b"])

    y, caches["out"] = L.linear_forward(r, P["out_W"], P["out_b"])
    if keep_cache:
        return y, caches
    return y


def backward_batch(params: ForecasterParams, caches: dict, dy: np.ndarray) -> dict[str, np.ndarray]:
    cfg = params.config
    P = params.tensors
    G: dict[str, np.ndarray] = {}

    dr, G["out_W"], G["out_b"] = L.linear_backward(dy, caches["out"], P["out_W"])

    ds, G["grn_ln_g"], G["grn_ln_b"] = L.layernorm_backward(dr, caches["grn_ln"], P["grn_ln_g"])
    dm = ds.copy()
    deta1, G["grn_glu_W"], G["grn_glu_b"] = L.glu_backward(ds, caches["grn_glu"], P["grn_glu_W"])
    deta2, G["grn_W1"], G["grn_b1"] = L.linear_backward(deta1, caches["grn_1"], P["grn_W1"])
    dz2 = L.elu_backward(deta2, caches["grn_elu"])
    dm_grn, G["grn_W2"], G["grn_b2"] = L.linear_backward(dz2, caches["grn_2"], P["grn_W2"])
    dm += dm_grn

    ds2, G["att_ln_g"], G["att_ln_b"] = L.layernorm_backward(dm, caches["att_ln"], P["att_ln_g"])
    datt, G["att_glu_W"], G["att_glu_b"] = L.glu_backward(ds2, caches["att_glu"], P["att_glu_W"])
    dctx, G["att_Wo"], G["att_bo"] = L.linear_backward(datt, caches["att_o"], P["att_Wo"])
    da, ag = L.attention_last_backward(dctx, caches["att"], P["att_Wq"], P["att_Wk"], P["att_Wv"])
    for key, val in ag.items():
        G[f"att_{key}"] = val
    da[:, -1] += ds2

    ds1, G["enc_ln_g"], G["enc_ln_b"] = L.layernorm_backward(da, caches["enc_ln"], P["enc_ln_g"])
    de = ds1.copy()
    dseq, G["enc_glu_W"], G["enc_glu_b"] = L.glu_backward(ds1, caches["enc_glu"], P["enc_glu_W"])

    for layer in reversed(range(cfg.recurrent_layers)):
        dseq, G[f"lstm{layer}_Wx"], G[f"lstm{layer}_Wh"], G[f"lstm{layer}_b"] = L.lstm_backward(
            dseq, caches[f"lstm{layer}"], P[f"lstm{layer}_Wx"], P[f"lstm{layer}_Wh"])
    de += dseq

    _, G["emb_W"], G["emb_b"] = L.linear_backward(de, caches["emb"], P["emb_W"])
    return G


def loss_and_grad(params: ForecasterParams, values, positions, targets, with_grad: bool = True):
    """Mean loss over the batch and, optionally, its gradient for every tensor."""
    cfg = params.config
    t = np.asarray(targets, dtype=params.tensors["emb_W"].dtype).reshape(-1, 1)
    y, caches = forward_batch(params, values, positions, keep_cache=True)
    B = y.shape[0]
    if cfg.loss == "mse":
        err = y - t
        loss = np.mean(err * err)
        dy = 2.0 * err / B
    else:
        q = np.asarray(cfg.quantiles)[None, :]
        diff = t - y
        loss = np.mean(np.maximum(q * diff, (q - 1.0) * diff))
        dy = np.where(diff > 0, -q, 1.0 - q) / y.size
    if not with_grad:
        return loss, None
    return loss, backward_batch(params, caches, dy)


def point_forecast(params: ForecasterParams, raw: np.ndarray) -> np.ndarray:
    """Point prediction from raw outputs: the scalar, or the median quantile."""
    if params.config.loss == "quantile":
        return raw[:, params.config.quantiles.index(0.5)]
    return raw[:, 0]


def forward(params: ForecasterParams, values: Sequence[float], positions: Sequence[float] | None = None) -> float:
    """Predicted next value for one input sequence."""
    for name, arr in params.tensors.items():
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"non-finite weights in {name}")
    out = float(point_forecast(params, forward_batch(params, values, positions))[0])
    return out


def predict_many(params: ForecasterParams, values: np.ndarray, positions=None) -> np.ndarray:
    return point_forecast(params, forward_batch(params, values, positions))
