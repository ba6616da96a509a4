"""Forward/backward pairs for the small set of layers the forecaster needs.

Every ``*_forward`` returns ``(out, cache)``; the matching ``*_backward`` takes the
upstream gradient and the cache and returns the input gradient plus parameter grads.
All arrays are float64 with the feature axis last.
"""

from __future__ import annotations

import numpy as np

LN_EPS = 1e-5


def sigmoid(x):
    # split form avoids overflow in exp for large |x|
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def linear_forward(x, W, b):
    return x @ W + b, x


def linear_backward(dy, x, W):
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    return dy @ W.T, x2.T @ dy2, dy2.sum(axis=0)


def glu_forward(x, W, b):
    """Gated linear unit: sigmoid(x Wg + bg) * (x Wv + bv), with W = [Wg | Wv]."""
    y = x @ W + b
    h = y.shape[-1] // 2
    gate = sigmoid(y[..., :h])
    lin = y[..., h:]
    return gate * lin, (x, gate, lin)


def glu_backward(dout, cache, W):
    x, gate, lin = cache
    dgate = dout * lin * gate * (1.0 - gate)
    dlin = dout * gate
    dy = np.concatenate([dgate, dlin], axis=-1)
    return linear_backward(dy, x, W)


def layernorm_forward(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv)


def layernorm_backward(dy, cache, g):
    xhat, inv = cache
    dg = (dy * xhat).reshape(-1, xhat.shape[-1]).sum(axis=0)
    db = dy.reshape(-1, dy.shape[-1]).sum(axis=0)
    dxhat = dy * g
    dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    return dx, dg, db


def elu_forward(x):
    neg = np.minimum(x, 0.0)
    return np.where(x > 0, x, np.expm1(neg)), x


def elu_backward(dy, x):
    return dy * np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))


def lstm_forward(u, Wx, Wh, b):
    """One LSTM layer over a (B, T, D) sequence, zero initial state; gates ordered i, f, g, o."""
    B, T, _ = u.shape
    H = Wh.shape[0]
    h = np.zeros((B, H), dtype=u.dtype)
    c = np.zeros((B, H), dtype=u.dtype)
    hs = np.empty((B, T, H), dtype=u.dtype)
    steps = []
    xw = u @ Wx + b
    for t in range(T):
        z = xw[:, t] + h @ Wh
        i = sigmoid(z[:, :H])
        f = sigmoid(z[:, H:2 * H])
        gg = np.tanh(z[:, 2 * H:3 * H])
        o = sigmoid(z[:, 3 * H:])
        c_prev, h_prev = c, h
        c = f * c_prev + i * gg
        tc = np.tanh(c)
        h = o * tc
        hs[:, t] = h
        steps.append((i, f, gg, o, c_prev, h_prev, tc))
    return hs, (u, steps)


def lstm_backward(dhs, cache, Wx, Wh):
    u, steps = cache
    B, T, _ = u.shape
    H = Wh.shape[0]
    dz_all = np.empty((B, T, 4 * H))
    dWh = np.zeros_like(Wh)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in reversed(range(T)):
        i, f, gg, o, c_prev, h_prev, tc = steps[t]
        dh = dhs[:, t] + dh_next
        do = dh * tc
        dc = dc_next + dh * o * (1.0 - tc * tc)
        di = dc * gg
        dg = dc * i
        df = dc * c_prev
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - gg * gg),
            do * o * (1.0 - o),
        ], axis=1)
        dz_all[:, t] = dz
        dWh += h_prev.T @ dz
        dh_next = dz @ Wh.T
        dc_next = dc * f
    du, dWx, db = linear_backward(dz_all, u, Wx)
    return du, dWx, dWh, db


def attention_last_forward(a, Wq, bq, Wk, bk, Wv, bv, heads):
    """Multi-head attention with the final step as the only query.

    The causal mask lets step t see steps <= t; for the final query that is every
    step, so no masking term appears here.
    """
    B, T, _ = a.shape
    A = Wq.shape[1]
    dh = A // heads
    q = (a[:, -1] @ Wq + bq).reshape(B, heads, dh)
    k = (a @ Wk + bk).reshape(B, T, heads, dh)
    v = (a @ Wv + bv).reshape(B, T, heads, dh)
    scale = 1.0 / np.sqrt(dh)
    s = np.einsum("bhd,bthd->bht", q, k) * scale
    s = s - s.max(axis=-1, keepdims=True)
    w = np.exp(s)
    w /= w.sum(axis=-1, keepdims=True)
    ctx = np.einsum("bht,bthd->bhd", w, v).reshape(B, A)
    return ctx, (a, q, k, v, w, scale, heads)


def attention_last_backward(dctx, cache, Wq, Wk, Wv):
    a, q, k, v, w, scale, heads = cache
    B, T, _ = a.shape
    dh = q.shape[-1]
    dctx = dctx.reshape(B, heads, dh)
    dw = np.einsum("bhd,bthd->bht", dctx, v)
    dv = np.einsum("bht,bhd->bthd", w, dctx)
    ds = w * (dw - (dw * w).sum(axis=-1, keepdims=True)) * scale
    dq = np.einsum("bht,bthd->bhd", ds, k).reshape(B, -1)
    dk = np.einsum("bht,bhd->bthd", ds, q)
    dk = dk.reshape(B, T, -1)
    dv = dv.reshape(B, T, -1)
    a_last = a[:, -1]
    da = dk @ Wk.T + dv @ Wv.T
    da[:, -1] += dq @ Wq.T
    a2 = a.reshape(-1, a.shape[-1])
    grads = {
        "Wq": a_last.T @ dq, "bq": dq.sum(axis=0),
        "Wk": a2.T @ dk.reshape(-1, dk.shape[-1]), "bk": dk.sum(axis=(0, 1)),
        "Wv": a2.T @ dv.reshape(-1, dv.shape[-1]), "bv": dv.sum(axis=(0, 1)),
    }
    return da, grads
