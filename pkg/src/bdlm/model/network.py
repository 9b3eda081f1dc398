"""Forward pass and exact reverse-mode gradients for the frozen-transformer
classifier.

Pipeline: instance-normalize the raw window, slice it into overlapping
patches, project each patch to the model dimension, add the position table,
run pre-norm attention/FFN blocks with residual connections, layer-norm,
pool over patches and classify. Gradients are produced only for
trainable-tagged tensors; activations still backpropagate through frozen
weights.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from ..errors import InvalidConfig, OddDimension, ShapeMismatch
from ..signals import instance_normalize
from .config import ModelConfig

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def patchify(window: np.ndarray, patch_len: int, stride: int) -> np.ndarray:
    """Overlapping patches of the last axis: row i covers
    [i*stride, i*stride + patch_len)."""
    w = np.asarray(window, dtype=np.float64)
    if stride < 1:
        raise InvalidConfig(f"stride must be >= 1, got {stride}")
    if w.shape[-1] < patch_len:
        raise InvalidConfig(
            f"window length {w.shape[-1]} shorter than patch_len {patch_len}")
    view = np.lib.stride_tricks.sliding_window_view(w, patch_len, axis=-1)
    return np.ascontiguousarray(view[..., ::stride, :])


def sinusoidal_position_table(n_positions: int, d_model: int) -> np.ndarray:
    """Standard sin/cos position code: column 2k holds sin(w_k t), column
    2k+1 holds cos(w_k t), with w_k = 10000^(-2k/d) and zero-based t."""
    if d_model % 2 != 0:
        raise OddDimension(f"d_model must be even, got {d_model}")
    t = np.arange(n_positions, dtype=np.float64)[:, None]
    k = np.arange(d_model // 2, dtype=np.float64)
    omega = 10000.0 ** (-2.0 * k / d_model)
    table = np.empty((n_positions, d_model))
    table[:, 0::2] = np.sin(omega * t)
    table[:, 1::2] = np.cos(omega * t)
    return table


def value_embed(patches: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Per-patch projection to the model dimension (a length-patch_len
    convolution evaluated once per patch, i.e. a row-wise linear map)."""
    if patches.shape[-1] != kernel.shape[1]:
        raise ShapeMismatch(
            f"patch length {patches.shape[-1]} does not match kernel input {kernel.shape[1]}")
    if bias.shape != (kernel.shape[0],):
        raise ShapeMismatch(f"bias shape {bias.shape} does not match kernel output {kernel.shape[0]}")
    return patches @ kernel.T + bias


def gelu(u: np.ndarray) -> np.ndarray:
    return 0.5 * u * (1.0 + erf(u / _SQRT2))


def _gelu_grad(u: np.ndarray) -> np.ndarray:
    cdf = 0.5 * (1.0 + erf(u / _SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * u * u)
    return cdf + u * pdf


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float):
    """y = (x - E[x]) / sqrt(Var[x] + eps) * gamma + beta over the last axis.

    Returns (y, cache) where the cache feeds layer_norm_backward.
    """
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv
    return gamma * xhat + beta, (xhat, inv)


def layer_norm_backward(dy: np.ndarray, cache, gamma: np.ndarray):
    """Returns (dx, dgamma, dbeta); dgamma/dbeta are summed over all leading
    axes."""
    xhat, inv = cache
    reduce_axes = tuple(range(dy.ndim - 1))
    dgamma = (dy * xhat).sum(axis=reduce_axes)
    dbeta = dy.sum(axis=reduce_axes)
    dxhat = dy * gamma
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    return dx, dgamma, dbeta


def cross_entropy(logits: np.ndarray, onehot: np.ndarray) -> float:
    """Mean categorical cross-entropy via log-sum-exp."""
    if logits.shape != onehot.shape:
        raise ShapeMismatch(f"logits {logits.shape} vs labels {onehot.shape}")
    m = logits.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
    picked = (logits * onehot).sum(axis=1)
    return float(np.mean(lse - picked))


def _split_heads(x: np.ndarray, n_heads: int) -> np.ndarray:
    b, p, d = x.shape
    return x.reshape(b, p, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, p, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, p, h * dh)


def _attention_forward(a, layer, lora, scale, n_heads, want_cache):
    """a: (B,P,d) LN output. Returns (out, cache)."""
    q = a @ layer["wq"].T + layer["bq"]
    k = a @ layer["wk"].T + layer["bk"]
    v = a @ layer["wv"].T + layer["bv"]
    qa = va = None
    if lora is not None and "q" in lora:
        aq, bq = lora["q"]
        qa = a @ aq.T
        q = q + scale * (qa @ bq.T)
    if lora is not None and "v" in lora:
        av, bv_ = lora["v"]
        va = a @ av.T
        v = v + scale * (va @ bv_.T)
    qh = _split_heads(q, n_heads)
    kh = _split_heads(k, n_heads)
    vh = _split_heads(v, n_heads)
    inv_sqrt = 1.0 / np.sqrt(qh.shape[-1])
    att = softmax(qh @ kh.transpose(0, 1, 3, 2) * inv_sqrt)
    merged = _merge_heads(att @ vh)
    out = merged @ layer["wo"].T + layer["bo"]
    cache = (a, qa, va, qh, kh, vh, att, inv_sqrt) if want_cache else None
    return out, cache


def _attention_backward(dout, cache, layer, lora, scale, n_heads, grads, prefix):
    a, qa, va, qh, kh, vh, att, inv_sqrt = cache
    dmerged = dout @ layer["wo"]
    dctx = _split_heads(dmerged, n_heads)
    datt = dctx @ vh.transpose(0, 1, 3, 2)
    dvh = att.transpose(0, 1, 3, 2) @ dctx
    dscores = att * (datt - (datt * att).sum(axis=-1, keepdims=True))
    dqh = dscores @ kh * inv_sqrt
    dkh = dscores.transpose(0, 1, 3, 2) @ qh * inv_sqrt
    dq = _merge_heads(dqh)
    dk = _merge_heads(dkh)
    dv = _merge_heads(dvh)
    da = dq @ layer["wq"] + dk @ layer["wk"] + dv @ layer["wv"]
    if lora is not None and "q" in lora:
        aq, bq = lora["q"]
        grads[f"{prefix}.lora.q.b"] = scale * np.einsum("bpd,bpr->dr", dq, qa)
        dqa = scale * (dq @ bq)
        grads[f"{prefix}.lora.q.a"] = np.einsum("bpr,bpd->rd", dqa, a)
        da = da + dqa @ aq
    if lora is not None and "v" in lora:
        av, bv_ = lora["v"]
        grads[f"{prefix}.lora.v.b"] = scale * np.einsum("bpd,bpr->dr", dv, va)
        dva = scale * (dv @ bv_)
        grads[f"{prefix}.lora.v.a"] = np.einsum("bpr,bpd->rd", dva, a)
        da = da + dva @ av
    return da


def _layer_tensors(params, i):
    pre = f"layers.{i}"
    layer = {name: params[f"{pre}.attn.{name}"]
             for name in ("wq", "wk", "wv", "wo", "bq", "bk", "bv", "bo")}
    layer.update({
        "g1": params[f"{pre}.ln1.gamma"], "b1": params[f"{pre}.ln1.beta"],
        "g2": params[f"{pre}.ln2.gamma"], "b2": params[f"{pre}.ln2.beta"],
        "w1": params[f"{pre}.ffn.w1"], "fb1": params[f"{pre}.ffn.b1"],
        "w2": params[f"{pre}.ffn.w2"], "fb2": params[f"{pre}.ffn.b2"],
    })
    return layer


def _layer_lora(params, i, config):
    if config.lora is None:
        return None
    lora = {}
    for target in config.lora.targets:
        lora[target] = (params[f"layers.{i}.lora.{target}.a"],
                        params[f"layers.{i}.lora.{target}.b"])
    return lora


def _run(windows, params, config: ModelConfig, want_cache: bool):
    x = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    if x.shape[-1] != config.window_len:
        raise ShapeMismatch(
            f"window length {x.shape[-1]} does not match config {config.window_len}")
    z = instance_normalize(x)
    patches = patchify(z, config.patch_len, config.stride)
    h = value_embed(patches, params["embed.kernel"], params["embed.bias"])
    if params["pos.table"].shape != h.shape[1:]:
        raise ShapeMismatch(
            f"position table {params['pos.table'].shape} does not match patches {h.shape[1:]}")
    h = h + params["pos.table"]
    scale = config.lora.scale if config.lora is not None else 0.0
    caches = []
    for i in range(config.n_layers):
        layer = _layer_tensors(params, i)
        lora = _layer_lora(params, i, config)
        a, ln1_cache = layer_norm(h, layer["g1"], layer["b1"], config.ln_eps)
        attn_out, attn_cache = _attention_forward(a, layer, lora, scale,
                                                  config.n_heads, want_cache)
        h1 = h + attn_out
        b_, ln2_cache = layer_norm(h1, layer["g2"], layer["b2"], config.ln_eps)
        u = b_ @ layer["w1"].T + layer["fb1"]
        g = gelu(u)
        h = h1 + g @ layer["w2"].T + layer["fb2"]
        if want_cache:
            caches.append((ln1_cache, attn_cache, ln2_cache, b_, u, g))
    hf, lnf_cache = layer_norm(h, params["final_ln.gamma"], params["final_ln.beta"],
                               config.ln_eps)
    if config.pooling == "mean":
        pooled = hf.mean(axis=1)
    else:
        pooled = hf[:, -1, :]
    logits = pooled @ params["head.weight"].T + params["head.bias"]
    ctx = (patches, caches, lnf_cache, hf.shape, pooled) if want_cache else None
    return logits, pooled, ctx


def forward(windows, pset, config: ModelConfig, return_pooled: bool = False):
    """Class logits for one window (1-D input) or a batch (2-D input)."""
    logits, pooled, _ = _run(windows, pset.params, config, want_cache=False)
    single = np.asarray(windows).ndim == 1
    if single:
        logits = logits[0]
        pooled = pooled[0]
    return (logits, pooled) if return_pooled else logits


def forward_backward(windows, onehot, pset, config: ModelConfig):
    """Loss, gradients for every trainable tensor, and the batch logits.

    Frozen tensors get no gradient entries at all.
    """
    params = pset.params
    onehot = np.asarray(onehot, dtype=np.float64)
    logits, _, ctx = _run(windows, params, config, want_cache=True)
    patches, caches, lnf_cache, hf_shape, _ = ctx
    loss = cross_entropy(logits, onehot)
    batch = logits.shape[0]
    n_patches = hf_shape[1]

    grads: dict[str, np.ndarray] = {}
    dlogits = (softmax(logits) - onehot) / batch
    pooled = ctx[4]
    grads["head.weight"] = dlogits.T @ pooled
    grads["head.bias"] = dlogits.sum(axis=0)
    dpooled = dlogits @ params["head.weight"]
    dhf = np.zeros(hf_shape)
    if config.pooling == "mean":
        dhf += dpooled[:, None, :] / n_patches
    else:
        dhf[:, -1, :] = dpooled
    dh, dgf, dbf = layer_norm_backward(dhf, lnf_cache, params["final_ln.gamma"])
    grads["final_ln.gamma"] = dgf
    grads["final_ln.beta"] = dbf

    scale = config.lora.scale if config.lora is not None else 0.0
    for i in reversed(range(config.n_layers)):
        layer = _layer_tensors(params, i)
        lora = _layer_lora(params, i, config)
        ln1_cache, attn_cache, ln2_cache, b_, u, g = caches[i]
        pre = f"layers.{i}"
        # ffn sublayer: h_out = h1 + gelu(LN2(h1) W1^T + b1) W2^T + b2
        dg = dh @ layer["w2"]
        du = dg * _gelu_grad(u)
        db_ = du @ layer["w1"]
        dh1_ln, dg2, db2 = layer_norm_backward(db_, ln2_cache, layer["g2"])
        grads[f"{pre}.ln2.gamma"] = dg2
        grads[f"{pre}.ln2.beta"] = db2
        dh1 = dh + dh1_ln
        # attention sublayer: h1 = h + attn(LN1(h))
        da = _attention_backward(dh1, attn_cache, layer, lora, scale,
                                 config.n_heads, grads, pre)
        dh_ln, dg1, db1 = layer_norm_backward(da, ln1_cache, layer["g1"])
        grads[f"{pre}.ln1.gamma"] = dg1
        grads[f"{pre}.ln1.beta"] = db1
        dh = dh1 + dh_ln

    grads["pos.table"] = dh.sum(axis=0)
    grads["embed.kernel"] = np.einsum("bpd,bpl->dl", dh, patches)
    grads["embed.bias"] = dh.sum(axis=(0, 1))

    assert set(grads) == set(pset.trainable), \
        f"gradient keys do not match trainable set: {set(grads) ^ set(pset.trainable)}"
    return loss, grads, logits
