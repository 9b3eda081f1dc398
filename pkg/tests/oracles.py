"""Independent brute-force reference implementations used only by tests.

Everything here is written as a direct transcription of the defining formulas
(naive DFT matrix, plain sums, per-element loops) with no code shared with
the package, so agreement is evidence rather than tautology.
"""

import math

import numpy as np

UNDERFLOW = 1e-30


def naive_dft(x):
    """O(N^2) DFT by explicit matrix product."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.size
    k = np.arange(n)
    w = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return w @ x


def naive_dft_matrix(n, k_rows=None):
    rows = n if k_rows is None else k_rows
    k = np.arange(rows)[:, None]
    j = np.arange(n)[None, :]
    return np.exp(-2j * np.pi * k * j / n)


def oracle_time_features(x):
    """Table of 12 time statistics, transcribed sum by sum."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    p1 = np.sum(x) / n
    p2 = math.sqrt(np.sum((x - p1) ** 2) / (n - 1))
    p3 = (np.sum(np.sqrt(np.abs(x))) / n) ** 2
    p4 = np.sum(np.abs(x)) / n
    p5 = np.max(np.abs(x))
    p6 = np.sum(x ** 3) / n
    p7 = np.sum(x ** 4) / n
    p8 = np.sum(x ** 2) / n
    p9 = p7 / (p8 ** 2) if abs(p8 ** 2) >= UNDERFLOW else math.nan
    p10 = p5 / p2 if abs(p2) >= UNDERFLOW else math.nan
    p11 = p2 / p4 if abs(p4) >= UNDERFLOW else math.nan
    p12 = p5 / p4 if abs(p4) >= UNDERFLOW else math.nan
    if abs(p6) < UNDERFLOW:
        p9 = math.nan
    if abs(p2) < UNDERFLOW:
        p11 = math.nan
    return np.array([p1, p2, p3, p4, p5, p6, p7, p8, p9, p10, p11, p12])


def oracle_frequency_features(s, f):
    """Table of 12 spectral statistics, transcribed sum by sum."""
    s = np.asarray(s, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    k = len(s)
    total = np.sum(s)
    p13 = total / k
    p14 = np.sum((s - p13) ** 2) / (k - 1)
    p15 = np.sum((s - p13) ** 3) / (k * p14 ** 1.5) if abs(k * p14 ** 1.5) >= UNDERFLOW else math.nan
    p16 = np.sum((s - p13) ** 4) / (k * p14 ** 2) if abs(k * p14 ** 2) >= UNDERFLOW else math.nan
    if abs(total) < UNDERFLOW:
        rest = [math.nan] * 8
        return np.array([p13, p14, p15, p16] + rest)
    p17 = np.sum(f * s) / total
    p18 = math.sqrt(np.sum((f - p17) ** 2 * s) / (k * total))
    p19 = math.sqrt(np.sum(f ** 2 * s) / total)
    sf2 = np.sum(f ** 2 * s)
    sf4 = np.sum(f ** 4 * s)
    p20 = math.sqrt(sf4 / sf2) if abs(sf2) >= UNDERFLOW else math.nan
    den21 = math.sqrt(total * sf4)
    p21 = sf2 / den21 if abs(den21) >= UNDERFLOW else math.nan
    p22 = p18 / p17 if abs(p17) >= UNDERFLOW else math.nan
    p23 = np.sum((f - p17) ** 3 * s) / (k * p18 ** 3) if abs(k * p18 ** 3) >= UNDERFLOW else math.nan
    p24 = np.sum((f - p17) ** 4 * s) / (k * p18 ** 4) if abs(k * p18 ** 4) >= UNDERFLOW else math.nan
    return np.array([p13, p14, p15, p16, p17, p18, p19, p20, p21, p22, p23, p24])


def oracle_quantize_roundtrip(w, block_size=64):
    """Blockwise absmax int4 quantize/dequantize, looped per block.

    Returns (reconstructed, per-element bound absmax/7 broadcast per block).
    """
    flat = np.asarray(w, dtype=np.float64).ravel()
    recon = np.empty_like(flat)
    bound = np.empty_like(flat)
    for lo in range(0, flat.size, block_size):
        block = flat[lo:lo + block_size]
        absmax = np.max(np.abs(block))
        if absmax == 0:
            recon[lo:lo + block_size] = 0.0
            bound[lo:lo + block_size] = 0.0
            continue
        codes = np.clip(np.rint(block * 7.0 / absmax), -7, 7)
        recon[lo:lo + block_size] = codes * absmax / 7.0
        bound[lo:lo + block_size] = absmax / 7.0
    return recon.reshape(np.shape(w)), bound.reshape(np.shape(w))


def _oracle_layer_norm(v, gamma, beta, eps):
    mu = float(np.mean(v))
    var = float(np.mean((v - mu) ** 2))
    return gamma * ((v - mu) / math.sqrt(var + eps)) + beta


def _oracle_gelu(u):
    return np.array([0.5 * ui * (1.0 + math.erf(ui / math.sqrt(2.0))) for ui in u])


def oracle_forward(window, params, config):
    """Independent single-window forward pass with explicit loops."""
    x = np.asarray(window, dtype=np.float64)
    mu = float(np.mean(x))
    var = float(np.mean((x - mu) ** 2))
    z = (x - mu) / math.sqrt(var + 1e-12)

    n_patches = (config.window_len - config.patch_len) // config.stride + 1
    h = np.empty((n_patches, config.d_model))
    for i in range(n_patches):
        patch = z[i * config.stride:i * config.stride + config.patch_len]
        h[i] = params["embed.kernel"] @ patch + params["embed.bias"]
        h[i] += params["pos.table"][i]

    dh = config.d_model // config.n_heads
    scale = config.lora.scale if config.lora is not None else 0.0
    for li in range(config.n_layers):
        pre = f"layers.{li}"
        a = np.stack([_oracle_layer_norm(h[t], params[f"{pre}.ln1.gamma"],
                                         params[f"{pre}.ln1.beta"], config.ln_eps)
                      for t in range(n_patches)])
        q = a @ params[f"{pre}.attn.wq"].T + params[f"{pre}.attn.bq"]
        k = a @ params[f"{pre}.attn.wk"].T + params[f"{pre}.attn.bk"]
        v = a @ params[f"{pre}.attn.wv"].T + params[f"{pre}.attn.bv"]
        if config.lora is not None and "q" in config.lora.targets:
            q = q + scale * (a @ params[f"{pre}.lora.q.a"].T) @ params[f"{pre}.lora.q.b"].T
        if config.lora is not None and "v" in config.lora.targets:
            v = v + scale * (a @ params[f"{pre}.lora.v.a"].T) @ params[f"{pre}.lora.v.b"].T
        ctx = np.zeros((n_patches, config.d_model))
        for head in range(config.n_heads):
            sl = slice(head * dh, (head + 1) * dh)
            qs, ks, vs = q[:, sl], k[:, sl], v[:, sl]
            for t in range(n_patches):
                scores = np.array([float(qs[t] @ ks[u]) / math.sqrt(dh)
                                   for u in range(n_patches)])
                scores = scores - scores.max()
                weights = np.exp(scores)
                weights = weights / weights.sum()
                ctx[t, sl] = sum(weights[u] * vs[u] for u in range(n_patches))
        h = h + ctx @ params[f"{pre}.attn.wo"].T + params[f"{pre}.attn.bo"]
        b = np.stack([_oracle_layer_norm(h[t], params[f"{pre}.ln2.gamma"],
                                         params[f"{pre}.ln2.beta"], config.ln_eps)
                      for t in range(n_patches)])
        u1 = b @ params[f"{pre}.ffn.w1"].T + params[f"{pre}.ffn.b1"]
        g = np.stack([_oracle_gelu(u1[t]) for t in range(n_patches)])
        h = h + g @ params[f"{pre}.ffn.w2"].T + params[f"{pre}.ffn.b2"]

    hf = np.stack([_oracle_layer_norm(h[t], params["final_ln.gamma"],
                                      params["final_ln.beta"], config.ln_eps)
                   for t in range(n_patches)])
    pooled = hf.mean(axis=0) if config.pooling == "mean" else hf[-1]
    return params["head.weight"] @ pooled + params["head.bias"]


def oracle_cross_entropy(logits, onehot):
    """Direct -(1/N) sum y log softmax."""
    logits = np.asarray(logits, dtype=np.float64)
    total = 0.0
    for row, y in zip(logits, onehot):
        e = np.exp(row - row.max())
        p = e / e.sum()
        total -= float(y @ np.log(p))
    return total / logits.shape[0]


def finite_difference_grad(loss_fn, array, h=1e-4):
    """Central differences w.r.t. every element of array (mutated in place)."""
    grad = np.empty_like(array)
    flat = array.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        lp = loss_fn()
        flat[i] = orig - h
        lm = loss_fn()
        flat[i] = orig
        gflat[i] = (lp - lm) / (2.0 * h)
    return grad
