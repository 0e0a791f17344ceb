"""Shared function approximators and their manual backward passes.

All agents and the behavior-cloning model share the same building blocks:
an item-embedding table with a frozen all-zero pad row, a bidirectional
GRU sequence encoder with a linear output projection, and (for the
distributional agents) a cosine quantile embedding.  Everything is plain
float64 numpy; parameters live in flat ``{name: ndarray}`` dicts so they
can be finite-difference checked, checkpointed, and updated uniformly.

Item id ``j`` maps to embedding row ``j + 1``; row 0 is the pad row used
to left-pad variable-length states and is gradient-masked so it stays
exactly zero.
"""

import math

import numpy as np

from . import kernels

PAD_ROW = 0

Params = dict


class DivergenceError(RuntimeError):
    """Raised when training produces non-finite losses or gradients."""


# ---------------------------------------------------------------------------
# parameter initialization
# ---------------------------------------------------------------------------

def init_encoder_params(rng, num_items, d=100, gru_layers=2):
    """Embedding table + BiGRU + output projection, fan-in uniform init.

    Per-direction hidden size is d/2 so the concatenated bidirectional
    state has dimension d regardless of the number of quantiles.
    """
    if d % 2 != 0:
        raise ValueError("state dimension d must be even")
    h = d // 2

    def uni(fan_in, shape):
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    params = {"emb": uni(d, (num_items + 1, d))}
    params["emb"][PAD_ROW] = 0.0
    d_in = d
    for layer in range(1, gru_layers + 1):
        for direction in ("f", "b"):
            pref = f"l{layer}{direction}"
            params[f"{pref}.w_x"] = uni(d_in, (d_in, 3 * h))
            params[f"{pref}.w_h"] = uni(h, (h, 3 * h))
            params[f"{pref}.b_x"] = np.zeros(3 * h)
            params[f"{pref}.b_h"] = np.zeros(3 * h)
        d_in = 2 * h
    params["proj.w"] = uni(d, (d, d))
    params["proj.b"] = np.zeros(d)
    return params


def init_quantile_head(rng, n_cosines, d):
    """Trainable cosine-embedding head for tau-conditioned values."""
    bound = 1.0 / math.sqrt(n_cosines)
    return {
        "quant.w": rng.uniform(-bound, bound, size=(n_cosines, d)),
        "quant.b": np.zeros(d),
    }


def init_qr_head(num_quantiles, d):
    """Per-quantile modulation vectors for the fixed-quantile agents.

    Initialized to ones so all quantiles start at the mean value; the
    asymmetric quantile loss differentiates them during training.
    """
    return {"qemb": np.ones((num_quantiles, d))}


def num_gru_layers(params):
    layers = 0
    while f"l{layers + 1}f.w_x" in params:
        layers += 1
    return layers


# ---------------------------------------------------------------------------
# state encoding
# ---------------------------------------------------------------------------

def pad_rows(states, min_len=1):
    """Left-pad item-id lists into an (N, T) array of embedding rows.

    Real items become row id+1; pads are row 0.  T is the longest state
    in the batch (at least ``min_len`` so empty batches still encode).
    """
    t_len = max(min_len, max((len(s) for s in states), default=0))
    rows = np.zeros((len(states), t_len), dtype=np.int64)
    for i, state in enumerate(states):
        if len(state) > t_len:
            raise ValueError(f"state longer than pad width: {len(state)}")
        for j, item in enumerate(state):
            rows[i, t_len - len(state) + j] = item + 1
    return rows


def encode_forward(params, rows):
    """Encode padded row batches into state embeddings.

    Returns ``(s, cache)`` with s of shape (N, d); the cache feeds
    :func:`encode_backward`.
    """
    emb = params["emb"]
    if rows.max(initial=0) >= emb.shape[0]:
        raise ValueError("item id out of range for embedding table")
    n, _ = rows.shape
    mask = (rows != PAD_ROW).astype(np.float64)
    x = emb[rows]
    layers = num_gru_layers(params)
    layer_caches = []
    inp = x
    h_last = None
    for layer in range(1, layers + 1):
        dir_caches = []
        outs = []
        lasts = []
        for direction in ("f", "b"):
            pref = f"l{layer}{direction}"
            if direction == "b":
                seq = np.ascontiguousarray(inp[:, ::-1])
                msk = np.ascontiguousarray(mask[:, ::-1])
            else:
                seq = np.ascontiguousarray(inp)
                msk = np.ascontiguousarray(mask)
            d_in = seq.shape[2]
            xp = seq.reshape(-1, d_in) @ params[f"{pref}.w_x"] + params[f"{pref}.b_x"]
            xp = np.ascontiguousarray(xp.reshape(n, seq.shape[1], -1))
            out, last, kcache = kernels.gru_layer_forward(
                xp, params[f"{pref}.w_h"], params[f"{pref}.b_h"], msk)
            dir_caches.append((pref, seq, msk, kcache))
            outs.append(out if direction == "f" else out[:, ::-1])
            lasts.append(last)
        inp = np.concatenate(outs, axis=2)
        h_last = np.concatenate(lasts, axis=1)
        layer_caches.append(dir_caches)
    s = h_last @ params["proj.w"] + params["proj.b"]
    cache = {"rows": rows, "h_last": h_last, "layers": layer_caches}
    return s, cache


def encode_backward(params, cache, ds):
    """Gradients of a loss w.r.t. all encoder parameters given ds = dL/ds.

    The pad embedding row is gradient-masked to zero.
    """
    grads = {}
    h_last = cache["h_last"]
    grads["proj.w"] = h_last.T @ ds
    grads["proj.b"] = ds.sum(axis=0)
    dh_last = ds @ params["proj.w"].T

    n = ds.shape[0]
    layer_caches = cache["layers"]
    h = dh_last.shape[1] // 2
    d_next = None  # gradient w.r.t. the per-step inputs of the layer above
    for layer_idx in range(len(layer_caches) - 1, -1, -1):
        top = layer_idx == len(layer_caches) - 1
        dir_caches = layer_caches[layer_idx]
        d_inp = None
        for d_idx, (pref, seq, msk, kcache) in enumerate(dir_caches):
            forward_dir = d_idx == 0
            if top:
                dlast = dh_last[:, :h] if forward_dir else dh_last[:, h:]
                dout = np.zeros((n, seq.shape[1], h))
            else:
                dlast = np.zeros((n, h))
                part = d_next[:, :, :h] if forward_dir else d_next[:, :, h:]
                dout = np.ascontiguousarray(part if forward_dir else part[:, ::-1])
            dxp, dw_h, db_h = kernels.gru_layer_backward(
                dout, np.ascontiguousarray(dlast), params[f"{pref}.w_h"],
                msk, kcache)
            t_len, d_in = seq.shape[1], seq.shape[2]
            flat_seq = seq.reshape(-1, d_in)
            flat_dxp = dxp.reshape(-1, dxp.shape[2])
            grads[f"{pref}.w_x"] = flat_seq.T @ flat_dxp
            grads[f"{pref}.b_x"] = flat_dxp.sum(axis=0)
            grads[f"{pref}.w_h"] = dw_h
            grads[f"{pref}.b_h"] = db_h
            dseq = (flat_dxp @ params[f"{pref}.w_x"].T).reshape(n, t_len, d_in)
            if not forward_dir:
                dseq = dseq[:, ::-1]
            d_inp = dseq if d_inp is None else d_inp + dseq
        d_next = d_inp
    demb = np.zeros_like(params["emb"])
    np.add.at(demb, cache["rows"], d_next)
    demb[PAD_ROW] = 0.0
    grads["emb"] = demb
    return grads


# ---------------------------------------------------------------------------
# quantile embedding and action values
# ---------------------------------------------------------------------------

def quantile_embedding(params, taus):
    """phi(tau): ReLU of a cosine-feature projection, one row per tau.

    phi_j(tau) = relu(sum_i cos(pi*i*tau) w_ij + b_j), i = 0..n-1; the
    i=0 feature is constant 1.  Returns (phi, cache), phi shape (K, d).
    """
    taus = np.asarray(taus, dtype=np.float64)
    if taus.ndim != 1 or taus.size == 0:
        raise ValueError("taus must be a non-empty 1-d array")
    if np.any(taus < 0.0) or np.any(taus > 1.0):
        raise ValueError("taus must lie in [0, 1]")
    n_cos = params["quant.w"].shape[0]
    feats = np.cos(np.pi * np.outer(taus, np.arange(n_cos)))
    pre = feats @ params["quant.w"] + params["quant.b"]
    phi = np.maximum(pre, 0.0)
    return phi, (feats, pre > 0.0)


def quantile_embedding_backward(params, cache, dphi):
    feats, active = cache
    dpre = dphi * active
    return {"quant.w": feats.T @ dpre, "quant.b": dpre.sum(axis=0)}


def q_values(s, taus, params):
    """Per-quantile values for every catalog item from one state embedding.

    Row k of the (K, |I|) result is I @ (s * phi(tau_k)); the pad row is
    excluded from the catalog axis.
    """
    s = np.asarray(s, dtype=np.float64)
    phi, _ = quantile_embedding(params, taus)
    s_tau = s[None, :] * phi
    return s_tau @ params["emb"][1:].T


# ---------------------------------------------------------------------------
# softmax over the catalog
# ---------------------------------------------------------------------------

def catalog_log_softmax(s, emb):
    """Log-probabilities over real items from state embeddings.

    logits are s . i_j for every catalog row j (pad excluded); stable
    log-softmax along the item axis.  Returns (log_p, logits).
    """
    logits = s @ emb[1:].T
    shift = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shift).sum(axis=1, keepdims=True))
    return shift - log_z, logits


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

class AdamState:
    """First/second moment accumulators, keyed like the parameter dict."""

    def __init__(self, params):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One in-place Adam update with bias correction.

    Raises :class:`DivergenceError` naming the offending array when a
    gradient is non-finite.  Parameters without a gradient entry are left
    untouched (used to freeze sub-nets).
    """
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient for parameter {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        params[name] -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return params, state


def clone_params(params):
    return {k: v.copy() for k, v in params.items()}


def flat_norm(grads):
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
