"""Pure-numpy reference implementation of the GRU recurrence kernels.

The compiled backend (``_gru_cy``) mirrors these functions exactly; this
module is the fallback selected at import time when the extension is not
available, and the ground truth the extension is tested against.

Conventions shared by both backends:

* batches are padded to a common length T; ``mask`` is 1.0 on real steps
  and 0.0 on pads.  A masked step carries the hidden state through
  unchanged, so left-padded sequences start from h=0 at their first real
  step and right-side reads stay valid.
* the input projection ``xp = x @ w_x + b_x`` is precomputed by the
  caller as one large matmul; the kernel only runs the sequential part.
* gate layout along the last axis is ``[r | z | n]``.
"""

import numpy as np


def _sigmoid(x):
    out = np.empty_like(x)
    np.negative(x, out=out)
    np.exp(out, out=out)
    out += 1.0
    np.reciprocal(out, out=out)
    return out


def gru_layer_forward(xp, w_h, b_h, mask):
    """Run one GRU direction over a padded batch.

    Args:
        xp: (N, T, 3H) precomputed input projections, gate order r|z|n.
        w_h: (H, 3H) recurrent weights.
        b_h: (3H,) recurrent biases (kept separate from the input bias:
            the candidate-gate recurrent term is multiplied by r).
        mask: (N, T) float 0/1 pad mask.

    Returns:
        (out, h_last, cache) where out is (N, T, H) hidden states after
        every step, h_last is (N, H) the state after the final step, and
        cache holds per-step activations for the backward pass.
    """
    n, t_len, three_h = xp.shape
    h_dim = three_h // 3
    h = np.zeros((n, h_dim))
    out = np.empty((n, t_len, h_dim))
    cache_r = np.empty((n, t_len, h_dim))
    cache_z = np.empty((n, t_len, h_dim))
    cache_n = np.empty((n, t_len, h_dim))
    cache_hhn = np.empty((n, t_len, h_dim))
    cache_hprev = np.empty((n, t_len, h_dim))
    for t in range(t_len):
        m = mask[:, t:t + 1]
        hh = h @ w_h + b_h
        a = xp[:, t, :]
        r = _sigmoid(a[:, :h_dim] + hh[:, :h_dim])
        z = _sigmoid(a[:, h_dim:2 * h_dim] + hh[:, h_dim:2 * h_dim])
        hh_n = hh[:, 2 * h_dim:]
        c = np.tanh(a[:, 2 * h_dim:] + r * hh_n)
        cache_r[:, t] = r
        cache_z[:, t] = z
        cache_n[:, t] = c
        cache_hhn[:, t] = hh_n
        cache_hprev[:, t] = h
        h = m * ((1.0 - z) * c + z * h) + (1.0 - m) * h
        out[:, t] = h
    cache = {
        "r": cache_r,
        "z": cache_z,
        "n": cache_n,
        "hh_n": cache_hhn,
        "h_prev": cache_hprev,
    }
    return out, h, cache


def gru_layer_backward(dout, dh_last, w_h, mask, cache):
    """Backward pass matching :func:`gru_layer_forward`.

    Args:
        dout: (N, T, H) gradient w.r.t. every per-step output.
        dh_last: (N, H) extra gradient w.r.t. the final hidden state.
        w_h, mask, cache: as produced by the forward pass.

    Returns:
        (dxp, dw_h, db_h): gradients w.r.t. the input projections and the
        recurrent parameters.
    """
    r_all, z_all = cache["r"], cache["z"]
    n_all, hhn_all, hprev_all = cache["n"], cache["hh_n"], cache["h_prev"]
    n, t_len, h_dim = dout.shape
    dxp = np.zeros((n, t_len, 3 * h_dim))
    dw_h = np.zeros_like(w_h)
    db_h = np.zeros(3 * h_dim)
    dh = dh_last.copy()
    for t in range(t_len - 1, -1, -1):
        dh += dout[:, t]
        m = mask[:, t:t + 1]
        r, z = r_all[:, t], z_all[:, t]
        c, hh_n, h_prev = n_all[:, t], hhn_all[:, t], hprev_all[:, t]
        dh_new = m * dh
        dh_prev = (1.0 - m) * dh
        dn = dh_new * (1.0 - z)
        dz = dh_new * (h_prev - c)
        dh_prev += dh_new * z
        dpre_n = dn * (1.0 - c * c)
        dr = dpre_n * hh_n
        dhh_n = dpre_n * r
        dpre_r = dr * r * (1.0 - r)
        dpre_z = dz * z * (1.0 - z)
        dxp[:, t, :h_dim] = dpre_r
        dxp[:, t, h_dim:2 * h_dim] = dpre_z
        dxp[:, t, 2 * h_dim:] = dpre_n
        dhh = np.concatenate([dpre_r, dpre_z, dhh_n], axis=1)
        dh_prev += dhh @ w_h.T
        dw_h += h_prev.T @ dhh
        db_h += dhh.sum(axis=0)
        dh = dh_prev
    return dxp, dw_h, db_h
