"""Batched word-level encoder: bidirectional LSTM + additive word attention.

Sequences are padded to a common length and masked; masked steps carry the
previous hidden/cell state through, so right-padded batches give the same
per-word states as unpadded encoding. Each sequence pools its word states
with a softmax word attention into one 2h vector, independently of every
other sequence. Forward passes cache what the hand-written backward needs.
"""

import numpy as np


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def pad_sequences(seqs, pad_id=0):
    """(ids, mask) arrays of shape (n, max_len) from ragged id lists."""
    n = len(seqs)
    width = max(len(s) for s in seqs)
    ids = np.full((n, width), pad_id, dtype=np.intp)
    mask = np.zeros((n, width))
    for row, seq in enumerate(seqs):
        ids[row, :len(seq)] = seq
        mask[row, :len(seq)] = 1.0
    return ids, mask


def lstm_direction(X, mask, W, R, b, reverse=False):
    """One LSTM direction over (n, L, e) inputs; returns (H, cache)."""
    n, L, _ = X.shape
    h = R.shape[1]
    order = range(L - 1, -1, -1) if reverse else range(L)
    H = np.zeros((n, L, h))
    gates_i = np.zeros((n, L, h))
    gates_f = np.zeros((n, L, h))
    gates_g = np.zeros((n, L, h))
    gates_o = np.zeros((n, L, h))
    tanh_c = np.zeros((n, L, h))
    h_prevs = np.zeros((n, L, h))
    c_prevs = np.zeros((n, L, h))
    h_prev = np.zeros((n, h))
    c_prev = np.zeros((n, h))
    for t in order:
        a = X[:, t] @ W.T + h_prev @ R.T + b
        i = _sigmoid(a[:, :h])
        f = _sigmoid(a[:, h:2 * h])
        g = np.tanh(a[:, 2 * h:3 * h])
        o = _sigmoid(a[:, 3 * h:])
        m = mask[:, t:t + 1]
        c = m * (f * c_prev + i * g) + (1.0 - m) * c_prev
        tc = np.tanh(c)
        h_cur = m * (o * tc) + (1.0 - m) * h_prev
        gates_i[:, t], gates_f[:, t], gates_g[:, t], gates_o[:, t] = i, f, g, o
        tanh_c[:, t] = tc
        h_prevs[:, t], c_prevs[:, t] = h_prev, c_prev
        H[:, t] = h_cur
        h_prev, c_prev = h_cur, c
    cache = (gates_i, gates_f, gates_g, gates_o, tanh_c, h_prevs, c_prevs)
    return H, cache


def lstm_direction_back(dH, X, mask, W, R, cache, reverse=False):
    """Backward of :func:`lstm_direction`; returns (dX, dW, dR, db)."""
    gates_i, gates_f, gates_g, gates_o, tanh_c, h_prevs, c_prevs = cache
    n, L, _ = X.shape
    h = R.shape[1]
    order = range(L) if reverse else range(L - 1, -1, -1)
    dX = np.zeros_like(X)
    dW = np.zeros_like(W)
    dR = np.zeros_like(R)
    db = np.zeros(4 * h)
    dh = np.zeros((n, h))
    dc = np.zeros((n, h))
    for t in order:
        i, f, g, o = gates_i[:, t], gates_f[:, t], gates_g[:, t], gates_o[:, t]
        tc = tanh_c[:, t]
        m = mask[:, t:t + 1]
        dht = dH[:, t] + dh
        dh_new = dht * m
        dh_carry = dht * (1.0 - m)
        do = dh_new * tc
        dct = dc + dh_new * o * (1.0 - tc * tc)
        dc_new = dct * m
        dc_carry = dct * (1.0 - m)
        di = dc_new * g
        df = dc_new * c_prevs[:, t]
        dg = dc_new * i
        da = np.concatenate([di * i * (1.0 - i), df * f * (1.0 - f),
                             dg * (1.0 - g * g), do * o * (1.0 - o)], axis=1)
        dW += da.T @ X[:, t]
        dR += da.T @ h_prevs[:, t]
        db += da.sum(axis=0)
        dX[:, t] = da @ W
        dh = dh_carry + da @ R
        dc = dc_carry + dc_new * f
    return dX, dW, dR, db


def encode_batch(seqs, embed, params, side, drop_mask=None):
    """Encode token-id sequences of one side into (n, 2h) vectors.

    ``params`` holds ``{side}_fwd_W/R/b``, ``{side}_bwd_W/R/b`` and the word
    attention ``{side}_attn_W/b/v``. ``drop_mask``, when given, multiplies the
    embedded inputs (training-time embedding dropout).
    """
    ids, mask = pad_sequences(seqs)
    X = embed[ids]
    if drop_mask is not None:
        X = X * drop_mask
    Hf, cache_f = lstm_direction(X, mask, params[f"{side}_fwd_W"],
                                 params[f"{side}_fwd_R"], params[f"{side}_fwd_b"])
    Hb, cache_b = lstm_direction(X, mask, params[f"{side}_bwd_W"],
                                 params[f"{side}_bwd_R"], params[f"{side}_bwd_b"],
                                 reverse=True)
    HS = np.concatenate([Hf, Hb], axis=2)  # (n, L, 2h)
    u = np.tanh(HS @ params[f"{side}_attn_W"].T + params[f"{side}_attn_b"])
    scores = u @ params[f"{side}_attn_v"]
    scores = np.where(mask > 0, scores, -np.inf)
    shifted = np.exp(scores - scores.max(axis=1, keepdims=True))
    alpha = shifted / shifted.sum(axis=1, keepdims=True)
    vectors = np.einsum("nl,nlh->nh", alpha, HS)
    cache = (ids, mask, X, drop_mask, cache_f, cache_b, HS, u, alpha)
    return vectors, cache


def encode_batch_back(dvectors, cache, embed_shape, params, side, grads):
    """Accumulate gradients for one side; returns the embedding gradient."""
    ids, mask, X, drop_mask, cache_f, cache_b, HS, u, alpha = cache
    h = params[f"{side}_fwd_R"].shape[1]
    Wa = params[f"{side}_attn_W"]
    va = params[f"{side}_attn_v"]

    dalpha = np.einsum("nh,nlh->nl", dvectors, HS)
    dHS = alpha[:, :, None] * dvectors[:, None, :]
    dscores = alpha * (dalpha - (alpha * dalpha).sum(axis=1, keepdims=True))
    du = dscores[:, :, None] * va
    dpre = du * (1.0 - u * u)
    grads[f"{side}_attn_W"] += np.einsum("nlk,nlh->kh", dpre, HS)
    grads[f"{side}_attn_b"] += dpre.sum(axis=(0, 1))
    grads[f"{side}_attn_v"] += np.einsum("nlk,nl->k", u, dscores)
    dHS += dpre @ Wa

    dXf, dWf, dRf, dbf = lstm_direction_back(
        dHS[:, :, :h], X, mask, params[f"{side}_fwd_W"],
        params[f"{side}_fwd_R"], cache_f)
    dXb, dWb, dRb, dbb = lstm_direction_back(
        dHS[:, :, h:], X, mask, params[f"{side}_bwd_W"],
        params[f"{side}_bwd_R"], cache_b, reverse=True)
    grads[f"{side}_fwd_W"] += dWf
    grads[f"{side}_fwd_R"] += dRf
    grads[f"{side}_fwd_b"] += dbf
    grads[f"{side}_bwd_W"] += dWb
    grads[f"{side}_bwd_R"] += dRb
    grads[f"{side}_bwd_b"] += dbb

    dX = dXf + dXb
    if drop_mask is not None:
        dX = dX * drop_mask
    dX = dX * mask[:, :, None]  # pad rows never reach the loss
    dE = np.zeros(embed_shape)
    np.add.at(dE, ids.ravel(), dX.reshape(-1, embed_shape[1]))
    return dE
