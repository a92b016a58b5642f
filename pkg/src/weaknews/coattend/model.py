"""Co-attention model: parameters, forward, hand-written gradients,
explanations, and binary persistence.

Both sides are encoded per sequence (no cross-sentence or cross-comment
recurrence), then fused:

    F   = tanh(C' Wl S)                     affinity, comments x sentences
    Hs  = tanh(Ws S + (Wc C) F)
    Hc  = tanh(Wc C + (Ws S) F')
    a_s = softmax(whs' Hs),  a_c = softmax(whc' Hc)
    s^  = S a_s,             c^  = C a_c
    p   = softmax(Wout [s^; c^] + bout)     classes ordered (real, fake)

Softmax denominators and the pooled vectors use exactly-rounded summation
(math.fsum), so reordering comments permutes a_c bit-exactly and leaves the
prediction unchanged. An article without comments runs against a learned
null-comment column with a_c = [1.0].

Ablation modes reuse the same machinery: ``no_comments`` fuses against the
null-comment column and classifies from s^ alone, ``no_news`` fuses a learned
null-sentence column and classifies from c^ alone, and ``no_coattention``
replaces the fusion with uniform averaging of S and C columns.
"""

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from ..corpus import tokenize
from . import encoder

MAGIC = b"DEFND1"
MODES = ("full", "no_comments", "no_news", "no_coattention")


@dataclass(frozen=True)
class CoAttendConfig:
    embed_dim: int = 32
    hidden_dim: int = 16
    attn_dim: int = 16
    max_sentences: int = 20
    max_comments: int = 30
    learning_rate: float = 1.0
    epochs: int = 30
    batch_size: int = 8
    seed: int = 0
    dropout: float = 0.0

    def __post_init__(self):
        for name in ("embed_dim", "hidden_dim", "attn_dim", "max_sentences",
                     "max_comments", "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")


def param_shapes(config, vocab_size, mode):
    """Ordered name -> shape map; the order fixes init, update, and disk layout."""
    e, h, k = config.embed_dim, config.hidden_dim, config.attn_dim
    two_h = 2 * h
    head_in = two_h if mode in ("no_comments", "no_news") else 2 * two_h
    shapes = {"embed": (vocab_size + 1, e)}  # final row embeds out-of-vocabulary
    for side in ("sent", "com"):
        for direction in ("fwd", "bwd"):
            shapes[f"{side}_{direction}_W"] = (4 * h, e)
            shapes[f"{side}_{direction}_R"] = (4 * h, h)
            shapes[f"{side}_{direction}_b"] = (4 * h,)
        shapes[f"{side}_attn_W"] = (k, two_h)
        shapes[f"{side}_attn_b"] = (k,)
        shapes[f"{side}_attn_v"] = (k,)
    shapes["affinity"] = (two_h, two_h)
    shapes["sent_proj"] = (k, two_h)
    shapes["com_proj"] = (k, two_h)
    shapes["sent_score"] = (k,)
    shapes["com_score"] = (k,)
    shapes["null_comment"] = (two_h,)
    shapes["null_sentence"] = (two_h,)
    shapes["out_W"] = (2, head_in)
    shapes["out_b"] = (2,)
    return shapes


_RECURRENT_GAIN = 3.0  # compensates the deliberately small embedding scale
_FUSION_GAIN = 1.5


def init_params(config, vocab_size, mode="full"):
    """Seeded init: embeddings and null vectors uniform in [-0.1, 0.1],
    weight matrices fan-scaled uniform, biases zero.

    The recurrent and fusion matrices get a gain over the plain fan-scaled
    limit: with the small embedding range, unit-gain init leaves activations
    (and therefore gradients) so small that fixed-rate descent stalls.
    """
    rng = np.random.default_rng(config.seed)
    params = {}
    for name, shape in param_shapes(config, vocab_size, mode).items():
        if name in ("embed", "null_comment", "null_sentence"):
            params[name] = rng.uniform(-0.1, 0.1, shape)
        elif len(shape) == 1:
            params[name] = (rng.uniform(-0.1, 0.1, shape)
                            if name.endswith(("_v", "_score")) else np.zeros(shape))
        else:
            limit = math.sqrt(6.0 / (shape[0] + shape[1]))
            if "fwd_" in name or "bwd_" in name:
                limit *= _RECURRENT_GAIN
            elif name != "out_W":
                limit *= _FUSION_GAIN
            params[name] = rng.uniform(-limit, limit, shape)
    return params


@dataclass
class CoAttentionModel:
    config: CoAttendConfig
    mode: str
    params: dict
    vocab: list
    history: dict | None = field(default=None, compare=False)

    @property
    def unk_id(self):
        return len(self.vocab)


@dataclass(frozen=True)
class Explanation:
    news_id: str
    p_fake: float
    sentences: tuple  # (sentence index, weight, text), descending weight
    comments: tuple   # (comment id, weight, text), descending weight


@dataclass(frozen=True)
class EncodedArticle:
    news_id: str
    sent_ids: tuple   # per-sentence token id lists, truncated, never empty
    com_ids: tuple    # per-comment token id lists, truncated
    comment_ids: tuple
    label: int | None = None


def token_ids(text, vocab_index, unk_id):
    ids = [vocab_index.get(t, unk_id) for t in tokenize(text)]
    return ids or [unk_id]


def encode_article(article, comments, vocab_index, unk_id, config, label=None):
    """Token-id view of one article; ``comments`` is a list of (id, text)."""
    sents = list(article.sentences)[:config.max_sentences]
    coms = list(comments)[:config.max_comments]
    return EncodedArticle(
        news_id=article.id,
        sent_ids=tuple(tuple(token_ids(s, vocab_index, unk_id)) for s in sents),
        com_ids=tuple(tuple(token_ids(t, vocab_index, unk_id)) for _, t in coms),
        comment_ids=tuple(cid for cid, _ in coms),
        label=label,
    )


# ---------------------------------------------------------------------------
# softmax / pooling with order-independent summation
# ---------------------------------------------------------------------------

def _softmax_exact(scores):
    shifted = np.exp(scores - scores.max())
    return shifted / math.fsum(shifted.tolist())


def _pool_exact(columns, weights):
    prods = columns * weights[None, :]
    return np.array([math.fsum(row.tolist()) for row in prods])


def _softmax_pair(logits):
    shifted = np.exp(logits - logits.max())
    return shifted / shifted.sum()


# ---------------------------------------------------------------------------
# co-attention fusion
# ---------------------------------------------------------------------------

def _co_attention_cached(S, C, params):
    M = params["affinity"] @ S
    F = np.tanh(C.T @ M)
    Qs = params["sent_proj"] @ S
    Qc = params["com_proj"] @ C
    Hs = np.tanh(Qs + Qc @ F)
    Hc = np.tanh(Qc + Qs @ F.T)
    a_s = _softmax_exact(params["sent_score"] @ Hs)
    a_c = _softmax_exact(params["com_score"] @ Hc)
    s_hat = _pool_exact(S, a_s)
    c_hat = _pool_exact(C, a_c)
    cache = (S, C, M, F, Qs, Qc, Hs, Hc, a_s, a_c)
    return s_hat, c_hat, a_s, a_c, cache


def co_attention(S, C, params):
    """Fuse sentence columns S (2h x N) and comment columns C (2h x T).

    Returns (s_hat, c_hat, a_s, a_c); both attention vectors sum to one.
    """
    s_hat, c_hat, a_s, a_c, _ = _co_attention_cached(S, C, params)
    return s_hat, c_hat, a_s, a_c


def _co_attention_back(ds_hat, dc_hat, cache, params, grads):
    S, C, M, F, Qs, Qc, Hs, Hc, a_s, a_c = cache
    dS = np.outer(ds_hat, a_s)
    da_s = S.T @ ds_hat
    dC = np.outer(dc_hat, a_c)
    da_c = C.T @ dc_hat
    dss = a_s * (da_s - a_s @ da_s)
    dsc = a_c * (da_c - a_c @ da_c)
    grads["sent_score"] += Hs @ dss
    grads["com_score"] += Hc @ dsc
    dHs = np.outer(params["sent_score"], dss)
    dHc = np.outer(params["com_score"], dsc)
    dP2 = dHs * (1.0 - Hs * Hs)
    dP3 = dHc * (1.0 - Hc * Hc)
    dQs = dP2 + dP3 @ F
    dQc = dP3 + dP2 @ F.T
    dF = Qc.T @ dP2 + dP3.T @ Qs
    dP1 = dF * (1.0 - F * F)
    dC += M @ dP1.T
    dM = C @ dP1
    grads["affinity"] += dM @ S.T
    dS += params["affinity"].T @ dM
    grads["sent_proj"] += dQs @ S.T
    dS += params["sent_proj"].T @ dQs
    grads["com_proj"] += dQc @ C.T
    dC += params["com_proj"].T @ dQc
    return dS, dC


# ---------------------------------------------------------------------------
# per-article head (mode-aware)
# ---------------------------------------------------------------------------

def _head_forward(S, C, params, mode, n_sent, n_com):
    """S: 2h x N or None (no_news); C: 2h x T or None (no/ignored comments).

    ``n_sent`` / ``n_com`` are the true (truncated) counts, used to report
    uniform placeholder attention for a side the mode ignores.
    """
    S_used = params["null_sentence"][:, None] if mode == "no_news" else S
    null_comment = C is None or mode == "no_comments"
    C_used = params["null_comment"][:, None] if null_comment else C

    if mode == "no_coattention":
        a_s = np.full(S_used.shape[1], 1.0 / S_used.shape[1])
        a_c = np.full(C_used.shape[1], 1.0 / C_used.shape[1])
        s_hat = S_used.mean(axis=1)
        c_hat = C_used.mean(axis=1)
        fuse_cache = None
    else:
        s_hat, c_hat, a_s, a_c, fuse_cache = _co_attention_cached(S_used, C_used, params)

    if mode == "no_comments":
        feats = s_hat
    elif mode == "no_news":
        feats = c_hat
    else:
        feats = np.concatenate([s_hat, c_hat])
    probs = _softmax_pair(params["out_W"] @ feats + params["out_b"])

    a_s_out = np.full(n_sent, 1.0 / n_sent) if mode == "no_news" else a_s
    if mode == "no_comments":
        a_c_out = np.full(n_com, 1.0 / n_com) if n_com else np.array([1.0])
    else:
        a_c_out = a_c
    cache = (fuse_cache, S_used, C_used, null_comment, feats)
    return probs, a_s_out, a_c_out, cache


def _head_backward(dlogits, head_cache, params, grads, mode):
    fuse_cache, S_used, C_used, null_comment, feats = head_cache
    grads["out_W"] += np.outer(dlogits, feats)
    grads["out_b"] += dlogits
    dfeats = params["out_W"].T @ dlogits
    two_h = S_used.shape[0]
    if mode == "no_comments":
        ds_hat, dc_hat = dfeats, np.zeros(two_h)
    elif mode == "no_news":
        ds_hat, dc_hat = np.zeros(two_h), dfeats
    else:
        ds_hat, dc_hat = dfeats[:two_h], dfeats[two_h:]

    if mode == "no_coattention":
        dS = np.repeat(ds_hat[:, None] / S_used.shape[1], S_used.shape[1], axis=1)
        dC = np.repeat(dc_hat[:, None] / C_used.shape[1], C_used.shape[1], axis=1)
    else:
        dS, dC = _co_attention_back(ds_hat, dc_hat, fuse_cache, params, grads)

    if null_comment:
        grads["null_comment"] += dC[:, 0]
        dC = None
    if mode == "no_news":
        grads["null_sentence"] += dS[:, 0]
        dS = None
    return dS, dC


# ---------------------------------------------------------------------------
# batched forward / loss / gradients
# ---------------------------------------------------------------------------

def encode_side(sequences, params, side, dropout=None):
    """Encode token-id sequences of one side ("sent" or "com") into
    (len(sequences), 2h) vectors using the model's word-level encoder."""
    vectors, _ = encoder.encode_batch(list(sequences), params["embed"], params,
                                      side, drop_mask=_drop_mask(sequences, params, dropout))
    return vectors


def _drop_mask(sequences, params, dropout):
    if dropout is None:
        return None
    rng, rate = dropout
    if rate <= 0:
        return None
    n = len(sequences)
    width = max(len(s) for s in sequences)
    keep = rng.random((n, width, params["embed"].shape[1])) >= rate
    return keep / (1.0 - rate)


def _batch_forward(batch, params, config, mode, dropout_rng=None):
    """Forward every article of a batch; returns per-article outputs and the
    caches the backward pass needs."""
    dropout = (dropout_rng, config.dropout) if dropout_rng is not None else None
    use_sent = mode != "no_news"
    use_com = mode != "no_comments"

    sent_seqs, sent_slices = [], []
    com_seqs, com_slices = [], []
    for art in batch:
        if use_sent:
            start = len(sent_seqs)
            sent_seqs.extend(art.sent_ids)
            sent_slices.append(slice(start, len(sent_seqs)))
        else:
            sent_slices.append(None)
        if use_com and art.com_ids:
            start = len(com_seqs)
            com_seqs.extend(art.com_ids)
            com_slices.append(slice(start, len(com_seqs)))
        else:
            com_slices.append(None)

    sent_vecs = sent_cache = com_vecs = com_cache = None
    if sent_seqs:
        sent_vecs, sent_cache = encoder.encode_batch(
            sent_seqs, params["embed"], params, "sent",
            drop_mask=_drop_mask(sent_seqs, params, dropout))
    if com_seqs:
        com_vecs, com_cache = encoder.encode_batch(
            com_seqs, params["embed"], params, "com",
            drop_mask=_drop_mask(com_seqs, params, dropout))

    outputs = []
    for art, ssl, csl in zip(batch, sent_slices, com_slices):
        S = sent_vecs[ssl].T if ssl is not None else None
        C = com_vecs[csl].T if csl is not None else None
        probs, a_s, a_c, head_cache = _head_forward(
            S, C, params, mode, len(art.sent_ids), len(art.com_ids))
        outputs.append((probs, a_s, a_c, head_cache))
    sides = (sent_vecs, sent_cache, sent_slices, com_vecs, com_cache, com_slices)
    return outputs, sides


def loss_and_grads(batch, model, dropout_rng=None):
    """Mean cross-entropy over a batch of labeled articles plus gradients for
    every parameter tensor (reverse-mode, same forward as inference)."""
    params, config, mode = model.params, model.config, model.mode
    outputs, sides = _batch_forward(batch, params, config, mode, dropout_rng)
    sent_vecs, sent_cache, sent_slices, com_vecs, com_cache, com_slices = sides

    grads = {k: np.zeros_like(v) for k, v in params.items()}
    d_sent = np.zeros_like(sent_vecs) if sent_vecs is not None else None
    d_com = np.zeros_like(com_vecs) if com_vecs is not None else None

    total = 0.0
    for art, (probs, _, _, head_cache), ssl, csl in zip(batch, outputs,
                                                        sent_slices, com_slices):
        if art.label not in (0, 1):
            raise ValueError(f"article {art.news_id} lacks a binary label")
        total += -math.log(probs[art.label])
        dlogits = probs.copy()
        dlogits[art.label] -= 1.0
        dS, dC = _head_backward(dlogits, head_cache, params, grads, mode)
        if dS is not None:
            d_sent[ssl] += dS.T
        if dC is not None:
            d_com[csl] += dC.T

    if sent_vecs is not None:
        grads["embed"] += encoder.encode_batch_back(
            d_sent, sent_cache, params["embed"].shape, params, "sent", grads)
    if com_vecs is not None:
        grads["embed"] += encoder.encode_batch_back(
            d_com, com_cache, params["embed"].shape, params, "com", grads)

    scale = 1.0 / len(batch)
    loss = total * scale
    if not math.isfinite(loss):
        raise RuntimeError(f"non-finite training loss {loss!r}")
    for key in grads:
        grads[key] *= scale
    return loss, grads


def predict_batch(batch, model):
    """p_fake per encoded article (inference path, no dropout)."""
    outputs, _ = _batch_forward(batch, model.params, model.config, model.mode)
    return np.array([probs[1] for probs, _, _, _ in outputs])


def forward(article, comments, model):
    """(p_fake, sentence attention, comment attention) for one article.

    ``comments`` is a list of texts; an empty list runs against the learned
    null-comment vector with comment attention [1.0].
    """
    index = {t: i for i, t in enumerate(model.vocab)}
    pairs = [(f"{article.id}:c{i}", text) for i, text in enumerate(comments)]
    encoded = encode_article(article, pairs, index, model.unk_id, model.config)
    outputs, _ = _batch_forward([encoded], model.params, model.config, model.mode)
    probs, a_s, a_c, _ = outputs[0]
    return float(probs[1]), a_s, a_c


def _ranked(weights, keys):
    order = sorted(range(len(weights)), key=lambda i: (-weights[i], i))
    return tuple((keys[i], float(weights[i])) for i in order)


def explain(model, article, comments):
    """Rank sentences and comments by attention weight (ties keep original
    order). ``comments`` is a list of (comment_id, text)."""
    index = {t: i for i, t in enumerate(model.vocab)}
    encoded = encode_article(article, comments, index, model.unk_id, model.config)
    outputs, _ = _batch_forward([encoded], model.params, model.config, model.mode)
    probs, a_s, a_c, _ = outputs[0]
    sentences = list(article.sentences)[:model.config.max_sentences]
    ranked_s = tuple((idx, w, sentences[idx])
                     for idx, w in _ranked(a_s, list(range(len(sentences)))))
    if encoded.comment_ids:
        texts = dict(comments)
        ranked_c = tuple((cid, w, texts[cid])
                         for cid, w in _ranked(a_c, list(encoded.comment_ids)))
    else:
        ranked_c = ()
    return Explanation(news_id=article.id, p_fake=float(probs[1]),
                       sentences=ranked_s, comments=ranked_c)


# ---------------------------------------------------------------------------
# persistence: "DEFND1", mode byte, config header, vocabulary, then tensors
# in param_shapes order as row-major little-endian float64.
# ---------------------------------------------------------------------------

def save_model(model, path):
    cfg = model.config
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", MODES.index(model.mode)))
        fh.write(struct.pack("<8q", cfg.embed_dim, cfg.hidden_dim, cfg.attn_dim,
                             cfg.max_sentences, cfg.max_comments, cfg.epochs,
                             cfg.batch_size, cfg.seed))
        fh.write(struct.pack("<2d", cfg.learning_rate, cfg.dropout))
        fh.write(struct.pack("<Q", len(model.vocab)))
        for token in model.vocab:
            raw = token.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        for name in param_shapes(cfg, len(model.vocab), model.mode):
            fh.write(np.ascontiguousarray(model.params[name], dtype="<f8").tobytes())
    return path


def load_model(path):
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not a co-attention model file")
        mode = MODES[struct.unpack("<B", fh.read(1))[0]]
        (embed_dim, hidden_dim, attn_dim, max_sentences, max_comments,
         epochs, batch_size, seed) = struct.unpack("<8q", fh.read(64))
        learning_rate, dropout = struct.unpack("<2d", fh.read(16))
        config = CoAttendConfig(
            embed_dim=embed_dim, hidden_dim=hidden_dim, attn_dim=attn_dim,
            max_sentences=max_sentences, max_comments=max_comments,
            learning_rate=learning_rate, epochs=epochs, batch_size=batch_size,
            seed=seed, dropout=dropout)
        n_tokens = struct.unpack("<Q", fh.read(8))[0]
        vocab = []
        for _ in range(n_tokens):
            size = struct.unpack("<I", fh.read(4))[0]
            vocab.append(fh.read(size).decode("utf-8"))
        params = {}
        for name, shape in param_shapes(config, len(vocab), mode).items():
            count = int(np.prod(shape))
            data = np.frombuffer(fh.read(count * 8), dtype="<f8", count=count)
            params[name] = data.reshape(shape).copy()
    return CoAttentionModel(config=config, mode=mode, params=params, vocab=vocab)
