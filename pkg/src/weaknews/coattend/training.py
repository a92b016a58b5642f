"""Mini-batch gradient-descent training for the co-attention detector."""

import numpy as np

from ..corpus import build_vocab
from .model import (MODES, CoAttentionModel, EncodedArticle, encode_article,
                    init_params, loss_and_grads, predict_batch)

VALIDATION_FRACTION = 0.2


def _encode_corpus(corpus, vocab, config, news_ids=None):
    index = {t: i for i, t in enumerate(vocab.tokens)}
    unk = len(vocab.tokens)
    wanted = None if news_ids is None else set(news_ids)
    encoded = []
    for article in corpus.news:
        if article.gold_label is None:
            continue
        if wanted is not None and article.id not in wanted:
            continue
        comments = [(cid, eng.text) for cid, eng in corpus.comments_for(article.id)]
        encoded.append(encode_article(article, comments, index, unk, config,
                                      label=article.gold_label))
    return encoded


def _stratified_split(encoded, rng, fraction):
    """Deterministic per-class holdout; classes with a single item stay in
    the training set. Returns (train, validation)."""
    by_class = {0: [], 1: []}
    for art in encoded:
        by_class[art.label].append(art)
    train, val = [], []
    for label in (0, 1):
        items = by_class[label]
        order = rng.permutation(len(items))
        n_val = int(round(fraction * len(items)))
        n_val = min(n_val, len(items) - 1)  # keep every class represented
        held = set(order[:n_val].tolist()) if n_val > 0 else set()
        for i, art in enumerate(items):
            (val if i in held else train).append(art)
    return train, val


def _accuracy(batchable, model):
    if not batchable:
        return 0.0
    p_fake = predict_batch(batchable, model)
    hits = sum(int((p > 0.5) == (art.label == 1))
               for p, art in zip(p_fake, batchable))
    return hits / len(batchable)


def train(corpus, config, mode="full", news_ids=None):
    """Train on the gold-labeled articles (optionally restricted to
    ``news_ids``) and return the parameters with the best validation
    accuracy; ties keep the earlier epoch. Deterministic per seed.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    vocab = build_vocab(corpus, include_comments=True)
    encoded = _encode_corpus(corpus, vocab, config, news_ids)
    labels = {art.label for art in encoded}
    if len(encoded) < 2 or labels != {0, 1}:
        raise ValueError("training needs at least two labeled articles "
                         "covering both classes")

    rng = np.random.default_rng(config.seed)
    train_set, val_set = _stratified_split(encoded, rng, VALIDATION_FRACTION)
    params = init_params(config, len(vocab.tokens), mode)
    model = CoAttentionModel(config=config, mode=mode, params=params,
                             vocab=list(vocab.tokens))

    history = {"train_loss": [], "val_accuracy": []}
    best_acc = -1.0
    best_params = {k: v.copy() for k, v in params.items()}
    for _ in range(config.epochs):
        order = rng.permutation(len(train_set))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = [train_set[i] for i in order[start:start + config.batch_size]]
            dropout_rng = rng if config.dropout > 0 else None
            loss, grads = loss_and_grads(batch, model, dropout_rng=dropout_rng)
            epoch_loss += loss * len(batch)
            for key, grad in grads.items():
                params[key] -= config.learning_rate * grad
        history["train_loss"].append(epoch_loss / len(train_set))
        acc = _accuracy(val_set or train_set, model)
        history["val_accuracy"].append(acc)
        if acc > best_acc:
            best_acc = acc
            best_params = {k: v.copy() for k, v in params.items()}

    model.params = best_params
    model.history = history
    return model


def ablate(corpus, config, mode, news_ids=None):
    """Train an ablated variant: ``no_comments`` (content only), ``no_news``
    (comments only), or ``no_coattention`` (uniform pooling)."""
    if mode not in ("no_comments", "no_news", "no_coattention"):
        raise ValueError(f"unknown ablation mode {mode!r}")
    return train(corpus, config, mode=mode, news_ids=news_ids)
