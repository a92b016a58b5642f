"""Experiment orchestration: stratified cross-validation, early-detection
sweeps over engagement cutoffs, baselines, and explanation-quality scoring.

Methods available to the sweep:

- ``trifn``:            the constrained factorization detector with weak
                        social supervision (spreading + bias terms active)
- ``trifn_no_wss``:     the same detector with both weak-supervision terms
                        switched off (content/adjacency/gold only)
- ``feature_baseline``: a seeded logistic classifier over hand-crafted
                        social-context features
- ``weak_only``:        the aggregated labeling-rule vote used directly as
                        the classifier

Every (cutoff, seed, fold) cell is deterministic, so result files are
bit-stable across reruns.
"""

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from . import trifn, weaksup
from .corpus import build_networks, build_vocab
from .metrics import evaluate_classification

SWEEP_METHODS = ("trifn", "trifn_no_wss", "feature_baseline", "weak_only")
DEFAULT_CUTOFFS = (12.0, 24.0, 36.0, 48.0, 96.0)
N_BASELINE_FEATURES = 8
METRICS_CSV_FIELDS = ("method", "cutoff", "seed", "fold",
                      "accuracy", "precision", "recall", "f1")


@dataclass(frozen=True)
class SweepRecord:
    method: str
    cutoff: float | None
    seed: int
    fold: int
    metrics: object


@dataclass
class SweepResult:
    records: list

    def mean_accuracy(self, method, cutoff=None):
        vals = [r.metrics.accuracy for r in self.records
                if r.method == method and (cutoff is None or r.cutoff == cutoff)]
        return sum(vals) / len(vals) if vals else float("nan")

    def mean_f1(self, method, cutoff=None):
        vals = [r.metrics.f1 for r in self.records
                if r.method == method and (cutoff is None or r.cutoff == cutoff)]
        return sum(vals) / len(vals) if vals else float("nan")


def stratified_folds(gold_labels, n_folds, seed):
    """Deterministic per-class round-robin folds; returns lists of news ids."""
    if n_folds < 2:
        raise ValueError("need at least two folds")
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(n_folds)]
    for label in (0, 1):
        ids = sorted(n for n, y in gold_labels.items() if y == label)
        for rank, idx in enumerate(rng.permutation(len(ids))):
            folds[rank % n_folds].append(ids[idx])
    return [sorted(f) for f in folds]


def weak_label_corpus(corpus, networks, train_labels, thresholds=None, lexicon=None):
    """Apply all rules, weight them on the training labels, aggregate."""
    thresholds = thresholds or weaksup.RuleThresholds()
    lexicon = lexicon if lexicon is not None else weaksup.load_lexicon()
    votes = weaksup.apply_rules(corpus, networks, lexicon, thresholds)
    weights = weaksup.estimate_rule_weights(votes, train_labels)
    dists = weaksup.aggregate_all(votes, weights, [a.id for a in corpus.news])
    return votes, weights, dists


def trifn_predictions(corpus, networks, train_labels, test_ids, hyper,
                      use_wss=True, thresholds=None, lexicon=None):
    """Fit the factorization detector transductively and predict the test ids.

    Credibility comes from the training labels only; weak labels cover news
    outside the training set (items with an uninformative 0.5 aggregate are
    dropped since a rounded coin flip would only inject noise).
    """
    cred = weaksup.credibility_scores(corpus, train_labels)
    nets = networks.with_credibility(cred)
    if use_wss:
        _, _, dists = weak_label_corpus(corpus, nets, train_labels,
                                        thresholds, lexicon)
        weak = {nid: d.p_fake for nid, d in dists.items()
                if nid not in train_labels and d.p_fake != 0.5}
    else:
        hyper = replace(hyper, beta=0.0, gamma=0.0)
        weak = {}
    model, _ = trifn.fit(nets, train_labels, weak, hyper)
    return {nid: trifn.classify(trifn.predict(model, nets.news_pos[nid]))
            for nid in test_ids}


def weak_only_predictions(corpus, networks, train_labels, test_ids,
                          thresholds=None, lexicon=None):
    """The aggregated rule vote as a classifier (0.5 ties resolve to real)."""
    _, _, dists = weak_label_corpus(corpus, networks, train_labels,
                                    thresholds, lexicon)
    return {nid: 1 if dists[nid].p_fake > 0.5 else 0 for nid in test_ids}


# ---------------------------------------------------------------------------
# hand-crafted-feature baseline
# ---------------------------------------------------------------------------

def feature_vector(corpus, networks, lexicon, news_id):
    """Eight social-context features for one news item.

    engaged-user count, mean follower/followee ratio, verified fraction,
    mean credibility, comment count, mean and variance of comment sentiment,
    and publisher bias magnitude. News without engagements fall back to
    constant defaults so only the bias feature varies.
    """
    engaged = networks.engaged_user_indices(news_id)
    cutoff = networks.cutoff_hours
    published = corpus.news_by_id[news_id].publish_time
    comments = []
    for _, eng in corpus.comments_for(news_id):
        hours = (eng.time - published).total_seconds() / 3600.0
        if cutoff is None or hours <= cutoff:
            comments.append(eng.text)
    if engaged.size:
        users = [corpus.users[i] for i in engaged]
        ratio = float(np.mean([u.followers / (1.0 + u.followees) for u in users]))
        verified = float(np.mean([u.verified for u in users]))
        cred = float(networks.credibility[engaged].mean())
    else:
        ratio, verified, cred = 0.0, 0.0, 0.5
    if comments:
        scores = [weaksup.sentiment_score(t, lexicon) for t in comments]
        sent_mean = float(np.mean(scores))
        sent_var = float(np.var(scores))
    else:
        sent_mean = sent_var = 0.0
    bias = abs(float(networks.bias[networks.publisher_index_of(news_id)]))
    return np.array([float(engaged.size), ratio, verified, cred,
                     float(len(comments)), sent_mean, sent_var, bias])


def _train_logistic(X, y, seed, iters=500, lr=0.5):
    if len(set(y.tolist())) < 2:
        raise ValueError("single-class training fold")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std == 0] = 1.0
    Z = (X - mean) / std
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 0.01, Z.shape[1] + 1)
    Zb = np.hstack([Z, np.ones((Z.shape[0], 1))])
    for _ in range(iters):
        p = 1.0 / (1.0 + np.exp(-(Zb @ w)))
        w -= lr * (Zb.T @ (p - y)) / len(y)
    return w, mean, std


def feature_baseline_predictions(corpus, networks, train_labels, test_ids,
                                 seed, lexicon=None):
    """Seeded logistic regression over the hand-crafted features."""
    lexicon = lexicon if lexicon is not None else weaksup.load_lexicon()
    train_ids = sorted(train_labels)
    X = np.array([feature_vector(corpus, networks, lexicon, n) for n in train_ids])
    y = np.array([float(train_labels[n]) for n in train_ids])
    w, mean, std = _train_logistic(X, y, seed)
    preds = {}
    for nid in test_ids:
        z = (feature_vector(corpus, networks, lexicon, nid) - mean) / std
        score = float(z @ w[:-1] + w[-1])
        preds[nid] = 1 if score > 0 else 0
    return preds


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def early_detection_sweep(corpus, cutoffs, method, seeds, n_folds=5,
                          hyper=None, thresholds=None, lexicon=None):
    """Cross-validated metrics for one method across engagement cutoffs.

    ``seeds`` is an iterable of integers; each seed derives its own fold
    split (and estimator seeding). Cutoffs must be strictly increasing.
    """
    if method not in SWEEP_METHODS:
        raise ValueError(f"unknown method {method!r}; pick from {SWEEP_METHODS}")
    cutoffs = list(cutoffs)
    if not cutoffs:
        raise ValueError("cutoff list is empty")
    if any(b <= a for a, b in zip(cutoffs, cutoffs[1:])):
        raise ValueError("cutoffs must be strictly increasing")
    hyper = hyper or trifn.TriFNHyper()
    lexicon = lexicon if lexicon is not None else weaksup.load_lexicon()
    gold = corpus.gold_labels()
    vocab = build_vocab(corpus)

    records = []
    for cutoff in cutoffs:
        networks = build_networks(corpus, cutoff, vocab=vocab)
        for seed in seeds:
            folds = stratified_folds(gold, n_folds, seed)
            for fold_no, test_ids in enumerate(folds):
                train_labels = {n: y for n, y in gold.items() if n not in set(test_ids)}
                if method == "trifn":
                    preds = trifn_predictions(corpus, networks, train_labels,
                                              test_ids, replace(hyper, seed=seed),
                                              use_wss=True, thresholds=thresholds,
                                              lexicon=lexicon)
                elif method == "trifn_no_wss":
                    preds = trifn_predictions(corpus, networks, train_labels,
                                              test_ids, replace(hyper, seed=seed),
                                              use_wss=False, thresholds=thresholds,
                                              lexicon=lexicon)
                elif method == "feature_baseline":
                    preds = feature_baseline_predictions(corpus, networks,
                                                         train_labels, test_ids,
                                                         seed, lexicon)
                else:
                    preds = weak_only_predictions(corpus, networks, train_labels,
                                                  test_ids, thresholds, lexicon)
                metrics = evaluate_classification(
                    preds, {n: gold[n] for n in test_ids})
                records.append(SweepRecord(method=method, cutoff=cutoff,
                                           seed=seed, fold=fold_no,
                                           metrics=metrics))
    return SweepResult(records=records)


def write_metrics_csv(records, path):
    """``metrics.csv`` rows: method, cutoff, seed, fold, and the four rates."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_CSV_FIELDS)
        for r in records:
            m = r.metrics
            writer.writerow([
                r.method,
                "" if r.cutoff is None else f"{r.cutoff:g}",
                r.seed, r.fold,
                f"{m.accuracy:.6f}", f"{m.precision:.6f}",
                f"{m.recall:.6f}", f"{m.f1:.6f}",
            ])
    return path


# ---------------------------------------------------------------------------
# explanation quality
# ---------------------------------------------------------------------------

def explanation_quality(model, corpus, truth_map, news_ids=None, k=5):
    """Sentence MAP and comment NDCG@k of a model's attention rankings.

    ``truth_map`` maps news_id -> (explaining comment ids, aligned explained
    sentence indices), as produced by the synthetic generator. News items
    whose relevant entries fall outside the ranked candidates are skipped.
    Returns a dict with ``sentence_map``, ``comment_ndcg``, and the per-news
    details.
    """
    from .coattend import explain
    from .metrics import average_precision, ndcg_at_k

    wanted = set(news_ids) if news_ids is not None else None
    ap_values, ndcg_values, details = [], [], []
    for nid, (comment_ids, sentence_idx) in sorted(truth_map.items()):
        if wanted is not None and nid not in wanted:
            continue
        article = corpus.news_by_id.get(nid)
        if article is None:
            continue
        comments = [(cid, eng.text) for cid, eng in corpus.comments_for(nid)]
        if not comments:
            continue
        result = explain(model, article, comments)
        ranked_comments = [cid for cid, _, _ in result.comments]
        relevant_c = set(comment_ids) & set(ranked_comments)
        ranked_sentences = [idx for idx, _, _ in result.sentences]
        relevant_s = set(sentence_idx) & set(ranked_sentences)
        row = {"news_id": nid}
        if relevant_c:
            gains = [1.0 if cid in relevant_c else 0.0 for cid in ranked_comments]
            row["comment_ndcg"] = ndcg_at_k(gains, k)
            ndcg_values.append(row["comment_ndcg"])
        if relevant_s:
            row["sentence_ap"] = average_precision(ranked_sentences, relevant_s)
            ap_values.append(row["sentence_ap"])
        details.append(row)
    return {
        "sentence_map": sum(ap_values) / len(ap_values) if ap_values else math.nan,
        "comment_ndcg": sum(ndcg_values) / len(ndcg_values) if ndcg_values else math.nan,
        "per_news": details,
    }
