"""Classification and ranking metrics (fake is the positive class)."""

import math
import warnings
from dataclasses import dataclass


@dataclass(frozen=True)
class ClassificationMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int


def evaluate_classification(predictions, gold):
    """Accuracy / precision / recall / F1 for binary predictions.

    ``predictions`` and ``gold`` map the same ids to labels in {0, 1} with
    1 = fake (the positive class). Zero-denominator rates are 0.
    """
    if not gold:
        raise ValueError("empty gold set")
    if set(predictions) != set(gold):
        raise ValueError("prediction and gold id sets differ")
    tp = fp = tn = fn = 0
    for nid, truth in gold.items():
        pred = predictions[nid]
        if pred == 1 and truth == 1:
            tp += 1
        elif pred == 1 and truth == 0:
            fp += 1
        elif pred == 0 and truth == 0:
            tn += 1
        else:
            fn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ClassificationMetrics(
        accuracy=(tp + tn) / (tp + fp + tn + fn),
        precision=precision, recall=recall, f1=f1,
        tp=tp, fp=fp, tn=tn, fn=fn,
    )


def average_precision(ranking, relevant):
    """AP of one ranking against a set of relevant items.

    >>> average_precision(["a", "b", "c", "d"], {"a", "c"})
    0.8333333333333333
    """
    if not relevant:
        raise ValueError("relevant set is empty")
    hits = 0
    total = 0.0
    for rank, item in enumerate(ranking, 1):
        if item in relevant:
            hits += 1
            total += hits / rank
    return total / len(relevant)


def map_score(rankings, relevant_sets):
    """Mean average precision over items keyed the same way in both maps.

    Items whose relevant set is empty (or missing) are excluded with a
    warning; an error is raised if nothing remains.
    """
    values = []
    skipped = 0
    for key, ranking in rankings.items():
        relevant = relevant_sets.get(key) or set()
        if not relevant:
            skipped += 1
            continue
        values.append(average_precision(ranking, relevant))
    if skipped:
        warnings.warn(f"{skipped} item(s) without relevant entries excluded from MAP")
    if not values:
        raise ValueError("no items with relevant entries")
    return sum(values) / len(values)


def dcg_at_k(gains, k):
    """Discounted cumulative gain of gains listed in rank order.

    >>> dcg_at_k([1.0, 0.0, 1.0], 3)
    1.5
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    return sum(g / math.log2(r + 1) for r, g in enumerate(gains[:k], 1))


def ndcg_at_k(gains, k):
    """DCG@k of gains in rank order, normalized by the ideal ordering.

    All-zero gains give 0.
    """
    ideal = dcg_at_k(sorted(gains, reverse=True), k)
    if ideal == 0:
        return 0.0
    return dcg_at_k(gains, k) / ideal
