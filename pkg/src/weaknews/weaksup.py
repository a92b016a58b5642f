"""Weak supervision from social signals.

Three deterministic labeling rules vote fake/real/abstain per news item:

- credibility: mean credibility of the users who spread the item
- bias:        partisan lean magnitude of the item's publisher
- sentiment:   conflict between positive and negative comment sentiment

Rule weights are Laplace-smoothed precisions estimated on gold labels, and
votes combine by independent log-odds into a per-item label distribution
(p_fake, p_real).
"""

import math
from collections import defaultdict
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .corpus import tokenize

FAKE = "fake"
REAL = "real"
ABSTAIN = "abstain"

RULE_CREDIBILITY = "credibility"
RULE_BIAS = "bias"
RULE_SENTIMENT = "sentiment"
ALL_RULES = (RULE_CREDIBILITY, RULE_BIAS, RULE_SENTIMENT)

SENTIMENT_MIN_COMMENTS = 3  # abstain below this, regardless of conflict


@dataclass(frozen=True)
class WeakVote:
    rule_id: str
    news_id: str
    verdict: str  # FAKE | REAL | ABSTAIN


@dataclass(frozen=True)
class LabelDistribution:
    news_id: str
    p_fake: float
    p_real: float


@dataclass(frozen=True)
class RuleThresholds:
    cred_low: float = 0.4
    cred_high: float = 0.6
    bias: float = 0.5
    sentiment: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.cred_low < self.cred_high <= 1.0):
            raise ValueError("need 0 <= cred_low < cred_high <= 1")
        if not (0.0 < self.bias <= 1.0):
            raise ValueError("bias threshold must be in (0, 1]")
        if not (0.0 <= self.sentiment <= 1.0):
            raise ValueError("sentiment threshold must be in [0, 1]")


def credibility_scores(corpus, gold_labels):
    """Per-user credibility from the veracity of gold-labeled engaged news.

    A user who engaged g distinct gold-labeled news of which f are fake gets
    ``1 - (f + 1) / (g + 2)`` (add-one smoothing); no labeled engagements
    gives the 0.5 prior. A credibility present on the profile overrides the
    computed score. Returns a vector aligned with ``corpus.users``.
    """
    engaged = defaultdict(set)
    for eng in corpus.engagements:
        if eng.news_id in gold_labels:
            engaged[eng.user_id].add(eng.news_id)
    scores = np.full(len(corpus.users), 0.5)
    for i, user in enumerate(corpus.users):
        if user.credibility is not None:
            scores[i] = user.credibility
            continue
        news = engaged.get(user.id)
        if news:
            fake = sum(gold_labels[n] for n in news)
            scores[i] = 1.0 - (fake + 1.0) / (len(news) + 2.0)
    return scores


def lf_credibility(news_id, networks, thresholds=RuleThresholds()):
    """Fake when mean spreader credibility is strictly below the low
    threshold, real when strictly above the high one, abstain otherwise
    (including when no one engaged)."""
    spreaders = networks.engaged_user_indices(news_id)
    if spreaders.size == 0:
        return WeakVote(RULE_CREDIBILITY, news_id, ABSTAIN)
    mean_cred = float(networks.credibility[spreaders].mean())
    if mean_cred < thresholds.cred_low:
        return WeakVote(RULE_CREDIBILITY, news_id, FAKE)
    if mean_cred > thresholds.cred_high:
        return WeakVote(RULE_CREDIBILITY, news_id, REAL)
    return WeakVote(RULE_CREDIBILITY, news_id, ABSTAIN)


def lf_bias(news_id, networks, thresholds=RuleThresholds()):
    """Fake when the publisher's |bias| exceeds the threshold, real when the
    bias is known and within it, abstain when unknown."""
    p = networks.publisher_index_of(news_id)
    if not networks.bias_known[p]:
        return WeakVote(RULE_BIAS, news_id, ABSTAIN)
    if abs(networks.bias[p]) > thresholds.bias:
        return WeakVote(RULE_BIAS, news_id, FAKE)
    return WeakVote(RULE_BIAS, news_id, REAL)


def load_lexicon(path=None):
    """token -> valence map from a tab-separated file (default: shipped)."""
    if path is None:
        source = resources.files("weaknews").joinpath("data/lexicon.tsv")
        text = source.read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    lexicon = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        token, valence = line.split("\t")
        valence = float(valence)
        if not -1.0 <= valence <= 1.0:
            raise ValueError(f"valence out of range for {token!r}")
        lexicon[token] = valence
    return lexicon


def sentiment_score(text, lexicon):
    """Mean valence of in-lexicon tokens, 0 when none match."""
    values = [lexicon[t] for t in tokenize(text) if t in lexicon]
    if not values:
        return 0.0
    return float(sum(values) / len(values))


def lf_sentiment(news_id, corpus, lexicon, thresholds=RuleThresholds()):
    """Conflicting comment sentiment signals fake.

    With rho+ / rho- the fractions of this item's comments scoring positive /
    negative, conflict = 4 * rho+ * rho-. Fewer than three comments abstains
    (too little support for either verdict); above the floor the vote is fake
    when conflict exceeds the threshold, real otherwise.
    """
    comments = [eng for _, eng in corpus.comments_for(news_id)]
    if len(comments) < SENTIMENT_MIN_COMMENTS:
        return WeakVote(RULE_SENTIMENT, news_id, ABSTAIN)
    scores = [sentiment_score(c.text, lexicon) for c in comments]
    pos = sum(1 for s in scores if s > 0) / len(scores)
    neg = sum(1 for s in scores if s < 0) / len(scores)
    conflict = 4.0 * pos * neg
    if conflict > thresholds.sentiment:
        return WeakVote(RULE_SENTIMENT, news_id, FAKE)
    return WeakVote(RULE_SENTIMENT, news_id, REAL)


def apply_rules(corpus, networks, lexicon=None, thresholds=RuleThresholds()):
    """All three rules on every news item; one vote per (rule, item)."""
    if lexicon is None:
        lexicon = load_lexicon()
    votes = []
    for article in corpus.news:
        votes.append(lf_credibility(article.id, networks, thresholds))
        votes.append(lf_bias(article.id, networks, thresholds))
        votes.append(lf_sentiment(article.id, corpus, lexicon, thresholds))
    return votes


def estimate_rule_weights(votes, gold_labels, rule_ids=ALL_RULES):
    """Laplace-smoothed precision of each rule on gold-labeled items.

    weight = (correct + 1) / (non_abstain + 2); a rule with no non-abstaining
    gold votes defaults to 0.5.
    """
    correct = defaultdict(int)
    fired = defaultdict(int)
    for vote in votes:
        if vote.verdict == ABSTAIN or vote.news_id not in gold_labels:
            continue
        fired[vote.rule_id] += 1
        truth = FAKE if gold_labels[vote.news_id] == 1 else REAL
        if vote.verdict == truth:
            correct[vote.rule_id] += 1
    rules = set(rule_ids) | set(fired)
    return {rule: (correct[rule] + 1.0) / (fired[rule] + 2.0) for rule in rules}


def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def aggregate(news_id, votes, weights):
    """Combine one item's votes into a label distribution by log-odds.

    Each non-abstaining vote contributes ln(w / (1 - w)) to its side, with w
    the rule weight clamped to [0.01, 0.99]; p_fake is the sigmoid of the
    side difference. No votes (or all abstaining) gives (0.5, 0.5).
    """
    score_fake = score_real = 0.0
    for vote in votes:
        if vote.news_id != news_id:
            raise ValueError(f"vote for {vote.news_id!r} passed to {news_id!r}")
        if vote.verdict == ABSTAIN:
            continue
        w = min(max(weights[vote.rule_id], 0.01), 0.99)
        odds = math.log(w / (1.0 - w))
        if vote.verdict == FAKE:
            score_fake += odds
        else:
            score_real += odds
    p_fake = _sigmoid(score_fake - score_real)
    return LabelDistribution(news_id=news_id, p_fake=p_fake, p_real=1.0 - p_fake)


def aggregate_all(votes, weights, news_ids):
    """Per-item aggregation over a full vote list; returns news_id -> dist."""
    grouped = defaultdict(list)
    for vote in votes:
        grouped[vote.news_id].append(vote)
    return {nid: aggregate(nid, grouped.get(nid, []), weights) for nid in news_ids}
