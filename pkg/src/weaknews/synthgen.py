"""Seeded synthetic corpora with planted social and content signals.

The generator plants every signal the learners and labeling rules are meant
to recover, and returns the ground truth needed to score them:

- publishers draw a partisan lean; the fake probability of their news rises
  with |lean| as ``(1 - bias_strength) * fake_fraction +
  bias_strength * sigmoid(8 (|lean| - 0.5))``
- users split into a low- and a high-credibility group whose means differ by
  ``credibility_gap``; engaging users are sampled with weight (1 - c) on fake
  news and c on real news
- follower edges stay inside a user's credibility group with probability
  ``homophily``, otherwise attach uniformly
- fake and real articles share a general vocabulary; fake articles usually
  carry claim sentences salted with marker tokens, and real articles
  occasionally carry marker sentences as noise
- comment sentiment is one-sided at zero signal strength and mixes toward
  half positive / half negative on fake news as the planted strength
  ``(bias_strength + credibility_gap) / 2`` grows, so conflict-based rules
  fall back to chance exactly when the other social knobs are off
- a fraction ``explainable_comment_rate`` of fake-news comments rebut one
  claim sentence: they quote its marker tokens and add rebuttal tokens; the
  ground truth records which comment explains which sentence
- real-news comments spam rebuttal tokens plus markers their own article
  does not contain (cry-wolf noise) at a matched rate, so the presence of
  rebuttal or marker tokens in comments barely separates the classes; the
  decisive signal is whether a comment's markers match a claim sentence of
  its own article, which is exactly the correspondence co-attention can use

Engagement timestamps fall in the 96 hours after publication, which is what
early-detection cutoffs sweep over. Everything is a pure function of the
configuration, including the seed.
"""

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .corpus import (Corpus, Engagement, NewsArticle, PublisherProfile,
                     UserProfile)
from .weaksup import load_lexicon

ENGAGEMENT_WINDOW_HOURS = 96
CLAIM_SENTENCE_RATE = 0.75   # fake news carrying marker-salted claims
DECOY_SENTENCE_RATE = 0.15   # real news carrying marker-salted noise
CRY_WOLF_RATE = 0.2          # real-news comments spamming rebuttal/marker tokens
N_REBUTTAL_TOKENS = 8
_BASE_TIME = datetime(2024, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class SynthConfig:
    n_news: int = 200
    n_users: int = 500
    n_publishers: int = 20
    fake_fraction: float = 0.5
    bias_strength: float = 0.6
    credibility_gap: float = 0.6
    homophily: float = 0.5
    vocab_size: int = 250
    fake_topic_tokens: int = 12
    comments_per_news: float = 10.0
    explainable_comment_rate: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("n_news", "n_users", "n_publishers", "vocab_size",
                     "fake_topic_tokens"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 < self.fake_fraction < 1.0:
            raise ValueError("fake_fraction must lie in (0, 1)")
        for name in ("bias_strength", "credibility_gap", "homophily",
                     "explainable_comment_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.comments_per_news < 0:
            raise ValueError("comments_per_news must be >= 0")


@dataclass
class GroundTruth:
    labels: dict                 # news_id -> 0/1
    explains: dict               # comment_id -> explained sentence index
    explaining_by_news: dict     # news_id -> [comment_id, ...] in comment order
    publisher_fake_prob: dict    # publisher_id -> planted fake probability
    user_credibility: dict       # user_id -> planted credibility (noisy)
    user_affinity: dict          # user_id -> group center driving engagement
    comment_polarity: dict       # comment_id -> -1 / 0 / +1
    polarity_dists: dict         # label -> (p_pos, p_neg, p_neutral)
    marker_tokens: list = field(default_factory=list)
    rebuttal_tokens: list = field(default_factory=list)

    def explained_sentences(self, news_id):
        return sorted({self.explains[c] for c in self.explaining_by_news.get(news_id, ())})


def _sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def _fake_affinity(cred):
    """Sampling weight of a user on fake news (squared: sharpens the group
    split so spreader composition reflects credibility cleanly)."""
    return (1.0 - cred) ** 2


def _real_affinity(cred):
    return cred ** 2


def _polarity_dists(strength):
    base = (0.92, 0.03, 0.05)  # one-sided chatter: (positive, negative, neutral)
    mixed = (base[0] - 0.44 * strength, base[1] + 0.44 * strength, base[2])
    return {0: base, 1: mixed}


def generate(config):
    """Generate one corpus and its ground truth; fully seeded."""
    expected_fake = round(config.n_news * config.fake_fraction)
    if expected_fake == 0 or expected_fake == config.n_news:
        raise ValueError("infeasible config: both classes need expected mass "
                         f"(n_news={config.n_news}, fake_fraction={config.fake_fraction})")
    rng = np.random.default_rng(config.seed)

    general = [f"w{i:03d}" for i in range(config.vocab_size)]
    markers = [f"claimterm{i:02d}" for i in range(config.fake_topic_tokens)]
    rebuttals = [f"rebuttal{i}" for i in range(N_REBUTTAL_TOKENS)]
    lexicon = load_lexicon()
    positive_words = sorted(t for t, v in lexicon.items() if v >= 0.5)
    negative_words = sorted(t for t, v in lexicon.items() if v <= -0.5)

    # publishers
    publishers, fake_prob = [], {}
    for i in range(config.n_publishers):
        lean = round(float(rng.uniform(-1.0, 1.0)), 4)
        pid = f"p{i:03d}"
        publishers.append(PublisherProfile(id=pid, name=f"outlet {i}", bias=lean))
        fake_prob[pid] = ((1.0 - config.bias_strength) * config.fake_fraction
                          + config.bias_strength * _sigmoid(12.0 * (abs(lean) - 0.5)))

    # users in two credibility groups; engagement preference follows the
    # group center so a zero gap means exactly no preference
    users, credibility, affinity = [], {}, {}
    group = rng.random(config.n_users) < 0.5  # True = low-credibility group
    for i in range(config.n_users):
        center = 0.5 - config.credibility_gap / 2 if group[i] else 0.5 + config.credibility_gap / 2
        center = min(max(center, 0.02), 0.98)
        cred = round(float(np.clip(rng.normal(center, 0.08), 0.02, 0.98)), 4)
        uid = f"u{i:04d}"
        credibility[uid] = cred
        affinity[uid] = center
        users.append(UserProfile(
            id=uid,
            followers=int(rng.lognormal(3.0 + 2.0 * cred, 0.6)),
            followees=int(rng.lognormal(3.0, 0.6)),
            verified=bool(rng.random() < 0.05 + 0.3 * cred),
            register_age_days=int(rng.integers(30, 3000)),
            credibility=cred,
        ))
    center_vec = np.array([affinity[u.id] for u in users])

    def sample_tokens(pool, count):
        return [pool[k] for k in rng.integers(0, len(pool), count)]

    # news with optional marker-salted claim (fake) or decoy (real) sentences
    news, labels, claims, news_markers = [], {}, {}, {}
    for j in range(config.n_news):
        nid = f"n{j:04d}"
        pub = publishers[int(rng.integers(0, config.n_publishers))]
        label = int(rng.random() < fake_prob[pub.id])
        publish = _BASE_TIME + timedelta(seconds=int(rng.integers(0, 30 * 24 * 3600)))
        n_sent = int(rng.integers(4, 8))
        sentences = [" ".join(sample_tokens(general, int(rng.integers(6, 11))))
                     for _ in range(n_sent)]
        claim_idx = []
        rate = CLAIM_SENTENCE_RATE if label == 1 else DECOY_SENTENCE_RATE
        if rng.random() < rate:
            claim_idx = sorted(rng.choice(n_sent, size=int(rng.integers(1, 3)),
                                          replace=False).tolist())
        article_markers = set()
        for s in claim_idx:
            salted = sample_tokens(markers, int(rng.integers(2, 4)))
            article_markers.update(salted)
            sentences[s] = sentences[s] + " " + " ".join(salted)
        labels[nid] = label
        # only genuine fake claims are rebuttable
        claims[nid] = claim_idx if label == 1 else []
        news_markers[nid] = article_markers
        news.append(NewsArticle(
            id=nid, publisher_id=pub.id, publish_time=publish,
            title=" ".join(sample_tokens(general, int(rng.integers(3, 6)))),
            sentences=tuple(sentences), gold_label=label,
        ))

    # force both classes so degenerate small draws stay usable
    values = set(labels.values())
    if len(values) == 1:
        only = values.pop()
        flip = news[-1]
        labels[flip.id] = 1 - only
        claims[flip.id] = []
        news[-1] = NewsArticle(id=flip.id, publisher_id=flip.publisher_id,
                               publish_time=flip.publish_time, title=flip.title,
                               sentences=flip.sentences, gold_label=1 - only)

    strength = (config.bias_strength + config.credibility_gap) / 2.0
    dists = _polarity_dists(strength)

    engagements = []
    explains, explaining_by_news, comment_polarity = {}, {}, {}
    for article in news:
        label = labels[article.id]
        n_comments = int(rng.poisson(config.comments_per_news))
        n_shares = int(rng.poisson(config.comments_per_news * 0.5))
        total = min(n_comments + n_shares, config.n_users)
        if total == 0:
            continue
        weights = _fake_affinity(center_vec) if label == 1 else _real_affinity(center_vec)
        chosen = rng.choice(config.n_users, size=total, replace=False,
                            p=weights / weights.sum())
        kinds = np.array(["comment"] * min(n_comments, total)
                         + ["share"] * (total - min(n_comments, total)))
        rng.shuffle(kinds)
        offsets = sorted(int(rng.integers(1, ENGAGEMENT_WINDOW_HOURS * 3600))
                         for _ in range(total))
        p_pos, p_neg, _ = dists[label]
        comment_no = 0
        for user_row, kind, offset in zip(chosen, kinds, offsets):
            when = article.publish_time + timedelta(seconds=offset)
            if kind == "share":
                engagements.append(Engagement(user_id=users[user_row].id,
                                              news_id=article.id, time=when,
                                              kind="share"))
                continue
            cid = f"{article.id}:c{comment_no}"
            comment_no += 1
            draw = rng.random()
            polarity = 1 if draw < p_pos else (-1 if draw < p_pos + p_neg else 0)
            tokens = sample_tokens(general, int(rng.integers(3, 7)))
            if claims[article.id] and rng.random() < config.explainable_comment_rate:
                # factual debunker: quotes the claim's markers, no sentiment
                polarity = 0
                target = int(claims[article.id][int(rng.integers(0, len(claims[article.id])))])
                quoted = [t for t in article.sentences[target].split()
                          if t.startswith("claimterm")]
                tokens += quoted[:3]
                tokens += sample_tokens(rebuttals, int(rng.integers(2, 4)))
                explains[cid] = target
                explaining_by_news.setdefault(article.id, []).append(cid)
            else:
                if polarity == 1:
                    tokens += sample_tokens(positive_words, int(rng.integers(1, 3)))
                elif polarity == -1:
                    tokens += sample_tokens(negative_words, int(rng.integers(1, 3)))
                if label == 0 and rng.random() < CRY_WOLF_RATE:
                    # skeptical noise on real news: a rebuttal word plus markers
                    # that do NOT appear in this article's own sentences
                    outside = [m for m in markers if m not in news_markers[article.id]]
                    if outside:
                        tokens += sample_tokens(outside, int(rng.integers(1, 3)))
                    tokens += sample_tokens(rebuttals, 1)
            comment_polarity[cid] = polarity
            engagements.append(Engagement(user_id=users[user_row].id,
                                          news_id=article.id, time=when,
                                          kind="comment", text=" ".join(tokens)))

    # follower edges, homophilous within credibility groups
    edge_set = set()
    target_edges = 2 * config.n_users
    for _ in range(target_edges):
        a = int(rng.integers(0, config.n_users))
        if rng.random() < config.homophily:
            pool = np.flatnonzero(group == group[a])
        else:
            pool = np.arange(config.n_users)
        b = int(pool[int(rng.integers(0, len(pool)))])
        if a == b:
            continue
        edge_set.add((min(a, b), max(a, b)))
    edges = [(users[a].id, users[b].id) for a, b in sorted(edge_set)]

    corpus = Corpus(news=news, users=users, publishers=publishers,
                    engagements=engagements, edges=edges)
    truth = GroundTruth(
        labels=labels, explains=explains, explaining_by_news=explaining_by_news,
        publisher_fake_prob=fake_prob, user_credibility=credibility,
        user_affinity=affinity, comment_polarity=comment_polarity,
        polarity_dists=dists, marker_tokens=markers, rebuttal_tokens=rebuttals,
    )
    return corpus, truth


def planted_oracle_accuracy(corpus, truth):
    """Accuracy of a Bayes-style decision from the planted social parameters.

    Per news item the log-odds of fake accumulate the publisher's planted
    fake probability, each engaging user's sampling-weight ratio, and each
    comment's planted polarity likelihood ratio. This is the social-signal
    ceiling the learners are compared against.
    """
    sum_real = sum(_real_affinity(truth.user_affinity[u.id]) for u in corpus.users)
    sum_fake = sum(_fake_affinity(truth.user_affinity[u.id]) for u in corpus.users)
    norm = math.log(sum_real / sum_fake) if sum_real > 0 and sum_fake > 0 else 0.0
    p_fake_dist, p_real_dist = truth.polarity_dists[1], truth.polarity_dists[0]

    def polarity_llr(polarity):
        idx = {1: 0, -1: 1, 0: 2}[polarity]
        return math.log(p_fake_dist[idx] / p_real_dist[idx])

    correct = 0
    for article in corpus.news:
        prior = truth.publisher_fake_prob[article.publisher_id]
        prior = min(max(prior, 1e-9), 1 - 1e-9)
        llr = math.log(prior / (1.0 - prior))
        for eng in corpus.engagements_for(article.id):
            c = truth.user_affinity[eng.user_id]
            llr += math.log(_fake_affinity(c) / _real_affinity(c)) + norm
        for cid, _ in corpus.comments_for(article.id):
            llr += polarity_llr(truth.comment_polarity[cid])
        verdict = 1 if llr > 0 else 0
        correct += int(verdict == truth.labels[article.id])
    return correct / len(corpus.news) if corpus.news else 0.0


def save_ground_truth(truth, path):
    """Explainability truth as line-delimited records; aligned lists map each
    explaining comment to the sentence index it rebuts."""
    import json
    with open(path, "w", encoding="utf-8") as fh:
        for news_id in sorted(truth.explaining_by_news):
            ids = truth.explaining_by_news[news_id]
            fh.write(json.dumps({
                "news_id": news_id,
                "explaining_comment_ids": ids,
                "explained_sentence_indices": [truth.explains[c] for c in ids],
            }) + "\n")
    return path


def load_ground_truth(path):
    """news_id -> (explaining comment ids, aligned sentence indices)."""
    import json
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            out[row["news_id"]] = (list(row["explaining_comment_ids"]),
                                   [int(i) for i in row["explained_sentence_indices"]])
    return out
