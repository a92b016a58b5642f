"""Social news corpus: typed records, validated line-delimited ingestion,
tokenization, TF-IDF vectorization, and interaction-network construction.

A corpus ties together five record files (one JSON object per line, UTF-8):
news, users, publishers, engagements, and undirected follower edges. All
cross-references are checked at load time and timestamps are parsed as UTC.
The matrix view used by the learners (content matrix, user adjacency,
spreading matrix, publishing matrix, bias and credibility vectors) is
materialized by :func:`build_networks`.
"""

import json
import math
import re
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

NEWS_FILE = "news.ndjson"
USERS_FILE = "users.ndjson"
PUBLISHERS_FILE = "publishers.ndjson"
ENGAGEMENTS_FILE = "engagements.ndjson"
EDGES_FILE = "edges.ndjson"

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class CorpusError(ValueError):
    """Malformed record, dangling reference, or duplicate id."""


def parse_timestamp(value, where=""):
    """Parse an ISO-8601 timestamp as UTC. Naive timestamps are taken as UTC."""
    if not isinstance(value, str):
        raise CorpusError(f"{where}: timestamp must be a string, got {value!r}")
    text = value.replace("Z", "+00:00") if value.endswith("Z") else value
    try:
        stamp = datetime.fromisoformat(text)
    except ValueError:
        raise CorpusError(f"{where}: unparseable timestamp {value!r}") from None
    if stamp.tzinfo is None:
        return stamp.replace(tzinfo=timezone.utc)
    return stamp.astimezone(timezone.utc)


def format_timestamp(stamp):
    return stamp.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class NewsArticle:
    id: str
    publisher_id: str
    publish_time: datetime
    title: str
    sentences: tuple
    gold_label: int | None = None  # 1 = fake, 0 = real


@dataclass(frozen=True)
class UserProfile:
    id: str
    followers: int
    followees: int
    verified: bool
    register_age_days: int | None = None
    credibility: float | None = None  # in [0, 1] when present


@dataclass(frozen=True)
class PublisherProfile:
    id: str
    name: str
    bias: float | None = None  # -1 extreme left ... +1 extreme right


@dataclass(frozen=True)
class Engagement:
    user_id: str
    news_id: str
    time: datetime
    kind: str  # "share" | "comment"
    text: str | None = None


@dataclass
class Corpus:
    news: list
    users: list
    publishers: list
    engagements: list
    edges: list  # (src, dst) follower pairs, undirected

    news_by_id: dict = field(init=False, repr=False, compare=False)
    users_by_id: dict = field(init=False, repr=False, compare=False)
    publishers_by_id: dict = field(init=False, repr=False, compare=False)
    _by_news: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.news_by_id = {a.id: a for a in self.news}
        self.users_by_id = {u.id: u for u in self.users}
        self.publishers_by_id = {p.id: p for p in self.publishers}
        self._by_news = defaultdict(list)
        for eng in self.engagements:
            self._by_news[eng.news_id].append(eng)

    def engagements_for(self, news_id):
        return list(self._by_news.get(news_id, ()))

    def comments_for(self, news_id):
        """Comments of one news item in file order, with derived ids.

        The engagement schema carries no identifier, so a comment is addressed
        as ``<news_id>:c<k>`` where k counts that news item's comments in file
        order. Returns a list of (comment_id, Engagement).
        """
        out = []
        for eng in self._by_news.get(news_id, ()):
            if eng.kind == "comment":
                out.append((f"{news_id}:c{len(out)}", eng))
        return out

    def gold_labels(self):
        return {a.id: a.gold_label for a in self.news if a.gold_label is not None}


def tokenize(text):
    """Lowercased alphanumeric tokens; punctuation splits and is dropped."""
    return _TOKEN_RE.findall(text.lower())


def article_tokens(article):
    tokens = tokenize(article.title)
    for sentence in article.sentences:
        tokens.extend(tokenize(sentence))
    return tokens


# ---------------------------------------------------------------------------
# loading / saving
# ---------------------------------------------------------------------------

def _read_records(path):
    records = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise CorpusError(f"{path}:{lineno}: record must be a JSON object")
            records.append((f"{path}:{lineno}", obj))
    return records


def _get(obj, key, where, required=True):
    if key not in obj or obj[key] is None:
        if required:
            raise CorpusError(f"{where}: missing field {key!r}")
        return None
    return obj[key]


def _as_str(value, key, where, allow_empty=False):
    if not isinstance(value, str) or (not allow_empty and not value):
        raise CorpusError(f"{where}: field {key!r} must be a non-empty string")
    return value


def _as_count(value, key, where):
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise CorpusError(f"{where}: field {key!r} must be a count >= 0")
    return value


def _as_real(value, key, where, lo, hi):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CorpusError(f"{where}: field {key!r} must be a number")
    value = float(value)
    if not (lo <= value <= hi) or math.isnan(value):
        raise CorpusError(f"{where}: field {key!r} must lie in [{lo}, {hi}]")
    return value


def load_corpus(news_path, users_path, publishers_path, engagements_path, edges_path):
    """Load and validate the five record files into a :class:`Corpus`.

    Raises :class:`CorpusError` (with file and line) for malformed records,
    duplicate ids, and references to unknown news/users/publishers. Empty
    files yield an empty corpus.
    """
    publishers, seen = [], set()
    for where, obj in _read_records(publishers_path):
        pid = _as_str(_get(obj, "id", where), "id", where)
        if pid in seen:
            raise CorpusError(f"{where}: duplicate publisher id {pid!r}")
        seen.add(pid)
        bias = _get(obj, "bias", where, required=False)
        publishers.append(PublisherProfile(
            id=pid,
            name=_as_str(_get(obj, "name", where), "name", where, allow_empty=True),
            bias=None if bias is None else _as_real(bias, "bias", where, -1.0, 1.0),
        ))

    users, seen = [], set()
    for where, obj in _read_records(users_path):
        uid = _as_str(_get(obj, "id", where), "id", where)
        if uid in seen:
            raise CorpusError(f"{where}: duplicate user id {uid!r}")
        seen.add(uid)
        verified = _get(obj, "verified", where)
        if not isinstance(verified, bool):
            raise CorpusError(f"{where}: field 'verified' must be a boolean")
        age = _get(obj, "register_age_days", where, required=False)
        cred = _get(obj, "credibility", where, required=False)
        users.append(UserProfile(
            id=uid,
            followers=_as_count(_get(obj, "followers", where), "followers", where),
            followees=_as_count(_get(obj, "followees", where), "followees", where),
            verified=verified,
            register_age_days=None if age is None else _as_count(age, "register_age_days", where),
            credibility=None if cred is None else _as_real(cred, "credibility", where, 0.0, 1.0),
        ))

    publisher_ids = {p.id for p in publishers}
    news, seen = [], set()
    for where, obj in _read_records(news_path):
        nid = _as_str(_get(obj, "id", where), "id", where)
        if nid in seen:
            raise CorpusError(f"{where}: duplicate news id {nid!r}")
        seen.add(nid)
        pid = _as_str(_get(obj, "publisher_id", where), "publisher_id", where)
        if pid not in publisher_ids:
            raise CorpusError(f"{where}: unknown publisher {pid!r}")
        sentences = _get(obj, "sentences", where)
        if (not isinstance(sentences, list) or not sentences
                or not all(isinstance(s, str) for s in sentences)):
            raise CorpusError(f"{where}: 'sentences' must be a non-empty list of strings")
        label = _get(obj, "label", where, required=False)
        if label is not None and label not in (0, 1):
            raise CorpusError(f"{where}: 'label' must be 0 or 1")
        title = _get(obj, "title", where)
        news.append(NewsArticle(
            id=nid,
            publisher_id=pid,
            publish_time=parse_timestamp(_get(obj, "publish_time", where), where),
            title=_as_str(title, "title", where, allow_empty=True),
            sentences=tuple(sentences),
            gold_label=label,
        ))

    user_ids = {u.id for u in users}
    news_ids = {a.id for a in news}
    engagements = []
    for where, obj in _read_records(engagements_path):
        uid = _as_str(_get(obj, "user_id", where), "user_id", where)
        nid = _as_str(_get(obj, "news_id", where), "news_id", where)
        if uid not in user_ids:
            raise CorpusError(f"{where}: unknown user {uid!r}")
        if nid not in news_ids:
            raise CorpusError(f"{where}: unknown news {nid!r}")
        kind = _get(obj, "kind", where)
        if kind not in ("share", "comment"):
            raise CorpusError(f"{where}: 'kind' must be \"share\" or \"comment\"")
        text = _get(obj, "text", where, required=False)
        if kind == "comment":
            text = _as_str(text if text is not None else "", "text", where)
        elif text is not None:
            text = _as_str(text, "text", where, allow_empty=True)
        engagements.append(Engagement(
            user_id=uid, news_id=nid,
            time=parse_timestamp(_get(obj, "time", where), where),
            kind=kind, text=text,
        ))

    edges = []
    for where, obj in _read_records(edges_path):
        src = _as_str(_get(obj, "src", where), "src", where)
        dst = _as_str(_get(obj, "dst", where), "dst", where)
        if src not in user_ids or dst not in user_ids:
            raise CorpusError(f"{where}: edge references unknown user")
        edges.append((src, dst))

    return Corpus(news=news, users=users, publishers=publishers,
                  engagements=engagements, edges=edges)


def load_corpus_dir(directory):
    directory = Path(directory)
    return load_corpus(
        directory / NEWS_FILE, directory / USERS_FILE, directory / PUBLISHERS_FILE,
        directory / ENGAGEMENTS_FILE, directory / EDGES_FILE,
    )


def save_corpus(corpus, directory):
    """Write a corpus back to its five line-delimited files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    def dump(path, rows):
        with open(path, "w", encoding="utf-8") as handle:
            for row in rows:
                handle.write(json.dumps(row, ensure_ascii=False) + "\n")

    rows = []
    for a in corpus.news:
        row = {"id": a.id, "publisher_id": a.publisher_id,
               "publish_time": format_timestamp(a.publish_time),
               "title": a.title, "sentences": list(a.sentences)}
        if a.gold_label is not None:
            row["label"] = a.gold_label
        rows.append(row)
    dump(directory / NEWS_FILE, rows)

    rows = []
    for u in corpus.users:
        row = {"id": u.id, "followers": u.followers, "followees": u.followees,
               "verified": u.verified}
        if u.register_age_days is not None:
            row["register_age_days"] = u.register_age_days
        if u.credibility is not None:
            row["credibility"] = u.credibility
        rows.append(row)
    dump(directory / USERS_FILE, rows)

    rows = []
    for p in corpus.publishers:
        row = {"id": p.id, "name": p.name}
        if p.bias is not None:
            row["bias"] = p.bias
        rows.append(row)
    dump(directory / PUBLISHERS_FILE, rows)

    rows = []
    for e in corpus.engagements:
        row = {"user_id": e.user_id, "news_id": e.news_id,
               "time": format_timestamp(e.time), "kind": e.kind}
        if e.text is not None:
            row["text"] = e.text
        rows.append(row)
    dump(directory / ENGAGEMENTS_FILE, rows)

    dump(directory / EDGES_FILE, [{"src": s, "dst": d} for s, d in corpus.edges])
    return directory


# ---------------------------------------------------------------------------
# vocabulary / vectorization
# ---------------------------------------------------------------------------

@dataclass
class Vocabulary:
    tokens: list
    index: dict
    doc_freq: np.ndarray
    n_docs: int

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index


def build_vocab(corpus, min_count=1, max_size=None, include_comments=False):
    """Vocabulary of tokens with document frequency >= ``min_count``.

    Documents are news articles (title plus sentences); with
    ``include_comments`` each comment text counts as an additional document.
    Kept tokens are ordered by descending document frequency, ties broken
    lexicographically, truncated to ``max_size``.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    if max_size is not None and max_size < 1:
        raise ValueError("max_size must be >= 1")
    freq = Counter()
    n_docs = 0
    for article in corpus.news:
        freq.update(set(article_tokens(article)))
        n_docs += 1
    if include_comments:
        for eng in corpus.engagements:
            if eng.kind == "comment":
                freq.update(set(tokenize(eng.text)))
                n_docs += 1
    kept = sorted((t for t, c in freq.items() if c >= min_count),
                  key=lambda t: (-freq[t], t))
    if max_size is not None:
        kept = kept[:max_size]
    return Vocabulary(
        tokens=kept,
        index={t: i for i, t in enumerate(kept)},
        doc_freq=np.array([freq[t] for t in kept], dtype=np.int64),
        n_docs=n_docs,
    )


def vectorize_tfidf(corpus, vocab):
    """News-by-term matrix with smoothed log idf and L2-normalized rows.

    Entry (j, t) is ``tf(j, t) * (1 + ln((1 + n) / (1 + df(t))))`` before row
    normalization, where n is the number of documents the vocabulary was
    built over. Rows with no in-vocabulary tokens stay zero and trigger a
    warning.
    """
    n_news = len(corpus.news)
    X = np.zeros((n_news, len(vocab)))
    if len(vocab):
        idf = 1.0 + np.log((1.0 + vocab.n_docs) / (1.0 + vocab.doc_freq))
        for j, article in enumerate(corpus.news):
            counts = Counter(article_tokens(article))
            for token, count in counts.items():
                t = vocab.index.get(token)
                if t is not None:
                    X[j, t] = count * idf[t]
            norm = np.linalg.norm(X[j])
            if norm > 0:
                X[j] /= norm
    zero_rows = [corpus.news[j].id for j in range(n_news) if not X[j].any()]
    if zero_rows:
        warnings.warn(f"{len(zero_rows)} news item(s) have no in-vocabulary "
                      f"tokens and get zero content rows: {zero_rows[:5]}")
    return X


# ---------------------------------------------------------------------------
# interaction networks
# ---------------------------------------------------------------------------

@dataclass
class InteractionNetworks:
    """Matrix view of a corpus.

    content:    news x term TF-IDF matrix (nonnegative)
    adjacency:  symmetric binary user x user follower matrix, zero diagonal
    spreading:  binary user x news engagement matrix within the cutoff window
    publishing: binary publisher x news matrix, one nonzero per news column
    bias:       per-publisher partisan lean in [-1, 1], 0 when unknown
    bias_known: mask of publishers whose bias was present in the profile
    credibility: per-user score in [0, 1]
    """
    content: np.ndarray
    adjacency: np.ndarray
    spreading: np.ndarray
    publishing: np.ndarray
    bias: np.ndarray
    bias_known: np.ndarray
    credibility: np.ndarray
    cutoff_hours: float | None
    news_ids: tuple
    user_ids: tuple
    publisher_ids: tuple
    vocab: Vocabulary

    news_pos: dict = field(init=False, repr=False, compare=False)
    user_pos: dict = field(init=False, repr=False, compare=False)
    publisher_pos: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.news_pos = {n: i for i, n in enumerate(self.news_ids)}
        self.user_pos = {u: i for i, u in enumerate(self.user_ids)}
        self.publisher_pos = {p: i for i, p in enumerate(self.publisher_ids)}

    def engaged_user_indices(self, news_id):
        j = self.news_pos[news_id]
        return np.flatnonzero(self.spreading[:, j])

    def publisher_index_of(self, news_id):
        j = self.news_pos[news_id]
        return int(np.argmax(self.publishing[:, j]))

    def with_credibility(self, credibility):
        credibility = np.asarray(credibility, dtype=float)
        if credibility.shape != (len(self.user_ids),):
            raise ValueError("credibility vector has wrong shape")
        return replace(self, credibility=credibility)


def build_networks(corpus, cutoff_hours=None, *, vocab=None, credibility=None,
                   min_count=1, max_size=None):
    """Materialize the interaction networks for one engagement window.

    ``cutoff_hours`` keeps engagements with time <= publish_time + cutoff;
    ``None`` keeps all. Engagements timestamped before publication are kept
    with a warning. ``credibility`` overrides the per-user vector (otherwise
    profile credibility is used, defaulting to 0.5).
    """
    if cutoff_hours is not None and cutoff_hours < 0:
        raise ValueError("cutoff_hours must be >= 0 or None")
    if vocab is None:
        vocab = build_vocab(corpus, min_count=min_count, max_size=max_size)
    content = vectorize_tfidf(corpus, vocab)

    news_ids = tuple(a.id for a in corpus.news)
    user_ids = tuple(u.id for u in corpus.users)
    publisher_ids = tuple(p.id for p in corpus.publishers)
    news_pos = {n: i for i, n in enumerate(news_ids)}
    user_pos = {u: i for i, u in enumerate(user_ids)}
    publisher_pos = {p: i for i, p in enumerate(publisher_ids)}

    adjacency = np.zeros((len(user_ids), len(user_ids)))
    for src, dst in corpus.edges:
        i, j = user_pos[src], user_pos[dst]
        if i != j:
            adjacency[i, j] = adjacency[j, i] = 1.0

    spreading = np.zeros((len(user_ids), len(news_ids)))
    window = None if cutoff_hours is None else timedelta(hours=cutoff_hours)
    early = 0
    for eng in corpus.engagements:
        published = corpus.news_by_id[eng.news_id].publish_time
        if eng.time < published:
            early += 1
        if window is None or eng.time <= published + window:
            spreading[user_pos[eng.user_id], news_pos[eng.news_id]] = 1.0
    if early:
        warnings.warn(f"{early} engagement(s) predate publication "
                      "(kept; clock skew is common in crawls)")

    publishing = np.zeros((len(publisher_ids), len(news_ids)))
    for a in corpus.news:
        publishing[publisher_pos[a.publisher_id], news_pos[a.id]] = 1.0

    bias = np.zeros(len(publisher_ids))
    bias_known = np.zeros(len(publisher_ids), dtype=bool)
    for p in corpus.publishers:
        if p.bias is not None:
            bias[publisher_pos[p.id]] = p.bias
            bias_known[publisher_pos[p.id]] = True

    if credibility is None:
        credibility = np.full(len(user_ids), 0.5)
        for u in corpus.users:
            if u.credibility is not None:
                credibility[user_pos[u.id]] = u.credibility
    else:
        credibility = np.asarray(credibility, dtype=float)
        if credibility.shape != (len(user_ids),):
            raise ValueError("credibility vector has wrong shape")

    return InteractionNetworks(
        content=content, adjacency=adjacency, spreading=spreading,
        publishing=publishing, bias=bias, bias_known=bias_known,
        credibility=credibility, cutoff_hours=cutoff_hours,
        news_ids=news_ids, user_ids=user_ids, publisher_ids=publisher_ids,
        vocab=vocab,
    )
