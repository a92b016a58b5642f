"""Learning fake-news detectors from a few gold labels plus weak social signals.

Subpackages/modules:

- ``corpus``:   record types, line-delimited ingestion, TF-IDF, interaction networks
- ``weaksup``:  credibility/bias/sentiment labeling rules and log-odds aggregation
- ``trifn``:    constrained nonnegative factorization detector over the
                publisher-news-user network
- ``coattend``: sentence-comment co-attention detector with explanation ranking
- ``synthgen``: seeded generator of corpora with planted social signals
- ``metrics``:  classification and ranking metrics
- ``harness``:  cross-validated sweeps, baselines, explanation evaluation
- ``cli``:      the ``weaknews`` command line
"""

__version__ = "0.1.0"
