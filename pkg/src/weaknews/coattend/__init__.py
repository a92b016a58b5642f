"""Explainable sentence-comment co-attention detector.

Encodes news sentences and user comments with word-attentive bidirectional
LSTMs, fuses the two sides through a co-attention affinity, classifies, and
ranks sentences/comments by attention weight as explanations. Pure numpy
with hand-written reverse-mode gradients (finite-difference checked).
"""

from .model import (CoAttendConfig, CoAttentionModel, Explanation, MODES,
                    co_attention, encode_side, explain, forward,
                    load_model, loss_and_grads, save_model)
from .training import EncodedArticle, ablate, encode_article, train

__all__ = [
    "CoAttendConfig", "CoAttentionModel", "Explanation", "MODES",
    "co_attention", "encode_side", "explain", "forward", "load_model",
    "loss_and_grads", "save_model", "EncodedArticle", "ablate",
    "encode_article", "train",
]
