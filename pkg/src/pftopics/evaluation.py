"""Topic coherence, prediction metrics, switch summaries and topic reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .corpus import Corpus, Vocabulary
from .model import ModelParams

PMI_EPS = 1e-12


def document_occurrence(reference: Corpus) -> np.ndarray:
    """Boolean (M, V) matrix: does word v occur in document d."""
    X = reference.to_matrix()
    X.data[:] = 1
    return X.astype(bool)


def pmi(p_i: float, p_j: float, p_ij: float, eps: float = PMI_EPS, normalized: bool = False) -> float:
    """log((p_ij + eps) / (p_i p_j)); with ``normalized`` divided by -log p_ij."""
    value = math.log((p_ij + eps) / (p_i * p_j))
    if not normalized:
        return value
    if p_ij <= 0.0:
        return -1.0
    if p_ij >= 1.0:
        return 1.0
    return value / -math.log(p_ij)


def topic_coherence(
    topic: np.ndarray, occurrence, top_n: int = 50, eps: float = PMI_EPS, normalized: bool = False
) -> float | None:
    """Coherence of one topic; ``None`` if fewer than two top words occur in the reference.

    The sum of PMI over unordered pairs of the scoreable top words is divided
    by N(N-1), N being the number of scoreable words.
    """
    topic = np.asarray(topic, dtype=float)
    top = _top_indices(topic, top_n)
    M = occurrence.shape[0]
    cols = occurrence[:, top]
    df = np.asarray(cols.sum(axis=0)).ravel()
    keep = df > 0
    if keep.sum() < 2:
        return None
    cols = cols[:, np.flatnonzero(keep)].astype(np.int64)
    df = df[keep].astype(float)
    joint = np.asarray((cols.T @ cols).todense(), dtype=float)
    n = len(df)
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            total += pmi(df[i] / M, df[j] / M, joint[i, j] / M, eps, normalized)
    return total / (n * (n - 1))


def coherence(topics, reference: Corpus, top_n: int = 50, normalized: bool = False, eps: float = PMI_EPS) -> float:
    """Mean topic coherence over ``topics`` (rows on the vocabulary simplex).

    Probabilities are document-level occurrence rates in ``reference``. Words
    that never occur in the reference are left out of every pair.
    """
    if len(reference) == 0:
        raise ValueError("reference corpus is empty")
    if top_n < 2:
        raise ValueError("top_n must be >= 2")
    topics = np.atleast_2d(np.asarray(topics, dtype=float))
    if topics.shape[1] != reference.V:
        raise ValueError(f"topics cover {topics.shape[1]} words, reference vocabulary has {reference.V}")
    occurrence = document_occurrence(reference)
    scores = [topic_coherence(t, occurrence, top_n, eps, normalized) for t in topics]
    scored = [s for s in scores if s is not None]
    if not scored:
        raise ValueError("no topic has two or more top words occurring in the reference corpus")
    return float(np.mean(scored))


def rmse(predictions, targets) -> float:
    predictions = np.asarray(predictions, dtype=float).ravel()
    targets = np.asarray(targets, dtype=float).ravel()
    if len(predictions) != len(targets):
        raise ValueError(f"length mismatch: {len(predictions)} predictions, {len(targets)} targets")
    if len(targets) == 0:
        raise ValueError("rmse of empty input")
    return float(np.sqrt(np.mean((predictions - targets) ** 2)))


def auc(scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic (ties count 1/2)."""
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel()
    if len(scores) != len(labels):
        raise ValueError(f"length mismatch: {len(scores)} scores, {len(labels)} labels")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0 or 1")
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def prediction_metric(predictions, targets, target_kind: str) -> float:
    """RMSE for real targets, AUC for binary ones."""
    if target_kind == "binary":
        return auc(predictions, targets)
    return rmse(predictions, targets)


def relevant_fraction(varphi, threshold: float = 0.5) -> float:
    varphi = np.asarray(varphi, dtype=float)
    if varphi.size == 0:
        return 0.0
    return float(np.mean(varphi > threshold))


@dataclass
class Metrics:
    coherence: float
    relevant_fraction: float
    rmse: float | None = None
    auc: float | None = None

    def __post_init__(self):
        if self.auc is not None and not 0.0 <= self.auc <= 1.0:
            raise ValueError("auc must lie in [0, 1]")
        if self.rmse is not None and self.rmse < 0:
            raise ValueError("rmse must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "coherence": self.coherence,
            "rmse": self.rmse,
            "auc": self.auc,
            "relevant_fraction": self.relevant_fraction,
        }


# ---------------------------------------------------------------------------
# reports


def _top_indices(row: np.ndarray, n: int) -> np.ndarray:
    # probability descending, vocabulary index ascending on ties
    order = np.lexsort((np.arange(len(row)), -row))
    return order[:n]


@dataclass
class TopicWord:
    term: str
    probability: float
    varphi: float


@dataclass
class TopicEntry:
    index: int
    eta: float
    words: list[TopicWord]


@dataclass
class TopicReport:
    topics: list[TopicEntry]
    background: list[TopicWord]
    highest: int
    lowest: int
    extra: dict = field(default_factory=dict)

    def ordered(self) -> list[TopicEntry]:
        """Topics with the highest and lowest coefficient first, then by descending eta."""
        first = [self.topics[self.highest]]
        if self.lowest != self.highest:
            first.append(self.topics[self.lowest])
        rest = sorted(
            (t for t in self.topics if t.index not in (self.highest, self.lowest)), key=lambda t: (-t.eta, t.index)
        )
        return first + rest

    def to_dict(self) -> dict:
        def words(ws):
            return [{"term": w.term, "probability": w.probability, "varphi": w.varphi} for w in ws]

        return {
            "highest": self.highest,
            "lowest": self.lowest,
            "topics": [{"index": t.index, "eta": t.eta, "words": words(t.words)} for t in self.ordered()],
            "background": words(self.background),
        }

    def to_text(self) -> str:
        lines = []
        for t in self.ordered():
            tag = " (highest eta)" if t.index == self.highest else " (lowest eta)" if t.index == self.lowest else ""
            lines.append(f"topic {t.index:>3}  eta={t.eta:+.4f}{tag}")
            lines.extend(_word_lines(t.words))
        lines.append("background")
        lines.extend(_word_lines(self.background))
        return "\n".join(lines) + "\n"


def _word_lines(words: list[TopicWord]) -> list[str]:
    if not words:
        return []
    width = max(len(w.term) for w in words)
    return [f"    {w.term:<{width}}  {w.probability:.5f}  varphi={w.varphi:.3f}" for w in words]


def topic_report(params: ModelParams, varphi, vocab: Vocabulary, top_n: int = 10) -> TopicReport:
    """Top words of every topic and of the background topic."""
    if top_n > params.V:
        raise ValueError(f"top_n={top_n} exceeds vocabulary size {params.V}")
    varphi = np.asarray(varphi, dtype=float)

    def words(row):
        return [TopicWord(vocab[i], float(row[i]), float(varphi[i])) for i in _top_indices(row, top_n)]

    topics = [TopicEntry(k, float(params.eta[k]), words(params.beta[k])) for k in range(params.K)]
    # first index wins ties so the choice is deterministic
    highest = int(np.argmax(params.eta))
    lowest = int(np.argmin(params.eta))
    return TopicReport(topics, words(params.pi), highest, lowest)
