"""Bag-of-words corpora with optional per-document targets.

Files on disk use two plain-text formats:

* vocabulary: UTF-8, one term per line, the line number is the term id;
* documents: one document per line,
  ``doc_id<TAB>target<TAB>termId:count termId:count ...`` where ``target`` is
  a decimal number, ``0``/``1`` or ``-`` when absent.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

TARGET_KINDS = ("real", "binary", "none")


class CorpusError(ValueError):
    """Raised for malformed or inconsistent corpus data."""


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        terms = tuple(self.terms)
        object.__setattr__(self, "terms", terms)
        if not terms:
            raise CorpusError("vocabulary must contain at least one term")
        index = {t: i for i, t in enumerate(terms)}
        if len(index) != len(terms):
            seen = set()
            dups = [t for t in terms if t in seen or seen.add(t)]
            raise CorpusError(f"duplicate vocabulary terms: {dups[:5]}")
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.terms)

    def __getitem__(self, i: int) -> str:
        return self.terms[i]


@dataclass(frozen=True)
class Document:
    """One document: sparse term counts plus an optional target."""

    id: str
    counts: Mapping[int, int]
    target: float | None = None

    def __post_init__(self):
        counts = {int(k): int(v) for k, v in sorted(self.counts.items())}
        for k, v in counts.items():
            if k < 0:
                raise CorpusError(f"document {self.id!r}: negative term id {k}")
            if v < 1:
                raise CorpusError(f"document {self.id!r}: count {v} for term {k} must be >= 1")
        if not counts:
            raise CorpusError(f"document {self.id!r} has no tokens")
        object.__setattr__(self, "counts", counts)
        if self.target is not None:
            object.__setattr__(self, "target", float(self.target))

    @property
    def term_ids(self) -> np.ndarray:
        return np.fromiter(self.counts.keys(), dtype=np.int64, count=len(self.counts))

    @property
    def term_counts(self) -> np.ndarray:
        return np.fromiter(self.counts.values(), dtype=np.int64, count=len(self.counts))

    @property
    def n_tokens(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class Corpus:
    vocabulary: Vocabulary
    documents: tuple[Document, ...]
    target_kind: str = "none"

    def __post_init__(self):
        docs = tuple(self.documents)
        object.__setattr__(self, "documents", docs)
        if self.target_kind not in TARGET_KINDS:
            raise CorpusError(f"unknown target kind {self.target_kind!r}")
        V = len(self.vocabulary)
        for doc in docs:
            top = max(doc.counts)
            if top >= V:
                raise CorpusError(f"document {doc.id!r}: term id {top} out of range for V={V}")
            if self.target_kind == "none":
                if doc.target is not None:
                    raise CorpusError(f"document {doc.id!r} has a target but target_kind is 'none'")
            elif doc.target is None:
                raise CorpusError(f"document {doc.id!r} is missing a {self.target_kind} target")
            elif self.target_kind == "binary" and doc.target not in (0.0, 1.0):
                raise CorpusError(f"document {doc.id!r}: binary target must be 0 or 1, got {doc.target}")
            elif not math.isfinite(doc.target):
                raise CorpusError(f"document {doc.id!r}: non-finite target")

    def __len__(self) -> int:
        return len(self.documents)

    @property
    def V(self) -> int:
        return len(self.vocabulary)

    @property
    def targets(self) -> np.ndarray | None:
        if self.target_kind == "none":
            return None
        return np.array([d.target for d in self.documents], dtype=float)

    def to_matrix(self) -> sp.csr_matrix:
        """Document-term count matrix of shape ``(M, V)``."""
        indptr = [0]
        indices: list[int] = []
        data: list[int] = []
        for doc in self.documents:
            indices.extend(doc.counts.keys())
            data.extend(doc.counts.values())
            indptr.append(len(indices))
        return sp.csr_matrix(
            (np.asarray(data, dtype=np.int64), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
            shape=(len(self.documents), self.V),
        )

    def subset(self, positions: Iterable[int]) -> "Corpus":
        return Corpus(self.vocabulary, tuple(self.documents[i] for i in positions), self.target_kind)


def infer_target_kind(targets: Sequence[float | None]) -> str:
    present = [t for t in targets if t is not None]
    if not present:
        return "none"
    if len(present) != len(targets):
        raise CorpusError("mixed target kinds: some documents have targets and some do not")
    if all(t in (0.0, 1.0) for t in present):
        return "binary"
    return "real"


def corpus_from_matrix(
    X,
    y=None,
    vocabulary: Vocabulary | Sequence[str] | None = None,
    target_kind: str | None = None,
    ids: Sequence[str] | None = None,
) -> Corpus:
    """Build a corpus from a dense or sparse ``(M, V)`` count matrix.

    Rows with no tokens are rejected, since every document needs N >= 1.
    """
    X = sp.csr_matrix(X)
    M, V = X.shape
    if vocabulary is None:
        vocabulary = Vocabulary(tuple(f"w{v}" for v in range(V)))
    elif not isinstance(vocabulary, Vocabulary):
        vocabulary = Vocabulary(tuple(vocabulary))
    if len(vocabulary) != V:
        raise CorpusError(f"vocabulary has {len(vocabulary)} terms but X has {V} columns")
    targets: list[float | None] = [None] * M if y is None else [float(t) for t in np.asarray(y).ravel()]
    if len(targets) != M:
        raise CorpusError(f"y has {len(targets)} entries but X has {M} rows")
    if target_kind is None:
        target_kind = infer_target_kind(targets)
    docs = []
    for m in range(M):
        lo, hi = X.indptr[m], X.indptr[m + 1]
        counts = {int(j): int(c) for j, c in zip(X.indices[lo:hi], X.data[lo:hi]) if c != 0}
        doc_id = str(ids[m]) if ids is not None else str(m)
        docs.append(Document(doc_id, counts, targets[m]))
    return Corpus(vocabulary, tuple(docs), target_kind)


# ---------------------------------------------------------------------------
# file formats


def load_vocabulary(path) -> Vocabulary:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"vocabulary file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        terms = [line.rstrip("\r\n") for line in fh]
    while terms and terms[-1] == "":
        terms.pop()
    return Vocabulary(tuple(terms))


def _parse_target(raw: str, path, lineno: int) -> float | None:
    if raw == "-":
        return None
    try:
        value = float(raw)
    except ValueError:
        raise CorpusError(f"{path}:{lineno}: bad target {raw!r}") from None
    if not math.isfinite(value):
        raise CorpusError(f"{path}:{lineno}: non-finite target {raw!r}")
    return value


def _parse_doc_line(line: str, V: int, path, lineno: int) -> Document:
    parts = line.split("\t")
    if len(parts) != 3:
        raise CorpusError(f"{path}:{lineno}: expected 3 TAB-separated fields, got {len(parts)}")
    doc_id, raw_target, body = parts
    if not doc_id:
        raise CorpusError(f"{path}:{lineno}: empty document id")
    counts: dict[int, int] = {}
    for pair in body.split():
        term, sep, cnt = pair.partition(":")
        if not sep:
            raise CorpusError(f"{path}:{lineno}: malformed pair {pair!r}")
        try:
            term_id, count = int(term), int(cnt)
        except ValueError:
            raise CorpusError(f"{path}:{lineno}: malformed pair {pair!r}") from None
        if not 0 <= term_id < V:
            raise CorpusError(f"{path}:{lineno}: term id {term_id} out of range for V={V}")
        if count <= 0:
            raise CorpusError(f"{path}:{lineno}: count must be positive, got {count}")
        counts[term_id] = counts.get(term_id, 0) + count
    if not counts:
        raise CorpusError(f"{path}:{lineno}: document {doc_id!r} has no tokens")
    return Document(doc_id, counts, _parse_target(raw_target, path, lineno))


def load_documents(path, vocabulary: Vocabulary, target_kind: str | None = None) -> Corpus:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"documents file not found: {path}")
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            docs.append(_parse_doc_line(line, len(vocabulary), path, lineno))
    inferred = infer_target_kind([d.target for d in docs])
    if target_kind is None:
        target_kind = inferred
    elif target_kind == "real" and inferred == "binary":
        pass  # 0/1-valued real targets are still real
    elif target_kind != inferred:
        raise CorpusError(f"{path}: requested target kind {target_kind!r} but file holds {inferred!r}")
    return Corpus(vocabulary, tuple(docs), target_kind)


def load_corpus(vocab_path, docs_path, target_kind: str | None = None) -> Corpus:
    """Read a vocabulary file and a documents file into a :class:`Corpus`.

    ``target_kind`` is inferred unless given: binary when every target is
    exactly 0 or 1, none when every target is ``-``, real otherwise.
    """
    return load_documents(docs_path, load_vocabulary(vocab_path), target_kind)


def _format_target(target: float | None, kind: str) -> str:
    if target is None:
        return "-"
    if kind == "binary":
        return str(int(target))
    return repr(float(target))


def write_vocabulary(vocabulary: Vocabulary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for term in vocabulary.terms:
            fh.write(term + "\n")


def write_documents(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            body = " ".join(f"{k}:{v}" for k, v in doc.counts.items())
            fh.write(f"{doc.id}\t{_format_target(doc.target, corpus.target_kind)}\t{body}\n")


def write_corpus(corpus: Corpus, vocab_path, docs_path) -> None:
    write_vocabulary(corpus.vocabulary, vocab_path)
    write_documents(corpus, docs_path)


def load_stoplist(path) -> set[str]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"stop-list file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return {line.strip() for line in fh if line.strip()}


# ---------------------------------------------------------------------------
# preprocessing


def _restrict(corpus: Corpus, keep: np.ndarray) -> Corpus:
    """Keep the vocabulary columns flagged in ``keep`` and re-index documents."""
    if not keep.any():
        raise CorpusError("pruning removed the entire vocabulary")
    new_id = np.full(corpus.V, -1, dtype=np.int64)
    new_id[keep] = np.arange(int(keep.sum()))
    vocab = Vocabulary(tuple(t for t, k in zip(corpus.vocabulary.terms, keep) if k))
    docs = []
    dropped = 0
    for doc in corpus.documents:
        counts = {int(new_id[k]): v for k, v in doc.counts.items() if keep[k]}
        if not counts:
            dropped += 1
            continue
        docs.append(Document(doc.id, counts, doc.target))
    if dropped:
        logger.info("dropped %d documents left empty by pruning", dropped)
    if not docs:
        raise CorpusError("pruning left no non-empty documents")
    return Corpus(vocab, tuple(docs), corpus.target_kind)


def document_frequency(corpus: Corpus) -> np.ndarray:
    df = np.zeros(corpus.V, dtype=np.int64)
    for doc in corpus.documents:
        df[doc.term_ids] += 1
    return df


def prune_vocabulary(corpus: Corpus, min_docs: int = 10, max_doc_frac: float = 0.5) -> Corpus:
    """Drop terms seen in fewer than ``min_docs`` or more than ``max_doc_frac * M`` documents.

    Both thresholds are strict, so a term exactly at either boundary is kept.
    Documents that lose all their tokens are dropped.
    """
    if not 0 < max_doc_frac <= 1:
        raise CorpusError(f"max_doc_frac must be in (0, 1], got {max_doc_frac}")
    if min_docs < 0:
        raise CorpusError(f"min_docs must be >= 0, got {min_docs}")
    df = document_frequency(corpus)
    keep = (df >= min_docs) & (df <= max_doc_frac * len(corpus))
    if keep.all():
        return corpus
    return _restrict(corpus, keep)


def remove_stopwords(corpus: Corpus, stopwords: Iterable[str]) -> Corpus:
    stop = set(stopwords)
    keep = np.array([t not in stop for t in corpus.vocabulary.terms])
    if keep.all():
        return corpus
    return _restrict(corpus, keep)


def split_sizes(M: int, fractions: Sequence[float]) -> tuple[int, ...]:
    fractions = tuple(float(f) for f in fractions)
    if any(f <= 0 for f in fractions):
        raise CorpusError(f"split fractions must be positive, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise CorpusError(f"split fractions must sum to 1, got {sum(fractions)}")
    if M < len(fractions):
        raise CorpusError(f"cannot split {M} documents into {len(fractions)} parts")
    # the 1e-9 slack keeps e.g. 626/5006 * 5006 from flooring to 625
    rest = [int(math.floor(f * M + 1e-9)) for f in fractions[1:]]
    return (M - sum(rest), *rest)


def split_corpus(
    corpus: Corpus, fractions: Sequence[float] = (0.75, 0.125, 0.125), seed: int = 0
) -> tuple[Corpus, Corpus, Corpus]:
    """Shuffle deterministically under ``seed`` and cut into train/val/test.

    Validation and test sizes are floored; the remainder goes to train.
    """
    if len(fractions) != 3:
        raise CorpusError("expected three split fractions (train, val, test)")
    n_train, n_val, _ = split_sizes(len(corpus), fractions)
    order = np.random.default_rng(seed).permutation(len(corpus))
    return (
        corpus.subset(order[:n_train]),
        corpus.subset(order[n_train : n_train + n_val]),
        corpus.subset(order[n_train + n_val :]),
    )
