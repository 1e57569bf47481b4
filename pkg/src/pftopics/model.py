"""Model configuration, parameters, the generative sampler and JSON persistence."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .corpus import Corpus, Document, Vocabulary

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters that stay fixed during training.

    ``alpha`` defaults to a vector of ones. ``p`` is the prior probability
    that a token comes from the relevant topics rather than the background
    topic; ``p == 1`` recovers plain sLDA.
    """

    K: int
    p: float = 0.2
    alpha: tuple[float, ...] | None = None
    target_kind: str = "real"
    seed: int = 0

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K}")
        object.__setattr__(self, "K", int(self.K))
        if not 0 < self.p <= 1:
            raise ValueError(f"switch prior p must be in (0, 1], got {self.p}")
        object.__setattr__(self, "p", float(self.p))
        alpha = (1.0,) * self.K if self.alpha is None else tuple(float(a) for a in np.ravel(self.alpha))
        if len(alpha) != self.K:
            raise ValueError(f"alpha has length {len(alpha)}, expected K={self.K}")
        if any(not a > 0 for a in alpha):
            raise ValueError("alpha entries must be positive")
        object.__setattr__(self, "alpha", alpha)
        if self.target_kind not in ("real", "binary", "none"):
            raise ValueError(f"unknown target kind {self.target_kind!r}")

    @property
    def alpha_array(self) -> np.ndarray:
        return np.asarray(self.alpha, dtype=float)


def slda_special_case(config: ModelConfig) -> ModelConfig:
    """The same configuration with the background channel switched off (p = 1)."""
    return dataclasses.replace(config, p=1.0)


def _check_simplex_rows(a: np.ndarray, name: str) -> None:
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has negative or non-finite entries")
    if np.any(np.abs(a.sum(axis=-1) - 1.0) > 1e-8):
        raise ValueError(f"{name} rows must sum to 1")


@dataclass
class ModelParams:
    beta: np.ndarray  # (K, V) relevant topics
    pi: np.ndarray  # (V,) background topic
    eta: np.ndarray  # (K,) GLM weights
    delta: float = 1.0  # Gaussian target variance

    def __post_init__(self):
        self.beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        self.pi = np.asarray(self.pi, dtype=float)
        self.eta = np.asarray(self.eta, dtype=float)
        self.delta = float(self.delta)
        self.validate()

    @property
    def K(self) -> int:
        return self.beta.shape[0]

    @property
    def V(self) -> int:
        return self.beta.shape[1]

    def validate(self) -> None:
        K, V = self.beta.shape
        if self.pi.shape != (V,):
            raise ValueError(f"pi has shape {self.pi.shape}, expected ({V},)")
        if self.eta.shape != (K,):
            raise ValueError(f"eta has shape {self.eta.shape}, expected ({K},)")
        _check_simplex_rows(self.beta, "beta")
        _check_simplex_rows(self.pi, "pi")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")


@dataclass
class SampledLatents:
    theta: np.ndarray  # (K,)
    z: np.ndarray  # (N,) topic per token
    xi: np.ndarray  # (N,) switch per token
    words: np.ndarray  # (N,) word per token


def _draw_categorical(rng: np.random.Generator, cdf: np.ndarray, rows: np.ndarray) -> np.ndarray:
    # scaling u by the row total keeps zero-probability words unreachable
    totals = cdf[rows, -1]
    u = rng.random(len(rows)) * totals
    out = np.empty(len(rows), dtype=np.int64)
    for r in np.unique(rows):
        sel = rows == r
        out[sel] = np.searchsorted(cdf[r], u[sel], side="right")
    return out


def sample_document(
    config: ModelConfig, params: ModelParams, n_tokens: int, rng: np.random.Generator
) -> tuple[SampledLatents, float | None]:
    K = params.K
    theta = rng.dirichlet(config.alpha_array)
    z = rng.choice(K, size=n_tokens, p=theta)
    xi = (rng.random(n_tokens) < config.p).astype(np.int8)
    cdf = np.cumsum(np.vstack([params.beta, params.pi[None, :]]), axis=1)
    words = _draw_categorical(rng, cdf, np.where(xi == 1, z, K))
    mean = float(params.eta @ theta)
    if config.target_kind == "real":
        y = float(rng.normal(mean, np.sqrt(params.delta)))
    elif config.target_kind == "binary":
        y = float(rng.random() < expit(mean))
    else:
        y = None
    return SampledLatents(theta, z, xi, words), y


def sample_corpus(
    config: ModelConfig,
    params: ModelParams,
    num_docs: int,
    tokens_per_doc: int,
    rng_seed: int,
    vocabulary: Vocabulary | None = None,
) -> tuple[Corpus, list[SampledLatents]]:
    """Draw a synthetic corpus from the two-channel generative process.

    Document ``d`` uses its own stream seeded by ``(rng_seed, d)``, so output
    does not depend on the order documents are generated in.
    """
    if tokens_per_doc < 1:
        raise ValueError("tokens_per_doc must be >= 1")
    if params.K != config.K:
        raise ValueError(f"params have K={params.K}, config has K={config.K}")
    V = params.V
    if vocabulary is None:
        vocabulary = Vocabulary(tuple(f"w{v}" for v in range(V)))
    docs = []
    latents = []
    for d in range(num_docs):
        rng = np.random.default_rng([rng_seed, d])
        lat, y = sample_document(config, params, tokens_per_doc, rng)
        counts = np.bincount(lat.words, minlength=V)
        nz = np.flatnonzero(counts)
        docs.append(Document(f"d{d}", dict(zip(nz.tolist(), counts[nz].tolist())), y))
        latents.append(lat)
    kind = config.target_kind if num_docs else "none"
    return Corpus(vocabulary, tuple(docs), kind), latents


# ---------------------------------------------------------------------------
# persistence


@dataclass
class TrainedModel:
    """Everything needed to score new documents: config, params, word switches."""

    vocabulary: Vocabulary
    config: ModelConfig
    params: ModelParams
    varphi: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.varphi is None:
            self.varphi = np.ones(self.params.V)
        self.varphi = np.asarray(self.varphi, dtype=float)
        if len(self.vocabulary) != self.params.V:
            raise ValueError("vocabulary size does not match parameters")
        if self.varphi.shape != (self.params.V,):
            raise ValueError("varphi must have one entry per vocabulary word")

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "K": self.params.K,
            "V": self.params.V,
            "vocab": list(self.vocabulary.terms),
            "beta": self.params.beta.tolist(),
            "pi": self.params.pi.tolist(),
            "eta": self.params.eta.tolist(),
            "delta": self.params.delta,
            "p": self.config.p,
            "alpha": list(self.config.alpha),
            "varphi": self.varphi.tolist(),
            "target_kind": self.config.target_kind,
            "seed": self.config.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainedModel":
        version = data.get("format_version")
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported model format_version {version!r}")
        config = ModelConfig(
            K=data["K"],
            p=data["p"],
            alpha=tuple(data["alpha"]),
            target_kind=data["target_kind"],
            seed=data.get("seed", 0),
        )
        params = ModelParams(
            beta=np.asarray(data["beta"], dtype=float),
            pi=np.asarray(data["pi"], dtype=float),
            eta=np.asarray(data["eta"], dtype=float),
            delta=data["delta"],
        )
        if params.V != data["V"] or params.K != data["K"]:
            raise ValueError("model JSON dimensions disagree with its arrays")
        return cls(Vocabulary(tuple(data["vocab"])), config, params, np.asarray(data["varphi"], dtype=float))


def save_model(model: TrainedModel, path) -> None:
    # json writes floats with repr, which round-trips exactly
    Path(path).write_text(json.dumps(model.to_dict()) + "\n", encoding="utf-8")


def load_model(path) -> TrainedModel:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"model file not found: {path}")
    return TrainedModel.from_dict(json.loads(path.read_text(encoding="utf-8")))


def params_from_arrays(beta: Sequence, pi: Sequence, eta: Sequence, delta: float = 1.0) -> ModelParams:
    """Normalise raw nonnegative weights into a valid :class:`ModelParams`."""
    beta = np.atleast_2d(np.asarray(beta, dtype=float))
    pi = np.asarray(pi, dtype=float)
    return ModelParams(beta / beta.sum(axis=1, keepdims=True), pi / pi.sum(), np.asarray(eta, dtype=float), delta)
