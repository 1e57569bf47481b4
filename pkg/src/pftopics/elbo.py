"""Evidence lower bound for the two-channel model, term by term.

The per-document bound is the sum of eight expectations under the mean-field
posterior ``q(theta) q(z) q(xi)``::

    total = t_theta_prior + t_z_given_theta + t_y + t_xi_prior + t_words
            - h_theta - h_z - h_xi

where each ``h_*`` is ``E_q[log q(.)]`` of the corresponding factor (a
negative entropy), so ``-h_z`` and ``-h_xi`` are nonnegative.

Token sums are collapsed to sums over distinct terms weighted by counts. This
is exact because both the topic responsibilities and the switch posterior
depend on a token only through its word type.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import digamma, gammaln, log_expit, xlogy

from .corpus import Corpus, Document
from .model import ModelConfig, ModelParams

TERM_NAMES = (
    "t_theta_prior",
    "t_z_given_theta",
    "t_y",
    "t_xi_prior",
    "t_words",
    "h_theta",
    "h_z",
    "h_xi",
)


@dataclass
class VariationalState:
    """Local and global variational parameters.

    ``phi[d]`` has one row per distinct term of document ``d`` in ascending
    term-id order. ``varphi`` is indexed by vocabulary word, never by document.
    """

    gamma: np.ndarray  # (D, K)
    phi: list  # D arrays of shape (n_terms_d, K)
    varphi: np.ndarray  # (V,)

    def __post_init__(self):
        self.gamma = np.atleast_2d(np.asarray(self.gamma, dtype=float))
        self.varphi = np.asarray(self.varphi, dtype=float)
        self.phi = [np.atleast_2d(np.asarray(f, dtype=float)) for f in self.phi]

    def validate(self) -> None:
        if np.any(self.gamma <= 0):
            raise ValueError("gamma entries must be positive")
        if len(self.phi) != len(self.gamma):
            raise ValueError("phi must have one block per document")
        for f in self.phi:
            if np.any(f < 0) or np.any(np.abs(f.sum(axis=1) - 1.0) > 1e-8):
                raise ValueError("phi rows must lie on the simplex")
        if np.any(self.varphi < 0) or np.any(self.varphi > 1):
            raise ValueError("varphi entries must lie in [0, 1]")


@dataclass
class ElboBreakdown:
    t_theta_prior: float
    t_z_given_theta: float
    t_y: float
    t_xi_prior: float
    t_words: float
    h_theta: float
    h_z: float
    h_xi: float

    @property
    def total(self) -> float:
        return (
            self.t_theta_prior
            + self.t_z_given_theta
            + self.t_y
            + self.t_xi_prior
            + self.t_words
            - self.h_theta
            - self.h_z
            - self.h_xi
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["total"] = self.total
        return out

    def __add__(self, other: "ElboBreakdown") -> "ElboBreakdown":
        return ElboBreakdown(*(getattr(self, n) + getattr(other, n) for n in TERM_NAMES))

    @classmethod
    def zero(cls) -> "ElboBreakdown":
        return cls(*([0.0] * len(TERM_NAMES)))

    def nonfinite_terms(self) -> list[str]:
        return [n for n in TERM_NAMES if not math.isfinite(getattr(self, n))]


def _check_gamma(gamma) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    if np.any(~(gamma > 0)):
        raise ValueError("Dirichlet parameters must be positive")
    return gamma


def dirichlet_expected_log(gamma) -> np.ndarray:
    """E[log theta_k] = digamma(gamma_k) - digamma(sum(gamma)) for theta ~ Dir(gamma).

    Works row-wise on a 2-D array.
    """
    gamma = _check_gamma(gamma)
    return digamma(gamma) - digamma(gamma.sum(axis=-1, keepdims=True))


def dirichlet_moments(gamma) -> tuple[np.ndarray, np.ndarray]:
    """First and second moments (E[theta], E[theta theta^T]) of Dir(gamma)."""
    gamma = _check_gamma(gamma)
    g0 = gamma.sum()
    mean = gamma / g0
    outer = (np.diag(mean) - np.outer(mean, mean)) / (g0 + 1.0) + np.outer(mean, mean)
    return mean, outer


def gaussian_target_term(y: float, gamma, eta, delta: float) -> float:
    """E_q[log N(y | eta^T theta, delta)] under theta ~ Dir(gamma)."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    eta = np.asarray(eta, dtype=float)
    mean, outer = dirichlet_moments(gamma)
    sq = y * y - 2.0 * y * float(eta @ mean) + float(eta @ outer @ eta)
    return -0.5 * math.log(2.0 * math.pi * delta) - sq / (2.0 * delta)


def binary_target_term(y: float, gamma, eta) -> float:
    """Plug-in log Bernoulli(y | sigmoid(eta^T E[theta]))."""
    if y not in (0, 1):
        raise ValueError(f"binary target must be 0 or 1, got {y}")
    eta = np.asarray(eta, dtype=float)
    mean, _ = dirichlet_moments(gamma)
    m = float(eta @ mean)
    return float(log_expit(m)) if y == 1 else float(log_expit(-m))


def target_term(y, gamma, params: ModelParams, target_kind: str) -> float:
    if y is None or target_kind == "none":
        return 0.0
    if target_kind == "real":
        return gaussian_target_term(y, gamma, params.eta, params.delta)
    return binary_target_term(y, gamma, params.eta)


def _gated_log(gate: np.ndarray, prob: np.ndarray, what: str) -> np.ndarray:
    out = xlogy(gate, prob)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"log of zero {what} probability under a nonzero gate weight")
    return out


def elbo_document(
    doc: Document,
    target,
    params: ModelParams,
    config: ModelConfig,
    gamma,
    phi,
    varphi,
) -> ElboBreakdown:
    """ELBO terms for one document.

    ``phi`` has one row per distinct term of ``doc`` (ascending term id).
    Pass ``target=None`` to leave out the target term.
    """
    K, V = params.beta.shape
    gamma = np.asarray(gamma, dtype=float)
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    varphi = np.asarray(varphi, dtype=float)
    terms, counts = doc.term_ids, doc.term_counts.astype(float)
    if gamma.shape != (K,) or phi.shape != (len(terms), K) or varphi.shape != (V,):
        raise ValueError(
            f"dimension mismatch: gamma {gamma.shape}, phi {phi.shape}, varphi {varphi.shape} for K={K}, V={V}"
        )
    if target is not None and config.target_kind == "binary" and target not in (0, 1):
        raise ValueError(f"binary target must be 0 or 1, got {target}")
    alpha = config.alpha_array
    elog = dirichlet_expected_log(gamma)
    gate = varphi[terms]
    p = config.p

    t_theta_prior = gammaln(alpha.sum()) - gammaln(alpha).sum() + ((alpha - 1.0) * elog).sum()
    t_z = float(counts @ (phi @ elog))
    t_y = target_term(target, gamma, params, config.target_kind)
    t_xi = float(counts @ (xlogy(gate, p) + xlogy(1.0 - gate, 1.0 - p)))

    relevant = _gated_log(gate[:, None] * phi, params.beta[:, terms].T, "beta").sum(axis=1)
    background = _gated_log(1.0 - gate, params.pi[terms], "pi")
    t_words = float(counts @ (relevant + background))

    h_theta = gammaln(gamma.sum()) - gammaln(gamma).sum() + ((gamma - 1.0) * elog).sum()
    h_z = float(counts @ xlogy(phi, phi).sum(axis=1))
    h_xi = float(counts @ (xlogy(gate, gate) + xlogy(1.0 - gate, 1.0 - gate)))
    return ElboBreakdown(float(t_theta_prior), t_z, float(t_y), t_xi, t_words, float(h_theta), h_z, h_xi)


def elbo_corpus_breakdown(
    corpus: Corpus, params: ModelParams, config: ModelConfig, state: VariationalState, use_targets: bool = True
) -> ElboBreakdown:
    if len(state.gamma) != len(corpus) or len(state.phi) != len(corpus):
        raise ValueError("variational state does not cover every document")
    total = ElboBreakdown.zero()
    # fixed document order keeps the reduction reproducible
    for d, doc in enumerate(corpus.documents):
        y = doc.target if use_targets else None
        total = total + elbo_document(doc, y, params, config, state.gamma[d], state.phi[d], state.varphi)
    return total


def elbo_corpus(corpus: Corpus, params: ModelParams, config: ModelConfig, state: VariationalState) -> float:
    """Sum of per-document ELBO totals."""
    if len(corpus) == 0:
        return 0.0
    return elbo_corpus_breakdown(corpus, params, config, state).total
