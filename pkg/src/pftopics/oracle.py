"""Exact marginal likelihood and switch posteriors for tiny instances.

The topic mixture is integrated out numerically over the (K-1)-simplex with
K <= 3. The simplex is parameterised by stick breaking,
``theta_1 = u``, ``theta_2 = (1-u) v``, ``theta_3 = (1-u)(1-v)``, and the
Dirichlet density together with the stick-breaking Jacobian becomes a
product of Jacobi weights in ``u`` and ``v``. Gauss-Jacobi rules then absorb
those (possibly singular) weights exactly, so the remaining integrand is the
per-token mixture polynomial times the smooth target density.

Switch configurations are enumerated explicitly, so a configuration whose
weight contains an exact zero factor contributes exactly zero.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import betaln, expit, gammaln, logsumexp, roots_jacobi

from .corpus import Document
from .model import ModelConfig, ModelParams

MAX_ENUMERATION = 10**6


class QuadratureError(RuntimeError):
    pass


@dataclass
class TinyInstance:
    config: ModelConfig
    params: ModelParams
    doc: Document
    target: float | None = None

    def __post_init__(self):
        K, V = self.params.beta.shape
        N = self.doc.n_tokens
        if K > 3:
            raise ValueError(f"tiny instances need K <= 3, got {K}")
        if V > 6:
            raise ValueError(f"tiny instances need V <= 6, got {V}")
        if N > 6:
            raise ValueError(f"tiny instances need at most 6 tokens, got {N}")
        if 2**N * K**N > MAX_ENUMERATION:
            raise ValueError("instance exceeds the enumeration bound")
        if max(self.doc.counts) >= V:
            raise ValueError("document uses a term outside the vocabulary")

    @property
    def tokens(self) -> np.ndarray:
        return np.repeat(self.doc.term_ids, self.doc.term_counts)


@lru_cache(maxsize=64)
def _jacobi01(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1] for the weight x**a (1-x)**b."""
    x, w = roots_jacobi(n, b, a)  # weight (1-t)**b (1+t)**a on [-1, 1]
    nodes = (x + 1.0) / 2.0
    weights = w / 2.0 ** (a + b + 1.0)
    return nodes, weights


def simplex_rule(alpha, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes on the simplex with weights for the Dir(alpha) measure.

    Weights sum to one (up to rounding): integrating f against them gives
    E_{Dir(alpha)}[f(theta)], exactly for polynomials of degree < 2n.
    """
    alpha = np.asarray(alpha, dtype=float)
    K = len(alpha)
    if K == 1:
        return np.ones((1, 1)), np.ones(1)
    if K == 2:
        u, wu = _jacobi01(n, alpha[0] - 1.0, alpha[1] - 1.0)
        theta = np.column_stack([u, 1.0 - u])
        return theta, wu / math.exp(betaln(alpha[0], alpha[1]))
    if K == 3:
        u, wu = _jacobi01(n, alpha[0] - 1.0, alpha[1] + alpha[2] - 1.0)
        v, wv = _jacobi01(n, alpha[1] - 1.0, alpha[2] - 1.0)
        U, Vv = np.meshgrid(u, v, indexing="ij")
        theta = np.column_stack([U.ravel(), ((1 - U) * Vv).ravel(), ((1 - U) * (1 - Vv)).ravel()])
        log_norm = gammaln(alpha.sum()) - gammaln(alpha).sum()
        return theta, np.outer(wu, wv).ravel() * math.exp(log_norm)
    raise ValueError("simplex quadrature supports K <= 3")


def _log_target_density(inst: TinyInstance, theta: np.ndarray) -> np.ndarray:
    if inst.target is None or inst.config.target_kind == "none":
        return np.zeros(len(theta))
    m = theta @ inst.params.eta
    if inst.config.target_kind == "real":
        delta = inst.params.delta
        return -0.5 * np.log(2.0 * math.pi * delta) - (inst.target - m) ** 2 / (2.0 * delta)
    y = inst.target
    with np.errstate(divide="ignore"):
        return np.log(expit(m)) if y == 1 else np.log(expit(-m))


def _token_factors(inst: TinyInstance, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per node and token: relevant-channel and background-channel probabilities."""
    w = inst.tokens
    p = inst.config.p
    relevant = p * (theta @ inst.params.beta[:, w])  # (nodes, N)
    background = np.broadcast_to((1.0 - p) * inst.params.pi[w], relevant.shape)
    return relevant, background


def _log_integral(log_integrand: np.ndarray, weights: np.ndarray) -> float:
    with np.errstate(divide="ignore"):
        return float(logsumexp(log_integrand + np.log(weights)))


def _log_likelihood_at(inst: TinyInstance, n: int) -> float:
    theta, weights = simplex_rule(inst.config.alpha_array, n)
    relevant, background = _token_factors(inst, theta)
    with np.errstate(divide="ignore"):
        log_f = np.log(relevant + background).sum(axis=1) + _log_target_density(inst, theta)
    return _log_integral(log_f, weights)


def _monte_carlo_log_likelihood(inst: TinyInstance, samples: int, seed: int = 0) -> tuple[float, float]:
    rng = np.random.default_rng(seed)
    chunk = 10**6
    vals = []
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        theta = rng.dirichlet(inst.config.alpha_array, size=m)
        relevant, background = _token_factors(inst, theta)
        vals.append(np.prod(relevant + background, axis=1) * np.exp(_log_target_density(inst, theta)))
        done += m
    f = np.concatenate(vals)
    mean = f.mean()
    se = f.std(ddof=1) / math.sqrt(len(f))
    return math.log(mean), se / mean


def exact_log_likelihood(
    inst: TinyInstance, quadrature_points: int = 200, check: bool = True, mc_samples: int = 10**7
) -> float:
    """log p(w, y) with theta integrated out and every switch summed over.

    With ``check`` the value is compared against a rule with four times as
    many points per dimension. For K = 3 a disagreement falls back to Monte
    Carlo; otherwise it raises :class:`QuadratureError`.
    """
    value = _log_likelihood_at(inst, quadrature_points)
    if not check or inst.config.K == 1:
        return value
    refined = _log_likelihood_at(inst, 4 * quadrature_points)
    if math.isfinite(value) and abs(refined - value) <= 1e-5 * max(1.0, abs(refined)):
        return refined
    if value == refined == -math.inf:
        return value
    if inst.config.K == 3:
        estimate, _ = _monte_carlo_log_likelihood(inst, mc_samples)
        return estimate
    raise QuadratureError(f"quadrature refinement disagrees: {value} vs {refined}")


def exact_log_likelihood_enumerated(inst: TinyInstance) -> float:
    """Target-free log p(w) by summing over every (z, xi) assignment.

    Uses the closed-form Dirichlet moment for each topic assignment, so it is
    independent of the quadrature path.
    """
    if inst.target is not None and inst.config.target_kind != "none":
        raise ValueError("enumeration route only handles documents without a target")
    w = inst.tokens
    K = inst.config.K
    alpha = inst.config.alpha_array
    beta, pi, p = inst.params.beta, inst.params.pi, inst.config.p
    total = 0.0
    for z in itertools.product(range(K), repeat=len(w)):
        counts = np.bincount(np.asarray(z, dtype=int), minlength=K)
        log_moment = gammaln(alpha.sum()) - gammaln(alpha.sum() + len(w)) + (gammaln(alpha + counts) - gammaln(alpha)).sum()
        # sum over xi factorises token by token given z
        per_token = p * beta[np.asarray(z), w] + (1.0 - p) * pi[w]
        total += math.exp(log_moment) * float(np.prod(per_token))
    return math.log(total) if total > 0 else -math.inf


def exact_switch_posterior(inst: TinyInstance, quadrature_points: int = 200) -> np.ndarray:
    """p(xi_n = 1 | w, y) for each token, by enumerating switch configurations."""
    theta, weights = simplex_rule(inst.config.alpha_array, quadrature_points)
    relevant, background = _token_factors(inst, theta)
    target = np.exp(_log_target_density(inst, theta))
    N = relevant.shape[1]
    config_weight = {}
    for xi in itertools.product((0, 1), repeat=N):
        sel = np.asarray(xi, dtype=bool)
        factors = np.where(sel[None, :], relevant, background)
        config_weight[xi] = float(weights @ (np.prod(factors, axis=1) * target))
    total = sum(config_weight.values())
    if not total > 0:
        raise QuadratureError("document has zero probability under the model")
    post = np.zeros(N)
    for xi, wgt in config_weight.items():
        post += np.asarray(xi) * wgt
    return post / total


def random_tiny_instance(
    rng: np.random.Generator, target_kind: str | None = None, disjoint: bool | None = None
) -> TinyInstance:
    """Draw a small random instance (K <= 3, V <= 6, N <= 6)."""
    K = int(rng.integers(1, 4))
    V = int(rng.integers(2, 7))
    N = int(rng.integers(1, 7))
    while 2**N * K**N > MAX_ENUMERATION:
        N -= 1
    if target_kind is None:
        target_kind = ("real", "none")[int(rng.integers(2))]
    p = float(rng.uniform(0.05, 1.0))
    alpha = tuple(rng.uniform(0.5, 3.0, size=K))
    beta = rng.dirichlet(np.ones(V), size=K)
    pi = rng.dirichlet(np.ones(V))
    if disjoint:
        split = int(rng.integers(1, V))
        beta[:, split:] = 0.0
        pi[:split] = 0.0
        beta /= beta.sum(axis=1, keepdims=True)
        pi /= pi.sum()
    eta = rng.normal(0.0, 2.0, size=K)
    delta = float(rng.uniform(0.3, 2.0))
    params = ModelParams(beta, pi, eta, delta)
    config = ModelConfig(K=K, p=p, alpha=alpha, target_kind=target_kind if target_kind != "none" else "real")
    words = rng.integers(0, V, size=N)
    counts = np.bincount(words, minlength=V)
    doc = Document("tiny", {int(v): int(c) for v, c in enumerate(counts) if c})
    target = None
    if target_kind == "real":
        target = float(rng.normal(eta.mean(), 1.0))
    elif target_kind == "binary":
        target = float(rng.integers(2))
    return TinyInstance(config, params, doc, target)
