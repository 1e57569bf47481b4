"""Training by joint ADAM ascent on the ELBO, held-out inference and prediction.

All constrained quantities are reached through an unconstrained chart:

* ``beta = softmax(beta_logits)`` row-wise, ``pi = softmax(pi_logits)``;
* ``varphi = sigmoid(varphi_logits)`` (pinned to 1 when p == 1);
* ``gamma = softplus(gamma_raw) + gamma_floor``;
* ``phi = softmax(phi_logits)`` per (document, distinct term) row;
* ``delta = softplus(delta_raw)``.

The corpus objective and its gradient are computed together in
:func:`objective_and_grad`, vectorised over the flattened document-term
entries.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields

import numpy as np
import scipy.sparse as sp
from scipy.special import digamma, expit, gammaln, log_expit, log_softmax, logsumexp, polygamma

from .corpus import Corpus, Document
from .elbo import TERM_NAMES, ElboBreakdown, VariationalState
from .model import ModelConfig, ModelParams

logger = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    """The objective or its gradient became non-finite."""

    def __init__(self, message: str, terms: list[str]):
        super().__init__(message)
        self.terms = terms


@dataclass
class TrainOptions:
    learning_rate: float = 0.025
    epochs: int = 500
    batch_size: int | None = None  # None means full batch
    seed: int = 0
    convergence_tol: float = 1e-5
    convergence_window: int = 10
    gamma_floor: float = 1e-3
    val_every: int = 10
    heldout_max_iter: int = 500
    heldout_tol: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.gamma_floor > 0:
            raise ValueError("gamma_floor must be positive")


def softplus(x):
    return np.logaddexp(0.0, x)


def softplus_inv(y):
    y = np.asarray(y, dtype=float)
    # log(expm1(y)) written to stay finite for large y
    return y + np.log(-np.expm1(-y))


@dataclass
class UnconstrainedParams:
    beta_logits: np.ndarray  # (K, V)
    pi_logits: np.ndarray  # (V,)
    varphi_logits: np.ndarray  # (V,)
    gamma_raw: np.ndarray  # (D, K)
    phi_logits: np.ndarray  # (nnz, K), rows follow FlatCorpus entry order
    eta: np.ndarray  # (K,)
    delta_raw: np.ndarray  # shape (), kept as an array so ADAM can update it in place

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> "UnconstrainedParams":
        return UnconstrainedParams(**{k: v.copy() for k, v in self.arrays().items()})


GLOBAL_BLOCKS = ("beta_logits", "pi_logits", "varphi_logits", "eta", "delta_raw")
LOCAL_BLOCKS = ("gamma_raw", "phi_logits")


class FlatCorpus:
    """Corpus entries flattened to parallel arrays, ordered by document then term id."""

    def __init__(self, corpus: Corpus):
        X = corpus.to_matrix()
        X.sort_indices()
        self.D, self.V = X.shape
        self.doc = np.repeat(np.arange(self.D), np.diff(X.indptr))
        self.word = X.indices.astype(np.int64)
        self.count = X.data.astype(float)
        self.indptr = X.indptr.copy()
        self.nnz = len(self.word)
        self.targets = corpus.targets
        # incidence matrices used for segment sums
        ones = np.ones(self.nnz)
        self.doc_incidence = sp.csr_matrix((ones, (self.doc, np.arange(self.nnz))), shape=(self.D, self.nnz))
        self.word_incidence = sp.csr_matrix((ones, (self.word, np.arange(self.nnz))), shape=(self.V, self.nnz))

    def entry_slice(self, d: int) -> slice:
        return slice(self.indptr[d], self.indptr[d + 1])


def init_unconstrained(
    config: ModelConfig, V: int, seed: int, corpus: Corpus | FlatCorpus | None = None, gamma_floor: float = 1e-3
) -> UnconstrainedParams:
    """Starting point: exponential noise on the topics, neutral everything else.

    The topic logits are ``log(0.01 * Exp(1))`` draws; switches start at 0.5,
    ``eta`` at zero, ``delta`` at one, ``gamma`` at ``alpha`` and ``phi`` uniform.
    Local blocks are sized to ``corpus`` (empty when it is omitted).
    """
    if V < 1:
        raise ValueError("V must be >= 1")
    K = config.K
    rng = np.random.default_rng(seed)
    beta_logits = np.log(0.01 * rng.exponential(1.0, size=(K, V)))
    pi_logits = np.log(0.01 * rng.exponential(1.0, size=V))
    if corpus is None:
        D, nnz = 0, 0
    else:
        flat = corpus if isinstance(corpus, FlatCorpus) else FlatCorpus(corpus)
        D, nnz = flat.D, flat.nnz
    alpha = config.alpha_array
    if np.any(alpha <= gamma_floor):
        raise ValueError("alpha must exceed gamma_floor")
    return UnconstrainedParams(
        beta_logits=beta_logits,
        pi_logits=pi_logits,
        varphi_logits=np.zeros(V),
        gamma_raw=np.tile(softplus_inv(alpha - gamma_floor), (D, 1)),
        phi_logits=np.zeros((nnz, K)),
        eta=np.zeros(K),
        delta_raw=np.asarray(softplus_inv(1.0)),
    )


def map_varphi(varphi_logits: np.ndarray, p: float) -> np.ndarray:
    if p == 1.0:
        return np.ones_like(varphi_logits)
    return expit(varphi_logits)


def to_constrained(
    u: UnconstrainedParams, config: ModelConfig, flat: FlatCorpus | None = None, gamma_floor: float = 1e-3
) -> tuple[ModelParams, VariationalState]:
    beta = np.exp(log_softmax(u.beta_logits, axis=1))
    pi = np.exp(log_softmax(u.pi_logits))
    params = ModelParams(beta, pi, u.eta.copy(), float(softplus(u.delta_raw)))
    gamma = softplus(u.gamma_raw) + gamma_floor
    phi_flat = np.exp(log_softmax(u.phi_logits, axis=1))
    if flat is None:
        phi = [phi_flat]
    else:
        phi = [phi_flat[flat.entry_slice(d)] for d in range(flat.D)]
    return params, VariationalState(gamma, phi, map_varphi(u.varphi_logits, config.p))


# ---------------------------------------------------------------------------
# objective


def _target_terms(y, kind, gamma, g0, eta, delta, need_grad):
    """Per-document target term and its gradients (w.r.t. gamma, eta, delta)."""
    D, K = gamma.shape
    mean = gamma / g0[:, None]
    s = mean @ eta
    zeros = (np.zeros(D), np.zeros((D, K)), np.zeros(K), 0.0)
    if y is None or kind == "none":
        return zeros
    if kind == "real":
        r = mean @ (eta * eta)
        Q = (r - s * s) / (g0 + 1.0) + s * s
        S = y * y - 2.0 * y * s + Q
        value = -0.5 * np.log(2.0 * math.pi * delta) - S / (2.0 * delta)
        if not need_grad:
            return value, None, None, None
        # dS/dmean and explicit dS/dg0
        dS_dmean = (
            -2.0 * y[:, None] * eta[None, :]
            + (eta[None, :] ** 2 - 2.0 * s[:, None] * eta[None, :]) / (g0 + 1.0)[:, None]
            + 2.0 * s[:, None] * eta[None, :]
        )
        dS_dg0 = -(r - s * s) / (g0 + 1.0) ** 2
        g_mean = -dS_dmean / (2.0 * delta)
        g_g0 = -dS_dg0 / (2.0 * delta)
        dS_deta = (
            -2.0 * y[:, None] * mean
            + (2.0 * mean * eta[None, :] - 2.0 * s[:, None] * mean) / (g0 + 1.0)[:, None]
            + 2.0 * s[:, None] * mean
        )
        g_eta = -(dS_deta.sum(axis=0)) / (2.0 * delta)
        g_delta = float(np.sum(-0.5 / delta + S / (2.0 * delta**2)))
    else:
        value = y * log_expit(s) + (1.0 - y) * log_expit(-s)
        if not need_grad:
            return value, None, None, None
        resid = y - expit(s)
        g_mean = resid[:, None] * eta[None, :]
        g_g0 = np.zeros(D)
        g_eta = resid @ mean
        g_delta = 0.0
    # chain through mean = gamma / g0
    g_gamma = (g_mean - (g_mean * mean).sum(axis=1, keepdims=True)) / g0[:, None] + g_g0[:, None]
    return value, g_gamma, g_eta, g_delta


@dataclass
class Objective:
    value: float
    terms: ElboBreakdown
    grad: UnconstrainedParams | None = None


def objective_and_grad(
    u: UnconstrainedParams,
    flat: FlatCorpus,
    config: ModelConfig,
    gamma_floor: float = 1e-3,
    use_targets: bool = True,
    need_grad: bool = True,
    global_scale: float = 1.0,
) -> Objective:
    """Corpus ELBO at ``u`` and, optionally, its gradient with respect to ``u``.

    ``global_scale`` multiplies the gradient of the global blocks; minibatch
    steps pass ``D_total / D_batch`` to get an unbiased full-corpus estimate.
    """
    K = config.K
    alpha = config.alpha_array
    p = config.p
    c = flat.count
    doc, word = flat.doc, flat.word

    log_beta = log_softmax(u.beta_logits, axis=1)
    log_pi = log_softmax(u.pi_logits)
    pinned = p == 1.0
    if pinned:
        vphi = np.ones(flat.V)
        xlogit = np.zeros(flat.V)  # phi*log(phi) + (1-phi)*log(1-phi) at phi=1
    else:
        vphi = expit(u.varphi_logits)
        xlogit = vphi * log_expit(u.varphi_logits) + (1.0 - vphi) * log_expit(-u.varphi_logits)
    gamma = softplus(u.gamma_raw) + gamma_floor
    g0 = gamma.sum(axis=1)
    elog = digamma(gamma) - digamma(g0)[:, None]
    log_phi = log_softmax(u.phi_logits, axis=1)
    phi = np.exp(log_phi)
    delta = float(softplus(u.delta_raw))

    gate = vphi[word]
    lb = log_beta[:, word].T  # (nnz, K)
    lp = log_pi[word]
    rel = (phi * lb).sum(axis=1)
    cphi = phi * c[:, None]
    n_dk = flat.doc_incidence @ cphi  # (D, K) expected topic counts

    t_theta_prior = flat.D * (gammaln(alpha.sum()) - gammaln(alpha).sum()) + float(((alpha - 1.0) * elog).sum())
    t_z = float((n_dk * elog).sum())
    t_words = float(c @ (gate * rel + (1.0 - gate) * lp))
    if pinned:
        t_xi = 0.0
    else:
        t_xi = float(c @ (gate * math.log(p) + (1.0 - gate) * math.log1p(-p)))
    h_theta = float((gammaln(g0) - gammaln(gamma).sum(axis=1)).sum() + ((gamma - 1.0) * elog).sum())
    h_z = float((cphi * log_phi).sum())
    h_xi = float(c @ xlogit[word])

    y = flat.targets if use_targets else None
    ty, g_gamma_y, g_eta, g_delta = _target_terms(y, config.target_kind, gamma, g0, u.eta, delta, need_grad)
    terms = ElboBreakdown(t_theta_prior, t_z, float(np.sum(ty)), t_xi, t_words, h_theta, h_z, h_xi)
    obj = Objective(terms.total, terms)
    if not need_grad:
        return obj

    # topics
    A = (flat.word_incidence @ (cphi * gate[:, None])).T  # (K, V)
    g_beta = A - np.exp(log_beta) * A.sum(axis=1, keepdims=True)
    a = flat.word_incidence @ (c * (1.0 - gate))
    g_pi = a - np.exp(log_pi) * a.sum()

    # switches: d/dvarphi summed per word, then through the sigmoid
    if pinned:
        g_varphi = np.zeros(flat.V)
    else:
        per_entry = c * (rel - lp + math.log(p) - math.log1p(-p) - u.varphi_logits[word])
        g_varphi = (flat.word_incidence @ per_entry) * vphi * (1.0 - vphi)

    # responsibilities through the row softmax
    util = elog[doc] + gate[:, None] * lb - log_phi
    g_phi = cphi * (util - (phi * util).sum(axis=1, keepdims=True))

    # Dirichlet parameters: every E[log theta] coefficient collapses to coef
    coef = alpha[None, :] + n_dk - gamma
    g_gamma = polygamma(1, gamma) * coef - polygamma(1, g0)[:, None] * coef.sum(axis=1, keepdims=True)
    g_gamma = g_gamma + g_gamma_y
    g_gamma_raw = g_gamma * expit(u.gamma_raw)

    g_delta_raw = np.asarray(g_delta * expit(u.delta_raw))

    s = global_scale
    obj.grad = UnconstrainedParams(
        beta_logits=s * g_beta,
        pi_logits=s * g_pi,
        varphi_logits=s * g_varphi,
        gamma_raw=g_gamma_raw,
        phi_logits=g_phi,
        eta=s * g_eta,
        delta_raw=s * g_delta_raw,
    )
    return obj


# ---------------------------------------------------------------------------
# optimiser


class Adam:
    """ADAM over a dict of arrays, updating them in place (ascent)."""

    def __init__(self, params: dict[str, np.ndarray], lr=0.025, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = {k: np.zeros(v.shape[:1] if v.ndim else (), dtype=np.int64) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], rows: dict | None = None):
        """Apply one update. ``rows[name]`` restricts the update of a block to those leading-axis rows."""
        rows = rows or {}
        for name, g in grads.items():
            x = params[name]
            idx = rows.get(name)
            if idx is None:
                m, v, t = self.m[name], self.v[name], self.t[name]
                t += 1
                m *= self.beta1
                m += (1 - self.beta1) * g
                v *= self.beta2
                v += (1 - self.beta2) * g * g
                x += self._delta(m, v, t, x.ndim)
            else:
                t = self.t[name][idx] + 1
                self.t[name][idx] = t
                m = self.beta1 * self.m[name][idx] + (1 - self.beta1) * g
                v = self.beta2 * self.v[name][idx] + (1 - self.beta2) * g * g
                self.m[name][idx] = m
                self.v[name][idx] = v
                x[idx] += self._delta(m, v, t, x.ndim)

    def _delta(self, m, v, t, ndim):
        t = np.asarray(t, dtype=float)
        if t.ndim:
            t = t.reshape(t.shape + (1,) * (ndim - 1))
        mhat = m / (1 - self.beta1**t)
        vhat = v / (1 - self.beta2**t)
        return self.lr * mhat / (np.sqrt(vhat) + self.eps)


# ---------------------------------------------------------------------------
# training


@dataclass
class HistoryRecord:
    epoch: int
    elbo: float
    elbo_terms: dict
    val_metric: float | None = None
    relevant_fraction: float = 0.0

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "elbo": self.elbo,
            "elbo_terms": self.elbo_terms,
            "val_metric": self.val_metric,
            "relevant_fraction": self.relevant_fraction,
        }


@dataclass
class TrainResult:
    params: ModelParams
    state: VariationalState
    history: list[HistoryRecord] = field(default_factory=list)
    unconstrained: UnconstrainedParams | None = None
    init_params: ModelParams | None = None
    converged: bool = False

    @property
    def varphi(self) -> np.ndarray:
        return self.state.varphi


def _check_finite(obj: Objective, epoch: int) -> None:
    bad = obj.terms.nonfinite_terms()
    if bad:
        raise TrainingDivergedError(f"non-finite ELBO at epoch {epoch}: terms {', '.join(bad)}", bad)
    if obj.grad is not None:
        bad_blocks = [k for k, v in obj.grad.arrays().items() if not np.all(np.isfinite(v))]
        if bad_blocks:
            raise TrainingDivergedError(
                f"non-finite gradient at epoch {epoch} in blocks {', '.join(bad_blocks)}", bad_blocks
            )


def _sub_flat(flat: FlatCorpus, docs: np.ndarray) -> tuple[FlatCorpus, np.ndarray]:
    """A FlatCorpus restricted to ``docs`` plus the parent entry positions it uses."""
    sub = FlatCorpus.__new__(FlatCorpus)
    entries = np.concatenate([np.arange(flat.indptr[d], flat.indptr[d + 1]) for d in docs])
    lengths = flat.indptr[docs + 1] - flat.indptr[docs]
    sub.D, sub.V = len(docs), flat.V
    sub.doc = np.repeat(np.arange(len(docs)), lengths)
    sub.word = flat.word[entries]
    sub.count = flat.count[entries]
    sub.indptr = np.concatenate([[0], np.cumsum(lengths)])
    sub.nnz = len(entries)
    sub.targets = None if flat.targets is None else flat.targets[docs]
    ones = np.ones(sub.nnz)
    sub.doc_incidence = sp.csr_matrix((ones, (sub.doc, np.arange(sub.nnz))), shape=(sub.D, sub.nnz))
    sub.word_incidence = sp.csr_matrix((ones, (sub.word, np.arange(sub.nnz))), shape=(sub.V, sub.nnz))
    return sub, entries


def _subset_params(u: UnconstrainedParams, docs, entries) -> UnconstrainedParams:
    return UnconstrainedParams(
        beta_logits=u.beta_logits,
        pi_logits=u.pi_logits,
        varphi_logits=u.varphi_logits,
        gamma_raw=u.gamma_raw[docs],
        phi_logits=u.phi_logits[entries],
        eta=u.eta,
        delta_raw=u.delta_raw,
    )


def train(
    corpus: Corpus,
    config: ModelConfig,
    opts: TrainOptions | None = None,
    validation: Corpus | None = None,
    callback=None,
) -> TrainResult:
    """Fit topics, switches, GLM weights and local posteriors jointly by ADAM.

    The history holds the full-corpus ELBO after every epoch. Training stops
    after ``opts.epochs`` epochs, or earlier once the relative ELBO change over
    ``opts.convergence_window`` epochs falls below ``opts.convergence_tol``.
    ``callback(record)`` is called after every epoch when given.
    """
    from .evaluation import prediction_metric, relevant_fraction

    opts = opts or TrainOptions()
    if len(corpus) == 0:
        raise ValueError("cannot train on an empty corpus")
    if config.target_kind != "none" and corpus.target_kind != config.target_kind:
        if not (config.target_kind == "real" and corpus.target_kind == "binary"):
            raise ValueError(f"corpus targets are {corpus.target_kind!r}, config expects {config.target_kind!r}")
    use_targets = config.target_kind != "none"
    flat = FlatCorpus(corpus)
    floor = opts.gamma_floor
    u = init_unconstrained(config, flat.V, opts.seed, flat, floor)
    init_params, _ = to_constrained(u, config, None, floor)
    arrays = u.arrays()
    blocks = dict(arrays)
    if config.p == 1.0:
        blocks.pop("varphi_logits")
    if not use_targets:
        blocks.pop("eta")
        blocks.pop("delta_raw")
    if config.target_kind == "binary":
        blocks.pop("delta_raw")
    adam = Adam(blocks, lr=opts.learning_rate)
    rng = np.random.default_rng(opts.seed)
    batch = opts.batch_size or flat.D
    history: list[HistoryRecord] = []
    converged = False

    for epoch in range(1, opts.epochs + 1):
        if batch >= flat.D:
            obj = objective_and_grad(u, flat, config, floor, use_targets)
            _check_finite(obj, epoch)
            grads = obj.grad.arrays()
            adam.step(blocks, {k: grads[k] for k in blocks})
        else:
            order = rng.permutation(flat.D)
            for start in range(0, flat.D, batch):
                docs = np.sort(order[start : start + batch])
                sub, entries = _sub_flat(flat, docs)
                obj = objective_and_grad(
                    _subset_params(u, docs, entries), sub, config, floor, use_targets, global_scale=flat.D / len(docs)
                )
                _check_finite(obj, epoch)
                grads = obj.grad.arrays()
                rows = {"gamma_raw": docs, "phi_logits": entries}
                adam.step(blocks, {k: grads[k] for k in blocks}, rows)

        full = objective_and_grad(u, flat, config, floor, use_targets, need_grad=False)
        _check_finite(full, epoch)
        vphi = map_varphi(u.varphi_logits, config.p)
        record = HistoryRecord(epoch, full.value, full.terms.to_dict(), None, relevant_fraction(vphi))
        if validation is not None and validation.target_kind != "none" and use_targets:
            if epoch % opts.val_every == 0 or epoch == opts.epochs:
                params, _ = to_constrained(u, config, None, floor)
                preds = predict_corpus(validation, params, config, vphi, opts)
                record.val_metric = prediction_metric(preds, validation.targets, config.target_kind)
        history.append(record)
        if callback is not None:
            callback(record)
        w = opts.convergence_window
        if len(history) > w:
            prev = history[-1 - w].elbo
            if abs(full.value - prev) <= opts.convergence_tol * abs(full.value):
                converged = True
                break

    if history[-1].val_metric is None and validation is not None and validation.target_kind != "none" and use_targets:
        params, _ = to_constrained(u, config, None, floor)
        vphi = map_varphi(u.varphi_logits, config.p)
        preds = predict_corpus(validation, params, config, vphi, opts)
        history[-1].val_metric = prediction_metric(preds, validation.targets, config.target_kind)

    params, state = to_constrained(u, config, flat, floor)
    return TrainResult(params, state, history, u, init_params, converged)


# ---------------------------------------------------------------------------
# held-out inference and prediction


def infer_heldout_batch(
    corpus: Corpus, params: ModelParams, config: ModelConfig, varphi, opts: TrainOptions | None = None
) -> np.ndarray:
    """Posterior Dirichlet parameters for unseen documents, one row per document.

    Globals (topics, switches, GLM) are frozen and the target term is left
    out. The remaining per-document ELBO is concave in each of gamma and phi
    separately, so it is maximised by alternating their exact block optima
    until gamma stops moving.
    """
    opts = opts or TrainOptions()
    if len(corpus) == 0:
        return np.zeros((0, config.K))
    if corpus.V != params.V:
        raise ValueError(f"corpus has V={corpus.V}, model has V={params.V}")
    flat = FlatCorpus(corpus)
    varphi = np.asarray(varphi, dtype=float)
    alpha = config.alpha_array
    with np.errstate(divide="ignore", invalid="ignore"):
        log_beta = np.log(params.beta)
        gate = varphi[flat.word]
        # a zero gate switches the topic evidence off entirely, whatever beta holds
        evidence = np.where(gate[:, None] > 0, gate[:, None] * log_beta[:, flat.word].T, 0.0)
    if not np.all(np.isfinite(evidence) | (evidence == -np.inf)):
        raise ValueError("non-finite held-out objective")
    c = flat.count
    gamma = np.tile(alpha, (flat.D, 1)) + (flat.doc_incidence @ c)[:, None] / config.K
    for _ in range(opts.heldout_max_iter):
        elog = digamma(gamma) - digamma(gamma.sum(axis=1, keepdims=True))
        logits = elog[flat.doc] + evidence
        phi = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
        new = alpha[None, :] + flat.doc_incidence @ (phi * c[:, None])
        change = np.max(np.abs(new - gamma))
        gamma = new
        if change < opts.heldout_tol:
            break
    if not np.all(np.isfinite(gamma)):
        raise ValueError("non-finite held-out objective")
    return gamma


def infer_heldout(
    doc: Document, params: ModelParams, config: ModelConfig, varphi, opts: TrainOptions | None = None
) -> np.ndarray:
    from .corpus import Vocabulary

    vocab = Vocabulary(tuple(f"w{v}" for v in range(params.V)))
    single = Corpus(vocab, (Document(doc.id, doc.counts, None),), "none")
    return infer_heldout_batch(single, params, config, varphi, opts)[0]


def predict_from_gamma(gamma: np.ndarray, params: ModelParams, target_kind: str) -> np.ndarray:
    gamma = np.atleast_2d(gamma)
    mean = gamma / gamma.sum(axis=1, keepdims=True)
    score = mean @ params.eta
    if target_kind == "binary":
        return expit(score)
    return score


def predict_corpus(
    corpus: Corpus, params: ModelParams, config: ModelConfig, varphi, opts: TrainOptions | None = None
) -> np.ndarray:
    gamma = infer_heldout_batch(corpus, params, config, varphi, opts)
    return predict_from_gamma(gamma, params, config.target_kind)


def predict(doc: Document, params: ModelParams, config: ModelConfig, varphi, opts: TrainOptions | None = None) -> float:
    """eta^T E[theta] for real targets, sigmoid of it for binary ones."""
    gamma = infer_heldout(doc, params, config, varphi, opts)
    return float(predict_from_gamma(gamma, params, config.target_kind)[0])


def support_overlap(params: ModelParams) -> float:
    """sum_v min(max_k beta_kv, pi_v); zero exactly when the channels are disjoint."""
    return float(np.minimum(params.beta.max(axis=0), params.pi).sum())


__all__ = [
    "TERM_NAMES",
    "Adam",
    "FlatCorpus",
    "HistoryRecord",
    "TrainOptions",
    "TrainResult",
    "TrainingDivergedError",
    "UnconstrainedParams",
    "infer_heldout",
    "infer_heldout_batch",
    "init_unconstrained",
    "objective_and_grad",
    "predict",
    "predict_corpus",
    "support_overlap",
    "to_constrained",
    "train",
]
