"""scikit-learn style estimator around :func:`pftopics.inference.train`."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .corpus import Vocabulary, corpus_from_matrix
from .evaluation import auc, coherence, relevant_fraction, rmse
from .inference import TrainOptions, infer_heldout_batch, predict_from_gamma, train
from .model import ModelConfig, TrainedModel
from ._validation import check_count_matrix, check_targets


class PFSLDA(TransformerMixin, BaseEstimator):
    """Prediction-focused supervised LDA.

    ``fit(X, y)`` takes a document-term count matrix (dense or sparse) and a
    real or binary target per row. ``transform`` returns the expected topic
    proportions of each row, ``predict`` the GLM prediction made from them.

    Parameters
    ----------
    n_topics : int
        Number of relevant topics.
    p : float
        Prior probability that a token is relevant; ``p=1`` is plain sLDA.
    alpha : array-like of shape (n_topics,), optional
        Dirichlet prior on topic proportions; all ones by default.
    target : {"real", "binary", "auto"}
        Target family. ``"auto"`` picks binary when every target is 0 or 1.
    """

    def __init__(
        self,
        n_topics=10,
        p=0.2,
        alpha=None,
        target="auto",
        learning_rate=0.025,
        max_epochs=500,
        batch_size=None,
        convergence_tol=1e-5,
        gamma_floor=1e-3,
        random_state=0,
        vocabulary=None,
    ):
        self.n_topics = n_topics
        self.p = p
        self.alpha = alpha
        self.target = target
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.batch_size = batch_size
        self.convergence_tol = convergence_tol
        self.gamma_floor = gamma_floor
        self.random_state = random_state
        self.vocabulary = vocabulary

    def _options(self) -> TrainOptions:
        return TrainOptions(
            learning_rate=self.learning_rate,
            epochs=self.max_epochs,
            batch_size=self.batch_size,
            seed=self.random_state or 0,
            convergence_tol=self.convergence_tol,
            gamma_floor=self.gamma_floor,
        )

    def fit(self, X, y):
        X = check_count_matrix(X)
        y, kind = check_targets(y, X.shape[0], self.target)
        config = ModelConfig(
            K=self.n_topics,
            p=self.p,
            alpha=None if self.alpha is None else tuple(np.ravel(self.alpha)),
            target_kind=kind,
            seed=self.random_state or 0,
        )
        vocab = None if self.vocabulary is None else Vocabulary(tuple(self.vocabulary))
        corpus = corpus_from_matrix(X, y, vocab, target_kind=kind)
        result = train(corpus, config, self._options())
        self.config_ = config
        self.result_ = result
        self.beta_ = result.params.beta
        self.pi_ = result.params.pi
        self.eta_ = result.params.eta
        self.delta_ = result.params.delta
        self.varphi_ = result.varphi
        self.n_features_in_ = X.shape[1]
        self.target_kind_ = kind
        self.vocabulary_ = corpus.vocabulary
        return self

    def _gamma(self, X) -> np.ndarray:
        check_is_fitted(self, "beta_")
        X = check_count_matrix(X, allow_empty_rows=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, model was fitted with {self.n_features_in_}")
        alpha = self.config_.alpha_array
        gamma = np.tile(alpha, (X.shape[0], 1))
        nonempty = np.flatnonzero(np.asarray(X.sum(axis=1)).ravel() > 0)
        if len(nonempty):
            corpus = corpus_from_matrix(X[nonempty], None, self.vocabulary_, target_kind="none")
            gamma[nonempty] = infer_heldout_batch(
                corpus, self.result_.params, self.config_, self.varphi_, self._options()
            )
        return gamma

    def transform(self, X):
        """Expected topic proportions E[theta], shape (n_samples, n_topics)."""
        gamma = self._gamma(X)
        return gamma / gamma.sum(axis=1, keepdims=True)

    def predict(self, X):
        return predict_from_gamma(self._gamma(X), self.result_.params, self.target_kind_)

    def predict_proba(self, X):
        if self.target_kind_ != "binary":
            raise AttributeError("predict_proba is only available for binary targets")
        p1 = self.predict(X)
        return np.column_stack([1.0 - p1, p1])

    def score(self, X, y):
        """Negative RMSE for real targets, AUC for binary ones (higher is better)."""
        pred = self.predict(X)
        y = np.asarray(y, dtype=float)
        if self.target_kind_ == "binary":
            return auc(pred, y)
        return -rmse(pred, y)

    def coherence(self, X, top_n=50, normalized=False) -> float:
        """Mean topic coherence of the relevant topics against the documents in ``X``."""
        check_is_fitted(self, "beta_")
        X = sp.csr_matrix(X)
        keep = np.flatnonzero(np.asarray(X.sum(axis=1)).ravel() > 0)
        ref = corpus_from_matrix(X[keep], None, self.vocabulary_, target_kind="none")
        return coherence(self.beta_, ref, top_n=top_n, normalized=normalized)

    @property
    def relevant_fraction_(self) -> float:
        check_is_fitted(self, "varphi_")
        return relevant_fraction(self.varphi_)

    def to_trained_model(self) -> TrainedModel:
        check_is_fitted(self, "beta_")
        return TrainedModel(self.vocabulary_, self.config_, self.result_.params, self.varphi_)
