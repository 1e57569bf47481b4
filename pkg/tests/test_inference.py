import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pftopics.corpus import Corpus, Document, Vocabulary
from pftopics.elbo import elbo_corpus_breakdown
from pftopics.evaluation import rmse
from pftopics.inference import (
    FlatCorpus,
    TrainingDivergedError,
    TrainOptions,
    infer_heldout,
    infer_heldout_batch,
    init_unconstrained,
    objective_and_grad,
    predict,
    predict_corpus,
    predict_from_gamma,
    softplus,
    softplus_inv,
    support_overlap,
    to_constrained,
    train,
)
from pftopics.model import ModelConfig, ModelParams, params_from_arrays, sample_corpus

from conftest import RECOVERY_RELEVANT, finite_difference_errors, random_gradient_instance


@pytest.mark.parametrize("seed", range(20))
def test_gradient_matches_finite_differences(seed):
    errors = finite_difference_errors(seed)
    assert max(errors.values()) < 1e-4, errors


def test_gradient_instances_cover_every_block():
    covered = set()
    for seed in range(20):
        covered |= set(finite_difference_errors(seed))
    assert covered == {"beta_logits", "pi_logits", "varphi_logits", "gamma_raw", "phi_logits", "eta", "delta_raw"}


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_reparameterisation_lands_in_the_feasible_set(seed):
    corpus, config, flat, u = random_gradient_instance(seed)
    for block in u.arrays().values():
        block *= 20  # push towards saturation
    params, state = to_constrained(u, config, flat)
    state.validate()
    assert np.all(state.gamma >= 1e-3)
    assert params.delta > 0
    use_targets = config.target_kind != "none"
    obj = objective_and_grad(u, flat, config, use_targets=use_targets, need_grad=False)
    ref = elbo_corpus_breakdown(corpus, params, config, state, use_targets).total
    assert obj.value == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_softplus_round_trip():
    y = np.array([1e-8, 0.5, 1.0, 30.0, 800.0])
    np.testing.assert_allclose(softplus(softplus_inv(y)), y, rtol=1e-10)


def test_initialisation(tiny_corpus):
    cfg = ModelConfig(K=3, p=0.2, target_kind="real")
    a = init_unconstrained(cfg, tiny_corpus.V, seed=3, corpus=tiny_corpus)
    b = init_unconstrained(cfg, tiny_corpus.V, seed=3, corpus=tiny_corpus)
    for name, value in a.arrays().items():
        np.testing.assert_array_equal(value, getattr(b, name))
    params, state = to_constrained(a, cfg, FlatCorpus(tiny_corpus))
    np.testing.assert_allclose(params.beta.sum(axis=1), 1.0, rtol=1e-12)
    np.testing.assert_allclose(state.varphi, 0.5)
    np.testing.assert_allclose(state.gamma, 1.0, rtol=1e-12)
    assert params.delta == pytest.approx(1.0)
    assert np.all(params.eta == 0)
    c = init_unconstrained(cfg, tiny_corpus.V, seed=4, corpus=tiny_corpus)
    assert not np.array_equal(a.beta_logits, c.beta_logits)


def test_training_raises_the_bound(tiny_corpus):
    cfg = ModelConfig(K=2, p=0.5, target_kind="real")
    opts = TrainOptions(epochs=200, seed=1)
    flat = FlatCorpus(tiny_corpus)
    start = objective_and_grad(init_unconstrained(cfg, flat.V, 1, flat), flat, cfg, need_grad=False).value
    result = train(tiny_corpus, cfg, opts)
    assert result.history[-1].elbo > start
    assert len(result.history) <= 200
    assert set(result.history[-1].elbo_terms) >= {"t_words", "h_xi", "total"}


def test_training_is_deterministic(tiny_corpus):
    cfg = ModelConfig(K=2, p=0.3, target_kind="real")
    opts = TrainOptions(epochs=50, seed=5)
    a, b = train(tiny_corpus, cfg, opts), train(tiny_corpus, cfg, opts)
    np.testing.assert_array_equal(a.params.beta, b.params.beta)
    np.testing.assert_array_equal(a.varphi, b.varphi)
    assert [r.elbo for r in a.history] == [r.elbo for r in b.history]


def test_minibatch_training(tiny_corpus):
    cfg = ModelConfig(K=2, p=0.3, target_kind="real")
    opts = TrainOptions(epochs=40, seed=2, batch_size=2)
    a = train(tiny_corpus, cfg, opts)
    b = train(tiny_corpus, cfg, opts)
    assert np.all(np.isfinite([r.elbo for r in a.history]))
    np.testing.assert_array_equal(a.params.beta, b.params.beta)


def test_slda_reduction_pins_switches(tiny_corpus):
    cfg = ModelConfig(K=2, p=1.0, target_kind="real")
    result = train(tiny_corpus, cfg, TrainOptions(epochs=60, seed=0))
    assert np.all(result.varphi >= 0.99)
    final = result.history[-1].elbo_terms
    assert final["t_xi_prior"] == 0.0
    assert final["h_xi"] == 0.0


def test_binary_and_unsupervised_training(tiny_corpus):
    vocab = tiny_corpus.vocabulary
    binary = Corpus(vocab, tuple(Document(d.id, d.counts, float(i % 2)) for i, d in enumerate(tiny_corpus.documents)), "binary")
    out = train(binary, ModelConfig(K=2, p=0.4, target_kind="binary"), TrainOptions(epochs=30))
    assert np.isfinite(out.history[-1].elbo)
    unsup = Corpus(vocab, tuple(Document(d.id, d.counts, None) for d in tiny_corpus.documents), "none")
    out = train(unsup, ModelConfig(K=2, p=0.4, target_kind="none"), TrainOptions(epochs=30))
    assert out.history[-1].elbo_terms["t_y"] == 0.0
    assert np.all(out.params.eta == 0)


def test_target_kind_mismatch(tiny_corpus):
    with pytest.raises(ValueError, match="targets"):
        train(tiny_corpus, ModelConfig(K=2, target_kind="binary"), TrainOptions(epochs=1))


@pytest.mark.filterwarnings("ignore:overflow")
def test_divergence_names_the_bad_term():
    vocab = Vocabulary(("a", "b"))
    corpus = Corpus(vocab, (Document("d", {0: 1, 1: 1}, 1e200),), "real")
    with pytest.raises(TrainingDivergedError) as exc:
        train(corpus, ModelConfig(K=2, target_kind="real"), TrainOptions(epochs=5))
    assert "t_y" in exc.value.terms
    assert "epoch 1" in str(exc.value)


def test_validation_metric_recorded(tiny_corpus):
    cfg = ModelConfig(K=2, p=0.5, target_kind="real")
    result = train(tiny_corpus, cfg, TrainOptions(epochs=25, val_every=10), validation=tiny_corpus)
    metrics = [r.val_metric for r in result.history]
    assert metrics[9] is not None and metrics[19] is not None and metrics[24] is not None
    assert metrics[0] is None


# --- held-out inference -----------------------------------------------------


def _heldout_params(K=2, V=4, eta=(1.0, -1.0)):
    beta = np.zeros((K, V))
    for k in range(K):
        beta[k, 2 * k : 2 * k + 2] = 0.5
    return ModelParams(beta, np.full(V, 1 / V), np.asarray(eta, dtype=float), 1.0)


def test_closed_switches_leave_the_prior_mean():
    params = _heldout_params()
    cfg = ModelConfig(K=2, p=0.2, target_kind="real")
    gamma = infer_heldout(Document("d", {0: 5, 1: 2}), params, cfg, np.zeros(4))
    np.testing.assert_allclose(gamma / gamma.sum(), [0.5, 0.5], atol=1e-12)
    assert gamma.sum() == pytest.approx(2 + 7)


def test_single_topic_heldout():
    params = ModelParams(np.full((1, 3), 1 / 3), np.full(3, 1 / 3), np.array([2.0]))
    cfg = ModelConfig(K=1, p=0.5, target_kind="real")
    gamma = infer_heldout(Document("d", {0: 3, 2: 1}), params, cfg, np.full(3, 0.7))
    assert gamma == pytest.approx([1 + 4])
    assert predict(Document("d", {0: 3}), params, cfg, np.ones(3)) == pytest.approx(2.0)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_single_topic_document_finds_its_topic(k):
    params = _heldout_params(K=3, V=6, eta=(0.0, 0.0, 0.0))
    cfg = ModelConfig(K=3, p=0.5, target_kind="real")
    doc = Document("d", {2 * k: 100, 2 * k + 1: 100})
    gamma = infer_heldout(doc, params, cfg, np.ones(6))
    assert int(np.argmax(gamma)) == k
    assert gamma[k] / gamma.sum() > 0.95


def test_prediction_with_zero_weights():
    params = _heldout_params(eta=(0.0, 0.0))
    doc = Document("d", {0: 3, 3: 1})
    assert predict(doc, params, ModelConfig(K=2, target_kind="real"), np.ones(4)) == 0.0
    assert predict(doc, params, ModelConfig(K=2, target_kind="binary"), np.ones(4)) == 0.5


def test_prediction_with_constant_weights():
    params = _heldout_params(eta=(1.7, 1.7))
    assert predict_from_gamma(np.array([[1.0, 1.0]]), params, "real")[0] == pytest.approx(1.7)
    assert predict(Document("d", {0: 2}), params, ModelConfig(K=2), np.full(4, 0.3)) == pytest.approx(1.7)


def test_heldout_batch_matches_single(tiny_corpus):
    rng = np.random.default_rng(0)
    params = params_from_arrays(rng.random((2, 4)), rng.random(4), [1.0, -2.0], 0.5)
    cfg = ModelConfig(K=2, target_kind="real")
    varphi = rng.random(4)
    batch = infer_heldout_batch(tiny_corpus, params, cfg, varphi)
    for d, doc in enumerate(tiny_corpus.documents):
        # both stop once gamma moves less than the held-out tolerance
        np.testing.assert_allclose(batch[d], infer_heldout(doc, params, cfg, varphi), rtol=1e-6)


def test_heldout_vocabulary_mismatch(tiny_corpus):
    params = _heldout_params(V=6)
    with pytest.raises(ValueError, match="V="):
        infer_heldout_batch(tiny_corpus, params, ModelConfig(K=2), np.ones(6))


def test_support_overlap():
    disjoint = ModelParams(np.array([[0.5, 0.5, 0, 0]]), np.array([0, 0, 0.5, 0.5]), np.zeros(1))
    assert support_overlap(disjoint) == 0.0
    uniform = ModelParams(np.full((2, 4), 0.25), np.full(4, 0.25), np.zeros(2))
    assert support_overlap(uniform) == pytest.approx(1.0)


@pytest.mark.slow
def test_synthetic_recovery_and_prediction(recovery_run):
    result, truth, config = recovery_run["result"], recovery_run["truth"], recovery_run["config"]
    accuracy = np.mean((result.varphi > 0.5) == RECOVERY_RELEVANT)
    assert accuracy >= 0.9
    assert support_overlap(result.params) < support_overlap(result.init_params)
    test, _ = sample_corpus(config, truth, 200, 60, rng_seed=8)
    preds = predict_corpus(test, result.params, config, result.varphi)
    targets = np.asarray(test.targets)
    assert rmse(preds, targets) < targets.std()
