import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pftopics.corpus import Document
from pftopics.elbo import elbo_document
from pftopics.model import ModelConfig, ModelParams
from pftopics.oracle import (
    TinyInstance,
    exact_log_likelihood,
    exact_log_likelihood_enumerated,
    exact_switch_posterior,
    random_tiny_instance,
    simplex_rule,
)
from pftopics.verification import bound_margin, check_instance, full_suite, is_point_mass, random_state


def _single_topic(beta, pi, p, counts, target=None):
    params = ModelParams(np.array([beta], dtype=float), np.array(pi, dtype=float), np.zeros(1))
    return TinyInstance(ModelConfig(K=1, p=p, target_kind="real" if target is not None else "none"), params, Document("d", counts), target)


def test_single_token_half_switch():
    inst = _single_topic([1.0, 0.0], [0.0, 1.0], 0.5, {0: 1})
    assert exact_log_likelihood(inst) == pytest.approx(math.log(0.5), abs=1e-12)
    assert exact_log_likelihood_enumerated(inst) == pytest.approx(math.log(0.5), abs=1e-12)


@pytest.mark.parametrize("w", [0, 1, 2])
def test_all_relevant_reads_the_topic(w):
    beta = [0.2, 0.3, 0.5]
    inst = _single_topic(beta, [1 / 3] * 3, 1.0, {w: 1})
    assert exact_log_likelihood(inst) == pytest.approx(math.log(beta[w]), abs=1e-12)


def test_single_topic_factorises():
    beta, pi, p = [0.2, 0.3, 0.5], [0.6, 0.1, 0.3], 0.4
    pair = exact_log_likelihood(_single_topic(beta, pi, p, {0: 1, 2: 1}))
    singles = exact_log_likelihood(_single_topic(beta, pi, p, {0: 1})) + exact_log_likelihood(_single_topic(beta, pi, p, {2: 1}))
    assert pair == pytest.approx(singles, abs=1e-12)


def test_single_topic_optimal_switches_close_the_gap():
    # with theta fixed the mean-field family contains the exact switch posterior
    beta, pi, p = np.array([0.2, 0.3, 0.5]), np.array([0.6, 0.1, 0.3]), 0.4
    inst = _single_topic(beta, pi, p, {0: 2, 1: 1, 2: 3})
    varphi = p * beta / (p * beta + (1 - p) * pi)
    elbo = elbo_document(inst.doc, None, inst.params, inst.config, [1.0], np.ones((3, 1)), varphi).total
    assert elbo == pytest.approx(exact_log_likelihood(inst), abs=1e-12)


@pytest.mark.parametrize("seed", range(15))
def test_quadrature_matches_enumeration(seed):
    inst = random_tiny_instance(np.random.default_rng(seed), target_kind="none")
    assert exact_log_likelihood(inst) == pytest.approx(exact_log_likelihood_enumerated(inst), rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_quadrature_doubling_is_stable(seed):
    inst = random_tiny_instance(np.random.default_rng(100 + seed), target_kind="real")
    a = exact_log_likelihood(inst, 100, check=False)
    b = exact_log_likelihood(inst, 200, check=False)
    assert abs(a - b) <= 1e-6 * max(1.0, abs(b))


@pytest.mark.parametrize("alpha", [(1.0, 1.0), (0.5, 2.0), (0.7, 1.3, 2.2)])
def test_simplex_rule_reproduces_dirichlet_moments(alpha):
    alpha = np.asarray(alpha)
    theta, w = simplex_rule(alpha, 30)
    a0 = alpha.sum()
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(w @ theta, alpha / a0, atol=1e-12)
    np.testing.assert_allclose(w @ theta[:, 0] ** 2, alpha[0] * (alpha[0] + 1) / (a0 * (a0 + 1)), atol=1e-12)


def test_disjoint_channels_give_exact_switches():
    beta = np.array([[0.5, 0.5, 0.0, 0.0], [0.2, 0.8, 0.0, 0.0]])
    pi = np.array([0.0, 0.0, 0.3, 0.7])
    params = ModelParams(beta, pi, np.array([1.0, -1.0]), 1.0)
    inst = TinyInstance(ModelConfig(K=2, p=0.3, target_kind="real"), params, Document("d", {0: 1, 2: 2, 1: 1}), 0.4)
    post = exact_switch_posterior(inst)
    np.testing.assert_array_equal(post, [1.0, 1.0, 0.0, 0.0])  # tokens in term order: 0, 1, 2, 2
    assert is_point_mass(post)


def test_overlapping_channels_leave_the_switch_uncertain():
    params = ModelParams(np.array([[0.5, 0.5]]), np.array([0.5, 0.5]), np.zeros(1))
    inst = TinyInstance(ModelConfig(K=1, p=0.5, target_kind="none"), params, Document("d", {0: 1}))
    post = exact_switch_posterior(inst)
    assert 0.0 < post[0] < 1.0
    assert post[0] == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_random_disjoint_instances_are_point_masses(seed):
    inst = random_tiny_instance(np.random.default_rng(seed), disjoint=True)
    assert float(np.max(inst.params.beta @ inst.params.pi)) == 0.0
    assert is_point_mass(exact_switch_posterior(inst))


@pytest.mark.parametrize(
    "K, V, N, message",
    [(4, 3, 1, "K <= 3"), (2, 7, 1, "V <= 6"), (1, 3, 7, "6 tokens")],
)
def test_instance_bounds(K, V, N, message):
    params = ModelParams(np.full((K, V), 1 / V), np.full(V, 1 / V), np.zeros(K))
    with pytest.raises(ValueError, match=message):
        TinyInstance(ModelConfig(K=K, target_kind="none"), params, Document("d", {0: N}))


def test_enumeration_requires_no_target():
    inst = random_tiny_instance(np.random.default_rng(0), target_kind="real")
    with pytest.raises(ValueError, match="target"):
        exact_log_likelihood_enumerated(inst)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_elbo_never_exceeds_the_likelihood(seed):
    rng = np.random.default_rng(seed)
    inst = random_tiny_instance(rng)
    exact = exact_log_likelihood(inst)
    for _ in range(3):
        assert bound_margin(inst, *random_state(inst, rng), exact=exact) >= -1e-6


def test_check_instance_reports(tmp_path):
    inst = random_tiny_instance(np.random.default_rng(3), disjoint=False)
    report = check_instance(inst, states=4)
    assert report["elbo_below_exact"]["passed"] == 4
    assert not report["disjoint"]


def test_full_suite_small():
    summary = full_suite(n_instances=10, seed=5)
    for section in summary.values():
        assert section["passed"] == section["total"] == 10
