"""Oracle suites: ELBO-below-likelihood checks and switch-posterior point-mass checks."""

from __future__ import annotations

import time

import numpy as np

from .elbo import elbo_document
from .oracle import TinyInstance, exact_log_likelihood, exact_switch_posterior, random_tiny_instance

BOUND_SLACK = 1e-6


def random_state(inst: TinyInstance, rng: np.random.Generator):
    """A random valid (gamma, phi, varphi) slice for the instance's document."""
    K, V = inst.params.beta.shape
    gamma = rng.gamma(2.0, 1.0, size=K) + 0.05
    phi = rng.dirichlet(np.ones(K), size=len(inst.doc.counts))
    varphi = rng.uniform(0.0, 1.0, size=V)
    if inst.config.p == 1.0:
        varphi = np.ones(V)
    return gamma, phi, varphi


def bound_margin(inst: TinyInstance, gamma, phi, varphi, exact: float | None = None, quadrature_points=200) -> float:
    """exact log-likelihood minus ELBO; nonnegative when the bound holds."""
    if exact is None:
        exact = exact_log_likelihood(inst, quadrature_points)
    elbo = elbo_document(inst.doc, inst.target, inst.params, inst.config, gamma, phi, varphi).total
    return exact - elbo


def bound_suite(n_instances: int = 100, seed: int = 0, quadrature_points: int = 200, states_per_instance: int = 3):
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    margins = []
    for _ in range(n_instances):
        inst = random_tiny_instance(rng)
        exact = exact_log_likelihood(inst, quadrature_points)
        worst = min(
            bound_margin(inst, *random_state(inst, rng), exact=exact) for _ in range(states_per_instance)
        )
        margins.append(worst)
    margins = np.asarray(margins)
    return {
        "passed": int(np.sum(margins >= -BOUND_SLACK)),
        "total": n_instances,
        "min_margin": float(margins.min()) if n_instances else None,
        "seconds": time.perf_counter() - start,
    }


def is_point_mass(post: np.ndarray) -> bool:
    return bool(np.all((post == 0.0) | (post == 1.0)))


def disjoint_suite(n_instances: int = 100, seed: int = 0):
    rng = np.random.default_rng(seed)
    ok = 0
    for _ in range(n_instances):
        inst = random_tiny_instance(rng, disjoint=True)
        ok += is_point_mass(exact_switch_posterior(inst))
    return {"passed": ok, "total": n_instances}


def overlap_suite(n_instances: int = 100, seed: int = 0):
    """Overlapping channels: at least one switch posterior must be strictly interior."""
    rng = np.random.default_rng(seed)
    ok = 0
    for _ in range(n_instances):
        inst = random_tiny_instance(rng, disjoint=False)
        post = exact_switch_posterior(inst)
        ok += bool(np.any((post > 0.0) & (post < 1.0)))
    return {"passed": ok, "total": n_instances}


def full_suite(n_instances: int = 100, seed: int = 0, quadrature_points: int = 200) -> dict:
    return {
        "elbo_below_exact": bound_suite(n_instances, seed, quadrature_points),
        "switches_disjoint": disjoint_suite(n_instances, seed + 1),
        "switches_overlap": overlap_suite(n_instances, seed + 2),
    }


def check_instance(inst: TinyInstance, quadrature_points: int = 200, seed: int = 0, states: int = 10) -> dict:
    rng = np.random.default_rng(seed)
    post = exact_switch_posterior(inst, quadrature_points)
    disjoint = bool(np.all(inst.params.beta @ inst.params.pi == 0.0))
    out = {
        "exact_log_likelihood": exact_log_likelihood(inst, quadrature_points),
        "switch_posterior": post.tolist(),
        "disjoint": disjoint,
        "point_mass": {"passed": int(is_point_mass(post) or not disjoint), "total": 1},
    }
    if not disjoint:
        margins = [bound_margin(inst, *random_state(inst, rng), exact=out["exact_log_likelihood"]) for _ in range(states)]
        out["elbo_below_exact"] = {
            "passed": int(sum(m >= -BOUND_SLACK for m in margins)),
            "total": states,
            "min_margin": float(min(margins)),
        }
    return out


def all_passed(summary: dict) -> bool:
    for section in summary.values():
        if isinstance(section, dict) and "passed" in section and "total" in section:
            if section["passed"] != section["total"]:
                return False
    return True
