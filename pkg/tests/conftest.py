"""Shared fixtures: the bundled corpus systems and semantic-equality helpers."""

from __future__ import annotations

import random
from importlib import resources
from pathlib import Path

import pytest

from contactsr import (
    DomainBox,
    LagrangianSystem,
    load_system,
    prob_is_zero,
    simplify,
)
from contactsr.parsing import parse_expr

CORPUS = resources.files("contactsr.corpus")


def corpus_path(name: str) -> Path:
    return Path(str(CORPUS / name))


@pytest.fixture(scope="session")
def pendulum():
    return load_system(corpus_path("pendulum.sys"))


@pytest.fixture(scope="session")
def central_force():
    return load_system(corpus_path("central_force.sys"))


@pytest.fixture(scope="session")
def cawley():
    return load_system(corpus_path("cawley.sys"))


@pytest.fixture(scope="session")
def corpus_systems(pendulum, central_force, cawley):
    return {
        "pendulum": pendulum,
        "central_force": central_force,
        "cawley": cawley,
    }


def assert_zero(expr, box, msg=""):
    assert prob_is_zero(simplify(expr), box, seed=7), (
        msg or f"expected zero, got '{simplify(expr)}'"
    )


def assert_equal_sem(a, b, box, msg=""):
    assert_zero(simplify(a - b), box, msg or f"'{a}' != '{b}' semantically")


def make_system(name, q_names, lagrangian_src, params, intervals):
    """Build a system with sensible default intervals for derived coords."""
    from contactsr.geometry import momentum_name, velocity_name

    lag = parse_expr(lagrangian_src)
    box = dict(intervals)
    for q in q_names:
        box.setdefault(q, (-2.0, 2.0))
        box.setdefault(velocity_name(q), (-2.0, 2.0))
        box.setdefault(momentum_name(q), (-2.0, 2.0))
    box.setdefault("z", (-1.0, 1.0))
    return LagrangianSystem(
        name=name,
        q_names=tuple(q_names),
        lagrangian=lag,
        params=dict(params),
        domain=DomainBox(box, dict(params)),
    )


def rng_for(test_name: str) -> random.Random:
    return random.Random(hash(test_name) & 0xFFFFFF)


def check_backsubstitution(eqs, result, sample_names, seed=7, samples=48):
    """Numeric form of the back-substitution identity for solve_linear.

    At random samples of the auxiliary variables and free unknowns, the
    solved unknowns are evaluated from their expressions; every input
    equation must then be negligible, or proportional (by one fixed nonzero
    constant) to one of the residuals.
    """
    from contactsr.expressions import evaluate, terms_of

    rng = random.Random(seed)
    tol = 1e-7
    points = []
    for _ in range(samples):
        binding = {n: rng.uniform(-2.0, 2.0) for n in sample_names}
        for u, rhs in result.solved.items():
            binding[u] = evaluate(rhs, binding)
        points.append(binding)

    residual_values = [
        [evaluate(r, b) for b in points] for r in result.residuals
    ]
    for eq in eqs:
        vals = []
        for b in points:
            scale = max(abs(evaluate(t, b)) for t in terms_of(eq))
            vals.append((evaluate(eq, b), scale))
        if all(abs(v) <= tol * (1 + s) for v, s in vals):
            continue
        matched = False
        for rvals in residual_values:
            ratios = [
                v / r for (v, _), r in zip(vals, rvals) if abs(r) > 1e-9
            ]
            if not ratios:
                continue
            c = ratios[0]
            if abs(c) > 1e-9 and all(
                abs(v - c * r) <= tol * (1 + abs(v))
                for (v, _), r in zip(vals, rvals)
            ):
                matched = True
                break
        assert matched, f"equation '{eq}' is neither solved nor a residual"
