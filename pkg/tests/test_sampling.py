"""Probabilistic zero test over sampling boxes."""

import random

import pytest

from contactsr.errors import ContactSRError, EvaluationError
from contactsr.expressions import evaluate, simplify
from contactsr.parsing import parse_expr
from contactsr.sampling import DomainBox, is_nonzero_constant, prob_is_zero


def test_trivial_identity():
    box = DomainBox({"x": (-2, 2)})
    assert prob_is_zero(parse_expr("x - x"), box)


def test_nonidentity_detected():
    box = DomainBox({"r": (0.5, 2)}, {"l": 1.0})
    assert not prob_is_zero(parse_expr("r - l"), box)


def test_pendulum_tangency_residual_with_multiplier_substituted(pendulum):
    # F_r with the multiplier expression substituted must vanish on r = l,
    # v_r = 0: this is the generation-4 closure of the pendulum ladder.
    from contactsr.expressions import substitute

    residual = parse_expr(
        "r*vtheta^2 - g*(1 - cos(theta)) + (m*g*(1 - cos(theta)) - m*l*vtheta^2)/m"
        " - gamma*vr"
    )
    on_chain = simplify(substitute(residual, {"r": parse_expr("l"),
                                              "vr": parse_expr("0")}))
    assert prob_is_zero(on_chain, pendulum.system.domain)


def test_soundness_spot_check():
    # prob_is_zero == True implies tiny values at many fresh samples.
    box = DomainBox({"x": (-2, 2), "y": (-2, 2)})
    e = simplify(parse_expr("(x + y)^2 - x^2 - 2*x*y - y^2"))
    assert prob_is_zero(e, box)
    rng = random.Random(99)
    for _ in range(1000):
        binding = {"x": rng.uniform(-2, 2), "y": rng.uniform(-2, 2)}
        assert abs(evaluate(e, binding)) <= 1e-6


def test_scale_protects_against_cancellation():
    # The residual of two huge, nearly equal terms must still count as zero.
    box = DomainBox({"x": (0.5, 2)}, {"K": 1e12})
    assert prob_is_zero(parse_expr("K*x - K*x"), box)


def test_determinism_under_seed():
    box = DomainBox({"x": (-2, 2)})
    e = parse_expr("sin(x) - x/2")
    assert prob_is_zero(e, box, seed=5) == prob_is_zero(e, box, seed=5)


def test_missing_coverage_raises():
    box = DomainBox({"x": (-2, 2)})
    with pytest.raises(ContactSRError):
        prob_is_zero(parse_expr("x + y"), box)


def test_domain_violation_resamples_then_fails():
    # sqrt over a box that is always invalid: redraws are exhausted.
    box = DomainBox({"x": (-10, -1)})
    with pytest.raises(EvaluationError):
        prob_is_zero(parse_expr("sqrt(x) - 1"), box)


def test_domain_violation_recovers_when_possible():
    # sqrt(x)^2 - x is zero where defined; the box keeps samples valid.
    box = DomainBox({"x": (0.1, 2)})
    assert prob_is_zero(parse_expr("sqrt(x)^2 - x"), box)


def test_is_nonzero_constant():
    box = DomainBox({"x": (-2, 2)}, {"m": 2.0, "l": 1.0})
    assert is_nonzero_constant(parse_expr("m*l + 1"), box)
    assert not is_nonzero_constant(parse_expr("m - 2*l"), box)
    assert not is_nonzero_constant(parse_expr("x + m"), box)


def test_env_seed_override(monkeypatch):
    from contactsr.sampling import default_seed

    monkeypatch.setenv("CONTACT_SR_SEED", "1234")
    assert default_seed() == 1234
    monkeypatch.setenv("CONTACT_SR_SEED", "not-a-number")
    assert default_seed() == 0
