"""Symbolic Gaussian elimination: solving, residuals, degree checks."""

import random
from fractions import Fraction

import pytest

from contactsr.errors import InconsistentSystem, NonlinearInUnknowns
from contactsr.expressions import (
    add,
    evaluate,
    free_names,
    mul,
    num,
    serialize,
    simplify,
    substitute,
    sym,
)
from contactsr.linsolve import solve_linear
from contactsr.parsing import parse_expr
from contactsr.sampling import DomainBox, prob_is_zero


def box_for(names, pinned=None):
    return DomainBox({n: (-2.0, 2.0) for n in names}, pinned or {})


def test_single_pivot_solve():
    box = box_for(["p1"], {"m": 2.0})
    res = solve_linear([parse_expr("p1 - m*F1_unk")], ["F1_unk"], box)
    assert serialize(res.solved["F1_unk"]) == "p1/m"
    assert res.residuals == [] and res.free == []


def test_cawley_tangency_system():
    # Tangency of the three primary constraints, momenta already substituted:
    # F3 and F1 are pinned, F2 never appears, and q3^2/2 survives as the
    # residual that will normalise to the constraint q3.
    box = box_for(["q1", "q2", "q3", "v1", "v2", "v3", "z"], {"gamma": 0.2})
    eqs = [
        parse_expr("-gamma*v3 - F3"),
        parse_expr("1/2*q3^2"),
        parse_expr("q2*q3 - gamma*v1 - F1"),
    ]
    res = solve_linear(eqs, ["F1", "F2", "F3"], box)
    assert set(res.solved) == {"F1", "F3"}
    assert res.free == ["F2"]
    assert len(res.residuals) == 1
    assert prob_is_zero(simplify(res.residuals[0] - parse_expr("1/2*q3^2")), box)


def test_pendulum_tangency_system():
    box = box_for(["r", "theta", "lam", "vr", "vtheta", "vlam", "z"],
                  {"m": 1.0, "l": 1.0, "g": 9.8, "gamma": 0.1})
    eqs = [
        parse_expr(
            "m*r*vtheta^2 - m*g*(1-cos(theta)) + lam - gamma*m*vr - m*Fr"
        ),
        parse_expr(
            "-m*g*r*sin(theta) - gamma*m*r^2*vtheta - 2*m*r*vtheta*vr - m*r^2*Ftheta"
        ),
        parse_expr("r - l"),
    ]
    res = solve_linear(eqs, ["Fr", "Ftheta", "Flam"], box)
    assert set(res.solved) == {"Fr", "Ftheta"}
    assert res.free == ["Flam"]
    [residual] = res.residuals
    assert prob_is_zero(simplify(residual - parse_expr("r - l")), box)
    expected = parse_expr("r*vtheta^2 - g*(1-cos(theta)) + lam/m - gamma*vr")
    assert prob_is_zero(simplify(res.solved["Fr"] - expected), box)


def test_nonlinear_in_unknowns():
    box = box_for(["x"])
    with pytest.raises(NonlinearInUnknowns):
        solve_linear([parse_expr("u^2 - x")], ["u"], box)
    with pytest.raises(NonlinearInUnknowns):
        solve_linear([parse_expr("u*w - 1")], ["u", "w"], box)
    with pytest.raises(NonlinearInUnknowns):
        solve_linear([parse_expr("sin(u)")], ["u"], box)


def test_inconsistent_system():
    box = box_for(["x"], {"c": 3.0})
    with pytest.raises(InconsistentSystem):
        solve_linear([parse_expr("u - 1"), parse_expr("u - 2")], ["u"], box)
    with pytest.raises(InconsistentSystem):
        solve_linear([parse_expr("c")], ["u"], box)


def test_expression_pivot_division():
    # A pivot coefficient that is a sampled variable (nonzero over the box).
    box = DomainBox({"r": (0.5, 2.0), "x": (-2, 2)})
    res = solve_linear([parse_expr("r*u - x")], ["u"], box)
    assert prob_is_zero(simplify(res.solved["u"] - parse_expr("x/r")), box)


def test_underdetermined_keeps_free_symbol_in_rhs():
    box = box_for(["c"])
    res = solve_linear([parse_expr("u + w - c")], ["u", "w"], box)
    assert res.free == ["w"]
    back = simplify(substitute(parse_expr("u + w - c"), res.solved))
    assert prob_is_zero(back, box_for(["c", "w"]))


def _random_affine_system(rng, aux_names):
    k = rng.randint(1, 6)
    m = rng.randint(1, 6)
    unknowns = [f"u{i}" for i in range(k)]

    def coeff():
        r = rng.random()
        if r < 0.45:
            return num(Fraction(rng.randint(-3, 3)))
        if r < 0.75:
            return mul(num(Fraction(rng.randint(-2, 2))), sym(rng.choice(aux_names)))
        return add(num(Fraction(rng.randint(-2, 2))), sym(rng.choice(aux_names)))

    eqs = []
    for _ in range(m):
        terms = [mul(coeff(), sym(u)) for u in unknowns if rng.random() < 0.8]
        terms.append(coeff())
        eqs.append(simplify(add(*terms)))
    return eqs, unknowns


def test_back_substitution_identity_on_random_systems():
    """Each input equation, after substituting the solved unknowns, is either
    probabilistically zero or matches a residual up to a nonzero constant."""
    aux = ["x", "y"]
    rng = random.Random(2024)
    checked = 0
    box_aux = DomainBox({"x": (-2, 2), "y": (-2, 2)})
    attempts = 0
    while checked < 60 and attempts < 200:
        attempts += 1
        eqs, unknowns = _random_affine_system(rng, aux)
        free_box = DomainBox(
            {**{n: (-2.0, 2.0) for n in aux},
             **{u: (-2.0, 2.0) for u in unknowns}}
        )
        try:
            res = solve_linear(eqs, unknowns, box_aux)
        except InconsistentSystem:
            continue
        for eq in eqs:
            back = simplify(substitute(eq, res.solved))
            if prob_is_zero(back, free_box):
                continue
            matched = False
            for r in res.residuals:
                ratio_holds = _proportional(back, r, free_box)
                if ratio_holds:
                    matched = True
                    break
            assert matched, (
                f"equation '{serialize(eq)}' reduces to '{serialize(back)}' "
                "which is neither zero nor a residual"
            )
        checked += 1
    assert checked >= 40


def _proportional(a, b, box):
    """a == c * b for some nonzero constant c, decided numerically."""
    rng = random.Random(5)
    ratios = []
    for _ in range(12):
        binding = box.sample(rng)
        try:
            va, vb = evaluate(a, binding), evaluate(b, binding)
        except Exception:
            return False
        if abs(vb) < 1e-12:
            if abs(va) > 1e-9:
                return False
            continue
        ratios.append(va / vb)
    if not ratios:
        return False
    first = ratios[0]
    return abs(first) > 1e-12 and all(abs(r - first) <= 1e-6 * (1 + abs(first))
                                      for r in ratios)
