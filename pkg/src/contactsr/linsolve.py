"""Symbolic Gaussian elimination for systems affine in designated unknowns.

Coefficients may be arbitrary expressions in the remaining names; pivots are
chosen by a reliability ladder (exact nonzero constant, then nonzero under the
pinned parameter binding, then nonzero by the probabilistic test).  The result
partitions into solved unknowns, residual equations free of all unknowns
(candidate constraints for the caller), and undetermined unknowns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .errors import InconsistentSystem, NonlinearInUnknowns
from .expressions import (
    Expr,
    Num,
    ONE,
    ZERO,
    differentiate,
    free_names,
    is_zero_literal,
    mul,
    pow_,
    simplify,
    substitute,
    sym,
)
from .sampling import DomainBox, is_nonzero_constant, prob_is_zero


@dataclass
class SolveResult:
    """Outcome of :func:`solve_linear`."""

    solved: dict = field(default_factory=dict)
    residuals: list = field(default_factory=list)
    free: list = field(default_factory=list)


def _affine_parts(eq: Expr, unknowns: Sequence[str], unknown_set: set):
    """Coefficient per unknown and the constant part; degree check included.

    Affine means every ``d eq / d u`` is free of all unknowns; this rejects
    squares, cross terms and any nonlinear wrapping (sin(u), 1/u, ...).
    """
    coeffs = {}
    present = free_names(eq) & unknown_set
    for u in unknowns:
        if u not in present:
            continue
        c = differentiate(eq, u)
        if free_names(c) & unknown_set:
            raise NonlinearInUnknowns(f"equation '{eq}' is not affine in '{u}'")
        if not is_zero_literal(c):
            coeffs[u] = c
    const = simplify(substitute(eq, {u: ZERO for u in unknowns}))
    return coeffs, const


def _pivot_class(c: Expr, box: DomainBox, seed) -> int:
    """0: exact nonzero number, 1: nonzero under pinned names, 2: probably
    nonzero, 3: unusable (possibly zero)."""
    if isinstance(c, Num):
        return 0 if c.value != 0 else 3
    if is_nonzero_constant(c, box, seed=seed):
        return 1
    if not prob_is_zero(c, box, seed=seed):
        return 2
    return 3


def solve_linear(
    equations: Sequence[Expr],
    unknowns: Sequence[str],
    box: DomainBox,
    seed: int | None = None,
) -> SolveResult:
    """Solve ``equations == 0`` for ``unknowns`` by symbolic elimination.

    Raises :class:`NonlinearInUnknowns` when any equation has degree > 1 in an
    unknown and :class:`InconsistentSystem` when a residual reduces to a
    nonzero constant.  Residual equations are reported raw (the caller decides
    how to normalise candidate constraints).
    """
    unknowns = list(unknowns)
    unknown_set = set(unknowns)
    rows = []
    for eq in equations:
        eq = simplify(eq)
        if is_zero_literal(eq):
            continue
        coeffs, const = _affine_parts(eq, unknowns, unknown_set)
        # [coefficients, constant, accumulated scale factor]
        rows.append([coeffs, const, ONE])

    # Fraction-free elimination: rows are cross-multiplied instead of divided
    # (row := a*row - c*pivot), which keeps polynomial coefficients polynomial.
    # Each row remembers the product of pivot coefficients it was scaled by so
    # residuals can be de-scaled before they are interpreted.
    pivots = []  # (unknown, coeffs, const) in elimination order
    for u in unknowns:
        best = None
        best_class = 3
        for idx, (coeffs, _, _) in enumerate(rows):
            c = coeffs.get(u)
            if c is None:
                continue
            cls = _pivot_class(c, box, seed)
            if cls < best_class:
                best, best_class = idx, cls
                if cls == 0:
                    break
        if best is None or best_class == 3:
            continue
        pcoeffs, pconst, _ = rows.pop(best)
        pivots.append((u, pcoeffs, pconst))
        a = pcoeffs[u]
        for row in rows:
            c = row[0].pop(u, None)
            if c is None:
                continue
            for w, cw in pcoeffs.items():
                if w == u:
                    continue
                updated = simplify(a * row[0].get(w, ZERO) - c * cw)
                if is_zero_literal(updated):
                    row[0].pop(w, None)
                else:
                    row[0][w] = updated
            for w in list(row[0]):
                if w not in pcoeffs and w != u:
                    row[0][w] = simplify(a * row[0][w])
            row[1] = simplify(a * row[1] - c * pconst)
            row[2] = simplify(mul(row[2], a))

    result = SolveResult()
    for coeffs, const, scale in rows:
        live = {
            u: c for u, c in coeffs.items() if not prob_is_zero(c, box, seed=seed)
        }
        if live:
            # Cannot happen for unknowns processed above; defensive.
            raise InconsistentSystem(
                f"row retains unknown coefficients {sorted(live)} after elimination"
            )
        residual = const
        if not is_zero_literal(scale) and scale != ONE:
            residual = simplify(mul(residual, pow_(scale, -1)))
        else:
            residual = simplify(residual)
        if is_zero_literal(residual) or prob_is_zero(residual, box, seed=seed):
            continue
        if is_nonzero_constant(residual, box, seed=seed):
            raise InconsistentSystem(f"residual '{residual}' is a nonzero constant")
        result.residuals.append(residual)

    for u, coeffs, const in reversed(pivots):
        rhs = -const
        for w, cw in coeffs.items():
            if w == u:
                continue
            rhs = rhs - cw * sym(w)
        rhs = simplify(mul(rhs, pow_(coeffs[u], -1)))
        rhs = simplify(substitute(rhs, result.solved))
        result.solved[u] = rhs

    result.free = [u for u in unknowns if u not in result.solved]
    return result
