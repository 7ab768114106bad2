"""Random-evaluation zero testing over a sampling box.

Whether a symbolic residual vanishes identically is decided by evaluating it
at random points of a declared box (a Schwartz–Zippel style identity check
extended to the trig/sqrt function set).  With a fixed seed the verdict is
deterministic.  The test is one-sided: a ``False`` answer is certain, a
``True`` answer holds up to the vanishingly small chance that every sample
landed on the residual's zero set.
"""

from __future__ import annotations

import os
import random
from dataclasses import dataclass, field
from typing import Mapping

from .errors import ContactSRError, EvaluationError
from .expressions import (
    Expr,
    Num,
    evaluate,
    free_names,
    simplify,
    terms_of,
)

#: Number of random samples per zero test.
DEFAULT_SAMPLES = 64

#: Relative tolerance against the largest monomial magnitude.
ZERO_RTOL = 1e-9

_SEED_ENV = "CONTACT_SR_SEED"


def default_seed() -> int:
    """Seed for the probabilistic zero test; CONTACT_SR_SEED overrides."""
    raw = os.environ.get(_SEED_ENV, "")
    try:
        return int(raw)
    except ValueError:
        return 0


@dataclass(frozen=True)
class DomainBox:
    """Sampling region: per-variable intervals plus pinned (constant) names.

    ``intervals`` maps variable names to closed intervals with ``lo < hi``;
    intervals must exclude declared singular loci (such as r = 0 for a 1/r
    potential).  ``pinned`` carries parameter values and any other names that
    are held fixed during sampling.
    """

    intervals: Mapping[str, tuple]
    pinned: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name, (lo, hi) in self.intervals.items():
            if not lo < hi:
                raise ContactSRError(f"domain interval for '{name}' needs lo < hi")
            if name in self.pinned:
                raise ContactSRError(f"'{name}' is both sampled and pinned")

    def covers(self, names) -> bool:
        return all(n in self.intervals or n in self.pinned for n in names)

    def missing(self, names):
        return sorted(n for n in names if not (n in self.intervals or n in self.pinned))

    def sample(self, rng: random.Random) -> dict:
        point = {n: rng.uniform(lo, hi) for n, (lo, hi) in self.intervals.items()}
        point.update(self.pinned)
        return point

    def with_pinned(self, extra: Mapping[str, float]) -> "DomainBox":
        merged = dict(self.pinned)
        merged.update(extra)
        return DomainBox(self.intervals, merged)

    def with_intervals(self, extra: Mapping[str, tuple]) -> "DomainBox":
        merged = dict(self.intervals)
        merged.update(extra)
        return DomainBox(merged, self.pinned)


def _term_scale(terms, binding) -> float:
    scale = 0.0
    for t in terms:
        scale = max(scale, abs(evaluate(t, binding)))
    return scale


def _box_key(box: DomainBox):
    return (
        tuple(sorted(box.intervals.items())),
        tuple(sorted(box.pinned.items())),
    )


_VERDICT_MEMO: dict = {}
_VERDICT_MEMO_CAP = 100_000


def prob_is_zero(
    e: Expr,
    box: DomainBox,
    seed: int | None = None,
    samples: int = DEFAULT_SAMPLES,
) -> bool:
    """True iff ``e`` is negligible at every random sample of ``box``.

    At each sample the residual magnitude is compared against
    ``ZERO_RTOL * (1 + scale)`` where ``scale`` is the largest magnitude among
    the top-level additive terms of the simplified expression, so cancellation
    between large terms is not mistaken for a nonzero value.  Samples landing
    outside a function domain (sqrt of a negative, ln of a non-positive) are
    redrawn, at most ten times in total.

    Deterministic for a fixed seed; verdicts are memoised per (expression,
    box, seed).
    """
    e = simplify(e)
    if isinstance(e, Num):
        return e.value == 0
    names = free_names(e)
    missing = box.missing(names)
    if missing:
        raise ContactSRError(f"sampling box does not cover: {', '.join(missing)}")
    seed_value = default_seed() if seed is None else seed
    key = (e, _box_key(box), seed_value, samples)
    hit = _VERDICT_MEMO.get(key)
    if hit is not None:
        return hit
    terms = terms_of(e)
    arg_names = sorted(names)
    from .numeric import compile_scalar

    fn = compile_scalar([e, *terms], arg_names)
    rng = random.Random(seed_value)
    redraws = 0
    done = 0
    verdict = True
    while done < samples:
        binding = box.sample(rng)
        try:
            values = fn(*(binding[n] for n in arg_names))
        except (ValueError, OverflowError, ZeroDivisionError):
            redraws += 1
            if redraws > 10:
                raise EvaluationError(
                    "sampling kept leaving the function domain"
                ) from None
            continue
        value = abs(values[0])
        scale = max(abs(v) for v in values[1:])
        if not all(
            v == v and abs(v) != float("inf") for v in values  # NaN / inf guard
        ):
            redraws += 1
            if redraws > 10:
                raise EvaluationError("sampling produced non-finite values")
            continue
        if value > ZERO_RTOL * (1.0 + scale):
            verdict = False
            break
        done += 1
    if len(_VERDICT_MEMO) >= _VERDICT_MEMO_CAP:
        _VERDICT_MEMO.clear()
    _VERDICT_MEMO[key] = verdict
    return verdict


def prob_equal(a: Expr, b: Expr, box: DomainBox, seed: int | None = None) -> bool:
    """Semantic equality via ``prob_is_zero`` of the difference."""
    return prob_is_zero(simplify(a - b), box, seed=seed)


def is_nonzero_constant(e: Expr, box: DomainBox, seed: int | None = None) -> bool:
    """True iff ``e`` cannot vanish anywhere on the box: it is a numeric
    constant, or depends only on pinned names, and its value is not negligible."""
    e = simplify(e)
    names = free_names(e)
    if any(n in box.intervals for n in names):
        return False
    if not box.covers(names):
        return False
    binding = dict(box.pinned)
    try:
        value = abs(evaluate(e, binding))
        scale = _term_scale(terms_of(e), binding)
    except EvaluationError:
        return False
    return value > ZERO_RTOL * (1.0 + scale)
