"""Dynamics on the unified bundle (q, v, p, z) and its constraint algorithm.

The workflow:

1.  :func:`build_unified` forms the coupling C = p.v, the pulled-back
    Lagrangian and the Hamiltonian H = C - L together with the precontact
    form eta = dz - p dq.
2.  :func:`extract_primary_equations` matches coefficients of
    i(X)d(eta) = dH - (R(H)) eta and i(X)eta = -H for an undetermined field
    X = f^i d/dq + F^i d/dv + G_i d/dp + f d/dz.  The matching is performed
    literally (through the form machinery and the linear solver), never
    hard-coded, and the dz component is verified to vanish at run time.
    The residual equations of the match are the primary constraints
    p_i - dL/dv_i.
3.  :func:`run_constraint_algorithm` repeatedly imposes tangency of X to the
    current constraint set.  Each pass either determines unknown slots or
    spawns a new constraint generation; new constraints must be solvable for
    a single designated variable (momenta first, then multiplier-like
    configuration variables, then velocities, then the remaining
    configuration variables), building a triangular substitution chain.
4.  :func:`project_to_lagrangian` / :func:`project_to_hamiltonian` push the
    resolved field to the two classical pictures.

Free slots that survive (genuinely underdetermined directions) are reported
by name and default to zero only when a reduced ODE is requested.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import (
    CoefficientMatchFailure,
    ContactSRError,
    InconsistentDynamics,
    InconsistentSystem,
    IterationCapExceeded,
    ReductionFailure,
    VelocityEliminationFailure,
)
from .expressions import (
    Expr,
    Num,
    Pow,
    Prod,
    Sum,
    Sym,
    ZERO,
    add,
    differentiate,
    evaluate,
    free_names,
    is_zero_literal,
    mul,
    num,
    pow_,
    simplify,
    substitute,
    sym,
    terms_of,
)
from .geometry import (
    LagrangianSystem,
    OneForm,
    TwoForm,
    VectorField,
    Z,
    differential,
    exterior_derivative,
    unknown_name,
    velocity_name,
)
from .linsolve import solve_linear
from .sampling import DomainBox, prob_is_zero

ORIGIN_PRIMARY = "primary-legendre"
ORIGIN_TANGENCY = "tangency"


@dataclass(frozen=True)
class UnifiedSpace:
    """The precontact system (W, eta, H) built from a Lagrangian."""

    sys: LagrangianSystem
    chart: tuple
    eta: OneForm
    deta: TwoForm
    coupling: Expr
    lag: Expr
    ham: Expr
    reeb: VectorField

    @property
    def dim(self) -> int:
        return len(self.chart)


def build_unified(sys: LagrangianSystem) -> UnifiedSpace:
    """Populate the unified-bundle data; the Reeb representative is d/dz."""
    chart = sys.coords_unified()
    eta_coeffs = {c: ZERO for c in chart}
    for q, p in zip(sys.q_names, sys.p_names):
        eta_coeffs[q] = mul(num(-1), sym(p))
    eta_coeffs[Z] = num(1)
    eta = OneForm(chart, eta_coeffs)
    deta = exterior_derivative(eta)
    coupling = simplify(add(*(mul(sym(p), sym(v))
                              for p, v in zip(sys.p_names, sys.v_names))))
    lag = simplify(sys.lagrangian)
    ham = simplify(coupling - lag)
    reeb = VectorField(chart, {c: (num(1) if c == Z else ZERO) for c in chart})
    return UnifiedSpace(sys, chart, eta, deta, coupling, lag, ham, reeb)


def standard_reeb(space: UnifiedSpace) -> VectorField:
    return space.reeb


def reeb_representative(space: UnifiedSpace, v_coeffs: Mapping[str, Expr]) -> VectorField:
    """A general Reeb representative d/dz + c^i d/dv_i of the precontact form."""
    coeffs = {c: ZERO for c in space.chart}
    coeffs[Z] = num(1)
    for v, e in v_coeffs.items():
        if v not in space.sys.v_names:
            raise ContactSRError(
                f"Reeb representatives only vary along velocity directions, got {v}"
            )
        coeffs[v] = e
    return VectorField(space.chart, coeffs)


@dataclass
class AnsatzField:
    """Field with a mix of determined coefficients and named unknowns."""

    chart: tuple
    slots: dict  # coord -> Expr (unknown slots hold Sym(unknown))
    unknowns: list  # names still undetermined
    slot_of_unknown: dict  # unknown name -> coord

    def as_vector_field(self) -> VectorField:
        return VectorField(self.chart, dict(self.slots))

    def resolve(self, name: str, value: Expr) -> None:
        coord = self.slot_of_unknown[name]
        self.slots[coord] = value
        self.unknowns.remove(name)


@dataclass
class Generation:
    """One rung of the constraint ladder."""

    constraints: list  # Expr, each normalised and sign-fixed
    origin: str
    determined: dict = field(default_factory=dict)  # unknown -> Expr


@dataclass
class ConstraintLadder:
    generations: list = field(default_factory=list)
    final: bool = False

    def all_constraints(self):
        for gen in self.generations:
            yield from gen.constraints


@dataclass
class ChainEntry:
    var: str
    rhs: Expr  # fully reduced: contains no designated variables
    constraint: Expr  # the normalised constraint this solve came from
    generation: int


class SubstitutionChain:
    """Triangular substitution chain kept fully reduced.

    Every right-hand side is free of all designated variables, so one
    substitution pass reaches the fixed point regardless of order.  Newly
    added solves are reduced against the existing chain and folded into the
    earlier right-hand sides (this implements the modulo-earlier-constraints
    reduction; iterating to the fixed point makes the newest-first order of
    application immaterial).
    """

    def __init__(self):
        self.entries: list = []
        self._map: dict = {}

    def __len__(self):
        return len(self.entries)

    def __contains__(self, var: str):
        return var in self._map

    @property
    def mapping(self) -> dict:
        return dict(self._map)

    def designated(self):
        return list(self._map)

    def apply(self, e: Expr) -> Expr:
        return simplify(substitute(e, self._map))

    def add(self, var: str, rhs: Expr, constraint: Expr, generation: int) -> None:
        rhs = self.apply(rhs)
        if var in free_names(rhs):
            raise ReductionFailure(
                f"solve for '{var}' is implicit: rhs still contains it"
            )
        for entry in self.entries:
            entry.rhs = simplify(substitute(entry.rhs, {var: rhs}))
            self._map[entry.var] = entry.rhs
        entry = ChainEntry(var, rhs, constraint, generation)
        self.entries.append(entry)
        self._map[var] = rhs


@dataclass
class UnifiedSolution:
    """Output of the constraint algorithm."""

    space: UnifiedSpace
    field: AnsatzField
    ladder: ConstraintLadder
    chain: SubstitutionChain
    seed: int | None = None

    @property
    def free_unknowns(self) -> list:
        return list(self.field.unknowns)

    def final_constraints(self) -> list:
        """Defining functions of the final submanifold: var - reduced rhs."""
        return [
            normalize_constraint(sym(e.var) - e.rhs, self.space.sys.domain,
                                 designated=e.var)
            for e in self.chain.entries
        ]

    def resolved_field(self, reduce: bool = True) -> VectorField:
        """The solution field; with ``reduce`` the chain is substituted in."""
        vf = self.field.as_vector_field()
        if reduce:
            vf = vf.map_coeffs(self.chain.apply)
        return vf


# ---------------------------------------------------------------------------
# constraint normalisation


def _monomials(e: Expr):
    """Top-level terms as (coeff, [(atom, exp), ...]) pairs."""
    out = []
    for t in terms_of(e):
        coeff = Fraction(1)
        factors = []
        fs = t.factors if isinstance(t, Prod) else (t,)
        for f in fs:
            if isinstance(f, Num):
                coeff = f.value
            elif isinstance(f, Pow):
                factors.append((f.base, f.exponent))
            else:
                factors.append((f, 1))
        out.append((coeff, factors))
    return out


def _is_param_only(e: Expr, box: DomainBox) -> bool:
    names = free_names(e)
    return bool(names) and all(n in box.pinned for n in names)


def normalize_constraint(
    e: Expr, box: DomainBox, designated: str | None = None,
    seed: int | None = None,
) -> Expr:
    """Normalise a residual into a reported constraint.

    Steps: simplify; clear monomial denominators; divide out the common
    numeric content and common parameter-only factors; for a single-term
    residual, reduce exponents of the variable part to 1 (the vanishing locus
    of u^k is that of u, and the reduced form keeps its differential useful
    for the next tangency pass); finally fix the overall sign so the
    designated variable (when given) enters positively.
    """
    e = simplify(e)
    if is_zero_literal(e):
        return e
    monos = _monomials(e)

    # Clear denominators: multiply by every base appearing with a negative
    # exponent, at its worst power.
    denom: dict = {}
    for _, factors in monos:
        for atom, k in factors:
            if k < 0:
                denom[atom] = max(denom.get(atom, 0), -k)
    if denom:
        e = simplify(mul(e, *(pow_(a, k) for a, k in denom.items())))
        monos = _monomials(e)

    # Common numeric content (exact coefficients only).
    coeffs = [c for c, _ in monos]
    if all(isinstance(c, Fraction) for c in coeffs):
        from math import gcd

        g = Fraction(
            gcd(*(abs(c.numerator) for c in coeffs)) if len(coeffs) > 1
            else abs(coeffs[0].numerator),
        )
        lcm = 1
        for c in coeffs:
            lcm = lcm * c.denominator // gcd(lcm, c.denominator)
        g = g / lcm
        if g != 0 and g != 1:
            e = simplify(mul(e, num(1 / g)))
            monos = _monomials(e)

    # Common parameter-only factors across all terms.
    if len(monos) >= 1:
        common: dict | None = None
        for _, factors in monos:
            cur = {a: k for a, k in factors if _is_param_only(a, box)}
            if common is None:
                common = cur
            else:
                common = {
                    a: min(k, common[a]) for a, k in cur.items() if a in common
                }
            if not common:
                break
        if common:
            drop = {a: k for a, k in common.items()
                    if k > 0 and not prob_is_zero(a, box, seed=seed)}
            if drop:
                e = simplify(mul(e, *(pow_(a, -k) for a, k in drop.items())))
                monos = _monomials(e)

    # Single-term residual: flatten exponents of the variable part.
    if len(monos) == 1:
        coeff, factors = monos[0]
        kept = [a for a, k in factors if not _is_param_only(a, box)]
        if kept:
            e = simplify(mul(*kept))
            monos = _monomials(e)

    # Sign: the designated variable's coefficient (or the canonically first
    # term) should be positive.
    flip = False
    if designated is not None and designated in free_names(e):
        c = differentiate(e, designated)
        sign = _term_sign(c, box)
        if sign < 0:
            flip = True
    else:
        sign = _term_sign(terms_of(e)[0], box)
        if sign < 0:
            flip = True
    if flip:
        e = simplify(mul(num(-1), e))
    return e


def _term_sign(t: Expr, box: DomainBox) -> int:
    """Sign of a term: evaluated when it depends only on pinned names, else
    the sign of the numeric coefficient of its canonically first monomial."""
    names = free_names(t)
    if all(n in box.pinned for n in names):
        try:
            v = evaluate(t, dict(box.pinned))
        except Exception:
            return 0
        return 1 if v > 0 else (-1 if v < 0 else 0)
    first = terms_of(t)[0]
    coeff = Fraction(1)
    fs = first.factors if isinstance(first, Prod) else (first,)
    for f in fs:
        if isinstance(f, Num):
            coeff = f.value
    return -1 if coeff < 0 else 1


# ---------------------------------------------------------------------------
# equation extraction by coefficient matching


def extract_primary_equations(
    space: UnifiedSpace,
    reeb: VectorField | None = None,
    seed: int | None = None,
):
    """Match i(X)d(eta) = dH - (R(H)) eta and i(X)eta = -H coefficientwise.

    Returns ``(AnsatzField, primary constraints)``.  The f^i, G_i and f slots
    are solved by the match; the F^i remain unknown.  The dz component of the
    first equation must vanish (identically for the canonical Reeb choice,
    and on the primary constraints for a general representative); a failure
    raises :class:`CoefficientMatchFailure`.
    """
    sys = space.sys
    reeb = reeb or space.reeb
    chart = space.chart

    qslot = {q: f"_f{q}" for q in sys.q_names}
    slots = {}
    order = []
    for q in sys.q_names:
        slots[q] = sym(qslot[q])
        order.append(qslot[q])
    for q, v in zip(sys.q_names, sys.v_names):
        slots[v] = sym(unknown_name(q))
        order.append(unknown_name(q))
    for q, p in zip(sys.q_names, sys.p_names):
        slots[p] = sym(f"_G{q}")
        order.append(f"_G{q}")
    slots[Z] = sym("_fz")
    order.append("_fz")

    X = VectorField(chart, slots)
    lhs = space.deta.contract(X)
    r_of_h = reeb.apply(space.ham)
    dham = differential(space.ham, chart)

    equations = []
    dz_residual = None
    for c in chart:
        eq = simplify(lhs[c] - dham[c] + mul(r_of_h, space.eta[c]))
        if c == Z:
            dz_residual = eq
        else:
            equations.append(eq)
    scalar = simplify(add(space.eta.contract(X), space.ham))
    equations.append(scalar)

    box = sys.domain
    result = solve_linear(equations, order, box, seed=seed)

    f_names = [unknown_name(q) for q in sys.q_names]
    stray = [u for u in result.free if u not in f_names]
    if stray:
        raise CoefficientMatchFailure(
            f"matching left unexpected slots undetermined: {stray}"
        )

    field = AnsatzField(
        chart=chart,
        slots={},
        unknowns=[u for u in f_names if u in result.free],
        slot_of_unknown={unknown_name(q): v
                         for q, v in zip(sys.q_names, sys.v_names)},
    )
    for coord in chart:
        want = slots[coord]
        name = want.name if isinstance(want, Sym) else None
        if name in result.solved:
            field.slots[coord] = result.solved[name]
        else:
            field.slots[coord] = want

    constraints = [
        normalize_constraint(r, box, designated=_designate_primary(r, sys),
                             seed=seed)
        for r in result.residuals
    ]

    # dz coefficients must cancel once the primary constraints hold.
    primary_subs = {}
    for p, v in zip(sys.p_names, sys.v_names):
        primary_subs[p] = differentiate(sys.lagrangian, v)
    if dz_residual is None:
        raise CoefficientMatchFailure("no dz component produced")
    reduced = simplify(substitute(dz_residual, primary_subs))
    if not (is_zero_literal(reduced) or prob_is_zero(reduced, box, seed=seed)):
        raise CoefficientMatchFailure(
            f"dz coefficient identity fails: residual '{reduced}'"
        )
    return field, constraints


def _designate_primary(residual: Expr, sys: LagrangianSystem) -> str | None:
    names = free_names(residual)
    for p in sys.p_names:
        if p in names:
            return p
    return None


# ---------------------------------------------------------------------------
# tangency and the full algorithm


@dataclass
class PassResult:
    determined: dict
    new_constraints: list


def tangency_pass(
    space: UnifiedSpace,
    field: AnsatzField,
    ladder: ConstraintLadder,
    chain: SubstitutionChain,
    seed: int | None = None,
) -> PassResult:
    """Impose X(xi) = 0 on the chain for every ladder constraint xi.

    The batch of tangency expressions goes through the linear solver over the
    remaining unknown slots; solved unknowns come back chain-reduced, and
    residuals that are not implied by the chain come back as candidate new
    constraints (normalised but not yet solved for a designated variable).
    """
    if not ladder.generations:
        raise ContactSRError("tangency pass needs a non-empty ladder")
    X = field.as_vector_field()
    box = space.sys.domain
    eqs = []
    for xi in ladder.all_constraints():
        e = chain.apply(X.apply(xi))
        if not is_zero_literal(e):
            eqs.append(e)
    try:
        result = solve_linear(eqs, list(field.unknowns), box, seed=seed)
    except InconsistentSystem as exc:
        raise InconsistentDynamics(
            f"empty final submanifold: {exc}"
        ) from exc

    determined = {}
    for name, value in result.solved.items():
        determined[name] = chain.apply(value)

    new_constraints = []
    for r in result.residuals:
        cand = normalize_constraint(r, box, seed=seed)
        if is_zero_literal(cand) or prob_is_zero(cand, box, seed=seed):
            continue
        if any(prob_is_zero(cand - c, box, seed=seed) for c in new_constraints):
            continue
        new_constraints.append(cand)
    return PassResult(determined, new_constraints)


_cap = 2  # iteration cap multiplier over the bundle dimension


def run_constraint_algorithm(
    sys: LagrangianSystem,
    reeb: VectorField | None = None,
    seed: int | None = None,
) -> UnifiedSolution:
    """Iterate tangency passes to the final constraint submanifold.

    Stops when a pass adds no constraints and either no slots remain unknown
    or nothing new was determined; the surviving unknowns are genuinely free.
    Raises :class:`InconsistentDynamics` when a tangency residual is a
    nonzero constant, :class:`ReductionFailure` when a constraint cannot be
    solved for a single designated variable, and
    :class:`IterationCapExceeded` past ``2 * dim(W)`` passes.
    """
    space = build_unified(sys)
    field, primary = extract_primary_equations(space, reeb=reeb, seed=seed)
    ladder = ConstraintLadder()
    chain = SubstitutionChain()
    first = [
        _solve_designated(xi, space, chain, 1, seed=seed) for xi in primary
    ]
    ladder.generations.append(Generation(first, ORIGIN_PRIMARY))

    cap = _cap * space.dim
    for _ in range(cap):
        res = tangency_pass(space, field, ladder, chain, seed=seed)
        current = ladder.generations[-1]
        for name, value in res.determined.items():
            field.resolve(name, value)
            current.determined[name] = value
        if res.new_constraints:
            gen_index = len(ladder.generations) + 1
            fixed = [
                _solve_designated(xi, space, chain, gen_index, seed=seed)
                for xi in res.new_constraints
            ]
            ladder.generations.append(Generation(fixed, ORIGIN_TANGENCY))
            continue
        if not field.unknowns or not res.determined:
            ladder.final = True
            break
    else:
        raise IterationCapExceeded(
            f"constraint algorithm did not stabilise in {cap} passes"
        )

    _verify_solution(space, field, chain, seed=seed)
    return UnifiedSolution(space, field, ladder, chain, seed=seed)


#: Designation priority: momenta, then multiplier-like configuration
#: variables, then velocities, then remaining configuration variables.
def _designation_categories(sys: LagrangianSystem):
    degenerate = sys.degenerate_q_names()
    return (
        list(sys.p_names),
        [q for q in sys.q_names if q in degenerate],
        list(sys.v_names),
        [q for q in sys.q_names if q not in degenerate],
    )


def _solve_designated(
    xi: Expr,
    space: UnifiedSpace,
    chain: SubstitutionChain,
    generation: int,
    seed: int | None = None,
) -> Expr:
    """Solve a normalised constraint for its designated variable, extend the
    chain, and return the constraint with its sign fixed so the designated
    variable enters positively.

    The constraint must be affine in some candidate with a usable
    coefficient.  Within a priority category, a candidate whose coefficient
    cannot vanish (a constant) beats one whose coefficient merely is not
    identically zero: solving for the latter would divide by a function with
    zeros inside the domain (the rest point of a pendulum, say).
    """
    from .linsolve import _pivot_class

    sys = space.sys
    box = sys.domain
    names = free_names(xi)
    for category in _designation_categories(sys):
        best = None  # (pivot class, category index, variable)
        for idx, var in enumerate(category):
            if var not in names or var in chain:
                continue
            coeff = differentiate(xi, var)
            if var in free_names(coeff):
                continue  # not affine in this candidate
            cls = _pivot_class(coeff, box, seed)
            if cls >= 3:
                continue
            if best is None or (cls, idx) < best[:2]:
                best = (cls, idx, var)
        if best is None:
            continue
        var = best[2]
        try:
            res = solve_linear([xi], [var], box, seed=seed)
        except (InconsistentSystem, ContactSRError):
            continue
        if var in res.solved and not res.residuals:
            fixed = normalize_constraint(xi, box, designated=var, seed=seed)
            chain.add(var, res.solved[var], fixed, generation)
            return fixed
    raise ReductionFailure(
        f"constraint '{xi}' is not solvable for any single designated variable"
    )


def _verify_solution(space, field, chain, seed=None):
    """Both defining equations must hold on the chain for the resolved field."""
    X = field.as_vector_field()
    lhs = space.deta.contract(X)
    dham = differential(space.ham, space.chart)
    r_of_h = space.reeb.apply(space.ham)
    box = space.sys.domain
    for c in space.chart:
        residual = chain.apply(simplify(lhs[c] - dham[c] + mul(r_of_h, space.eta[c])))
        if free_names(residual) & set(field.unknowns):
            raise CoefficientMatchFailure(
                f"free unknown leaks into equation residual along d{c}"
            )
        if not (is_zero_literal(residual) or prob_is_zero(residual, box, seed=seed)):
            raise CoefficientMatchFailure(
                f"equation residual along d{c} does not vanish on the chain"
            )
    scalar = chain.apply(simplify(add(space.eta.contract(X), space.ham)))
    if not (is_zero_literal(scalar) or prob_is_zero(scalar, box, seed=seed)):
        raise CoefficientMatchFailure("i(X)eta + H does not vanish on the chain")


# ---------------------------------------------------------------------------
# projections


def project_to_lagrangian(sol: UnifiedSolution) -> VectorField:
    """Drop the dp slots and restrict to the Lagrangian side (q, v, z).

    The q-coefficients must equal the velocities structurally (the
    second-order condition the unified formalism grants for free).
    """
    if not sol.ladder.final:
        raise ContactSRError("projection needs a final ladder")
    sys = sol.space.sys
    coeffs = {}
    for q, v in zip(sys.q_names, sys.v_names):
        fq = simplify(sol.field.slots[q])
        if fq != sym(v):
            raise CoefficientMatchFailure(
                f"holonomy violated: f^{q} = {fq} instead of {v}"
            )
        coeffs[q] = sol.chain.apply(fq)
        coeffs[v] = sol.chain.apply(sol.field.slots[v])
    coeffs[Z] = sol.chain.apply(sol.field.slots[Z])
    return VectorField(sys.coords_velocity(), coeffs)


@dataclass
class HamiltonianProjection:
    """Momentum-side output: field, constraints, and kernel bookkeeping."""

    field: VectorField
    constraints: list  # P_f defining functions in (q, p, z)
    kernel_velocities: list  # velocities with no momentum-side expression
    kernel_dependent: list  # coordinates whose coefficient still involves them


def _velocity_elimination(sol: UnifiedSolution):
    """Express velocities in momentum-side coordinates where possible.

    Sources: chain rows that designate a velocity directly, plus the
    momentum-designated rows (the Legendre relations restricted to the final
    submanifold) solved for the velocities they touch.  Returns the reduced
    elimination map, the kernel velocities with no expression, and the
    velocity-free residuals of the solve (momentum-side constraints).
    """
    sys = sol.space.sys
    box = sys.domain
    elim: dict = {}
    momentum_rows = []
    other_rows = []
    for entry in sol.chain.entries:
        expr = simplify(sym(entry.var) - entry.rhs)
        if entry.var in sys.v_names:
            elim[entry.var] = entry.rhs
        elif entry.var in sys.p_names:
            momentum_rows.append(expr)
        else:
            other_rows.append(expr)

    remaining = [v for v in sys.v_names if v not in elim]
    try:
        res = solve_linear(momentum_rows, remaining, box, seed=sol.seed)
    except InconsistentSystem as exc:  # pragma: no cover - defensive
        raise VelocityEliminationFailure(str(exc)) from exc
    elim.update(res.solved)
    kernel = [v for v in remaining if v not in res.solved]

    # Reduce the map to its fixed point (a velocity rhs may quote other
    # velocities, e.g. a multiplier velocity in terms of an angular one).
    for _ in range(len(elim)):
        changed = False
        for v, rhs in list(elim.items()):
            new = simplify(substitute(rhs, elim))
            if new != rhs:
                elim[v] = new
                changed = True
        if not changed:
            break
    return elim, kernel, res.residuals, other_rows


def project_to_hamiltonian(
    sol: UnifiedSolution, strict: bool = False
) -> HamiltonianProjection:
    """Drop the dv slots and express the rest in (q, p, z).

    Velocities spanning the kernel of the fiber derivative admit no
    momentum-side expression; with ``strict`` this raises
    :class:`VelocityEliminationFailure`, otherwise the affected coefficients
    are emitted with the velocity left in place and reported in the result.
    """
    if not sol.ladder.final:
        raise ContactSRError("projection needs a final ladder")
    sys = sol.space.sys
    box = sys.domain
    elim, kernel, residuals, other_rows = _velocity_elimination(sol)
    if strict and kernel:
        raise VelocityEliminationFailure(
            f"velocities with no momentum-side expression: {kernel}"
        )

    constraints = [normalize_constraint(r, box, seed=sol.seed) for r in residuals]
    for expr in other_rows:
        reduced = simplify(substitute(expr, elim))
        if is_zero_literal(reduced) or prob_is_zero(reduced, box, seed=sol.seed):
            continue
        designated = next(iter(free_names(expr) & set(sol.chain.designated())), None)
        constraints.append(
            normalize_constraint(reduced, box, designated=designated, seed=sol.seed)
        )

    coeffs = {}
    kernel_dependent = []
    vset = set(sys.v_names)
    for coord in sys.coords_momentum():
        e = simplify(substitute(sol.chain.apply(sol.field.slots[coord]), elim))
        if free_names(e) & vset:
            kernel_dependent.append(coord)
            if strict:
                raise VelocityEliminationFailure(
                    f"coefficient along d/d{coord} keeps velocities: {e}"
                )
        coeffs[coord] = e
    fieldv = VectorField(sys.coords_momentum(), coeffs)
    return HamiltonianProjection(fieldv, constraints, kernel, kernel_dependent)


def hamiltonian_on_momentum_chart(sol: UnifiedSolution) -> Expr:
    """H with the velocities eliminated; needs an empty Legendre kernel."""
    elim, kernel, _, _ = _velocity_elimination(sol)
    ham = simplify(substitute(sol.space.ham, elim))
    leftover = free_names(ham) & set(sol.space.sys.v_names)
    if kernel or leftover:
        raise VelocityEliminationFailure(
            f"cannot express H in momenta; kernel velocities: {sorted(set(kernel) | leftover)}"
        )
    return ham
