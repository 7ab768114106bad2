"""Contact-geometric objects attached to a dissipative Lagrangian.

The two canonical charts are velocity space (q, v, z) and momentum space
(q, p, z); the unified bundle chart (q, v, p, z) lives in
:mod:`contactsr.unified`.  Differential forms are stored as coefficient
arrays over a chart, and the exterior derivative / interior product are
implemented just for the one- and two-forms this formalism needs, not as a
general exterior-algebra engine.

Variable naming convention: a configuration variable ``theta`` has velocity
``vtheta`` and momentum ``ptheta``; a variable already written ``q2`` has
velocity ``v2`` and momentum ``p2``.  The fiber coordinate is always ``z``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ContactSRError, RankVariesOverDomain, SingularLagrangian
from .expressions import (
    Expr,
    ZERO,
    ONE,
    add,
    differentiate,
    evaluate,
    free_names,
    is_zero_literal,
    mul,
    num,
    simplify,
    substitute,
    sym,
)
from .linsolve import solve_linear
from .sampling import DomainBox, prob_is_zero

Z = "z"

#: Default sampling intervals for coordinates a system file may omit.
DEFAULT_VELOCITY_INTERVAL = (-2.0, 2.0)
DEFAULT_MOMENTUM_INTERVAL = (-2.0, 2.0)
DEFAULT_Z_INTERVAL = (-1.0, 1.0)

#: Number of domain samples used for the numeric Hessian rank.
HESSIAN_SAMPLES = 16


def velocity_name(q: str) -> str:
    return "v" + q[1:] if q.startswith("q") and q[1:] else "v" + q


def momentum_name(q: str) -> str:
    return "p" + q[1:] if q.startswith("q") and q[1:] else "p" + q


def unknown_name(q: str) -> str:
    """Name of the undetermined acceleration slot attached to ``q``."""
    return "F" + q[1:] if q.startswith("q") and q[1:] else "F" + q


@dataclass(frozen=True)
class LagrangianSystem:
    """A declared system: configuration names, L(q, v, z), parameters, box."""

    name: str
    q_names: tuple
    lagrangian: Expr
    params: Mapping[str, float]
    domain: DomainBox

    def __post_init__(self):
        if not self.q_names:
            raise ContactSRError("need at least one configuration variable")
        clash = set(self.q_names) & set(self.params)
        if clash:
            raise ContactSRError(f"names both variable and parameter: {sorted(clash)}")
        allowed = set(self.coords_unified()) | set(self.params)
        extra = free_names(self.lagrangian) - allowed
        if extra:
            raise ContactSRError(
                f"lagrangian references undeclared names: {sorted(extra)}"
            )
        reserved = {unknown_name(q) for q in self.q_names} | {"fz"}
        taken = reserved & (set(self.coords_unified()) | set(self.params))
        if taken:
            raise ContactSRError(f"reserved slot names in use: {sorted(taken)}")
        missing = self.domain.missing(self.coords_unified())
        if missing:
            raise ContactSRError(f"domain box misses coordinates: {missing}")

    @property
    def n(self) -> int:
        return len(self.q_names)

    @property
    def v_names(self) -> tuple:
        return tuple(velocity_name(q) for q in self.q_names)

    @property
    def p_names(self) -> tuple:
        return tuple(momentum_name(q) for q in self.q_names)

    def coords_velocity(self) -> tuple:
        """Chart on velocity phase space x R: (q, v, z)."""
        return self.q_names + self.v_names + (Z,)

    def coords_momentum(self) -> tuple:
        """Chart on momentum phase space x R: (q, p, z)."""
        return self.q_names + self.p_names + (Z,)

    def coords_unified(self) -> tuple:
        """Chart on the unified bundle: (q, v, p, z)."""
        return self.q_names + self.v_names + self.p_names + (Z,)

    def degenerate_q_names(self) -> tuple:
        """Configuration variables whose velocity is absent from L
        (multiplier-like directions)."""
        names = free_names(self.lagrangian)
        return tuple(
            q for q in self.q_names if velocity_name(q) not in names
        )


@dataclass(frozen=True)
class VectorField:
    """Coefficients of a vector field over an ordered coordinate chart."""

    chart: tuple
    coeffs: Mapping[str, Expr]

    def __post_init__(self):
        missing = [c for c in self.chart if c not in self.coeffs]
        if missing:
            raise ContactSRError(f"vector field misses coefficients: {missing}")
        if len(self.coeffs) != len(self.chart):
            extra = set(self.coeffs) - set(self.chart)
            raise ContactSRError(f"vector field has stray coefficients: {sorted(extra)}")

    def __getitem__(self, coord: str) -> Expr:
        return self.coeffs[coord]

    def apply(self, f: Expr) -> Expr:
        """Directional derivative X(f)."""
        out = ZERO
        for c in self.chart:
            x = self.coeffs[c]
            if is_zero_literal(x):
                continue
            d = differentiate(f, c)
            if is_zero_literal(d):
                continue
            out = add(out, mul(x, d))
        return simplify(out)

    def map_coeffs(self, fn) -> "VectorField":
        return VectorField(self.chart, {c: fn(e) for c, e in self.coeffs.items()})


@dataclass(frozen=True)
class OneForm:
    """Coefficients theta_a over a chart: theta = sum theta_a dx^a."""

    chart: tuple
    coeffs: Mapping[str, Expr]

    def __getitem__(self, coord: str) -> Expr:
        return self.coeffs.get(coord, ZERO)

    def contract(self, X: VectorField) -> Expr:
        """Interior product i(X)theta."""
        return simplify(add(*(mul(X[c], self[c]) for c in self.chart)))


@dataclass(frozen=True)
class TwoForm:
    """Antisymmetric coefficients over a chart, keyed by ordered pairs."""

    chart: tuple
    coeffs: Mapping[tuple, Expr]  # keys (a, b) with chart.index(a) < index(b)

    def component(self, a: str, b: str) -> Expr:
        if (a, b) in self.coeffs:
            return self.coeffs[(a, b)]
        if (b, a) in self.coeffs:
            return simplify(mul(num(-1), self.coeffs[(b, a)]))
        return ZERO

    def contract(self, X: VectorField) -> OneForm:
        """Interior product: (i(X)Omega)_b = sum_a X^a Omega_{ab}."""
        out = {}
        for b in self.chart:
            acc = ZERO
            for a in self.chart:
                if a == b:
                    continue
                w = self.component(a, b)
                if is_zero_literal(w):
                    continue
                acc = add(acc, mul(X[a], w))
            out[b] = simplify(acc)
        return OneForm(self.chart, out)


def exterior_derivative(theta: OneForm) -> TwoForm:
    """d(theta) with components d_a theta_b - d_b theta_a for a < b."""
    coeffs = {}
    chart = theta.chart
    for i, a in enumerate(chart):
        for b in chart[i + 1:]:
            w = simplify(
                add(differentiate(theta[b], a), mul(num(-1), differentiate(theta[a], b)))
            )
            if not is_zero_literal(w):
                coeffs[(a, b)] = w
    return TwoForm(chart, coeffs)


def differential(f: Expr, chart: tuple) -> OneForm:
    """df over a chart."""
    return OneForm(chart, {c: differentiate(f, c) for c in chart})


# ---------------------------------------------------------------------------
# Lagrangian-side objects


@dataclass(frozen=True)
class HessianData:
    """Velocity Hessian of L, its numeric rank and (when regular) its inverse."""

    matrix: tuple  # n x n tuple of tuples of Expr
    rank: int
    inverse: tuple | None  # None when singular

    @property
    def regular(self) -> bool:
        return self.inverse is not None


def hessian(sys: LagrangianSystem, seed: int | None = None) -> HessianData:
    """Hessian W_ij = d^2 L / dv_i dv_j with sampled numeric rank.

    The rank is required to be the same at every sample; a Lagrangian whose
    regularity type changes over the box is rejected.  The symbolic inverse is
    computed (and verified against the identity) only when the rank is full.
    """
    n = sys.n
    v = sys.v_names
    dL = [differentiate(sys.lagrangian, vi) for vi in v]
    W = [[simplify(differentiate(dL[i], v[j])) for j in range(n)] for i in range(n)]

    rng = random.Random(seed if seed is not None else 0)
    ranks = set()
    for _ in range(HESSIAN_SAMPLES):
        binding = sys.domain.sample(rng)
        mat = np.array([[evaluate(W[i][j], binding) for j in range(n)] for i in range(n)])
        ranks.add(int(np.linalg.matrix_rank(mat)))
    if len(ranks) != 1:
        raise RankVariesOverDomain(
            f"Hessian rank varies over the domain: observed {sorted(ranks)}"
        )
    rank = ranks.pop()

    inverse = None
    if rank == n:
        cols = []
        names = [f"_winv{i}" for i in range(n)]
        for j in range(n):
            eqs = [
                add(*(mul(W[i][k], sym(names[k])) for k in range(n)),
                    mul(num(-1), ONE if i == j else ZERO))
                for i in range(n)
            ]
            res = solve_linear(eqs, names, sys.domain, seed=seed)
            if res.free or res.residuals:
                raise SingularLagrangian("Hessian inversion failed unexpectedly")
            cols.append([res.solved[names[k]] for k in range(n)])
        inverse = tuple(tuple(cols[j][i] for j in range(n)) for i in range(n))
        for i in range(n):
            for k in range(n):
                check = add(
                    *(mul(inverse[i][j], W[j][k]) for j in range(n)),
                    mul(num(-1), ONE if i == k else ZERO),
                )
                if not prob_is_zero(check, sys.domain, seed=seed):
                    raise SingularLagrangian(
                        "Hessian inverse failed verification against the identity"
                    )
    return HessianData(tuple(tuple(row) for row in W), rank, inverse)


def lagrangian_energy(sys: LagrangianSystem) -> Expr:
    """E = sum_i v_i dL/dv_i - L (Liouville dilation minus L)."""
    parts = [mul(sym(vi), differentiate(sys.lagrangian, vi)) for vi in sys.v_names]
    return simplify(add(*parts, mul(num(-1), sys.lagrangian)))


def contact_lagrangian_form(sys: LagrangianSystem) -> OneForm:
    """eta_L = dz - (dL/dv_i) dq_i on the velocity chart."""
    chart = sys.coords_velocity()
    coeffs = {c: ZERO for c in chart}
    for q, v in zip(sys.q_names, sys.v_names):
        coeffs[q] = simplify(mul(num(-1), differentiate(sys.lagrangian, v)))
    coeffs[Z] = ONE
    return OneForm(chart, coeffs)


def reeb_lagrangian(sys: LagrangianSystem, hess: HessianData | None = None,
                    seed: int | None = None) -> VectorField:
    """Reeb field of (velocity chart, eta_L): d/dz - W^{ji} L_zv_j d/dv_i."""
    hess = hess or hessian(sys, seed=seed)
    if not hess.regular:
        raise SingularLagrangian("Reeb field needs an invertible velocity Hessian")
    n = sys.n
    crossed = [
        differentiate(differentiate(sys.lagrangian, sys.v_names[j]), Z)
        for j in range(n)
    ]
    coeffs = {c: ZERO for c in sys.coords_velocity()}
    for i in range(n):
        acc = ZERO
        for j in range(n):
            acc = add(acc, mul(num(-1), hess.inverse[j][i], crossed[j]))
        coeffs[sys.v_names[i]] = simplify(acc)
    coeffs[Z] = ONE
    return VectorField(sys.coords_velocity(), coeffs)


@dataclass(frozen=True)
class LegendreMap:
    """Fiber derivative (q, v, z) -> (q, p = dL/dv, z)."""

    sys: LagrangianSystem
    momenta: Mapping[str, Expr]  # momentum name -> expression in (q, v, z)

    def as_substitution(self) -> dict:
        return dict(self.momenta)

    def push_point(self, state: Mapping[str, float]) -> dict:
        """Image of a velocity-chart point in the momentum chart."""
        out = {q: float(state[q]) for q in self.sys.q_names}
        binding = dict(state)
        binding.update(self.sys.params)
        for p, e in self.momenta.items():
            out[p] = evaluate(e, binding)
        out[Z] = float(state[Z])
        return out


def legendre_map(sys: LagrangianSystem) -> LegendreMap:
    momenta = {
        momentum_name(q): simplify(differentiate(sys.lagrangian, velocity_name(q)))
        for q in sys.q_names
    }
    return LegendreMap(sys, momenta)


def canonical_contact_form(sys: LagrangianSystem) -> OneForm:
    """eta = dz - p_i dq_i on the momentum chart."""
    chart = sys.coords_momentum()
    coeffs = {c: ZERO for c in chart}
    for q, p in zip(sys.q_names, sys.p_names):
        coeffs[q] = mul(num(-1), sym(p))
    coeffs[Z] = ONE
    return OneForm(chart, coeffs)


def pullback_by_legendre(theta: OneForm, fl: LegendreMap) -> OneForm:
    """Pull a momentum-chart form back to the velocity chart through p = dL/dv.

    Valid for the semibasic forms used here: the map is the identity on q and
    z, so basis covectors pull back unchanged and only coefficients change.
    """
    sys = fl.sys
    chart = sys.coords_velocity()
    subs = fl.as_substitution()
    coeffs = {c: ZERO for c in chart}
    for c in (*sys.q_names, Z):
        coeffs[c] = simplify(substitute(theta[c], subs))
    return OneForm(chart, coeffs)


def contact_hamiltonian_field(
    H: Expr, q_names: Sequence[str], chart: tuple | None = None
) -> VectorField:
    """The unique solution X_H of i(X)d(eta) = dH - (R(H)) eta, i(X)eta = -H
    on the momentum chart, in Darboux coordinates:

        X_H = H_p d/dq - (H_q + p H_z) d/dp + (p H_p - H) d/dz
    """
    q_names = tuple(q_names)
    p_names = tuple(momentum_name(q) for q in q_names)
    chart = chart or q_names + p_names + (Z,)
    H_z = differentiate(H, Z)
    coeffs = {}
    z_coeff = mul(num(-1), H)
    for q, p in zip(q_names, p_names):
        H_p = differentiate(H, p)
        H_q = differentiate(H, q)
        coeffs[q] = H_p
        coeffs[p] = simplify(add(mul(num(-1), H_q), mul(num(-1), sym(p), H_z)))
        z_coeff = add(z_coeff, mul(sym(p), H_p))
    coeffs[Z] = simplify(z_coeff)
    return VectorField(chart, coeffs)


def euler_lagrange_field(
    sys: LagrangianSystem, hess: HessianData | None = None, seed: int | None = None
) -> VectorField:
    """Closed-form holonomic dynamics field for a regular L on (q, v, z):

        X = v d/dq + W^{ik}(L_qk - L_{qj vk} v_j - L L_{z vk} + L_z L_vk) d/dv
            + L d/dz
    """
    hess = hess or hessian(sys, seed=seed)
    if not hess.regular:
        raise SingularLagrangian("Euler-Lagrange field needs a regular Hessian")
    L = sys.lagrangian
    n = sys.n
    L_z = differentiate(L, Z)
    coeffs = {}
    rhs = []
    for k in range(n):
        vk = sys.v_names[k]
        L_vk = differentiate(L, vk)
        term = differentiate(L, sys.q_names[k])
        for j in range(n):
            term = add(
                term,
                mul(
                    num(-1),
                    differentiate(L_vk, sys.q_names[j]),
                    sym(sys.v_names[j]),
                ),
            )
        term = add(term, mul(num(-1), L, differentiate(L_vk, Z)))
        term = add(term, mul(L_z, L_vk))
        rhs.append(simplify(term))
    for i in range(n):
        acc = ZERO
        for k in range(n):
            acc = add(acc, mul(hess.inverse[i][k], rhs[k]))
        coeffs[sys.v_names[i]] = simplify(acc)
        coeffs[sys.q_names[i]] = sym(sys.v_names[i])
    coeffs[Z] = simplify(L)
    return VectorField(sys.coords_velocity(), coeffs)
