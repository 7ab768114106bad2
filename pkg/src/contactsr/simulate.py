"""Reduction to an explicit ODE, fixed-step RK4 integration, and invariant
monitoring.

Invariants are monitored, never enforced: the reduced flow is supposed to
preserve them on its own, and projecting states back onto the constraints
would mask derivation bugs.  Time derivatives needed by the monitors come
from second-order centered differences on the stored grid (second-order
one-sided stencils at the endpoints), so the finite-difference probe, not
the RK4 flow, limits the observable residuals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import (
    ContactSRError,
    InitOffConstraint,
    NonFiniteState,
    ReductionFailure,
    VelocityEliminationFailure,
)
from .expressions import (
    Expr,
    ZERO,
    differentiate,
    free_names,
    is_zero_literal,
    num,
    serialize,
    simplify,
    substitute,
    sym,
)
from .geometry import (
    LagrangianSystem,
    Z,
    contact_hamiltonian_field,
    legendre_map,
)
from .numeric import compile_scalar, compile_vectorized
from .sampling import DomainBox
from .unified import (
    UnifiedSolution,
    hamiltonian_on_momentum_chart,
    project_to_lagrangian,
)

#: |given - computed| tolerance when an initial state pins dependent coords.
INIT_CONSTRAINT_TOL = 1e-9

#: Residual thresholds applied by the run pipeline at dt = 1e-3.
RESIDUAL_THRESHOLDS = {
    "holonomy": 1e-4,
    "zdot": 1e-5,
    "herglotz": 1e-4,
    "constraint": 1e-9,
    "hdecay": None,  # 1e-5 * (1 + |H(0)|), filled per trajectory
}


@dataclass
class ReducedSystem:
    """Explicit first-order ODE on the coordinates the chain leaves free."""

    sys: LagrangianSystem
    independent: tuple  # coordinate names carrying the dynamics
    rhs: dict  # independent name -> Expr over independent + params
    back: dict  # dependent name -> Expr over independent + params
    gauge: dict  # free unknown name -> Expr chosen for it

    def __post_init__(self):
        allowed = set(self.independent) | set(self.sys.params)
        for name, e in self.rhs.items():
            extra = free_names(e) - allowed
            if extra:
                raise ReductionFailure(
                    f"rhs for {name} keeps non-independent names {sorted(extra)}"
                )
        for name, e in self.back.items():
            extra = free_names(e) - allowed
            if extra:
                raise ReductionFailure(
                    f"back-substitution for {name} keeps {sorted(extra)}"
                )

    def unified_coords(self) -> tuple:
        return self.sys.coords_unified()


def reduce(sol: UnifiedSolution, gauge: Mapping[str, Expr] | None = None) -> ReducedSystem:
    """Project the resolved field to an explicit ODE on independent coords.

    Free unknown slots take the supplied gauge expressions; any not covered
    defaults to the zero section.  Gauge expressions may only reference
    independent coordinates and parameters.
    """
    if not sol.ladder.final:
        raise ContactSRError("reduce needs a final ladder")
    sys = sol.space.sys
    gauge = dict(gauge or {})
    for name in sol.free_unknowns:
        gauge.setdefault(name, ZERO)
    unknown_subs = {name: gauge[name] for name in sol.free_unknowns}

    designated = set(sol.chain.designated())
    independent = tuple(c for c in sys.coords_unified() if c not in designated)
    rhs = {}
    for c in independent:
        e = sol.chain.apply(substitute(sol.field.slots[c], unknown_subs))
        rhs[c] = simplify(e)
    back = {e.var: e.rhs for e in sol.chain.entries}
    return ReducedSystem(sys, independent, rhs, back, gauge)


@dataclass
class Trajectory:
    """Uniform-grid trajectory carrying the full unified state per step."""

    times: np.ndarray
    coord_names: tuple
    states: np.ndarray  # shape (steps + 1, len(coord_names))
    independent: tuple
    residuals: dict = field(default_factory=dict)  # name -> per-step array

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ContactSRError("time grid and state array lengths differ")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ContactSRError("time grid must be strictly increasing")

    def column(self, name: str) -> np.ndarray:
        return self.states[:, self.coord_names.index(name)]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0


def _full_state(rs: ReducedSystem, init: Mapping[str, float]) -> dict:
    missing = [c for c in rs.independent if c not in init]
    if missing:
        raise ContactSRError(f"initial state misses independent coordinates {missing}")
    binding = {c: float(init[c]) for c in rs.independent}
    binding.update(rs.sys.params)
    from .expressions import evaluate

    full = {c: binding[c] for c in rs.independent}
    for name, e in rs.back.items():
        full[name] = evaluate(e, binding)
    return full


def integrate(
    rs: ReducedSystem,
    init: Mapping[str, float],
    t_final: float,
    dt: float,
) -> Trajectory:
    """Classical fixed-step RK4 on the independent coordinates.

    The initial state must supply every independent coordinate; values given
    for dependent coordinates are cross-checked against the substitution
    chain and rejected (:class:`InitOffConstraint`) when they disagree, with
    the offending constraint named.  The full unified state is rebuilt by
    back-substitution at every step.
    """
    if dt <= 0:
        raise ContactSRError("dt must be positive")
    full0 = _full_state(rs, init)
    for name, given in init.items():
        if name in rs.independent or name in rs.sys.params:
            continue
        if name not in full0:
            raise ContactSRError(f"unknown initial coordinate '{name}'")
        computed = full0[name]
        err = abs(float(given) - computed)
        if err > INIT_CONSTRAINT_TOL * (1.0 + abs(computed)):
            constraint = serialize(simplify(sym(name) - rs.back[name]))
            raise InitOffConstraint(constraint, err)

    names = list(rs.independent)
    params = [p for p in rs.sys.params]
    f = compile_scalar([rs.rhs[c] for c in names], names + params)
    pvals = [float(rs.sys.params[p]) for p in params]

    steps = max(0, int(round(t_final / dt)))
    y = np.array([full0[c] for c in names], dtype=float)
    ys = [y.copy()]

    def deriv(state):
        return np.array(f(*state, *pvals), dtype=float)

    # Overflow is reported through NonFiniteState, not a numpy warning.
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for _ in range(steps):
            k1 = deriv(y)
            k2 = deriv(y + 0.5 * dt * k1)
            k3 = deriv(y + 0.5 * dt * k2)
            k4 = deriv(y + dt * k3)
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(y)):
                raise NonFiniteState(
                    f"state left the finite range at step {len(ys)}"
                )
            ys.append(y.copy())

    times = np.arange(steps + 1, dtype=float) * dt
    coords = rs.unified_coords()
    indep_arr = np.array(ys)

    back_fns = compile_vectorized(
        [rs.back.get(c, sym(c)) for c in coords], names + params
    )
    cols = [indep_arr[:, i] for i in range(len(names))]
    pcols = [np.full(steps + 1, v) for v in pvals]
    full = np.column_stack(back_fns(*cols, *pcols))
    if not np.all(np.isfinite(full)):
        raise NonFiniteState("back-substituted state left the finite range")
    return Trajectory(times, coords, full, rs.independent)


# ---------------------------------------------------------------------------
# invariant monitoring


@dataclass
class ResidualStats:
    max_abs: float
    mean_abs: float


@dataclass
class InvariantReport:
    """Max/mean residuals for every invariant family along a trajectory."""

    entries: dict  # name -> ResidualStats
    hdecay_enabled: bool
    gamma: float | None
    h0: float | None

    def worst(self, prefix: str) -> float:
        vals = [s.max_abs for n, s in self.entries.items() if n.startswith(prefix)]
        return max(vals) if vals else 0.0

    def all_finite(self) -> bool:
        return all(
            np.isfinite(s.max_abs) and np.isfinite(s.mean_abs)
            for s in self.entries.values()
        )


def _fd_time_derivative(series: np.ndarray, dt: float) -> np.ndarray:
    if len(series) < 3:
        return np.zeros_like(series)
    return np.gradient(series, dt, edge_order=2)


def _stats(arr: np.ndarray) -> ResidualStats:
    a = np.abs(np.asarray(arr, dtype=float))
    return ResidualStats(float(a.max()), float(a.mean()))


def verify(traj: Trajectory, sys: LagrangianSystem, sol: UnifiedSolution) -> InvariantReport:
    """Residuals for holonomy, the action equation dz/dt = L, the dissipative
    Euler-Lagrange equations, constraint drift, and exponential decay of the
    Hamiltonian (the latter only when dH/dz is a constant).

    The per-step residual arrays are attached to ``traj.residuals`` so they
    can ride along in the CSV export.
    """
    if len(traj.times) == 0:
        raise ContactSRError("empty trajectory")
    coords = list(traj.coord_names)
    params = list(sys.params)
    cols = [traj.states[:, i] for i in range(len(coords))]
    pcols = [np.full(len(traj.times), float(sys.params[p])) for p in params]
    args = coords + params
    dt = traj.dt

    def columns(exprs):
        fn = compile_vectorized(exprs, args)
        return fn(*cols, *pcols)

    entries = {}
    L = sys.lagrangian

    # holonomy: d/dt q_i - v_i
    for q, v in zip(sys.q_names, sys.v_names):
        fd = _fd_time_derivative(traj.column(q), dt) if dt else np.zeros(1)
        res = fd - traj.column(v)
        traj.residuals[f"holonomy_{q}"] = res
        entries[f"holonomy_{q}"] = _stats(res)

    # action equation: d/dt z - L
    (l_vals,) = columns([L])
    fdz = _fd_time_derivative(traj.column(Z), dt) if dt else np.zeros(1)
    res = fdz - l_vals
    traj.residuals["zdot"] = res
    entries["zdot"] = _stats(res)

    # dissipative Euler-Lagrange: d/dt(dL/dv) - dL/dq - dL/dz * dL/dv
    L_z = differentiate(L, Z)
    for q, v in zip(sys.q_names, sys.v_names):
        L_v = differentiate(L, v)
        L_q = differentiate(L, q)
        pointwise = simplify(L_q + L_z * L_v)
        mom, rhs_vals = columns([L_v, pointwise])
        fd = _fd_time_derivative(mom, dt) if dt else np.zeros(1)
        res = fd - rhs_vals
        traj.residuals[f"herglotz_{q}"] = res
        entries[f"herglotz_{q}"] = _stats(res)

    # constraint drift along the stored (back-substituted) states
    for i, c in enumerate(sol.final_constraints()):
        (vals,) = columns([c])
        name = f"constraint_{i + 1}"
        traj.residuals[name] = vals
        entries[name] = _stats(vals)

    # Hamiltonian decay H(t) = H(0) exp(-gamma t), when dH/dz is constant
    h_z = simplify(differentiate(sol.space.ham, Z))
    decay_names = free_names(h_z)
    hdecay_enabled = decay_names <= set(sys.params)
    gamma = None
    h0 = None
    if hdecay_enabled:
        from .expressions import evaluate

        gamma = evaluate(h_z, dict(sys.params))
        (h_vals,) = columns([sol.space.ham])
        h0 = float(h_vals[0])
        res = h_vals - h0 * np.exp(-gamma * traj.times)
        traj.residuals["hdecay"] = res
        entries["hdecay"] = _stats(res)

    report = InvariantReport(entries, hdecay_enabled, gamma, h0)
    if not report.all_finite():
        raise NonFiniteState("invariant residuals are not finite")
    return report


def thresholds_for(report: InvariantReport) -> dict:
    """Documented residual thresholds, with the decay bound scaled by H(0)."""
    out = dict(RESIDUAL_THRESHOLDS)
    if report.hdecay_enabled and report.h0 is not None:
        out["hdecay"] = 1e-5 * (1.0 + abs(report.h0))
    else:
        out.pop("hdecay")
    return out


def report_violations(report: InvariantReport) -> list:
    """(family, max residual, threshold) triples exceeding their bound."""
    bounds = thresholds_for(report)
    out = []
    for family, bound in bounds.items():
        if bound is None:
            continue
        worst = report.worst(family)
        if worst > bound:
            out.append((family, worst, bound))
    return out


def export_csv(traj: Trajectory, path) -> None:
    """One row per step: t, unified coordinates, then residual columns."""
    names = ["t", *traj.coord_names, *traj.residuals.keys()]
    columns = [traj.times, *(traj.column(c) for c in traj.coord_names),
               *traj.residuals.values()]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(", ".join(names) + "\n")
        for row in zip(*columns):
            fh.write(", ".join(f"{v:.17g}" for v in row) + "\n")


# ---------------------------------------------------------------------------
# two-sided comparison


def compare_formalisms(
    sys: LagrangianSystem,
    sol: UnifiedSolution,
    init: Mapping[str, float],
    t_final: float,
    dt: float,
) -> float:
    """Integrate the dynamics separately on the two classical sides and
    report the largest distance between the fiber-derivative image of the
    velocity-side state and the momentum-side state over the grid.

    Requires a regular system (both sides carry unique fields); singular
    systems raise :class:`VelocityEliminationFailure` through the momentum
    side and should be compared through unified trajectories instead.
    """
    rs = reduce(sol)
    lag_traj = integrate(rs, init, t_final, dt)

    H = hamiltonian_on_momentum_chart(sol)
    xh = contact_hamiltonian_field(H, sys.q_names)
    ham_chart = list(sys.coords_momentum())
    params = list(sys.params)
    f = compile_scalar([xh[c] for c in ham_chart], ham_chart + params)
    pvals = [float(sys.params[p]) for p in params]

    fl = legendre_map(sys)
    start = {c: float(lag_traj.column(c)[0]) for c in sys.coords_velocity()}
    point = fl.push_point(start)
    y = np.array([point[c] for c in ham_chart], dtype=float)

    steps = len(lag_traj.times) - 1

    def deriv(state):
        return np.array(f(*state, *pvals), dtype=float)

    momenta_exprs = [fl.momenta[p] for p in sys.p_names]
    push = compile_vectorized(momenta_exprs, list(sys.coords_velocity()) + params)

    divergence = 0.0
    lag_cols = [lag_traj.column(c) for c in sys.coords_velocity()]
    lag_pcols = [np.full(len(lag_traj.times), v) for v in pvals]
    pushed = push(*lag_cols, *lag_pcols)

    for k in range(steps + 1):
        image = np.array(
            [lag_traj.column(q)[k] for q in sys.q_names]
            + [pushed[i][k] for i in range(sys.n)]
            + [lag_traj.column(Z)[k]]
        )
        divergence = max(divergence, float(np.max(np.abs(image - y))))
        if k < steps:
            k1 = deriv(y)
            k2 = deriv(y + 0.5 * dt * k1)
            k3 = deriv(y + 0.5 * dt * k2)
            k4 = deriv(y + dt * k3)
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(y)):
                raise NonFiniteState("momentum-side state left the finite range")
    return divergence
