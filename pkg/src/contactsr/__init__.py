"""contactsr: symbolic-numeric engine for dissipative Lagrangian mechanics.

Given a (possibly singular) Lagrangian L(q, v, z) with a dissipation
variable z, the engine derives the dynamics on the combined
velocity-momentum bundle (q, v, p, z), runs the tangency-based constraint
algorithm to its final submanifold, projects the resolved field to the
velocity (Herglotz) and momentum (contact Hamiltonian) pictures, and
integrates and checks trajectories against the invariants of the formalism.
"""

from .errors import (
    CoefficientMatchFailure,
    ContactSRError,
    EvaluationError,
    ExprSyntaxError,
    InconsistentDynamics,
    InconsistentSystem,
    InitOffConstraint,
    IterationCapExceeded,
    MissingGolden,
    NonFiniteState,
    NonlinearInUnknowns,
    RankVariesOverDomain,
    ReductionFailure,
    SchemaError,
    SingularLagrangian,
    UnknownFunction,
    VelocityEliminationFailure,
)
from .expressions import (
    Expr,
    differentiate,
    evaluate,
    free_names,
    serialize,
    simplify,
    substitute,
    sym,
)
from .parsing import parse_expr
from .sampling import DomainBox, prob_equal, prob_is_zero
from .linsolve import SolveResult, solve_linear
from .geometry import (
    HessianData,
    LagrangianSystem,
    LegendreMap,
    OneForm,
    TwoForm,
    VectorField,
    canonical_contact_form,
    contact_hamiltonian_field,
    contact_lagrangian_form,
    euler_lagrange_field,
    exterior_derivative,
    hessian,
    lagrangian_energy,
    legendre_map,
    pullback_by_legendre,
    reeb_lagrangian,
)
from .unified import (
    AnsatzField,
    ConstraintLadder,
    UnifiedSolution,
    UnifiedSpace,
    build_unified,
    extract_primary_equations,
    hamiltonian_on_momentum_chart,
    normalize_constraint,
    project_to_hamiltonian,
    project_to_lagrangian,
    reeb_representative,
    run_constraint_algorithm,
    tangency_pass,
)
from .simulate import (
    InvariantReport,
    ReducedSystem,
    Trajectory,
    compare_formalisms,
    export_csv,
    integrate,
    reduce,
    verify,
)
from .systemfile import LoadedSystem, load_system, load_system_text

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
