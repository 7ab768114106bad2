"""Ladder reports and golden-file comparison.

The derive report is line-oriented ``key: value`` text, stable across runs:
one block per constraint generation listing its constraints, the unknowns it
determined, then the resolved field, the free unknowns and both projected
fields.  Golden sidecar files use the same vocabulary and are compared
semantically (probabilistic zero test of differences on the final
submanifold), never textually.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import MissingGolden
from .expressions import Expr, free_names, serialize, simplify
from .parsing import parse_expr
from .sampling import prob_is_zero
from .unified import (
    HamiltonianProjection,
    UnifiedSolution,
    project_to_hamiltonian,
    project_to_lagrangian,
)


def derive_report(sol: UnifiedSolution, hessian_rank: int) -> str:
    """Render the ladder, the resolved slots and both projections."""
    sys = sol.space.sys
    lines = []
    push = lines.append
    push(f"system: {sys.name}")
    push(f"n: {sys.n}")
    regular = hessian_rank == sys.n
    push(f"regular: {'true' if regular else 'false'}")
    push(f"hessian_rank: {hessian_rank}")
    push(f"generations: {len(sol.ladder.generations)}")
    for i, gen in enumerate(sol.ladder.generations, 1):
        push(f"generation: {i}")
        push(f"origin: {gen.origin}")
        for c in gen.constraints:
            push(f"constraint: {serialize(c)}")
        for name, value in gen.determined.items():
            push(f"determined {name}: {serialize(value)}")
    push(f"final: {'true' if sol.ladder.final else 'false'}")
    push(f"final_at: W{len(sol.ladder.generations)}")
    push("free_unknowns: " + (", ".join(sol.free_unknowns) if sol.free_unknowns else "none"))
    resolved = sol.resolved_field(reduce=True)
    for coord in sol.space.chart:
        push(f"field {coord}: {serialize(resolved[coord])}")
    xl = project_to_lagrangian(sol)
    for coord in sys.coords_velocity():
        push(f"xl {coord}: {serialize(xl[coord])}")
    hp = project_to_hamiltonian(sol)
    for coord in sys.coords_momentum():
        push(f"xh {coord}: {serialize(hp.field[coord])}")
    for c in hp.constraints:
        push(f"pf_constraint: {serialize(c)}")
    if hp.kernel_velocities:
        push("kernel_velocities: " + ", ".join(hp.kernel_velocities))
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict:
    """Parse a derive report (or golden file) back into keyed structures."""
    out = {
        "meta": {},
        "generations": [],
        "determined": {},
        "field": {},
        "xl": {},
        "xh": {},
        "pf_constraints": [],
        "free_unknowns": [],
        "notes": [],
    }
    current = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(":")
        key = key.strip()
        value = value.strip()
        if key == "generation":
            current = {"index": int(value), "origin": None, "constraints": []}
            out["generations"].append(current)
        elif key == "origin":
            if current is not None:
                current["origin"] = value
        elif key == "constraint":
            if current is None:
                raise ValueError("constraint line outside a generation block")
            current["constraints"].append(parse_expr(value))
        elif key.startswith("determined "):
            name = key.split(None, 1)[1]
            out["determined"][name] = parse_expr(value)
            if current is not None:
                current.setdefault("determined", {})[name] = out["determined"][name]
        elif key.startswith("field "):
            out["field"][key.split(None, 1)[1]] = parse_expr(value)
        elif key.startswith("xl "):
            out["xl"][key.split(None, 1)[1]] = parse_expr(value)
        elif key.startswith("xh "):
            out["xh"][key.split(None, 1)[1]] = parse_expr(value)
        elif key == "pf_constraint":
            out["pf_constraints"].append(parse_expr(value))
        elif key == "free_unknowns":
            out["free_unknowns"] = (
                [] if value == "none" else [v.strip() for v in value.split(",")]
            )
        elif key == "kernel_velocities":
            out["meta"]["kernel_velocities"] = [v.strip() for v in value.split(",")]
        elif key == "note":
            out["notes"].append(value)
        else:
            out["meta"][key] = value
    return out


@dataclass
class CheckItem:
    label: str
    ok: bool
    detail: str = ""


def golden_path_for(system_path: Path) -> Path:
    return system_path.with_suffix(".golden")


def load_golden(system_path: Path) -> dict:
    gp = golden_path_for(system_path)
    if not gp.exists():
        raise MissingGolden(f"no golden file next to {system_path.name} (looked for {gp.name})")
    return parse_report(gp.read_text(encoding="utf-8"))


def compare_to_golden(sol: UnifiedSolution, golden: dict, seed=None) -> list:
    """Semantic check of ladder, resolved slots and projections.

    Constraints are compared as plain expressions (zero test of the
    difference after the documented normalisation; comparing them on the
    final submanifold would be vacuous since every constraint vanishes
    there).  Field coefficients are compared modulo the final substitution
    chain: engine and golden values only need to agree on the final
    submanifold, so legitimate representative changes (p versus m*v on the
    graph of the fiber derivative) do not fail the comparison.
    """
    from .unified import normalize_constraint

    sys = sol.space.sys
    box = sys.domain
    chain = sol.chain
    items = []

    def same(a: Expr, b: Expr) -> bool:
        return prob_is_zero(simplify(chain.apply(a) - chain.apply(b)), box, seed=seed)

    def same_constraint(a: Expr, b: Expr) -> bool:
        if prob_is_zero(simplify(a - b), box, seed=seed):
            return True
        return prob_is_zero(
            simplify(
                normalize_constraint(a, box, seed=seed)
                - normalize_constraint(b, box, seed=seed)
            ),
            box,
            seed=seed,
        )

    gens = sol.ladder.generations
    golden_gens = golden["generations"]
    items.append(
        CheckItem(
            "generation count",
            len(gens) == len(golden_gens),
            f"engine {len(gens)}, golden {len(golden_gens)}",
        )
    )
    for ours, theirs in zip(gens, golden_gens):
        idx = theirs["index"]
        count_ok = len(ours.constraints) == len(theirs["constraints"])
        items.append(
            CheckItem(
                f"generation {idx} size",
                count_ok,
                f"engine {len(ours.constraints)}, golden {len(theirs['constraints'])}",
            )
        )
        for k, (a, b) in enumerate(zip(ours.constraints, theirs["constraints"]), 1):
            items.append(
                CheckItem(
                    f"generation {idx} constraint {k}",
                    same_constraint(a, b),
                    f"engine '{serialize(a)}', golden '{serialize(b)}'",
                )
            )
    items.append(
        CheckItem(
            "free unknowns",
            sorted(sol.free_unknowns) == sorted(golden["free_unknowns"]),
            f"engine {sol.free_unknowns}, golden {golden['free_unknowns']}",
        )
    )
    free = set(sol.free_unknowns)

    def comparable(e: Expr) -> bool:
        return not (free_names(e) & free)

    resolved = sol.resolved_field(reduce=True)
    for coord, expected in golden["field"].items():
        actual = resolved[coord]
        if not comparable(expected) or not comparable(actual):
            continue
        items.append(
            CheckItem(
                f"field {coord}",
                same(actual, expected),
                f"engine '{serialize(actual)}', golden '{serialize(expected)}'",
            )
        )
    if golden["xl"]:
        xl = project_to_lagrangian(sol)
        for coord, expected in golden["xl"].items():
            actual = xl[coord]
            if not comparable(expected) or not comparable(actual):
                continue
            items.append(
                CheckItem(
                    f"xl {coord}",
                    same(actual, expected),
                    f"engine '{serialize(actual)}', golden '{serialize(expected)}'",
                )
            )
    hp: HamiltonianProjection | None = None
    if golden["xh"] or golden["pf_constraints"]:
        hp = project_to_hamiltonian(sol)
    if golden["xh"]:
        for coord, expected in golden["xh"].items():
            actual = hp.field[coord]
            if not comparable(expected) or not comparable(actual):
                continue
            items.append(
                CheckItem(
                    f"xh {coord}",
                    same(actual, expected),
                    f"engine '{serialize(actual)}', golden '{serialize(expected)}'",
                )
            )
    if golden["pf_constraints"]:
        ours = hp.constraints
        theirs = golden["pf_constraints"]
        items.append(
            CheckItem(
                "pf count", len(ours) == len(theirs),
                f"engine {len(ours)}, golden {len(theirs)}",
            )
        )
        used = set()
        for b in theirs:
            hit = None
            for i, a in enumerate(ours):
                if i not in used and same_constraint(a, b):
                    hit = i
                    break
            if hit is None:
                items.append(
                    CheckItem(f"pf constraint '{serialize(b)}'", False, "no match")
                )
            else:
                used.add(hit)
                items.append(CheckItem(f"pf constraint '{serialize(b)}'", True))
    return items
