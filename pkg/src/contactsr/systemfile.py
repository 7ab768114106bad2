"""Line-oriented system definition files.

The format is flat ``key = value`` lines; a value continues onto following
lines that start with whitespace (used by long Lagrangians).  ``#`` starts a
comment line.  Keys:

    name = pendulum                    (required)
    q = r, theta, lam                  (required, ordered)
    lagrangian = <expression>          (required; may span lines)
    param <name> = <number>            (one per parameter)
    domain <coord> = <lo>, <hi>        (required for configuration variables;
                                        optional for velocities, momenta, z)
    init <coord> = <number>            (optional initial values)
    gauge <unknown> = <expression>     (optional, e.g. gauge F2 = 0)

Velocities default to the interval [-2, 2], momenta to [-2, 2] and z to
[-1, 1] when their domains are omitted.  Velocity/momentum names derive from
the configuration names (theta -> vtheta/ptheta, q2 -> v2/p2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import SchemaError
from .expressions import Expr, free_names
from .geometry import (
    DEFAULT_MOMENTUM_INTERVAL,
    DEFAULT_VELOCITY_INTERVAL,
    DEFAULT_Z_INTERVAL,
    LagrangianSystem,
    Z,
    momentum_name,
    velocity_name,
)
from .parsing import parse_expr
from .sampling import DomainBox


@dataclass
class LoadedSystem:
    """A parsed system file: the system plus optional init and gauge data."""

    system: LagrangianSystem
    init: dict = field(default_factory=dict)
    gauge: dict = field(default_factory=dict)
    path: Path | None = None


def _parse_lines(text: str):
    """Yield (key, value) pairs with continuation lines folded in."""
    entries = []
    for raw in text.splitlines():
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        if raw[:1] in (" ", "\t"):
            if not entries:
                raise SchemaError("continuation line before any key")
            entries[-1][1].append(raw.strip())
            continue
        if "=" not in raw:
            raise SchemaError(f"expected 'key = value', got: {raw.strip()!r}")
        key, _, value = raw.partition("=")
        entries.append([key.strip(), [value.strip()]])
    return [(key, " ".join(parts).strip()) for key, parts in entries]


def _number(key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise SchemaError(f"{key}: expected a number, got {text!r}") from None


def _interval(key: str, text: str):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise SchemaError(f"{key}: expected 'lo, hi', got {text!r}")
    lo, hi = (_number(key, p) for p in parts)
    if not lo < hi:
        raise SchemaError(f"{key}: interval needs lo < hi, got [{lo}, {hi}]")
    return (lo, hi)


def load_system_text(text: str, path: Path | None = None) -> LoadedSystem:
    entries = _parse_lines(text)
    name = None
    q_names: tuple = ()
    lag_src = None
    params: dict = {}
    intervals: dict = {}
    init: dict = {}
    gauge_src: dict = {}

    for key, value in entries:
        if key == "name":
            name = value
        elif key == "q":
            q_names = tuple(p.strip() for p in value.split(",") if p.strip())
        elif key == "lagrangian":
            lag_src = value
        elif key.startswith("param "):
            params[key.split(None, 1)[1]] = _number(key, value)
        elif key.startswith("domain "):
            intervals[key.split(None, 1)[1]] = _interval(key, value)
        elif key.startswith("init "):
            init[key.split(None, 1)[1]] = _number(key, value)
        elif key.startswith("gauge "):
            gauge_src[key.split(None, 1)[1]] = value
        else:
            raise SchemaError(f"unknown key {key!r}")

    for required, label in ((name, "name"), (q_names, "q"), (lag_src, "lagrangian")):
        if not required:
            raise SchemaError(f"missing required key '{label}'")

    lagrangian = parse_expr(lag_src)
    gauge = {k: parse_expr(v) for k, v in gauge_src.items()}

    coords = list(q_names)
    coords += [velocity_name(q) for q in q_names]
    coords += [momentum_name(q) for q in q_names]
    coords.append(Z)
    missing_q = [q for q in q_names if q not in intervals]
    if missing_q:
        raise SchemaError(f"missing 'domain {missing_q[0]}' for configuration variable")
    box_intervals = dict(intervals)
    for q in q_names:
        box_intervals.setdefault(velocity_name(q), DEFAULT_VELOCITY_INTERVAL)
        box_intervals.setdefault(momentum_name(q), DEFAULT_MOMENTUM_INTERVAL)
    box_intervals.setdefault(Z, DEFAULT_Z_INTERVAL)
    stray = [c for c in box_intervals if c not in coords]
    if stray:
        raise SchemaError(f"domain given for undeclared coordinate {stray[0]!r}")

    system = LagrangianSystem(
        name=name,
        q_names=q_names,
        lagrangian=lagrangian,
        params=params,
        domain=DomainBox(box_intervals, dict(params)),
    )
    for coord in init:
        if coord not in coords:
            raise SchemaError(f"init given for undeclared coordinate {coord!r}")
    allowed_gauge_names = set(coords) | set(params)
    for unknown, expr in gauge.items():
        extra = free_names(expr) - allowed_gauge_names
        if extra:
            raise SchemaError(
                f"gauge {unknown} references undeclared names {sorted(extra)}"
            )
    return LoadedSystem(system, init, gauge, path)


def load_system(path) -> LoadedSystem:
    """Read and validate a system file."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"no such system file: {p}")
    return load_system_text(p.read_text(encoding="utf-8"), p)
