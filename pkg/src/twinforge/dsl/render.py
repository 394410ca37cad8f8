from __future__ import annotations

from decimal import Decimal

from .ast import (
    SCHEMAS,
    ArmBinding,
    ArmFor,
    ArmLiteral,
    ArmName,
    FunctionalPoint,
    Label,
    Program,
    Scalar,
    SkillCall,
    Together,
    canonical_kwargs,
)


def format_decimal(d: Decimal) -> str:
    if d == 0:
        return "0.0"
    text = format(d.normalize(), "f")
    return text if "." in text else text + ".0"


def render_value(v) -> str:
    if isinstance(v, Scalar):
        return format_decimal(v.value)
    if isinstance(v, Label):
        return v.name
    if isinstance(v, FunctionalPoint):
        return f"fp({v.obj}, {v.index})"
    raise TypeError(f"not a value: {v!r}")


def _arm(a) -> str:
    if isinstance(a, ArmLiteral):
        return a.side
    if isinstance(a, ArmName):
        return a.name
    raise TypeError(f"not an arm reference: {a!r}")


def render_call(call: SkillCall) -> str:
    parts = [_arm(call.arm)]
    if call.obj is not None:
        parts.append(call.obj)
    schema = SCHEMAS[call.skill]
    for k, v in canonical_kwargs(call.skill, call.kwargs):
        spec = schema.spec(k)
        if spec is not None and spec.kind == "index" and isinstance(v, Scalar) and v.value == v.value.to_integral_value():
            parts.append(f"{k}={int(v.value)}")
        else:
            parts.append(f"{k}={render_value(v)}")
    return f"{call.skill.value}({', '.join(parts)})"


def render_program(p: Program) -> str:
    """Canonical text for ``p``; parsing it gives back an equal program."""
    lines = [f"task {p.task_name}"]
    for stmt in p.statements:
        if isinstance(stmt, ArmBinding):
            sel = stmt.selector
            rhs = sel.side if isinstance(sel, ArmLiteral) else f"arm_for({sel.obj})"
            assert isinstance(sel, (ArmLiteral, ArmFor))
            lines.append(f"arm {stmt.name} = {rhs}")
        elif isinstance(stmt, Together):
            a = [render_call(c) for c in stmt.branch_a]
            b = [render_call(c) for c in stmt.branch_b]
            lines.append(f"together {{ {a[0]}")
            lines.extend(f"  {c}" for c in a[1:])
            lines.append(f"| {b[0]}")
            lines.extend(f"  {c}" for c in b[1:])
            lines.append("}")
        else:
            lines.append(render_call(stmt))
    return "\n".join(lines) + "\n"
