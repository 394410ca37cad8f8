"""Static checks that catch programs the simulator could never execute."""

from __future__ import annotations

import math
from dataclasses import dataclass

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
    SkillKind,
    Together,
)


@dataclass(frozen=True)
class ValidationIssue:
    kind: str  # UnknownObject | UnknownArm | SchemaViolation | ArmConflict | MixedBranchArms | ExceedsReach
    detail: str
    statement: int

    def __str__(self) -> str:
        return f"statement {self.statement}: {self.kind}: {self.detail}"


def _arm_key(arm, bindings: dict[str, object]):
    """Static identity of an arm reference: 'left'/'right' when known, else the binding name."""
    if isinstance(arm, ArmLiteral):
        return arm.side
    sel = bindings.get(arm.name)
    if isinstance(sel, ArmLiteral):
        return sel.side
    return f"@{arm.name}"


def _check_call(call: SkillCall, idx: int, scene_objects, bindings, embodiment, out: list):
    if isinstance(call.arm, ArmName) and call.arm.name not in bindings:
        out.append(ValidationIssue("UnknownArm", call.arm.name, idx))
    schema = SCHEMAS[call.skill]
    name = call.skill.value
    if schema.takes_object:
        if call.obj is None:
            out.append(ValidationIssue("SchemaViolation", f"{name} requires an object", idx))
        elif call.obj not in scene_objects:
            out.append(ValidationIssue("UnknownObject", call.obj, idx))
    elif call.obj is not None:
        out.append(ValidationIssue("SchemaViolation", f"{name} takes no object", idx))
    given = {k for k, _ in call.kwargs}
    for spec in schema.args:
        if spec.required and spec.name not in given:
            out.append(ValidationIssue("SchemaViolation", f"{name} requires {spec.name}=", idx))
    for key, value in call.kwargs:
        spec = schema.spec(key)
        if spec is None:
            out.append(ValidationIssue("SchemaViolation", f"{name} has no argument {key!r}", idx))
            continue
        ok = True
        if spec.kind == "decimal":
            ok = isinstance(value, Scalar)
            if ok and key in ("pre", "depth") and value.value < 0:
                out.append(ValidationIssue("SchemaViolation", f"{name} {key} must be nonnegative", idx))
        elif spec.kind == "index":
            ok = isinstance(value, Scalar) and value.value >= 0 and value.value == value.value.to_integral_value()
        elif spec.kind == "fp":
            ok = isinstance(value, FunctionalPoint)
            if ok and value.obj not in scene_objects:
                out.append(ValidationIssue("UnknownObject", value.obj, idx))
        elif spec.kind == "label":
            ok = isinstance(value, Label) and value.name in spec.choices
        if not ok:
            out.append(ValidationIssue("SchemaViolation", f"{name} {key}= has an invalid value", idx))
    if call.skill is SkillKind.MOVE_BY and embodiment is not None:
        d = [float(call.kwarg(k, Scalar(0)).value) if isinstance(call.kwarg(k), Scalar) else 0.0
             for k in ("dx", "dy", "dz")]
        if math.sqrt(sum(c * c for c in d)) > 2 * embodiment.reach_radius:
            out.append(ValidationIssue("ExceedsReach", "displacement longer than the arm's reach diameter", idx))


def validate_program(p: Program, scene_objects, embodiment=None) -> list[ValidationIssue]:
    """Return every statically detectable problem; empty means executable."""
    scene_objects = set(scene_objects)
    issues: list[ValidationIssue] = []
    bindings: dict[str, object] = {}
    for idx, stmt in enumerate(p.statements):
        if isinstance(stmt, ArmBinding):
            if isinstance(stmt.selector, ArmFor) and stmt.selector.obj not in scene_objects:
                issues.append(ValidationIssue("UnknownObject", stmt.selector.obj, idx))
            bindings[stmt.name] = stmt.selector
        elif isinstance(stmt, Together):
            keys = []
            for branch in (stmt.branch_a, stmt.branch_b):
                for call in branch:
                    _check_call(call, idx, scene_objects, bindings, embodiment, issues)
                arms = {_arm_key(c.arm, bindings) for c in branch}
                if len(arms) > 1:
                    issues.append(ValidationIssue("MixedBranchArms", "a together branch must drive one arm", idx))
                keys.append(arms)
            if keys[0] & keys[1]:
                issues.append(ValidationIssue("ArmConflict", "both together branches use the same arm", idx))
        else:
            _check_call(stmt, idx, scene_objects, bindings, embodiment, issues)
    return issues
