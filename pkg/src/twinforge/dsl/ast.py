"""AST node types for skill programs.

Nodes are frozen dataclasses holding tuples, so programs are hashable and
compare structurally; keyword arguments are stored in schema order so that
two programs differing only in argument order are the same program.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from decimal import Decimal
from typing import Union


class SkillKind(enum.Enum):
    GRASP = "grasp"
    PLACE = "place"
    MOVE_BY = "move_by"
    OPEN_GRIPPER = "open"
    CLOSE_GRIPPER = "close"
    BACK_TO_ORIGIN = "home"

    @classmethod
    def from_keyword(cls, word: str) -> "SkillKind":
        return _BY_KEYWORD[word]


_BY_KEYWORD = {k.value: k for k in SkillKind}

ARM_SIDES = ("left", "right")
LABELS = ("world", "local", "align", "free")


@dataclass(frozen=True)
class ArmLiteral:
    side: str


@dataclass(frozen=True)
class ArmFor:
    """Left arm if the object's world x is negative, otherwise the right arm."""

    obj: str


@dataclass(frozen=True)
class ArmName:
    """Reference to an arm declared by an earlier ``arm`` binding."""

    name: str


@dataclass(frozen=True)
class Scalar:
    value: Decimal

    def __float__(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class Label:
    name: str


@dataclass(frozen=True)
class FunctionalPoint:
    obj: str
    index: int


Value = Union[Scalar, Label, FunctionalPoint]
ArmRef = Union[ArmLiteral, ArmName]


@dataclass(frozen=True)
class ArmBinding:
    name: str
    selector: Union[ArmLiteral, ArmFor]


@dataclass(frozen=True)
class SkillCall:
    skill: SkillKind
    arm: ArmRef
    obj: str | None = None
    kwargs: tuple[tuple[str, Value], ...] = ()

    def kwarg(self, name: str, default=None):
        for k, v in self.kwargs:
            if k == name:
                return v
        return default


@dataclass(frozen=True)
class Together:
    branch_a: tuple[SkillCall, ...]
    branch_b: tuple[SkillCall, ...]


Statement = Union[ArmBinding, SkillCall, Together]


@dataclass(frozen=True)
class Program:
    task_name: str
    statements: tuple[Statement, ...] = ()

    @property
    def is_stub(self) -> bool:
        return not self.statements

    def referenced_objects(self) -> set[str]:
        names: set[str] = set()
        for stmt in self.statements:
            if isinstance(stmt, ArmBinding):
                if isinstance(stmt.selector, ArmFor):
                    names.add(stmt.selector.obj)
                continue
            calls = stmt.branch_a + stmt.branch_b if isinstance(stmt, Together) else (stmt,)
            for call in calls:
                if call.obj is not None:
                    names.add(call.obj)
                for _, v in call.kwargs:
                    if isinstance(v, FunctionalPoint):
                        names.add(v.obj)
        return names


@dataclass(frozen=True)
class ArgSpec:
    name: str
    kind: str  # "decimal" | "index" | "fp" | one of the label groups
    required: bool
    default: object = None
    choices: tuple[str, ...] = ()


@dataclass(frozen=True)
class SkillSchema:
    takes_object: bool
    args: tuple[ArgSpec, ...]

    def order(self) -> dict[str, int]:
        return {a.name: i for i, a in enumerate(self.args)}

    def spec(self, name: str) -> ArgSpec | None:
        for a in self.args:
            if a.name == name:
                return a
        return None


SCHEMAS: dict[SkillKind, SkillSchema] = {
    SkillKind.GRASP: SkillSchema(True, (
        ArgSpec("pre", "decimal", False, Decimal("0.1")),
        ArgSpec("depth", "decimal", False, Decimal("0")),
    )),
    SkillKind.PLACE: SkillSchema(True, (
        ArgSpec("target", "fp", True),
        ArgSpec("fp", "index", False, 0),
        ArgSpec("pre", "decimal", False, Decimal("0.1")),
        ArgSpec("constrain", "label", False, "free", ("align", "free")),
    )),
    SkillKind.MOVE_BY: SkillSchema(False, (
        ArgSpec("dx", "decimal", False, Decimal("0")),
        ArgSpec("dy", "decimal", False, Decimal("0")),
        ArgSpec("dz", "decimal", False, Decimal("0")),
        ArgSpec("frame", "label", False, "world", ("world", "local")),
    )),
    SkillKind.OPEN_GRIPPER: SkillSchema(False, ()),
    SkillKind.CLOSE_GRIPPER: SkillSchema(False, ()),
    SkillKind.BACK_TO_ORIGIN: SkillSchema(False, ()),
}


def canonical_kwargs(skill: SkillKind, kwargs) -> tuple[tuple[str, Value], ...]:
    """Sort keyword arguments into schema order; unknown names go last, by name."""
    order = SCHEMAS[skill].order()
    return tuple(sorted(kwargs, key=lambda kv: (order.get(kv[0], len(order)), kv[0])))
