"""The skill-program language: AST, parser, canonical renderer, validator."""

from .ast import (
    ARM_SIDES,
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
from .lexer import Token, count_lexer_tokens, tokenize
from .parser import ParseError, parse_program
from .render import format_decimal, render_call, render_program, render_value
from .validate import ValidationIssue, validate_program


def describe_api() -> list[str]:
    """One signature line per skill, in the form a code agent is shown."""
    lines = []
    for kind, schema in SCHEMAS.items():
        parts = ["arm"]
        if schema.takes_object:
            parts.append("obj")
        for a in schema.args:
            if a.kind == "fp":
                parts.append(f"{a.name}=fp(object, index)")
            elif a.choices:
                parts.append(f"{a.name}={'|'.join(a.choices)}" + ("" if a.required else f" (default {a.default})"))
            else:
                parts.append(f"{a.name}=<{a.kind}>" + ("" if a.required else f" (default {a.default})"))
        lines.append(f"{kind.value}({', '.join(parts)})")
    return lines


__all__ = [
    "ARM_SIDES", "SCHEMAS", "ArmBinding", "ArmFor", "ArmLiteral", "ArmName", "FunctionalPoint",
    "Label", "ParseError", "Program", "Scalar", "SkillCall", "SkillKind", "Together", "Token",
    "ValidationIssue", "count_lexer_tokens", "describe_api", "format_decimal", "parse_program",
    "render_call", "render_program", "render_value", "tokenize", "validate_program",
]
