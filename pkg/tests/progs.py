"""Random program builders shared by the DSL property tests and the acceptance suite."""

from __future__ import annotations

import random
from decimal import Decimal

from hypothesis import strategies as st

from twinforge.dsl import (
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
from twinforge.dsl.ast import canonical_kwargs
from twinforge.dsl.lexer import KEYWORDS

NAME_CHARS = "abcdefghijklmnopqrstuvwxyz_0123456789"


def _name(rng: random.Random) -> str:
    while True:
        head = rng.choice("abcdefghijklmnopqrstuvwxyz_")
        word = head + "".join(rng.choice(NAME_CHARS) for _ in range(rng.randint(0, 8)))
        if word not in KEYWORDS:
            return word


def _decimal(rng: random.Random) -> Decimal:
    digits = rng.randint(0, 6)
    units = rng.randint(-10**7, 10**7)
    return Decimal(units).scaleb(-digits)


def _value(rng: random.Random, kind: str, choices) -> object:
    if kind == "fp":
        return FunctionalPoint(_name(rng), rng.randint(0, 99))
    if kind == "index":
        return Scalar(Decimal(rng.randint(0, 9)))
    if choices:
        return Label(rng.choice(choices))
    return Scalar(_decimal(rng))


def random_call(rng: random.Random, arms: list[str]) -> SkillCall:
    skill = rng.choice(list(SkillKind))
    schema = SCHEMAS[skill]
    arm = ArmLiteral(rng.choice(("left", "right"))) if not arms or rng.random() < 0.5 else ArmName(rng.choice(arms))
    obj = _name(rng) if schema.takes_object else None
    kwargs = [(a.name, _value(rng, a.kind, a.choices)) for a in schema.args if a.required or rng.random() < 0.5]
    return SkillCall(skill, arm, obj, canonical_kwargs(skill, kwargs))


def random_program(rng: random.Random, max_statements: int = 12) -> Program:
    arms: list[str] = []
    stmts = []
    for _ in range(rng.randint(0, max_statements)):
        r = rng.random()
        if r < 0.2:
            name = _name(rng)
            sel = ArmLiteral(rng.choice(("left", "right"))) if rng.random() < 0.5 else ArmFor(_name(rng))
            stmts.append(ArmBinding(name, sel))
            arms.append(name)
        elif r < 0.35:
            stmts.append(Together(tuple(random_call(rng, arms) for _ in range(rng.randint(1, 3))),
                                  tuple(random_call(rng, arms) for _ in range(rng.randint(1, 3)))))
        else:
            stmts.append(random_call(rng, arms))
    return Program(_name(rng), tuple(stmts))


@st.composite
def programs(draw, max_statements: int = 8) -> Program:
    seed = draw(st.integers(0, 2**63 - 1))
    return random_program(random.Random(seed), max_statements)


ALPHABET = list("taskrmgpl_ofvedbywcinh(){}|=,.#-0123456789 \t\n") + ["task ", "grasp(", "together {", "fp(",
                                                                       "arm ", "left", "right", "\n| "]


def noise(rng: random.Random, limit: int = 1024) -> str:
    """Mostly-grammatical garbage up to ``limit`` bytes."""
    parts, size = [], rng.randint(0, limit)
    while sum(len(p) for p in parts) < size:
        parts.append(rng.choice(ALPHABET) if rng.random() < 0.9 else chr(rng.randint(0, 0x2FF)))
    return "".join(parts).encode("utf-8")[:limit].decode("utf-8", errors="ignore")
