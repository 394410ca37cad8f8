"""Recursive-descent parser for skill programs."""

from __future__ import annotations

from decimal import Decimal

from .ast import (
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
    canonical_kwargs,
)
from .lexer import KEYWORDS, SKILL_WORDS, Token, tokenize

MAX_FRACTION_DIGITS = 6
VALUE_WORDS = ("world", "local", "align", "free")


class ParseError(Exception):
    """Syntax error with a 1-based position and the set of acceptable tokens."""

    def __init__(self, message: str, line: int, column: int, expected=()):
        self.message = message
        self.line = line
        self.column = column
        self.expected = frozenset(expected)
        super().__init__(f"line {line}, column {column}: {message}")


class _Parser:
    def __init__(self, source: str):
        self._tokens = tokenize(source)
        self._buf: list[Token] = []

    # token stream -------------------------------------------------------
    def peek(self, k: int = 0) -> Token:
        while len(self._buf) <= k:
            self._buf.append(next(self._tokens))
        return self._buf[k]

    def advance(self) -> Token:
        tok = self.peek()
        if tok.kind != "eof":
            self._buf.pop(0)
        return tok

    def fail(self, tok: Token, expected, what: str | None = None):
        exp = sorted(expected)
        msg = what or f"expected {' or '.join(exp)}, found {tok.describe()}"
        raise ParseError(msg, tok.line, tok.column, exp)

    def is_punct(self, text: str, k: int = 0) -> bool:
        tok = self.peek(k)
        return tok.kind == "punct" and tok.text == text

    def expect_punct(self, text: str) -> Token:
        tok = self.peek()
        if tok.kind != "punct" or tok.text != text:
            self.fail(tok, {repr(text)})
        return self.advance()

    def expect_word(self, word: str) -> Token:
        tok = self.peek()
        if tok.kind != "ident" or tok.text != word:
            self.fail(tok, {repr(word)})
        return self.advance()

    def expect_name(self, what: str) -> str:
        tok = self.peek()
        if tok.kind != "ident":
            self.fail(tok, {what})
        if tok.text in KEYWORDS:
            self.fail(tok, {what}, f"reserved word {tok.text!r} cannot be used as {what}")
        return self.advance().text

    def end_of_line(self):
        tok = self.peek()
        if tok.kind == "eof":
            return
        if tok.kind != "nl":
            self.fail(tok, {"newline"})
        self.advance()

    def skip_blank(self):
        while self.peek().kind == "nl":
            self.advance()

    # grammar ------------------------------------------------------------
    def program(self) -> Program:
        self.skip_blank()
        self.expect_word("task")
        name = self.expect_name("task name")
        self.end_of_line()
        statements = []
        while True:
            self.skip_blank()
            tok = self.peek()
            if tok.kind == "eof":
                break
            statements.append(self.statement())
        return Program(name, tuple(statements))

    def statement(self):
        tok = self.peek()
        if tok.kind == "ident":
            if tok.text == "arm":
                return self.binding()
            if tok.text == "together":
                return self.together()
            if tok.text in SKILL_WORDS:
                return self.call()
        self.fail(tok, {"'arm'", "'together'", "skill name"})

    def binding(self) -> ArmBinding:
        self.advance()
        name = self.expect_name("arm name")
        self.expect_punct("=")
        tok = self.peek()
        if tok.kind == "ident" and tok.text in ("left", "right"):
            self.advance()
            selector = ArmLiteral(tok.text)
        elif tok.kind == "ident" and tok.text == "arm_for":
            self.advance()
            self.expect_punct("(")
            selector = ArmFor(self.expect_name("object name"))
            self.expect_punct(")")
        else:
            self.fail(tok, {"'left'", "'right'", "'arm_for'"})
        self.end_of_line()
        return ArmBinding(name, selector)

    def together(self) -> Together:
        start = self.advance()
        self.expect_punct("{")
        self.skip_blank()
        branch_a = self.branch(("|",))
        self.expect_punct("|")
        self.skip_blank()
        branch_b = self.branch(("}",))
        self.expect_punct("}")
        self.end_of_line()
        if not branch_a or not branch_b:
            raise ParseError("together branches must not be empty", start.line, start.column, {"skill name"})
        return Together(tuple(branch_a), tuple(branch_b))

    def branch(self, closers) -> list[SkillCall]:
        calls = []
        while True:
            self.skip_blank()
            tok = self.peek()
            if tok.kind == "punct" and tok.text in closers:
                return calls
            if tok.kind == "ident" and tok.text in SKILL_WORDS:
                calls.append(self.call())
                continue
            self.fail(tok, {"skill name"} | {repr(c) for c in closers})

    def call(self) -> SkillCall:
        skill_tok = self.advance()
        skill = SkillKind.from_keyword(skill_tok.text)
        self.expect_punct("(")
        arm = self.armref()
        obj = None
        kwargs: list[tuple[str, object]] = []
        seen: set[str] = set()
        if self.is_punct(",") and self.peek(1).kind == "ident" and not self.is_punct("=", 2):
            self.advance()
            obj = self.expect_name("object name")
        while self.is_punct(","):
            self.advance()
            key_tok = self.peek()
            if key_tok.kind != "ident":
                self.fail(key_tok, {"argument name"})
            self.advance()
            if key_tok.text in seen:
                raise ParseError(f"duplicate argument {key_tok.text!r}", key_tok.line, key_tok.column, {"argument name"})
            seen.add(key_tok.text)
            self.expect_punct("=")
            kwargs.append((key_tok.text, self.value()))
        if not self.is_punct(")"):
            self.fail(self.peek(), {"','", "')'"})
        self.advance()
        self.end_of_line()
        return SkillCall(skill, arm, obj, canonical_kwargs(skill, kwargs))

    def armref(self):
        tok = self.peek()
        if tok.kind == "ident":
            if tok.text in ("left", "right"):
                self.advance()
                return ArmLiteral(tok.text)
            if tok.text not in KEYWORDS:
                self.advance()
                return ArmName(tok.text)
        self.fail(tok, {"'left'", "'right'", "arm name"})

    def value(self):
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return Scalar(_decimal(tok))
        if tok.kind == "ident":
            if tok.text in VALUE_WORDS:
                self.advance()
                return Label(tok.text)
            if tok.text == "fp":
                self.advance()
                self.expect_punct("(")
                obj = self.expect_name("object name")
                self.expect_punct(",")
                idx_tok = self.peek()
                if idx_tok.kind != "number" or not idx_tok.text.isdigit():
                    self.fail(idx_tok, {"nonnegative integer"})
                self.advance()
                self.expect_punct(")")
                return FunctionalPoint(obj, int(idx_tok.text))
        self.fail(tok, {"number", "'world'", "'local'", "'align'", "'free'", "'fp'"})


def _decimal(tok: Token) -> Decimal:
    text = tok.text
    if "." in text and len(text.split(".", 1)[1]) > MAX_FRACTION_DIGITS:
        raise ParseError(
            f"at most {MAX_FRACTION_DIGITS} fractional digits allowed", tok.line, tok.column, {"number"}
        )
    return Decimal(text)


def parse_program(source) -> Program:
    """Parse program text into a :class:`Program`; raises :class:`ParseError`."""
    if isinstance(source, (bytes, bytearray)):
        source = bytes(source).decode("utf-8", errors="replace")
    return _Parser(source).program()
