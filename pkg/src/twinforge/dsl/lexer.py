"""Tokenizer for the skill-program language. Lexing never fails."""

from __future__ import annotations

import re
from dataclasses import dataclass

KEYWORDS = frozenset({
    "task", "arm", "together", "arm_for", "fp",
    "left", "right", "world", "local", "align", "free",
    "grasp", "place", "move_by", "open", "close", "home",
})
SKILL_WORDS = frozenset({"grasp", "place", "move_by", "open", "close", "home"})

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r\f\v]+)"
    r"|(?P<comment>\#[^\n]*)"
    r"|(?P<nl>\n)"
    r"|(?P<number>-?[0-9]+(?:\.[0-9]+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<punct>[(),={}|])"
    r"|(?P<error>.)",
    re.DOTALL,
)
# a match of group 1 is a token we count; skipped text matches group 2
_COUNT_RE = re.compile(
    r"(-?[0-9]+(?:\.[0-9]+)?|[A-Za-z_][A-Za-z0-9_]*|[^ \t\r\f\v\n#])|([ \t\r\f\v\n]+|\#[^\n]*)"
)

SKIPPED = ("ws", "comment")


@dataclass(frozen=True, slots=True)
class Token:
    kind: str  # ident | number | punct | nl | error | eof
    text: str
    line: int
    column: int

    def describe(self) -> str:
        if self.kind == "eof":
            return "end of input"
        if self.kind == "nl":
            return "newline"
        return repr(self.text)


def tokenize(source: str):
    """Yield tokens lazily (so a parser can stop at the first error)."""
    line = 1
    line_start = 0
    for m in _TOKEN_RE.finditer(source):
        kind = m.lastgroup
        if kind in SKIPPED:
            continue
        start = m.start()
        yield Token(kind, m.group(), line, start - line_start + 1)
        if kind == "nl":
            line += 1
            line_start = start + 1
    yield Token("eof", "", line, len(source) - line_start + 1)


def count_lexer_tokens(source: str) -> int:
    """Number of lexical tokens, ignoring whitespace, newlines and comments.

    Every character the lexer does not recognise counts as one error token.
    """
    n = 0
    for tok, _ in _COUNT_RE.findall(source):
        if tok:
            n += 1
    return n
