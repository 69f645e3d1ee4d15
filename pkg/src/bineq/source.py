"""Source equivalence: token-level for Java, byte-level for everything else."""

from __future__ import annotations

import codecs
import os
import re
from dataclasses import dataclass, field
from typing import NamedTuple

from .archive import read_archive
from .errors import LexError

KEYWORDS = frozenset("""
abstract assert boolean break byte case catch char class const continue default do
double else enum extends final finally float for goto if implements import instanceof
int interface long native new package private protected public return short static
strictfp super switch synchronized this throw throws transient try void volatile while
true false null
""".split())

SEPARATORS = frozenset(["(", ")", "{", "}", "[", "]", ";", ",", ".", "...", "@", "::"])

_OPERATORS = sorted("""
>>>= <<= >>= >>> ... -> :: ++ -- && || == != <= >= += -= *= /= &= |= ^= %= << >>
= > < ! ~ ? : + - * / & | ^ % ( ) { } [ ] ; , . @
""".split(), key=len, reverse=True)

_TOKEN = re.compile("|".join([
    r"(?P<ws>[ \t\f\r\n\x1a]+)",
    r"(?P<line>//[^\r\n]*)",
    r"(?P<block>/\*.*?\*/)",
    r"(?P<unterminated>/\*)",
    r'(?P<text>"""[ \t\f]*\r?\n(?:[^"\\]|\\.|"(?!""))*""")',
    r'(?P<str>"(?:[^"\\\r\n]|\\.)*")',
    r"(?P<chr>'(?:[^'\\\r\n]|\\.)+')",
    r"(?P<num>0[xX][0-9a-fA-F_]*(?:\.[0-9a-fA-F_]*)?(?:[pP][+-]?[0-9_]+)?[lLfFdD]?"
    r"|0[bB][01_]+[lL]?"
    r"|(?:[0-9][0-9_]*(?:\.[0-9_]*)?|\.[0-9][0-9_]*)(?:[eE][+-]?[0-9_]+)?[lLfFdD]?)",
    r"(?P<id>(?:[^\W\d]|\$)(?:\w|\$)*)",
    "(?P<op>" + "|".join(re.escape(o) for o in _OPERATORS) + ")",
]), re.DOTALL)


class Token(NamedTuple):
    kind: str  # identifier | keyword | literal | operator | separator
    lexeme: str
    line: int


def tokenize_java(text: str) -> list[Token]:
    """Split Java source into tokens, dropping comments and whitespace."""
    out: list[Token] = []
    pos, line, n = 0, 1, len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None:
            rest = text[pos:pos + 3]
            if rest.startswith('"') or rest.startswith("'"):
                raise LexError(f"line {line}: unterminated literal")
            if rest.startswith("\\u"):  # unicode escape outside a literal
                out.append(Token("operator", text[pos:pos + 6], line))
                pos += 6
                continue
            raise LexError(f"line {line}: unexpected character {text[pos]!r}")
        kind, lexeme = m.lastgroup, m.group()
        if kind == "unterminated":
            raise LexError(f"line {line}: unterminated comment")
        if kind in ("str", "chr", "text", "num"):
            out.append(Token("literal", lexeme, line))
        elif kind == "id":
            out.append(Token("keyword" if lexeme in KEYWORDS else "identifier", lexeme, line))
        elif kind == "op":
            out.append(Token("separator" if lexeme in SEPARATORS else "operator", lexeme, line))
        line += lexeme.count("\n")
        pos = m.end()
    return out


_GENERATED_NAMES = (
    ("Generated",),
    ("javax", ".", "annotation", ".", "Generated"),
    ("jakarta", ".", "annotation", ".", "Generated"),
)


def _generated_span(tokens: list[Token], i: int) -> int:
    """End index of a Generated annotation starting at ``i``, or ``i``."""
    if tokens[i].lexeme != "@":
        return i
    for name in _GENERATED_NAMES:
        j = i + 1 + len(name)
        if tuple(t.lexeme for t in tokens[i + 1:j]) != name:
            continue
        if j < len(tokens) and tokens[j].lexeme == ".":
            continue  # a longer qualified name
        if j < len(tokens) and tokens[j].lexeme == "(":
            depth = 0
            for k in range(j, len(tokens)):
                if tokens[k].lexeme == "(":
                    depth += 1
                elif tokens[k].lexeme == ")":
                    depth -= 1
                    if depth == 0:
                        return k + 1
            return i  # unbalanced; leave it alone
        return j
    return i


def strip_generated(tokens: list[Token]) -> list[Token]:
    """Drop ``@Generated`` annotations (bare or qualified) and their arguments."""
    out, i = [], 0
    while i < len(tokens):
        j = _generated_span(tokens, i)
        if j > i:
            i = j
            continue
        out.append(tokens[i])
        i += 1
    return out


def decode_source(data: bytes) -> str:
    """UTF-8 with the BOM removed, falling back to Latin-1."""
    if data.startswith(codecs.BOM_UTF8):
        data = data[len(codecs.BOM_UTF8):]
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        return data.decode("latin-1")


def language_of(path: str) -> str:
    return "java" if path.lower().endswith(".java") else "other"


@dataclass(frozen=True)
class SourceFile:
    path: str
    data: bytes

    @property
    def language(self) -> str:
        return language_of(self.path)


@dataclass(frozen=True)
class SourceVerdict:
    equivalent: bool
    provenance: dict | None = None
    warning: str | None = None

    def to_json(self) -> dict:
        out: dict = {"equivalent": self.equivalent}
        if self.provenance is not None:
            out["provenance"] = self.provenance
        if self.warning is not None:
            out["warning"] = self.warning
        return out


def _byte_verdict(a: bytes, b: bytes, warning: str | None = None) -> SourceVerdict:
    if a == b:
        return SourceVerdict(True, None, warning)
    k = next((i for i, (x, y) in enumerate(zip(a, b)) if x != y), min(len(a), len(b)))
    return SourceVerdict(False, {"byte_offset": k}, warning)


def source_equiv(f1: SourceFile, f2: SourceFile) -> SourceVerdict:
    """Compare two source files; Java by tokens, anything else by bytes."""
    if f1.language != "java" or f2.language != "java":
        return _byte_verdict(f1.data, f2.data)
    if f1.data == f2.data:
        return SourceVerdict(True)
    try:
        t1 = strip_generated(tokenize_java(decode_source(f1.data)))
        t2 = strip_generated(tokenize_java(decode_source(f2.data)))
    except LexError as exc:
        return _byte_verdict(f1.data, f2.data, f"lexing failed, compared bytes: {exc}")
    for i, (a, b) in enumerate(zip(t1, t2)):
        if a.lexeme != b.lexeme:
            return SourceVerdict(False, {"token_index": i, "left": a.lexeme, "right": b.lexeme,
                                         "left_line": a.line, "right_line": b.line})
    if len(t1) != len(t2):
        i = min(len(t1), len(t2))
        longer = t1 if len(t1) > len(t2) else t2
        return SourceVerdict(False, {"token_index": i,
                                     "left": t1[i].lexeme if i < len(t1) else None,
                                     "right": t2[i].lexeme if i < len(t2) else None,
                                     "left_line": longer[i].line if longer is t1 else None,
                                     "right_line": longer[i].line if longer is t2 else None})
    return SourceVerdict(True)


def source_equiv_files(p1: str | os.PathLike, p2: str | os.PathLike) -> SourceVerdict:
    with open(p1, "rb") as a, open(p2, "rb") as b:
        # classify by the first path; both sides share a relative path
        name = os.fspath(p1)
        return source_equiv(SourceFile(name, a.read()), SourceFile(name, b.read()))


@dataclass
class SourceJarReport:
    left: str
    right: str
    entries: dict[str, SourceVerdict] = field(default_factory=dict)
    only_left: list[str] = field(default_factory=list)
    only_right: list[str] = field(default_factory=list)

    @property
    def equivalent(self) -> bool:
        return not self.only_left and not self.only_right and all(
            v.equivalent for v in self.entries.values())

    def to_json(self) -> dict:
        return {
            "left": self.left, "right": self.right, "equivalent": self.equivalent,
            "only_left": self.only_left, "only_right": self.only_right,
            "entries": {p: v.to_json() for p, v in sorted(self.entries.items())},
        }


def compare_source_jars(jar1, jar2) -> SourceJarReport:
    """Compare two ``-sources.jar`` archives entry by entry."""
    a = {e.path: e.data for e in read_archive(jar1).entries}
    b = {e.path: e.data for e in read_archive(jar2).entries}
    report = SourceJarReport(str(jar1), str(jar2))
    report.only_left = sorted(set(a) - set(b))
    report.only_right = sorted(set(b) - set(a))
    for path in sorted(set(a) & set(b)):
        report.entries[path] = source_equiv(SourceFile(path, a[path]), SourceFile(path, b[path]))
    return report
