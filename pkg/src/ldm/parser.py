"""Recursive-descent parser for the ``.ldm`` concrete syntax.

Grammar (``{}``/``[]`` are EBNF repetition/option unless quoted)::

    term     ::= '\\' ident '.' term | tensor
    tensor   ::= app { '><' app }
    app      ::= prefix { prefix }
    prefix   ::= 'U' '[' gexpr ']' prefix | 'meas' '[' int ']' prefix | atom
    atom     ::= ident | '(' term ')' | density | pair | sum | letcase
    letcase  ::= 'letcase' ['*'] ident '=' term 'in' '{' term { ';' term } '}'
    sum      ::= 'sum' '{' weight ':' term { ';' weight ':' term } '}'
    pair     ::= 'pair' '(' int ',' int ',' density ')'
    density  ::= ket | 'bell00' | 'rho' '[' int ']' matrix
    ket      ::= '|' ('0'|'1'|'+'|'-')+ '>'
    matrix   ::= '{' row { ';' row } '}'      row ::= entry { ',' entry }
    entry    ::= ['+'|'-'] part { ('+'|'-') part }
    part     ::= real ['i'] | 'i'
    real     ::= factor { '*' factor } [ '/' factor ]
    factor   ::= number | 'sqrt' '(' number ')'
    weight   ::= number [ '/' number ]
    gexpr    ::= gatom { '*' gatom }
    gatom    ::= 'I' [ '(' int ')' ] | 'X' | 'Y' | 'Z' | 'H' | 'CNOT'
               | 'unitary' '[' int ']' matrix | '(' gexpr ')'

Comments run from ``#`` to end of line.  A ``#calculus: prob|mixed``
comment selects the calculus for the file.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from . import matrix as mx
from .syntax import (
    CALCULI, App, Lam, LetCase, Literal, Meas, Named, Pair, Rho, Sum,
    SyntaxError_, Tensor, TensorG, UnitaryApp, Var, check_calculus,
)


class ParseError(SyntaxError_):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.detail = message


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<ket>\|[01+\-]+>)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>><|[\\.()\[\]{};,:=*/+\-])
    """,
    re.VERBOSE,
)

KEYWORDS = {"letcase", "in", "sum", "meas", "U", "pair", "rho", "bell00"}
_GATE_NAMES = {"X", "Y", "Z", "H", "CNOT"}


def tokenize(src: str) -> list[Token]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        if kind != "ws":
            toks.append(Token(kind, text, line, pos - line_start + 1))
        nl = text.count("\n")
        if nl:
            line += nl
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    toks.append(Token("eof", "", line, pos - line_start + 1))
    return toks


def detect_calculus(src: str) -> str | None:
    m = re.search(r"#\s*calculus\s*:\s*(\w+)", src)
    if m and m.group(1) in CALCULI:
        return m.group(1)
    return None


class _Parser:
    def __init__(self, src: str):
        self.toks = tokenize(src)
        self.i = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def at(self, text) -> bool:
        t = self.tok
        return t.text == text and t.kind in ("op", "ident")

    def eat(self, text) -> Token:
        if not self.at(text):
            shown = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {shown!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            raise self.error(f"expected a variable name, found {t.text or 'end of input'!r}")
        self.i += 1
        return t.text

    def integer(self) -> int:
        t = self.tok
        if t.kind != "number" or not t.text.isdigit():
            raise self.error(f"expected an integer, found {t.text or 'end of input'!r}")
        self.i += 1
        return int(t.text)

    def number(self) -> float:
        t = self.tok
        if t.kind != "number":
            raise self.error(f"expected a number, found {t.text or 'end of input'!r}")
        self.i += 1
        return float(t.text)

    # -- terms
    def term(self):
        t = self.tok
        if self.at("\\"):
            self.i += 1
            x = self.ident()
            self.eat(".")
            return Lam(x, self.term(), (t.line, t.col))
        return self.tensor()

    def tensor(self):
        left = self.app()
        while self.at("><"):
            t = self.eat("><")
            left = Tensor(left, self.app(), (t.line, t.col))
        return left

    def _starts_prefix(self) -> bool:
        t = self.tok
        if t.kind == "ket":
            return True
        if t.kind == "ident":
            return t.text not in ("in",)
        return t.kind == "op" and t.text == "("

    def app(self):
        head = self.prefix()
        while self._starts_prefix():
            t = self.tok
            head = App(head, self.prefix(), (t.line, t.col))
        return head

    def prefix(self):
        t = self.tok
        if self.at("U"):
            self.i += 1
            self.eat("[")
            g = self.gexpr()
            self.eat("]")
            return UnitaryApp(g, self.prefix(), (t.line, t.col))
        if self.at("meas"):
            self.i += 1
            self.eat("[")
            m = self.integer()
            self.eat("]")
            return Meas(m, self.prefix(), (t.line, t.col))
        return self.atom()

    def atom(self):
        t = self.tok
        pos = (t.line, t.col)
        if self.at("("):
            self.i += 1
            inner = self.term()
            self.eat(")")
            return inner
        if t.kind == "ket" or self.at("bell00") or self.at("rho"):
            return Rho(self.density(), pos)
        if self.at("pair"):
            self.i += 1
            self.eat("(")
            b = self.integer()
            self.eat(",")
            m = self.integer()
            self.eat(",")
            rho = self.density()
            self.eat(")")
            try:
                return Pair(b, m, rho, pos)
            except SyntaxError_ as e:
                raise self.error(str(e), t) from None
        if self.at("sum"):
            return self.sum_()
        if self.at("letcase"):
            return self.letcase()
        if t.kind == "ident" and t.text not in KEYWORDS:
            self.i += 1
            return Var(t.text, pos)
        raise self.error(f"unexpected {t.text or 'end of input'!r}")

    def letcase(self):
        t = self.eat("letcase")
        star = False
        if self.at("*"):
            self.i += 1
            star = True
        x = self.ident()
        self.eat("=")
        scrut = self.term()
        self.eat("in")
        self.eat("{")
        arms = [self.term()]
        while self.at(";"):
            self.i += 1
            arms.append(self.term())
        self.eat("}")
        try:
            return LetCase(x, scrut, tuple(arms), star, (t.line, t.col))
        except SyntaxError_ as e:
            raise self.error(str(e), t) from None

    def sum_(self):
        t = self.eat("sum")
        self.eat("{")
        adds = [self.weighted()]
        while self.at(";"):
            self.i += 1
            adds.append(self.weighted())
        self.eat("}")
        try:
            return Sum(tuple(adds), (t.line, t.col))
        except SyntaxError_ as e:
            raise self.error(str(e), t) from None

    def weighted(self):
        p = self.number()
        if self.at("/"):
            self.i += 1
            p /= self.number()
        self.eat(":")
        return (p, self.term())

    # -- densities and matrices
    def density(self) -> mx.DensityMatrix:
        t = self.tok
        if t.kind == "ket":
            self.i += 1
            return mx.ket(t.text[1:-1])
        if self.at("bell00"):
            self.i += 1
            return mx.bell00()
        if self.at("rho"):
            self.i += 1
            self.eat("[")
            n = self.integer()
            self.eat("]")
            mat = self.matrix(t)
            if mat.shape != (2**n, 2**n):
                raise self.error(f"rho[{n}] needs a {2**n}x{2**n} matrix, got {mat.shape[0]}x{mat.shape[1]}", t)
            try:
                return mx.validate_density(mat)
            except mx.DensityError as e:
                raise self.error(f"{e.check}: {e}", t) from None
        raise self.error(f"expected a density matrix, found {t.text or 'end of input'!r}")

    def matrix(self, start) -> np.ndarray:
        self.eat("{")
        rows = [self.row()]
        while self.at(";"):
            self.i += 1
            rows.append(self.row())
        self.eat("}")
        if len({len(r) for r in rows}) != 1:
            raise self.error("matrix rows have different lengths", start)
        return np.array(rows, dtype=complex)

    def row(self):
        out = [self.entry()]
        while self.at(","):
            self.i += 1
            out.append(self.entry())
        return out

    def entry(self) -> complex:
        sign = 1.0
        if self.at("+") or self.at("-"):
            sign = -1.0 if self.tok.text == "-" else 1.0
            self.i += 1
        total = sign * self.part()
        while self.at("+") or self.at("-"):
            sign = -1.0 if self.tok.text == "-" else 1.0
            self.i += 1
            total += sign * self.part()
        return total

    def part(self) -> complex:
        if self.at("i"):
            self.i += 1
            return 1j
        val = self.factor()
        while self.at("*"):
            self.i += 1
            val *= self.factor()
        if self.at("/"):
            self.i += 1
            val /= self.factor()
        if self.at("i"):
            self.i += 1
            return val * 1j
        return complex(val)

    def factor(self) -> float:
        if self.at("sqrt"):
            self.i += 1
            self.eat("(")
            v = math.sqrt(self.number())
            self.eat(")")
            return v
        return self.number()

    # -- gates
    def gexpr(self):
        g = self.gatom()
        while self.at("*"):
            self.i += 1
            g = TensorG(g, self.gatom())
        return g

    def gatom(self):
        t = self.tok
        if self.at("("):
            self.i += 1
            g = self.gexpr()
            self.eat(")")
            return g
        if self.at("I"):
            self.i += 1
            if self.at("("):
                self.i += 1
                n = self.integer()
                self.eat(")")
                return Named("I", n)
            return Named("I")
        if t.kind == "ident" and t.text in _GATE_NAMES:
            self.i += 1
            return Named(t.text)
        if self.at("unitary"):
            self.i += 1
            self.eat("[")
            m = self.integer()
            self.eat("]")
            mat = self.matrix(t)
            if mat.shape != (2**m, 2**m):
                raise self.error(f"unitary[{m}] needs a {2**m}x{2**m} matrix", t)
            try:
                return Literal(mx.UnitaryOp.of(mat))
            except mx.MatrixError as e:
                raise self.error(str(e), t) from None
        raise self.error(f"unknown gate {t.text or 'end of input'!r}")


def parse(src: str, calculus: str | None = None):
    """Parse ``src`` into a term of ``calculus`` (default: header or ``prob``)."""
    calculus = calculus or detect_calculus(src) or "prob"
    p = _Parser(src)
    t = p.term()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r} after end of term")
    check_calculus(t, calculus)
    return t
