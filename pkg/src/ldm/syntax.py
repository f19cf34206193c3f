"""Abstract syntax shared by both calculi.

One term language covers the classical-control calculus (``prob``) and
the probabilistic-control calculus (``mixed``); :func:`check_calculus`
rejects the constructs that do not belong to a given one.  Terms are
frozen dataclasses, so they hash and compare structurally; use
:func:`alpha_eq` for equality up to bound names and matrix tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from . import matrix as mx
from .matrix import DensityMatrix, UnitaryOp

PROB = "prob"
MIXED = "mixed"
CALCULI = (PROB, MIXED)


class SyntaxError_(ValueError):
    """Base for syntax-level errors (ill-formed terms, wrong calculus)."""


class WrongCalculus(SyntaxError_):
    pass


# -- gate expressions -------------------------------------------------------

@dataclass(frozen=True)
class Named:
    name: str
    n: int | None = None  # only for I(n)


@dataclass(frozen=True)
class Literal:
    op: UnitaryOp


@dataclass(frozen=True)
class TensorG:
    left: GateExpr
    right: GateExpr


GateExpr = Union[Named, Literal, TensorG]


def gate_op(g: GateExpr) -> UnitaryOp:
    match g:
        case Named(name, n):
            return mx.gate(name, n)
        case Literal(op):
            return op
        case TensorG(a, b):
            return mx.tensor_unitary(gate_op(a), gate_op(b))
    raise TypeError(f"not a gate expression: {g!r}")


def gate_arity(g: GateExpr) -> int:
    match g:
        case Named("I", n):
            return 1 if n is None else n
        case Named(name, _):
            return gate_op(g).m
        case Literal(op):
            return op.m
        case TensorG(a, b):
            return gate_arity(a) + gate_arity(b)
    raise TypeError(f"not a gate expression: {g!r}")


# -- terms ------------------------------------------------------------------
# ``pos`` is the (line, column) of the node in its source, if parsed.

_pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: tuple | None = _pos


@dataclass(frozen=True)
class Lam:
    binder: str
    body: Term
    pos: tuple | None = _pos


@dataclass(frozen=True)
class App:
    fun: Term
    arg: Term
    pos: tuple | None = _pos


@dataclass(frozen=True)
class Rho:
    rho: DensityMatrix
    pos: tuple | None = _pos


@dataclass(frozen=True)
class UnitaryApp:
    gate: GateExpr
    arg: Term
    pos: tuple | None = _pos


@dataclass(frozen=True)
class Meas:
    m: int
    arg: Term
    pos: tuple | None = _pos


@dataclass(frozen=True)
class Tensor:
    left: Term
    right: Term
    pos: tuple | None = _pos


@dataclass(frozen=True)
class Pair:
    b: int
    m: int
    rho: DensityMatrix
    pos: tuple | None = _pos

    def __post_init__(self):
        if not 0 <= self.b < 2**self.m:
            raise SyntaxError_(f"pair outcome {self.b} out of range for m = {self.m}")
        if self.m > self.rho.n:
            raise SyntaxError_(f"pair with m = {self.m} over a {self.rho.n}-qubit state")


@dataclass(frozen=True)
class LetCase:
    binder: str
    scrutinee: Term
    branches: tuple
    star: bool = False  # True for the probabilistic-control letcase*
    pos: tuple | None = _pos

    def __post_init__(self):
        k = len(self.branches)
        if k < 1 or k & (k - 1):
            raise SyntaxError_(f"letcase needs a power-of-two number of branches, got {k}")
        object.__setattr__(self, "branches", tuple(self.branches))


@dataclass(frozen=True)
class Sum:
    """Formal convex combination ``sum { p1: t1 ; ... }``."""

    addends: tuple  # of (float, Term)
    pos: tuple | None = _pos

    def __post_init__(self):
        adds = tuple((float(p), t) for p, t in self.addends)
        if not adds:
            raise SyntaxError_("sum needs at least one addend")
        eps = mx.get_tolerance()
        for p, _ in adds:
            if not eps < p <= 1 + 10 * eps:
                raise SyntaxError_(f"sum weight {p} is outside (0, 1]")
        total = sum(p for p, _ in adds)
        if abs(total - 1) > 10 * eps:
            raise SyntaxError_(f"sum weights add up to {total}, not 1")
        object.__setattr__(self, "addends", adds)


Term = Union[Var, Lam, App, Rho, UnitaryApp, Meas, Tensor, Pair, LetCase, Sum]


def children(t: Term) -> list:
    match t:
        case Var() | Rho() | Pair():
            return []
        case Lam(_, body):
            return [body]
        case App(f, a):
            return [f, a]
        case UnitaryApp(_, a) | Meas(_, a):
            return [a]
        case Tensor(a, b):
            return [a, b]
        case LetCase(_, r, bs):
            return [r, *bs]
        case Sum(adds):
            return [s for _, s in adds]
    raise TypeError(f"not a term: {t!r}")


def subterms(t: Term):
    yield t
    for c in children(t):
        yield from subterms(c)


def size(t: Term) -> int:
    return sum(1 for _ in subterms(t))


def check_calculus(t: Term, calculus: str) -> None:
    """Raise :class:`WrongCalculus` if ``t`` uses a construct foreign to ``calculus``."""
    if calculus not in CALCULI:
        raise ValueError(f"unknown calculus {calculus!r}")
    for s in subterms(t):
        if calculus == PROB:
            if isinstance(s, Sum):
                raise WrongCalculus("sums are not part of the prob calculus")
            if isinstance(s, LetCase) and s.star:
                raise WrongCalculus("letcase* is not part of the prob calculus")
        else:
            if isinstance(s, Pair):
                raise WrongCalculus("pairs are not part of the mixed calculus")
            if isinstance(s, LetCase) and not s.star:
                raise WrongCalculus("letcase is not part of the mixed calculus; use letcase*")


# -- variables and substitution ----------------------------------------------

def free_vars(t: Term) -> frozenset:
    match t:
        case Var(x):
            return frozenset([x])
        case Lam(x, body):
            return free_vars(body) - {x}
        case LetCase(x, r, bs):
            inner = frozenset().union(*(free_vars(b) for b in bs)) - {x}
            return free_vars(r) | inner
        case _:
            return frozenset().union(*(free_vars(c) for c in children(t)))


def all_names(t: Term) -> set:
    out = set()
    for s in subterms(t):
        if isinstance(s, Var):
            out.add(s.name)
        elif isinstance(s, (Lam, LetCase)):
            out.add(s.binder)
    return out


def fresh_name(base: str, avoid) -> str:
    name = base + "'"
    while name in avoid:
        name += "'"
    return name


def subst(t: Term, x: str, r: Term) -> Term:
    """Capture-avoiding ``t[r/x]``."""
    return _subst(t, x, r, free_vars(r))


def _subst(t, x, r, fv_r):
    match t:
        case Var(y):
            return r if y == x else t
        case Rho() | Pair():
            return t
        case Lam(y, body):
            if y == x or x not in free_vars(body):
                return t
            y2, body = _freshen(y, body, fv_r, x)
            return Lam(y2, _subst(body, x, r, fv_r), t.pos)
        case App(f, a):
            return App(_subst(f, x, r, fv_r), _subst(a, x, r, fv_r), t.pos)
        case UnitaryApp(g, a):
            return UnitaryApp(g, _subst(a, x, r, fv_r), t.pos)
        case Meas(m, a):
            return Meas(m, _subst(a, x, r, fv_r), t.pos)
        case Tensor(a, b):
            return Tensor(_subst(a, x, r, fv_r), _subst(b, x, r, fv_r), t.pos)
        case LetCase(y, s, bs, star):
            s2 = _subst(s, x, r, fv_r)
            if y == x or all(x not in free_vars(b) for b in bs):
                return LetCase(y, s2, bs, star, t.pos)
            y2 = y
            if y in fv_r:
                avoid = set(fv_r) | {x}
                for b in bs:
                    avoid |= all_names(b)
                y2 = fresh_name(y, avoid)
                bs = tuple(_rename(b, y, y2) for b in bs)
            return LetCase(y2, s2, tuple(_subst(b, x, r, fv_r) for b in bs), star, t.pos)
        case Sum(adds):
            return Sum(tuple((p, _subst(s, x, r, fv_r)) for p, s in adds), t.pos)
    raise TypeError(f"not a term: {t!r}")


def _freshen(y, body, fv_r, x):
    if y not in fv_r:
        return y, body
    y2 = fresh_name(y, set(fv_r) | all_names(body) | {x})
    return y2, _rename(body, y, y2)


def _rename(t: Term, old: str, new: str) -> Term:
    return _subst(t, old, Var(new), frozenset([new]))


# -- alpha-equivalence and sums ----------------------------------------------

def alpha_eq(a: Term, b: Term, tol: float | None = None) -> bool:
    tol = mx.get_tolerance() if tol is None else tol
    return _alpha(a, b, {}, {}, 0, tol)


def _alpha(a, b, env_a, env_b, depth, tol):
    if isinstance(a, Sum) or isinstance(b, Sum):
        if not (isinstance(a, Sum) and isinstance(b, Sum)):
            return False
        return _alpha_sum(canonical_sum(a, tol), canonical_sum(b, tol), env_a, env_b, depth, tol)
    if type(a) is not type(b):
        return False
    match a:
        case Var(x):
            ia, ib = env_a.get(x), env_b.get(b.name)
            if ia is None and ib is None:
                return x == b.name
            return ia == ib
        case Rho(r):
            return r.n == b.rho.n and mx.approx_eq(r, b.rho, tol)
        case Pair(bit, m, r):
            return bit == b.b and m == b.m and r.n == b.rho.n and mx.approx_eq(r, b.rho, tol)
        case Lam(x, body):
            return _alpha(body, b.body, {**env_a, x: depth}, {**env_b, b.binder: depth}, depth + 1, tol)
        case App(f, g):
            return _alpha(f, b.fun, env_a, env_b, depth, tol) and _alpha(g, b.arg, env_a, env_b, depth, tol)
        case UnitaryApp(g, s):
            return _gate_eq(g, b.gate, tol) and _alpha(s, b.arg, env_a, env_b, depth, tol)
        case Meas(m, s):
            return m == b.m and _alpha(s, b.arg, env_a, env_b, depth, tol)
        case Tensor(l, r):
            return _alpha(l, b.left, env_a, env_b, depth, tol) and _alpha(r, b.right, env_a, env_b, depth, tol)
        case LetCase(x, s, bs, star):
            if star != b.star or len(bs) != len(b.branches):
                return False
            if not _alpha(s, b.scrutinee, env_a, env_b, depth, tol):
                return False
            ea, eb = {**env_a, x: depth}, {**env_b, b.binder: depth}
            return all(_alpha(p, q, ea, eb, depth + 1, tol) for p, q in zip(bs, b.branches))
    raise TypeError(f"not a term: {a!r}")


def _gate_eq(g, h, tol):
    if g == h:
        return True
    u, v = gate_op(g), gate_op(h)
    return u.m == v.m and mx.approx_eq(u.mat, v.mat, tol)


def _alpha_sum(a, b, env_a, env_b, depth, tol):
    if not isinstance(a, Sum) or not isinstance(b, Sum):
        return _alpha(a, b, env_a, env_b, depth, tol)
    if len(a.addends) != len(b.addends):
        return False
    unused = list(b.addends)
    for p, s in a.addends:
        for k, (q, u) in enumerate(unused):
            if abs(p - q) <= 10 * tol and _alpha(s, u, env_a, env_b, depth, tol):
                del unused[k]
                break
        else:
            return False
    return True


def flatten_sum(t: Sum) -> list:
    out = []
    for p, s in t.addends:
        if isinstance(s, Sum):
            out.extend((p * q, u) for q, u in flatten_sum(s))
        else:
            out.append((p, s))
    return out


def canonical_sum(t: Term, tol: float | None = None) -> Term:
    """Flatten nested sums, merge alpha-equal addends and sort the rest.

    Always returns a :class:`Sum`, possibly with a single addend of
    weight 1.  Addends are ordered by their name-independent printed form.
    """
    if not isinstance(t, Sum):
        raise TypeError("canonical_sum expects a sum")
    tol = mx.get_tolerance() if tol is None else tol
    merged: list[list] = []
    for p, s in flatten_sum(t):
        for slot in merged:
            if alpha_eq(slot[1], s, tol):
                slot[0] += p
                break
        else:
            merged.append([p, s])
    from .printer import sort_key

    merged.sort(key=lambda ps: sort_key(ps[1]))
    total = sum(p for p, _ in merged)
    adds = tuple((min(p / total, 1.0), s) for p, s in merged)
    return Sum(adds, t.pos)


def is_canonical_sum(t: Sum, tol: float | None = None) -> bool:
    """True when no addend is a sum and no two addends are alpha-equal."""
    adds = t.addends
    if any(isinstance(s, Sum) for _, s in adds):
        return False
    for i in range(len(adds)):
        for j in range(i + 1, len(adds)):
            if alpha_eq(adds[i][1], adds[j][1], tol):
                return False
    return True
