"""Affine type inference for both calculi.

Binders carry no annotations, so inference generates unification
constraints over type variables and over linear qubit-count expressions
(tensor adds counts; unitaries and measurements impose ``m <= n``).
Counts still free at the end are fixed by a small backtracking search
that prefers 1, then 0, then larger values; leftover type variables
default to a qubit type first.  The teleportation body therefore infers
as ``1 -o 3``.

Affine use is enforced where the rules split the context: function vs
argument, the two tensor operands, and a letcase scrutinee vs its
branches.  Branches of a letcase and addends of a sum share their
context, which is how the operator-sum example
``\\y. letcase x = meas[1] |+> in { y ; U[Z] y }`` types.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from . import matrix as mx
from .syntax import (
    MIXED, PROB, App, Lam, LetCase, Meas, Pair, Rho, Sum, Tensor, UnitaryApp,
    Var, check_calculus, free_vars, gate_arity,
)


# -- public types ------------------------------------------------------------

@dataclass(frozen=True)
class Qubits:
    n: int

    def __str__(self):
        return str(self.n)


@dataclass(frozen=True)
class MeasResult:
    m: int
    n: int

    def __post_init__(self):
        if self.m > self.n:
            raise ValueError(f"measurement type ({self.m},{self.n}) needs m <= n")

    def __str__(self):
        return f"({self.m},{self.n})"


@dataclass(frozen=True)
class Arrow:
    dom: QType
    cod: QType

    def __str__(self):
        d = str(self.dom)
        if isinstance(self.dom, Arrow):
            d = f"({d})"
        return f"{d} -o {self.cod}"


QType = Qubits | MeasResult | Arrow


def is_base(a: QType) -> bool:
    return not isinstance(a, Arrow)


# -- errors ------------------------------------------------------------------

class TypeCheckError(Exception):
    code = "TypeError"

    def __init__(self, message, pos=None, expected=None, actual=None, **extra):
        super().__init__(message)
        self.message = message
        self.pos = pos
        self.expected = expected
        self.actual = actual
        self.extra = extra

    def as_dict(self) -> dict:
        d = {"code": self.code, "message": self.message}
        if self.pos is not None:
            d["span"] = {"line": self.pos[0], "col": self.pos[1]}
        if self.expected is not None:
            d["expected"] = str(self.expected)
        if self.actual is not None:
            d["actual"] = str(self.actual)
        d.update(self.extra)
        return d


class UnboundVariable(TypeCheckError):
    code = "UnboundVariable"


class AffineViolation(TypeCheckError):
    code = "AffineViolation"


class BranchCountMismatch(TypeCheckError):
    code = "BranchCountMismatch"


class BranchNotClosed(TypeCheckError):
    code = "BranchNotClosed"


class TypeMismatch(TypeCheckError):
    code = "TypeMismatch"


class ArityMismatch(TypeCheckError):
    code = "ArityMismatch"


# -- inference internals -------------------------------------------------------

class Lin:
    """Integer affine expression ``const + sum(coef * var)``."""

    __slots__ = ("const", "coefs")

    def __init__(self, const=0, coefs=None):
        self.const = const
        self.coefs = {v: c for v, c in (coefs or {}).items() if c}

    @staticmethod
    def var(v):
        return Lin(0, {v: 1})

    def __add__(self, other):
        coefs = dict(self.coefs)
        for v, c in other.coefs.items():
            coefs[v] = coefs.get(v, 0) + c
        return Lin(self.const + other.const, coefs)

    def scale(self, k):
        return Lin(self.const * k, {v: c * k for v, c in self.coefs.items()})

    def __sub__(self, other):
        return self + other.scale(-1)

    def is_const(self):
        return not self.coefs

    def eval(self, env):
        return self.const + sum(c * env[v] for v, c in self.coefs.items())

    def __str__(self):
        parts = [f"{'' if c == 1 else c}?n{v}" for v, c in sorted(self.coefs.items())]
        if self.const or not parts:
            parts.append(str(self.const))
        return "+".join(parts)


@dataclass(frozen=True)
class _TV:
    id: int


@dataclass(frozen=True)
class _Q:
    n: Lin


@dataclass(frozen=True)
class _M:
    m: Lin
    n: Lin


@dataclass(frozen=True)
class _Arr:
    dom: object
    cod: object


class _Unify(Exception):
    pass


class _Solver:
    def __init__(self):
        self.types: dict[int, object] = {}
        self.nums: dict[int, Lin] = {}
        self.pending: list[Lin] = []  # == 0
        self.ineqs: list[tuple[Lin, TypeCheckError]] = []  # >= 0
        self._ids = itertools.count()

    def fresh_t(self):
        return _TV(next(self._ids))

    def fresh_n(self):
        return Lin.var(next(self._ids))

    # resolution
    def lin(self, e: Lin) -> Lin:
        if not any(v in self.nums for v in e.coefs):
            return e
        const, coefs = e.const, {}
        for v, c in e.coefs.items():
            if v in self.nums:
                s = self.nums[v] = self.lin(self.nums[v])
                const += c * s.const
                for w, d in s.coefs.items():
                    coefs[w] = coefs.get(w, 0) + c * d
            else:
                coefs[v] = coefs.get(v, 0) + c
        return Lin(const, coefs)

    def ty(self, t):
        match t:
            case _TV(i) if i in self.types:
                return self.ty(self.types[i])
            case _TV():
                return t
            case _Q(n):
                n2 = self.lin(n)
                return t if n2 is n else _Q(n2)
            case _M(m, n):
                m2, n2 = self.lin(m), self.lin(n)
                return t if m2 is m and n2 is n else _M(m2, n2)
            case _Arr(a, b):
                a2, b2 = self.ty(a), self.ty(b)
                return t if a2 is a and b2 is b else _Arr(a2, b2)
        raise TypeError(t)

    def occurs(self, i, t):
        t = self.ty(t)
        match t:
            case _TV(j):
                return i == j
            case _Arr(a, b):
                return self.occurs(i, a) or self.occurs(i, b)
        return False

    def unify(self, a, b):
        a, b = self.ty(a), self.ty(b)
        if isinstance(a, _TV):
            if a != b:
                if self.occurs(a.id, b):
                    raise _Unify("infinite type")
                self.types[a.id] = b
            return
        if isinstance(b, _TV):
            return self.unify(b, a)
        match a, b:
            case _Q(n), _Q(k):
                self.equate(n, k)
            case _M(m, n), _M(j, k):
                self.equate(m, j)
                self.equate(n, k)
            case _Arr(d, c), _Arr(e, f):
                self.unify(d, e)
                self.unify(c, f)
            case _:
                raise _Unify("shape")

    def equate(self, a: Lin, b: Lin):
        d = self.lin(a - b)
        if d.is_const():
            if d.const != 0:
                raise _Unify("count")
            return
        for v, c in sorted(d.coefs.items()):
            if c in (1, -1):
                rest = d - Lin(0, {v: c})
                sol = rest.scale(-c)  # v = -rest / c
                self.nums[v] = sol
                self.ineqs.append((sol, None))
                self._recheck()
                return
        self.pending.append(d)

    def require_ge(self, e: Lin, err: TypeCheckError):
        e = self.lin(e)
        if e.is_const():
            if e.const < 0:
                raise err
            return
        self.ineqs.append((e, err))

    def _recheck(self):
        kept = []
        for e, err in self.ineqs:
            r = self.lin(e)
            if r.is_const():
                if r.const < 0:
                    raise err or _Unify("count")
            else:
                kept.append((r, err))
        self.ineqs = kept
        still = []
        for e in self.pending:
            r = self.lin(e)
            if r.is_const():
                if r.const != 0:
                    raise _Unify("count")
            else:
                still.append(r)
        self.pending = still

    def solve_counts(self, limit=16):
        """Fix all remaining count variables; raise on infeasibility."""
        cons = [(self.lin(e), err) for e, err in self.ineqs]
        eqs = [self.lin(e) for e in self.pending]
        free = sorted({v for e, _ in cons for v in e.coefs} | {v for e in eqs for v in e.coefs})
        order = [1, 0] + list(range(2, limit + 1))
        env: dict[int, int] = {}

        def ok():
            for e, _ in cons:
                if all(v in env for v in e.coefs) and e.eval(env) < 0:
                    return False
            for e in eqs:
                if all(v in env for v in e.coefs) and e.eval(env) != 0:
                    return False
            return True

        def search(k):
            if k == len(free):
                return True
            for val in order:
                env[free[k]] = val
                if ok() and search(k + 1):
                    return True
            del env[free[k]]
            return False

        if not search(0):
            for e, err in cons:
                if err is not None:
                    raise err
            raise TypeMismatch("qubit counts admit no solution")
        for v, val in env.items():
            self.nums[v] = Lin(val)

    def public(self, t, defaults: dict) -> QType:
        t = self.ty(t)
        match t:
            case _TV(i):
                return self.public(defaults.setdefault(i, _Q(Lin(1))), defaults)
            case _Q(n):
                return Qubits(self._count(n))
            case _M(m, n):
                return MeasResult(self._count(m), self._count(n))
            case _Arr(a, b):
                return Arrow(self.public(a, defaults), self.public(b, defaults))
        raise TypeError(t)

    def _count(self, e):
        e = self.lin(e)
        if not e.is_const():
            # unconstrained count: same preference as solve_counts
            env = {v: 1 for v in e.coefs}
            return e.eval(env)
        return e.const

    def show(self, t) -> str:
        t = self.ty(t)
        match t:
            case _TV(i):
                return f"?a{i}"
            case _Q(n):
                return str(n)
            case _M(m, n):
                return f"({m},{n})"
            case _Arr(a, b):
                d = self.show(a)
                if isinstance(self.ty(a), _Arr):
                    d = f"({d})"
                return f"{d} -o {self.show(b)}"
        return str(t)


def _from_public(a: QType):
    match a:
        case Qubits(n):
            return _Q(Lin(n))
        case MeasResult(m, n):
            return _M(Lin(m), Lin(n))
        case Arrow(d, c):
            return _Arr(_from_public(d), _from_public(c))
    raise TypeError(f"not a type: {a!r}")


class _Infer:
    def __init__(self, strict_branches: bool):
        self.s = _Solver()
        self.strict = strict_branches

    def expect(self, actual, expected, pos, what):
        try:
            self.s.unify(actual, expected)
        except _Unify:
            raise TypeMismatch(
                f"{what}: expected {self.s.show(expected)}, got {self.s.show(actual)}",
                pos, self.s.show(expected), self.s.show(actual),
            ) from None

    def qubits(self, ty, pos, what):
        n = self.s.fresh_n()
        self.expect(ty, _Q(n), pos, what)
        return n

    def disjoint(self, u1: dict, u2: dict):
        for x in u1.keys() & u2.keys():
            raise AffineViolation(
                f"variable {x!r} is used more than once",
                u2[x] or u1[x], uses=[_span(u1[x]), _span(u2[x])], variable=x,
            )

    def go(self, t, env):
        """Return ``(type, usage)``; usage maps free variables to a use site."""
        s = self.s
        match t:
            case Var(x):
                if x not in env:
                    raise UnboundVariable(f"unbound variable {x!r}", t.pos, variable=x)
                return env[x], {x: t.pos}
            case Rho(r):
                return _Q(Lin(r.n)), {}
            case Pair(_, m, r):
                return _M(Lin(m), Lin(r.n)), {}
            case Lam(x, body):
                a = s.fresh_t()
                b, use = self.go(body, {**env, x: a})
                use = {k: v for k, v in use.items() if k != x}
                return _Arr(a, b), use
            case App(f, r):
                ft, fu = self.go(f, env)
                at, au = self.go(r, env)
                self.disjoint(fu, au)
                res = s.fresh_t()
                self.expect(ft, _Arr(at, res), f.pos or t.pos, "function position")
                return res, {**fu, **au}
            case UnitaryApp(g, r):
                rt, ru = self.go(r, env)
                n = self.qubits(rt, r.pos or t.pos, "unitary argument")
                m = gate_arity(g)
                s.require_ge(n - Lin(m), ArityMismatch(
                    f"{m}-qubit unitary applied to a term with fewer qubits", t.pos,
                    expected=f">= {m} qubits", actual=s.show(rt)))
                return _Q(n), ru
            case Meas(m, r):
                rt, ru = self.go(r, env)
                n = self.qubits(rt, r.pos or t.pos, "measured term")
                s.require_ge(n - Lin(m), ArityMismatch(
                    f"measuring {m} qubits of a term with fewer qubits", t.pos,
                    expected=f">= {m} qubits", actual=s.show(rt)))
                return _M(Lin(m), n), ru
            case Tensor(a, b):
                at, au = self.go(a, env)
                bt, bu = self.go(b, env)
                self.disjoint(au, bu)
                n1 = self.qubits(at, a.pos or t.pos, "left tensor operand")
                n2 = self.qubits(bt, b.pos or t.pos, "right tensor operand")
                return _Q(n1 + n2), {**au, **bu}
            case LetCase(x, r, bs):
                rt, ru = self.go(r, env)
                k = len(bs)
                m = k.bit_length() - 1
                n = s.fresh_n()
                try:
                    s.unify(rt, _M(s.fresh_n(), n))
                except _Unify:
                    raise TypeMismatch(
                        f"letcase scrutinee must be a measurement result, got {s.show(rt)}",
                        r.pos or t.pos, "(m,n)", s.show(rt)) from None
                try:
                    s.unify(rt, _M(Lin(m), n))
                except _Unify:
                    raise BranchCountMismatch(
                        f"letcase over {s.show(rt)} has {k} branches", t.pos,
                        expected=f"2^{s.lin(s.ty(rt).m) if isinstance(s.ty(rt), _M) else '?'} branches",
                        actual=f"{k} branches") from None
                s.require_ge(n - Lin(m), TypeMismatch(
                    f"letcase over {m}-qubit outcomes of a smaller state", t.pos))
                if self.strict:
                    benv = {x: _Q(n)}
                    for b in bs:
                        extra = free_vars(b) - {x}
                        if extra:
                            raise BranchNotClosed(
                                f"letcase branch mentions {sorted(extra)} besides {x!r}",
                                b.pos or t.pos, variables=sorted(extra))
                else:
                    benv = {**env, x: _Q(n)}
                res = s.fresh_t()
                bu: dict = {}
                for b in bs:
                    bt, u = self.go(b, benv)
                    self.expect(bt, res, b.pos or t.pos, "letcase branch")
                    for y, p in u.items():
                        if y != x:
                            bu.setdefault(y, p)
                self.disjoint(ru, bu)
                return res, {**ru, **bu}
            case Sum(adds):
                res = s.fresh_t()
                use: dict = {}
                total = sum(p for p, _ in adds)
                if abs(total - 1) > 10 * mx.get_tolerance():
                    raise TypeMismatch(f"sum weights add up to {total}, not 1", t.pos)
                for _, a in adds:
                    at, u = self.go(a, env)
                    self.expect(at, res, a.pos or t.pos, "sum addend")
                    for y, p in u.items():
                        use.setdefault(y, p)
                return res, use
        raise TypeError(f"not a term: {t!r}")


def _span(pos):
    return None if pos is None else {"line": pos[0], "col": pos[1]}


def infer(ctx: dict | None, t, calculus: str = PROB, strict_branches: bool = False) -> QType:
    """Infer the type of ``t`` under ``ctx`` (names to :data:`QType`).

    Raises a :class:`TypeCheckError` subclass on failure.  With
    ``strict_branches`` letcase branches may mention only their binder.
    """
    check_calculus(t, calculus)
    inf = _Infer(strict_branches)
    env = {x: _from_public(a) for x, a in (ctx or {}).items()}
    try:
        ty, _ = inf.go(t, env)
        inf.s.solve_counts()
        return inf.s.public(ty, {})
    except _Unify as e:
        raise TypeMismatch(f"ill-typed term ({e})", getattr(t, "pos", None)) from None


def typable(ctx, t, calculus=PROB) -> bool:
    try:
        infer(ctx, t, calculus)
        return True
    except TypeCheckError:
        return False


def check_metatheory_step(ctx, t, t2, calculus=PROB) -> bool:
    """Does a reduct keep the type of the redex?"""
    try:
        return infer(ctx, t, calculus) == infer(ctx, t2, calculus)
    except TypeCheckError:
        return False


__all__ = [
    "Qubits", "MeasResult", "Arrow", "QType", "is_base", "infer", "typable",
    "check_metatheory_step", "TypeCheckError", "UnboundVariable",
    "AffineViolation", "BranchCountMismatch", "BranchNotClosed", "TypeMismatch",
    "ArityMismatch", "PROB", "MIXED",
]
