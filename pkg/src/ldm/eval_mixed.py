"""Deterministic rewriting for the mixed-state calculus.

Every step is a function of the term.  The position that fires is chosen
as follows:

* application ``f a``: step ``a`` if it can step, beta-reduce if ``f``
  is an abstraction, step ``f`` if it can step, and otherwise distribute
  a sum in function position over the argument;
* tensor: left, right, then collapse two densities;
* unitary: step the argument until it is a density;
* ``letcase*``: fire on ``meas[m] rho``, else step the scrutinee, else
  (optionally) push the letcase into a sum scrutinee;
* sum: canonicalize (flatten, merge equal addends) if needed, collapse a
  single addend, fold an all-density sum into one density, else step the
  first reducible addend;
* abstraction: step the body.

A bare ``meas[m] rho`` outside a ``letcase*`` never steps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

from . import matrix as mx
from .eval_prob import FuelExhausted, IllFormedRedex, _checked_gate
from .printer import print_term
from .syntax import (
    App, Lam, LetCase, Meas, Pair, Rho, Sum, Tensor, UnitaryApp, Var, alpha_eq,
    canonical_sum, is_canonical_sum, subst,
)

DEFAULT_FUEL = 10_000


@dataclass(frozen=True)
class Stepped:
    term: object
    rule: str


@dataclass(frozen=True)
class Value:
    pass


@dataclass(frozen=True)
class Stuck:
    reason: str
    subterm: object = None


MixedStepResult = Stepped | Value | Stuck

MEASUREMENT_NOT_OBSERVABLE = "MeasurementNotObservable"
NO_RULE = "NoRuleApplies"


class StuckTerm(Exception):
    def __init__(self, stuck: Stuck):
        where = "" if stuck.subterm is None else f" at {print_term(stuck.subterm)}"
        super().__init__(f"{stuck.reason}{where}")
        self.stuck = stuck


def is_value(t) -> bool:
    return isinstance(t, Rho) or _is_w(t)


def _is_w(t) -> bool:
    match t:
        case Var():
            return True
        case Lam(_, body):
            return is_value(body)
        case Tensor(a, b):
            return _is_w(a) and _is_w(b)
        case Sum(adds):
            return (
                len(adds) >= 2
                and all(_is_w(s) and not isinstance(s, Sum) for _, s in adds)
                and is_canonical_sum(t)
            )
    return False


def step_mixed(t, sum_scrutinee: bool = True) -> MixedStepResult:
    """One rewrite step.

    ``sum_scrutinee`` enables ``letcase* x = sum{p_i: r_i} in {..}`` ->
    ``sum{p_i: letcase* x = r_i in {..}}``; without it such terms are stuck.
    """
    r = _step(t, sum_scrutinee)
    if r is not None:
        return Stepped(r[1], r[0])
    if is_value(t):
        return Value()
    return Stuck(*_why_stuck(t))


def _why_stuck(t):
    for s in _walk(t):
        if isinstance(s, Meas):
            return MEASUREMENT_NOT_OBSERVABLE, s
    return NO_RULE, t


def _walk(t):
    yield t
    match t:
        case Lam(_, b):
            yield from _walk(b)
        case App(f, a) | Tensor(f, a):
            yield from _walk(f)
            yield from _walk(a)
        case UnitaryApp(_, a) | Meas(_, a):
            yield from _walk(a)
        case LetCase(_, s, _, _):
            yield from _walk(s)
        case Sum(adds):
            for _, s in adds:
                yield from _walk(s)


def _in(ctx, r):
    if r is None:
        return None
    rule, t = r
    return rule, ctx(t)


@lru_cache(maxsize=100_000)
def _step(t, sums: bool):
    match t:
        case Var() | Rho():
            return None
        case Pair():
            raise IllFormedRedex("pairs do not occur in mixed terms")
        case Lam(x, body):
            return _in(lambda b: Lam(x, b), _step(body, sums))
        case App(f, a):
            r = _step(a, sums)
            if r is not None:
                return _in(lambda s: App(f, s), r)
            if isinstance(f, Lam):
                return "beta", subst(f.body, f.binder, a)
            r = _step(f, sums)
            if r is not None:
                return _in(lambda s: App(s, a), r)
            if isinstance(f, Sum):
                return "sum-app", Sum(tuple((p, App(g, a)) for p, g in f.addends))
            return None
        case UnitaryApp(g, a):
            if isinstance(a, Rho):
                return "unitary", Rho(mx.evolve(a.rho, _checked_gate(g, a.rho.n)))
            return _in(lambda s: UnitaryApp(g, s), _step(a, sums))
        case Meas(m, a):
            if isinstance(a, Rho):
                return None
            return _in(lambda s: Meas(m, s), _step(a, sums))
        case Tensor(a, b):
            r = _step(a, sums)
            if r is not None:
                return _in(lambda s: Tensor(s, b), r)
            r = _step(b, sums)
            if r is not None:
                return _in(lambda s: Tensor(a, s), r)
            if isinstance(a, Rho) and isinstance(b, Rho):
                return "tensor", Rho(mx.tensor_density(a.rho, b.rho))
            return None
        case LetCase(x, s, bs, True):
            if isinstance(s, Meas) and isinstance(s.arg, Rho):
                if s.m > s.arg.rho.n:
                    raise IllFormedRedex(f"measuring {s.m} qubits of a {s.arg.rho.n}-qubit state")
                outs = mx.measure_comp(s.arg.rho, s.m)
                total = sum(o.prob for o in outs)
                adds = tuple((o.prob / total, subst(bs[o.index], x, Rho(o.state))) for o in outs)
                return "letcase-meas", adds[0][1] if len(adds) == 1 else Sum(adds)
            r = _step(s, sums)
            if r is not None:
                return _in(lambda u: LetCase(x, u, bs, True), r)
            if sums and isinstance(s, Sum):
                return "letcase-sum", Sum(tuple((p, LetCase(x, u, bs, True)) for p, u in s.addends))
            return None
        case LetCase():
            raise IllFormedRedex("letcase without * in a mixed term")
        case Sum(adds):
            if not is_canonical_sum(t):
                c = canonical_sum(t)
                if len(c.addends) == 1:
                    return "sum-collapse", c.addends[0][1]
                return "sum-canonical", c
            if len(adds) == 1:
                return "sum-collapse", adds[0][1]
            if all(isinstance(s, Rho) for _, s in adds):
                if len({s.rho.n for _, s in adds}) == 1:
                    return "sum-density", Rho(mx.mix([(p, s.rho) for p, s in adds]))
                raise IllFormedRedex("sum of densities of different sizes")
            for i, (p, s) in enumerate(adds):
                r = _step(s, sums)
                if r is not None:
                    rule, s2 = r
                    return rule, Sum(adds[:i] + ((p, s2),) + adds[i + 1:])
            return None
    raise TypeError(f"not a term: {t!r}")


def steps(t, fuel: int = DEFAULT_FUEL, sum_scrutinee: bool = True):
    """Yield ``(rule, term)`` for each step until a value or stuck term."""
    cur = t
    for _ in range(fuel):
        res = step_mixed(cur, sum_scrutinee)
        if not isinstance(res, Stepped):
            return
        cur = res.term
        yield res.rule, cur
    if isinstance(step_mixed(cur, sum_scrutinee), Stepped):
        raise FuelExhausted(f"no normal form after {fuel} steps")


def normalize_mixed(t, fuel: int = DEFAULT_FUEL, sum_scrutinee: bool = True,
                    raise_on_stuck: bool = False):
    cur = t
    for _, cur in steps(t, fuel, sum_scrutinee):
        pass
    if raise_on_stuck:
        res = step_mixed(cur, sum_scrutinee)
        if isinstance(res, Stuck):
            raise StuckTerm(res)
    return cur


def step_log(t, fuel: int = DEFAULT_FUEL, sum_scrutinee: bool = True):
    """JSON lines: the start term, then one line per rewrite."""
    yield json.dumps({"step": 0, "rule": None, "term": print_term(t)})
    for k, (rule, term) in enumerate(steps(t, fuel, sum_scrutinee), 1):
        yield json.dumps({"step": k, "rule": rule, "term": print_term(term)})


def same_normal_form(a, b, fuel: int = DEFAULT_FUEL) -> bool:
    return alpha_eq(normalize_mixed(a, fuel), normalize_mixed(b, fuel))
