"""Executable metatheory: type soundness and semantic preservation checks.

Each checker walks every reduct of a closed term and reports violations
instead of raising, so property suites can count them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import eval_mixed as em
from . import eval_prob as ep
from . import matrix as mx
from .denotation import fsem, interp, term_weight
from .printer import print_term
from .syntax import MIXED, PROB, subst
from .typecheck import MeasResult, TypeCheckError, infer, is_base


@dataclass
class Report:
    terms: int = 0
    steps: int = 0
    violations: dict = field(default_factory=dict)  # kind -> list of printed terms

    def add(self, kind: str, t, detail: str = ""):
        self.violations.setdefault(kind, []).append(f"{print_term(t)}  {detail}".strip())

    def count(self, kind: str) -> int:
        return len(self.violations.get(kind, []))

    def merge(self, other: "Report"):
        self.terms += other.terms
        self.steps += other.steps
        for k, v in other.violations.items():
            self.violations.setdefault(k, []).extend(v)


def _type_or_none(t, calculus):
    try:
        return infer({}, t, calculus)
    except TypeCheckError:
        return None


def _dense(t):
    v = fsem(t)
    return v.mat if isinstance(v, mx.DensityMatrix) else None


def check_prob(t, fuel: int = ep.DEFAULT_FUEL, tol: float = 1e-7) -> Report:
    """Subject reduction, progress, one-step preservation and unit weight."""
    rep = Report(terms=1)
    ty0 = _type_or_none(t, PROB)
    if ty0 is None:
        rep.add("untyped-input", t)
        return rep
    stack = [(t, ty0, fuel)]
    dens_cache: dict = {}

    def dens(u):
        key = id(u)
        if key not in dens_cache:
            dens_cache[key] = (u, _dense(u))
        return dens_cache[key][1]

    while stack:
        cur, ty, left = stack.pop()
        if abs(term_weight(cur) - 1) > tol:
            rep.add("weight", cur)
        d = ep.step_prob(cur)
        if d is None:
            if not ep.is_value(cur):
                rep.add("progress", cur)
            continue
        if left <= 0:
            rep.add("fuel", cur)
            continue
        if abs(sum(p for p, _ in d) - 1) > tol:
            rep.add("step-weight", cur)
        base = is_base(ty)
        acc = np.zeros_like(dens(cur)) if base else None
        for p, r in d:
            rep.steps += 1
            rty = _type_or_none(r, PROB)
            if rty != ty:
                rep.add("subject-reduction", cur, f"{ty} -> {rty} via {print_term(r)}")
                continue
            if base:
                acc = acc + p * dens(r)
            stack.append((r, rty, left - 1))
        if base and not mx.approx_eq(acc, dens(cur), tol):
            rep.add("preservation", cur, f"deviation {mx.max_deviation(acc, dens(cur)):.3g}")
    return rep


def check_mixed(t, fuel: int = em.DEFAULT_FUEL, tol: float = 1e-7) -> Report:
    rep = Report(terms=1)
    ty = _type_or_none(t, MIXED)
    if ty is None:
        rep.add("untyped-input", t)
        return rep
    base = is_base(ty)
    cur = t
    prev = _dense(cur) if base else None
    for _ in range(fuel):
        if abs(term_weight(cur) - 1) > tol:
            rep.add("weight", cur)
        res = em.step_mixed(cur)
        if isinstance(res, em.Value):
            return rep
        if isinstance(res, em.Stuck):
            if not isinstance(ty, MeasResult):
                rep.add("progress", cur, res.reason)
            return rep
        rep.steps += 1
        nty = _type_or_none(res.term, MIXED)
        if nty != ty:
            rep.add("subject-reduction", cur, f"{ty} -> {nty} via {res.rule}")
            return rep
        if base:
            now = _dense(res.term)
            if not mx.approx_eq(now, prev, tol):
                rep.add("preservation", cur, f"{res.rule}: deviation {mx.max_deviation(now, prev):.3g}")
            prev = now
        cur = res.term
    rep.add("fuel", cur)
    return rep


def substitution_gap(t, x: str, r) -> float:
    """Largest entry-wise gap between ``fsem(t[r/x])`` and the weighted sum
    of ``fsem(t)`` under each triplet of ``r``."""
    lhs = fsem(subst(t, x, r)).mat
    rhs = sum(h.p * fsem(t, {x: (h.b, h.e)}).mat for h in interp(r))
    return mx.max_deviation(lhs, rhs)
