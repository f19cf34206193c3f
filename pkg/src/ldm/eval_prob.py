"""Probabilistic small-step evaluation for the classical-control calculus.

Strategy (the rules allow several redexes; this one is fixed):

* application ``f a``: step ``a`` if it can step, else beta-reduce if
  ``f`` is an abstraction, else step ``f``;
* tensor: left operand, then right, then collapse two densities;
* unitary / measurement: step the argument until it is a density;
* letcase: step the scrutinee until it is a pair, then select;
* abstraction: step the body.

This reproduces the published trace trees of the coin experiment and
of the two operator-sum processes edge for edge.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from functools import lru_cache

from . import matrix as mx
from .printer import format_weight, print_term
from .syntax import (
    App, Lam, LetCase, Meas, Pair, Rho, Sum, Tensor, UnitaryApp, Var, alpha_eq,
    gate_op, subst,
)
from .typecheck import infer

DEFAULT_FUEL = 10_000


class EvalError(Exception):
    pass


class IllFormedRedex(EvalError):
    pass


class FuelExhausted(EvalError):
    pass


class IncompleteTrace(EvalError):
    pass


class NonDensityLeaf(EvalError):
    pass


class MixedDimensions(EvalError):
    pass


Distribution = list  # of (prob, Term)


def is_value(t) -> bool:
    return isinstance(t, (Rho, Pair)) or _is_w(t)


def _is_w(t) -> bool:
    match t:
        case Var():
            return True
        case Lam(_, body):
            return is_value(body)
        case Tensor(a, b):
            return _is_w(a) and _is_w(b)
    return False


def step_prob(t) -> Distribution | None:
    """One-step reducts of ``t`` with their probabilities, or ``None``."""
    return _step(t)


@lru_cache(maxsize=100_000)
def _step(t):
    match t:
        case Var() | Rho() | Pair():
            return None
        case Lam(x, body):
            return _wrap(_step(body), lambda r: Lam(x, r))
        case App(f, a):
            d = _step(a)
            if d is not None:
                return _wrap(d, lambda r: App(f, r))
            if isinstance(f, Lam):
                return [(1.0, subst(f.body, f.binder, a))]
            return _wrap(_step(f), lambda r: App(r, a))
        case UnitaryApp(g, a):
            if isinstance(a, Rho):
                return [(1.0, Rho(mx.evolve(a.rho, _checked_gate(g, a.rho.n))))]
            d = _step(a)
            if d is None and isinstance(a, (Pair, Lam)):
                raise IllFormedRedex(f"unitary applied to {print_term(a)}")
            return _wrap(d, lambda r: UnitaryApp(g, r))
        case Meas(m, a):
            if isinstance(a, Rho):
                if m > a.rho.n:
                    raise IllFormedRedex(f"measuring {m} qubits of a {a.rho.n}-qubit state")
                return [(o.prob, Pair(o.index, m, o.state)) for o in mx.measure_comp(a.rho, m)]
            d = _step(a)
            if d is None and isinstance(a, (Pair, Lam)):
                raise IllFormedRedex(f"measurement applied to {print_term(a)}")
            return _wrap(d, lambda r: Meas(m, r))
        case Tensor(a, b):
            d = _step(a)
            if d is not None:
                return _wrap(d, lambda r: Tensor(r, b))
            d = _step(b)
            if d is not None:
                return _wrap(d, lambda r: Tensor(a, r))
            if isinstance(a, Rho) and isinstance(b, Rho):
                return [(1.0, Rho(mx.tensor_density(a.rho, b.rho)))]
            return None
        case LetCase(x, r, bs, False):
            if isinstance(r, Pair):
                return [(1.0, subst(bs[r.b], x, Rho(r.rho)))]
            d = _step(r)
            if d is None and isinstance(r, (Rho, Lam)):
                raise IllFormedRedex(f"letcase over {print_term(r)}")
            return _wrap(d, lambda s: LetCase(x, s, bs, False))
        case LetCase() | Sum():
            raise IllFormedRedex("construct of the mixed calculus in a prob term")
    raise TypeError(f"not a term: {t!r}")


def _wrap(d, ctx):
    if d is None:
        return None
    return [(p, ctx(r)) for p, r in d]


def _checked_gate(g, n):
    u = gate_op(g)
    if u.m > n:
        raise IllFormedRedex(f"{u.m}-qubit unitary applied to a {n}-qubit state")
    return u


# -- trace trees ----------------------------------------------------------------

@dataclass
class TraceTree:
    term: object
    type: object = None
    children: list = field(default_factory=list)  # of (prob, TraceTree)
    value: bool = False
    exhausted: bool = False

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def leaves(self, prob: float = 1.0):
        """Yield ``(path probability, leaf)`` pairs, left to right."""
        if self.is_leaf:
            yield prob, self
            return
        for p, child in self.children:
            yield from child.leaves(prob * p)

    def nodes(self):
        yield self
        for _, child in self.children:
            yield from child.nodes()

    def edges(self):
        for p, child in self.children:
            yield self, p, child
            yield from child.edges()

    def depth(self) -> int:
        return 1 + max((c.depth() for _, c in self.children), default=0)

    def to_json(self) -> dict:
        d = {
            "term": print_term(self.term),
            "type": None if self.type is None else str(self.type),
            "value": self.value,
            "children": [{"prob": p, "node": c.to_json()} for p, c in self.children],
        }
        if self.exhausted:
            d["fuel_exhausted"] = True
        return d

    def to_dot(self) -> str:
        lines = ["digraph trace {", '  node [shape=box, fontname="monospace"];']
        ids = {}
        for k, node in enumerate(self.nodes()):
            ids[id(node)] = k
            label = print_term(node.term)
            if node.exhausted:
                label += "\n(fuel exhausted)"
            lines.append(f"  n{k} [label={json.dumps(label)}];")
        for parent, p, child in self.edges():
            lines.append(f"  n{ids[id(parent)]} -> n{ids[id(child)]} [label={json.dumps(format_weight(p))}];")
        lines.append("}")
        return "\n".join(lines)

    def to_text(self, indent: str = "") -> str:
        out = [f"{indent}{print_term(self.term)}" + ("  [fuel exhausted]" if self.exhausted else "")]
        for p, child in self.children:
            out.append(f"{indent}  --{format_weight(p)}-->")
            out.append(child.to_text(indent + "    "))
        return "\n".join(out)


def build_trace(t, fuel: int = DEFAULT_FUEL, with_types: bool = True) -> TraceTree:
    """Expand every probabilistic branch of ``t`` into a tree.

    ``fuel`` bounds the number of steps along each root-to-leaf path;
    leaves that run out are flagged ``exhausted``.
    """
    def node(term):
        ty = infer({}, term) if with_types else None
        return TraceTree(term, ty)

    root = node(t)
    stack = [(root, fuel)]
    while stack:
        cur, left = stack.pop()
        d = step_prob(cur.term)
        if d is None:
            cur.value = is_value(cur.term)
            continue
        if left <= 0:
            cur.exhausted = True
            continue
        for p, r in d:
            child = node(r)
            cur.children.append((p, child))
        for _, child in reversed(cur.children):
            stack.append((child, left - 1))
    return root


def final_distribution(tree: TraceTree) -> list:
    """Group the leaves of a complete tree up to alpha-equivalence."""
    groups: list[list] = []
    for p, leaf in tree.leaves():
        if leaf.exhausted:
            raise IncompleteTrace("trace has leaves that ran out of fuel")
        for g in groups:
            if alpha_eq(g[1], leaf.term):
                g[0] += p
                break
        else:
            groups.append([p, leaf.term])
    return [(p, t) for p, t in groups]


def distribution_density(dist) -> mx.DensityMatrix:
    weighted = []
    for p, t in dist:
        if not isinstance(t, Rho):
            raise NonDensityLeaf(f"leaf {print_term(t)} is not a density matrix")
        weighted.append((p, t.rho))
    if len({r.n for _, r in weighted}) > 1:
        raise MixedDimensions("leaves have different qubit counts")
    return mx.mix(weighted)


def sample_run(t, seed: int, fuel: int = DEFAULT_FUEL):
    """Follow one random root-to-leaf path; reproducible for a given seed."""
    rng = random.Random(seed)
    cur = t
    for _ in range(fuel):
        d = step_prob(cur)
        if d is None:
            return cur
        if len(d) == 1:
            cur = d[0][1]
            continue
        u = rng.random() * sum(p for p, _ in d)
        acc = 0.0
        for p, r in d:
            acc += p
            if u < acc:
                cur = r
                break
        else:
            cur = d[-1][1]
    if step_prob(cur) is None:
        return cur
    raise FuelExhausted(f"no value after {fuel} steps")
