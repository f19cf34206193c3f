"""Triplet-set semantics and its density-matrix flattening.

``interp`` maps a term and a valuation to a finite list of triplets
``(p, b, e)``: a probability, a measurement tag (``None`` stands for the
empty tag) and an element that is either a density matrix or a closure.
``fsem`` sums those elements with their weights; at arrow types the sum is
kept symbolic and evaluated only when applied.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matrix as mx
from .printer import format_density, print_term
from .syntax import (
    App, Lam, LetCase, Meas, Pair, Rho, Sum, Tensor, UnitaryApp, Var, gate_op,
)
from .typecheck import Arrow, MeasResult, Qubits

Tag = int | None


class DenotationError(Exception):
    pass


class ValuationMismatch(DenotationError):
    pass


class UnapplicableElement(DenotationError):
    pass


class ShapeMismatch(DenotationError):
    pass


@dataclass(frozen=True)
class Mat:
    rho: mx.DensityMatrix


@dataclass(frozen=True, eq=False)
class Fun:
    """The element ``[] -> interp(body, theta + {binder: []})``."""

    binder: str
    body: object
    theta: dict = field(repr=False)
    merge: bool = True

    def __call__(self, b: Tag, e) -> "TripletSet":
        return TripletSet(self.raw(b, e), merge=False)

    def raw(self, b: Tag, e) -> list:
        return _interp_list(self.body, {**self.theta, self.binder: (b, e)}, self.merge)

    def describe(self) -> str:
        return print_term(Lam(self.binder, self.body))


DenElement = Mat | Fun


@dataclass(frozen=True)
class Triplet:
    p: float
    b: Tag
    e: DenElement


def _tag_key(b: Tag) -> int:
    return -1 if b is None else b


def _elem_key(e) -> str:
    return format_density(e.rho) if isinstance(e, Mat) else e.describe()


class TripletSet:
    """A finite weighted set of triplets in a fixed, deterministic order."""

    def __init__(self, triplets, merge: bool = True, tol: float | None = None):
        items = list(triplets)
        if merge:
            items = _merge(items, mx.get_tolerance() if tol is None else tol)
        self.triplets = tuple(sorted(items, key=lambda t: (_tag_key(t.b), _elem_key(t.e))))

    def __iter__(self):
        return iter(self.triplets)

    def __len__(self):
        return len(self.triplets)

    def __repr__(self):
        inner = ", ".join(f"({t.p:.6g}, {t.b}, {_elem_key(t.e)})" for t in self.triplets)
        return f"TripletSet({{{inner}}})"

    @property
    def weight(self) -> float:
        return weight(self)

    def equals(self, other: "TripletSet", tol: float = 1e-9) -> bool:
        """Set equality under the merge convention; matrix elements only."""
        a = _merge(list(self), tol)
        b = _merge(list(other), tol)
        if any(isinstance(t.e, Fun) for t in a + b):
            raise TypeError("equality of function elements is not decidable")
        if len(a) != len(b):
            return False
        unused = list(b)
        for t in a:
            for k, u in enumerate(unused):
                if t.b == u.b and abs(t.p - u.p) <= tol and mx.approx_eq(t.e.rho.mat, u.e.rho.mat, tol):
                    del unused[k]
                    break
            else:
                return False
        return True

    def to_json(self) -> list:
        out = []
        for t in self.triplets:
            if isinstance(t.e, Mat):
                e = {
                    "kind": "mat",
                    "n": t.e.rho.n,
                    "entries": [[[float(z.real), float(z.imag)] for z in row] for row in t.e.rho.mat],
                }
            else:
                e = {"kind": "fun", "term": t.e.describe()}
            out.append({"p": t.p, "b": t.b, "e": e})
        return out


def _merge(items, tol):
    out: list[Triplet] = []
    for t in items:
        if isinstance(t.e, Mat):
            for k, u in enumerate(out):
                if isinstance(u.e, Mat) and u.b == t.b and mx.approx_eq(u.e.rho.mat, t.e.rho.mat, tol):
                    out[k] = Triplet(u.p + t.p, u.b, u.e)
                    break
            else:
                out.append(t)
        else:
            out.append(t)
    return out


def weight(s) -> float:
    return float(sum(t.p for t in s))


def term_weight(t, theta: dict | None = None) -> float:
    """``weight(interp(t, theta))`` without building the ordered set."""
    return weight(_interp_list(t, {} if theta is None else theta, True))


def check_P(b: Tag, a) -> bool:
    return not (isinstance(a, MeasResult) and b is None)


# -- interpretation -------------------------------------------------------------

def interp(t, theta: dict | None = None, merge: bool = True) -> TripletSet:
    """Triplet-set interpretation of ``t`` under ``theta``.

    ``theta`` maps variable names to ``(tag, element)``.  With
    ``merge=False`` triplets sharing tag and matrix are kept apart.
    """
    theta = {} if theta is None else theta
    return TripletSet(_interp_list(t, theta, merge), merge=False)


_CLOSED_CACHE: dict = {}


def _interp_list(t, theta, merge) -> list:
    # closed terms recur across the reducts of one program; the returned
    # lists are shared and must not be mutated by callers
    if not theta:
        key = (t, merge, mx.get_tolerance())
        hit = _CLOSED_CACHE.get(key)
        if hit is not None:
            return hit
    out = _interp(t, theta, merge)
    if merge:
        out = _merge(out, mx.get_tolerance())
    if not theta:
        if len(_CLOSED_CACHE) > 50_000:
            _CLOSED_CACHE.clear()
        _CLOSED_CACHE[key] = out
    return out


def _mats(s, what):
    for t in s:
        if not isinstance(t.e, Mat):
            raise ShapeMismatch(f"{what} needs a density matrix, got a function")
        yield t.p, t.b, t.e.rho


def _interp(t, theta, merge) -> list:
    match t:
        case Var(x):
            if x not in theta:
                raise ValuationMismatch(f"no value for {x}")
            b, e = theta[x]
            return [Triplet(1.0, b, e)]
        case Lam(x, body):
            return [Triplet(1.0, None, Fun(x, body, theta, merge))]
        case Rho(r):
            return [Triplet(1.0, None, Mat(r))]
        case Pair(b, _, r):
            return [Triplet(1.0, b, Mat(r))]
        case App(f, a):
            args = list(_interp_list(a, theta, merge))
            out = []
            for fq in _interp_list(f, theta, merge):
                if not isinstance(fq.e, Fun):
                    raise UnapplicableElement("a density matrix is not a function")
                for ap in args:
                    for h in fq.e.raw(ap.b, ap.e):
                        out.append(Triplet(ap.p * fq.p * h.p, h.b, h.e))
            return out
        case UnitaryApp(g, a):
            u = gate_op(g)
            out = []
            for p, _, r in _mats(_interp_list(a, theta, merge), "a unitary"):
                if u.m > r.n:
                    raise ShapeMismatch(f"{u.m}-qubit unitary on a {r.n}-qubit state")
                out.append(Triplet(p, None, Mat(mx.evolve(r, u))))
            return out
        case Meas(m, a):
            out = []
            for p, _, r in _mats(_interp_list(a, theta, merge), "a measurement"):
                if m > r.n:
                    raise ShapeMismatch(f"measuring {m} qubits of a {r.n}-qubit state")
                for o in mx.measure_comp(r, m):
                    out.append(Triplet(p * o.prob, o.index, Mat(o.state)))
            return out
        case Tensor(a, b):
            right = list(_mats(_interp_list(b, theta, merge), "a tensor"))
            out = []
            for p, _, r in _mats(_interp_list(a, theta, merge), "a tensor"):
                for q, _, s in right:
                    out.append(Triplet(p * q, None, Mat(mx.tensor_density(r, s))))
            return out
        case LetCase(x, s, bs, _):
            out = []
            for p, b, r in _mats(_interp_list(s, theta, merge), "letcase"):
                if b is None or not 0 <= b < len(bs):
                    raise ShapeMismatch(f"letcase scrutinee carries tag {b}")
                for h in _interp_list(bs[b], {**theta, x: (None, Mat(r))}, merge):
                    out.append(Triplet(p * h.p, h.b, h.e))
            return out
        case Sum(adds):
            out = []
            for p, s in adds:
                out.extend(Triplet(p * h.p, h.b, h.e) for h in _interp_list(s, theta, merge))
            return out
    raise TypeError(f"not a term: {t!r}")


# -- density-matrix flattening --------------------------------------------------

@dataclass(frozen=True, eq=False)
class FunctionDenotation:
    """A weighted sum of closures, floored lazily: ``[] -> sum p_i fsem(body_i)``."""

    parts: tuple  # of (weight, Fun)

    def apply(self, e, b: Tag = None):
        if isinstance(e, mx.DensityMatrix):
            e = Mat(e)
        results = [(p, _floor(f.raw(b, e))) for p, f in self.parts]
        return _combine(results)

    __call__ = apply

    def describe(self) -> str:
        return " + ".join(f"{p:.6g}*({f.describe()})" for p, f in self.parts)


def _floor(s):
    return _combine([(t.p, t.e.rho if isinstance(t.e, Mat) else FunctionDenotation(((1.0, t.e),)))
                     for t in s])


def _combine(weighted):
    if all(isinstance(v, mx.DensityMatrix) for _, v in weighted):
        if len({v.n for _, v in weighted}) > 1:
            raise ShapeMismatch("summing densities of different sizes")
        return mx.mix(weighted)
    if any(isinstance(v, mx.DensityMatrix) for _, v in weighted):
        raise ShapeMismatch("summing a density matrix with a function")
    parts = tuple((p * q, f) for p, v in weighted for q, f in v.parts)
    return FunctionDenotation(parts)


def fsem(t, theta: dict | None = None):
    """Density matrix of ``t`` (base types) or a lazy function (arrow types)."""
    return _floor(_interp_list(t, {} if theta is None else theta, True))


def fsem_matrix(t, theta: dict | None = None) -> np.ndarray:
    v = fsem(t, theta)
    if not isinstance(v, mx.DensityMatrix):
        raise ShapeMismatch("term denotes a function, not a density matrix")
    return v.mat


# -- type interpretation --------------------------------------------------------

def standard_densities(n: int) -> list:
    """Probe states on ``n`` qubits: |0..0>, |1..1>, |+..+> and a skewed state."""
    rho = mx.validate_density(np.array([[3 / 4, np.sqrt(3) / 4], [np.sqrt(3) / 4, 1 / 4]], dtype=complex))
    skew = rho
    for _ in range(n - 1):
        skew = mx.tensor_density(skew, mx.ket("0"))
    return [mx.ket("0" * n), mx.ket("1" * n), mx.ket("+" * n), skew]


def probe_terms(a) -> list:
    """Closed terms of type ``a`` whose interpretations serve as probes."""
    match a:
        case Qubits(n):
            return [Rho(r) for r in standard_densities(n)]
        case MeasResult(m, n):
            return [Meas(m, Rho(r)) for r in standard_densities(n)]
        case Arrow(dom, cod):
            out = [Lam("_probe", body) for body in probe_terms(cod)]
            if dom == cod and isinstance(dom, Qubits):
                out.append(Lam("_probe", Var("_probe")))
            return out
    raise TypeError(f"not a type: {a!r}")


def standard_probes(a) -> list:
    """``(tag, element)`` inputs for membership checks at type ``a``."""
    out = []
    for t in probe_terms(a):
        out.extend((h.b, h.e) for h in interp(t))
    return out


def check_tsem_membership(e, a, probes=None, tol: float | None = None) -> bool:
    """Semi-decide ``e`` in the interpretation of ``a``.

    Functions are tested on ``probes`` (default: :func:`standard_probes`
    of the domain); inputs violating ``P(b, dom)`` are skipped.
    """
    tol = mx.get_tolerance() if tol is None else tol
    match a:
        case Qubits(n) | MeasResult(_, n):
            if not isinstance(e, Mat):
                return False
            try:
                mx.validate_density(e.rho.mat, tol)
            except mx.DensityError:
                return False
            return e.rho.n == n
        case Arrow(dom, cod):
            if not isinstance(e, Fun):
                return False
            probes = standard_probes(dom) if probes is None else probes
            for b, x in probes:
                if not check_P(b, dom) or not check_tsem_membership(x, dom, tol=tol):
                    continue
                out = e(b, x)
                if abs(weight(out) - 1) > 10 * tol:
                    return False
                for h in out:
                    if not check_P(h.b, cod) or not check_tsem_membership(h.e, cod, tol=tol):
                        return False
            return True
    raise TypeError(f"not a type: {a!r}")


def check_valuation(theta: dict, ctx: dict, probes=None) -> bool:
    """``theta |= ctx``: every variable of ``ctx`` is bound to a member of its type."""
    for x, a in ctx.items():
        if x not in theta:
            return False
        b, e = theta[x]
        if not check_P(b, a) or not check_tsem_membership(e, a, probes):
            return False
    return True


def require_valuation(theta: dict, ctx: dict) -> None:
    if not check_valuation(theta, ctx):
        raise ValuationMismatch("valuation does not satisfy the context")
