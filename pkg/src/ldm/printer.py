"""Concrete-syntax printing.

Output always re-parses to an alpha-equivalent term.  Densities equal
to a computational-basis ket, ``|+>``, ``|->`` or the Bell state print
with their shorthand; anything else prints as a ``rho[n]{...}`` literal
with round-trippable floats.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import matrix as mx
from .syntax import (
    App, Lam, LetCase, Literal, Meas, Named, Pair, Rho, Sum, Tensor, TensorG,
    UnitaryApp, Var,
)

_SHORTHAND_TOL = 1e-12


def format_weight(p: float) -> str:
    """Shortest faithful rendering of a probability: a small fraction if exact."""
    frac = Fraction(p).limit_denominator(1024)
    if abs(float(frac) - p) <= _SHORTHAND_TOL:
        if frac.denominator == 1:
            return str(frac.numerator)
        return f"{frac.numerator}/{frac.denominator}"
    return repr(float(p))


def format_complex(z: complex) -> str:
    re, im = float(z.real), float(z.imag)
    if im == 0:
        return repr(re)
    if re == 0:
        return f"{im!r}i"
    sign = "-" if im < 0 or (im == 0 and math.copysign(1, im) < 0) else "+"
    return f"{re!r}{sign}{abs(im)!r}i"


def _matrix_body(mat: np.ndarray) -> str:
    rows = [", ".join(format_complex(z) for z in row) for row in mat]
    return "{ " + " ; ".join(rows) + " }"


def density_shorthand(rho: mx.DensityMatrix) -> str | None:
    mat = rho.mat
    if rho.n == 0:
        return None
    diag = np.diag(mat)
    off = mat - np.diag(diag)
    if np.abs(off).max(initial=0) <= _SHORTHAND_TOL:
        hot = np.flatnonzero(np.abs(diag - 1) <= _SHORTHAND_TOL)
        if len(hot) == 1 and np.abs(np.delete(diag, hot[0])).max(initial=0) <= _SHORTHAND_TOL:
            return "|" + format(int(hot[0]), f"0{rho.n}b") + ">"
    if rho.n == 1:
        for sym in "+-":
            if mx.max_deviation(mat, mx.ket(sym)) <= _SHORTHAND_TOL:
                return f"|{sym}>"
    if rho.n == 2 and mx.max_deviation(mat, mx.bell00()) <= _SHORTHAND_TOL:
        return "bell00"
    return None


@lru_cache(maxsize=65536)
def format_density(rho: mx.DensityMatrix) -> str:
    short = density_shorthand(rho)
    if short is not None:
        return short
    return f"rho[{rho.n}]" + _matrix_body(rho.mat)


def format_gate(g) -> str:
    match g:
        case Named("I", n):
            return "I" if n is None else f"I({n})"
        case Named(name, _):
            return name
        case Literal(op):
            return f"unitary[{op.m}]" + _matrix_body(op.mat)
        case TensorG(a, b):
            right = format_gate(b)
            if isinstance(b, TensorG):
                right = f"({right})"
            return f"{format_gate(a)}*{right}"
    raise TypeError(f"not a gate expression: {g!r}")


_ATOMS = (Var, Rho, Pair, Sum)


def _paren(s: str) -> str:
    return f"({s})"


def print_term(t, canonical_names: bool = False) -> str:
    """Render ``t`` in concrete syntax.

    With ``canonical_names`` every binder is renamed by its binding depth,
    so alpha-equivalent terms print identically.
    """
    return _pr(t, {} if canonical_names else None, 0)


def sort_key(t) -> str:
    return print_term(t, canonical_names=True)


def _bind(env, x, depth):
    if env is None:
        return x, None
    name = f"_{depth}"
    return name, {**env, x: name}


def _pr(t, env, depth):
    match t:
        case Var(x):
            if env is not None:
                return env.get(x, x)
            return x
        case Rho(r):
            return format_density(r)
        case Pair(b, m, r):
            return f"pair({b}, {m}, {format_density(r)})"
        case Lam(x, body):
            x2, env2 = _bind(env, x, depth)
            return f"\\{x2}. {_pr(body, env2, depth + 1)}"
        case App(f, a):
            fs = _pr(f, env, depth)
            if not isinstance(f, (*_ATOMS, App)):
                fs = _paren(fs)
            return f"{fs} {_arg(a, env, depth)}"
        case UnitaryApp(g, a):
            return f"U[{format_gate(g)}] {_arg(a, env, depth)}"
        case Meas(m, a):
            return f"meas[{m}] {_arg(a, env, depth)}"
        case Tensor(l, r):
            ls = _pr(l, env, depth)
            if isinstance(l, Lam):
                ls = _paren(ls)
            rs = _pr(r, env, depth)
            if isinstance(r, (Lam, Tensor)):
                rs = _paren(rs)
            return f"{ls} >< {rs}"
        case LetCase(x, s, bs, star):
            x2, env2 = _bind(env, x, depth)
            kw = "letcase*" if star else "letcase"
            arms = " ; ".join(_pr(b, env2, depth + 1) for b in bs)
            return f"{kw} {x2} = {_pr(s, env, depth)} in {{ {arms} }}"
        case Sum(adds):
            arms = " ; ".join(f"{format_weight(p)}: {_pr(s, env, depth)}" for p, s in adds)
            return f"sum {{ {arms} }}"
    raise TypeError(f"not a term: {t!r}")


def _arg(a, env, depth):
    s = _pr(a, env, depth)
    return s if isinstance(a, _ATOMS) else _paren(s)
