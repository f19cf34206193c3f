"""Random closed well-typed terms and random density matrices.

Generation is type-directed and respects affinity: each variable is
handed out at most once along any branch, while letcase branches and sum
addends draw from the same pool.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from . import matrix as mx
from .syntax import (
    MIXED, PROB, App, Lam, LetCase, Meas, Named, Pair, Rho, Sum, Tensor, TensorG,
    UnitaryApp, Var,
)
from .typecheck import Arrow, MeasResult, Qubits


def random_density(n: int, rng: random.Random, rank: int | None = None) -> mx.DensityMatrix:
    """``A A^dagger / tr`` for a complex Gaussian ``A`` of shape ``2^n x rank``."""
    g = np.random.default_rng(rng.getrandbits(64))
    d = 2**n
    k = rank or g.integers(1, d + 1)
    a = g.normal(size=(d, k)) + 1j * g.normal(size=(d, k))
    m = a @ a.conj().T
    return mx.validate_density(m / np.trace(m).real)


_GATES_1 = [Named("X"), Named("Y"), Named("Z"), Named("H"), Named("I")]
_GATES_2 = [
    Named("CNOT"), TensorG(Named("H"), Named("I")), TensorG(Named("I"), Named("X")),
    TensorG(Named("Z"), Named("H")), TensorG(Named("Y"), Named("Y")),
]
_WEIGHTS = [(0.5, 0.5), (0.25, 0.75), (1 / 3, 2 / 3), (0.125, 0.875)]


@dataclass
class TermGen:
    rng: random.Random
    calculus: str = PROB
    max_depth: int = 6
    max_qubits: int = 2
    _counter: int = field(default=0, init=False)

    @property
    def mixed(self) -> bool:
        return self.calculus == MIXED

    def fresh(self) -> str:
        self._counter += 1
        return f"v{self._counter}"

    def base_type(self):
        return Qubits(self.rng.randint(1, self.max_qubits))

    # -- leaves
    def density(self, n: int) -> mx.DensityMatrix:
        r = self.rng.random()
        if r < 0.4:
            return mx.ket("".join(self.rng.choice("01") for _ in range(n)))
        if r < 0.6:
            return mx.ket("".join(self.rng.choice("+-01") for _ in range(n)))
        return random_density(n, self.rng)

    def _take(self, pool: dict, ty):
        names = [x for x, a in pool.items() if a == ty]
        if not names:
            return None
        x = self.rng.choice(names)
        del pool[x]
        return Var(x)

    # -- type-directed generation
    def term(self, ty, pool: dict, depth: int):
        """A term of type ``ty`` using variables from ``pool`` (consumed)."""
        if self.rng.random() < 0.35:
            v = self._take(pool, ty)
            if v is not None:
                return v
        match ty:
            case Qubits(n):
                return self._qubits(n, pool, depth)
            case MeasResult(m, n):
                return self._meas(m, n, pool, depth)
            case Arrow(a, b):
                return self._arrow(a, b, pool, depth)
        raise TypeError(ty)

    def _qubits(self, n, pool, depth):
        if depth <= 0:
            return self._take(pool, Qubits(n)) or Rho(self.density(n))
        opts = ["rho", "unitary", "beta", "letcase", "app"]
        if n >= 2:
            opts.append("tensor")
        if self.mixed:
            opts.append("sum")
        kind = self.rng.choice(opts)
        d = depth - 1
        match kind:
            case "rho":
                return Rho(self.density(n))
            case "unitary":
                g = self.rng.choice(_GATES_2 if n >= 2 and self.rng.random() < 0.5 else _GATES_1)
                return UnitaryApp(g, self.term(Qubits(n), pool, d))
            case "tensor":
                k = self.rng.randint(1, n - 1)
                left = self.term(Qubits(k), pool, d)
                return Tensor(left, self.term(Qubits(n - k), pool, d))
            case "beta":
                a = self.base_type()
                x = self.fresh()
                f = Lam(x, self._with(pool, x, a, Qubits(n), d))
                return App(f, self.term(a, pool, d))
            case "app":
                a = self.base_type()
                f = self.term(Arrow(a, Qubits(n)), pool, d)
                return App(f, self.term(a, pool, d))
            case "letcase":
                return self._letcase(Qubits(n), pool, d)
            case "sum":
                return self._sum(Qubits(n), pool, d)
        raise AssertionError(kind)

    def _meas(self, m, n, pool, depth):
        if not self.mixed and self.rng.random() < 0.2:
            return Pair(self.rng.randrange(2**m), m, self.density(n))
        return Meas(m, self.term(Qubits(n), pool, max(depth - 1, 0)))

    def _arrow(self, a, b, pool, depth):
        d = max(depth - 1, 0)
        r = self.rng.random()
        if depth > 1 and r < 0.25:
            return self._letcase(Arrow(a, b), pool, d)
        if depth > 1 and self.mixed and r < 0.4:
            return self._sum(Arrow(a, b), pool, d)
        x = self.fresh()
        return Lam(x, self._with(pool, x, a, b, d))

    def _with(self, pool, x, a, ty, depth):
        inner = {**pool, x: a}
        body = self.term(ty, inner, depth)
        for y in list(pool):
            if y not in inner:
                del pool[y]
        return body

    def _letcase(self, ty, pool, depth):
        k = self.rng.randint(1, self.max_qubits)
        m = self.rng.randint(1, k)
        scrut = self.term(MeasResult(m, k), pool, depth)
        x = self.fresh()
        shared = dict(pool)
        arms = []
        for _ in range(2**m):
            arm_pool = {**shared, x: Qubits(k)}
            arms.append(self.term(ty, arm_pool, depth))
            for y in list(pool):
                if y not in arm_pool:
                    pool.pop(y, None)
        return LetCase(x, scrut, tuple(arms), self.mixed)

    def _sum(self, ty, pool, depth):
        ws = self.rng.choice(_WEIGHTS)
        shared = dict(pool)
        adds = []
        for w in ws:
            add_pool = dict(shared)
            adds.append((w, self.term(ty, add_pool, depth)))
            for y in list(pool):
                if y not in add_pool:
                    pool.pop(y, None)
        return Sum(tuple(adds))

    # -- entry points
    def closed(self, ty=None):
        ty = ty or self.base_type()
        return self.term(ty, {}, self.rng.randint(1, self.max_depth))

    def open(self, x: str, a, ty=None):
        """A term of base type that may mention ``x : a``."""
        ty = ty or self.base_type()
        return self.term(ty, {x: a}, self.rng.randint(1, self.max_depth))


def random_closed_term(seed: int, calculus: str = PROB, max_depth: int = 6, ty=None):
    return TermGen(random.Random(seed), calculus, max_depth).closed(ty)
