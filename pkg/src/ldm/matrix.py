"""Dense complex linear algebra for density matrices.

Everything here works on plain ``numpy`` arrays wrapped in two small
immutable value classes, :class:`DensityMatrix` and :class:`UnitaryOp`.
Qubit ``k`` (1-based) is the ``k``-th Kronecker factor, so basis index
``i`` of an ``n``-qubit register reads its bits most-significant first.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

DEFAULT_TOLERANCE = 1e-9

_tolerance = float(os.environ.get("LDM_TOLERANCE", DEFAULT_TOLERANCE))


def get_tolerance() -> float:
    return _tolerance


def set_tolerance(eps: float) -> None:
    global _tolerance
    if not eps > 0:
        raise ValueError(f"tolerance must be positive, got {eps}")
    _tolerance = float(eps)


class MatrixError(ValueError):
    """Base class for matrix-core failures."""


class ArityError(MatrixError):
    pass


class DimensionMismatch(MatrixError):
    pass


class DensityError(MatrixError):
    """A matrix failed one of the density-matrix checks.

    ``check`` names the failed invariant and ``deviation`` the measured
    amount by which it was missed.
    """

    check = "density"

    def __init__(self, message: str, deviation: float):
        super().__init__(message)
        self.deviation = deviation


class NotSquarePowerOfTwo(DensityError):
    check = "NotSquarePowerOfTwo"


class NotHermitian(DensityError):
    check = "NotHermitian"


class NotPositive(DensityError):
    check = "NotPositive"


class TraceNotOne(DensityError):
    check = "TraceNotOne"


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    arr.setflags(write=False)
    return arr


def _qubits_of(dim: int) -> int | None:
    if dim < 1 or dim & (dim - 1):
        return None
    return dim.bit_length() - 1


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated ``2**n x 2**n`` density matrix.

    Construct through :func:`validate_density` (or :meth:`of`) unless the
    matrix is known-good by construction.
    """

    mat: np.ndarray
    n: int
    _key: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "mat", _frozen(self.mat))
        object.__setattr__(self, "_key", hash((self.n, self.mat.tobytes())))

    @classmethod
    def of(cls, mat, tol: float | None = None) -> DensityMatrix:
        return validate_density(mat, tol)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def __eq__(self, other):
        if not isinstance(other, DensityMatrix):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.mat, other.mat)

    def __hash__(self):
        return self._key

    def __repr__(self):
        return f"DensityMatrix(n={self.n}, mat={self.mat.tolist()!r})"


@dataclass(frozen=True, eq=False)
class UnitaryOp:
    mat: np.ndarray
    m: int

    def __post_init__(self):
        object.__setattr__(self, "mat", _frozen(self.mat))

    @classmethod
    def of(cls, mat, tol: float | None = None) -> UnitaryOp:
        tol = get_tolerance() if tol is None else tol
        arr = np.asarray(mat, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionMismatch(f"unitary must be square, got shape {arr.shape}")
        m = _qubits_of(arr.shape[0])
        if m is None:
            raise DimensionMismatch(f"unitary dimension {arr.shape[0]} is not a power of two")
        dev = np.abs(arr.conj().T @ arr - np.eye(arr.shape[0])).max()
        if dev > tol:
            raise MatrixError(f"matrix is not unitary (deviation {dev:.3g})")
        return cls(arr, m)

    def __eq__(self, other):
        if not isinstance(other, UnitaryOp):
            return NotImplemented
        return self.m == other.m and np.array_equal(self.mat, other.mat)

    def __hash__(self):
        return hash((self.m, self.mat.tobytes()))

    def __repr__(self):
        return f"UnitaryOp(m={self.m})"


@dataclass(frozen=True)
class MeasurementOutcome:
    prob: float
    index: int
    state: DensityMatrix


def tensor(a, b) -> np.ndarray:
    """Kronecker product of two matrices (arrays, densities or unitaries)."""
    return np.kron(_raw(a), _raw(b))


def _raw(x) -> np.ndarray:
    if isinstance(x, (DensityMatrix, UnitaryOp)):
        return x.mat
    return np.asarray(x, dtype=complex)


def tensor_density(a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    return DensityMatrix(np.kron(a.mat, b.mat), a.n + b.n)


def tensor_unitary(a: UnitaryOp, b: UnitaryOp) -> UnitaryOp:
    return UnitaryOp(np.kron(a.mat, b.mat), a.m + b.m)


def extend(u: UnitaryOp, n: int) -> UnitaryOp:
    """Pad ``u`` with identity on the right so it acts on ``n`` qubits."""
    if u.m > n:
        raise ArityError(f"cannot apply a {u.m}-qubit operator to {n} qubits")
    if u.m == n:
        return u
    return UnitaryOp(np.kron(u.mat, np.eye(2 ** (n - u.m))), n)


def evolve(rho: DensityMatrix, u: UnitaryOp) -> DensityMatrix:
    big = extend(u, rho.n).mat
    out = big @ rho.mat @ big.conj().T
    return DensityMatrix(_hermitize(out), rho.n)


def projector(i: int, m: int, n: int) -> np.ndarray:
    """The basis projector onto ``|i>`` of the first ``m`` qubits, padded to ``n``."""
    p = np.zeros((2**m, 2**m), dtype=complex)
    p[i, i] = 1
    return np.kron(p, np.eye(2 ** (n - m)))


def measure_comp(rho: DensityMatrix, m: int, tol: float | None = None) -> list[MeasurementOutcome]:
    """Measure the first ``m`` qubits of ``rho`` in the computational basis.

    Outcomes whose probability is at most ``tol`` are dropped.
    """
    tol = get_tolerance() if tol is None else tol
    if m > rho.n:
        raise ArityError(f"cannot measure {m} qubits of a {rho.n}-qubit state")
    block = 2 ** (rho.n - m)
    outcomes = []
    for i in range(2**m):
        sl = slice(i * block, (i + 1) * block)
        # pi_i rho pi_i keeps only the i-th diagonal block
        p = float(np.trace(rho.mat[sl, sl]).real)
        if p <= tol:
            continue
        post = np.zeros_like(rho.mat)
        post[sl, sl] = rho.mat[sl, sl] / p
        outcomes.append(MeasurementOutcome(p, i, DensityMatrix(_hermitize(post), rho.n)))
    return outcomes


def dephase(rho: DensityMatrix, m: int) -> np.ndarray:
    """Sum of ``pi_i rho pi_i`` over all outcomes of the first ``m`` qubits."""
    return sum(projector(i, m, rho.n) @ rho.mat @ projector(i, m, rho.n) for i in range(2**m))


def _hermitize(a: np.ndarray) -> np.ndarray:
    return (a + a.conj().T) / 2


def validate_density(mat, tol: float | None = None) -> DensityMatrix:
    tol = get_tolerance() if tol is None else tol
    arr = np.asarray(mat, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise NotSquarePowerOfTwo(f"matrix is not square: shape {arr.shape}", float("inf"))
    n = _qubits_of(arr.shape[0])
    if n is None:
        raise NotSquarePowerOfTwo(
            f"dimension {arr.shape[0]} is not a power of two", float(arr.shape[0])
        )
    herm_dev = float(np.abs(arr - arr.conj().T).max())
    if herm_dev > tol:
        raise NotHermitian(f"matrix is not Hermitian (max |A - A^dagger| = {herm_dev:.3g})", herm_dev)
    herm = _hermitize(arr)
    low = float(np.linalg.eigvalsh(herm).min())
    if low < -tol:
        raise NotPositive(f"matrix is not positive (eigenvalue {low:.6g})", -low)
    tr = complex(np.trace(arr))
    tr_dev = abs(tr - 1)
    if tr_dev > tol:
        raise TraceNotOne(f"trace is {tr.real:.6g}, not 1", tr_dev)
    return DensityMatrix(herm, n)


def approx_eq(a, b, tol: float | None = None) -> bool:
    tol = get_tolerance() if tol is None else tol
    x, y = _raw(a), _raw(b)
    if x.shape != y.shape:
        raise DimensionMismatch(f"cannot compare shapes {x.shape} and {y.shape}")
    return bool(np.abs(x - y).max(initial=0.0) <= tol)


def max_deviation(a, b) -> float:
    x, y = _raw(a), _raw(b)
    if x.shape != y.shape:
        raise DimensionMismatch(f"cannot compare shapes {x.shape} and {y.shape}")
    return float(np.abs(x - y).max(initial=0.0))


def mix(weighted: list[tuple[float, DensityMatrix]]) -> DensityMatrix:
    """Weighted sum of equal-size densities, validated."""
    dims = {d.n for _, d in weighted}
    if len(dims) != 1:
        raise DimensionMismatch(f"cannot mix densities of sizes {sorted(dims)}")
    total = sum(p * d.mat for p, d in weighted)
    return validate_density(total, tol=max(get_tolerance(), 1e-7))


def partial_trace_front(rho: DensityMatrix, k: int) -> DensityMatrix:
    """Trace out the first ``k`` qubits."""
    if k > rho.n:
        raise ArityError(f"cannot trace out {k} of {rho.n} qubits")
    rest = rho.n - k
    t = rho.mat.reshape(2**k, 2**rest, 2**k, 2**rest)
    return DensityMatrix(np.einsum("iaib->ab", t), rest)


# -- built-in states and gates ---------------------------------------------

def ket(bits: str) -> DensityMatrix:
    """Pure density ``|bits><bits|``; bits may use ``0``, ``1``, ``+``, ``-``."""
    one = {
        "0": np.array([1, 0], dtype=complex),
        "1": np.array([0, 1], dtype=complex),
        "+": np.array([1, 1], dtype=complex) / math.sqrt(2),
        "-": np.array([1, -1], dtype=complex) / math.sqrt(2),
    }
    vec = reduce(np.kron, (one[c] for c in bits))
    return DensityMatrix(np.outer(vec, vec.conj()), len(bits))


def bell00() -> DensityMatrix:
    v = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)
    return DensityMatrix(np.outer(v, v.conj()), 2)


_S2 = 1 / math.sqrt(2)

GATES: dict[str, np.ndarray] = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
}


def gate(name: str, n: int | None = None) -> UnitaryOp:
    """Look up a built-in gate; ``I`` takes its qubit count ``n`` (default 1)."""
    if name == "I":
        k = 1 if n is None else n
        return UnitaryOp(np.eye(2**k), k)
    if name not in GATES:
        raise KeyError(f"unknown gate {name!r}")
    mat = GATES[name]
    return UnitaryOp(mat, _qubits_of(mat.shape[0]))
