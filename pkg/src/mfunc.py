# Standard library imports
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

# Third-party imports
import numpy as np
import scipy.linalg

# Local imports
from src.settings import settings
from src.look_and_feel import warning
from src.linalg import (CMatrix, PreconditionError, SingularMatrixError, as_cmatrix, frobenius_norm,
                        inverse, inverse_batch, matrix_exp, operator_norm, singular_values_batch)


class SpectrumProximityError(ValueError):
    def __init__(self, message: str, smin: float):
        super().__init__(message)
        self.smin = smin


class DifferentiationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Scalar expressions: the entries of an Entrywise function
# ---------------------------------------------------------------------------

class ScalarExpr:
    """Expression tree over literals, z, +, -, *, unary minus and exp. Always entire."""

    def evaluate(self, z):
        raise NotImplementedError

    def diff(self) -> "ScalarExpr":
        raise NotImplementedError

    def is_constant(self) -> bool:
        raise NotImplementedError


def _full(z, value: complex):
    if np.ndim(z) == 0:
        return complex(value)
    return np.full(np.shape(z), value, dtype=complex)


@dataclass(frozen=True)
class Const(ScalarExpr):
    value: complex

    def evaluate(self, z):
        return _full(z, self.value)

    def diff(self) -> ScalarExpr:
        return ZERO

    def is_constant(self) -> bool:
        return True


@dataclass(frozen=True)
class Var(ScalarExpr):
    def evaluate(self, z):
        return np.asarray(z, dtype=complex) if np.ndim(z) else complex(z)

    def diff(self) -> ScalarExpr:
        return ONE

    def is_constant(self) -> bool:
        return False


ZERO = Const(0j)
ONE = Const(1 + 0j)


def _is_zero(e: ScalarExpr) -> bool:
    return isinstance(e, Const) and e.value == 0


def _is_one(e: ScalarExpr) -> bool:
    return isinstance(e, Const) and e.value == 1


def add(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr:
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return Add(a, b)


def sub(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr:
    if _is_zero(b):
        return a
    if _is_zero(a):
        return neg(b)
    return Sub(a, b)


def mul(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr:
    if _is_zero(a) or _is_zero(b):
        return ZERO
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    return Mul(a, b)


def neg(a: ScalarExpr) -> ScalarExpr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


@dataclass(frozen=True)
class Add(ScalarExpr):
    left: ScalarExpr
    right: ScalarExpr

    def evaluate(self, z):
        return self.left.evaluate(z) + self.right.evaluate(z)

    def diff(self) -> ScalarExpr:
        return add(self.left.diff(), self.right.diff())

    def is_constant(self) -> bool:
        return self.left.is_constant() and self.right.is_constant()


@dataclass(frozen=True)
class Sub(ScalarExpr):
    left: ScalarExpr
    right: ScalarExpr

    def evaluate(self, z):
        return self.left.evaluate(z) - self.right.evaluate(z)

    def diff(self) -> ScalarExpr:
        return sub(self.left.diff(), self.right.diff())

    def is_constant(self) -> bool:
        return self.left.is_constant() and self.right.is_constant()


@dataclass(frozen=True)
class Mul(ScalarExpr):
    left: ScalarExpr
    right: ScalarExpr

    def evaluate(self, z):
        return self.left.evaluate(z) * self.right.evaluate(z)

    def diff(self) -> ScalarExpr:
        return add(mul(self.left.diff(), self.right), mul(self.left, self.right.diff()))

    def is_constant(self) -> bool:
        return self.left.is_constant() and self.right.is_constant()


@dataclass(frozen=True)
class Neg(ScalarExpr):
    arg: ScalarExpr

    def evaluate(self, z):
        return -self.arg.evaluate(z)

    def diff(self) -> ScalarExpr:
        return neg(self.arg.diff())

    def is_constant(self) -> bool:
        return self.arg.is_constant()


@dataclass(frozen=True)
class Exp(ScalarExpr):
    arg: ScalarExpr

    def evaluate(self, z):
        with np.errstate(over='ignore', invalid='ignore'):
            return np.exp(self.arg.evaluate(z))

    def diff(self) -> ScalarExpr:
        return mul(self.arg.diff(), self)

    def is_constant(self) -> bool:
        return self.arg.is_constant()


# ---------------------------------------------------------------------------
# Matrix-valued analytic functions
# ---------------------------------------------------------------------------

class MatrixFunction:
    """
    An analytic map from a planar domain into n x n complex matrices.

    Subclasses provide eval and, where a closed form exists, derivative.
    eval_many works on a whole chunk of points and flags the points where
    the function cannot be evaluated instead of raising.
    """

    @property
    def n(self) -> int:
        raise NotImplementedError

    def eval(self, z: complex) -> CMatrix:
        raise NotImplementedError

    def eval_many(self, zs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        zs = np.asarray(zs, dtype=complex)
        values = np.full((zs.shape[0], self.n, self.n), np.nan + 0j, dtype=complex)
        flags = np.zeros(zs.shape[0], dtype=bool)
        for i, z in enumerate(zs):
            try:
                values[i] = self.eval(complex(z))
            except (SpectrumProximityError, SingularMatrixError):
                flags[i] = True
        return _flag_nonfinite(values, flags)

    def domain_distance(self, z: complex) -> float:
        """Lower bound on the distance from z to the nearest singularity; inf for entire functions."""
        return math.inf

    def derivative(self, z: complex, k: int) -> CMatrix:
        return cauchy_derivative(self, z, k)

    def beyond_radius(self, z: complex) -> bool:
        return False

    def beyond_radius_many(self, zs: np.ndarray) -> np.ndarray:
        return np.zeros(np.shape(zs), dtype=bool)


def _flag_nonfinite(values: np.ndarray, flags: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    bad = ~np.all(np.isfinite(values.reshape(values.shape[0], -1)), axis=1)
    flags = flags | bad
    values[flags] = np.nan
    return values, flags


@dataclass(frozen=True, eq=False)
class Entrywise(MatrixFunction):
    entries: Tuple[Tuple[ScalarExpr, ...], ...]

    def __post_init__(self):
        n = len(self.entries)
        if n < 1 or any(len(row) != n for row in self.entries):
            raise PreconditionError("Entrywise function needs a square grid of expressions")
        if n > settings.max_dimension:
            raise PreconditionError(f"Dimension {n} exceeds the cap of {settings.max_dimension}")

    @property
    def n(self) -> int:
        return len(self.entries)

    def eval(self, z: complex) -> CMatrix:
        z = complex(z)
        return np.array([[e.evaluate(z) for e in row] for row in self.entries], dtype=complex)

    def eval_many(self, zs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        zs = np.asarray(zs, dtype=complex)
        values = np.empty((zs.shape[0], self.n, self.n), dtype=complex)
        for i, row in enumerate(self.entries):
            for j, e in enumerate(row):
                values[:, i, j] = e.evaluate(zs)
        return _flag_nonfinite(values, np.zeros(zs.shape[0], dtype=bool))

    def differentiated(self, k: int = 1) -> "Entrywise":
        entries = self.entries
        for _ in range(k):
            entries = tuple(tuple(e.diff() for e in row) for row in entries)
        return Entrywise(entries)

    def derivative(self, z: complex, k: int) -> CMatrix:
        return self.differentiated(k).eval(z)


@dataclass(frozen=True, eq=False)
class Taylor(MatrixFunction):
    """Finite power series sum C_k (z - center)^k. radius is recorded, never enforced."""
    center: complex
    coeffs: Tuple[CMatrix, ...]
    radius: float = math.inf

    def __post_init__(self):
        if not self.coeffs:
            raise PreconditionError("Taylor function needs at least one coefficient")
        coeffs = tuple(as_cmatrix(c) for c in self.coeffs)
        if any(c.shape != coeffs[0].shape for c in coeffs):
            raise PreconditionError("Taylor coefficients must share one dimension")
        if not self.radius > 0:
            raise PreconditionError(f"Taylor radius must be positive, got {self.radius}")
        object.__setattr__(self, 'coeffs', coeffs)
        object.__setattr__(self, 'center', complex(self.center))

    @property
    def n(self) -> int:
        return self.coeffs[0].shape[0]

    def _horner(self, coeffs: Sequence[CMatrix], w) -> np.ndarray:
        w = np.asarray(w, dtype=complex)
        total = np.broadcast_to(coeffs[-1], w.shape + coeffs[-1].shape).astype(complex)
        for c in reversed(coeffs[:-1]):
            total = total * w[..., None, None] + c
        return total

    def eval(self, z: complex) -> CMatrix:
        if self.beyond_radius(z):
            logging.debug(warning(f"Taylor series evaluated at {z} outside its radius {self.radius}"))
        return self._horner(self.coeffs, complex(z) - self.center)

    def eval_many(self, zs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        zs = np.asarray(zs, dtype=complex)
        values = np.array(self._horner(self.coeffs, zs - self.center))
        return _flag_nonfinite(values, np.zeros(zs.shape[0], dtype=bool))

    def domain_distance(self, z: complex) -> float:
        return self.radius - abs(complex(z) - self.center)

    def beyond_radius(self, z: complex) -> bool:
        return abs(complex(z) - self.center) > self.radius

    def beyond_radius_many(self, zs: np.ndarray) -> np.ndarray:
        return np.abs(np.asarray(zs, dtype=complex) - self.center) > self.radius

    def derivative(self, z: complex, k: int) -> CMatrix:
        if k >= len(self.coeffs):
            return np.zeros((self.n, self.n), dtype=complex)
        shifted = [math.factorial(j) // math.factorial(j - k) * self.coeffs[j] for j in range(k, len(self.coeffs))]
        return self._horner(shifted, complex(z) - self.center)


@dataclass(frozen=True, eq=False)
class Pencil(MatrixFunction):
    """z -> A - zI"""
    A: CMatrix

    def __post_init__(self):
        object.__setattr__(self, 'A', as_cmatrix(self.A))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def eval(self, z: complex) -> CMatrix:
        return self.A - complex(z) * np.eye(self.n)

    def eval_many(self, zs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        zs = np.asarray(zs, dtype=complex)
        values = self.A[None, :, :] - zs[:, None, None] * np.eye(self.n)[None, :, :]
        return values, np.zeros(zs.shape[0], dtype=bool)

    def derivative(self, z: complex, k: int) -> CMatrix:
        if k == 1:
            return -np.eye(self.n, dtype=complex)
        return np.zeros((self.n, self.n), dtype=complex)


@dataclass(frozen=True, eq=False)
class Resolvent(MatrixFunction):
    """z -> (A - zI)^{-1}, defined off the spectrum of A."""
    A: CMatrix

    def __post_init__(self):
        object.__setattr__(self, 'A', as_cmatrix(self.A))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def singular_threshold(self) -> float:
        return settings.resolvent_eps * (1.0 + operator_norm(self.A))

    def _smin(self, z: complex) -> float:
        pencil = self.A - complex(z) * np.eye(self.n)
        return float(singular_values_batch(pencil[None])[0, -1])

    def eval(self, z: complex) -> CMatrix:
        smin = self._smin(z)
        if smin <= self.singular_threshold:
            raise SpectrumProximityError(f"z = {complex(z)} is within {smin:.3e} of the spectrum", smin)
        try:
            return inverse(self.A - complex(z) * np.eye(self.n))
        except SingularMatrixError:
            raise SpectrumProximityError(f"A - zI is numerically singular at z = {complex(z)}", smin)

    def eval_many(self, zs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        zs = np.asarray(zs, dtype=complex)
        pencils = self.A[None, :, :] - zs[:, None, None] * np.eye(self.n)[None, :, :]
        smin = singular_values_batch(pencils)[:, -1]
        flags = smin <= self.singular_threshold
        values = np.full_like(pencils, np.nan)
        if np.any(~flags):
            values[~flags] = inverse_batch(pencils[~flags])
        return _flag_nonfinite(values, flags)

    def domain_distance(self, z: complex) -> float:
        # s_n(A - zI) never exceeds the distance to the spectrum
        return self._smin(z)

    def derivative(self, z: complex, k: int) -> CMatrix:
        R = self.eval(z)
        return math.factorial(k) * np.linalg.matrix_power(R, k + 1)


@dataclass(frozen=True, eq=False)
class ExpFamily(MatrixFunction):
    """z -> exp(zA)"""
    A: CMatrix

    def __post_init__(self):
        object.__setattr__(self, 'A', as_cmatrix(self.A))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def eval(self, z: complex) -> CMatrix:
        return matrix_exp(complex(z) * self.A)

    def derivative(self, z: complex, k: int) -> CMatrix:
        return np.linalg.matrix_power(self.A, k) @ self.eval(z)


@dataclass(frozen=True, eq=False)
class BlockDiag(MatrixFunction):
    blocks: Tuple[MatrixFunction, ...]

    def __post_init__(self):
        if not self.blocks:
            raise PreconditionError("blockdiag needs at least one block")
        object.__setattr__(self, 'blocks', tuple(self.blocks))
        if self.n > settings.max_dimension:
            raise PreconditionError(f"Dimension {self.n} exceeds the cap of {settings.max_dimension}")

    @property
    def n(self) -> int:
        return sum(b.n for b in self.blocks)

    def eval(self, z: complex) -> CMatrix:
        return scipy.linalg.block_diag(*[b.eval(z) for b in self.blocks]).astype(complex)

    def eval_many(self, zs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        zs = np.asarray(zs, dtype=complex)
        values = np.zeros((zs.shape[0], self.n, self.n), dtype=complex)
        flags = np.zeros(zs.shape[0], dtype=bool)
        offset = 0
        for block in self.blocks:
            block_values, block_flags = block.eval_many(zs)
            values[:, offset:offset + block.n, offset:offset + block.n] = block_values
            flags |= block_flags
            offset += block.n
        values[flags] = np.nan
        return values, flags

    def domain_distance(self, z: complex) -> float:
        return min(b.domain_distance(z) for b in self.blocks)

    def beyond_radius(self, z: complex) -> bool:
        return any(b.beyond_radius(z) for b in self.blocks)

    def beyond_radius_many(self, zs: np.ndarray) -> np.ndarray:
        return np.logical_or.reduce([b.beyond_radius_many(zs) for b in self.blocks])

    def derivative(self, z: complex, k: int) -> CMatrix:
        return scipy.linalg.block_diag(*[b.derivative(z, k) for b in self.blocks]).astype(complex)


@dataclass(frozen=True, eq=False)
class UnitaryConjugate(MatrixFunction):
    """z -> U F(z) V with U, V unitary."""
    U: CMatrix
    inner: MatrixFunction
    V: CMatrix

    def __post_init__(self):
        U, V = as_cmatrix(self.U), as_cmatrix(self.V)
        n = self.inner.n
        if U.shape[0] != n or V.shape[0] != n:
            raise PreconditionError(f"Conjugating matrices must be {n}x{n}, got {U.shape} and {V.shape}")
        for name, M in (('U', U), ('V', V)):
            residual = frobenius_norm(M.conj().T @ M - np.eye(n))
            if residual > settings.orthonormal_tol:
                raise PreconditionError(f"{name} is not unitary (residual {residual:.3e})")
        object.__setattr__(self, 'U', U)
        object.__setattr__(self, 'V', V)

    @property
    def n(self) -> int:
        return self.inner.n

    def eval(self, z: complex) -> CMatrix:
        return self.U @ self.inner.eval(z) @ self.V

    def eval_many(self, zs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        values, flags = self.inner.eval_many(zs)
        return np.matmul(np.matmul(self.U, values), self.V), flags

    def domain_distance(self, z: complex) -> float:
        return self.inner.domain_distance(z)

    def beyond_radius(self, z: complex) -> bool:
        return self.inner.beyond_radius(z)

    def beyond_radius_many(self, zs: np.ndarray) -> np.ndarray:
        return self.inner.beyond_radius_many(zs)

    def derivative(self, z: complex, k: int) -> CMatrix:
        return self.U @ self.inner.derivative(z, k) @ self.V


@dataclass(frozen=True, eq=False)
class TrailingBlock(MatrixFunction):
    """The lower-right (n - offset) x (n - offset) block of another function."""
    source: MatrixFunction
    offset: int

    def __post_init__(self):
        if not 0 <= self.offset < self.source.n:
            raise PreconditionError(f"Block offset {self.offset} out of range for n = {self.source.n}")

    @property
    def n(self) -> int:
        return self.source.n - self.offset

    def eval(self, z: complex) -> CMatrix:
        return np.array(self.source.eval(z)[self.offset:, self.offset:])

    def eval_many(self, zs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        values, flags = self.source.eval_many(zs)
        return np.array(values[:, self.offset:, self.offset:]), flags

    def domain_distance(self, z: complex) -> float:
        return self.source.domain_distance(z)

    def beyond_radius(self, z: complex) -> bool:
        return self.source.beyond_radius(z)

    def beyond_radius_many(self, zs: np.ndarray) -> np.ndarray:
        return self.source.beyond_radius_many(zs)

    def derivative(self, z: complex, k: int) -> CMatrix:
        return np.array(self.source.derivative(z, k)[self.offset:, self.offset:])


def constant(M) -> Taylor:
    return Taylor(0j, (as_cmatrix(M),))


# ---------------------------------------------------------------------------
# Differentiation and Taylor coefficients
# ---------------------------------------------------------------------------

def _check_order(k: int):
    if not 1 <= k <= settings.max_derivative_order:
        raise PreconditionError(f"Derivative order must lie in 1..{settings.max_derivative_order}, got {k}")


def cauchy_derivative(F: MatrixFunction, z: complex, k: int,
                      nodes: Optional[int] = None, radius: Optional[float] = None) -> CMatrix:
    """
    k-th derivative from the trapezoid rule on Cauchy's integral formula
    over a circle around z, at most unit radius and at most half the
    distance to the nearest singularity.
    """
    _check_order(k)
    z = complex(z)
    N = nodes or settings.cauchy_derivative_nodes
    if radius is None:
        radius = min(1.0, F.domain_distance(z) / 2.0)
    if not radius >= 1e-8:
        raise DifferentiationError(f"Cannot differentiate at {z}: contour radius {radius:.3e} collapsed")
    w = radius * np.exp(2j * np.pi * np.arange(N) / N)
    values, flags = F.eval_many(z + w)
    if np.any(flags):
        raise DifferentiationError(f"Contour around {z} meets {int(flags.sum())} singular points")
    weights = w ** (-k)
    return math.factorial(k) * np.einsum('j,jab->ab', weights, values) / N


def derivative(F: MatrixFunction, z: complex, k: int, method: str = "auto") -> CMatrix:
    _check_order(k)
    if not F.domain_distance(z) > 0:
        raise DifferentiationError(f"{complex(z)} is not interior to the domain of the function")
    if method == "cauchy":
        return cauchy_derivative(F, z, k)
    if method != "auto":
        raise ValueError(f"Unknown differentiation method: {method}")
    return F.derivative(complex(z), k)


def taylor_coefficients(F: MatrixFunction, z0: complex, K: int, r: float) -> List[CMatrix]:
    """C_0..C_K about z0 by the N-node trapezoid rule on the circle of radius r."""
    z0 = complex(z0)
    if K < 0 or not r > 0:
        raise PreconditionError(f"Need K >= 0 and r > 0, got K={K}, r={r}")
    if not F.domain_distance(z0) > r:
        raise PreconditionError(f"Closed disk of radius {r} about {z0} leaves the domain")
    N = max(settings.taylor_min_nodes, 8 * K)
    w = r * np.exp(2j * np.pi * np.arange(N) / N)
    values, flags = F.eval_many(z0 + w)
    if np.any(flags):
        raise SpectrumProximityError(f"{int(flags.sum())} contour points about {z0} are singular", 0.0)
    return [np.einsum('j,jab->ab', w ** (-k), values) / N for k in range(K + 1)]


# ---------------------------------------------------------------------------
# Structural comparison
# ---------------------------------------------------------------------------

def structurally_equal(f: MatrixFunction, g: MatrixFunction) -> bool:
    if type(f) is not type(g):
        return False
    if isinstance(f, Entrywise):
        return f.entries == g.entries
    if isinstance(f, Taylor):
        return (f.center == g.center and f.radius == g.radius and len(f.coeffs) == len(g.coeffs)
                and all(np.array_equal(a, b) for a, b in zip(f.coeffs, g.coeffs)))
    if isinstance(f, (Pencil, Resolvent, ExpFamily)):
        return np.array_equal(f.A, g.A)
    if isinstance(f, BlockDiag):
        return len(f.blocks) == len(g.blocks) and all(
            structurally_equal(a, b) for a, b in zip(f.blocks, g.blocks))
    if isinstance(f, UnitaryConjugate):
        return (np.array_equal(f.U, g.U) and np.array_equal(f.V, g.V)
                and structurally_equal(f.inner, g.inner))
    if isinstance(f, TrailingBlock):
        return f.offset == g.offset and structurally_equal(f.source, g.source)
    return f is g
