# Standard library imports
import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

# Third-party imports
import numpy as np
import scipy.linalg

# Local imports
from src.settings import settings
from src.look_and_feel import warning

# Dense n x n complex matrix; the universal value type
CMatrix = np.ndarray


class PreconditionError(ValueError):
    pass


class SingularMatrixError(ValueError):
    def __init__(self, message: str, det_abs: float):
        super().__init__(message)
        self.det_abs = det_abs


class SVDConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class SVDResult:
    """A = U @ diag(S) @ V, with V already carrying the adjoint."""
    U: CMatrix
    S: np.ndarray
    V: CMatrix

    @property
    def n(self) -> int:
        return self.S.shape[0]

    def reconstruct(self) -> CMatrix:
        return (self.U * self.S) @ self.V


@dataclass(frozen=True, eq=False)
class VectorBasis:
    columns: np.ndarray
    residual: float

    @property
    def dim(self) -> int:
        return self.columns.shape[1]

    @classmethod
    def from_columns(cls, columns) -> "VectorBasis":
        X = np.array(columns, dtype=complex)
        if X.ndim == 1:
            X = X[:, None]
        gram = X.conj().T @ X
        residual = float(np.linalg.norm(gram - np.eye(X.shape[1])))
        X.setflags(write=False)
        return cls(X, residual)


def as_cmatrix(A) -> CMatrix:
    """Validate and copy into an immutable complex square matrix."""
    arr = np.array(A, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise PreconditionError(f"Expected a nonempty square matrix, got shape {arr.shape}")
    if arr.shape[0] > settings.max_dimension:
        raise PreconditionError(f"Dimension {arr.shape[0]} exceeds the cap of {settings.max_dimension}")
    if not np.all(np.isfinite(arr)):
        raise PreconditionError("Matrix has non-finite entries")
    arr.setflags(write=False)
    return arr


def frobenius_norm(A) -> float:
    A = np.asarray(A, dtype=complex)
    # vdot conjugates its first argument: sum of conj(a)*a = trace(A* A)
    return float(math.sqrt(max(np.vdot(A, A).real, 0.0)))


def _gram_pair(Wc: np.ndarray, p: int, q: int):
    wp, wq = Wc[:, p, :], Wc[:, q, :]
    alpha = np.sum(wp.real ** 2 + wp.imag ** 2, axis=-1)
    beta = np.sum(wq.real ** 2 + wq.imag ** 2, axis=-1)
    gamma = np.sum(np.conj(wp) * wq, axis=-1)
    return alpha, beta, gamma


def _max_scaled_offdiag(Wc: np.ndarray, fro2: np.ndarray) -> float:
    n = Wc.shape[1]
    worst = 0.0
    for p in range(n - 1):
        for q in range(p + 1, n):
            g = np.abs(_gram_pair(Wc, p, q)[2])
            worst = max(worst, float(np.max(g / fro2)))
    return worst


def _power_of_two_scale(Wc: np.ndarray) -> np.ndarray:
    """Per-matrix 2**e with max |a_ij| / 2**e in [0.5, 1); dividing by it is exact."""
    # largest component rather than the norm, whose sum of squares can underflow or overflow
    largest = np.max(np.maximum(np.abs(Wc.real), np.abs(Wc.imag)), axis=(1, 2))
    _, exponents = np.frexp(np.where(largest > 0, largest, 1.0))
    return np.ldexp(1.0, exponents)


def _jacobi_columns(Wc: np.ndarray, Vc: Optional[np.ndarray] = None) -> np.ndarray:
    """
    One-sided Jacobi on a stack of matrices stored column-wise, so that
    Wc[b, j, :] is column j of matrix b.

    Each matrix is first divided by a power of two close to its largest
    entry and left in that scaled form; the per-matrix scale is returned so
    callers can restore magnitudes after taking column norms. A pair is
    rotated while |<w_p, w_q>| exceeds svd_rotation_tol * ||w_p|| ||w_q||
    and both squared column norms stay above (eps * ||A||_F)^2, so columns
    that rank deficiency has reduced to rounding noise are left alone.
    Once no pair rotates, every off-diagonal Gram entry is below
    svd_rotation_tol * ||A||_F^2. Each matrix is processed
    independently of its neighbours, so results do not depend on how a
    grid is chunked.
    """
    n = Wc.shape[1]
    tol = settings.svd_rotation_tol
    scale = _power_of_two_scale(Wc)
    Wc /= scale[:, None, None]
    fro2 = np.sum(Wc.real ** 2 + Wc.imag ** 2, axis=(1, 2))
    fro2 = np.where(fro2 > 0, fro2, 1.0)
    noise = np.finfo(float).eps ** 2 * fro2
    for sweep in range(1, settings.svd_max_sweeps + 1):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha, beta, gamma = _gram_pair(Wc, p, q)
                g = np.abs(gamma)
                active = (np.minimum(alpha, beta) > noise) & (g > tol * np.sqrt(alpha * beta))
                if not np.any(active):
                    continue
                rotated = True
                g_safe = np.where(active, g, 1.0)
                zeta = (beta - alpha) / (2.0 * g_safe)
                t = np.where(zeta >= 0.0, 1.0, -1.0) / (np.abs(zeta) + np.hypot(1.0, zeta))
                cos = 1.0 / np.hypot(1.0, t)
                c = np.where(active, cos, 1.0)[:, None]
                s = np.where(active, cos * t, 0.0)[:, None]
                # e^{-i arg(gamma)} turns the 2x2 Gram block real before the rotation
                phase = np.where(active, np.conj(gamma) / g_safe, 1.0)[:, None]
                wp = Wc[:, p, :]
                wq_t = Wc[:, q, :] * phase
                new_p = c * wp - s * wq_t
                new_q = s * wp + c * wq_t
                Wc[:, p, :] = new_p
                Wc[:, q, :] = new_q
                if Vc is not None:
                    vp = Vc[:, p, :]
                    vq_t = Vc[:, q, :] * phase
                    new_vp = c * vp - s * vq_t
                    new_vq = s * vp + c * vq_t
                    Vc[:, p, :] = new_vp
                    Vc[:, q, :] = new_vq
        if not rotated:
            return scale
    worst = _max_scaled_offdiag(Wc, fro2)
    if worst > 1e-12:
        raise SVDConvergenceError(
            f"One-sided Jacobi did not converge in {settings.svd_max_sweeps} sweeps "
            f"(largest off-diagonal Gram entry {worst:.3e} relative to ||A||_F^2)")
    logging.debug(warning(f"Jacobi sweep cap reached with off-diagonal ratio {worst:.3e}; accepted"))
    return scale


def singular_values_batch(stack: np.ndarray) -> np.ndarray:
    """Nonincreasing singular values for a (B, n, n) stack of matrices."""
    Wc = np.array(np.swapaxes(np.asarray(stack, dtype=complex), -1, -2), dtype=complex, order='C')
    if Wc.shape[0] == 0:
        return np.zeros((0, Wc.shape[1]))
    scale = _jacobi_columns(Wc)
    S = np.sqrt(np.sum(Wc.real ** 2 + Wc.imag ** 2, axis=-1)) * scale[:, None]
    return -np.sort(-S, axis=-1)


def svd(A) -> SVDResult:
    A = as_cmatrix(A)
    n = A.shape[0]
    Wc = np.array(A.T, dtype=complex, order='C')[None]
    Vc = np.eye(n, dtype=complex)[None].copy()
    scale = float(_jacobi_columns(Wc, Vc)[0])

    s = np.sqrt(np.sum(Wc[0].real ** 2 + Wc[0].imag ** 2, axis=-1))
    W = Wc[0].T
    V_acc = Vc[0].T
    order = np.argsort(-s, kind='stable')
    s = s[order]
    W = W[:, order]
    V_acc = np.array(V_acc[:, order])

    # Left vectors for negligible singular values come from an orthogonal complement
    floor = n * np.finfo(float).eps * s[0]
    rank = int(np.sum(s > floor)) if s[0] > 0 else 0
    U = np.eye(n, dtype=complex)
    if rank:
        # QR keeps U unitary to rounding; R is diagonal up to the rotation tolerance
        Q, R = scipy.linalg.qr(W[:, :rank] / s[:rank])
        d = np.diag(R)
        U = np.array(Q, dtype=complex)
        U[:, :rank] *= d / np.abs(d)

    # Phase convention: the first largest-modulus component of each right vector is real positive
    for j in range(n):
        x = V_acc[:, j]
        m = int(np.argmax(np.abs(x)))
        fix = np.conj(x[m]) / abs(x[m])
        V_acc[:, j] *= fix
        U[:, j] *= fix

    s = s * scale
    V = V_acc.conj().T
    for arr in (U, s, V):
        arr.setflags(write=False)
    return SVDResult(U, s, V)


def operator_norm(A) -> float:
    return float(svd(A).S[0])


def maximizing_subspace(A, tau: Optional[float] = None) -> VectorBasis:
    """Orthonormal basis of the right singular vectors whose singular values tie s1 within tau."""
    tau = settings.subspace_tau if tau is None else tau
    result = svd(A)
    if result.S[0] == 0.0:
        raise PreconditionError("The zero matrix has no maximizing direction")
    d = int(np.sum(result.S >= result.S[0] * (1.0 - tau)))
    return VectorBasis.from_columns(result.V[:d].conj().T)


def minimizing_subspace(A, tau: Optional[float] = None) -> VectorBasis:
    """Right singular vectors tying s_n within tau*s1; the first column is minimizing_vector(A)."""
    tau = settings.subspace_tau if tau is None else tau
    result = svd(A)
    d = int(np.sum(result.S <= result.S[-1] + tau * result.S[0]))
    return VectorBasis.from_columns(result.V[::-1][:d].conj().T)


def minimizing_vector(A) -> np.ndarray:
    return np.array(svd(A).V[-1].conj())


def unitary_completion(basis: Union[VectorBasis, np.ndarray]) -> CMatrix:
    """
    Extend k orthonormal columns to an n x n unitary matrix whose first k
    columns are exactly the given ones. The complement comes from a
    Householder QR factorisation of the columns.
    """
    if not isinstance(basis, VectorBasis):
        basis = VectorBasis.from_columns(basis)
    X = basis.columns
    n, k = X.shape
    if k < 1 or k > n:
        raise PreconditionError(f"Cannot complete {k} vectors in dimension {n}")
    if basis.residual > settings.orthonormal_tol:
        raise PreconditionError(f"Columns are not orthonormal (residual {basis.residual:.3e})")
    if k == n:
        return np.array(X)
    Q, _ = scipy.linalg.qr(X)
    U = np.array(Q, dtype=complex)
    U[:, :k] = X
    return U


def det(A) -> complex:
    return complex(scipy.linalg.det(as_cmatrix(A)))


def adjugate(A) -> CMatrix:
    """Transpose of the cofactor matrix, so that A @ adj(A) = det(A) I."""
    A = as_cmatrix(A)
    n = A.shape[0]
    if n == 1:
        return np.ones((1, 1), dtype=complex)
    cofactors = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            minor = np.delete(np.delete(A, i, axis=0), j, axis=1)
            cofactors[i, j] = (-1) ** (i + j) * scipy.linalg.det(minor)
    return cofactors.T


def inverse(A) -> CMatrix:
    """Inverse by pivoted LU elimination; refuses matrices that are numerically singular."""
    A = as_cmatrix(A)
    n = A.shape[0]
    norm_f = frobenius_norm(A)
    sign, logdet = np.linalg.slogdet(A)
    if norm_f == 0.0 or sign == 0 or logdet <= math.log(settings.det_eps) + n * math.log(norm_f):
        det_abs = abs(det(A))
        raise SingularMatrixError(f"Matrix is numerically singular (|det| = {det_abs:.3e})", det_abs)
    lu, piv = scipy.linalg.lu_factor(A)
    return scipy.linalg.lu_solve((lu, piv), np.eye(n, dtype=complex))


def inverse_batch(stack: np.ndarray) -> np.ndarray:
    # LAPACK gesv per matrix, also pivoted elimination
    return np.linalg.inv(stack)


def matrix_exp(A) -> CMatrix:
    """Scaling and squaring around a truncated Taylor series."""
    A = as_cmatrix(A)
    n = A.shape[0]
    norm_f = frobenius_norm(A)
    threshold = settings.exp_scale_threshold
    j = 0 if norm_f <= threshold else int(math.ceil(math.log2(norm_f / threshold)))
    X = A / (2.0 ** j)
    identity = np.eye(n, dtype=complex)
    term = identity
    total = identity.copy()
    for k in range(1, settings.exp_max_terms + 1):
        term = (term @ X) / k
        total = total + term
        term_norm = np.linalg.norm(term)
        if term_norm == 0.0 or term_norm < settings.exp_term_cutoff * np.linalg.norm(total):
            break
    for _ in range(j):
        total = total @ total
    return total
