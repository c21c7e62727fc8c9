# Standard library imports
import logging
import math
from dataclasses import dataclass
from typing import Optional

# Third-party imports
import numpy as np
from numpy.polynomial.legendre import leggauss

# Local imports
from src.settings import settings
from src.look_and_feel import info
from src.linalg import (PreconditionError, as_cmatrix, frobenius_norm, inverse, inverse_batch, matrix_exp,
                        operator_norm, singular_values_batch)
from src.mfunc import ExpFamily, Pencil, Resolvent
from src.principles import locate_extremum, scan_field
from src.region import Region
from src.report import CERTIFIED, REFUTED, VerificationReport


@dataclass(eq=False)
class PseudospectraField:
    """s_n(A - zI) over the grid; its sublevel sets are the pseudospectra of A."""
    A: np.ndarray
    region: Region
    points: np.ndarray
    values: np.ndarray
    flags: np.ndarray

    @property
    def resolvent_norm(self) -> np.ndarray:
        with np.errstate(divide='ignore'):
            return np.where(self.values > 0, 1.0 / np.where(self.values > 0, self.values, 1.0), np.inf)


def pseudospectra_field(A, region: Region, threads: Optional[int] = None,
                        progress: Optional[bool] = None) -> PseudospectraField:
    A = as_cmatrix(A)
    field = scan_field(Pencil(A), region, threads=threads, progress=progress)
    return PseudospectraField(A, region, field.points, field.values[:, -1], field.flags)


def resolvent_extrema_check(A, region: Region) -> VerificationReport:
    """||R_A|| and s_n(R_A) are nonconstant and take their extreme values on the boundary."""
    A = as_cmatrix(A)
    n = A.shape[0]
    pseudo = pseudospectra_field(A, region)
    margin = float(np.min(pseudo.values))
    if margin <= settings.spectrum_margin:
        raise PreconditionError(f"Region comes within {margin:.3e} of the spectrum")

    field = scan_field(Resolvent(A), region)
    top = locate_extremum(field, 1, "max")
    bottom = locate_extremum(field, n, "min")
    rel_dev = []
    for k in (1, n):
        col = field.column(k)[field.valid]
        rel_dev.append(float((np.max(col) - np.min(col)) / np.max(col)))
    nonconstant = all(dev > settings.constancy_tol for dev in rel_dev)
    ok = top.on_boundary and bottom.on_boundary and nonconstant

    report = VerificationReport(
        "resolvent", CERTIFIED if ok else REFUTED,
        residuals={"s1_relative_deviation": rel_dev[0], f"s{n}_relative_deviation": rel_dev[1],
                   "spectrum_margin": margin},
        witnesses={"s1_max": top.to_dict(), f"s{n}_min": bottom.to_dict()},
        parameters={"n": n, "spacing": region.spacing})
    if not top.on_boundary:
        report.notes.append(f"||R_A|| peaks inside the region at {top.location}")
    if not bottom.on_boundary:
        report.notes.append(f"s{n}(R_A) bottoms out inside the region at {bottom.location}")
    if not nonconstant:
        report.notes.append("A resolvent singular-value field is constant on the grid")
    return report


def resolvent_derivative_identity(A, z: complex, h: Optional[float] = None) -> VerificationReport:
    """
    Central differences of R_A and L_A against R_A(z)^2 and -I.

    The pencil difference is exact in exact arithmetic, so its tolerance
    is 1e-12 plus the rounding floor of subtracting two O(|a| + |z|)
    entries and dividing by 2h.
    """
    A = as_cmatrix(A)
    n = A.shape[0]
    h = settings.derivative_step if h is None else h
    z = complex(z)
    identity = np.eye(n)
    smin = float(singular_values_batch((A - z * identity)[None])[0, -1])
    if smin <= 10.0 * h:
        raise PreconditionError(f"z = {z} is within {smin:.3e} of the spectrum; need more than {10 * h:.1e}")

    R = Resolvent(A)
    L = Pencil(A)
    Rz = R.eval(z)
    R2 = Rz @ Rz
    fd_R = (R.eval(z + h) - R.eval(z - h)) / (2.0 * h)
    fd_L = (L.eval(z + h) - L.eval(z - h)) / (2.0 * h)
    residual_R = frobenius_norm(fd_R - R2)
    residual_L = frobenius_norm(fd_L + identity)
    norm_R = operator_norm(Rz)
    floor = 4.0 * np.finfo(float).eps * (float(np.max(np.abs(np.diag(A)))) + abs(z) + h) / h
    report = VerificationReport(
        "resolvent-derivative", CERTIFIED,
        residuals={"resolvent": residual_R, "pencil": residual_L},
        tolerances={"resolvent": 1e-6 * (1.0 + norm_R ** 2), "pencil": 1e-12 + floor},
        witnesses={"R_squared": R2, "difference_quotient": fd_R},
        parameters={"z": z, "h": h})
    if not report.within_tolerance():
        report.verdict = REFUTED
    return report


def laplace_identity_check(A, z: complex, eps: Optional[float] = None,
                           nodes: Optional[int] = None) -> VerificationReport:
    """
    (zI - A)^{-1} as the Laplace transform of exp(tA), truncated where the
    integrand has decayed below eps and integrated by composite
    Gauss-Legendre on panels no wider than 1.
    """
    A = as_cmatrix(A)
    n = A.shape[0]
    eps = settings.laplace_eps if eps is None else eps
    nodes = settings.gauss_legendre_nodes if nodes is None else nodes
    z = complex(z)
    norm_A = operator_norm(A)
    if not z.real > norm_A + 0.1:
        raise PreconditionError(f"Re z = {z.real} must exceed ||A|| + 0.1 = {norm_A + 0.1}")

    T = math.log(1.0 / eps) / (z.real - norm_A)
    panels = max(1, math.ceil(T))
    width = T / panels
    x, w = leggauss(nodes)
    total = np.zeros((n, n), dtype=complex)
    for p in range(panels):
        a = p * width
        ts = a + 0.5 * width * (x + 1.0)
        for t, weight in zip(ts, w):
            total += 0.5 * width * weight * np.exp(-z * t) * matrix_exp(t * A)
    target = -inverse(A - z * np.eye(n))
    residual = frobenius_norm(total - target)
    logging.debug(info(f"Laplace quadrature on [0, {T:.3f}] with {panels} panels of {nodes} nodes"))
    report = VerificationReport(
        "laplace", CERTIFIED,
        residuals={"resolvent": residual},
        tolerances={"resolvent": 10.0 * eps + 1e-8},
        witnesses={"quadrature": total, "resolvent": target},
        parameters={"z": z, "eps": eps, "T": T, "panels": panels, "nodes": nodes})
    if not report.within_tolerance():
        report.verdict = REFUTED
    return report


def cauchy_exp_reconstruction(A, t: float, r: Optional[float] = None,
                              N: Optional[int] = None) -> VerificationReport:
    """exp(tA) from the trapezoid rule on the circle |xi| = r around the spectrum."""
    A = as_cmatrix(A)
    n = A.shape[0]
    norm_A = operator_norm(A)
    r = norm_A + 1.0 if r is None else r
    N = settings.cauchy_exp_nodes if N is None else N
    if not (r > 1.1 * norm_A and r > 0):
        raise PreconditionError(f"Contour radius {r} must exceed 1.1 ||A|| = {1.1 * norm_A}")

    xi = r * np.exp(2j * np.pi * np.arange(N) / N)
    resolvents = inverse_batch(xi[:, None, None] * np.eye(n)[None] - A[None])
    # d(xi) / (2 pi i) = xi d(theta) / (2 pi): the trapezoid weights become xi / N
    total = np.einsum('j,jab->ab', np.exp(t * xi) * xi, resolvents) / N
    target = matrix_exp(t * A)
    residual = frobenius_norm(total - target)
    report = VerificationReport(
        "cauchy", CERTIFIED,
        residuals={"exponential": residual},
        tolerances={"exponential": 1e-8 * math.exp(t * r)},
        witnesses={"reconstruction": total, "matrix_exp": target},
        parameters={"t": t, "r": r, "N": N})
    if not report.within_tolerance():
        report.verdict = REFUTED
    return report


def exp_halfplane_example(region: Region) -> VerificationReport:
    """
    exp(z diag(0, 1)) has s1 = max(1, e^Re z) and s2 = min(1, e^Re z):
    each is constant on one side of the imaginary axis although the
    function never is.
    """
    F = ExpFamily(np.diag([0.0, 1.0]))
    field = scan_field(F, region)
    valid = field.valid
    re = field.points.real
    expected_1 = np.maximum(1.0, np.exp(re))
    expected_2 = np.minimum(1.0, np.exp(re))
    err_1 = float(np.max(np.abs(field.column(1) - expected_1)[valid]))
    err_2 = float(np.max(np.abs(field.column(2) - expected_2)[valid]))

    delta = region.spacing
    report = VerificationReport(
        "exp-example", CERTIFIED,
        residuals={"s1_formula": err_1, "s2_formula": err_2},
        tolerances={"s1_formula": 1e-10, "s2_formula": 1e-10},
        parameters={"delta": delta})
    for k, side, name in ((1, re < -delta, "s1_left_deviation"), (2, re > delta, "s2_right_deviation")):
        mask = side & valid
        if np.any(mask):
            col = field.column(k)[mask]
            report.residuals[name] = float(np.max(col) - np.min(col))
            report.tolerances[name] = 1e-12
        else:
            report.notes.append(f"No grid points for the s{k} half-plane check")
    if not report.within_tolerance():
        report.verdict = REFUTED
    return report
