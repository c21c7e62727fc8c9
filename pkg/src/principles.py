# Standard library imports
import concurrent.futures
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

# Third-party imports
import numpy as np
from scipy.optimize import minimize
from tqdm import tqdm

# Local imports
from src.settings import settings
from src.look_and_feel import BLUE, RESET, info, warning
from src.linalg import (PreconditionError, SingularMatrixError, det, frobenius_norm, maximizing_subspace,
                        minimizing_subspace, minimizing_vector, singular_values_batch, svd)
from src.mfunc import (MatrixFunction, SpectrumProximityError, TrailingBlock, UnitaryConjugate, derivative,
                       taylor_coefficients)
from src.region import Region
from src.report import CERTIFIED, INCONCLUSIVE, REFUTED, VerificationReport, jsonable


class EmptyDomainError(ValueError):
    pass


class NotAMaximumError(ValueError):
    def __init__(self, message: str, point: complex, value: float):
        super().__init__(message)
        self.point = point
        self.value = value


@dataclass(eq=False)
class SingularField:
    """Nonincreasing singular values of F at every grid point, in the region's canonical order."""
    region: Region
    points: np.ndarray
    values: np.ndarray
    flags: np.ndarray
    function: MatrixFunction
    matrices: Optional[np.ndarray] = None
    notes: List[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def valid(self) -> np.ndarray:
        return ~self.flags

    def column(self, k: int) -> np.ndarray:
        if not 1 <= k <= self.n:
            raise PreconditionError(f"Singular value index {k} outside 1..{self.n}")
        return self.values[:, k - 1]

    def frobenius(self) -> np.ndarray:
        return np.sqrt(np.sum(self.values ** 2, axis=1))

    def scale(self) -> float:
        return max(1.0, float(np.max(self.values[self.valid, 0])))

    def deviation(self, k: int) -> float:
        col = self.column(k)[self.valid]
        return float(np.max(col) - np.min(col))


def _scan_chunk(F: MatrixFunction, zs: np.ndarray, keep_matrices: bool):
    values, flags = F.eval_many(zs)
    S = np.full((zs.shape[0], F.n), np.nan)
    ok = ~flags
    if np.any(ok):
        S[ok] = singular_values_batch(values[ok])
    bad = ~np.all(np.isfinite(S), axis=1)
    flags = flags | bad
    S[flags] = np.nan
    return S, flags, (values if keep_matrices else None)


def scan_field(F: MatrixFunction, region: Region, threads: Optional[int] = None,
               progress: Optional[bool] = None, keep_matrices: bool = False) -> SingularField:
    """
    Evaluate F and its singular values over the region grid.

    Chunks have a fixed size whatever the thread count and are reassembled
    in canonical order, so the result is bit-identical for any degree of
    parallelism.
    """
    points = region.points
    total = points.shape[0]
    if total > settings.max_grid_points:
        raise PreconditionError(f"Grid has {total} points, above the cap of {settings.max_grid_points}")
    threads = threads or settings.threads
    progress = settings.show_progress if progress is None else progress
    size = settings.scan_chunk_size
    chunks = [points[i:i + size] for i in range(0, total, size)]

    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        results = list(tqdm(executor.map(lambda zs: _scan_chunk(F, zs, keep_matrices), chunks),
                            total=len(chunks), desc=f"{BLUE}Scanning grid{RESET}", colour='blue',
                            disable=not progress))

    values = np.concatenate([r[0] for r in results])
    flags = np.concatenate([r[1] for r in results])
    matrices = np.concatenate([r[2] for r in results]) if keep_matrices else None
    if np.all(flags):
        raise EmptyDomainError(f"Every one of the {total} grid points is singular for this function")

    notes = []
    if np.any(flags):
        notes.append(f"{int(flags.sum())} of {total} grid points flagged singular")
    outside = int(np.count_nonzero(F.beyond_radius_many(points)))
    if outside:
        notes.append(f"{outside} grid points lie beyond the Taylor radius")
        logging.warning(warning(notes[-1]))
    logging.debug(info(f"Scanned {total} points with {threads} thread(s)"))
    return SingularField(region, points, values, flags, F, matrices, notes)


# ---------------------------------------------------------------------------
# Extremum location
# ---------------------------------------------------------------------------

@dataclass
class ExtremumReport:
    k: int
    kind: str
    location: complex
    value: float
    on_boundary: bool
    refined: bool
    grid_location: complex
    grid_value: float

    def to_dict(self) -> Dict:
        return jsonable(self.__dict__)


def singular_value_objective(F: MatrixFunction, k: int) -> Callable[[complex], float]:
    def objective(z: complex) -> float:
        try:
            values = F.eval(z)
        except (SpectrumProximityError, SingularMatrixError, PreconditionError):
            return math.nan
        if not np.all(np.isfinite(values)):
            return math.nan
        return float(singular_values_batch(values[None])[0, k - 1])
    return objective


def frobenius_objective(F: MatrixFunction) -> Callable[[complex], float]:
    def objective(z: complex) -> float:
        try:
            return frobenius_norm(F.eval(z))
        except (SpectrumProximityError, SingularMatrixError, PreconditionError):
            return math.nan
    return objective


def _grid_best(points: np.ndarray, values: np.ndarray, mask: np.ndarray, kind: str) -> int:
    """Index of the optimal grid value among mask; exact ties go to the smallest Re, then Im."""
    candidates = np.flatnonzero(mask)
    vals = values[candidates]
    best = np.max(vals) if kind == "max" else np.min(vals)
    tied = candidates[vals == best]
    order = np.lexsort((points[tied].imag, points[tied].real))
    return int(tied[order[0]])


def refine(region: Region, objective: Callable[[complex], float], seed: complex, seed_value: float,
           kind: str, scale: float = 1.0) -> Tuple[complex, float, bool]:
    """Nelder-Mead polish of a grid extremum; returns the seed unless the polish strictly improves."""
    sign = -1.0 if kind == "max" else 1.0
    h = region.spacing

    def cost(x: np.ndarray) -> float:
        z = complex(x[0], x[1])
        if not region.contains(z):
            return math.inf
        v = objective(z)
        return math.inf if math.isnan(v) else sign * v

    x0 = np.array([seed.real, seed.imag])
    step_re = h if region.contains(seed + h) else -h
    step_im = h if region.contains(seed + 1j * h) else -h
    simplex = np.array([x0, x0 + [step_re, 0.0], x0 + [0.0, step_im]])
    result = minimize(cost, x0, method='Nelder-Mead',
                      options={'maxiter': settings.nelder_mead_max_iter,
                               'xatol': h * settings.nelder_mead_xatol_factor,
                               'fatol': 1e-14 * scale,
                               'initial_simplex': simplex})
    z = complex(result.x[0], result.x[1])
    value = objective(z) if region.contains(z) else math.nan
    improved = not math.isnan(value) and (value > seed_value if kind == "max" else value < seed_value)
    if improved:
        return z, value, True
    return seed, seed_value, False


def _locate(region: Region, points: np.ndarray, values: np.ndarray, mask: np.ndarray,
            objective: Callable[[complex], float], kind: str, k: int, scale: float) -> ExtremumReport:
    idx = _grid_best(points, values, mask, kind)
    seed, seed_value = complex(points[idx]), float(values[idx])
    location, value, refined = refine(region, objective, seed, seed_value, kind, scale)
    on_boundary = region.distance_to_boundary(location) <= region.spacing / 2.0
    return ExtremumReport(k, kind, location, value, on_boundary, refined, seed, seed_value)


def locate_extremum(field: SingularField, k: int, kind: str) -> ExtremumReport:
    if kind not in ("max", "min"):
        raise ValueError(f"kind must be 'max' or 'min', got {kind!r}")
    if not np.any(field.valid):
        raise EmptyDomainError("No unflagged grid point to search")
    return _locate(field.region, field.points, field.column(k), field.valid,
                   singular_value_objective(field.function, k), kind, k, field.scale())


class InteriorMaximum(NamedTuple):
    attained: bool
    location: complex
    value: float
    boundary_location: complex
    boundary_value: float


def interior_maximum(region: Region, points: np.ndarray, values: np.ndarray, valid: np.ndarray,
                     objective: Callable[[complex], float], scale: float) -> InteriorMaximum:
    """
    A grid maximum counts as interior when the best value at least half a
    spacing inside the region ties or beats every boundary value (within
    interior_tie_tol * scale) and its refinement does not drift onto the
    boundary.
    """
    h = region.spacing
    ring = region.boundary_mask & valid
    inner = ~region.boundary_mask & valid
    candidates = np.flatnonzero(inner)
    depth = np.array([region.distance_to_boundary(z) for z in points[candidates]])
    inner[candidates[depth <= h / 2.0]] = False
    b_idx = _grid_best(points, values, ring, "max") if np.any(ring) else None
    b_loc = complex(points[b_idx]) if b_idx is not None else complex('nan')
    b_val = float(values[b_idx]) if b_idx is not None else -math.inf
    if not np.any(inner):
        return InteriorMaximum(False, b_loc, b_val, b_loc, b_val)
    i_idx = _grid_best(points, values, inner, "max")
    i_loc, i_val = complex(points[i_idx]), float(values[i_idx])
    if i_val < b_val - settings.interior_tie_tol * scale:
        return InteriorMaximum(False, i_loc, i_val, b_loc, b_val)
    location, value, _ = refine(region, objective, i_loc, i_val, "max", scale)
    attained = region.distance_to_boundary(location) > h / 2.0
    return InteriorMaximum(attained, location, value, b_loc, b_val)


def interior_maximum_of(field: SingularField, k: Optional[int] = None) -> InteriorMaximum:
    """Interior attainment for s_k, or for the Frobenius norm when k is None."""
    if k is None:
        values, objective = field.frobenius(), frobenius_objective(field.function)
    else:
        values, objective = field.column(k), singular_value_objective(field.function, k)
    return interior_maximum(field.region, field.points, values, field.valid, objective, field.scale())


# ---------------------------------------------------------------------------
# Helpers shared by the checks
# ---------------------------------------------------------------------------

def _matrices(field: SingularField) -> np.ndarray:
    if field.matrices is not None:
        return field.matrices
    values, _ = field.function.eval_many(field.points)
    return values


def function_deviation(field: SingularField) -> Tuple[float, float, complex]:
    """max ||F(z) - F(z_ref)||_F over the grid, the scale ||F(z_ref)||_F, and the worst point."""
    mats = _matrices(field)
    valid = np.flatnonzero(field.valid)
    ref = mats[valid[0]]
    diffs = np.sqrt(np.sum(np.abs(mats[valid] - ref) ** 2, axis=(1, 2)))
    worst = int(np.argmax(diffs))
    return float(diffs[worst]), frobenius_norm(ref), complex(field.points[valid[worst]])


def _vector(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=complex).ravel()
    if x.shape[0] != n:
        raise PreconditionError(f"Vector of length {x.shape[0]} does not match dimension {n}")
    return x


def _require_interior(region: Region, z0: complex):
    if not region.is_interior(z0):
        raise PreconditionError(f"z0 = {z0} is not interior to the region")


def _direction_residuals(F: MatrixFunction, region: Region, z0: complex, x0: np.ndarray, Kd: int,
                         samples: int, seed: int) -> Tuple[float, complex, List[float]]:
    """Largest ||F(z)x0 - F(z0)x0|| over grid plus seeded samples, and ||F^(k)(z0)x0|| for k = 1..Kd."""
    rng = np.random.default_rng(seed)
    zs = np.concatenate([region.points, region.sample(rng, samples)])
    target = F.eval(z0) @ x0
    worst, worst_at = 0.0, complex(z0)
    size = settings.scan_chunk_size
    for start in range(0, zs.shape[0], size):
        chunk = zs[start:start + size]
        values, flags = F.eval_many(chunk)
        if np.all(flags):
            continue
        diffs = np.linalg.norm(values[~flags] @ x0 - target, axis=1)
        i = int(np.argmax(diffs))
        if diffs[i] > worst:
            worst, worst_at = float(diffs[i]), complex(chunk[~flags][i])
    derivs = [float(np.linalg.norm(derivative(F, z0, k) @ x0)) for k in range(1, Kd + 1)]
    return worst, worst_at, derivs


# ---------------------------------------------------------------------------
# Principle checks
# ---------------------------------------------------------------------------

def check_mean_value_identity(F: MatrixFunction, z0: complex, r: float, x,
                              K: Optional[int] = None, N: Optional[int] = None) -> VerificationReport:
    """
    Circle average of ||F(z0 + r e^{it}) x||^2 against sum_k ||C_k x||^2 r^{2k}.

    The next coefficient C_{K+1} serves as the truncation witness: when its
    contribution exceeds the tolerance the verdict is inconclusive.
    """
    K = settings.mean_value_terms if K is None else K
    N = settings.mean_value_nodes if N is None else N
    z0 = complex(z0)
    x = _vector(x, F.n)
    if not F.domain_distance(z0) > r:
        raise PreconditionError(f"Closed disk of radius {r} about {z0} leaves the domain")

    t = 2.0 * np.pi * np.arange(N) / N
    values, flags = F.eval_many(z0 + r * np.exp(1j * t))
    if np.any(flags):
        raise PreconditionError(f"{int(flags.sum())} circle nodes are singular")
    lhs = float(np.mean(np.sum(np.abs(values @ x) ** 2, axis=1)))

    coeffs = taylor_coefficients(F, z0, K + 1, r)
    terms = [float(np.sum(np.abs(C @ x) ** 2)) * r ** (2 * k) for k, C in enumerate(coeffs)]
    rhs = float(sum(terms[:K + 1]))
    tail = terms[K + 1]
    tol = 1e-8 * (1.0 + lhs)

    report = VerificationReport(
        "mean-value", CERTIFIED,
        residuals={"difference": abs(lhs - rhs), "tail": tail},
        tolerances={"difference": tol, "tail": tol},
        witnesses={"lhs": lhs, "rhs": rhs, "terms": terms[:K + 1]},
        parameters={"z0": z0, "r": r, "x": x, "K": K, "N": N})
    if tail > tol:
        report.verdict = INCONCLUSIVE
        report.notes.append(f"Series tail {tail:.3e} exceeds tolerance; increase K")
    elif abs(lhs - rhs) > tol:
        report.verdict = REFUTED
    return report


def check_max_direction(F: MatrixFunction, region: Region, z0: complex, Kd: Optional[int] = None,
                        x=None, samples: Optional[int] = None, seed: Optional[int] = None) -> VerificationReport:
    """At a maximum of ||F||, a maximizing vector x0 makes F(z)x0 constant and kills every derivative."""
    Kd = settings.direction_derivatives if Kd is None else Kd
    samples = settings.factorization_samples if samples is None else samples
    seed = settings.seed if seed is None else seed
    z0 = complex(z0)
    _require_interior(region, z0)

    F0 = F.eval(z0)
    s1_z0 = float(svd(F0).S[0])
    if x is None:
        x0 = maximizing_subspace(F0).columns[:, 0] if s1_z0 > 0 else np.eye(F.n, dtype=complex)[:, 0]
    else:
        x0 = _vector(x, F.n)

    field = scan_field(F, region)
    s1 = field.column(1)
    grid_max_idx = _grid_best(field.points, s1, field.valid, "max")
    grid_max = float(s1[grid_max_idx])
    scale = max(1.0, grid_max)
    is_max = s1_z0 >= grid_max - settings.constancy_tol * scale
    norm_deficit = max(0.0, s1_z0 - float(np.min(s1[field.valid])))

    worst, worst_at, derivs = _direction_residuals(F, region, z0, x0, Kd, samples, seed)
    tol = settings.direction_tol * (1.0 + s1_z0)
    report = VerificationReport(
        "max-direction", CERTIFIED,
        residuals={"constancy": worst, "derivatives": max(derivs) if derivs else 0.0, "norm_deficit": norm_deficit},
        tolerances={"constancy": tol, "derivatives": tol},
        witnesses={"x0": x0, "worst_point": worst_at, "derivative_norms": derivs, "norm_at_z0": s1_z0},
        parameters={"z0": z0, "Kd": Kd, "samples": samples, "seed": seed})
    if not is_max:
        report.verdict = INCONCLUSIVE
        report.witnesses["larger_point"] = complex(field.points[grid_max_idx])
        report.witnesses["larger_value"] = grid_max
        report.notes.append(f"z0 is not a maximum of s1: {grid_max:.12g} > {s1_z0:.12g}")
    elif not report.within_tolerance():
        report.verdict = REFUTED
    return report


def check_min_direction(F: MatrixFunction, region: Region, z0: complex, Kd: Optional[int] = None,
                        samples: Optional[int] = None, seed: Optional[int] = None) -> VerificationReport:
    """
    Mirror image for minimizing vectors: if F(z)x0 stays constant for a
    minimizing vector x0 of F(z0), then s_n(F(z)) <= ||F(z0)x0|| everywhere,
    so s_n peaks at z0.
    """
    Kd = settings.direction_derivatives if Kd is None else Kd
    samples = settings.factorization_samples if samples is None else samples
    seed = settings.seed if seed is None else seed
    z0 = complex(z0)
    _require_interior(region, z0)

    F0 = F.eval(z0)
    X = minimizing_subspace(F0).columns
    # choose the direction inside the minimizing subspace that the derivatives move least
    D = np.vstack([derivative(F, z0, k) for k in range(1, Kd + 1)]) @ X
    y = minimizing_vector(D.conj().T @ D)
    x0 = X @ y
    x0 = x0 / np.linalg.norm(x0)
    sn_z0 = float(np.linalg.norm(F0 @ x0))

    worst, worst_at, derivs = _direction_residuals(F, region, z0, x0, Kd, samples, seed)
    field = scan_field(F, region)
    sn = field.column(F.n)
    excess_idx = _grid_best(field.points, sn, field.valid, "max")
    excess = max(0.0, float(sn[excess_idx]) - sn_z0)
    tol = settings.direction_tol * (1.0 + frobenius_norm(F0))

    report = VerificationReport(
        "min-direction", CERTIFIED,
        residuals={"constancy": worst, "derivatives": max(derivs) if derivs else 0.0, "sn_excess": excess},
        tolerances={"constancy": tol, "derivatives": tol, "sn_excess": settings.constancy_tol},
        witnesses={"x0": x0, "worst_point": worst_at, "derivative_norms": derivs, "sn_at_z0": sn_z0},
        parameters={"z0": z0, "Kd": Kd, "samples": samples, "seed": seed})
    if worst > tol or (derivs and max(derivs) > tol):
        report.verdict = INCONCLUSIVE
        report.notes.append("No minimizing direction is constant along F; nothing to certify")
    elif excess > settings.constancy_tol:
        report.verdict = REFUTED
        report.witnesses["larger_point"] = complex(field.points[excess_idx])
    return report


@dataclass(eq=False)
class Factorization:
    z0: complex
    d: int
    sigma: float
    U: np.ndarray
    V: np.ndarray
    residual_offdiag: float
    residual_topblock: float
    inner: Optional[MatrixFunction]
    verdict: str
    samples: int

    def report(self) -> VerificationReport:
        tol = settings.direction_tol * self.sigma
        return VerificationReport(
            "factorize", self.verdict,
            residuals={"offdiag": self.residual_offdiag, "topblock": self.residual_topblock},
            tolerances={"offdiag": tol, "topblock": tol},
            witnesses={"d": self.d, "sigma": self.sigma, "has_inner": self.inner is not None},
            parameters={"z0": self.z0, "samples": self.samples})


def factorize_at_max(F: MatrixFunction, region: Region, z0: complex, tau: Optional[float] = None,
                     samples: Optional[int] = None, seed: Optional[int] = None,
                     field: Optional[SingularField] = None) -> Factorization:
    """
    Split F at an interior maximum of ||F|| as U* F(z) V* = sigma I_d (+) R(z).

    The splitting is read off the SVD of F(z0) and then tested at seeded
    random points of the region.
    """
    tau = settings.subspace_tau if tau is None else tau
    samples = settings.factorization_samples if samples is None else samples
    seed = settings.seed if seed is None else seed
    z0 = complex(z0)
    _require_interior(region, z0)

    field = field or scan_field(F, region)
    s1 = field.column(1)
    idx = _grid_best(field.points, s1, field.valid, "max")
    result = svd(F.eval(z0))
    sigma = float(result.S[0])
    scale = max(1.0, float(s1[idx]))
    if sigma < float(s1[idx]) - settings.constancy_tol * scale:
        raise NotAMaximumError(f"||F|| at {complex(field.points[idx])} is {float(s1[idx]):.12g}, above {sigma:.12g} at z0",
                               complex(field.points[idx]), float(s1[idx]))

    n = F.n
    d = int(np.sum(result.S >= sigma * (1.0 - tau)))
    Uh, Vh = result.U.conj().T, result.V.conj().T
    zs = region.sample(np.random.default_rng(seed), samples)
    values, flags = F.eval_many(zs)
    G = np.matmul(np.matmul(Uh, values[~flags]), Vh)
    top = np.sqrt(np.sum(np.abs(G[:, :d, :d] - sigma * np.eye(d)) ** 2, axis=(1, 2)))
    off = np.zeros_like(top)
    if d < n:
        off = np.maximum(np.sqrt(np.sum(np.abs(G[:, :d, d:]) ** 2, axis=(1, 2))),
                         np.sqrt(np.sum(np.abs(G[:, d:, :d]) ** 2, axis=(1, 2))))
    residual_top = float(np.max(top)) if top.size else 0.0
    residual_off = float(np.max(off)) if off.size else 0.0
    inner = TrailingBlock(UnitaryConjugate(Uh, F, Vh), d) if d < n else None

    verdict = CERTIFIED
    if max(residual_top, residual_off) > settings.direction_tol * sigma:
        verdict = REFUTED
        logging.warning(warning(f"Factorization residuals {residual_top:.3e}, {residual_off:.3e} exceed tolerance"))
    return Factorization(z0, d, sigma, np.array(result.U), np.array(result.V), residual_off, residual_top,
                         inner, verdict, int(np.sum(~flags)))


@dataclass(eq=False)
class IteratedFactorization:
    chain: List[Tuple[int, float]]
    residual: Optional[MatrixFunction]
    verdict: str

    def report(self) -> VerificationReport:
        return VerificationReport(
            "iterate", self.verdict,
            witnesses={"chain": [{"d": d, "sigma": s} for d, s in self.chain],
                       "residual_dimension": self.residual.n if self.residual is not None else 0})


def iterated_factorization(F: MatrixFunction, region: Region, tau: Optional[float] = None) -> IteratedFactorization:
    """Peel off sigma_j I_{d_j} blocks while the remaining block's norm has an interior maximum."""
    chain: List[Tuple[int, float]] = []
    current: Optional[MatrixFunction] = F
    verdict = CERTIFIED
    while current is not None:
        field = scan_field(current, region)
        peak = interior_maximum_of(field, 1)
        if not peak.attained:
            break
        fac = factorize_at_max(current, region, peak.location, tau, field=field)
        if fac.verdict != CERTIFIED:
            verdict = REFUTED
            break
        chain.append((fac.d, fac.sigma))
        logging.info(info(f"Split off {fac.sigma:.12g} I_{fac.d} at z0 = {fac.z0}"))
        current = fac.inner
    return IteratedFactorization(chain, current, verdict)


def constancy_report(F: MatrixFunction, region: Region) -> VerificationReport:
    """The five equivalent constancy statements, each judged on the grid; they must all agree."""
    field = scan_field(F, region, keep_matrices=True)
    tol = settings.constancy_tol
    f_dev, f_ref, f_worst = function_deviation(field)
    f_scale = max(1.0, f_ref)
    s_scale = field.scale()
    s_devs = [field.deviation(k) for k in range(1, field.n + 1)]
    attained = [interior_maximum_of(field, k).attained for k in range(1, field.n + 1)]
    frob = field.frobenius()[field.valid]
    frob_dev = float(np.max(frob) - np.min(frob))
    frob_peak = interior_maximum_of(field, None)

    conditions = {
        "function_constant": f_dev <= tol * f_scale,
        "singular_values_constant": all(dev <= tol * s_scale for dev in s_devs),
        "singular_values_interior_max": all(attained),
        "frobenius_constant": frob_dev <= tol * s_scale,
        "frobenius_interior_max": frob_peak.attained,
    }
    agree = len(set(conditions.values())) == 1
    report = VerificationReport(
        "constancy", CERTIFIED if agree else REFUTED,
        residuals={"function_deviation": f_dev, "frobenius_deviation": frob_dev,
                   **{f"s{k}_deviation": dev for k, dev in enumerate(s_devs, start=1)}},
        witnesses={"conditions": conditions, "interior_max_per_k": attained, "worst_point": f_worst},
        parameters={"tolerance": tol})
    if not agree:
        report.notes.append("Equivalent constancy statements disagree on this grid")
    return report


def check_min_principle(F: MatrixFunction, region: Region) -> VerificationReport:
    """
    A common interior minimizer of every s_k of a nonconstant F must be a
    zero of det F. Distinct minimizers are reported without a verdict.
    """
    field = scan_field(F, region, keep_matrices=True)
    n = field.n
    h = region.spacing
    tol = settings.constancy_tol
    scale = field.scale()
    minima = [locate_extremum(field, k, "min") for k in range(1, n + 1)]
    z_star = minima[-1].location
    common = True
    for k, ext in enumerate(minima, start=1):
        grid_min = float(np.min(field.column(k)[field.valid]))
        value_at_star = singular_value_objective(F, k)(z_star)
        if not (value_at_star <= grid_min + tol * scale or abs(ext.location - z_star) <= h):
            common = False

    f_dev, f_ref, _ = function_deviation(field)
    zeros = _refined_zeros(field, scale)
    report = VerificationReport(
        "min-principle", INCONCLUSIVE,
        witnesses={"minimizers": [m.to_dict() for m in minima], "zeros": zeros, "common_minimizer": z_star},
        parameters={"spacing": h, "tolerance": tol})

    if f_dev <= tol * max(1.0, f_ref):
        report.notes.append("F is constant on the grid; every point is a minimizer")
        return report
    if not common:
        report.notes.append("The s_k fields have distinct minimizers")
        return report
    if minima[-1].on_boundary:
        report.notes.append("The common minimizer lies on the boundary")
        return report

    F_star = F.eval(z_star)
    det_abs = abs(det(F_star))
    bound = 1e-8 * max(frobenius_norm(F_star), 1.0) ** n
    report.residuals["det_abs"] = det_abs
    report.tolerances["det_abs"] = bound
    report.verdict = CERTIFIED if det_abs <= bound else REFUTED
    return report


def _refined_zeros(field: SingularField, scale: float, limit: int = 8) -> List[complex]:
    """Refined zeros of s_n: separated low grid points polished by Nelder-Mead."""
    h = field.region.spacing
    sn = field.column(field.n)
    objective = singular_value_objective(field.function, field.n)
    order = np.flatnonzero(field.valid)[np.argsort(sn[field.valid], kind='stable')]
    seeds: List[complex] = []
    for idx in order:
        z = complex(field.points[idx])
        if all(abs(z - s) > 3.0 * h for s in seeds):
            seeds.append(z)
            if len(seeds) == limit:
                break
    zeros = []
    for z in seeds:
        location, value, _ = refine(field.region, objective, z, objective(z), "min", scale)
        if value <= 1e-8 * scale:
            zeros.append(location)
    return zeros


def check_frobenius_principle(F: MatrixFunction, region: Region) -> VerificationReport:
    """An interior maximum of ||F||_F forces F to be constant."""
    field = scan_field(F, region, keep_matrices=True)
    peak = interior_maximum_of(field, None)
    f_dev, f_ref, f_worst = function_deviation(field)
    tol = settings.constancy_tol * max(1.0, f_ref)
    report = VerificationReport(
        "frobenius", INCONCLUSIVE,
        residuals={"function_deviation": f_dev},
        tolerances={"function_deviation": tol},
        witnesses={"max_location": peak.location, "max_value": peak.value,
                   "boundary_location": peak.boundary_location, "boundary_value": peak.boundary_value})
    if not peak.attained:
        report.notes.append("The Frobenius norm peaks on the boundary")
        return report
    report.verdict = CERTIFIED if f_dev <= tol else REFUTED
    if report.verdict == REFUTED:
        report.witnesses["worst_point"] = f_worst
    return report


def check_max_norm_principle(F: MatrixFunction, region: Region) -> VerificationReport:
    """
    An interior maximum of ||F|| makes ||F|| constant. The rank-one
    functional Lambda(T) = y0* T x0 built from the maximum is the witness:
    it stays equal to ||F(z0)|| and below ||F(z)|| across the grid.
    """
    field = scan_field(F, region, keep_matrices=True)
    peak = interior_maximum_of(field, 1)
    scale = field.scale()
    tol = settings.constancy_tol * scale
    report = VerificationReport(
        "max-norm", INCONCLUSIVE,
        witnesses={"max_location": peak.location, "max_value": peak.value,
                   "boundary_location": peak.boundary_location, "boundary_value": peak.boundary_value})
    if not peak.attained:
        report.notes.append("||F|| peaks on the boundary")
        return report

    F0 = F.eval(peak.location)
    norm0 = float(svd(F0).S[0])
    valid = field.valid
    s1_dev = field.deviation(1)
    if norm0 == 0.0:
        lam_dev, bound_violation = 0.0, 0.0
    else:
        x0 = maximizing_subspace(F0).columns[:, 0]
        y0 = F0 @ x0 / norm0
        lam = np.einsum('i,bij,j->b', y0.conj(), field.matrices[valid], x0)
        lam_dev = float(np.max(np.abs(lam - norm0)))
        bound_violation = max(0.0, float(np.max(np.abs(lam) - field.column(1)[valid])))
        report.witnesses.update({"x0": x0, "y0": y0})
    report.residuals.update({"lambda_deviation": lam_dev, "bound_violation": bound_violation,
                             "s1_deviation": s1_dev})
    report.tolerances.update({"lambda_deviation": tol, "bound_violation": tol, "s1_deviation": tol})
    report.verdict = CERTIFIED if report.within_tolerance() else REFUTED
    return report


def refinement_report(F: MatrixFunction, region: Region, m: Optional[int] = None) -> VerificationReport:
    """If s_1..s_j all reach interior maxima, each of them is constant."""
    field = scan_field(F, region)
    m = field.n if m is None else min(m, field.n)
    scale = field.scale()
    tol = settings.constancy_tol * scale
    attained, deviations = [], []
    for k in range(1, m + 1):
        attained.append(interior_maximum_of(field, k).attained)
        deviations.append(field.deviation(k))
    run = 0
    while run < m and attained[run]:
        run += 1
    report = VerificationReport(
        "refinement", CERTIFIED,
        residuals={f"s{k}_deviation": deviations[k - 1] for k in range(1, run + 1)},
        tolerances={f"s{k}_deviation": tol for k in range(1, run + 1)},
        witnesses={"interior_max_per_k": attained, "leading_run": run},
        parameters={"m": m})
    if run == 0:
        report.verdict = INCONCLUSIVE
        report.notes.append("s1 has no interior maximum")
    elif not report.within_tolerance():
        report.verdict = REFUTED
        report.witnesses["nonconstant_k"] = [k for k in range(1, run + 1) if deviations[k - 1] > tol]
    return report
