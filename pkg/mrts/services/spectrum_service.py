"""
Spectrum service: time-resolved EPR intensities by resolvent solves, the eigenmode oracle,
powder averaging over (theta, phi) and J1 scans.

I(t, w) = | Tr{ rho(t) S_mw [i L - w]^-1 S_mw } |
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union
import logging
import math
import time

import numpy as np
from scipy.linalg import get_lapack_funcs, lu_factor, lu_solve, schur, solve_triangular
from scipy.signal import find_peaks

from ..core.basis import get_spin_system
from ..core.constants import (
    RESOLVENT_CONDITION_LIMIT,
    RESOLVENT_SOLVERS,
    DEFAULT_N_THETA,
    DEFAULT_N_PHI,
    DEFAULT_PEAK_PROMINENCE,
    ERROR_OMEGAS_NOT_INCREASING,
)
from ..core.exceptions import (
    InvalidParameterError,
    OrientationFailureError,
    SingularSystemError,
    handle_numerical_exception,
)
from ..core.hamiltonian import ModelParams, Orientation
from ..core.lindblad import Liouvillian, RateParams, build_liouvillian, devectorize, vectorize
from .dynamics_service import InitialStateSpec, get_dynamics_service

logger = logging.getLogger(__name__)

POWDER = "powder"
Mapper = Callable[[Callable, Iterable], Iterable]


# === GRID AND RESULT TYPES ===

@dataclass(frozen=True, eq=False)
class SpectrumGrid:
    """Microwave frequencies (rad/ns, strictly increasing), field (mT) and delay t (ns)."""

    omegas: np.ndarray
    B_mag: float
    t: float

    def __post_init__(self):
        omegas = np.asarray(self.omegas, dtype=float)
        if omegas.ndim != 1 or omegas.size == 0 or np.any(np.diff(omegas) <= 0):
            raise InvalidParameterError("omegas", f"{omegas.size} points", ERROR_OMEGAS_NOT_INCREASING)
        omegas.setflags(write=False)
        object.__setattr__(self, "omegas", omegas)

    @classmethod
    def uniform(cls, omega_min: float, omega_max: float, n_omega: int,
                B_mag: float, t: float) -> "SpectrumGrid":
        return cls(np.linspace(omega_min, omega_max, n_omega), B_mag, t)

    @property
    def step(self) -> float:
        return float(self.omegas[1] - self.omegas[0]) if self.omegas.size > 1 else 0.0


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Intensities on a grid, for one orientation or the powder average."""

    grid: SpectrumGrid
    intensities: np.ndarray
    orientation: Union[Orientation, str]
    evaluations: int = 1
    timings: List[Dict[str, float]] = field(default_factory=list)

    @property
    def is_powder(self) -> bool:
        return self.orientation == POWDER


# === OPERATORS AND SOLVES ===

def mw_operator(orient: Orientation) -> np.ndarray:
    """S_total . e_mw with e_mw = (-sin phi, cos phi, 0)."""
    return get_spin_system().total_spin.along(orient.mw_direction())


def _as_matrix(liouvillian: Union[Liouvillian, np.ndarray]) -> np.ndarray:
    return liouvillian.matrix if isinstance(liouvillian, Liouvillian) else np.asarray(liouvillian)


class ResolventSolver:
    """
    Applies [i L - w]^-1 for many w at one generator.

    'lu' factorizes i L - w I per frequency; 'schur' reduces i L once to upper-triangular
    form and back-substitutes per frequency.
    """

    def __init__(self, liouvillian: Union[Liouvillian, np.ndarray], solver: str = "lu"):
        if solver not in RESOLVENT_SOLVERS:
            raise InvalidParameterError("solver", solver, f"expected one of {RESOLVENT_SOLVERS}")
        self.solver = solver
        self.shifted = 1j * _as_matrix(liouvillian)
        self.size = self.shifted.shape[0]
        self._schur: Optional[Tuple[np.ndarray, np.ndarray]] = None
        if solver == "schur":
            triangular, vectors = schur(self.shifted, output="complex")
            self._schur = (triangular, vectors)

    def solve(self, omega: float, rhs: np.ndarray) -> np.ndarray:
        """Solve (i L - w I) y = rhs for a vectorized right-hand side."""
        if self._schur is not None:
            return self._solve_schur(omega, rhs)
        system = self.shifted - omega * np.eye(self.size)
        lu, piv = lu_factor(system, check_finite=False)
        condition = _condition_estimate(system, lu)
        if not math.isfinite(condition) or condition > RESOLVENT_CONDITION_LIMIT:
            raise SingularSystemError(omega, condition)
        return lu_solve((lu, piv), rhs, check_finite=False)

    def _solve_schur(self, omega: float, rhs: np.ndarray) -> np.ndarray:
        triangular, vectors = self._schur
        shifted = triangular - omega * np.eye(self.size)
        diagonal = np.abs(np.diag(shifted))
        smallest = float(diagonal.min())
        condition = float(diagonal.max()) / smallest if smallest > 0 else math.inf
        if condition > RESOLVENT_CONDITION_LIMIT:
            raise SingularSystemError(omega, condition)
        coefficients = solve_triangular(shifted, vectors.conj().T @ rhs, check_finite=False)
        return vectors @ coefficients

    def apply(self, omega: float, operator: np.ndarray) -> np.ndarray:
        dim = int(round(math.sqrt(self.size)))
        return devectorize(self.solve(omega, vectorize(operator)), dim)


def _condition_estimate(system: np.ndarray, lu: np.ndarray) -> float:
    """1-norm condition number estimate from the LU factors (LAPACK gecon)."""
    gecon, = get_lapack_funcs(("gecon",), (lu,))
    anorm = float(np.abs(system).sum(axis=0).max())
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0 or rcond == 0.0:
        return math.inf
    return 1.0 / float(rcond)


def resolvent_apply(liouvillian: Union[Liouvillian, np.ndarray], omega: float,
                    operator: np.ndarray, solver: str = "lu") -> np.ndarray:
    """devectorize( solve(i L - w I, vectorize(X)) )."""
    return ResolventSolver(liouvillian, solver).apply(omega, operator)


def intensity_resolvent(liouvillian: Union[Liouvillian, np.ndarray], rho: np.ndarray,
                        probe: np.ndarray, omegas: Sequence[float],
                        solver: str = "lu") -> np.ndarray:
    """|Tr{rho S R_w(S)}| for each w; works for any Hilbert dimension."""
    resolvent = ResolventSolver(liouvillian, solver)
    weight = vectorize((rho @ probe).T)
    rhs = vectorize(probe)
    return np.array([abs(weight @ resolvent.solve(w, rhs)) for w in omegas])


def intensity_eigenmodes(liouvillian: Union[Liouvillian, np.ndarray], rho: np.ndarray,
                         probe: np.ndarray, omegas: Sequence[float]) -> np.ndarray:
    """
    Same quantity through the spectral decomposition L = R diag(lambda) R^-1.

    Only sensible for small, diagonalizable generators.
    """
    eigenvalues, right = np.linalg.eig(_as_matrix(liouvillian))
    coefficients = np.linalg.solve(right, vectorize(probe))
    weights = vectorize((rho @ probe).T) @ right
    amplitudes = weights * coefficients
    omegas = np.asarray(omegas, dtype=float)
    denominators = 1j * eigenvalues[None, :] - omegas[:, None]
    return np.abs((amplitudes[None, :] / denominators).sum(axis=1))


# === SINGLE ORIENTATION ===

def spectrum_single(
    rho_t: np.ndarray,
    params: ModelParams,
    rates: RateParams,
    orient: Orientation,
    grid: SpectrumGrid,
    solver: str = "lu"
) -> Spectrum:
    """
    Intensities at one orientation from rho(t) at the same orientation.

    The Liouvillian is built at (orient, grid.t).
    """
    liouvillian = build_liouvillian(params, rates, orient, grid.t)
    intensities = intensity_resolvent(liouvillian, rho_t, mw_operator(orient), grid.omegas, solver)
    return Spectrum(grid, intensities, orient)


def spectrum_eigenmodes(
    rho_t: np.ndarray,
    params: ModelParams,
    rates: RateParams,
    orient: Orientation,
    grid: SpectrumGrid
) -> Spectrum:
    """Eigenmode evaluation of `spectrum_single`, used as an oracle."""
    liouvillian = build_liouvillian(params, rates, orient, grid.t)
    intensities = intensity_eigenmodes(liouvillian, rho_t, mw_operator(orient), grid.omegas)
    return Spectrum(grid, intensities, orient)


# === POWDER AVERAGE ===

def orientation_grid(n_theta: int = DEFAULT_N_THETA, n_phi: int = DEFAULT_N_PHI,
                     weighted: bool = False) -> List[Tuple[Orientation, float]]:
    """
    Uniform (theta, phi) grid with normalised weights.

    theta takes cell midpoints (k + 1/2) pi / n_theta, phi takes 2 pi k / n_phi.
    Weights are uniform, or proportional to sin(theta) when `weighted`.
    """
    thetas = (np.arange(n_theta) + 0.5) * math.pi / n_theta
    phis = 2.0 * math.pi * np.arange(n_phi) / n_phi
    raw = np.sin(thetas) if weighted else np.ones(n_theta)
    points = []
    for theta, w in zip(thetas, raw):
        for phi in phis:
            points.append((Orientation(float(theta), float(phi)), float(w)))
    total = sum(w for _, w in points)
    return [(orient, w / total) for orient, w in points]


@dataclass(frozen=True, eq=False)
class OrientationTask:
    """Everything a worker needs for one orientation (picklable)."""

    index: int
    orientation: Orientation
    weight: float
    params: ModelParams
    rates: RateParams
    initial: Union[InitialStateSpec, np.ndarray]
    grid: SpectrumGrid
    solver: str = "lu"


@dataclass(frozen=True, eq=False)
class OrientationResult:
    index: int
    intensities: Optional[np.ndarray]
    seconds: float
    error: Optional[str] = None


def evaluate_orientation(task: OrientationTask) -> OrientationResult:
    """Propagate to grid.t and evaluate the spectrum at one orientation; never raises."""
    started = time.perf_counter()
    try:
        if isinstance(task.initial, InitialStateSpec):
            rho0 = task.initial.build(task.params, task.orientation)
        else:
            rho0 = task.initial
        rho_t = get_dynamics_service().state_at(
            task.params, task.rates, task.orientation, rho0, task.grid.t
        )
        spectrum = spectrum_single(rho_t, task.params, task.rates, task.orientation,
                                   task.grid, task.solver)
        return OrientationResult(task.index, spectrum.intensities, time.perf_counter() - started)
    except Exception as e:
        return OrientationResult(task.index, None, time.perf_counter() - started, str(e))


def pairwise_sum(rows: np.ndarray) -> np.ndarray:
    """Fixed-order pairwise reduction over axis 0."""
    if rows.shape[0] == 1:
        return rows[0].copy()
    middle = rows.shape[0] // 2
    return pairwise_sum(rows[:middle]) + pairwise_sum(rows[middle:])


def powder_average(
    params: ModelParams,
    rates: RateParams,
    rho0: Union[InitialStateSpec, np.ndarray],
    t: float,
    grid: SpectrumGrid,
    n_theta: int = DEFAULT_N_THETA,
    n_phi: int = DEFAULT_N_PHI,
    weighted: bool = False,
    mapper: Optional[Mapper] = None,
    solver: str = "lu"
) -> Spectrum:
    """
    Orientation-averaged spectrum.

    Args:
        params: Model parameters
        rates: Incoherent rates
        rho0: rho(0), or a recipe evaluated per orientation
        t: Delay in ns at which rho is probed
        grid: Frequency grid; its t is replaced by `t`
        n_theta, n_phi: Orientation counts
        weighted: Use the sin(theta) sphere measure instead of uniform weights
        mapper: map-like callable (e.g. Pool.imap_unordered); builtin map by default
        solver: 'lu' or 'schur'

    Returns:
        Spectrum with orientation 'powder' and per-orientation timings

    Raises:
        OrientationFailureError: the first failing orientation in index order
    """
    if grid.t != t:
        grid = SpectrumGrid(grid.omegas, grid.B_mag, t)
    points = orientation_grid(n_theta, n_phi, weighted)
    tasks = [
        OrientationTask(k, orient, w, params, rates, rho0, grid, solver)
        for k, (orient, w) in enumerate(points)
    ]
    total = len(tasks)
    logger.info(f"Powder average over {total} orientations ({n_theta} x {n_phi}), solver={solver}")

    mapper = mapper or map
    started = time.perf_counter()
    results: Dict[int, OrientationResult] = {}
    step = max(1, total // 10)
    for result in mapper(evaluate_orientation, tasks):
        results[result.index] = result
        if len(results) % step == 0 or len(results) == total:
            logger.info(f"Orientations done: {len(results)}/{total} "
                        f"({time.perf_counter() - started:.1f} s)")

    for k in range(total):
        failure = results[k].error
        if failure is not None:
            orient = tasks[k].orientation
            raise OrientationFailureError(k, orient.theta, orient.phi, failure)

    rows = np.stack([tasks[k].weight * results[k].intensities for k in range(total)])
    timings = [
        {
            "index": k,
            "theta": tasks[k].orientation.theta,
            "phi": tasks[k].orientation.phi,
            "seconds": results[k].seconds,
        }
        for k in range(total)
    ]
    return Spectrum(grid, pairwise_sum(rows), POWDER, evaluations=total, timings=timings)


# === J1 SCAN ===

def spectrum_scan_j1(
    j1_values: Sequence[float],
    params: ModelParams,
    rates: RateParams,
    rho0: Union[InitialStateSpec, np.ndarray],
    grid: SpectrumGrid,
    orientation: Optional[Orientation] = None,
    n_theta: int = DEFAULT_N_THETA,
    n_phi: int = DEFAULT_N_PHI,
    weighted: bool = False,
    mapper: Optional[Mapper] = None,
    solver: str = "lu"
) -> List[Spectrum]:
    """
    One spectrum per J1 value (rad/ns) with J2 = J1, everything else fixed.

    A single-orientation spectrum is computed when `orientation` is given, the powder
    average otherwise.
    """
    spectra = []
    for j1 in j1_values:
        scanned = params.with_updates(J1=float(j1), J2=float(j1))
        logger.info(f"J1 scan point J1=J2={j1:.6g} rad/ns")
        if orientation is not None:
            rho = rho0.build(scanned, orientation) if isinstance(rho0, InitialStateSpec) else rho0
            rho_t = get_dynamics_service().state_at(scanned, rates, orientation, rho, grid.t)
            spectra.append(spectrum_single(rho_t, scanned, rates, orientation, grid, solver))
        else:
            spectra.append(powder_average(scanned, rates, rho0, grid.t, grid, n_theta, n_phi,
                                          weighted, mapper, solver))
    return spectra


def count_local_maxima(intensities: Sequence[float],
                       prominence: float = DEFAULT_PEAK_PROMINENCE) -> int:
    """Local maxima whose prominence exceeds `prominence` times the intensity range."""
    return len(find_local_maxima(intensities, prominence))


def find_local_maxima(intensities: Sequence[float],
                      prominence: float = DEFAULT_PEAK_PROMINENCE) -> np.ndarray:
    values = np.asarray(intensities, dtype=float)
    span = float(np.ptp(values)) if values.size else 0.0
    if span == 0.0:
        return np.array([], dtype=int)
    peaks, _ = find_peaks(values, prominence=prominence * span)
    return peaks


class SpectrumService:
    """Runs spectrum jobs and reports outcomes as result dicts."""

    def __init__(self, solver: str = "lu"):
        if solver not in RESOLVENT_SOLVERS:
            raise InvalidParameterError("solver", solver, f"expected one of {RESOLVENT_SOLVERS}")
        self.solver = solver

    def run_single(self, params: ModelParams, rates: RateParams,
                   rho0: Union[InitialStateSpec, np.ndarray], orient: Orientation,
                   grid: SpectrumGrid) -> Dict[str, Any]:
        try:
            rho = rho0.build(params, orient) if isinstance(rho0, InitialStateSpec) else rho0
            rho_t = get_dynamics_service().state_at(params, rates, orient, rho, grid.t)
            spectrum = spectrum_single(rho_t, params, rates, orient, grid, self.solver)
            return {"success": True, "spectrum": spectrum}
        except Exception as e:
            logger.error(f"Single-orientation spectrum failed: {e}")
            return handle_numerical_exception(e)

    def run_powder(self, params: ModelParams, rates: RateParams,
                   rho0: Union[InitialStateSpec, np.ndarray], grid: SpectrumGrid,
                   n_theta: int, n_phi: int, weighted: bool = False,
                   mapper: Optional[Mapper] = None) -> Dict[str, Any]:
        try:
            spectrum = powder_average(params, rates, rho0, grid.t, grid, n_theta, n_phi,
                                      weighted, mapper, self.solver)
            return {"success": True, "spectrum": spectrum}
        except Exception as e:
            logger.error(f"Powder average failed: {e}")
            return handle_numerical_exception(e)

    def run_scan(self, j1_values: Sequence[float], params: ModelParams, rates: RateParams,
                 rho0: Union[InitialStateSpec, np.ndarray], grid: SpectrumGrid,
                 orientation: Optional[Orientation] = None, n_theta: int = DEFAULT_N_THETA,
                 n_phi: int = DEFAULT_N_PHI, weighted: bool = False,
                 mapper: Optional[Mapper] = None) -> Dict[str, Any]:
        try:
            spectra = spectrum_scan_j1(j1_values, params, rates, rho0, grid, orientation,
                                       n_theta, n_phi, weighted, mapper, self.solver)
            return {"success": True, "spectra": spectra}
        except Exception as e:
            logger.error(f"J1 scan failed: {e}")
            return handle_numerical_exception(e)


_spectrum_service: Optional[SpectrumService] = None


def initialize_spectrum_service(solver: str = "lu") -> SpectrumService:
    """Initialize the global spectrum service instance."""
    global _spectrum_service
    _spectrum_service = SpectrumService(solver)
    return _spectrum_service


def get_spectrum_service() -> SpectrumService:
    """Get the global spectrum service instance, creating it on first use."""
    global _spectrum_service
    if _spectrum_service is None:
        _spectrum_service = SpectrumService()
    return _spectrum_service


def reset_spectrum_service() -> None:
    """Reset the global spectrum service instance (for testing)."""
    global _spectrum_service
    _spectrum_service = None
