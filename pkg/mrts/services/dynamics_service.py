"""
Dynamics service: density-matrix propagation under the Liouvillian and the observables
read off trajectories (radical RDM, coherences, populations, tomography).
"""

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
import logging
import math

import numpy as np
from scipy.linalg import expm
from scipy.signal import find_peaks

from ..core.basis import get_spin_system, radical_config_index, resolve_state
from ..core.constants import (
    HILBERT_DIM,
    SINGLET_BLOCK_DIM,
    COUPLER_DIM,
    MANIFOLDS,
    MANIFOLD_S0,
    MANIFOLD_T1,
    KB_OVER_HBAR,
    TRACE_DRIFT_TOL,
    HERMITICITY_TOL,
    POSITIVITY_TOL,
    PROPAGATOR_CACHE_DIGITS,
    DEFAULT_PEAK_PROMINENCE,
    ERROR_TIMES_NOT_INCREASING,
)
from ..core.exceptions import (
    DimensionMismatchError,
    HermiticityError,
    InvalidParameterError,
    PositivityError,
    TraceDriftError,
    handle_numerical_exception,
)
from ..core.hamiltonian import ModelParams, Orientation, h_ground
from ..core.lindblad import RateParams, build_liouvillian, devectorize, vectorize

logger = logging.getLogger(__name__)

PROPAGATOR_CACHE_SIZE = 16


# === INITIAL STATES ===

def maximally_mixed() -> np.ndarray:
    return np.eye(HILBERT_DIM, dtype=complex) / HILBERT_DIM


def pure_state(label: str) -> np.ndarray:
    """|psi><psi| for any label accepted by the spin system."""
    psi = resolve_state(label)
    return np.outer(psi, psi.conj())


def initial_state(params: ModelParams, orient: Orientation,
                  temperature_K: Optional[float] = None) -> np.ndarray:
    """
    Thermal state of the ground-manifold Hamiltonian, zero outside S0.

    Args:
        params: Model parameters (J0, g_r, B enter)
        orient: Field orientation
        temperature_K: Temperature in K; None or inf gives I/4 on S0

    Returns:
        20x20 density matrix
    """
    rho = np.zeros((HILBERT_DIM, HILBERT_DIM), dtype=complex)
    sl = get_spin_system().basis.block(MANIFOLD_S0)
    if temperature_K is None or math.isinf(temperature_K):
        rho[sl, sl] = np.eye(SINGLET_BLOCK_DIM) / SINGLET_BLOCK_DIM
        return rho
    if temperature_K <= 0:
        raise InvalidParameterError("temperature_K", temperature_K, "must be > 0")

    energies, vectors = np.linalg.eigh(h_ground(params, orient))
    beta = 1.0 / (KB_OVER_HBAR * temperature_K)
    weights = np.exp(-beta * (energies - energies.min()))
    weights /= weights.sum()
    rho[sl, sl] = (vectors * weights) @ vectors.conj().T
    return rho


@dataclass(frozen=True)
class InitialStateSpec:
    """Picklable recipe for rho(0); thermal states depend on the orientation."""

    kind: str = "thermal"
    temperature_K: Optional[float] = None
    label: Optional[str] = None

    def build(self, params: ModelParams, orient: Orientation) -> np.ndarray:
        if self.kind == "thermal":
            return initial_state(params, orient, self.temperature_K)
        if self.kind == "pure":
            return pure_state(self.label)
        if self.kind == "maximally_mixed":
            return maximally_mixed()
        raise InvalidParameterError("initial_state.kind", self.kind, "unknown kind")


# === STATE CHECKS ===

def check_state(rho: np.ndarray, t: float, reference_trace: float = 1.0) -> Dict[str, float]:
    """
    Validate a propagated state; raise instead of repairing it.

    Returns:
        Dict with trace_drift, hermiticity and min_eigenvalue
    """
    trace = complex(np.trace(rho))
    drift = abs(trace - reference_trace)
    if drift > TRACE_DRIFT_TOL:
        raise TraceDriftError(t, trace, TRACE_DRIFT_TOL)
    residual = float(np.max(np.abs(rho - rho.conj().T)))
    if residual > HERMITICITY_TOL:
        raise HermiticityError(t, residual, HERMITICITY_TOL)
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    if min_eig < -POSITIVITY_TOL:
        raise PositivityError(t, min_eig, POSITIVITY_TOL)
    return {"trace_drift": drift, "hermiticity": residual, "min_eigenvalue": min_eig}


def _validate_initial(rho0: np.ndarray) -> np.ndarray:
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (HILBERT_DIM, HILBERT_DIM):
        raise DimensionMismatchError(rho0.shape, (HILBERT_DIM, HILBERT_DIM))
    check_state(rho0, 0.0)
    return rho0


def _validate_times(times: Sequence[float]) -> np.ndarray:
    grid = np.asarray(times, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise InvalidParameterError("times", f"{grid.size} points", ERROR_TIMES_NOT_INCREASING)
    return grid


# === TRAJECTORY ===

@dataclass(frozen=True, eq=False)
class Trajectory:
    """States rho(t_k) on a time grid (ns) with the parameters that produced them."""

    times: np.ndarray
    states: np.ndarray
    params: ModelParams
    rates: RateParams
    orientation: Orientation
    diagnostics: Dict[str, float] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    def nearest_index(self, t: float) -> int:
        """Index of the grid point closest to t; ties go to the earlier point."""
        return int(np.argmin(np.abs(self.times - t)))


def _segments(t0: float, t1: float, window: Tuple[float, float]) -> List[Tuple[float, float]]:
    """Split [t0, t1] at the pulse edges."""
    cuts = [t0] + [edge for edge in window if t0 < edge < t1] + [t1]
    return [(a, b) for a, b in zip(cuts[:-1], cuts[1:]) if b > a]


class PropagatorCache:
    """LRU cache of exp(L dt) keyed by generator identity and rounded step."""

    def __init__(self, max_size: int = PROPAGATOR_CACHE_SIZE):
        self.max_size = max_size
        self.cache: "OrderedDict[Any, np.ndarray]" = OrderedDict()
        self.hits = 0
        self.misses = 0

    def get(self, key) -> Optional[np.ndarray]:
        if key in self.cache:
            self.cache.move_to_end(key)
            self.hits += 1
            return self.cache[key]
        self.misses += 1
        return None

    def put(self, key, propagator: np.ndarray) -> None:
        self.cache[key] = propagator
        self.cache.move_to_end(key)
        while len(self.cache) > self.max_size:
            self.cache.popitem(last=False)

    def clear(self) -> None:
        self.cache.clear()
        self.hits = 0
        self.misses = 0

    def size(self) -> int:
        return len(self.cache)

    def stats(self) -> Dict[str, int]:
        return {"size": self.size(), "max_size": self.max_size, "hits": self.hits, "misses": self.misses}


class DynamicsService:
    """Propagates density matrices and extracts trajectory observables."""

    def __init__(self, cache_size: int = PROPAGATOR_CACHE_SIZE):
        self.cache = PropagatorCache(cache_size)

    def _propagator(self, generator: np.ndarray, key, dt: float) -> np.ndarray:
        cache_key = (key, round(dt, PROPAGATOR_CACHE_DIGITS))
        propagator = self.cache.get(cache_key)
        if propagator is None:
            propagator = expm(generator * dt)
            self.cache.put(cache_key, propagator)
        else:
            logger.debug(f"Propagator cache hit for dt={dt:.6g} ns")
        return propagator

    def propagate(
        self,
        params: ModelParams,
        rates: RateParams,
        orient: Orientation,
        rho0: np.ndarray,
        times: Sequence[float],
        check: bool = True
    ) -> Trajectory:
        """
        Propagate rho0 (given at times[0]) across the grid.

        Each constant-V segment uses the exact exponential of L dt; the grid is split at
        the pulse edges so the drive switches exactly at t_on and t_off.

        Args:
            params: Model parameters
            rates: Incoherent rates
            orient: Field orientation
            rho0: Initial 20x20 density matrix
            times: Strictly increasing grid in ns
            check: Validate trace, Hermiticity and positivity at every stored point

        Returns:
            Trajectory over the grid

        Raises:
            TraceDriftError, HermiticityError, PositivityError: a stored state is invalid
        """
        grid = _validate_times(times)
        rho0 = _validate_initial(rho0)

        t_on, t_off = params.pulse_window
        generators: Dict[bool, np.ndarray] = {}

        def generator(drive_on: bool) -> np.ndarray:
            # t_off itself is always outside the half-open window
            if drive_on not in generators:
                t_probe = t_on if drive_on else t_off
                generators[drive_on] = build_liouvillian(params, rates, orient, t_probe).matrix
            return generators[drive_on]

        states = np.empty((grid.size, HILBERT_DIM, HILBERT_DIM), dtype=complex)
        states[0] = rho0
        vec = vectorize(rho0)
        worst = {"trace_drift": 0.0, "hermiticity": 0.0, "min_eigenvalue": 0.0}
        if check:
            worst = check_state(rho0, float(grid[0]))

        for k in range(1, grid.size):
            for a, b in _segments(float(grid[k - 1]), float(grid[k]), (t_on, t_off)):
                drive_on = params.V != 0.0 and t_on <= 0.5 * (a + b) < t_off
                key = (params, rates, orient, drive_on)
                vec = self._propagator(generator(drive_on), key, b - a) @ vec
            states[k] = devectorize(vec)
            if check:
                stats = check_state(states[k], float(grid[k]))
                worst["trace_drift"] = max(worst["trace_drift"], stats["trace_drift"])
                worst["hermiticity"] = max(worst["hermiticity"], stats["hermiticity"])
                worst["min_eigenvalue"] = min(worst["min_eigenvalue"], stats["min_eigenvalue"])

        logger.debug(
            f"Propagated {grid.size} points to t={grid[-1]:.6g} ns at "
            f"(theta={orient.theta:.4f}, phi={orient.phi:.4f})"
        )
        return Trajectory(grid, states, params, rates, orient, worst)

    def state_at(
        self,
        params: ModelParams,
        rates: RateParams,
        orient: Orientation,
        rho0: np.ndarray,
        t: float
    ) -> np.ndarray:
        """rho(t) propagated from rho0 at t = 0."""
        if t == 0.0:
            return _validate_initial(rho0)
        return self.propagate(params, rates, orient, rho0, [0.0, t]).states[-1]

    def run_dynamics(
        self,
        params: ModelParams,
        rates: RateParams,
        orient: Orientation,
        rho0: np.ndarray,
        times: Sequence[float]
    ) -> Dict[str, Any]:
        """Propagate and wrap the outcome in a result dict."""
        try:
            trajectory = self.propagate(params, rates, orient, rho0, times)
            logger.info(f"Trajectory with {len(trajectory)} points, diagnostics {trajectory.diagnostics}")
            return {"success": True, "trajectory": trajectory}
        except Exception as e:
            logger.error(f"Propagation failed: {e}")
            return handle_numerical_exception(e)

    def get_cache_stats(self) -> Dict[str, int]:
        return self.cache.stats()

    def clear_cache(self) -> None:
        self.cache.clear()


# === OBSERVABLES ===

def reduce_to_radicals(rho: np.ndarray) -> np.ndarray:
    """
    Two-radical reduced density matrix in the |uu>, |ud>, |du>, |dd> basis.

    Sum of the S0 block, the S1 block and the coupler-traced T1 block.
    """
    rho = np.asarray(rho)
    if rho.shape != (HILBERT_DIM, HILBERT_DIM):
        raise DimensionMismatchError(rho.shape, (HILBERT_DIM, HILBERT_DIM))
    basis = get_spin_system().basis
    rdm = np.zeros((SINGLET_BLOCK_DIM, SINGLET_BLOCK_DIM), dtype=complex)
    for name in MANIFOLDS:
        block = rho[basis.block(name), basis.block(name)]
        if name == MANIFOLD_T1:
            block = block.reshape(SINGLET_BLOCK_DIM, COUPLER_DIM, SINGLET_BLOCK_DIM, COUPLER_DIM)
            block = np.einsum("icjc->ij", block)
        rdm += block
    return rdm


def radical_rdms(traj: Trajectory) -> np.ndarray:
    return np.stack([reduce_to_radicals(rho) for rho in traj.states])


def coherence_trace(traj: Trajectory, bra: Union[str, int], ket: Union[str, int]) -> np.ndarray:
    """Complex RDM element <bra|RDM|ket> per time point; take np.abs for the magnitude."""
    i, j = radical_config_index(bra), radical_config_index(ket)
    return radical_rdms(traj)[:, i, j]


def population_trace(traj: Trajectory, label: str) -> np.ndarray:
    """<psi|rho(t)|psi> for a labelled state."""
    psi = resolve_state(label)
    values = np.einsum("i,tij,j->t", psi.conj(), traj.states, psi)
    return values.real


def manifold_populations(traj: Trajectory) -> Dict[str, np.ndarray]:
    """Trace of each manifold block per time point."""
    basis = get_spin_system().basis
    return {
        name: np.einsum("tii->t", traj.states[:, basis.block(name), basis.block(name)]).real
        for name in MANIFOLDS
    }


@dataclass(frozen=True, eq=False)
class Tomography:
    """Radical RDM at one grid point."""

    time: float
    index: int
    rdm: np.ndarray

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.rdm)


def tomography_snapshot(traj: Trajectory, t: float) -> Tomography:
    """RDM at the grid point nearest to t (earlier point on ties)."""
    index = traj.nearest_index(t)
    if not math.isclose(traj.times[index], t, rel_tol=1e-9, abs_tol=1e-12):
        logger.debug(f"Tomography at t={t:.6g} ns uses grid point {traj.times[index]:.6g} ns")
    return Tomography(float(traj.times[index]), index, reduce_to_radicals(traj.states[index]))


@dataclass(frozen=True, eq=False)
class Extrema:
    maxima: np.ndarray
    minima: np.ndarray

    @property
    def count(self) -> int:
        return len(self.maxima) + len(self.minima)


def _prominence(series: np.ndarray, relative: float) -> float:
    span = float(np.ptp(series)) if series.size else 0.0
    return relative * span


def oscillation_extrema(series: Sequence[float],
                        prominence: float = DEFAULT_PEAK_PROMINENCE) -> Extrema:
    """Interior maxima and minima with prominence relative to the series range."""
    values = np.asarray(series, dtype=float)
    if values.size < 3 or np.ptp(values) == 0.0:
        empty = np.array([], dtype=int)
        return Extrema(empty, empty)
    threshold = _prominence(values, prominence)
    maxima, _ = find_peaks(values, prominence=threshold)
    minima, _ = find_peaks(-values, prominence=threshold)
    return Extrema(maxima, minima)


def rise_then_decay(series: Sequence[float], start_tol: float = 1e-6,
                    decay_fraction: float = 0.5) -> bool:
    """True when a non-negative series starts near zero, peaks inside, and falls off."""
    values = np.abs(np.asarray(series))
    if values.size < 3:
        return False
    peak = int(np.argmax(values))
    if peak in (0, values.size - 1) or values[peak] <= start_tol:
        return False
    return values[0] <= start_tol and values[-1] <= decay_fraction * values[peak]


# === SERVICE SINGLETON ===

_dynamics_service: Optional[DynamicsService] = None


def initialize_dynamics_service(cache_size: int = PROPAGATOR_CACHE_SIZE) -> DynamicsService:
    """Initialize the global dynamics service instance."""
    global _dynamics_service
    _dynamics_service = DynamicsService(cache_size)
    return _dynamics_service


def get_dynamics_service() -> DynamicsService:
    """Get the global dynamics service instance, creating it on first use."""
    global _dynamics_service
    if _dynamics_service is None:
        _dynamics_service = DynamicsService()
    return _dynamics_service


def reset_dynamics_service() -> None:
    """Reset the global dynamics service instance (for testing)."""
    global _dynamics_service
    _dynamics_service = None


def propagate(params: ModelParams, rates: RateParams, orient: Orientation,
              rho0: np.ndarray, times: Sequence[float]) -> Trajectory:
    return get_dynamics_service().propagate(params, rates, orient, rho0, times)
