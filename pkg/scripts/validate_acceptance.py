#!/usr/bin/env python3
"""
Full-scale acceptance validation for the MRTS simulator.

Runs the checks that are too slow for the unit suite: structure counts, the qualitative
trajectory and spectrum shapes of the default config, powder determinism and worker
scaling, and grid-refinement stability. Exits 0 when every check passes.

    python scripts/validate_acceptance.py --config configs/default.toml --workers 8
    python scripts/validate_acceptance.py --quick      # 10 x 20 grid, no scaling run
"""

import argparse
import logging
import os
import sys
import time
from pathlib import Path
from typing import Callable, List, Tuple

import numpy as np

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from mrts.core.basis import get_spin_system
from mrts.core.config import RunConfig, load_config, time_grid
from mrts.core.constants import (
    EXPECTED_JUMP_COUNTS,
    HILBERT_DIM,
    LIOUVILLE_DIM,
    MU_B_OVER_HBAR,
)
from mrts.core.lindblad import all_jump_sets, build_liouvillian
from mrts.core.units import to_internal
from mrts.main import LOG_FORMAT, worker_pool
from mrts.services.dynamics_service import (
    InitialStateSpec,
    coherence_trace,
    get_dynamics_service,
    oscillation_extrema,
    population_trace,
    rise_then_decay,
)
from mrts.services.spectrum_service import (
    SpectrumGrid,
    count_local_maxima,
    find_local_maxima,
    orientation_grid,
    powder_average,
)

logger = logging.getLogger("validate_acceptance")


class AcceptanceValidator:
    """Runs named checks and records pass/fail."""

    def __init__(self, config: RunConfig, workers: int, n_theta: int, n_phi: int,
                 scaling: bool, log_level: str):
        self.config = config
        self.workers = workers
        self.n_theta = n_theta
        self.n_phi = n_phi
        self.scaling = scaling
        self.log_level = log_level
        self.params = config.model.to_params()
        self.rates = config.rates.to_rates()
        section = config.initial_state
        self.spec = InitialStateSpec(section.kind, section.temperature_K, section.label)
        self.grid = SpectrumGrid.uniform(config.spectrum.omega_min, config.spectrum.omega_max,
                                         config.spectrum.n_omega, self.params.B_mag,
                                         config.spectrum.t)
        self.results: List[Tuple[str, bool]] = []

    def validate(self, name: str, check: Callable[[], bool]) -> bool:
        print(f"🔍 Validating: {name}")
        started = time.perf_counter()
        try:
            success = bool(check())
        except Exception as e:
            logger.exception(f"{name} raised: {e}")
            success = False
        status = "✅ PASS" if success else "❌ FAIL"
        print(f"  {status} ({time.perf_counter() - started:.1f} s)")
        self.results.append((name, success))
        return success

    def _powder(self, params, n_theta, n_phi, workers):
        with worker_pool(workers, self.log_level) as mapper:
            return powder_average(params, self.rates, self.spec, self.grid.t, self.grid,
                                  n_theta, n_phi, self.config.orientation.weighted, mapper,
                                  self.config.spectrum.solver)

    # === CHECKS ===

    def check_structure(self) -> bool:
        system = get_spin_system()
        counts = {js.name: len(js) for js in all_jump_sets(self.rates)}
        liouvillian = build_liouvillian(self.params, self.rates, self.config.orientation.single(), 0.0)
        print(f"  Hilbert {system.dim}, Liouville {liouvillian.matrix.shape[0]}, jumps {counts}")
        return (
            system.dim == HILBERT_DIM
            and liouvillian.matrix.shape == (LIOUVILLE_DIM, LIOUVILLE_DIM)
            and counts == EXPECTED_JUMP_COUNTS
            and len(orientation_grid()) == 5000
        )

    def check_trajectory_shapes(self) -> bool:
        section = self.config.dynamics
        orient = self.config.orientation.single()
        times = time_grid(self.config.time)
        rho0 = self.spec.build(self.params, orient)
        trajectory = get_dynamics_service().propagate(self.params, self.rates, orient, rho0, times)

        coherence = np.abs(coherence_trace(trajectory, section.coherence_bra, section.coherence_ket))
        envelope = rise_then_decay(coherence)
        print(f"  coherence: start {coherence[0]:.3e}, peak {coherence.max():.3e}, "
              f"end {coherence[-1]:.3e}, rise-then-decay {envelope}")

        population = population_trace(trajectory, section.populations[0])
        extrema = oscillation_extrema(population, section.peak_prominence)
        maxima = population[extrema.maxima]
        non_increasing = bool(np.all(np.diff(maxima) <= 1e-12))
        print(f"  {section.populations[0]}: {extrema.count} extrema, maxima non-increasing "
              f"{non_increasing}")
        return envelope and extrema.count >= 3 and non_increasing

    def check_spectrum_features(self) -> bool:
        prominence = self.config.spectrum.peak_prominence
        weak = self._powder(self.params.with_updates(J1=to_internal(-10.0, "mT"),
                                                     J2=to_internal(-10.0, "mT")),
                            self.n_theta, self.n_phi, self.workers)
        strong = self._powder(self.params.with_updates(J1=to_internal(-1.0e5, "mT"),
                                                       J2=to_internal(-1.0e5, "mT")),
                              self.n_theta, self.n_phi, self.workers)
        weak_count = count_local_maxima(weak.intensities, prominence)
        strong_count = count_local_maxima(strong.intensities, prominence)

        omega0 = self.params.g_r * MU_B_OVER_HBAR * self.params.B_mag
        peaks = self.grid.omegas[find_local_maxima(weak.intensities, prominence)]
        near = bool(np.any(np.abs(peaks - omega0) <= 0.05 * omega0))
        print(f"  local maxima: J1=-10 mT {weak_count}, J1=-1e5 mT {strong_count}; "
              f"feature near {omega0:.2f} rad/ns {near}")
        return weak_count > strong_count and near

    def check_determinism_and_scaling(self) -> bool:
        started = time.perf_counter()
        serial = self._powder(self.params, self.n_theta, self.n_phi, 1)
        serial_seconds = time.perf_counter() - started

        started = time.perf_counter()
        parallel = self._powder(self.params, self.n_theta, self.n_phi, self.workers)
        parallel_seconds = time.perf_counter() - started

        identical = serial.intensities.tobytes() == parallel.intensities.tobytes()
        speedup = serial_seconds / parallel_seconds
        print(f"  {serial.evaluations} orientations: 1 worker {serial_seconds:.1f} s, "
              f"{self.workers} workers {parallel_seconds:.1f} s, speedup {speedup:.2f}, "
              f"identical {identical}")
        if self.workers > 8:
            return identical
        return identical and speedup >= 0.7 * self.workers and serial_seconds < 1800.0

    def check_grid_refinement(self) -> bool:
        coarse = self._powder(self.params, self.n_theta, self.n_phi, self.workers)
        fine = self._powder(self.params, 2 * self.n_theta, 2 * self.n_phi, self.workers)
        change = np.linalg.norm(fine.intensities - coarse.intensities) / np.linalg.norm(fine.intensities)
        print(f"  relative L2 change on doubling the grid: {change:.4%}")
        return change <= 0.01

    def run(self) -> bool:
        print("🎯 MRTS acceptance validation")
        print("=" * 60)
        self.validate("Structure counts", self.check_structure)
        self.validate("Trajectory envelope and oscillations", self.check_trajectory_shapes)
        self.validate("Spectrum features against J1", self.check_spectrum_features)
        if self.scaling:
            self.validate("Powder determinism and worker scaling", self.check_determinism_and_scaling)
        self.validate("Grid-refinement stability", self.check_grid_refinement)

        passed = sum(1 for _, ok in self.results if ok)
        print("=" * 60)
        print(f"📊 {passed}/{len(self.results)} checks passed")
        for name, ok in self.results:
            if not ok:
                print(f"  ❌ {name}")
        return passed == len(self.results)


def main() -> int:
    parser = argparse.ArgumentParser(description="Full-scale MRTS acceptance checks.")
    parser.add_argument("--config", default=str(project_root / "configs" / "default.toml"))
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--quick", action="store_true",
                        help="10 x 20 orientation grid and no scaling run.")
    parser.add_argument("--log-level", default="WARNING")
    args = parser.parse_args()
    logging.basicConfig(level=args.log_level, format=LOG_FORMAT)

    config = load_config(args.config)
    n_theta, n_phi = (10, 20) if args.quick else (config.orientation.n_theta, config.orientation.n_phi)
    validator = AcceptanceValidator(config, args.workers, n_theta, n_phi,
                                    scaling=not args.quick, log_level=args.log_level)
    return 0 if validator.run() else 1


if __name__ == "__main__":
    sys.exit(main())
