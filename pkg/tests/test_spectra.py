"""
Tests for resolvent spectra, powder averaging and J1 scans.
"""

import math
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import block_diag, expm

from mrts.core.config import load_config
from mrts.core.constants import FREE_ELECTRON_G, MU_B_OVER_HBAR
from mrts.core.exceptions import InvalidParameterError, OrientationFailureError, SingularSystemError
from mrts.core.hamiltonian import ModelParams, Orientation
from mrts.core.lindblad import JumpSet, RateParams, all_jump_sets, liouvillian_matrix
from mrts.core.units import to_internal
from mrts.services.dynamics_service import InitialStateSpec, get_dynamics_service, initial_state
from mrts.services.spectrum_service import (
    POWDER,
    ResolventSolver,
    SpectrumGrid,
    SpectrumService,
    count_local_maxima,
    find_local_maxima,
    intensity_eigenmodes,
    intensity_resolvent,
    mw_operator,
    orientation_grid,
    pairwise_sum,
    powder_average,
    resolvent_apply,
    spectrum_scan_j1,
    spectrum_single,
)

DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "default.toml"


def toy_generator(levels: int):
    """Small damped multi-level system with a transverse probe."""
    energies = np.array([0.0, 5.0, 11.0][:levels])
    ham = np.diag(energies).astype(complex)
    ham += 0.3 * (np.eye(levels, k=1) + np.eye(levels, k=-1))
    jumps = []
    for k in range(levels - 1):
        lowering = np.zeros((levels, levels), dtype=complex)
        lowering[k, k + 1] = 1.0
        jumps.append(JumpSet((lowering,), 0.4 + 0.1 * k, 0, f"decay{k}"))
    dephasing = np.diag(np.arange(levels, dtype=float)).astype(complex)
    jumps.append(JumpSet((dephasing,), 0.25, 0, "dephasing"))
    probe = np.eye(levels, k=1) + np.eye(levels, k=-1)
    rho = np.diag(np.linspace(1.0, 0.2, levels)).astype(complex)
    return liouvillian_matrix(ham, jumps), rho / np.trace(rho), probe.astype(complex)


def isotropic_model():
    params = ModelParams.from_quantities({
        "J0": "1 mT", "J1": "-1 mT", "J2": "-1 mT", "B_mag": "350 mT",
    })
    rates = RateParams(gamma_triplet=0.5, k_st=2.0, k_tg=0.3, k_eg=1.0)
    return params, rates


def _spin_ops(plus: np.ndarray, sz: np.ndarray):
    minus = plus.conj().T
    return (plus + minus) / 2, (plus - minus) / 2j, sz


def uncoupled_hamiltonians(params: ModelParams, orient: Orientation):
    """
    (static, drive) 20x20 Hamiltonians of radicals and triplet with no radical-triplet
    exchange, assembled from Pauli and spin-1 matrices.
    """
    half = _spin_ops(np.array([[0, 1], [0, 0]], dtype=complex), np.diag([0.5, -0.5]))
    one = _spin_ops(math.sqrt(2) * np.eye(3, k=1, dtype=complex), np.diag([1.0, 0.0, -1.0]))
    n = orient.static_direction()
    omega_r = params.g_r * MU_B_OVER_HBAR * params.B_mag
    omega_c = params.g_c * MU_B_OVER_HBAR * params.B_mag

    zeeman_r = omega_r * sum(n[k] * half[k] for k in range(3))
    radicals = np.kron(zeeman_r, np.eye(2)) + np.kron(np.eye(2), zeeman_r)
    ground = radicals + params.J0 * sum(np.kron(half[k], half[k]) for k in range(3))
    sx, sy, sz = one
    coupler = (omega_c * sum(n[k] * one[k] for k in range(3))
               + params.D * sz @ sz + params.E * (sx @ sx - sy @ sy))
    triplet = np.kron(radicals, np.eye(3)) + np.kron(np.eye(4), coupler)

    drive = np.zeros((20, 20), dtype=complex)
    drive[:4, 4:8] = np.eye(4)
    drive[4:8, :4] = np.eye(4)
    return block_diag(ground, ground, triplet), params.V * drive


class TestSpectrumGrid:
    """Test suite for frequency grids."""

    def test_uniform(self):
        grid = SpectrumGrid.uniform(40.0, 85.0, 100, 350.0, 0.0062)
        assert grid.omegas.size == 100
        assert grid.step == pytest.approx(45.0 / 99)

    def test_rejects_non_increasing(self):
        with pytest.raises(InvalidParameterError, match="strictly increasing"):
            SpectrumGrid(np.array([1.0, 1.0]), 350.0, 0.0)

    def test_rejects_empty(self):
        with pytest.raises(InvalidParameterError):
            SpectrumGrid(np.array([]), 350.0, 0.0)


class TestResolvent:
    """Test suite for shifted solves against the eigenmode evaluation."""

    @pytest.mark.parametrize("levels", [2, 3])
    def test_matches_eigenmodes(self, levels):
        matrix, rho, probe = toy_generator(levels)
        omegas = np.linspace(-15.0, 15.0, 50)
        by_solve = intensity_resolvent(matrix, rho, probe, omegas)
        by_modes = intensity_eigenmodes(matrix, rho, probe, omegas)
        assert_allclose(by_solve, by_modes, rtol=1e-8)

    def test_schur_matches_lu(self):
        matrix, rho, probe = toy_generator(3)
        omegas = np.linspace(-15.0, 15.0, 50)
        lu = intensity_resolvent(matrix, rho, probe, omegas, solver="lu")
        schur = intensity_resolvent(matrix, rho, probe, omegas, solver="schur")
        assert_allclose(schur, lu, rtol=1e-10)

    def test_resolvent_apply_solves_shifted_system(self):
        matrix, _, probe = toy_generator(2)
        omega = 2.5
        result = resolvent_apply(matrix, omega, probe)
        system = 1j * matrix - omega * np.eye(4)
        assert_allclose(system @ result.reshape(-1, order="F"), probe.reshape(-1, order="F"),
                        atol=1e-12)

    @pytest.mark.parametrize("solver", ["lu", "schur"])
    def test_singular_system(self, solver):
        matrix = np.zeros((4, 4), dtype=complex)
        with pytest.raises(SingularSystemError, match="singular"):
            ResolventSolver(matrix, solver).solve(0.0, np.ones(4))

    def test_unknown_solver(self):
        with pytest.raises(InvalidParameterError, match="solver"):
            ResolventSolver(np.eye(4), "qr")


class TestSingleOrientation:
    """Test suite for single-orientation spectra on the full model."""

    def test_microwave_operator_hermitian(self, tilted):
        op = mw_operator(tilted)
        assert_allclose(op, op.conj().T, atol=1e-15)

    def test_isolated_radical_peaks_at_zeeman_frequency(self):
        params = ModelParams(B_mag=350.0)
        rates = RateParams(gamma_radical=0.5)
        orient = Orientation()
        grid = SpectrumGrid.uniform(40.0, 85.0, 100, params.B_mag, 0.0)
        spectrum = spectrum_single(initial_state(params, orient), params, rates, orient, grid)

        omega0 = FREE_ELECTRON_G * MU_B_OVER_HBAR * params.B_mag
        peak = grid.omegas[int(np.argmax(spectrum.intensities))]
        assert abs(peak - omega0) <= grid.step
        assert np.all(spectrum.intensities >= 0.0)

    def test_triplet_side_features_need_zero_field_splitting(self, default_params, default_rates):
        orient = Orientation()
        grid = SpectrumGrid.uniform(40.0, 85.0, 100, default_params.B_mag, 0.0062)
        omega0 = FREE_ELECTRON_G * MU_B_OVER_HBAR * default_params.B_mag
        offsets = {}
        for label, params in (("zfs", default_params),
                              ("isotropic", default_params.with_updates(D=0.0, E=0.0))):
            rho_t = get_dynamics_service().state_at(params, default_rates, orient,
                                                    initial_state(params, orient), grid.t)
            spectrum = spectrum_single(rho_t, params, default_rates, orient, grid)
            peaks = grid.omegas[find_local_maxima(spectrum.intensities)]
            offsets[label] = np.abs(peaks - omega0)

        assert offsets["zfs"].min() <= grid.step
        assert np.any(offsets["zfs"] > 10.0)
        assert offsets["isotropic"].size >= 1
        assert np.all(offsets["isotropic"] < 5.0)


class TestOrientationGrid:
    """Test suite for the (theta, phi) powder grid."""

    def test_default_size(self):
        assert len(orientation_grid()) == 5000

    def test_uniform_weights(self):
        points = orientation_grid(4, 3)
        weights = np.array([w for _, w in points])
        assert_allclose(weights, 1.0 / 12)
        thetas = sorted({o.theta for o, _ in points})
        assert_allclose(thetas, (np.arange(4) + 0.5) * math.pi / 4)

    def test_sine_weights(self):
        points = orientation_grid(4, 2, weighted=True)
        weights = np.array([w for _, w in points])
        thetas = np.array([o.theta for o, _ in points])
        assert weights.sum() == pytest.approx(1.0)
        assert_allclose(weights / np.sin(thetas), weights[0] / np.sin(thetas[0]))

    def test_pairwise_sum_matches_sum(self, rng):
        rows = rng.normal(size=(7, 5))
        assert_allclose(pairwise_sum(rows), rows.sum(axis=0), atol=1e-14)


class TestPowderAverage:
    """Test suite for orientation averaging."""

    def test_isotropic_model_is_orientation_independent(self):
        params, rates = isotropic_model()
        grid = SpectrumGrid.uniform(40.0, 55.0, 12, params.B_mag, 0.5)
        spec = InitialStateSpec()
        single = []
        for orient in (Orientation(), Orientation(1.1, 2.0)):
            rho_t = get_dynamics_service().state_at(params, rates, orient,
                                                    spec.build(params, orient), grid.t)
            single.append(spectrum_single(rho_t, params, rates, orient, grid).intensities)
        assert_allclose(single[1], single[0], rtol=1e-8)

        powder = powder_average(params, rates, spec, grid.t, grid, n_theta=3, n_phi=2)
        assert powder.orientation == POWDER
        assert powder.evaluations == 6
        assert_allclose(powder.intensities, single[0], rtol=1e-8)

    def test_matches_manual_weighted_sum(self, default_params, default_rates):
        grid = SpectrumGrid.uniform(55.0, 70.0, 6, default_params.B_mag, 0.0062)
        spec = InitialStateSpec()
        powder = powder_average(default_params, default_rates, spec, grid.t, grid,
                                n_theta=2, n_phi=2, weighted=True)

        expected = np.zeros(6)
        for orient, weight in orientation_grid(2, 2, weighted=True):
            rho_t = get_dynamics_service().state_at(default_params, default_rates, orient,
                                                    spec.build(default_params, orient), grid.t)
            expected += weight * spectrum_single(rho_t, default_params, default_rates,
                                                 orient, grid).intensities
        assert_allclose(powder.intensities, expected, rtol=1e-12)
        assert len(powder.timings) == 4

    def test_completion_order_does_not_change_result(self, default_params, default_rates):
        grid = SpectrumGrid.uniform(55.0, 70.0, 5, default_params.B_mag, 0.0062)
        spec = InitialStateSpec()

        def reversed_map(func, tasks):
            return [func(task) for task in reversed(list(tasks))]

        forward = powder_average(default_params, default_rates, spec, grid.t, grid, 2, 3)
        backward = powder_average(default_params, default_rates, spec, grid.t, grid, 2, 3,
                                  mapper=reversed_map)
        assert np.array_equal(forward.intensities, backward.intensities)

    def test_first_failure_reported(self, default_params, default_rates):
        grid = SpectrumGrid.uniform(55.0, 70.0, 5, default_params.B_mag, 0.0)
        calls = {"count": 0}
        original = spectrum_single

        def failing(*args, **kwargs):
            calls["count"] += 1
            if calls["count"] in (2, 4):
                raise ValueError("solver exploded")
            return original(*args, **kwargs)

        with patch("mrts.services.spectrum_service.spectrum_single", side_effect=failing):
            with pytest.raises(OrientationFailureError, match="#1") as info:
                powder_average(default_params, default_rates, InitialStateSpec(), grid.t,
                               grid, 2, 2)
        assert info.value.details["index"] == 1
        assert "solver exploded" in info.value.details["cause"]


class TestScanAndPeaks:
    """Test suite for J1 scans and peak counting."""

    def test_scan_sets_j2_equal_to_j1(self, default_params, default_rates):
        grid = SpectrumGrid.uniform(55.0, 70.0, 5, default_params.B_mag, 0.0062)
        seen = []
        original = spectrum_single

        def recording(rho_t, params, *args, **kwargs):
            seen.append((params.J1, params.J2))
            return original(rho_t, params, *args, **kwargs)

        with patch("mrts.services.spectrum_service.spectrum_single", side_effect=recording):
            spectra = spectrum_scan_j1([-1.0, -2.0], default_params, default_rates,
                                       InitialStateSpec(), grid, orientation=Orientation())
        assert seen == [(-1.0, -1.0), (-2.0, -2.0)]
        assert len(spectra) == 2
        assert all(s.grid is grid for s in spectra)

    def test_zero_exchange_matches_uncoupled_model(self, default_params, default_rates):
        orient = Orientation(0.4, 0.9)
        grid = SpectrumGrid.uniform(55.0, 70.0, 6, default_params.B_mag, 0.0062)
        (scanned,) = spectrum_scan_j1([0.0], default_params, default_rates, InitialStateSpec(),
                                      grid, orientation=orient)

        static, drive = uncoupled_hamiltonians(default_params, orient)
        jumps = all_jump_sets(default_rates)
        driven = liouvillian_matrix(static + drive, jumps)
        free = liouvillian_matrix(static, jumps)
        t_on, t_off = default_params.pulse_window
        rho0 = np.zeros((20, 20), dtype=complex)
        rho0[:4, :4] = np.eye(4) / 4
        vec = expm(driven * (t_off - t_on)) @ rho0.reshape(-1, order="F")
        rho_t = (expm(free * (grid.t - t_off)) @ vec).reshape(20, 20, order="F")
        expected = intensity_resolvent(free, rho_t, mw_operator(orient), grid.omegas)

        assert_allclose(scanned.intensities, expected, rtol=1e-10)

    def test_weak_exchange_shows_more_maxima_with_shipped_config(self):
        config = load_config(DEFAULT_CONFIG)
        params, rates = config.model.to_params(), config.rates.to_rates()
        section = config.spectrum
        start = config.initial_state
        spec = InitialStateSpec(start.kind, start.temperature_K, start.label)
        grid = SpectrumGrid.uniform(section.omega_min, section.omega_max, 41, params.B_mag,
                                    section.t)
        weak, strong = spectrum_scan_j1([to_internal(-10.0, "mT"), to_internal(-1.0e5, "mT")],
                                        params, rates, spec, grid, n_theta=1, n_phi=2)

        weak_peaks = find_local_maxima(weak.intensities, section.peak_prominence)
        strong_count = count_local_maxima(strong.intensities, section.peak_prominence)
        assert len(weak_peaks) > strong_count
        omega0 = params.g_r * MU_B_OVER_HBAR * params.B_mag
        assert np.any(np.abs(grid.omegas[weak_peaks] - omega0) <= 0.05 * omega0)

    def test_count_local_maxima(self):
        x = np.linspace(0.0, 10.0, 501)
        series = np.exp(-(x - 3.0) ** 2) + 0.5 * np.exp(-(x - 7.0) ** 2)
        assert count_local_maxima(series) == 2
        assert count_local_maxima(np.ones(5)) == 0


class TestSpectrumService:
    """Test suite for result-dict wrappers."""

    def test_run_single(self, default_params, default_rates):
        service = SpectrumService()
        grid = SpectrumGrid.uniform(55.0, 70.0, 4, default_params.B_mag, 0.0)
        result = service.run_single(default_params, default_rates, InitialStateSpec(),
                                    Orientation(), grid)
        assert result["success"] is True
        assert result["spectrum"].intensities.shape == (4,)

    def test_run_powder_failure_becomes_error_dict(self, default_params, default_rates):
        service = SpectrumService()
        grid = SpectrumGrid.uniform(55.0, 70.0, 4, default_params.B_mag, 0.0)
        with patch("mrts.services.spectrum_service.spectrum_single",
                   side_effect=RuntimeError("boom")):
            result = service.run_powder(default_params, default_rates, InitialStateSpec(),
                                        grid, 1, 2)
        assert result["success"] is False
        assert result["error_code"] == "OrientationFailureError"

    def test_rejects_unknown_solver(self):
        with pytest.raises(InvalidParameterError):
            SpectrumService("cholesky")
