import numpy as np
import pytest

from fuzzytomo import optics
from fuzzytomo.optics import (
    WavePlateSetting,
    WavePlateSpec,
    basis_unitary,
    birefringence,
    idler_wavelength,
    load_dispersion,
    optical_thickness,
    plate_thickness,
    save_dispersion,
    spectral_grid,
    waveplate_matrices,
    waveplate_unitary,
)

LAM0 = 0.65
DN_FROM_PLATE_PAIR = 5.5 * 0.65 / 396.0  # birefringence implied by the 396 um plate


class TestDispersion:
    def test_indices_physical(self, quartz_model):
        for lam in np.linspace(0.4, 0.8, 9):
            assert quartz_model.n_o(lam) > 1
            assert quartz_model.n_e(lam) > 1
            assert birefringence(quartz_model, lam) > 0

    def test_birefringence_at_design(self, quartz_model):
        assert abs(birefringence(quartz_model, LAM0) - DN_FROM_PLATE_PAIR) < 5e-5

    def test_continuity(self, quartz_model):
        for lam in (0.45, 0.6, 0.65, 0.75):
            d = abs(birefringence(quartz_model, lam) - birefringence(quartz_model, lam + 1e-6))
            assert d < 1e-6

    def test_range_error(self, quartz_model):
        with pytest.raises(ValueError):
            quartz_model.n_o(0.05)
        with pytest.raises(ValueError):
            birefringence(quartz_model, 5.0)

    def test_json_roundtrip_bit_exact(self, quartz_model, tmp_path):
        path = tmp_path / "quartz.json"
        save_dispersion(quartz_model, path)
        clone = load_dispersion(path)
        assert clone.name == quartz_model.name
        assert clone.form_id == quartz_model.form_id
        assert clone.coefficients_o == quartz_model.coefficients_o
        assert clone.coefficients_e == quartz_model.coefficients_e
        assert clone.range_um == quartz_model.range_um


class TestPlateThickness:
    def test_paper_pair(self, quartz_model):
        h_hwp = plate_thickness("half", 5, LAM0, quartz_model)
        h_qwp = plate_thickness("quarter", 5, LAM0, quartz_model)
        assert 395.0 <= h_hwp <= 397.0
        assert 377.0 <= h_qwp <= 379.0

    def test_zero_order_ratio(self, quartz_model):
        h5 = plate_thickness("half", 5, LAM0, quartz_model)
        h0 = plate_thickness("half", 0, LAM0, quartz_model)
        assert h0 / h5 == pytest.approx(0.5 / 5.5, abs=1e-12)
        assert abs(h0 - 36.0) < 0.5

    def test_invalid_inputs(self, quartz_model):
        with pytest.raises(ValueError):
            plate_thickness("half", -1, LAM0, quartz_model)
        with pytest.raises(ValueError):
            plate_thickness("third", 1, LAM0, quartz_model)
        with pytest.raises(ValueError):
            plate_thickness("half", 5, 7.0, quartz_model)


class TestOpticalThickness:
    def test_reported_plate_value(self, quartz_model):
        assert abs(optical_thickness(396.0, LAM0, quartz_model) - 5.5 * np.pi) < 1e-2

    def test_linear_in_thickness(self, quartz_model):
        d1 = optical_thickness(200.0, LAM0, quartz_model)
        d2 = optical_thickness(400.0, LAM0, quartz_model)
        assert d2 == pytest.approx(2 * d1, rel=1e-15)

    def test_decreasing_in_wavelength(self, quartz_model):
        lams = np.linspace(0.6, 0.7, 21)
        deltas = optical_thickness(396.0, lams, quartz_model)
        assert np.all(np.diff(deltas) < 0)

    @pytest.mark.parametrize("kind,frac", [("half", 0.5), ("quarter", 0.25)])
    @pytest.mark.parametrize("order", [0, 1, 5, 10])
    def test_design_retardance_roundtrip(self, quartz_model, kind, frac, order):
        h = plate_thickness(kind, order, LAM0, quartz_model)
        delta = optical_thickness(h, LAM0, quartz_model)
        assert abs(delta - np.pi * (order + frac)) < 1e-9

    def test_positive_thickness_required(self, quartz_model):
        with pytest.raises(ValueError):
            optical_thickness(-1.0, LAM0, quartz_model)


class TestWavePlateUnitary:
    def test_zero_retardance_is_identity(self):
        assert np.allclose(waveplate_unitary(0.0, 0.37).elements, np.eye(2), atol=1e-15)

    def test_half_wave_at_zero(self):
        U = waveplate_unitary(np.pi / 2, 0.0).elements
        assert np.allclose(U, np.diag([-1j, 1j]), atol=1e-15)

    def test_half_wave_at_45_degrees(self):
        U = waveplate_unitary(np.pi / 2, np.pi / 4).elements
        assert np.allclose(U, np.array([[0, -1j], [-1j, 0]]), atol=1e-15)

    def test_unitary_and_unimodular(self):
        rng = np.random.default_rng(5)
        deltas = rng.uniform(0, 20, 10_000)
        alphas = rng.uniform(-np.pi / 2, np.pi / 2, 10_000)
        U = waveplate_matrices(deltas, alphas)
        gram = np.einsum("kba,kbc->kac", U.conj(), U)
        assert np.max(np.abs(gram - np.eye(2))) < 1e-12
        dets = U[:, 0, 0] * U[:, 1, 1] - U[:, 0, 1] * U[:, 1, 0]
        assert np.max(np.abs(dets - 1)) < 1e-12

    def test_textbook_half_wave_action(self, quartz_model):
        # zero-order plate at 22.5 deg sends |V> to the balanced superposition
        spec = WavePlateSpec("half", 0, LAM0, quartz_model)
        U = waveplate_unitary(spec.retardance(LAM0), np.pi / 8).elements
        out = U @ np.array([1, 0], dtype=complex)
        out /= out[0] / abs(out[0])  # strip global phase
        assert np.max(np.abs(out - np.array([1, 1]) / np.sqrt(2))) < 1e-10


class TestBasisUnitary:
    def _settings(self, quartz_model, alpha, beta, order=5):
        hwp = WavePlateSpec("half", order, LAM0, quartz_model)
        qwp = WavePlateSpec("quarter", order, LAM0, quartz_model)
        return WavePlateSetting(hwp, alpha), WavePlateSetting(qwp, beta)

    def test_axes_at_zero_give_diagonal(self, quartz_model):
        h, q = self._settings(quartz_model, 0.0, 0.0)
        U = basis_unitary(h, q, LAM0).elements
        assert abs(U[0, 1]) < 1e-12 and abs(U[1, 0]) < 1e-12

    def test_always_unitary(self, quartz_model, rng):
        for _ in range(25):
            h, q = self._settings(quartz_model, rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
            lam = rng.uniform(0.62, 0.68)
            U = basis_unitary(h, q, lam)
            assert U.is_unitary()

    def test_hwp_applied_first(self, quartz_model):
        h, q = self._settings(quartz_model, 0.3, -0.2)
        U = basis_unitary(h, q, LAM0).elements
        Uh = waveplate_matrices(h.plate.retardance(LAM0), h.angle)
        Uq = waveplate_matrices(q.plate.retardance(LAM0), q.angle)
        assert np.allclose(U, Uq @ Uh, atol=1e-15)
        assert not np.allclose(U, Uh @ Uq, atol=1e-6)

    def test_chromatic_aberration_visible(self, quartz_model):
        # a 10 nm offset moves a high-order basis unitary by a finite distance
        h, q = self._settings(quartz_model, 0.3, 0.2, order=5)
        U0 = basis_unitary(h, q, LAM0).elements
        U1 = basis_unitary(h, q, LAM0 + 0.010).elements
        assert np.linalg.norm(U1 - U0) > 0.01


class TestIdlerWavelength:
    def test_degenerate_point(self):
        assert idler_wavelength(0.65, 0.325) == pytest.approx(0.65, abs=1e-12)

    def test_against_energy_conservation_oracle(self):
        lam_i = idler_wavelength(0.66, 0.325)
        oracle = 1.0 / (1.0 / 0.325 - 1.0 / 0.66)
        assert lam_i == pytest.approx(oracle, rel=1e-12)
        assert abs(lam_i - 0.6403) < 1e-4

    def test_identity_over_random_pairs(self, rng):
        for _ in range(10_000):
            lam_p = rng.uniform(0.2, 0.5)
            lam_s = lam_p + rng.uniform(0.01, 1.0)
            lam_i = idler_wavelength(lam_s, lam_p)
            assert abs(1 / lam_p - (1 / lam_s + 1 / lam_i)) < 1e-12 * (1 / lam_p)
            assert lam_i > lam_p

    def test_unphysical_rejected(self):
        with pytest.raises(ValueError):
            idler_wavelength(0.325, 0.325)
        with pytest.raises(ValueError):
            idler_wavelength(0.3, 0.325)


class TestSpectralGrid:
    def test_monochromatic_limit(self):
        g = spectral_grid(0.65, 0.0, 0.325, 1)
        assert g.monochromatic
        assert np.array_equal(g.points, [0.65])
        assert np.array_equal(g.weights, [1.0])

    def test_midpoint_construction(self):
        g = spectral_grid(0.65, 0.020, 0.325, 4)
        assert np.allclose(g.points - 0.65, [-0.0075, -0.0025, 0.0025, 0.0075], atol=1e-15)
        assert np.allclose(g.weights, 0.25)

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 7, 64])
    def test_weights_sum_to_one(self, n):
        width = 0.0 if n == 1 else 0.04
        g = spectral_grid(0.65, width, 0.325, n)
        assert abs(g.weights.sum() - 1.0) <= 1e-12

    def test_idler_points_follow_energy_conservation(self):
        g = spectral_grid(0.65, 0.020, 0.325, 8)
        for ls, li in zip(g.points, g.idler_points()):
            assert li == pytest.approx(idler_wavelength(ls, 0.325), rel=1e-14)

    def test_invalid_counts(self):
        with pytest.raises(ValueError):
            spectral_grid(0.65, 0.02, 0.325, 0)
        with pytest.raises(ValueError):
            spectral_grid(0.65, 0.0, 0.325, 3)
        with pytest.raises(ValueError):
            spectral_grid(0.65, -0.01, 0.325, 4)
