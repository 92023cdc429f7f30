import numpy as np
import pytest
from scipy.stats import unitary_group

from fuzzytomo.states import (
    DensityMatrix,
    Operator,
    StateVector,
    density_from_state,
    fidelity_pure,
    haar_random_state,
    tensor,
)

V = StateVector([1, 0])
H = StateVector([0, 1])
PLUS = StateVector([1 / np.sqrt(2), 1 / np.sqrt(2)])


class TestTensor:
    def test_identity_case(self):
        eye2 = Operator(np.eye(2))
        assert np.array_equal(tensor(eye2, eye2).elements, np.eye(4))

    def test_basis_ordering(self):
        out = tensor(V, H)
        assert np.allclose(out.amplitudes, [0, 1, 0, 0])

    def test_swap_on_first_qubit(self):
        # expand (X (x) I)|VV> by hand: X|V> = |H>, so the result is |HV>
        X = Operator([[0, 1], [1, 0]])
        XI = tensor(X, Operator(np.eye(2)))
        expected = np.array(
            [[0, 0, 1, 0],
             [0, 0, 0, 1],
             [1, 0, 0, 0],
             [0, 1, 0, 0]], dtype=complex)
        assert np.allclose(XI.elements, expected)
        vv = tensor(V, V)
        hv = XI.elements @ vv.amplitudes
        assert np.allclose(hv, tensor(H, V).amplitudes)

    def test_dim_multiplies(self):
        assert tensor(V, tensor(V, H)).dim == 8

    def test_associative(self, rng):
        mats = [rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)) for _ in range(3)]
        a, b, c = (Operator(m / np.linalg.norm(m)) for m in mats)
        left = tensor(tensor(a, b), c).elements
        right = tensor(a, tensor(b, c)).elements
        assert np.max(np.abs(left - right)) < 1e-14

    def test_mixed_kinds_rejected(self):
        with pytest.raises(TypeError):
            tensor(V, Operator(np.eye(2)))


class TestFidelity:
    def test_self(self):
        assert fidelity_pure(PLUS, PLUS) == pytest.approx(1.0, abs=1e-14)

    def test_orthogonal(self):
        assert fidelity_pure(V, H) == pytest.approx(0.0, abs=1e-14)

    def test_balanced_superposition(self):
        assert fidelity_pure(PLUS, V) == pytest.approx(0.5, abs=1e-14)

    def test_symmetric_and_phase_invariant(self, rng):
        psi = haar_random_state(4, rng)
        phi = haar_random_state(4, rng)
        assert fidelity_pure(psi, phi) == pytest.approx(fidelity_pure(phi, psi), abs=1e-14)
        rotated = StateVector(np.exp(1j * 0.73) * phi.amplitudes)
        assert fidelity_pure(psi, rotated) == pytest.approx(fidelity_pure(psi, phi), abs=1e-13)

    def test_unitary_invariance(self, rng):
        psi = haar_random_state(4, rng)
        phi = haar_random_state(4, rng)
        U = unitary_group.rvs(4, random_state=99)
        f0 = fidelity_pure(psi, phi)
        f1 = fidelity_pure(StateVector(U @ psi.amplitudes), StateVector(U @ phi.amplitudes))
        assert abs(f0 - f1) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            fidelity_pure(V, StateVector([1, 0, 0, 0]))


class TestHaarRandomState:
    def test_deterministic_given_seed(self):
        a = haar_random_state(4, np.random.default_rng(11))
        b = haar_random_state(4, np.random.default_rng(11))
        assert np.array_equal(a.amplitudes, b.amplitudes)

    def test_every_draw_normalized(self, rng):
        for _ in range(1000):
            psi = haar_random_state(2, rng)
            assert abs(np.sum(np.abs(psi.amplitudes) ** 2) - 1) <= 1e-12

    @pytest.mark.parametrize("dim", [2, 4])
    def test_population_means(self, dim):
        # Haar symmetry: E|c_j|^2 = 1/dim, checked by direct Monte Carlo
        rng = np.random.default_rng(2024)
        n = 100_000
        z = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        pops = np.mean(np.abs(z) ** 2, axis=0)
        assert np.max(np.abs(pops - 1 / dim)) < 0.01

    @pytest.mark.parametrize("dim", [2, 4])
    def test_mean_overlap_with_fixed_state(self, dim):
        rng = np.random.default_rng(77)
        n = 100_000
        z = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        f = np.abs(z[:, 0]) ** 2  # fidelity against e_1
        assert abs(f.mean() - 1 / dim) < 0.01

    def test_dim_validated(self, rng):
        with pytest.raises(ValueError):
            haar_random_state(1, rng)


class TestDensityFromState:
    def test_basis_state(self):
        rho = density_from_state(V)
        assert np.allclose(rho.elements, np.diag([1, 0]))

    def test_balanced(self):
        rho = density_from_state(PLUS)
        assert np.allclose(rho.elements, 0.5 * np.ones((2, 2)))

    def test_projector_property(self, rng):
        rho = density_from_state(haar_random_state(4, rng)).elements
        assert np.max(np.abs(rho @ rho - rho)) < 1e-12

    def test_output_satisfies_invariants(self, rng):
        rho = density_from_state(haar_random_state(4, rng))
        assert rho.dim == 4  # construction validates hermiticity/trace/positivity


class TestValidation:
    def test_state_must_be_normalized(self):
        with pytest.raises(ValueError):
            StateVector([1, 1])

    def test_density_must_be_hermitian(self):
        with pytest.raises(ValueError):
            DensityMatrix([[0.5, 0.5], [0.1, 0.5]])

    def test_density_trace_one(self):
        with pytest.raises(ValueError):
            DensityMatrix(np.diag([0.7, 0.7]))

    def test_density_positive(self):
        with pytest.raises(ValueError):
            DensityMatrix(np.diag([1.5, -0.5]))

    def test_operator_unitary_check(self):
        assert Operator(np.diag([1j, -1j])).is_unitary()
        assert not Operator(np.diag([2.0, 1.0])).is_unitary()
