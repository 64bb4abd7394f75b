import pytest
import numpy as np

from src.core.errors import InputError
from src.core.models import ComplexMatrix
from src.core.numkit import (
    check_hermitian, check_projector, eig_hermitian, eigvals_hermitian, operator_norm,
    principal_angles, projector_difference_bound, spectral_function, apply_local,
    embed_operator, random_unitary, random_projector, random_hermitian,
)
from src.core.seeding import make_rng
from tests.fixtures.sample_data import PAULI_X, PAULI_Z, bisection_eigenvalues


def _rank_one(vector):
    vector = np.asarray(vector, dtype=complex)
    vector = vector / np.linalg.norm(vector)
    return np.outer(vector, vector.conj())


class TestHermitianEigensolver:

    def test_diagonal(self):
        """Test eigenvalues of a diagonal matrix come back ascending."""
        decomposition = eig_hermitian(np.diag([3.0, -1.0, 2.0]))
        assert np.allclose(decomposition.eigenvalues, [-1.0, 2.0, 3.0])

    def test_reconstruction(self, rng):
        """Test V diag(lambda) V^dagger recovers the input."""
        matrix = random_hermitian(12, rng)
        decomposition = eig_hermitian(matrix)

        assert np.allclose(decomposition.reconstruct(), matrix, atol=1e-10)
        vectors = decomposition.eigenvectors
        assert np.allclose(vectors.conj().T @ vectors, np.eye(12), atol=1e-10)

    def test_matches_lapack(self, rng):
        """Test Jacobi eigenvalues against scipy."""
        matrix = random_hermitian(20, rng)
        assert np.allclose(eigvals_hermitian(matrix), np.linalg.eigvalsh(matrix), atol=1e-10)

    @pytest.mark.parametrize("dim", [2, 3, 4, 5])
    def test_matches_bisection(self, dim):
        """Test Jacobi eigenvalues against characteristic-polynomial bisection."""
        for seed in range(10):
            matrix = random_hermitian(dim, make_rng(seed, stream=dim))
            assert np.allclose(eigvals_hermitian(matrix), bisection_eigenvalues(matrix), atol=1e-9)

    def test_random_small_batch(self):
        """Test convergence and residuals over a seed sweep of small matrices."""
        for seed in range(200):
            matrix = random_hermitian(4, make_rng(seed))
            decomposition = eig_hermitian(matrix)
            residual = matrix @ decomposition.eigenvectors - decomposition.eigenvectors * decomposition.eigenvalues
            assert np.max(np.abs(residual)) <= 4e-9

    def test_large_norm(self, rng):
        """Test convergence on a matrix of large Frobenius norm."""
        matrix = random_hermitian(40, rng, scale=1e3) + np.diag(np.arange(40.0) * 1e3)
        decomposition = eig_hermitian(matrix)

        assert np.allclose(decomposition.eigenvalues, np.linalg.eigvalsh(matrix), atol=1e-7)
        assert np.allclose(decomposition.reconstruct(), matrix, atol=1e-7)

    def test_diagonal_input_converges(self):
        """Test that a matrix with exactly zero off-diagonal part converges at once."""
        matrix = np.diag(np.linspace(-50.0, 50.0, 80))
        assert np.allclose(eigvals_hermitian(matrix), np.linspace(-50.0, 50.0, 80))

    def test_lapack_method(self, rng, override_config, tmp_path):
        """Test the LAPACK code path through configuration."""
        path = tmp_path / "lapack.yaml"
        path.write_text("eigensolver:\n  method: lapack\n")
        override_config(config_path=path)
        matrix = random_hermitian(6, rng)

        assert np.allclose(eigvals_hermitian(matrix), np.linalg.eigvalsh(matrix), atol=1e-10)

    def test_phase_convention(self, rng):
        """Test that the first nonzero component of every eigenvector is real positive."""
        decomposition = eig_hermitian(random_hermitian(8, rng))
        for k in range(8):
            column = decomposition.eigenvectors[:, k]
            pivot = column[np.flatnonzero(np.abs(column) > 1e-12)[0]]
            assert abs(pivot.imag) < 1e-12
            assert pivot.real > 0

    def test_degenerate_spectrum(self):
        """Test a spectrum with a repeated eigenvalue."""
        eigenvalues = eigvals_hermitian(np.kron(PAULI_Z, np.eye(2)))
        assert np.allclose(eigenvalues, [-1, -1, 1, 1])

    def test_single_entry(self):
        """Test a 1x1 matrix."""
        assert eigvals_hermitian(np.array([[2.5]])) == pytest.approx([2.5])

    def test_complex_matrix_input(self):
        """Test ComplexMatrix inputs are accepted."""
        eigenvalues = eigvals_hermitian(ComplexMatrix.from_array(PAULI_X))
        assert np.allclose(eigenvalues, [-1.0, 1.0])

    def test_non_hermitian_rejected(self):
        """Test that asymmetric matrices are rejected."""
        with pytest.raises(InputError, match="not Hermitian"):
            eig_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_non_square_rejected(self):
        """Test that non-square arrays are rejected."""
        with pytest.raises(InputError, match="square"):
            check_hermitian(np.zeros((2, 3)))

    def test_operator_norm(self):
        """Test the spectral norm of a Hermitian matrix."""
        assert operator_norm(np.diag([0.5, -2.0])) == pytest.approx(2.0)


class TestProjectors:

    def test_not_idempotent(self):
        """Test rejection of a Hermitian non-projector."""
        with pytest.raises(InputError, match="idempotent"):
            check_projector(np.diag([1.0, 0.5]))

    def test_commuting_blocks(self):
        """Test block counts of two commuting diagonal projectors."""
        p = np.diag([1, 1, 0, 0]).astype(complex)
        q = np.diag([1, 0, 1, 0]).astype(complex)
        report = principal_angles(p, q)

        blocks = report.commuting_block_types
        assert (blocks.one_one, blocks.one_zero, blocks.zero_one, blocks.zero_zero) == (1, 1, 1, 1)
        assert report.angles == []

    def test_single_angle(self):
        """Test the angle between two rank-one projectors."""
        theta = np.pi / 5
        p = _rank_one([1, 0])
        q = _rank_one([np.cos(theta), np.sin(theta)])
        report = principal_angles(p, q)

        assert report.angles == pytest.approx([theta])
        assert report.sines == pytest.approx([np.sin(theta)])

    @pytest.mark.parametrize("theta", [1e-5, 1e-7, 1e-8])
    def test_small_angle(self, theta):
        """Test that a small but nonzero angle stays a 2x2 block."""
        p = _rank_one([1, 0])
        q = _rank_one([np.cos(theta), np.sin(theta)])
        report = principal_angles(p, q)

        blocks = report.commuting_block_types
        assert (blocks.one_one, blocks.zero_zero) == (0, 0)
        assert report.angles == pytest.approx([theta], rel=1e-6)

        bound = projector_difference_bound(p, q)
        assert bound.max_sin == pytest.approx(theta, rel=1e-6)
        assert bound.min_eig == pytest.approx(-bound.max_sin, abs=1e-12)

    def test_near_orthogonal_angle(self):
        """Test an angle just below pi/2."""
        theta = np.pi / 2 - 1e-6
        report = principal_angles(_rank_one([1, 0]), _rank_one([np.cos(theta), np.sin(theta)]))
        assert report.angles == pytest.approx([theta])

    def test_random_rank_accounting(self, rng):
        """Test that random projector pairs satisfy rank accounting."""
        p = random_projector(6, 2, rng)
        q = random_projector(6, 3, rng)
        report = principal_angles(p, q)

        assert report.rank_p == 2
        assert report.rank_q == 3
        assert len(report.angles) == 2
        assert all(0 < theta < np.pi / 2 for theta in report.angles)

    def test_dimension_mismatch(self):
        """Test rejection of projectors of different sizes."""
        with pytest.raises(InputError, match="dimensions differ"):
            principal_angles(np.eye(2), np.eye(3))

    def test_difference_bound(self):
        """Test lambda_min(P - Q) against -sqrt(||Q(1-P)Q||) for one angle."""
        theta = 0.3
        p = _rank_one([1, 0])
        q = _rank_one([np.cos(theta), np.sin(theta)])
        report = projector_difference_bound(p, q)

        assert report.epsilon == pytest.approx(np.sin(theta) ** 2)
        assert report.min_eig == pytest.approx(-np.sin(theta))
        assert report.bound_holds

    def test_difference_bound_random(self, rng):
        """Test the bound on random projector pairs."""
        for rank_p, rank_q in [(1, 1), (2, 3), (3, 1), (0, 2), (4, 4)]:
            report = projector_difference_bound(random_projector(5, rank_p, rng), random_projector(5, rank_q, rng))
            assert report.bound_holds
            assert report.min_eig >= -report.sqrt_epsilon - 1e-9

    def test_q_inside_p(self):
        """Test that Q inside P gives epsilon 0 and a PSD difference."""
        report = projector_difference_bound(np.diag([1, 1, 0]), np.diag([1, 0, 0]))
        assert report.epsilon == pytest.approx(0.0, abs=1e-12)
        assert report.min_eig >= -1e-12

    def test_invalid_rank(self, rng):
        """Test rejection of a rank larger than the dimension."""
        with pytest.raises(InputError):
            random_projector(3, 4, rng)


class TestSpectralFunctions:

    def test_square_root(self):
        """Test the square root of a PSD matrix."""
        matrix = np.array([[2.0, 1.0], [1.0, 2.0]])
        root = spectral_function(matrix, np.sqrt)
        assert np.allclose(root @ root, matrix)

    @pytest.mark.parametrize("dim", [2, 5, 9])
    def test_square_is_product(self, dim):
        """Test spectral_function(M, x^2) against M M on random Hermitian matrices."""
        for seed in range(5):
            matrix = random_hermitian(dim, make_rng(seed, stream=dim))
            assert np.allclose(spectral_function(matrix, np.square), matrix @ matrix, atol=1e-9)

    def test_scalar_function(self):
        """Test that scalar results broadcast to the identity."""
        assert np.allclose(spectral_function(PAULI_Z, lambda x: 3.0), 3 * np.eye(2))

    def test_positive_part(self):
        """Test the positive part of Z."""
        result = spectral_function(PAULI_Z, lambda x: np.maximum(x, 0.0))
        assert np.allclose(result, np.diag([1.0, 0.0]))


class TestLocalOperators:

    def test_embed_on_least_significant_site(self):
        """Test that site 0 is the least significant index digit."""
        full = embed_operator([2, 2], [0], PAULI_X)
        assert np.allclose(full, np.kron(np.eye(2), PAULI_X))

    def test_embed_on_most_significant_site(self):
        """Test embedding on site 1."""
        full = embed_operator([2, 2], [1], PAULI_Z)
        assert np.allclose(full, np.kron(PAULI_Z, np.eye(2)))

    def test_local_site_order(self):
        """Test that the first listed site is least significant within the local operator."""
        local = np.kron(PAULI_Z, PAULI_X)
        assert np.allclose(embed_operator([2, 2], [0, 1], local), local)
        assert np.allclose(embed_operator([2, 2], [1, 0], local), np.kron(PAULI_X, PAULI_Z))

    def test_mixed_radix(self):
        """Test embedding with sites of different dimension."""
        clock = np.diag([0.0, 1.0, 2.0])
        full = embed_operator([2, 3], [1], clock)
        assert np.allclose(full, np.kron(clock, np.eye(2)))

    def test_apply_local_matches_embed(self, rng):
        """Test apply_local on vectors against the embedded operator."""
        local = random_hermitian(4, rng)
        block = rng.normal(size=(8, 3)) + 0j
        full = embed_operator([2, 2, 2], [2, 0], local)
        assert np.allclose(apply_local([2, 2, 2], [2, 0], local, block), full @ block)

    def test_repeated_sites(self):
        """Test rejection of repeated sites."""
        with pytest.raises(InputError, match="Invalid sites"):
            embed_operator([2, 2], [0, 0], np.eye(4))

    def test_wrong_local_shape(self):
        """Test rejection of a local operator of the wrong size."""
        with pytest.raises(InputError, match="shape"):
            embed_operator([2, 2], [0], np.eye(4))


class TestRandomMatrices:

    def test_unitary(self, rng):
        """Test that random unitaries are unitary."""
        u = random_unitary(4, rng)
        assert np.allclose(u.conj().T @ u, np.eye(4), atol=1e-10)

    def test_real_orthogonal(self, rng):
        """Test real orthogonal draws."""
        u = random_unitary(3, rng, real=True)
        assert np.allclose(u.imag, 0.0)
        assert np.allclose(u.T @ u, np.eye(3), atol=1e-10)

    def test_projector_rank(self, rng):
        """Test rank and idempotency of random projectors."""
        p = random_projector(5, 2, rng)
        assert np.allclose(p @ p, p, atol=1e-10)
        assert np.trace(p).real == pytest.approx(2.0)
