"""
Dense complex linear algebra for the laboratory.

This module provides the Hermitian eigensolver every spectral claim rests
on, projector algebra (principal angles, the projector-difference bound),
spectral functions, mixed-radix operator embedding and seeded random
matrices for sweeps.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as sla
import structlog
from scipy.stats import ortho_group, unitary_group

from .config import config_loader
from .errors import ConsistencyError, InputError
from .models import BlockCounts, ComplexMatrix, PrincipalAngleReport, ProjectorBoundReport

logger = structlog.get_logger(__name__)

MatrixLike = Union[np.ndarray, ComplexMatrix]


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenvalues in ascending order with orthonormal eigenvector columns."""
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        """Sum of lambda_k v_k v_k^dagger."""
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.conj().T

    def columns_where(self, mask: np.ndarray) -> np.ndarray:
        """Eigenvector columns selected by a boolean mask over eigenvalues."""
        return self.eigenvectors[:, mask]


def as_matrix(matrix: MatrixLike) -> np.ndarray:
    """Convert a ComplexMatrix or array-like into a square complex ndarray."""
    if isinstance(matrix, ComplexMatrix):
        return matrix.to_array()
    array = np.asarray(matrix, dtype=complex)
    if array.ndim != 2 or array.shape[0] != array.shape[1]:
        raise InputError(f"Matrix must be square, got shape {array.shape}")
    if array.shape[0] == 0:
        raise InputError("Matrix must have positive dimension")
    return array


def hermitian_deviation(matrix: np.ndarray) -> float:
    """Largest entrywise |M - M^dagger|."""
    return float(np.max(np.abs(matrix - matrix.conj().T)))


def check_hermitian(matrix: MatrixLike, tol: Optional[float] = None) -> np.ndarray:
    """
    Validate that a matrix is Hermitian and return it symmetrized.

    Args:
        matrix: Candidate Hermitian matrix
        tol: Allowed max asymmetry; defaults to the general Hermitian tolerance

    Returns:
        (M + M^dagger)/2 as a complex ndarray
    """
    array = as_matrix(matrix)
    if tol is None:
        tol = config_loader.get_tolerances().hermitian
    asymmetry = hermitian_deviation(array)
    if asymmetry > tol:
        raise InputError(f"Matrix is not Hermitian: max |M - M^dagger| = {asymmetry:.3e} exceeds {tol:.1e}")
    return 0.5 * (array + array.conj().T)


def check_tagged_hermitian(matrix: MatrixLike, name: str = "matrix") -> np.ndarray:
    """Hermitian check at the strict tolerance, for matrices read from documents."""
    array = as_matrix(matrix)
    tol = config_loader.get_tolerances().hermitian_strict
    asymmetry = hermitian_deviation(array)
    if asymmetry > tol:
        raise InputError(f"{name} is not Hermitian: max |M - M^dagger| = {asymmetry:.3e} exceeds {tol:.1e}")
    return 0.5 * (array + array.conj().T)


def _round_robin_pairs(n: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Tournament schedule: every (p, q) pair exactly once per sweep, disjoint within a round."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        ps, qs = [], []
        for i in range(size // 2):
            p, q = players[i], players[size - 1 - i]
            if p < 0 or q < 0:
                continue
            ps.append(min(p, q))
            qs.append(max(p, q))
        rounds.append((np.array(ps, dtype=int), np.array(qs, dtype=int)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _off_diagonal_mass(a: np.ndarray) -> float:
    """Frobenius norm of the off-diagonal part, summed directly."""
    return float(np.linalg.norm(a - np.diag(np.diag(a))))


def _jacobi(matrix: np.ndarray, convergence_factor: float, max_sweeps: int) -> Tuple[np.ndarray, np.ndarray]:
    """Cyclic complex Jacobi with the round-robin ordering."""
    n = matrix.shape[0]
    a = matrix.copy()
    v = np.eye(n, dtype=complex)
    if n == 1:
        return np.real(np.diag(a)).copy(), v

    threshold = convergence_factor * n * max(1.0, float(np.linalg.norm(matrix)))
    schedule = _round_robin_pairs(n)

    for sweep in range(max_sweeps + 1):
        off = _off_diagonal_mass(a)
        if off < threshold:
            logger.debug("jacobi converged", dim=n, sweeps=sweep, off=off)
            return np.real(np.diag(a)).copy(), v
        if sweep == max_sweeps:
            break
        for ps, qs in schedule:
            apq = a[ps, qs]
            r = np.abs(apq)
            active = r > 0.0
            if not np.any(active):
                continue
            ps, qs, apq, r = ps[active], qs[active], apq[active], r[active]
            phase = apq / r
            app = np.real(a[ps, ps])
            aqq = np.real(a[qs, qs])
            with np.errstate(over='ignore', invalid='ignore'):
                tau = (aqq - app) / (2.0 * r)
                t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            t = np.nan_to_num(t, nan=0.0, posinf=0.0, neginf=0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            # J = diag(1, conj(phase)) @ [[c, s], [-s, c]]
            j00 = c.astype(complex)
            j01 = s.astype(complex)
            j10 = -s * phase.conj()
            j11 = c * phase.conj()

            col_p = a[:, ps].copy()
            col_q = a[:, qs]
            a[:, ps] = col_p * j00 + col_q * j10
            a[:, qs] = col_p * j01 + col_q * j11
            row_p = a[ps, :].copy()
            row_q = a[qs, :]
            a[ps, :] = j00.conj()[:, None] * row_p + j10.conj()[:, None] * row_q
            a[qs, :] = j01.conj()[:, None] * row_p + j11.conj()[:, None] * row_q
            a[ps, qs] = 0.0
            a[qs, ps] = 0.0
            a[ps, ps] = np.real(a[ps, ps])
            a[qs, qs] = np.real(a[qs, qs])

            vec_p = v[:, ps].copy()
            vec_q = v[:, qs]
            v[:, ps] = vec_p * j00 + vec_q * j10
            v[:, qs] = vec_p * j01 + vec_q * j11

    raise ConsistencyError(f"Jacobi eigensolver did not converge within {max_sweeps} sweeps (dim {n})")


def _canonicalize(eigenvalues: np.ndarray, eigenvectors: np.ndarray, phase_zero: float) -> SpectralDecomposition:
    """Stable ascending sort, then make the first nonzero component of each vector real positive."""
    order = np.argsort(eigenvalues, kind='stable')
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order].copy()
    for k in range(eigenvectors.shape[1]):
        column = eigenvectors[:, k]
        nonzero = np.flatnonzero(np.abs(column) > phase_zero)
        if len(nonzero):
            pivot = column[nonzero[0]]
            eigenvectors[:, k] = column * (abs(pivot) / pivot)
    eigenvalues.setflags(write=False)
    eigenvectors.setflags(write=False)
    return SpectralDecomposition(eigenvalues=eigenvalues, eigenvectors=eigenvectors)


def eig_hermitian(matrix: MatrixLike, tol: Optional[float] = None) -> SpectralDecomposition:
    """
    Full eigensystem of a Hermitian matrix.

    Small matrices go through the cyclic Jacobi solver; matrices above the
    configured jacobi_max_dim (or every matrix when method is "lapack") go
    through LAPACK. Both share the same ordering and phase convention.

    Args:
        matrix: Hermitian matrix (ndarray or ComplexMatrix)
        tol: Hermitian tolerance, defaults to the general tolerance

    Returns:
        SpectralDecomposition with ascending eigenvalues
    """
    hermitian = check_hermitian(matrix, tol)
    settings = config_loader.get_eigensolver_settings()
    tolerances = config_loader.get_tolerances()
    dim = hermitian.shape[0]

    if settings.method == 'jacobi' and dim <= settings.jacobi_max_dim:
        eigenvalues, eigenvectors = _jacobi(hermitian, settings.convergence_factor, settings.max_sweeps)
    else:
        if settings.method == 'jacobi':
            logger.info("using LAPACK eigensolver", dim=dim, jacobi_max_dim=settings.jacobi_max_dim)
        eigenvalues, eigenvectors = sla.eigh(hermitian)
        eigenvalues = np.asarray(eigenvalues, dtype=float)
        eigenvectors = np.asarray(eigenvectors, dtype=complex)

    return _canonicalize(eigenvalues, eigenvectors, tolerances.phase_zero)


def eigvals_hermitian(matrix: MatrixLike, tol: Optional[float] = None) -> np.ndarray:
    """Ascending eigenvalues only."""
    return eig_hermitian(matrix, tol).eigenvalues


def operator_norm(matrix: MatrixLike) -> float:
    """Spectral norm of a Hermitian matrix."""
    eigenvalues = eigvals_hermitian(matrix)
    return float(np.max(np.abs(eigenvalues)))


def check_projector(matrix: MatrixLike, name: str = "matrix") -> np.ndarray:
    """
    Validate an orthogonal projector.

    The input is symmetrized after the Hermitian check; idempotency is
    checked on the symmetrized matrix and never repaired.
    """
    tolerances = config_loader.get_tolerances()
    projector = check_hermitian(matrix, tolerances.hermitian)
    defect = float(np.max(np.abs(projector @ projector - projector)))
    if defect > tolerances.idempotent:
        raise InputError(f"{name} is not idempotent: max |M^2 - M| = {defect:.3e}")
    return projector


def range_basis(projector: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the range of a validated projector."""
    decomposition = eig_hermitian(projector)
    return decomposition.columns_where(decomposition.eigenvalues > 0.5)


def principal_angles(p: MatrixLike, q: MatrixLike) -> PrincipalAngleReport:
    """
    Simultaneous canonical form of two projectors.

    For each direction of range(Q) the cosine comes from the singular
    values of A^dagger B and the sine from those of (1 - P) B (A, B
    orthonormal bases of the ranges). A vanishing sine is a common (1,1)
    direction, a vanishing cosine an orthogonal one; the rest are 2x2
    blocks with angle arctan2(sin, cos), so small angles keep full
    precision.

    Args:
        p: Projector P
        q: Projector Q of the same dimension

    Returns:
        PrincipalAngleReport with block counts and ascending angles
    """
    p_mat = check_projector(p, "P")
    q_mat = check_projector(q, "Q")
    if p_mat.shape != q_mat.shape:
        raise InputError(f"Projector dimensions differ: {p_mat.shape[0]} vs {q_mat.shape[0]}")
    dim = p_mat.shape[0]

    basis_p = range_basis(p_mat)
    basis_q = range_basis(q_mat)
    rank_p, rank_q = basis_p.shape[1], basis_q.shape[1]

    cosines = np.zeros(rank_q)
    sines = np.ones(rank_q)
    if rank_q:
        if rank_p:
            # descending, padded with zeros for Q directions beyond rank P
            sigma = np.clip(sla.svdvals(basis_p.conj().T @ basis_q), 0.0, 1.0)
            cosines[:len(sigma)] = sigma
        complement = basis_q - basis_p @ (basis_p.conj().T @ basis_q)
        sines = np.sort(np.clip(sla.svdvals(complement), 0.0, 1.0))

    cut = 1e-9
    common = sines < cut
    orthogonal = ~common & (cosines < cut)
    middle = ~common & ~orthogonal
    one_one = int(np.sum(common))
    angles = sorted(float(theta) for theta in np.arctan2(sines[middle], cosines[middle]))

    k = len(angles)
    one_zero = rank_p - one_one - k
    zero_one = rank_q - one_one - k
    zero_zero = dim - one_one - one_zero - zero_one - 2 * k
    if min(one_zero, zero_one, zero_zero) < 0:
        raise ConsistencyError(f"Inconsistent principal-angle accounting for ranks {rank_p}, {rank_q} in dim {dim}")

    return PrincipalAngleReport(
        dim=dim,
        rank_p=rank_p,
        rank_q=rank_q,
        commuting_block_types=BlockCounts(
            zero_zero=zero_zero, zero_one=zero_one, one_zero=one_zero, one_one=one_one
        ),
        angles=angles,
    )


def projector_difference_bound(p: MatrixLike, q: MatrixLike) -> ProjectorBoundReport:
    """
    Check that the least eigenvalue of P - Q is at least -sqrt(||Q(1-P)Q||).

    Args:
        p: Projector P
        q: Projector Q

    Returns:
        ProjectorBoundReport with epsilon, min_eig and the canonical form
    """
    p_mat = check_projector(p, "P")
    q_mat = check_projector(q, "Q")
    angles = principal_angles(p_mat, q_mat)
    slack = config_loader.get_tolerances().spectral_slack

    overlap = q_mat @ (np.eye(p_mat.shape[0]) - p_mat) @ q_mat
    epsilon = max(operator_norm(0.5 * (overlap + overlap.conj().T)), 0.0)
    min_eig = float(eigvals_hermitian(p_mat - q_mat)[0])
    max_sin = max(angles.sines, default=0.0)

    return ProjectorBoundReport(
        epsilon=epsilon,
        sqrt_epsilon=float(np.sqrt(epsilon)),
        min_eig=min_eig,
        max_sin=max_sin,
        bound_holds=bool(min_eig >= -np.sqrt(epsilon) - slack),
        principal_angles=angles,
    )


def spectral_function(matrix: MatrixLike, phi: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """
    Apply a real function to the spectrum of a Hermitian matrix.

    phi receives the ascending eigenvalue array; scalar results broadcast.
    """
    decomposition = eig_hermitian(matrix)
    mapped = np.broadcast_to(np.asarray(phi(decomposition.eigenvalues), dtype=float), decomposition.eigenvalues.shape)
    vectors = decomposition.eigenvectors
    return (vectors * mapped) @ vectors.conj().T


def apply_local(site_dims: Sequence[int], sites: Sequence[int], matrix: np.ndarray, block: np.ndarray) -> np.ndarray:
    """
    Apply a local operator to a block of column vectors.

    Site 0 is the least significant digit of the global index; within the
    local operator the first listed site is least significant.

    Args:
        site_dims: Dimension of every site
        sites: Sites the operator acts on, in local significance order
        matrix: Local operator over the listed sites
        block: Array of shape (prod(site_dims), K)

    Returns:
        New array of the same shape
    """
    num_sites = len(site_dims)
    k = len(sites)
    if len(set(sites)) != k or any(s < 0 or s >= num_sites for s in sites):
        raise InputError(f"Invalid sites {list(sites)} for {num_sites} sites")
    local_dims = [site_dims[s] for s in sites]
    local_dim = int(np.prod(local_dims)) if k else 1
    if matrix.shape != (local_dim, local_dim):
        raise InputError(f"Local operator has shape {matrix.shape}, expected ({local_dim}, {local_dim})")

    columns = block.shape[1]
    if k == 0:
        return matrix[0, 0] * block

    tensor = block.reshape(tuple(reversed(site_dims)) + (columns,))
    reversed_local = list(reversed(local_dims))
    op = matrix.reshape(tuple(reversed_local) + tuple(reversed_local))
    axes = [num_sites - 1 - s for s in reversed(sites)]
    result = np.tensordot(op, tensor, axes=(list(range(k, 2 * k)), axes))
    result = np.moveaxis(result, list(range(k)), axes)
    return result.reshape(block.shape)


def embed_operator(site_dims: Sequence[int], sites: Sequence[int], matrix: MatrixLike) -> np.ndarray:
    """Full operator acting as matrix on the listed sites and identity elsewhere."""
    local = np.asarray(matrix.to_array() if isinstance(matrix, ComplexMatrix) else matrix, dtype=complex)
    total = int(np.prod(site_dims))
    return apply_local(site_dims, sites, local, np.eye(total, dtype=complex))


def random_unitary(dim: int, rng: np.random.Generator, real: bool = False) -> np.ndarray:
    """Haar-random unitary (or orthogonal when real=True)."""
    if dim == 1:
        if real:
            return np.array([[1.0 if rng.random() < 0.5 else -1.0]], dtype=complex)
        return np.array([[np.exp(2j * np.pi * rng.random())]])
    if real:
        return np.asarray(ortho_group.rvs(dim, random_state=rng), dtype=complex)
    return np.asarray(unitary_group.rvs(dim, random_state=rng), dtype=complex)


def random_projector(dim: int, rank: int, rng: np.random.Generator) -> np.ndarray:
    """Projector onto a Haar-random rank-dimensional subspace."""
    if not 0 <= rank <= dim:
        raise InputError(f"rank must lie in [0, {dim}], got {rank}")
    basis = random_unitary(dim, rng)[:, :rank]
    projector = basis @ basis.conj().T
    return 0.5 * (projector + projector.conj().T)


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Hermitian matrix with Gaussian entries."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (g + g.conj().T)
