"""
#BQP verifier semantics.

Counting the accepting subspace of a verifier operator under the gap
promise, the subspace form of the definition, the variational
(minimax) certificate, and spectral amplification.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as sla
import structlog

from .config import config_loader
from .errors import ConsistencyError, InputError, PromiseViolationError
from .models import ComplexMatrix, CountReport, VerifierDocument
from .numkit import SpectralDecomposition, check_hermitian, check_tagged_hermitian, eig_hermitian, eigvals_hermitian, principal_angles, spectral_function

logger = structlog.get_logger(__name__)


@dataclass(frozen=True, eq=False)
class VerifierInstance:
    """Omega with thresholds b < a; n is the input register size when known."""
    omega: np.ndarray
    a: float
    b: float
    n: Optional[int] = None

    def __post_init__(self):
        if not 0 <= self.b < self.a <= 1:
            raise InputError(f"Thresholds must satisfy 0 <= b < a <= 1, got a={self.a}, b={self.b}")
        matrix = check_hermitian(self.omega)
        object.__setattr__(self, 'omega', matrix)
        if self.n is not None and matrix.shape[0] != 1 << self.n:
            raise InputError(f"Omega has dimension {matrix.shape[0]}, expected 2^{self.n}")

    @property
    def dim(self) -> int:
        return self.omega.shape[0]

    @property
    def gap(self) -> float:
        return self.a - self.b

    @classmethod
    def from_document(cls, doc: VerifierDocument) -> 'VerifierInstance':
        return cls(omega=check_tagged_hermitian(doc.omega, "Omega"), a=doc.a, b=doc.b, n=doc.n)

    def to_document(self) -> VerifierDocument:
        n = self.n if self.n is not None else self.dim.bit_length() - 1
        return VerifierDocument(n=n, a=self.a, b=self.b, omega=ComplexMatrix.from_array(self.omega))


@dataclass(frozen=True, eq=False)
class DecompositionComparison:
    """Two candidate (A, R) decompositions of the same verifier."""
    valid: bool
    valid_prime: bool
    dim_a: int
    dim_a_prime: int
    dim_a_cap_r_prime: int
    dim_a_prime_cap_r: int
    witness: Optional[np.ndarray]
    witness_value: Optional[float]

    @property
    def dims_agree(self) -> bool:
        return self.dim_a == self.dim_a_prime


def snapped_spectrum(v: VerifierInstance) -> SpectralDecomposition:
    """
    Eigensystem of Omega with eigenvalues near a threshold moved onto it.

    Raises InputError when the spectrum leaves [0, 1] beyond tolerance.
    """
    tolerances = config_loader.get_tolerances()
    decomposition = eig_hermitian(v.omega)
    eigenvalues = decomposition.eigenvalues.copy()
    slack = tolerances.spectral_slack
    if eigenvalues[0] < -slack or eigenvalues[-1] > 1 + slack:
        raise InputError(f"Omega spectrum [{eigenvalues[0]:.6g}, {eigenvalues[-1]:.6g}] leaves [0, 1]")
    snap = tolerances.threshold_snap
    eigenvalues[np.abs(eigenvalues - v.a) <= snap] = v.a
    eigenvalues[np.abs(eigenvalues - v.b) <= snap] = v.b
    return SpectralDecomposition(eigenvalues=eigenvalues, eigenvectors=decomposition.eigenvectors)


def _count(eigenvalues: np.ndarray, a: float, b: float, grace: bool) -> CountReport:
    descending = eigenvalues[::-1]
    dim_accept = int(np.sum(eigenvalues >= a))
    violations = [float(x) for x in eigenvalues if b < x < a]
    return CountReport(
        dim_accept=dim_accept,
        lambda_at=float(descending[dim_accept - 1]) if dim_accept > 0 else None,
        lambda_after=float(descending[dim_accept]) if dim_accept < len(eigenvalues) else None,
        promise_ok=not violations,
        violations=violations,
        a=a,
        b=b,
        count_range=(dim_accept, int(np.sum(eigenvalues > b))) if grace else None,
    )


def accepting_dimension(v: VerifierInstance, grace: bool = False) -> CountReport:
    """
    Count eigenvalues of Omega at or above a.

    Args:
        v: Verifier instance
        grace: Also report the grace-interval range [#{l >= a}, #{l > b}]

    Returns:
        CountReport; promise violations are reported, not raised
    """
    spectrum = snapped_spectrum(v)
    report = _count(spectrum.eigenvalues, v.a, v.b, grace)
    if not report.promise_ok:
        logger.warning("gap promise violated", a=v.a, b=v.b, violations=report.violations)
    return report


def grace_count(v: VerifierInstance) -> Tuple[int, int]:
    """Grace-interval count range."""
    report = accepting_dimension(v, grace=True)
    return report.count_range


def _check_orthonormal_split(v: VerifierInstance, basis_a: np.ndarray, basis_r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    tol = config_loader.get_tolerances().orthonormal
    basis_a = np.asarray(basis_a, dtype=complex)
    basis_r = np.asarray(basis_r, dtype=complex)
    for basis in (basis_a, basis_r):
        if basis.ndim != 2 or basis.shape[0] != v.dim:
            raise InputError(f"Basis must have shape ({v.dim}, k), got {basis.shape}")
    joint = np.hstack([basis_a, basis_r])
    if joint.shape[1] != v.dim:
        raise InputError(f"Bases have {joint.shape[1]} columns together, expected {v.dim}")
    defect = float(np.max(np.abs(joint.conj().T @ joint - np.eye(v.dim))))
    if defect > tol:
        raise InputError(f"Bases are not jointly orthonormal: max deviation {defect:.3e}")
    return basis_a, basis_r


def _compressed_extremes(v: VerifierInstance, basis: np.ndarray) -> Tuple[float, float]:
    """(min, max) eigenvalue of basis^dagger Omega basis."""
    if basis.shape[1] == 0:
        return float('inf'), float('-inf')
    eigenvalues = eigvals_hermitian(basis.conj().T @ v.omega @ basis)
    return float(eigenvalues[0]), float(eigenvalues[-1])


def check_subspace_promise(v: VerifierInstance, basis_a: np.ndarray, basis_r: np.ndarray) -> bool:
    """
    Check a candidate decomposition into accepting and rejecting subspaces.

    True iff <psi|Omega|psi> >= a on span(basis_a) and <= b on span(basis_r).
    """
    basis_a, basis_r = _check_orthonormal_split(v, basis_a, basis_r)
    slack = config_loader.get_tolerances().spectral_slack
    min_a, _ = _compressed_extremes(v, basis_a)
    _, max_r = _compressed_extremes(v, basis_r)
    return bool(min_a >= v.a - slack and max_r <= v.b + slack)


def eigenbasis_split(v: VerifierInstance) -> Tuple[np.ndarray, np.ndarray]:
    """(accepting, rejecting) eigenvector bases under the snapped spectrum."""
    spectrum = snapped_spectrum(v)
    return spectrum.columns_where(spectrum.eigenvalues >= v.a), spectrum.columns_where(spectrum.eigenvalues < v.a)


def minimax_certify(v: VerifierInstance) -> bool:
    """
    Certify lambda_{dim A} >= a > b >= lambda_{dim A + 1} (descending order).

    The two boundary eigenvalues are also recomputed from their variational
    forms: the smallest Rayleigh quotient on the top-dim A eigenspace and
    the largest on its complement.
    """
    spectrum = snapped_spectrum(v)
    report = _count(spectrum.eigenvalues, v.a, v.b, grace=False)
    if not report.promise_ok:
        raise PromiseViolationError(
            f"Gap promise fails at (a={v.a}, b={v.b}): eigenvalues {report.violations} inside (b, a)", report
        )

    slack = config_loader.get_tolerances().spectral_slack
    k = report.dim_accept
    top = spectrum.eigenvectors[:, spectrum.dim - k:]
    rest = spectrum.eigenvectors[:, :spectrum.dim - k]
    maxmin, _ = _compressed_extremes(v, top)
    _, minmax = _compressed_extremes(v, rest)
    if report.lambda_at is not None and abs(maxmin - report.lambda_at) > config_loader.get_tolerances().threshold_snap + slack:
        raise ConsistencyError(f"max-min form gives {maxmin}, spectrum gives {report.lambda_at}")
    if report.lambda_after is not None and abs(minmax - report.lambda_after) > config_loader.get_tolerances().threshold_snap + slack:
        raise ConsistencyError(f"min-max form gives {minmax}, spectrum gives {report.lambda_after}")

    upper_ok = report.lambda_at is None or report.lambda_at >= v.a
    lower_ok = report.lambda_after is None or report.lambda_after <= v.b
    return bool(upper_ok and lower_ok and v.a > v.b)


def amplify_spectrum(v: VerifierInstance, r: int) -> VerifierInstance:
    """
    Spectral amplification to thresholds (1 - 2^-r, 2^-r).

    Eigenvalues in [a, 1] map linearly onto [1 - 2^-r, 1] and those in
    [0, b] onto [0, 2^-r]; eigenvectors are unchanged.

    Args:
        v: Instance satisfying the gap promise
        r: Amplification exponent, at least 2

    Returns:
        Amplified VerifierInstance
    """
    if r < 2:
        raise InputError(f"amplification exponent r={r} gives thresholds a'={1 - 2.0 ** -r}, b'={2.0 ** -r}; a' must exceed b' (r >= 2)")
    report = accepting_dimension(v)
    if not report.promise_ok:
        raise PromiseViolationError(f"Cannot amplify: eigenvalues {report.violations} inside (b, a)", report)

    snap = config_loader.get_tolerances().threshold_snap
    tail = 2.0 ** -r
    a, b = v.a, v.b

    def migrate(eigenvalues: np.ndarray) -> np.ndarray:
        x = np.clip(eigenvalues, 0.0, 1.0)
        accept_side = 1.0 - tail + (tail * (x - a) / (1.0 - a) if a < 1 else 0.0 * x)
        reject_side = tail * x / b if b > 0 else 0.0 * x
        accept_side = np.clip(accept_side, 1.0 - tail, 1.0)
        reject_side = np.clip(reject_side, 0.0, tail)
        return np.where(eigenvalues >= a - snap, accept_side, reject_side)

    amplified = spectral_function(v.omega, migrate)
    logger.debug("amplified spectrum", r=r, dim_accept=report.dim_accept)
    return VerifierInstance(omega=amplified, a=1.0 - tail, b=tail, n=v.n)


def compare_decompositions(v: VerifierInstance,
                           split: Tuple[np.ndarray, np.ndarray],
                           split_prime: Tuple[np.ndarray, np.ndarray]) -> DecompositionComparison:
    """
    Compare two (A, R) decompositions.

    The intersections A ∩ R' and A' ∩ R are measured through the principal
    angles of their projectors. When dim A > dim A' a unit vector in
    A ∩ R' is returned as witness together with its acceptance probability.
    """
    basis_a, basis_r = _check_orthonormal_split(v, *split)
    basis_a2, basis_r2 = _check_orthonormal_split(v, *split_prime)

    def intersection_dim(x: np.ndarray, y: np.ndarray) -> int:
        if x.shape[1] == 0 or y.shape[1] == 0:
            return 0
        report = principal_angles(x @ x.conj().T, y @ y.conj().T)
        return report.commuting_block_types.one_one

    witness = None
    witness_value = None
    first, second = (basis_a, basis_r2) if basis_a.shape[1] >= basis_a2.shape[1] else (basis_a2, basis_r)
    if first.shape[1] and second.shape[1] and basis_a.shape[1] != basis_a2.shape[1]:
        kernel = sla.null_space(np.hstack([first, -second]))
        if kernel.shape[1]:
            vector = first @ kernel[:first.shape[1], 0]
            vector = vector / np.linalg.norm(vector)
            witness = vector
            witness_value = float(np.real(vector.conj() @ v.omega @ vector))

    return DecompositionComparison(
        valid=check_subspace_promise(v, basis_a, basis_r),
        valid_prime=check_subspace_promise(v, basis_a2, basis_r2),
        dim_a=basis_a.shape[1],
        dim_a_prime=basis_a2.shape[1],
        dim_a_cap_r_prime=intersection_dim(basis_a, basis_r2),
        dim_a_prime_cap_r=intersection_dim(basis_a2, basis_r),
        witness=witness,
        witness_value=witness_value,
    )
