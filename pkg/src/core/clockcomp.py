"""
Compilation of verifier circuits into clock Hamiltonians.

The clock is an explicit (T+1)-level register appended after qubit m-1, so
the basis index of |x>|t> is x + 2^m t. H = H_init + sum_t H_evol(t) +
H_final with the positive semidefinite four-term H_evol and either the
projector final term (onto the evolved rejecting subspace) or the standard
final term (output qubit in |0>).
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import structlog

from .bqpcount import VerifierInstance, accepting_dimension, snapped_spectrum
from .config import config_loader
from .errors import ConsistencyError, InputError, PromiseViolationError
from .hamdos import LocalHamiltonian, LocalTerm
from .models import CompileReport, FinalVariant, GroundSpaceReport, HoppingVariant, SwapBoundReport
from .numkit import eig_hermitian, eigvals_hermitian, embed_operator, projector_difference_bound
from .qcirc import Circuit, evolve_block, input_embedding, omega, output_mask, prefix_unitaries

logger = structlog.get_logger(__name__)


@dataclass(frozen=True, eq=False)
class ClockHamiltonian:
    """Dense clock Hamiltonian with the data it was compiled from."""
    matrix: np.ndarray
    m: int
    n: int
    T: int
    variant: FinalVariant
    eps: float
    a: float
    b: float
    final_block: np.ndarray
    accept_basis: np.ndarray
    reject_basis: np.ndarray
    ur_basis: np.ndarray
    circuit_digest: str

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def register_dim(self) -> int:
        return 1 << self.m

    @property
    def site_dims(self) -> List[int]:
        return [2] * self.m + [self.T + 1]

    @property
    def dim_accept(self) -> int:
        return self.accept_basis.shape[1]


@dataclass(frozen=True, eq=False)
class SubspaceSplit:
    """Orthonormal bases of S1 (good inputs), S2 (bad inputs), S3 (wrong ancilla) in the rotated frame."""
    s1: np.ndarray
    s2: np.ndarray
    s3: np.ndarray


@dataclass(frozen=True, eq=False)
class BlockSpectra:
    """Spectra of the rotated Hamiltonian restricted to S1, S2, S3."""
    s1: np.ndarray
    s2: np.ndarray
    s3: np.ndarray
    off_block_norm: float


def hopping_matrix(T: int, variant: HoppingVariant = HoppingVariant.E) -> np.ndarray:
    """
    Tridiagonal (T+1)x(T+1) hopping matrix.

    Diagonal 1/2, 1, ..., 1, corner; off-diagonals -1/2. The corner is 1/2
    for E and 3/2 for E'.
    """
    if T < 1:
        raise InputError(f"T must be at least 1, got {T}")
    diagonal = np.ones(T + 1)
    diagonal[0] = 0.5
    diagonal[-1] = variant.corner_entry
    matrix = np.diag(diagonal) - 0.5 * (np.eye(T + 1, k=1) + np.eye(T + 1, k=-1))
    return matrix.astype(complex)


def hopping_closed_form(T: int, variant: HoppingVariant = HoppingVariant.E) -> np.ndarray:
    """Closed-form ascending spectrum of the hopping matrix."""
    if T < 1:
        raise InputError(f"T must be at least 1, got {T}")
    index = np.arange(T + 1)
    if variant is HoppingVariant.E:
        return 1.0 - np.cos(index * np.pi / (T + 1))
    return 1.0 - np.cos((index + 0.5) * np.pi / (T + 1.5))


def hopping_spectrum(T: int, variant: HoppingVariant = HoppingVariant.E) -> List[float]:
    """
    Spectrum of E or E', checked against diagonalization of the assembled matrix.

    Raises ConsistencyError when they differ by more than the block-check tolerance.
    """
    closed = hopping_closed_form(T, variant)
    numeric = eigvals_hermitian(hopping_matrix(T, variant))
    deviation = float(np.max(np.abs(numeric - closed)))
    if deviation > config_loader.get_tolerances().block_check:
        raise ConsistencyError(f"Hopping spectrum of {variant.value} (T={T}) deviates from closed form by {deviation:.3e}")
    return [float(x) for x in closed]


def gap_bound(T: int, variant: FinalVariant, eps: float) -> float:
    """1 - cos(pi/(2T+3)), lowered by sqrt(eps) for the standard final term."""
    bound = 1.0 - np.cos(np.pi / (2 * T + 3))
    if variant is FinalVariant.STANDARD:
        bound -= np.sqrt(eps)
    return float(bound)


def _ancilla_penalty(m: int, n: int) -> np.ndarray:
    """Diagonal of 1 - |0><0|_A on the register."""
    return ((np.arange(1 << m) >> n) != 0).astype(float)


def compile_clock(c: Circuit, variant: FinalVariant, a: float, b: float) -> ClockHamiltonian:
    """
    Build the clock Hamiltonian of a verifier circuit.

    Args:
        c: Verifier circuit
        variant: Final-term variant
        a: Acceptance threshold
        b: Rejection threshold

    Returns:
        ClockHamiltonian of dimension 2^m (T+1)
    """
    variant = FinalVariant(variant)
    caps = config_loader.get_caps()
    register = c.dim
    clock = c.T + 1
    dim = register * clock
    if dim > caps.clock_dim:
        raise InputError(f"Clock Hamiltonian dimension {dim} exceeds the cap of {caps.clock_dim}")

    instance = VerifierInstance(omega=omega(c), a=a, b=b, n=c.n)
    report = accepting_dimension(instance)
    if not report.promise_ok:
        raise PromiseViolationError(f"Gap promise fails at (a={a}, b={b}): eigenvalues {report.violations} inside (b, a)", report)

    spectrum = snapped_spectrum(instance)
    accept_mask = spectrum.eigenvalues >= a
    accept_basis = spectrum.columns_where(accept_mask)
    reject_basis = spectrum.columns_where(~accept_mask)
    raw = eig_hermitian(instance.omega).eigenvalues
    eps = max(
        float(np.max(raw[~accept_mask])) if np.any(~accept_mask) else 0.0,
        float(1.0 - np.min(raw[accept_mask])) if np.any(accept_mask) else 0.0,
        0.0,
    )

    embedded_reject = np.zeros((register, reject_basis.shape[1]), dtype=complex)
    embedded_reject[:c.input_dim] = reject_basis
    ur_basis = evolve_block(c, embedded_reject)

    if variant is FinalVariant.PROJECTOR:
        final_block = ur_basis @ ur_basis.conj().T
    else:
        final_block = np.diag(output_mask(c.m, 0).astype(float)).astype(complex)

    h = np.zeros((clock, register, clock, register), dtype=complex)
    h[0, :, 0, :] += np.diag(_ancilla_penalty(c.m, c.n))
    identity = np.eye(register)
    for t, gate in enumerate(c.gates, start=1):
        u = embed_operator([2] * c.m, gate.targets, gate.matrix)
        h[t, :, t - 1, :] += -0.5 * u
        h[t - 1, :, t, :] += -0.5 * u.conj().T
        h[t, :, t, :] += 0.5 * identity
        h[t - 1, :, t - 1, :] += 0.5 * identity
    h[c.T, :, c.T, :] += final_block
    matrix = h.reshape(dim, dim)
    matrix = 0.5 * (matrix + matrix.conj().T)

    logger.info("compiled clock Hamiltonian", variant=variant.value, dim=dim, T=c.T, dim_accept=report.dim_accept, eps=eps)
    return ClockHamiltonian(
        matrix=matrix, m=c.m, n=c.n, T=c.T, variant=variant, eps=eps, a=a, b=b,
        final_block=final_block, accept_basis=accept_basis, reject_basis=reject_basis,
        ur_basis=ur_basis, circuit_digest=c.digest(),
    )


def compile_report(h: ClockHamiltonian, term_count: int) -> CompileReport:
    return CompileReport(
        variant=h.variant, m=h.m, n=h.n, T=h.T, dim=h.dim, eps=h.eps, a=h.a, b=h.b,
        term_count=term_count, site_dims=h.site_dims,
    )


def _check_compatible(h: ClockHamiltonian, c: Circuit) -> None:
    if h.m != c.m or h.n != c.n or h.T != c.T:
        raise InputError(f"Circuit (m={c.m}, n={c.n}, T={c.T}) does not match Hamiltonian (m={h.m}, n={h.n}, T={h.T})")
    if h.circuit_digest != c.digest():
        raise InputError("Circuit differs from the one the Hamiltonian was compiled from")


def _as_blocks(matrix: np.ndarray, clock: int, register: int) -> np.ndarray:
    return matrix.reshape(clock, register, clock, register).transpose(0, 2, 1, 3)


def block_diagonalize(h: ClockHamiltonian, c: Circuit) -> np.ndarray:
    """
    Rotate H by W = sum_j U_j...U_1 x |j><j|.

    Verifies that W is unitary and that the evolution part of W^dagger H W
    equals 1 x E.

    Returns:
        H' = W^dagger H W as a dense matrix
    """
    _check_compatible(h, c)
    tol = config_loader.get_tolerances().block_check
    register = h.register_dim
    clock = h.T + 1

    prefixes = np.stack(prefix_unitaries(c))
    identity = np.eye(register)
    unitarity = max(float(np.max(np.abs(w.conj().T @ w - identity))) for w in prefixes)
    if unitarity > tol:
        raise ConsistencyError(f"W is not unitary: deviation {unitarity:.3e}")

    blocks = _as_blocks(h.matrix, clock, register)
    rotated = prefixes.conj().transpose(0, 2, 1)[:, None] @ blocks @ prefixes[None, :]

    evolution = rotated.copy()
    evolution[0, 0] -= np.diag(_ancilla_penalty(h.m, h.n))
    evolution[h.T, h.T] -= prefixes[h.T].conj().T @ h.final_block @ prefixes[h.T]
    expected = hopping_matrix(h.T).real[:, :, None, None] * identity[None, None]
    deviation = float(np.max(np.abs(evolution - expected)))
    if deviation > tol:
        raise ConsistencyError(f"Rotated evolution terms deviate from 1 x E by {deviation:.3e}")

    dim = h.dim
    return rotated.transpose(0, 2, 1, 3).reshape(dim, dim)


def subspace_split(h: ClockHamiltonian) -> SubspaceSplit:
    """
    Bases of S1 = A x |0>_A x C^{T+1}, S2 = R x |0>_A x C^{T+1} and S3, the rest.

    Vectors are in the rotated frame of block_diagonalize.
    """
    register = h.register_dim
    clock = h.T + 1
    input_dim = 1 << h.n

    def lift(basis: np.ndarray) -> np.ndarray:
        columns = []
        for t in range(clock):
            block = np.zeros((h.dim, basis.shape[1]), dtype=complex)
            block[t * register:t * register + input_dim] = basis
            columns.append(block)
        return np.hstack(columns) if columns else np.zeros((h.dim, 0), dtype=complex)

    wrong = np.flatnonzero(_ancilla_penalty(h.m, h.n))
    s3_indices = [t * register + x for t in range(clock) for x in wrong]
    s3 = np.zeros((h.dim, len(s3_indices)), dtype=complex)
    s3[s3_indices, np.arange(len(s3_indices))] = 1.0
    return SubspaceSplit(s1=lift(h.accept_basis), s2=lift(h.reject_basis), s3=s3)


def block_spectra(h: ClockHamiltonian, c: Circuit) -> BlockSpectra:
    """Spectra of H' on S1, S2 and S3 and the largest off-block norm."""
    rotated = block_diagonalize(h, c)
    split = subspace_split(h)
    bases = [split.s1, split.s2, split.s3]

    spectra = []
    for basis in bases:
        if basis.shape[1] == 0:
            spectra.append(np.zeros(0))
        else:
            spectra.append(eigvals_hermitian(basis.conj().T @ rotated @ basis))

    off_block = 0.0
    for i, first in enumerate(bases):
        for j, second in enumerate(bases):
            if i != j and first.shape[1] and second.shape[1]:
                off_block = max(off_block, float(np.linalg.norm(first.conj().T @ rotated @ second, 2)))
    return BlockSpectra(s1=spectra[0], s2=spectra[1], s3=spectra[2], off_block_norm=off_block)


def analyze_ground_space(h: ClockHamiltonian, expected_dim: int) -> GroundSpaceReport:
    """
    Degeneracy, splitting and gap of the low-energy space.

    The counting cutoff is 1e-9 for the projector variant and eps + 1e-9
    for the standard variant; the gap is the first eigenvalue above the
    counted space.
    """
    slack = config_loader.get_tolerances().spectral_slack
    eigenvalues = eigvals_hermitian(h.matrix)
    cutoff = slack if h.variant is FinalVariant.PROJECTOR else h.eps + slack

    degeneracy = int(np.sum(eigenvalues <= cutoff))
    splitting = float(eigenvalues[degeneracy - 1] - eigenvalues[0]) if degeneracy else 0.0
    gap = float(eigenvalues[degeneracy]) if degeneracy < len(eigenvalues) else None
    bound = gap_bound(h.T, h.variant, h.eps)
    split_limit = slack if h.variant is FinalVariant.PROJECTOR else h.eps + slack

    report = GroundSpaceReport(
        variant=h.variant,
        T=h.T,
        eps=h.eps,
        cutoff=cutoff,
        expected_dim=expected_dim,
        degeneracy=degeneracy,
        ground_energy=float(eigenvalues[0]),
        splitting=splitting,
        gap=gap,
        gap_bound=bound,
        degeneracy_ok=degeneracy == expected_dim,
        splitting_ok=splitting <= split_limit,
        gap_ok=gap is None or gap >= bound - slack,
    )
    if not report.passed:
        logger.warning("ground space check failed", degeneracy=degeneracy, expected=expected_dim, gap=gap, bound=bound)
    return report


def final_term_swap_bound(h_proj: ClockHamiltonian, h_std: ClockHamiltonian) -> SwapBoundReport:
    """
    Compare the standard final term with the projector final term.

    H_std - H_proj is supported on the last clock block, where it equals
    P - Q with P = |0><0|_1 and Q the projector onto U[R]; its least
    eigenvalue is bounded by -sqrt(||Q(1-P)Q||), and ||Q(1-P)Q|| is the
    largest output-qubit |1> weight over U[R], at most eps.
    """
    if h_proj.variant is not FinalVariant.PROJECTOR or h_std.variant is not FinalVariant.STANDARD:
        raise InputError("Expected a projector-variant and a standard-variant Hamiltonian")
    if h_proj.circuit_digest != h_std.circuit_digest or (h_proj.a, h_proj.b) != (h_std.a, h_std.b):
        raise InputError("Hamiltonians were compiled from different circuits or thresholds")

    slack = config_loader.get_tolerances().spectral_slack
    register = h_proj.register_dim
    clock = h_proj.T + 1
    difference = _as_blocks(h_std.matrix - h_proj.matrix, clock, register)
    outside = difference.copy()
    outside[h_proj.T, h_proj.T] = 0.0
    if float(np.max(np.abs(outside))) > config_loader.get_tolerances().block_check:
        raise ConsistencyError("H_std - H_proj has support outside the last clock block")

    block_bound = projector_difference_bound(h_std.final_block, h_proj.final_block)
    block_min = float(eigvals_hermitian(difference[h_proj.T, h_proj.T])[0])
    if abs(block_min - block_bound.min_eig) > slack:
        raise ConsistencyError(f"Last-block minimum {block_min} disagrees with P - Q minimum {block_bound.min_eig}")
    min_eig_diff = min(block_min, 0.0)

    if h_proj.ur_basis.shape[1]:
        weights = h_proj.ur_basis[output_mask(h_proj.m, 1)]
        chi_max = float(eigvals_hermitian(weights.conj().T @ weights)[-1])
    else:
        chi_max = 0.0

    eps = h_proj.eps
    return SwapBoundReport(
        min_eig_diff=min_eig_diff,
        eps=eps,
        sqrt_eps=float(np.sqrt(eps)),
        holds=bool(min_eig_diff >= -np.sqrt(eps) - slack),
        chi_max=chi_max,
        chi_ok=bool(chi_max <= eps + slack),
    )


def proof_history(c: Circuit, psi: np.ndarray) -> np.ndarray:
    """(T+1)^(-1/2) sum_t U_t...U_1 |psi>_I |0>_A |t>."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (c.input_dim,):
        raise InputError(f"Input state needs {c.input_dim} amplitudes, got {psi.shape}")
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise InputError("Input state is zero")
    state = (input_embedding(c) @ psi / norm).reshape(-1, 1)
    history = [evolve_block(c, state, steps=t)[:, 0] for t in range(c.T + 1)]
    return np.concatenate(history) / np.sqrt(c.T + 1)


def to_local_hamiltonian(h: ClockHamiltonian, c: Circuit) -> LocalHamiltonian:
    """
    The clock Hamiltonian as a sum of log-local terms.

    Sites are the m qubits followed by the clock. H_init acts on the
    ancillas and the clock, each H_evol(t) on the gate's qubits and the
    clock, H_final on qubit 0 and the clock (standard) or on every qubit and
    the clock (projector).
    """
    _check_compatible(h, c)
    clock_site = h.m
    clock = h.T + 1
    site_dims = tuple(h.site_dims)
    terms: List[LocalTerm] = []

    def clock_projector(s: int, t: int) -> np.ndarray:
        op = np.zeros((clock, clock), dtype=complex)
        op[s, t] = 1.0
        return op

    if h.n < h.m:
        ancillas = list(range(h.n, h.m))
        penalty = np.eye(1 << len(ancillas), dtype=complex)
        penalty[0, 0] = 0.0
        terms.append(LocalTerm(sites=tuple(ancillas) + (clock_site,), matrix=np.kron(clock_projector(0, 0), penalty)))

    for t, gate in enumerate(c.gates, start=1):
        sites = sorted(gate.targets)
        local = embed_operator([2] * len(sites), [sites.index(q) for q in gate.targets], gate.matrix)
        identity = np.eye(local.shape[0])
        matrix = (
            -0.5 * np.kron(clock_projector(t, t - 1), local)
            - 0.5 * np.kron(clock_projector(t - 1, t), local.conj().T)
            + 0.5 * np.kron(clock_projector(t, t), identity)
            + 0.5 * np.kron(clock_projector(t - 1, t - 1), identity)
        )
        terms.append(LocalTerm(sites=tuple(sites) + (clock_site,), matrix=matrix))

    if h.variant is FinalVariant.STANDARD:
        zero = np.diag([1.0, 0.0]).astype(complex)
        terms.append(LocalTerm(sites=(0, clock_site), matrix=np.kron(clock_projector(h.T, h.T), zero)))
    else:
        terms.append(LocalTerm(sites=tuple(range(h.m)) + (clock_site,), matrix=np.kron(clock_projector(h.T, h.T), h.final_block)))

    return LocalHamiltonian(site_dims=site_dims, terms=tuple(terms))
