"""
Core data models for the doslab counting laboratory.

This module defines the report and document structures exchanged between
the numerical core, the report exporters and the command line: matrix JSON,
Hamiltonian and verifier documents, and one report model per experiment.
Numerical value types (circuits, spectral decompositions, clock
Hamiltonians) live next to the code that computes them.
"""

from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator, ConfigDict


class FinalVariant(str, Enum):
    """Final-term variants of the clock Hamiltonian."""
    PROJECTOR = "projector"
    STANDARD = "standard"

    @property
    def description(self) -> str:
        """Human-readable description of the final term."""
        descriptions = {
            self.PROJECTOR: "projector onto the evolved rejecting subspace at the last clock step",
            self.STANDARD: "penalty on output qubit |0> at the last clock step",
        }
        return descriptions[self]


class HoppingVariant(str, Enum):
    """Tridiagonal hopping matrices of the block-diagonalized clock Hamiltonian."""
    E = "E"
    E_PRIME = "E_prime"

    @property
    def corner_entry(self) -> float:
        """Value of the last diagonal entry."""
        return 0.5 if self is HoppingVariant.E else 1.5


# Matrix and document models

class ComplexMatrix(BaseModel):
    """Square complex matrix in row-major [re, im] pairs."""
    model_config = ConfigDict(frozen=True)

    dim: int = Field(..., gt=0, description="Matrix dimension")
    entries: List[Tuple[float, float]] = Field(..., description="Row-major entries as [re, im] pairs")

    @model_validator(mode='after')
    def validate_shape(self) -> 'ComplexMatrix':
        """Entry count must be dim squared."""
        if len(self.entries) != self.dim * self.dim:
            raise ValueError(f"Expected {self.dim * self.dim} entries for dim {self.dim}, got {len(self.entries)}")
        return self

    @classmethod
    def from_array(cls, matrix: np.ndarray) -> 'ComplexMatrix':
        """Build from a square numpy array."""
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"Matrix must be square, got shape {matrix.shape}")
        flat = matrix.ravel()
        return cls(dim=matrix.shape[0], entries=[(float(z.real), float(z.imag)) for z in flat])

    def to_array(self) -> np.ndarray:
        """Convert to a dim x dim complex numpy array."""
        pairs = np.asarray(self.entries, dtype=float).reshape(-1, 2)
        return (pairs[:, 0] + 1j * pairs[:, 1]).reshape(self.dim, self.dim)


class TermDocument(BaseModel):
    """One local term of a Hamiltonian document."""
    sites: List[int] = Field(..., description="Sorted site indices the term acts on")
    matrix: ComplexMatrix

    @field_validator('sites')
    @classmethod
    def validate_sites(cls, v):
        """Sites must be distinct, non-negative and sorted."""
        if any(s < 0 for s in v):
            raise ValueError("Site indices must be non-negative")
        if v != sorted(set(v)):
            raise ValueError(f"Sites must be sorted and distinct, got {v}")
        return v


class HamiltonianDocument(BaseModel):
    """Hamiltonian JSON: site dimensions and local terms."""
    site_dims: List[int] = Field(..., min_length=1, description="Local dimension of every site, site 0 first")
    terms: List[TermDocument] = Field(default_factory=list)

    @field_validator('site_dims')
    @classmethod
    def validate_site_dims(cls, v):
        """Every site needs a positive dimension."""
        if any(d <= 0 for d in v):
            raise ValueError("Site dimensions must be positive")
        return v


class VerifierDocument(BaseModel):
    """VerifierInstance JSON: Ω with its thresholds."""
    n: int = Field(..., ge=0, description="Input qubits")
    a: float = Field(..., description="Acceptance threshold")
    b: float = Field(..., description="Rejection threshold")
    omega: ComplexMatrix


# Report models

class BlockCounts(BaseModel):
    """Counts of the commuting joint-eigenvalue blocks of a projector pair."""
    zero_zero: int = Field(0, ge=0, description="Blocks with P=0, Q=0")
    zero_one: int = Field(0, ge=0, description="Blocks with P=0, Q=1")
    one_zero: int = Field(0, ge=0, description="Blocks with P=1, Q=0")
    one_one: int = Field(0, ge=0, description="Blocks with P=1, Q=1")


class PrincipalAngleReport(BaseModel):
    """Jordan canonical form of a pair of projectors."""
    dim: int
    rank_p: int
    rank_q: int
    commuting_block_types: BlockCounts
    angles: List[float] = Field(default_factory=list, description="Angles of the 2x2 blocks, ascending, in (0, pi/2)")

    @model_validator(mode='after')
    def validate_rank_accounting(self) -> 'PrincipalAngleReport':
        """rank(P) = #(1,.) + #angles, likewise for Q, and blocks fill the space."""
        blocks = self.commuting_block_types
        k = len(self.angles)
        if self.rank_p != blocks.one_zero + blocks.one_one + k:
            raise ValueError("Rank of P does not match block accounting")
        if self.rank_q != blocks.zero_one + blocks.one_one + k:
            raise ValueError("Rank of Q does not match block accounting")
        total = blocks.zero_zero + blocks.zero_one + blocks.one_zero + blocks.one_one + 2 * k
        if total != self.dim:
            raise ValueError(f"Blocks cover {total} dimensions, expected {self.dim}")
        return self

    @property
    def sines(self) -> List[float]:
        """sin(theta_j) for every angle block."""
        return [float(np.sin(theta)) for theta in self.angles]


class ProjectorBoundReport(BaseModel):
    """Lower bound on the spectrum of P - Q from the overlap Q(1-P)Q."""
    epsilon: float = Field(..., description="Operator norm of Q(1-P)Q")
    sqrt_epsilon: float
    min_eig: float = Field(..., description="Least eigenvalue of P - Q")
    max_sin: float = Field(0.0, description="Largest |sin(theta_j)| over angle blocks")
    bound_holds: bool
    principal_angles: PrincipalAngleReport


class CountReport(BaseModel):
    """Accepting-subspace count of a verifier instance."""
    dim_accept: int = Field(..., ge=0)
    lambda_at: Optional[float] = Field(None, description="lambda_{dim A} in descending order; None when dim A = 0")
    lambda_after: Optional[float] = Field(None, description="lambda_{dim A + 1}; None when dim A = 2^n")
    promise_ok: bool
    violations: List[float] = Field(default_factory=list, description="Eigenvalues strictly inside (b, a)")
    a: float
    b: float
    count_range: Optional[Tuple[int, int]] = Field(None, description="Grace-mode range [#{l >= a}, #{l > b}]")

    @model_validator(mode='after')
    def validate_promise_fields(self) -> 'CountReport':
        """When the promise holds the boundary eigenvalues sit on the right sides."""
        if self.promise_ok:
            if self.lambda_at is not None and self.lambda_at < self.a:
                raise ValueError("lambda_at below a with promise_ok")
            if self.lambda_after is not None and self.lambda_after > self.b:
                raise ValueError("lambda_after above b with promise_ok")
        if self.count_range is not None and not (self.count_range[0] <= self.dim_accept <= self.count_range[1]):
            raise ValueError("dim_accept outside count_range")
        return self


class OmegaReport(BaseModel):
    """Spectrum of a circuit's verifier operator and its accepting count."""
    n: int
    m: int
    T: int
    trace: float
    eigenvalues: List[float] = Field(..., description="Ascending eigenvalues of Omega")
    count: CountReport


class PlantReport(BaseModel):
    """Parameters and outcome of a planted-verifier generation."""
    n: int
    m: int
    d: int
    T: int
    t_pad: int
    eps: float
    seed: int
    circuit_path: Optional[str] = None


class GroundSpaceReport(BaseModel):
    """Ground-space analysis of a compiled clock Hamiltonian."""
    variant: FinalVariant
    T: int
    eps: float
    cutoff: float
    expected_dim: int
    degeneracy: int
    ground_energy: float
    splitting: float = Field(..., description="Spread of the counted low-energy eigenvalues")
    gap: Optional[float] = Field(None, description="First eigenvalue above the counted space; None when all counted")
    gap_bound: float
    degeneracy_ok: bool
    splitting_ok: bool
    gap_ok: bool

    @property
    def passed(self) -> bool:
        """All three checks succeed."""
        return self.degeneracy_ok and self.splitting_ok and self.gap_ok


class CompileReport(BaseModel):
    """Summary of a clock-Hamiltonian compilation."""
    variant: FinalVariant
    m: int
    n: int
    T: int
    dim: int
    eps: float
    a: float
    b: float
    term_count: int
    site_dims: List[int]


class SwapBoundReport(BaseModel):
    """Comparison of the standard and projector final terms."""
    min_eig_diff: float = Field(..., description="Least eigenvalue of H_std - H_proj")
    eps: float
    sqrt_eps: float
    holds: bool
    chi_max: float = Field(..., description="Largest output-qubit |1> weight over the evolved rejecting basis")
    chi_ok: bool


class DosQuery(BaseModel):
    """Energy window [e1, e2] with grace width delta."""
    e1: float
    e2: float
    delta: float = Field(..., gt=0)

    @model_validator(mode='after')
    def validate_window(self) -> 'DosQuery':
        """Window must be non-empty and wider than the grace width."""
        if not self.e2 > self.e1:
            raise ValueError(f"e2 must exceed e1, got e1={self.e1}, e2={self.e2}")
        if not self.delta < self.e2 - self.e1:
            raise ValueError(f"delta must be smaller than e2 - e1 = {self.e2 - self.e1}, got {self.delta}")
        return self


class Histogram(BaseModel):
    """Equal-width eigenvalue histogram."""
    bin_edges: List[float]
    counts: List[int]

    @model_validator(mode='after')
    def validate_lengths(self) -> 'Histogram':
        if len(self.bin_edges) != len(self.counts) + 1:
            raise ValueError("bin_edges must have one more entry than counts")
        return self


class DosReport(BaseModel):
    """Density-of-states count in an energy window."""
    query: DosQuery
    grace_mode: bool
    count: int = Field(..., ge=0)
    grace_violations: List[float] = Field(default_factory=list)
    count_range: Optional[Tuple[int, int]] = None
    ok: bool = Field(..., description="False when strict mode found eigenvalues inside a grace interval")
    dim: int
    histogram: Histogram

    @model_validator(mode='after')
    def validate_range(self) -> 'DosReport':
        """count_range brackets count."""
        if self.count_range is not None and not (self.count_range[0] <= self.count <= self.count_range[1]):
            raise ValueError("count outside count_range")
        return self


class DegeneracyReport(BaseModel):
    """Low-energy eigenspace dimension of a gapped Hamiltonian."""
    e0: float
    e1: float
    e2: float
    count: int
    via_dos: int = Field(..., description="The same count through the DOS reduction")
    dos_query: DosQuery
    agree: bool


class ShiftReport(BaseModel):
    """Quadratic shift of a Hamiltonian and the induced verifier thresholds."""
    e1: float
    e2: float
    delta: float
    nu: float
    m_terms: int
    a_neg: float
    b_pos: float
    a: float = Field(..., description="Verifier acceptance threshold")
    b: float = Field(..., description="Verifier rejection threshold")
    k_prime: int = Field(..., description="Locality of the shifted Hamiltonian")
    spectrum_ok: bool


class TraceCountReport(BaseModel):
    """Path-integral trace, model count and reconstruction of dim A."""
    trace_direct: float
    trace_pathsum: float
    zeta_bits: int
    path_count: int = Field(..., description="Number of path assignments, 2^|zeta|")
    model_count: int = Field(..., ge=0, description="N = sum of g over all paths")
    estimate: float = Field(..., description="2^(-|zeta|-2) N - path_count")
    estimate_error: float
    within_quarter: bool
    accept_bit: int
    realified: bool
    m: int
    T: int
    a: Optional[float] = None
    b: Optional[float] = None
    r: Optional[int] = None
    amplified_trace: Optional[float] = None
    dim_estimate: Optional[int] = None
    dim_from_paths: Optional[int] = None
    dim_accept: Optional[int] = None
    exact_trace: Optional[str] = Field(None, description="Exact rational trace in exact-rational mode")
    exact_error: Optional[float] = None


class EndToEndReport(BaseModel):
    """Counts from every stage of the planted pipeline."""
    n: int
    d: int
    T: int
    seed: int
    eps: float
    a: float
    b: float
    dim_accept: int
    degeneracy: int
    degeneracy_lh: Optional[int] = Field(None, description="Local-term count; None when above the dense cap")
    dim_estimate: Optional[int]
    trace_count: TraceCountReport
    ground_space: GroundSpaceReport
    agree: bool
